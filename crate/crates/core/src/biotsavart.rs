//! Velocity law evaluated from the marker field.
//!
//! Vorticity is represented by its piecewise-linear interpolant through the
//! current marker positions, identically zero outside the marker range. Both
//! `int omega dy` (log frame) and `int omega / y dy` (unit interval) then have
//! closed forms per segment, so a cumulative table answers every interval
//! query exactly up to rounding.
//!
//! Point queries use binary search. The batched evaluators walk sorted
//! positions with forward cursors and cost O(n) per call.

use crate::error::{Error, Result};
use crate::model::{Frame, LagrangianState, ModelParams};

/// Weight multiplying the interpolated vorticity under the integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `int omega(y) dy`
    Unit,
    /// `int omega(y) / y dy`, nodes must be positive.
    Reciprocal,
}

/// Cumulative integrals `cum[i] = int_{nodes[0]}^{nodes[i]} w(y) omega(y) dy`
/// of the piecewise-linear vorticity.
#[derive(Debug, Clone)]
pub struct PrefixTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
    cum: Vec<f64>,
    weight: Weight,
}

impl PrefixTable {
    pub fn from_nodes(nodes: Vec<f64>, values: Vec<f64>, weight: Weight) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::Internal("node and value counts differ".into()));
        }
        if nodes.is_empty() {
            return Err(Error::Internal("empty marker set".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::Internal(format!(
                "marker positions not strictly increasing at index {i} ({} >= {})",
                nodes[i],
                nodes[i + 1]
            )));
        }
        if weight == Weight::Reciprocal && !(nodes[0] > 0.0) {
            return Err(Error::Domain(format!("reciprocal weight needs positive nodes, got {}", nodes[0])));
        }
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..nodes.len() - 1 {
            acc += segment_partial(weight, nodes[k], nodes[k + 1], values[k], values[k + 1], nodes[k + 1]);
            cum.push(acc);
        }
        Ok(PrefixTable { nodes, values, cum, weight })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    /// Index `k` of the segment `[nodes[k], nodes[k+1])` containing `s`, or
    /// `None` outside `[nodes[0], nodes[last])`.
    fn locate(&self, s: f64) -> Option<usize> {
        let n = self.nodes.len();
        if n < 2 || !(s >= self.nodes[0]) || s >= self.nodes[n - 1] {
            return None;
        }
        // partition_point gives the first node > s; s >= nodes[0] so idx >= 1
        let idx = self.nodes.partition_point(|&y| y <= s);
        Some(idx - 1)
    }

    fn cumulative_in(&self, k: usize, s: f64) -> f64 {
        self.cum[k]
            + segment_partial(self.weight, self.nodes[k], self.nodes[k + 1], self.values[k], self.values[k + 1], s)
    }

    fn value_in(&self, k: usize, s: f64) -> f64 {
        let (y0, y1) = (self.nodes[k], self.nodes[k + 1]);
        let (w0, w1) = (self.values[k], self.values[k + 1]);
        w0 + (w1 - w0) * ((s - y0) / (y1 - y0))
    }

    /// `F(s) = int_{nodes[0]}^{s}`, constant outside the node range.
    pub fn cumulative(&self, s: f64) -> f64 {
        match self.locate(s) {
            Some(k) => self.cumulative_in(k, s),
            None if s >= *self.nodes.last().unwrap() => *self.cum.last().unwrap(),
            None => 0.0,
        }
    }

    /// `int_a^b` of the weighted field, for `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }

    /// Interpolated vorticity; right limit at nodes, zero outside the
    /// node range.
    pub fn value(&self, s: f64) -> f64 {
        match self.locate(s) {
            Some(k) => self.value_in(k, s),
            None => 0.0,
        }
    }

    pub fn cursor(&self) -> Cursor<'_> {
        Cursor { table: self, k: 0 }
    }
}

/// `int_{y0}^{s} w(y) omega(y) dy` on one linear segment, `y0 <= s <= y1`.
fn segment_partial(weight: Weight, y0: f64, y1: f64, w0: f64, w1: f64, s: f64) -> f64 {
    let h = s - y0;
    if h == 0.0 {
        return 0.0;
    }
    let slope = (w1 - w0) / (y1 - y0);
    match weight {
        Weight::Unit => h * (w0 + 0.5 * slope * h),
        Weight::Reciprocal => {
            // omega(y) = (w0 - slope*y0) + slope*y
            (w0 - slope * y0) * (h / y0).ln_1p() + slope * h
        }
    }
}

/// Forward-moving evaluator for nondecreasing query sequences. Falls back to
/// binary search when a query moves backwards.
pub struct Cursor<'a> {
    table: &'a PrefixTable,
    k: usize,
}

impl Cursor<'_> {
    fn seek(&mut self, s: f64) -> Option<usize> {
        let nodes = &self.table.nodes;
        let n = nodes.len();
        if n < 2 || !(s >= nodes[0]) || s >= nodes[n - 1] {
            return None;
        }
        if s < nodes[self.k] {
            self.k = self.table.locate(s)?;
            return Some(self.k);
        }
        while s >= nodes[self.k + 1] {
            self.k += 1;
        }
        Some(self.k)
    }

    /// `(F(s), omega(s))`
    pub fn eval(&mut self, s: f64) -> (f64, f64) {
        let t = self.table;
        match self.seek(s) {
            Some(k) => (t.cumulative_in(k, s), t.value_in(k, s)),
            None if s >= *t.nodes.last().unwrap() => (*t.cum.last().unwrap(), 0.0),
            None => (0.0, 0.0),
        }
    }
}

/// Table of the state's vorticity in its own frame: unit weight in the z
/// frame, `1/y` weight in the x frame.
pub fn build_prefix_table(state: &LagrangianState) -> Result<PrefixTable> {
    let weight = match state.frame {
        Frame::ZModel => Weight::Unit,
        Frame::XWarmup => Weight::Reciprocal,
    };
    PrefixTable::from_nodes(state.phi.clone(), state.omega.clone(), weight)
}

/// Log-frame velocity
/// `u(z) = int_0^{(z-g1)+} omega - int_{(z-g1)+}^{z+g2} omega`.
/// The clamp at zero is the image of the unit-interval cutoff at `x = 1`.
pub fn velocity_z(z: f64, table: &PrefixTable, params: &ModelParams) -> f64 {
    let mid = (z - params.gamma1).max(0.0);
    let f0 = table.cumulative(0.0);
    let fm = table.cumulative(mid);
    let fh = table.cumulative(z + params.gamma2);
    (fm - f0) - (fh - fm)
}

/// `d u / d z = 2 omega(z - g1) - omega(z + g2)`, the first term dropped for
/// negative arguments.
pub fn stretch_rate(z: f64, table: &PrefixTable, params: &ModelParams) -> f64 {
    let lo = z - params.gamma1;
    let near = if lo >= 0.0 { table.value(lo) } else { 0.0 };
    2.0 * near - table.value(z + params.gamma2)
}

fn check_unit_interval(x: f64, closed_right: bool) -> Result<()> {
    let ok = x > 0.0 && if closed_right { x <= 1.0 } else { x < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} outside (0, 1{}", if closed_right { "]" } else { ")" })))
    }
}

/// Unit-interval velocity
/// `u(x) = x int_{b2 x}^{b1 x} omega/y - x int_{b1 x}^{1} omega/y`, limits
/// cut off at 1. `table_x` must carry the reciprocal weight.
pub fn velocity_x(x: f64, table_x: &PrefixTable, params: &ModelParams) -> Result<f64> {
    check_unit_interval(x, true)?;
    let lo = (params.beta2 * x).min(1.0);
    let mid = (params.beta1 * x).min(1.0);
    let f_lo = table_x.cumulative(lo);
    let f_mid = table_x.cumulative(mid);
    let f_one = table_x.cumulative(1.0);
    Ok(x * (f_mid - f_lo) - x * (f_one - f_mid))
}

/// `du/dx = u/x + 2 omega(b1 x) [b1 x < 1] - omega(b2 x) [b2 x < 1]`.
pub fn dx_velocity(x: f64, table_x: &PrefixTable, params: &ModelParams) -> Result<f64> {
    check_unit_interval(x, false)?;
    let u = velocity_x(x, table_x, params)?;
    let (p1, p2) = (params.beta1 * x, params.beta2 * x);
    let near = if p1 < 1.0 { table_x.value(p1) } else { 0.0 };
    let far = if p2 < 1.0 { table_x.value(p2) } else { 0.0 };
    Ok(u / x + 2.0 * near - far)
}

/// Velocity and stretching rate at every (sorted) position, log frame.
pub fn velocity_and_stretch_z(
    table: &PrefixTable,
    positions: &[f64],
    params: &ModelParams,
    velocity: &mut Vec<f64>,
    stretch: &mut Vec<f64>,
) {
    velocity.clear();
    stretch.clear();
    let f0 = table.cumulative(0.0);
    let mut near = table.cursor();
    let mut far = table.cursor();
    for &z in positions {
        let lo = z - params.gamma1;
        let (fm, w_near) = near.eval(lo.max(0.0));
        let (fh, w_far) = far.eval(z + params.gamma2);
        velocity.push((fm - f0) - (fh - fm));
        let w_near = if lo >= 0.0 { w_near } else { 0.0 };
        stretch.push(2.0 * w_near - w_far);
    }
}

/// Velocity and `du/dx` at every (sorted) position in (0, 1), unit interval.
pub fn velocity_and_dx_x(
    table_x: &PrefixTable,
    positions: &[f64],
    params: &ModelParams,
    velocity: &mut Vec<f64>,
    gradient: &mut Vec<f64>,
) -> Result<()> {
    velocity.clear();
    gradient.clear();
    let f_one = table_x.cumulative(1.0);
    let mut c_lo = table_x.cursor();
    let mut c_mid = table_x.cursor();
    for &x in positions {
        check_unit_interval(x, false)?;
        let (p1, p2) = (params.beta1 * x, params.beta2 * x);
        let (f_lo, w_lo) = c_lo.eval(p2.min(1.0));
        let (f_mid, w_mid) = c_mid.eval(p1.min(1.0));
        let u = x * (f_mid - f_lo) - x * (f_one - f_mid);
        let near = if p1 < 1.0 { w_mid } else { 0.0 };
        let far = if p2 < 1.0 { w_lo } else { 0.0 };
        velocity.push(u);
        gradient.push(u / x + 2.0 * near - far);
    }
    Ok(())
}
