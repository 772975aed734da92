//! Small interpolation helpers: monotone piecewise-cubic (Fritsch–Carlson),
//! cubic Hermite, and linear lookups on sorted abscissae.

/// Cubic Hermite interpolant on `[x0, x1]` with end values and slopes.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

fn secant(x: &[f64], y: &[f64], k: usize) -> f64 {
    (y[k + 1] - y[k]) / (x[k + 1] - x[k])
}

/// Monotonicity-preserving slope at node `k`.
pub fn pchip_slope(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len();
    debug_assert!(n >= 2);
    if n == 2 {
        return secant(x, y, 0);
    }
    if k == 0 || k == n - 1 {
        // one-sided three-point estimate, limited
        let (h0, h1, d0, d1) = if k == 0 {
            (x[1] - x[0], x[2] - x[1], secant(x, y, 0), secant(x, y, 1))
        } else {
            (x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], secant(x, y, n - 2), secant(x, y, n - 3))
        };
        let mut d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if d.signum() != d0.signum() || d0 == 0.0 {
            d = 0.0;
        } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
            d = 3.0 * d0;
        }
        return d;
    }
    let (hl, hr) = (x[k] - x[k - 1], x[k + 1] - x[k]);
    let (dl, dr) = (secant(x, y, k - 1), secant(x, y, k));
    if dl * dr <= 0.0 {
        return 0.0;
    }
    let w1 = 2.0 * hr + hl;
    let w2 = hr + 2.0 * hl;
    (w1 + w2) / (w1 / dl + w2 / dr)
}

/// Monotone cubic interpolant evaluated at `s` inside `[x[i], x[i+1]]`.
/// The result lies between `y[i]` and `y[i+1]`.
pub fn pchip_at(x: &[f64], y: &[f64], i: usize, s: f64) -> f64 {
    let d0 = pchip_slope(x, y, i);
    let d1 = pchip_slope(x, y, i + 1);
    let v = hermite(x[i], x[i + 1], y[i], y[i + 1], d0, d1, s);
    let (lo, hi) = if y[i] <= y[i + 1] { (y[i], y[i + 1]) } else { (y[i + 1], y[i]) };
    v.clamp(lo, hi)
}

/// Linear interpolation of `ys` over sorted `xs`; `None` outside the range.
pub fn linear_at(xs: &[f64], ys: &[f64], s: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || !(s >= xs[0]) || s > xs[n - 1] {
        return None;
    }
    if s == xs[n - 1] {
        return Some(ys[n - 1]);
    }
    let k = xs.partition_point(|&v| v <= s) - 1;
    let w = (s - xs[k]) / (xs[k + 1] - xs[k]);
    Some(ys[k] + w * (ys[k + 1] - ys[k]))
}
