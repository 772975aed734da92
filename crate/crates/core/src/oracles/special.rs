//! Exponential integral and adaptive quadrature.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^x E1(x)` for `x > 0`.
pub fn e1_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 1.0 {
        return x.exp() * e1_series(x);
    }
    // modified Lentz on the continued fraction
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Exponential integral `E1(x) = int_x^inf e^{-s}/s ds`.
pub fn e1(x: f64) -> f64 {
    if x <= 1.0 {
        e1_series(x)
    } else {
        (-x).exp() * e1_scaled(x)
    }
}

/// `ln E1(x)`, finite far beyond the underflow of `E1` itself.
pub fn ln_e1(x: f64) -> f64 {
    if x <= 1.0 {
        e1_series(x).ln()
    } else {
        -x + e1_scaled(x).ln()
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
