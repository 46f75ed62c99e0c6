//! Special functions shared by the filters.
//!
//! Log-gamma and the regularized incomplete gamma come from `statrs`; the
//! densities built on them are evaluated in log space so large counts never
//! overflow.

use statrs::function::gamma;

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Upper regularized incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(a, x)
}

/// Log density of Gamma(shape, rate) at `x`.
pub fn gamma_ln_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => rate.ln(),
            _ => f64::NEG_INFINITY,
        };
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Beta(a, b) density on [0, 1]; callers guarantee `a, b >= 1`, so the value is finite.
pub fn beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let lx = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let l1x = if b == 1.0 { 0.0 } else { (b - 1.0) * (1.0 - x).ln() };
    (lx + l1x - ln_beta(a, b)).exp()
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Composite Simpson rule over `[lo, hi]` with `intervals` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + k as f64 * h);
    }
    acc * h / 3.0
}

/// Tanh-sinh quadrature over `[lo, hi]`; tolerates integrable endpoint singularities.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let h = 1.0 / 64.0;
    let mut acc = 0.0;
    let n = (4.0 / h) as i64;
    for k in -n..=n {
        let t = k as f64 * h;
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = s.tanh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / s.cosh().powi(2);
        // Distance to the nearer endpoint, computed without cancellation.
        let gap = 1.0 / (s.abs().exp() * s.cosh());
        if gap <= 0.0 {
            continue;
        }
        let point = if x < 0.0 { lo + half * gap } else { hi - half * gap };
        let v = f(if x == 0.0 { mid } else { point });
        if v.is_finite() {
            acc += w * v;
        }
    }
    acc * h * half
}

/// Neumaier-compensated sum; used where totals are compared at 1e-12.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
