//! Small numerically stable scalar helpers shared by the loss and
//! diagnostic modules.

/// `log(1 + exp(x))` without overflow for large `x` or loss of precision for
/// very negative `x`.
pub fn softplus(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + exp(-x))`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log sigmoid(x)`, the Bradley-Terry negative log-likelihood.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    softplus(-x)
}

/// `log |a - b|` where `a = sign_a * exp(log_a)` and `b = sign_b * exp(log_b)`.
///
/// Terms with a zero sign are dropped. Returns `-inf` when the difference is
/// exactly zero.
pub fn log_abs_diff(sign_a: f64, log_a: f64, sign_b: f64, log_b: f64) -> f64 {
    let a_live = sign_a != 0.0 && log_a > f64::NEG_INFINITY;
    let b_live = sign_b != 0.0 && log_b > f64::NEG_INFINITY;
    match (a_live, b_live) {
        (false, false) => f64::NEG_INFINITY,
        (true, false) => log_a,
        (false, true) => log_b,
        (true, true) => {
            let top = log_a.max(log_b);
            let a = sign_a.signum() * (log_a - top).exp();
            let b = sign_b.signum() * (log_b - top).exp();
            top + (a - b).abs().ln()
        }
    }
}

/// Quantile with linear interpolation between order statistics (the
/// "type 7" rule). `sorted` must be non-empty and ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
