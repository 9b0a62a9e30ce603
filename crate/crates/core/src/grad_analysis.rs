//! Per-sample gradient analysis of the AlphaPO loss.
//!
//! For a generic parameter `v` the magnitude of the per-example gradient
//! factors as `|dl/dv| = T1(alpha) * T2(alpha)` with
//!
//! ```text
//! T1 = beta / (1 + exp(delta_r - gamma))
//! T2 = | exp(alpha c_w) / (pi_w |y_w|) * dpi_w/dv - exp(alpha c_l) / (pi_l |y_l|) * dpi_l/dv |
//! ```
//!
//! where `delta_r = (beta/alpha) (exp(alpha c_l) - exp(alpha c_w))`.
//! Both factors are computed in log space, so magnitudes whose factors
//! individually over- or underflow still come out right.
//!
//! The module also carries the asymptotic probe for `alpha -> +-inf`, the
//! increase condition for the preferred probability under gradient flow,
//! and the threshold `alpha_0` at which that condition switches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_abs_diff, softplus};
use crate::rewards::{is_log_shape, RewardConfig, ResponseStats};

/// Derivatives of the two sequence probabilities with respect to one
/// scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSensitivities {
    pub dpi_w_dv: f64,
    pub dpi_l_dv: f64,
}

impl ScalarSensitivities {
    pub fn new(dpi_w_dv: f64, dpi_l_dv: f64) -> Self {
        Self { dpi_w_dv, dpi_l_dv }
    }

    pub fn unit() -> Self {
        Self::new(1.0, 1.0)
    }
}

/// Full gradients of `pi_w` and `pi_l` over every parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorGradients {
    pub grad_pi_w: Vec<f64>,
    pub grad_pi_l: Vec<f64>,
    pub inner: f64,
    pub norm_w_sq: f64,
}

impl VectorGradients {
    pub fn new(grad_pi_w: Vec<f64>, grad_pi_l: Vec<f64>) -> Result<Self> {
        if grad_pi_w.len() != grad_pi_l.len() {
            return Err(Error::InvalidInput(format!(
                "gradient lengths differ: {} vs {}",
                grad_pi_w.len(),
                grad_pi_l.len()
            )));
        }
        let inner = grad_pi_w.iter().zip(&grad_pi_l).map(|(a, b)| a * b).sum();
        let norm_w_sq = grad_pi_w.iter().map(|a| a * a).sum();
        Ok(Self {
            grad_pi_w,
            grad_pi_l,
            inner,
            norm_w_sq,
        })
    }

    pub fn norm_l_sq(&self) -> f64 {
        self.grad_pi_l.iter().map(|a| a * a).sum()
    }
}

/// Everything the gradient analysis says about one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientDiagnostics {
    pub c_w: f64,
    pub c_l: f64,
    pub delta_r: f64,
    pub t1: f64,
    pub t2: f64,
    pub magnitude: f64,
    /// Length-normalized margin `c_l - c_w`.
    pub margin: f64,
    pub alpha_zero: Option<f64>,
    pub theorem2_holds: Option<bool>,
}

/// `delta_r = r(pi_w) - r(pi_l)` from normalized NLLs.
pub fn reward_gap(alpha: f64, beta: f64, c_w: f64, c_l: f64) -> f64 {
    if c_w == c_l {
        return 0.0;
    }
    if is_log_shape(alpha) {
        return beta * (c_l - c_w);
    }
    // (beta/alpha)(e^{a c_l} - e^{a c_w}) = (beta/alpha) e^{a c_w} expm1(a (c_l - c_w))
    beta / alpha * (alpha * c_w).exp() * (alpha * (c_l - c_w)).exp_m1()
}

fn check_nll(c: f64, what: &'static str) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} must be finite and >= 0, got {c}")))
    }
}

/// `log T1`; never fails, saturates to `-inf` or `log beta`.
pub fn log_t1(cfg: &RewardConfig, c_w: f64, c_l: f64) -> f64 {
    let z = reward_gap(cfg.alpha, cfg.beta, c_w, c_l) - cfg.gamma;
    cfg.beta.ln() - softplus(z)
}

/// The loss-slope factor `T1(alpha)`, in `[0, beta]`.
pub fn t1(cfg: &RewardConfig, c_w: f64, c_l: f64) -> Result<f64> {
    cfg.validate()?;
    check_nll(c_w, "c_w")?;
    check_nll(c_l, "c_l")?;
    Ok(log_t1(cfg, c_w, c_l).exp())
}

/// `log T2`, `-inf` when the two terms cancel exactly.
pub fn log_t2(alpha: f64, w: &ResponseStats, l: &ResponseStats, s: &ScalarSensitivities) -> f64 {
    let log_term = |stats: &ResponseStats, sens: f64| {
        let shape = if is_log_shape(alpha) { 0.0 } else { alpha * stats.normalized_nll() };
        shape - stats.sum_logprob - stats.len_f64().ln() + sens.abs().ln()
    };
    log_abs_diff(
        sign(s.dpi_w_dv),
        log_term(w, s.dpi_w_dv),
        sign(s.dpi_l_dv),
        log_term(l, s.dpi_l_dv),
    )
}

fn sign(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

fn check_sensitivities(s: &ScalarSensitivities) -> Result<()> {
    if s.dpi_w_dv.is_finite() && s.dpi_l_dv.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("probability sensitivity"))
    }
}

/// The reward-sensitivity factor `T2(alpha)`.
pub fn t2(alpha: f64, w: &ResponseStats, l: &ResponseStats, s: &ScalarSensitivities) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    w.validate()?;
    l.validate()?;
    check_sensitivities(s)?;
    let value = log_t2(alpha, w, l, s).exp();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Saturation("T2"))
    }
}

/// `log |dl/dv| = log T1 + log T2`; finite far beyond where the product
/// itself would leave the f64 range.
pub fn log_grad_magnitude(
    cfg: &RewardConfig,
    w: &ResponseStats,
    l: &ResponseStats,
    s: &ScalarSensitivities,
) -> Result<f64> {
    cfg.validate()?;
    w.validate()?;
    l.validate()?;
    check_sensitivities(s)?;
    let lt2 = log_t2(cfg.alpha, w, l, s);
    if lt2 == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_t1(cfg, w.normalized_nll(), l.normalized_nll()) + lt2)
}

/// `|dl/dv| = T1 * T2` with the margin and reward gap.
pub fn per_sample_grad_magnitude(
    cfg: &RewardConfig,
    w: &ResponseStats,
    l: &ResponseStats,
    s: &ScalarSensitivities,
) -> Result<GradientDiagnostics> {
    let (c_w, c_l) = (w.normalized_nll(), l.normalized_nll());
    let t1 = t1(cfg, c_w, c_l)?;
    let t2 = t2(cfg.alpha, w, l, s)?;
    Ok(GradientDiagnostics {
        c_w,
        c_l,
        delta_r: reward_gap(cfg.alpha, cfg.beta, c_w, c_l),
        t1,
        t2,
        magnitude: t1 * t2,
        margin: c_l - c_w,
        alpha_zero: None,
        theorem2_holds: None,
    })
}

/// [`per_sample_grad_magnitude`] plus the increase condition and, when its
/// premises hold, the threshold `alpha_0`.
pub fn per_sample_diagnostics(
    cfg: &RewardConfig,
    w: &ResponseStats,
    l: &ResponseStats,
    s: &ScalarSensitivities,
    vg: &VectorGradients,
) -> Result<GradientDiagnostics> {
    let mut diag = per_sample_grad_magnitude(cfg, w, l, s)?;
    diag.alpha_zero = alpha_zero(w, l, vg).ok();
    diag.theorem2_holds = Some(theorem2_condition(cfg, w, l, vg));
    Ok(diag)
}

/// Limiting behaviour of `|dl/dv|` at one end of the alpha axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asymptote {
    Vanishes,
    Diverges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymptoticProfile {
    pub negative: Asymptote,
    pub positive: Asymptote,
}

pub const VANISH_THRESHOLD: f64 = 1e-6;
pub const DIVERGE_THRESHOLD: f64 = 1e6;
const MONOTONE_WINDOW: usize = 5;

/// Classify `|dl/dv|` as `alpha -> -inf` and `alpha -> +inf` from its values
/// on a grid spanning at least `[-50, 50]`.
///
/// An end vanishes when the magnitude there is below `1e-6`. It diverges
/// when the magnitude exceeds `1e6` and grows strictly over the last five
/// grid points approaching that end. Anything else is inconclusive.
pub fn asymptotic_probe(
    cfg: &RewardConfig,
    w: &ResponseStats,
    l: &ResponseStats,
    s: &ScalarSensitivities,
    alpha_grid: &[f64],
) -> Result<AsymptoticProfile> {
    if alpha_grid.len() < MONOTONE_WINDOW || alpha_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidInput(
            "alpha grid must be strictly increasing with at least 5 points".into(),
        ));
    }
    let (first, last) = (alpha_grid[0], alpha_grid[alpha_grid.len() - 1]);
    if first > -50.0 || last < 50.0 {
        return Err(Error::InvalidInput(format!(
            "alpha grid [{first}, {last}] must span [-50, 50]"
        )));
    }
    let log_mags = alpha_grid
        .iter()
        .map(|&a| log_grad_magnitude(&cfg.with_alpha(a), w, l, s))
        .collect::<Result<Vec<_>>>()?;

    let classify = |window: &[f64], alpha: f64| -> Result<Asymptote> {
        // window ordered from the interior toward the end
        let end = window[window.len() - 1];
        if end < VANISH_THRESHOLD.ln() {
            return Ok(Asymptote::Vanishes);
        }
        if end > DIVERGE_THRESHOLD.ln() && window.windows(2).all(|p| p[1] > p[0]) {
            return Ok(Asymptote::Diverges);
        }
        Err(Error::Inconclusive {
            alpha,
            magnitude: end.exp(),
        })
    };
    let n = log_mags.len();
    let mut head: Vec<f64> = log_mags[..MONOTONE_WINDOW].to_vec();
    head.reverse();
    Ok(AsymptoticProfile {
        negative: classify(&head, first)?,
        positive: classify(&log_mags[n - MONOTONE_WINDOW..], last)?,
    })
}

/// Length-normalized margin `log pi_w/|y_w| - log pi_l/|y_l|`.
pub fn normalized_margin(w: &ResponseStats, l: &ResponseStats) -> f64 {
    w.normalized_loglik() - l.normalized_loglik()
}

/// The alpha at which [`theorem2_condition`] switches:
///
/// ```text
/// alpha_0 = -log( <grad pi_w, grad pi_l> / |grad pi_w|^2 * (pi_w |y_w|) / (pi_l |y_l|) ) / margin
/// ```
///
/// Solving `r'(pi_w)/r'(pi_l) = <grad pi_w, grad pi_l> / |grad pi_w|^2` for
/// alpha gives this form. For a negative margin the condition holds for
/// `alpha >= alpha_0`, for a positive margin for `alpha <= alpha_0`.
pub fn alpha_zero(w: &ResponseStats, l: &ResponseStats, vg: &VectorGradients) -> Result<f64> {
    w.validate()?;
    l.validate()?;
    if !(vg.inner > 0.0) {
        return Err(Error::PremiseViolation(vg.inner));
    }
    let margin = normalized_margin(w, l);
    if margin == 0.0 {
        return Err(Error::UndefinedThreshold);
    }
    let log_ratio = vg.inner.ln() - vg.norm_w_sq.ln() + w.sum_logprob + w.len_f64().ln()
        - l.sum_logprob
        - l.len_f64().ln();
    Ok(-log_ratio / margin)
}

/// `log( r'(pi_w) / r'(pi_l) )`; beta cancels.
pub fn log_reward_derivative_ratio(alpha: f64, w: &ResponseStats, l: &ResponseStats) -> f64 {
    let shape = if is_log_shape(alpha) {
        0.0
    } else {
        alpha * (w.normalized_nll() - l.normalized_nll())
    };
    shape + l.sum_logprob + l.len_f64().ln() - w.sum_logprob - w.len_f64().ln()
}

/// Sufficient condition for `pi_w` to increase under gradient flow on a
/// single example: `r'(pi_w)/r'(pi_l) >= <grad pi_w, grad pi_l> / |grad pi_w|^2`.
/// Holds for every alpha when the inner product is not positive.
pub fn theorem2_condition(
    cfg: &RewardConfig,
    w: &ResponseStats,
    l: &ResponseStats,
    vg: &VectorGradients,
) -> bool {
    if vg.inner <= 0.0 {
        return true;
    }
    log_reward_derivative_ratio(cfg.alpha, w, l) >= vg.inner.ln() - vg.norm_w_sq.ln()
}

/// One cell of the `(alpha, |y|)` gradient-magnitude surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub length: usize,
    pub log10_magnitude: f64,
}

/// `log10 |dl/dv|` over `alpha_grid x length_grid` for a pair scored with
/// fixed sequence log-probabilities and unit sensitivities, the lengths of
/// both responses set to the grid length.
pub fn magnitude_surface(
    beta: f64,
    gamma: f64,
    log_pi_w: f64,
    log_pi_l: f64,
    alpha_grid: &[f64],
    length_grid: &[usize],
) -> Result<Vec<SurfacePoint>> {
    let mut out = Vec::with_capacity(alpha_grid.len() * length_grid.len());
    for &length in length_grid {
        let w = ResponseStats::new(log_pi_w, length)?;
        let l = ResponseStats::new(log_pi_l, length)?;
        for &alpha in alpha_grid {
            let cfg = RewardConfig::new(alpha, beta, gamma)?;
            let lm = log_grad_magnitude(&cfg, &w, &l, &ScalarSensitivities::unit())?;
            out.push(SurfacePoint {
                alpha,
                length,
                log10_magnitude: lm / std::f64::consts::LN_10,
            });
        }
    }
    Ok(out)
}
