//! Per-example preference losses: DPO, SimPO, AlphaPO and the
//! reference-policy variants of SimPO and AlphaPO.
//!
//! Every loss has the Bradley-Terry form `-log sigmoid(z)`; the functions
//! here return both the loss and the argument `z` so callers can inspect
//! the implied reward gap. Dataset-level objectives are means of these
//! per-example values and are assembled by the dynamics module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{neg_log_sigmoid, sigmoid};
use crate::rewards::{is_log_shape, reward, RewardConfig, ResponseStats};

/// Policy log-probabilities of a preferred/dispreferred pair, optionally
/// with the reference policy's scores of the same two responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogprobs {
    pub w: ResponseStats,
    pub l: ResponseStats,
    pub ref_w: Option<ResponseStats>,
    pub ref_l: Option<ResponseStats>,
}

impl PairLogprobs {
    pub fn new(w: ResponseStats, l: ResponseStats) -> Result<Self> {
        let pair = Self {
            w,
            l,
            ref_w: None,
            ref_l: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn with_reference(
        w: ResponseStats,
        l: ResponseStats,
        ref_w: ResponseStats,
        ref_l: ResponseStats,
    ) -> Result<Self> {
        let pair = Self {
            w,
            l,
            ref_w: Some(ref_w),
            ref_l: Some(ref_l),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.w.validate()?;
        self.l.validate()?;
        for (reference, policy) in [(&self.ref_w, &self.w), (&self.ref_l, &self.l)] {
            if let Some(r) = reference {
                r.validate()?;
                if r.length != policy.length {
                    return Err(Error::InvalidInput(format!(
                        "reference length {} differs from policy length {}",
                        r.length, policy.length
                    )));
                }
            }
        }
        Ok(())
    }

    fn reference(&self, loss: &'static str) -> Result<(ResponseStats, ResponseStats)> {
        match (self.ref_w, self.ref_l) {
            (Some(rw), Some(rl)) => Ok((rw, rl)),
            _ => Err(Error::MissingReference(loss)),
        }
    }
}

/// `-log sigmoid(bt_argument)` together with its argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub loss: f64,
    pub bt_argument: f64,
}

impl LossValue {
    pub fn from_bt_argument(bt_argument: f64) -> Result<Self> {
        if bt_argument.is_nan() || bt_argument == f64::NEG_INFINITY {
            return Err(Error::Saturation("Bradley-Terry argument"));
        }
        Ok(Self {
            loss: neg_log_sigmoid(bt_argument),
            bt_argument,
        })
    }

    /// `d loss / d bt_argument = -sigmoid(-bt_argument)`, always negative.
    pub fn slope(&self) -> f64 {
        -sigmoid(-self.bt_argument)
    }
}

/// Partial derivatives of a per-example loss with respect to the policy's
/// sequence log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossGradient {
    pub d_logprob_w: f64,
    pub d_logprob_l: f64,
}

/// Bradley-Terry preference probability with a target margin.
pub fn bt_probability(r_w: f64, r_l: f64, gamma: f64) -> f64 {
    sigmoid(r_w - r_l - gamma)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("beta must be finite and > 0, got {beta}")))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma must be finite and >= 0, got {gamma}")))
    }
}

/// DPO: `z = beta * [(log pi_w - log ref_w) - (log pi_l - log ref_l)]`.
pub fn dpo_loss(p: &PairLogprobs, beta: f64) -> Result<LossValue> {
    p.validate()?;
    check_beta(beta)?;
    let (rw, rl) = p.reference("dpo")?;
    let ratio_w = p.w.sum_logprob - rw.sum_logprob;
    let ratio_l = p.l.sum_logprob - rl.sum_logprob;
    LossValue::from_bt_argument(beta * (ratio_w - ratio_l))
}

/// SimPO: `z = (beta/|y_w|) log pi_w - (beta/|y_l|) log pi_l - gamma`.
pub fn simpo_loss(p: &PairLogprobs, beta: f64, gamma: f64) -> Result<LossValue> {
    p.validate()?;
    check_beta(beta)?;
    check_gamma(gamma)?;
    LossValue::from_bt_argument(simpo_margin(p, beta) - gamma)
}

fn simpo_margin(p: &PairLogprobs, beta: f64) -> f64 {
    beta * p.w.normalized_loglik() - beta * p.l.normalized_loglik()
}

/// AlphaPO: `z = r_alpha(y_w) - r_alpha(y_l) - gamma`.
///
/// Identical to [`simpo_loss`] when `|alpha|` is below the log-shape cutoff.
pub fn alphapo_loss(p: &PairLogprobs, cfg: &RewardConfig) -> Result<LossValue> {
    p.validate()?;
    cfg.validate()?;
    if is_log_shape(cfg.alpha) {
        return simpo_loss(p, cfg.beta, cfg.gamma);
    }
    let r_w = reward(cfg, &p.w)?;
    let r_l = reward(cfg, &p.l)?;
    LossValue::from_bt_argument(r_w - r_l - cfg.gamma)
}

/// Per-pair margin that absorbs the reference policy into SimPO:
/// `gamma' = gamma + (beta/|y_w|) log ref_w - (beta/|y_l|) log ref_l`.
pub fn simpo_reference_margin(p: &PairLogprobs, beta: f64, gamma: f64) -> Result<f64> {
    let (rw, rl) = p.reference("simpo_ref")?;
    Ok(gamma + beta * rw.normalized_loglik() - beta * rl.normalized_loglik())
}

/// SimPO with a reference policy, evaluated as SimPO with margin `gamma'`.
pub fn simpo_with_ref_loss(p: &PairLogprobs, beta: f64, gamma: f64) -> Result<LossValue> {
    p.validate()?;
    check_beta(beta)?;
    check_gamma(gamma)?;
    let gamma_ref = simpo_reference_margin(p, beta, gamma)?;
    LossValue::from_bt_argument(simpo_margin(p, beta) - gamma_ref)
}

/// Per-response scale `beta' = beta * pi_ref(y)^(alpha/|y|)`.
pub fn alphapo_reference_scale(beta: f64, alpha: f64, reference: &ResponseStats) -> f64 {
    beta * (alpha * reference.normalized_loglik()).exp()
}

/// AlphaPO with a reference policy, evaluated as AlphaPO with per-response
/// scales `beta'(y_w)` and `beta'(y_l)` on the power terms
/// `-(beta'/alpha) pi^(-alpha/|y|)`. At the log-shape limit this dispatches
/// to [`simpo_with_ref_loss`].
pub fn alphapo_with_ref_loss(p: &PairLogprobs, cfg: &RewardConfig) -> Result<LossValue> {
    p.validate()?;
    cfg.validate()?;
    if is_log_shape(cfg.alpha) {
        return simpo_with_ref_loss(p, cfg.beta, cfg.gamma);
    }
    let (rw, rl) = p.reference("alphapo_ref")?;
    let (term_w, term_l) = alphapo_ref_terms(p, cfg, &rw, &rl)?;
    LossValue::from_bt_argument((term_l - term_w) / cfg.alpha - cfg.gamma)
}

/// `beta' * exp(alpha * c)` for the preferred and dispreferred responses.
fn alphapo_ref_terms(
    p: &PairLogprobs,
    cfg: &RewardConfig,
    rw: &ResponseStats,
    rl: &ResponseStats,
) -> Result<(f64, f64)> {
    let alpha = cfg.alpha;
    let term_w = alphapo_reference_scale(cfg.beta, alpha, rw) * (alpha * p.w.normalized_nll()).exp();
    let term_l = alphapo_reference_scale(cfg.beta, alpha, rl) * (alpha * p.l.normalized_nll()).exp();
    if term_w.is_finite() && term_l.is_finite() {
        Ok((term_w, term_l))
    } else {
        Err(Error::Saturation("reference-weighted reward"))
    }
}

/// The with-reference losses written directly in terms of the policy to
/// reference likelihood ratios, before any reduction.
pub mod unreduced {
    use super::*;

    /// `z = (beta/|y_w|) log(pi_w/ref_w) - (beta/|y_l|) log(pi_l/ref_l) - gamma`.
    pub fn simpo_with_ref_loss(p: &PairLogprobs, beta: f64, gamma: f64) -> Result<LossValue> {
        p.validate()?;
        check_beta(beta)?;
        check_gamma(gamma)?;
        let (rw, rl) = p.reference("simpo_ref")?;
        let lw = p.w.len_f64();
        let ll = p.l.len_f64();
        let z = beta / lw * (p.w.sum_logprob - rw.sum_logprob)
            - beta / ll * (p.l.sum_logprob - rl.sum_logprob)
            - gamma;
        LossValue::from_bt_argument(z)
    }

    /// `z = -(beta/alpha) (pi_w/ref_w)^(-alpha/|y_w|) + (beta/alpha) (pi_l/ref_l)^(-alpha/|y_l|) - gamma`.
    pub fn alphapo_with_ref_loss(p: &PairLogprobs, cfg: &RewardConfig) -> Result<LossValue> {
        p.validate()?;
        cfg.validate()?;
        if is_log_shape(cfg.alpha) {
            return simpo_with_ref_loss(p, cfg.beta, cfg.gamma);
        }
        let (rw, rl) = p.reference("alphapo_ref")?;
        let (alpha, beta) = (cfg.alpha, cfg.beta);
        let pow_w = (-alpha / p.w.len_f64() * (p.w.sum_logprob - rw.sum_logprob)).exp();
        let pow_l = (-alpha / p.l.len_f64() * (p.l.sum_logprob - rl.sum_logprob)).exp();
        let z = -beta / alpha * pow_w + beta / alpha * pow_l - cfg.gamma;
        if !z.is_finite() {
            return Err(Error::Saturation("reference-weighted reward"));
        }
        LossValue::from_bt_argument(z)
    }
}

/// The five supported per-example objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Dpo,
    Simpo,
    Alphapo,
    SimpoRef,
    AlphapoRef,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Dpo,
        LossKind::Simpo,
        LossKind::Alphapo,
        LossKind::SimpoRef,
        LossKind::AlphapoRef,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Dpo => "dpo",
            LossKind::Simpo => "simpo",
            LossKind::Alphapo => "alphapo",
            LossKind::SimpoRef => "simpo_ref",
            LossKind::AlphapoRef => "alphapo_ref",
        }
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, LossKind::Dpo | LossKind::SimpoRef | LossKind::AlphapoRef)
    }

    /// Evaluate the loss. DPO reads only `beta`; SimPO variants ignore `alpha`.
    pub fn evaluate(&self, p: &PairLogprobs, cfg: &RewardConfig) -> Result<LossValue> {
        match self {
            LossKind::Dpo => dpo_loss(p, cfg.beta),
            LossKind::Simpo => simpo_loss(p, cfg.beta, cfg.gamma),
            LossKind::Alphapo => alphapo_loss(p, cfg),
            LossKind::SimpoRef => simpo_with_ref_loss(p, cfg.beta, cfg.gamma),
            LossKind::AlphapoRef => alphapo_with_ref_loss(p, cfg),
        }
    }

    /// Loss value and its partial derivatives in `(log pi_w, log pi_l)`.
    pub fn value_and_gradient(
        &self,
        p: &PairLogprobs,
        cfg: &RewardConfig,
    ) -> Result<(LossValue, LossGradient)> {
        let value = self.evaluate(p, cfg)?;
        let (dz_dw, dz_dl) = self.bt_partials(p, cfg)?;
        let slope = value.slope();
        Ok((
            value,
            LossGradient {
                d_logprob_w: slope * dz_dw,
                d_logprob_l: slope * dz_dl,
            },
        ))
    }

    /// `(dz/d log pi_w, dz/d log pi_l)` for the Bradley-Terry argument `z`.
    fn bt_partials(&self, p: &PairLogprobs, cfg: &RewardConfig) -> Result<(f64, f64)> {
        let lw = p.w.len_f64();
        let ll = p.l.len_f64();
        let beta = cfg.beta;
        let log_shape = is_log_shape(cfg.alpha);
        let partials = match self {
            LossKind::Dpo => (beta, -beta),
            LossKind::Simpo | LossKind::SimpoRef => (beta / lw, -beta / ll),
            LossKind::Alphapo if log_shape => (beta / lw, -beta / ll),
            LossKind::AlphapoRef if log_shape => (beta / lw, -beta / ll),
            LossKind::Alphapo => {
                // dr/d log pi = beta * exp(alpha c) / |y|
                let dw = beta * (cfg.alpha * p.w.normalized_nll()).exp() / lw;
                let dl = beta * (cfg.alpha * p.l.normalized_nll()).exp() / ll;
                (dw, -dl)
            }
            LossKind::AlphapoRef => {
                let (rw, rl) = p.reference("alphapo_ref")?;
                let (term_w, term_l) = alphapo_ref_terms(p, cfg, &rw, &rl)?;
                (term_w / lw, -term_l / ll)
            }
        };
        if partials.0.is_finite() && partials.1.is_finite() {
            Ok(partials)
        } else {
            Err(Error::Saturation("loss gradient"))
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown loss `{s}` (expected dpo, simpo, alphapo, simpo_ref or alphapo_ref)"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::relative_error;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn st(logp: f64, len: usize) -> ResponseStats {
        ResponseStats::new(logp, len).unwrap()
    }

    fn pair(lw: f64, nw: usize, ll: f64, nl: usize) -> PairLogprobs {
        PairLogprobs::new(st(lw, nw), st(ll, nl)).unwrap()
    }

    fn ref_pair(w: (f64, usize), l: (f64, usize), rw: f64, rl: f64) -> PairLogprobs {
        PairLogprobs::with_reference(st(w.0, w.1), st(l.0, l.1), st(rw, w.1), st(rl, l.1)).unwrap()
    }

    #[test]
    fn dpo_examples() {
        let p = ref_pair((-3.0, 2), (-4.0, 3), -3.0, -4.0);
        let v = dpo_loss(&p, 0.7).unwrap();
        assert_eq!(v.bt_argument, 0.0);
        assert!((v.loss - LN_2).abs() < 1e-15);

        // log-ratios -1 (preferred) and -2 (dispreferred)
        let p = ref_pair((-2.0, 1), (-5.0, 1), -1.0, -3.0);
        let v = dpo_loss(&p, 1.0).unwrap();
        assert!((v.bt_argument - 1.0).abs() < 1e-15);
        assert!((v.loss - 0.313_261_687_518_222_8).abs() < 1e-12);
        let small = dpo_loss(&p, 0.01).unwrap();
        assert!(relative_error(small.bt_argument, 0.01 * v.bt_argument) < 1e-15);

        let no_ref = pair(-1.0, 1, -2.0, 1);
        assert_eq!(dpo_loss(&no_ref, 1.0).unwrap_err(), Error::MissingReference("dpo"));
    }

    #[test]
    fn simpo_examples() {
        let v = simpo_loss(&pair(-2.0, 2, -3.0, 3), 1.0, 0.0).unwrap();
        assert!((v.loss - LN_2).abs() < 1e-15);
        let v = simpo_loss(&pair(-1.0, 1, -2.0, 1), 1.0, 0.0).unwrap();
        assert!((v.bt_argument - 1.0).abs() < 1e-15);
        assert!((v.loss - 0.313_261_687_518_222_8).abs() < 1e-12);
        // c_w = 0.8, c_l = 1.2 with beta = 2.5, gamma = 0.25
        let v = simpo_loss(&pair(-4.0, 5, -6.0, 5), 2.5, 0.25).unwrap();
        assert!((v.bt_argument - 0.75).abs() < 1e-12);
    }

    #[test]
    fn alphapo_examples() {
        let p = pair(-1.3, 2, -4.1, 3);
        let cfg = RewardConfig::new(1e-9, 2.5, 0.3).unwrap();
        assert_eq!(alphapo_loss(&p, &cfg).unwrap(), simpo_loss(&p, 2.5, 0.3).unwrap());

        let ill = pair(-1.0, 1, -2.0, 1);
        let v = alphapo_loss(&ill, &RewardConfig::new(0.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((v.bt_argument - 1.0).abs() < 1e-15);
        assert!((-v.slope() - 1.0 / (1.0 + E)).abs() < 1e-15);

        let v = alphapo_loss(&ill, &RewardConfig::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((v.bt_argument - (E * E - E)).abs() < 1e-12);
        assert!((v.loss - 0.009_321_4).abs() < 1e-6, "{}", v.loss);
    }

    #[test]
    fn with_reference_examples() {
        let p = ref_pair((-2.0, 2), (-6.0, 3), -4.0, -6.0);
        let simpo = simpo_loss(&p, 2.0, 0.5).unwrap();
        let with_ref = simpo_with_ref_loss(&p, 2.0, 0.5).unwrap();
        assert!(relative_error(simpo.loss, with_ref.loss) < 1e-15);

        let p = ref_pair((-1.0, 1), (-1.0, 1), -1.0, -2.0);
        assert!((simpo_reference_margin(&p, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);

        let p = ref_pair((-1.0, 2), (-3.0, 2), 0.0, 0.0);
        let cfg = RewardConfig::new(0.7, 1.5, 0.1).unwrap();
        let plain = alphapo_loss(&p, &cfg).unwrap();
        let with_ref = alphapo_with_ref_loss(&p, &cfg).unwrap();
        assert!(relative_error(plain.loss, with_ref.loss) < 1e-13);

        assert!((alphapo_reference_scale(2.0, 1.0, &st(-1.0, 2)) - 2.0 * f64::exp(-0.5)).abs() < 1e-15);

        assert_eq!(
            simpo_with_ref_loss(&pair(-1.0, 1, -2.0, 1), 1.0, 0.0).unwrap_err(),
            Error::MissingReference("simpo_ref")
        );
        let bad = PairLogprobs {
            ref_w: Some(st(-1.0, 3)),
            ref_l: Some(st(-1.0, 1)),
            ..pair(-1.0, 1, -2.0, 1)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn bt_probability_examples() {
        assert_eq!(bt_probability(0.3, 0.3, 0.0), 0.5);
        assert_eq!(bt_probability(2.0, 1.0, 1.0), 0.5);
        assert!((bt_probability(E * E - E, 0.0, 0.0) - 0.990_72).abs() < 1e-5);
    }

    #[test]
    fn loss_kind_round_trips_names() {
        for kind in LossKind::ALL {
            assert_eq!(kind.as_str().parse::<LossKind>().unwrap(), kind);
        }
        assert!("ipo".parse::<LossKind>().is_err());
    }

    fn random_pair(cw: f64, nw: usize, cl: f64, nl: usize, crw: f64, crl: f64) -> PairLogprobs {
        PairLogprobs::with_reference(
            ResponseStats::from_normalized_nll(cw, nw).unwrap(),
            ResponseStats::from_normalized_nll(cl, nl).unwrap(),
            ResponseStats::from_normalized_nll(crw, nw).unwrap(),
            ResponseStats::from_normalized_nll(crl, nl).unwrap(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn loss_is_nonnegative_and_matches_bt(
            cw in 0.0f64..5.0, cl in 0.0f64..5.0, nw in 1usize..20, nl in 1usize..20,
            crw in 0.0f64..5.0, crl in 0.0f64..5.0,
            alpha in -2.0f64..2.0, beta in 0.1f64..10.0, gamma in 0.0f64..3.0,
        ) {
            let p = random_pair(cw, nw, cl, nl, crw, crl);
            let cfg = RewardConfig::new(alpha, beta, gamma).unwrap();
            for kind in LossKind::ALL {
                let v = kind.evaluate(&p, &cfg).unwrap();
                prop_assert!(v.loss >= 0.0);
                let z = v.bt_argument;
                // the naive form is only accurate while sigma(z) is not close to 1
                if z.abs() < 3.0 {
                    let direct = -(1.0 / (1.0 + (-z).exp())).ln();
                    prop_assert!(relative_error(v.loss, direct) < 1e-12, "z = {z}");
                } else if z > 0.0 {
                    prop_assert!(relative_error(v.loss, (-z).exp().ln_1p()) < 1e-12);
                } else {
                    prop_assert!(relative_error(v.loss, -z + z.exp().ln_1p()) < 1e-12);
                }
            }
        }

        #[test]
        fn analytic_partials_match_central_differences(
            cw in 0.1f64..5.0, cl in 0.1f64..5.0, nw in 1usize..8, nl in 1usize..8,
            crw in 0.1f64..5.0, crl in 0.1f64..5.0,
            alpha in -2.0f64..2.0, beta in 0.5f64..3.0, gamma in 0.0f64..1.0,
        ) {
            let p = random_pair(cw, nw, cl, nl, crw, crl);
            let cfg = RewardConfig::new(alpha, beta, gamma).unwrap();
            let h = 1e-6;
            for kind in LossKind::ALL {
                let (_, g) = kind.value_and_gradient(&p, &cfg).unwrap();
                let shift = |dw: f64, dl: f64| {
                    let mut q = p;
                    q.w.sum_logprob += dw;
                    q.l.sum_logprob += dl;
                    kind.evaluate(&q, &cfg).unwrap().loss
                };
                let fd_w = (shift(h, 0.0) - shift(-h, 0.0)) / (2.0 * h);
                let fd_l = (shift(0.0, h) - shift(0.0, -h)) / (2.0 * h);
                let scale = g.d_logprob_w.abs().max(g.d_logprob_l.abs());
                prop_assert!((fd_w - g.d_logprob_w).abs() <= 1e-6 * scale.max(1e-3), "{kind} w {fd_w} {}", g.d_logprob_w);
                prop_assert!((fd_l - g.d_logprob_l).abs() <= 1e-6 * scale.max(1e-3), "{kind} l {fd_l} {}", g.d_logprob_l);
            }
        }

        #[test]
        fn simpo_is_linear_in_beta(
            cw in 0.0f64..5.0, cl in 0.0f64..5.0, beta in 0.1f64..5.0, gamma in 0.0f64..2.0,
        ) {
            let p = random_pair(cw, 3, cl, 4, 1.0, 1.0);
            let one = simpo_loss(&p, beta, gamma).unwrap().bt_argument;
            let two = simpo_loss(&p, 2.0 * beta, 2.0 * gamma).unwrap().bt_argument;
            prop_assert!((two - 2.0 * one).abs() <= 1e-12 * one.abs().max(1.0));
        }
    }

    #[test]
    fn loss_decreases_in_bt_argument() {
        let mut prev = f64::INFINITY;
        for i in -40..=40 {
            let v = LossValue::from_bt_argument(i as f64 * 0.5).unwrap();
            assert!(v.loss < prev);
            prev = v.loss;
        }
    }

    #[test]
    fn alpha_continuity_at_zero() {
        let p = pair(-2.2, 3, -5.5, 4);
        let base = RewardConfig::new(0.0, 2.0, 0.3).unwrap();
        let at_zero = alphapo_loss(&p, &base).unwrap().loss;
        for a in [-1e-5, 1e-5] {
            let v = alphapo_loss(&p, &base.with_alpha(a)).unwrap().loss;
            assert!((v - at_zero).abs() < 1e-4);
        }
    }
}
