//! Self-check suites run by the `check` command.
//!
//! Each suite compares a library routine against an independent oracle.
//! The routine under test for the loss-slope factor is injectable through
//! [`CheckSubject`] so a deliberately broken implementation can be shown to
//! fail the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::Objective;
use crate::error::{Error, Result};
use crate::grad_analysis::{
    alpha_zero, asymptotic_probe, t1, t2, theorem2_condition, Asymptote, ScalarSensitivities,
};
use crate::losses::{self, alphapo_loss, simpo_loss, LossKind, PairLogprobs};
use crate::numeric::relative_error;
use crate::policy::{for_each_sequence, PolicyParams, PreferenceExample, VocabSpec};
use crate::rewards::{derivative_is_monotone_decreasing, reward_derivative, ResponseStats, RewardConfig};

pub type T1Fn = fn(&RewardConfig, f64, f64) -> Result<f64>;

/// Routines exercised by the suites.
#[derive(Clone, Copy)]
pub struct CheckSubject {
    pub t1: T1Fn,
}

impl Default for CheckSubject {
    fn default() -> Self {
        Self { t1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Why a suite failed: an oracle mismatch or an error from the routine.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = std::result::Result<String, Failure>;

type Suite = fn(&CheckSubject) -> Outcome;

const SUITES: [(&str, Suite); 8] = [
    ("loss_gradients", loss_gradients),
    ("magnitude_factorization", magnitude_factorization),
    ("reference_reductions", reference_reductions),
    ("log_shape_limit", log_shape_limit),
    ("derivative_monotonicity", derivative_monotonicity),
    ("asymptotic_probes", asymptotic_probes),
    ("threshold_flip", threshold_flip),
    ("policy_normalization", policy_normalization),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

pub fn run_checks(subject: &CheckSubject) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(name, suite)| {
            let (passed, detail) = match suite(subject) {
                Ok(d) => (true, d),
                Err(Failure(d)) => (false, d),
            };
            SuiteResult { name, passed, detail }
        })
        .collect()
}

pub fn render_table(results: &[SuiteResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {:width$}  {}\n", r.name, r.detail));
    }
    out
}

fn fail(msg: String) -> Outcome {
    Err(Failure(msg))
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn random_sequence(rng: &mut ChaCha8Rng, spec: &VocabSpec) -> Vec<usize> {
    let len = rng.random_range(1..=spec.max_len);
    (0..len).map(|_| rng.random_range(0..spec.vocab_size)).collect()
}

/// Mean-loss gradients through the toy policy against central differences.
fn loss_gradients(_: &CheckSubject) -> Outcome {
    let spec = VocabSpec::new(3, 1, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut count = 0;
    for loss in LossKind::ALL {
        for _ in 0..20 {
            let reference = PolicyParams::random(spec, 2, 1.0, &mut rng)?;
            let params = PolicyParams::random(spec, 2, 1.0, &mut rng)?;
            let data: Vec<PreferenceExample> = (0..3)
                .filter_map(|i| {
                    let (a, b) = (random_sequence(&mut rng, &spec), random_sequence(&mut rng, &spec));
                    PreferenceExample::new(i % 2, a, b).ok()
                })
                .collect();
            if data.is_empty() {
                continue;
            }
            let cfg = RewardConfig::new(rng.random_range(-2.0..2.0), rng.random_range(0.5..3.0), 0.25)
                ?;
            let obj = Objective::new(&reference, &data, loss, cfg)?;
            let (_, grad) = obj.loss_and_gradient(&params)?;
            let mut fd = vec![0.0; grad.len()];
            for (i, slot) in fd.iter_mut().enumerate() {
                let mut plus = params.logits().to_vec();
                let mut minus = plus.clone();
                plus[i] += h;
                minus[i] -= h;
                let lp = obj.mean_loss(&params.with_logits(plus)?);
                let lm = obj.mean_loss(&params.with_logits(minus)?);
                *slot = (lp? - lm?) / (2.0 * h);
            }
            let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
            let rel = max_abs(&diff) / max_abs(&grad).max(1e-300);
            worst = worst.max(rel);
            count += 1;
            if rel > 1e-6 {
                return fail(format!("{loss}: relative error {rel:.2e} > 1e-6"));
            }
        }
    }
    Ok(format!("{count} instances, worst relative error {worst:.2e}"))
}

/// `T1 * T2` against a central difference of the loss along a scalar
/// direction that moves both probabilities linearly.
fn magnitude_factorization(subject: &CheckSubject) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let lw = rng.random_range(1..=5usize);
        let ll = rng.random_range(1..=5usize);
        let pw: f64 = rng.random_range(0.05..0.9);
        let pl: f64 = rng.random_range(0.05..0.9);
        let (sw, sl) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let cfg = RewardConfig::new(rng.random_range(-2.0..2.0), rng.random_range(0.5..3.0), rng.random_range(0.0..1.0))
            ?;
        let loss_at = |v: f64| -> Result<f64> {
            let w = ResponseStats::new((pw + sw * v).ln(), lw)?;
            let l = ResponseStats::new((pl + sl * v).ln(), ll)?;
            Ok(alphapo_loss(&PairLogprobs::new(w, l)?, &cfg)?.loss)
        };
        let h = 1e-6;
        let fd = ((loss_at(h)? - loss_at(-h)?) / (2.0 * h)).abs();
        let w = ResponseStats::new(pw.ln(), lw)?;
        let l = ResponseStats::new(pl.ln(), ll)?;
        let s = ScalarSensitivities::new(sw, sl);
        let a = (subject.t1)(&cfg, w.normalized_nll(), l.normalized_nll())?;
        let b = t2(cfg.alpha, &w, &l, &s)?;
        let rel = relative_error(a * b, fd);
        worst = worst.max(rel);
        if rel > 1e-5 && (a * b - fd).abs() > 1e-12 {
            return fail(format!("instance {i}: T1*T2 = {:.6e}, difference quotient {fd:.6e}", a * b));
        }
    }
    Ok(format!("100 instances, worst relative error {worst:.2e}"))
}

fn random_pair(rng: &mut ChaCha8Rng) -> Result<PairLogprobs> {
    let stats = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..=8usize);
        ResponseStats::from_normalized_nll(rng.random_range(0.1..2.0), len).map(|s| (s, len))
    };
    let (w, lw) = stats(rng)?;
    let (l, ll) = stats(rng)?;
    let rw = ResponseStats::from_normalized_nll(rng.random_range(0.1..2.0), lw)?;
    let rl = ResponseStats::from_normalized_nll(rng.random_range(0.1..2.0), ll)?;
    PairLogprobs::with_reference(w, l, rw, rl)
}

/// Reduced with-reference losses against their direct ratio forms.
fn reference_reductions(_: &CheckSubject) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let p = random_pair(&mut rng)?;
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let cfg = RewardConfig::new(sign * rng.random_range(0.01..1.0), rng.random_range(0.5..5.0), rng.random_range(0.0..1.0))
            ?;
        let pairs = [
            (
                losses::simpo_with_ref_loss(&p, cfg.beta, cfg.gamma),
                losses::unreduced::simpo_with_ref_loss(&p, cfg.beta, cfg.gamma),
            ),
            (losses::alphapo_with_ref_loss(&p, &cfg), losses::unreduced::alphapo_with_ref_loss(&p, &cfg)),
        ];
        for (reduced, direct) in pairs {
            let rel = relative_error(reduced?.loss, direct?.loss);
            worst = worst.max(rel);
            if rel > 1e-12 {
                return fail(format!("instance {i}: relative error {rel:.2e} > 1e-12"));
            }
        }
    }
    Ok(format!("2000 comparisons, worst relative error {worst:.2e}"))
}

/// AlphaPO at alpha = +-1e-6 against SimPO, within the remainder bound
/// `|r_alpha(c) - r_0(c)| <= beta |alpha| c^2 / 2 * exp(|alpha| c)`; the loss
/// is 1-Lipschitz in its Bradley-Terry argument.
fn log_shape_limit(_: &CheckSubject) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let lw = rng.random_range(1..=8usize);
        let ll = rng.random_range(1..=8usize);
        let w = ResponseStats::from_normalized_nll(rng.random_range(0.1..5.0), lw)?;
        let l = ResponseStats::from_normalized_nll(rng.random_range(0.1..5.0), ll)?;
        let p = PairLogprobs::new(w, l)?;
        let beta = [1.0, 2.5, 10.0][i % 3];
        let gamma = [0.0, 0.25, 5.0][(i / 3) % 3];
        let base = simpo_loss(&p, beta, gamma)?.loss;
        for alpha in [-1e-6, 1e-6] {
            let cfg = RewardConfig::new(alpha, beta, gamma)?;
            let d = (alphapo_loss(&p, &cfg)?.loss - base).abs();
            let remainder = |c: f64| beta * alpha.abs() * c * c / 2.0 * (alpha.abs() * c).exp();
            let bound = remainder(w.normalized_nll()) + remainder(l.normalized_nll());
            worst = worst.max(d / bound);
            if d > bound * (1.0 + 1e-6) + 1e-15 {
                return fail(format!("instance {i}, alpha {alpha}: |difference| {d:.2e} > bound {bound:.2e}"));
            }
        }
    }
    Ok(format!("2000 comparisons, worst difference/bound {worst:.3}"))
}

/// Closed-form monotonicity test against a scan of the reward derivative.
fn derivative_monotonicity(_: &CheckSubject) -> Outcome {
    let mut cells = 0;
    for &len in &[1usize, 10] {
        for &alpha in &[-12.0, -10.0001, -10.0, -9.9999, -1.0, 0.0, 1.0] {
            let cfg = RewardConfig::new(alpha, 1.0, 0.0)?;
            let mut prev = f64::INFINITY;
            let mut decreasing = true;
            for k in 0..=60 {
                let log_pi = -12.0 * (60 - k) as f64 / 60.0;
                let s = ResponseStats::new(log_pi, len)?;
                let d = reward_derivative(&cfg, &s)?;
                if d > prev * (1.0 + 1e-12) {
                    decreasing = false;
                }
                prev = d;
            }
            if decreasing != derivative_is_monotone_decreasing(alpha, len) {
                return fail(format!("alpha {alpha}, |y| {len}: scan says {decreasing}"));
            }
            cells += 1;
        }
    }
    Ok(format!("{cells} grid cells agree"))
}

/// Tail behaviour of the magnitude on the worked toy pairs.
fn asymptotic_probes(subject: &CheckSubject) -> Outcome {
    let grid: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.5).collect();
    let s = ScalarSensitivities::unit();
    let cfg = RewardConfig::new(0.0, 1.0, 0.0)?;
    let st = |lp: f64| ResponseStats::new(lp, 1);
    let cases = [
        (-1.0, -2.0, Asymptote::Vanishes, Asymptote::Vanishes),
        (-2.0, -1.0, Asymptote::Vanishes, Asymptote::Diverges),
    ];
    for (lw, ll, neg, pos) in cases {
        let p = asymptotic_probe(&cfg, &st(lw)?, &st(ll)?, &s, &grid)?;
        if p.negative != neg || p.positive != pos {
            return fail(format!("log pi = ({lw}, {ll}): got {p:?}"));
        }
    }
    let w = st(-1.5)?;
    for &alpha in &grid {
        let c = cfg.with_alpha(alpha);
        let m = (subject.t1)(&c, w.normalized_nll(), w.normalized_nll())?
            * t2(alpha, &w, &w, &s)?;
        if m != 0.0 {
            return fail(format!("zero margin gives {m:e} at alpha {alpha}"));
        }
    }
    Ok("vanish/diverge classes and zero-margin case hold".into())
}

/// The increase condition switches value across the threshold.
fn threshold_flip(_: &CheckSubject) -> Outcome {
    let spec = VocabSpec::new(3, 1, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 50 {
        attempts += 1;
        if attempts > 10_000 {
            return fail(format!("only {checked} usable instances"));
        }
        let p = PolicyParams::random(spec, 1, 1.5, &mut rng)?;
        let (a, b) = (random_sequence(&mut rng, &spec), random_sequence(&mut rng, &spec));
        let Ok(ex) = PreferenceExample::new(0, a, b) else { continue };
        let vg = p.vector_gradients(&ex)?;
        let w = p.response_stats(0, &ex.y_w)?;
        let l = p.response_stats(0, &ex.y_l)?;
        let Ok(a0) = alpha_zero(&w, &l, &vg) else { continue };
        if !a0.is_finite() || a0.abs() > 50.0 {
            continue;
        }
        let eps = 1e-6 * a0.abs().max(1.0);
        let at = |alpha: f64| RewardConfig::new(alpha, 1.0, 0.0).map(|c| theorem2_condition(&c, &w, &l, &vg));
        let below = at(a0 - eps)?;
        let above = at(a0 + eps)?;
        if below == above {
            return fail(format!("no switch around alpha_0 = {a0}"));
        }
        checked += 1;
    }
    Ok(format!("{checked} instances switch at alpha_0"))
}

/// Sequence probabilities of each fixed length sum to one.
fn policy_normalization(_: &CheckSubject) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for (v, k) in [(2usize, 0usize), (3, 1), (4, 2)] {
        let spec = VocabSpec::new(v, k, 5)?;
        let p = PolicyParams::random(spec, 2, 2.0, &mut rng)?;
        for len in 1..=5 {
            let mut total = 0.0;
            for_each_sequence(v, len, |y| total += p.seq_logprob(1, y).map(f64::exp).unwrap_or(f64::NAN));
            let err = (total - 1.0).abs();
            worst = worst.max(err);
            if !(err <= 1e-10) {
                return fail(format!("vocab {v}, order {k}, length {len}: mass {total}"));
            }
        }
    }
    Ok(format!("15 length/shape cells, worst |mass - 1| {worst:.1e}"))
}
