//! Gradient-flow training of the toy policy on a preference dataset.
//!
//! The flow `d theta / dt = -grad L(theta)` on the dataset-mean loss is
//! integrated with explicit Euler or classical RK4. Snapshots record the
//! length-normalized likelihood statistics, the mean loss and the KL
//! divergence to the initial (reference) policy.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::losses::{LossKind, PairLogprobs};
use crate::numeric::quantile_sorted;
use crate::policy::{for_each_sequence, PolicyParams, PreferenceExample, VocabSpec};
use crate::rewards::{ResponseStats, RewardConfig};

/// Examples per parallel work unit; partial sums are combined in order.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Rk4,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::Config(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub method: Method,
    pub step_size: f64,
    pub total_time: f64,
    pub snapshot_every: f64,
    pub loss: LossKind,
    pub reward: RewardConfig,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step_size: 1e-3,
            total_time: 1.0,
            snapshot_every: 0.1,
            loss: LossKind::Alphapo,
            reward: RewardConfig::default(),
            seed: 0,
        }
    }
}

impl FlowConfig {
    /// `total_time = 0` is accepted and yields only the initial snapshot.
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.step_size) {
            return Err(Error::Config(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if !positive(self.snapshot_every) {
            return Err(Error::Config(format!(
                "snapshot_every must be > 0, got {}",
                self.snapshot_every
            )));
        }
        if !(self.total_time.is_finite() && self.total_time >= 0.0) {
            return Err(Error::Config(format!(
                "total_time must be >= 0, got {}",
                self.total_time
            )));
        }
        if self.step_size > self.snapshot_every {
            return Err(Error::Config("step_size must not exceed snapshot_every".into()));
        }
        if self.total_time > 0.0 && self.snapshot_every > self.total_time {
            return Err(Error::Config("snapshot_every must not exceed total_time".into()));
        }
        Ok(())
    }

    /// Snapshot times: multiples of `snapshot_every` plus the terminal time.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        let tol = 1e-9 * self.snapshot_every;
        let mut k = 1u64;
        loop {
            let t = k as f64 * self.snapshot_every;
            if t >= self.total_time - tol {
                break;
            }
            times.push(t);
            k += 1;
        }
        if self.total_time > 0.0 {
            times.push(self.total_time);
        }
        times
    }
}

/// Five-number summary. Quartiles use the full sample; `min` and `max` are
/// the extremes left after [`remove_outliers`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("cannot summarize an empty sample".into()));
        }
        let sorted = sorted_copy(values);
        let kept = remove_outliers(&sorted);
        Ok(Self {
            min: kept[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: kept[kept.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Drop values outside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`. Lists shorter than
/// four are returned unchanged. Order of the kept values is preserved.
pub fn remove_outliers(values: &[f64]) -> Vec<f64> {
    if values.len() < 4 {
        return values.to_vec();
    }
    let sorted = sorted_copy(values);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let fence = 1.5 * (q3 - q1);
    let (lo, hi) = (q1 - fence, q3 + fence);
    values.iter().copied().filter(|x| (lo..=hi).contains(x)).collect()
}

/// Length-normalized likelihoods of one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleStats {
    pub norm_loglik_w: f64,
    pub norm_loglik_l: f64,
    pub norm_margin: f64,
}

impl ExampleStats {
    pub fn measure(params: &PolicyParams, ex: &PreferenceExample) -> Result<Self> {
        let w = params.response_stats(ex.prompt_class, &ex.y_w)?.normalized_loglik();
        let l = params.response_stats(ex.prompt_class, &ex.y_l)?.normalized_loglik();
        Ok(Self {
            norm_loglik_w: w,
            norm_loglik_l: l,
            norm_margin: w - l,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySnapshot {
    pub time: f64,
    pub examples: Vec<ExampleStats>,
    pub loglik_w: Summary,
    pub loglik_l: Summary,
    pub margin: Summary,
    pub mean_loss: f64,
    pub kl_to_reference: f64,
}

impl TrajectorySnapshot {
    /// `(name, summary)` for the three tracked quantities.
    pub fn summaries(&self) -> [(&'static str, &Summary); 3] {
        [
            ("norm_loglik_w", &self.loglik_w),
            ("norm_loglik_l", &self.loglik_l),
            ("norm_margin", &self.margin),
        ]
    }
}

/// A trajectory that stopped early, with every snapshot taken before the
/// failure.
#[derive(Debug, Clone, Error)]
#[error("{source} (after {} good snapshots)", snapshots.len())]
pub struct TrajectoryAbort {
    pub snapshots: Vec<TrajectorySnapshot>,
    pub source: Error,
}

/// The dataset-mean loss with the reference scores cached.
pub struct Objective<'a> {
    data: &'a [PreferenceExample],
    reference: Vec<(ResponseStats, ResponseStats)>,
    loss: LossKind,
    reward: RewardConfig,
}

impl<'a> Objective<'a> {
    pub fn new(
        reference: &PolicyParams,
        data: &'a [PreferenceExample],
        loss: LossKind,
        reward: RewardConfig,
    ) -> Result<Self> {
        reward.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        let reference = data
            .iter()
            .map(|ex| {
                ex.validate(reference.spec(), reference.prompt_classes())?;
                Ok((
                    reference.response_stats(ex.prompt_class, &ex.y_w)?,
                    reference.response_stats(ex.prompt_class, &ex.y_l)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            data,
            reference,
            loss,
            reward,
        })
    }

    fn pair(&self, params: &PolicyParams, i: usize) -> Result<PairLogprobs> {
        let ex = &self.data[i];
        let (rw, rl) = self.reference[i];
        PairLogprobs::with_reference(
            params.response_stats(ex.prompt_class, &ex.y_w)?,
            params.response_stats(ex.prompt_class, &ex.y_l)?,
            rw,
            rl,
        )
    }

    pub fn mean_loss(&self, params: &PolicyParams) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.data.len() {
            total += self.loss.evaluate(&self.pair(params, i)?, &self.reward)?.loss;
        }
        Ok(total / self.data.len() as f64)
    }

    /// Mean loss and its gradient over every logit.
    pub fn loss_and_gradient(&self, params: &PolicyParams) -> Result<(f64, Vec<f64>)> {
        let n = params.num_params();
        let indices: Vec<usize> = (0..self.data.len()).collect();
        let partials = indices
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; n];
                let mut loss = 0.0;
                for &i in chunk {
                    let ex = &self.data[i];
                    let (value, g) = self.loss.value_and_gradient(&self.pair(params, i)?, &self.reward)?;
                    params.accumulate_grad_logprob(ex.prompt_class, &ex.y_w, g.d_logprob_w, &mut grad)?;
                    params.accumulate_grad_logprob(ex.prompt_class, &ex.y_l, g.d_logprob_l, &mut grad)?;
                    loss += value.loss;
                }
                Ok((loss, grad))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let scale = 1.0 / self.data.len() as f64;
        grad.iter_mut().for_each(|x| *x *= scale);
        Ok((loss * scale, grad))
    }

    fn velocity(&self, params: &PolicyParams, time: f64) -> std::result::Result<Vec<f64>, Error> {
        let (_, mut g) = self
            .loss_and_gradient(params)
            .map_err(|e| Error::Integrator { time, detail: e.to_string() })?;
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::Integrator {
                time,
                detail: format!("non-finite gradient at parameter {i}"),
            });
        }
        g.iter_mut().for_each(|x| *x = -*x);
        Ok(g)
    }

    /// One explicit step of size `h` starting at `time`.
    pub fn step(&self, params: &PolicyParams, method: Method, h: f64, time: f64) -> Result<PolicyParams> {
        let shifted = |base: &PolicyParams, k: &[f64], scale: f64| -> Result<PolicyParams> {
            let mut next = base.clone();
            next.logits_mut().iter_mut().zip(k).for_each(|(x, v)| *x += scale * v);
            if next.logits().iter().any(|x| !x.is_finite()) {
                return Err(Error::Integrator {
                    time,
                    detail: "parameters left the finite range".into(),
                });
            }
            Ok(next)
        };
        match method {
            Method::Euler => {
                let k1 = self.velocity(params, time)?;
                shifted(params, &k1, h)
            }
            Method::Rk4 => {
                let k1 = self.velocity(params, time)?;
                let k2 = self.velocity(&shifted(params, &k1, h / 2.0)?, time + h / 2.0)?;
                let k3 = self.velocity(&shifted(params, &k2, h / 2.0)?, time + h / 2.0)?;
                let k4 = self.velocity(&shifted(params, &k3, h)?, time + h)?;
                let combined: Vec<f64> = (0..k1.len())
                    .map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
                    .collect();
                shifted(params, &combined, h)
            }
        }
    }
}

/// One integrator step of size `cfg.step_size` on the dataset-mean loss.
pub fn flow_step(
    params: &PolicyParams,
    reference: &PolicyParams,
    data: &[PreferenceExample],
    cfg: &FlowConfig,
) -> Result<PolicyParams> {
    cfg.validate()?;
    Objective::new(reference, data, cfg.loss, cfg.reward)?.step(params, cfg.method, cfg.step_size, 0.0)
}

/// Mean over prompt classes of `KL(pi || pi_ref)` on responses of length
/// `max_len`, by exhaustive enumeration.
pub fn kl_to_reference(params: &PolicyParams, reference: &PolicyParams) -> Result<f64> {
    if params.spec() != reference.spec() || params.prompt_classes() != reference.prompt_classes() {
        return Err(Error::InvalidInput("policy and reference shapes differ".into()));
    }
    let spec = params.spec();
    let mut total = 0.0;
    let mut failure = None;
    for pc in 0..params.prompt_classes() {
        for_each_sequence(spec.vocab_size, spec.max_len, |y| {
            if failure.is_some() {
                return;
            }
            match (params.seq_logprob(pc, y), reference.seq_logprob(pc, y)) {
                (Ok(lp), Ok(lr)) => {
                    let p = lp.exp();
                    if p > 0.0 {
                        total += p * (lp - lr);
                    }
                }
                (Err(e), _) | (_, Err(e)) => failure = Some(e),
            }
        });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    // rounding can leave a tiny negative sum near zero divergence
    Ok((total / params.prompt_classes() as f64).max(0.0))
}

fn snapshot(
    time: f64,
    params: &PolicyParams,
    reference: &PolicyParams,
    objective: &Objective<'_>,
) -> Result<TrajectorySnapshot> {
    let examples = objective
        .data
        .iter()
        .map(|ex| ExampleStats::measure(params, ex))
        .collect::<Result<Vec<_>>>()?;
    let column = |f: fn(&ExampleStats) -> f64| examples.iter().map(f).collect::<Vec<_>>();
    Ok(TrajectorySnapshot {
        time,
        loglik_w: Summary::of(&column(|e| e.norm_loglik_w))?,
        loglik_l: Summary::of(&column(|e| e.norm_loglik_l))?,
        margin: Summary::of(&column(|e| e.norm_margin))?,
        mean_loss: objective.mean_loss(params)?,
        kl_to_reference: kl_to_reference(params, reference)?,
        examples,
    })
}

/// Integrate from `initial`, which also serves as the reference policy.
///
/// Each snapshot interval is split into `ceil(interval / step_size)` equal
/// steps so every snapshot lands exactly on its time.
pub fn run_trajectory(
    initial: &PolicyParams,
    data: &[PreferenceExample],
    cfg: &FlowConfig,
) -> std::result::Result<Vec<TrajectorySnapshot>, TrajectoryAbort> {
    integrate(initial, data, cfg).map(|(snapshots, _)| snapshots)
}

/// [`run_trajectory`] that also returns the terminal parameters.
pub fn integrate(
    initial: &PolicyParams,
    data: &[PreferenceExample],
    cfg: &FlowConfig,
) -> std::result::Result<(Vec<TrajectorySnapshot>, PolicyParams), TrajectoryAbort> {
    let abort = |snapshots: Vec<TrajectorySnapshot>, source| TrajectoryAbort { snapshots, source };
    if let Err(e) = cfg.validate() {
        return Err(abort(Vec::new(), e));
    }
    let objective = match Objective::new(initial, data, cfg.loss, cfg.reward) {
        Ok(o) => o,
        Err(e) => return Err(abort(Vec::new(), e)),
    };
    let times = cfg.snapshot_times();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut params = initial.clone();
    match snapshot(0.0, &params, initial, &objective) {
        Ok(s) => snapshots.push(s),
        Err(e) => return Err(abort(snapshots, e)),
    }
    for pair in times.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        let interval = end - start;
        let steps = ((interval / cfg.step_size) - 1e-9).ceil().max(1.0) as usize;
        let h = interval / steps as f64;
        for s in 0..steps {
            match objective.step(&params, cfg.method, h, start + s as f64 * h) {
                Ok(next) => params = next,
                Err(e) => return Err(abort(snapshots, e)),
            }
        }
        match snapshot(end, &params, initial, &objective) {
            Ok(s) => snapshots.push(s),
            Err(e) => return Err(abort(snapshots, e)),
        }
    }
    Ok((snapshots, params))
}

/// Parameters of the seeded synthetic preference problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub vocab: VocabSpec,
    pub prompt_classes: usize,
    pub examples: usize,
    pub min_response_len: usize,
    /// Fraction of examples whose initial length-normalized margin is negative.
    pub negative_margin_fraction: f64,
    /// Initial logits are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            vocab: VocabSpec {
                vocab_size: 4,
                context_order: 1,
                max_len: 4,
            },
            prompt_classes: 8,
            examples: 64,
            min_response_len: 1,
            negative_margin_fraction: 0.5,
            init_scale: 0.1,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        self.vocab.validate()?;
        if self.prompt_classes == 0 || self.examples == 0 {
            return Err(Error::Config("prompt_classes and examples must be >= 1".into()));
        }
        if self.min_response_len == 0 || self.min_response_len > self.vocab.max_len {
            return Err(Error::Config(format!(
                "min_response_len must be in 1..={}",
                self.vocab.max_len
            )));
        }
        if !(0.0..=1.0).contains(&self.negative_margin_fraction) {
            return Err(Error::Config("negative_margin_fraction must be in [0, 1]".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config("init_scale must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Initial policy and dataset. Pairs are oriented so that the requested
/// fraction of examples starts with a negative margin.
pub fn synthetic_problem(cfg: &SyntheticConfig) -> Result<(PolicyParams, Vec<PreferenceExample>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = PolicyParams::random(cfg.vocab, cfg.prompt_classes, cfg.init_scale, &mut rng)?;
    let negatives = (cfg.negative_margin_fraction * cfg.examples as f64).round() as usize;
    let mut want_negative: Vec<bool> = (0..cfg.examples).map(|i| i < negatives).collect();
    want_negative.shuffle(&mut rng);

    let sample = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.random_range(cfg.min_response_len..=cfg.vocab.max_len);
        (0..len).map(|_| rng.random_range(0..cfg.vocab.vocab_size)).collect()
    };
    let mut data = Vec::with_capacity(cfg.examples);
    for (i, &negative) in want_negative.iter().enumerate() {
        let prompt_class = i % cfg.prompt_classes;
        let ex = loop {
            let (a, b) = (sample(&mut rng), sample(&mut rng));
            if a == b {
                continue;
            }
            let ex = PreferenceExample::new(prompt_class, a, b)?;
            let margin = ExampleStats::measure(&params, &ex)?.norm_margin;
            if margin == 0.0 {
                continue;
            }
            if (margin < 0.0) == negative {
                break ex;
            }
            break PreferenceExample::new(prompt_class, ex.y_l, ex.y_w)?;
        };
        data.push(ex);
    }
    Ok((params, data))
}
