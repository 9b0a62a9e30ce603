//! The alpha-parameterized, length-normalized reward family.
//!
//! For a response with sequence log-probability `log pi` and token length
//! `|y|`, write `c = -log pi / |y|` for its normalized negative
//! log-likelihood. The reward is
//!
//! ```text
//! r_alpha = beta * (1 - exp(alpha * c)) / alpha
//! ```
//!
//! which tends to SimPO's log reward `-beta * c` as `alpha -> 0`, is the
//! inverse-linear reward at `alpha = 1` and the linear reward at
//! `alpha = -1`. Everything is evaluated in natural-log space.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Below this magnitude `alpha` is treated as exactly zero (log reward).
pub const ALPHA_EPS: f64 = 1e-8;

/// True when `alpha` selects the log-reward limit.
pub fn is_log_shape(alpha: f64) -> bool {
    alpha.abs() < ALPHA_EPS
}

/// Shape, scale and target margin of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RewardConfig {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let cfg = Self { alpha, beta, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.alpha, "alpha")?;
        ensure_finite(self.beta, "beta")?;
        ensure_finite(self.gamma, "gamma")?;
        if self.beta <= 0.0 {
            return Err(Error::InvalidInput(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidInput(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Same scale and margin with a different shape.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 2.5,
            gamma: 0.25,
        }
    }
}

/// Sequence log-probability and token count of one scored response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseStats {
    pub sum_logprob: f64,
    pub length: usize,
}

impl ResponseStats {
    pub fn new(sum_logprob: f64, length: usize) -> Result<Self> {
        let stats = Self { sum_logprob, length };
        stats.validate()?;
        Ok(stats)
    }

    /// Stats with a given normalized negative log-likelihood `c`.
    pub fn from_normalized_nll(c: f64, length: usize) -> Result<Self> {
        Self::new(-c * length as f64, length)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.sum_logprob, "sum_logprob")?;
        if self.length == 0 {
            return Err(Error::InvalidInput("response length must be >= 1".into()));
        }
        if self.sum_logprob > 0.0 {
            return Err(Error::InvalidInput(format!(
                "sum_logprob must be <= 0, got {}",
                self.sum_logprob
            )));
        }
        Ok(())
    }

    /// `c = -log pi / |y|`, never negative.
    pub fn normalized_nll(&self) -> f64 {
        -self.sum_logprob / self.length as f64
    }

    /// `log pi / |y|`, the per-token average log-probability.
    pub fn normalized_loglik(&self) -> f64 {
        self.sum_logprob / self.length as f64
    }

    pub fn prob(&self) -> f64 {
        self.sum_logprob.exp()
    }

    pub fn len_f64(&self) -> f64 {
        self.length as f64
    }
}

/// Reward for a normalized negative log-likelihood `c`, no validation.
pub(crate) fn reward_from_nll(alpha: f64, beta: f64, c: f64) -> f64 {
    if is_log_shape(alpha) {
        -beta * c
    } else {
        // beta * (1 - e^{alpha c}) / alpha, expm1 keeps small alpha*c exact
        -beta * (alpha * c).exp_m1() / alpha
    }
}

/// `log r'(pi)` where `r'(pi) = beta * exp(alpha * c) / (pi * |y|)`.
pub(crate) fn log_reward_derivative(alpha: f64, beta: f64, stats: &ResponseStats) -> f64 {
    let c = stats.normalized_nll();
    // alpha * c is skipped at the log limit so -0.0 * inf never appears
    let shape = if is_log_shape(alpha) { 0.0 } else { alpha * c };
    beta.ln() + shape - stats.sum_logprob - stats.len_f64().ln()
}

/// The length-normalized alpha reward of one response.
pub fn reward(cfg: &RewardConfig, stats: &ResponseStats) -> Result<f64> {
    cfg.validate()?;
    stats.validate()?;
    let r = reward_from_nll(cfg.alpha, cfg.beta, stats.normalized_nll());
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::Saturation("reward"))
    }
}

/// Derivative of the reward with respect to the sequence probability `pi`.
pub fn reward_derivative(cfg: &RewardConfig, stats: &ResponseStats) -> Result<f64> {
    cfg.validate()?;
    stats.validate()?;
    let d = log_reward_derivative(cfg.alpha, cfg.beta, stats).exp();
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Saturation("reward derivative"))
    }
}

/// Whether `r'_alpha(pi)` is monotonically (non-strictly) decreasing in `pi`
/// on `(0, 1]`. This holds exactly when `alpha >= -|y|`.
pub fn derivative_is_monotone_decreasing(alpha: f64, length: usize) -> bool {
    alpha >= -(length as f64)
}
