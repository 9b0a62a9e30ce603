//! Reward-shape laboratory for direct alignment algorithms.
//!
//! The crate implements the alpha-parameterized AlphaPO reward next to the
//! DPO and SimPO objectives, the per-sample gradient decomposition of the
//! AlphaPO loss and its threshold diagnostics, and exact gradient-flow
//! simulation of preference optimization on a tabular autoregressive toy
//! policy.
//!
//! Module map:
//! - [`rewards`]: the reward family, its derivative and monotonicity test
//! - [`losses`]: DPO, SimPO, AlphaPO and the with-reference variants
//! - [`grad_analysis`]: `T1`/`T2` factors, asymptotic probes, `alpha_0`
//! - [`policy`]: the tabular policy with exact gradients
//! - [`dynamics`]: gradient-flow trajectories and likelihood statistics
//! - [`report`]: configuration, dataset files, CSV output and commands

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod grad_analysis;
pub mod losses;
pub mod numeric;
pub mod policy;
pub mod report;
pub mod rewards;

pub use error::{Error, Result};
pub use grad_analysis::{
    alpha_zero, asymptotic_probe, per_sample_diagnostics, per_sample_grad_magnitude, t1, t2,
    theorem2_condition, Asymptote, AsymptoticProfile, GradientDiagnostics, ScalarSensitivities,
    VectorGradients,
};
pub use losses::{
    alphapo_loss, alphapo_with_ref_loss, bt_probability, dpo_loss, simpo_loss, simpo_with_ref_loss,
    LossGradient, LossKind, LossValue, PairLogprobs,
};
pub use rewards::{
    derivative_is_monotone_decreasing, reward, reward_derivative, RewardConfig, ResponseStats,
    ALPHA_EPS,
};
