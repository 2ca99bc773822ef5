//! Risk-averse value learning under exponential utility.
//!
//! The crate is organised bottom-up:
//!
//! - [`entropic`]: the certainty-equivalent operator and its Gaussian closed form.
//! - [`losses`]: MSE, exponential MSE, softplus and Itakura-Saito value losses,
//!   each returning a value and an analytic gradient, plus the dilogarithm.
//! - [`mdp`]: finite layered MDPs with exact risk-neutral and entropic dynamic
//!   programming, used as ground truth for every learner.
//! - [`tabular`]: stochastic-approximation TD(0) and Q-learning.
//! - [`nn`]: a small MLP with a hand-written backward pass, Adam, and TD(0) /
//!   policy training loops with a target network.
//! - [`envs`]: Bachelier trading environments with closed-form solutions and an
//!   item-delivery grid world.
//! - [`record`]: the metric record emitted by learners.

pub mod entropic;
pub mod envs;
pub mod error;
pub mod losses;
pub mod mdp;
pub mod nn;
pub mod record;
pub mod tabular;

pub use entropic::{certainty_equivalent, gaussian_certainty_equivalent, DiscreteDistribution, RiskAversion};
pub use error::{Error, Result};
pub use losses::{LossEval, LossKind, TdError};
pub use record::RunRecord;
