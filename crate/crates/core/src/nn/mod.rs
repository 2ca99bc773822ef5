//! Small neural value and policy learners.

mod mlp;
mod optim;
mod train;

pub use mlp::{mish, ForwardCache, Mlp};
pub use optim::{clip_gradients, lr_scale, AdamState, TrainConfig};
pub use train::{
    policy_objective, sample_batch, train_actor_critic, train_policy, train_value_td0, value_objective, Actor, Batch,
    Environment, Outcome, Probe, TrainOutcome,
};
