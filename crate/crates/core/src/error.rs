use crate::losses::LossKind;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A stochastic-approximation update produced a non-finite value.
    #[error("non-finite update from {kind} loss")]
    NonFinite { kind: LossKind },

    #[error("{kind} learner diverged at episode {episode}")]
    Diverged { kind: LossKind, episode: usize },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
