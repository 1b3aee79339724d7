use thiserror::Error;

use crate::pair::ChannelId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state is not normalized (squared norm {norm_sqr})")]
    Unnormalized { norm_sqr: f64 },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("unsupported channel combination ({0:?}, {1:?})")]
    UnsupportedCombination(ChannelId, ChannelId),

    #[error("unphysical parameters: probability {0} outside [0, 1]")]
    UnphysicalParameters(f64),

    #[error("probability {name} = {value} outside [0, 1]")]
    ProbabilityOutOfRange { name: String, value: f64 },

    #[error("unknown setting '{0}'")]
    UnknownSetting(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
