use thiserror::Error;

use crate::cg::CgState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("angle {0} rad lies outside [-pi/2, pi/2]")]
    AngleOutOfRange(f64),

    #[error("snapshot set is empty")]
    EmptySnapshots,

    #[error("covariance is numerically singular after loading (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("interferer count {l} leaves no noise subspace for {m} sensors")]
    NoNoiseSubspace { l: usize, m: usize },

    #[error("scenario has no scattering spec")]
    MissingScattering,

    #[error("steering vector is zero")]
    ZeroSteering,

    #[error("spectrum vanishes over the look sector")]
    ZeroSoiSpectrum,

    #[error("conjugate gradient produced non-finite values at iteration {iter}")]
    Diverged { iter: usize, state: Box<CgState> },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

/// Attaches a pipeline stage label to errors.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
