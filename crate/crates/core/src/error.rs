use std::path::PathBuf;

use thiserror::Error;

use crate::data_model::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("weights: {0}")]
    Weights(#[from] crate::weights::WeightsError),

    #[error("ingest: {0}")]
    Ingest(#[from] crate::ingest::IngestError),

    #[error("sampler: {0}")]
    Sampler(#[from] crate::sampler::SamplerError),

    #[error("impacts: {0}")]
    Impact(#[from] crate::impacts::ImpactError),

    #[error("clustering: {0}")]
    Cluster(#[from] crate::clustering::ClusterError),

    #[error("simulation: {0}")]
    Synth(#[from] crate::synth::SynthError),

    #[error("draw bundle: {0}")]
    Bundle(#[from] crate::bundle::BundleError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for batch use: 2 for invalid inputs, 3 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Weights(_)
            | Error::Ingest(_)
            | Error::Bundle(_)
            | Error::Usage(_) => 2,
            Error::Sampler(_) | Error::Impact(_) | Error::Cluster(_) | Error::Synth(_) => 3,
            Error::Io { .. } => 1,
        }
    }
}
