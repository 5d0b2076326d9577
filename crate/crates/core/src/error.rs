use thiserror::Error;

use crate::curve::CurveError;
use crate::evolution::EvolutionError;
use crate::linalg::LinalgError;
use crate::mesh::MeshError;
use crate::region::RegionError;
use crate::restoration::RestorationError;
use crate::topology::TopologyError;

/// Any failure of the library, with optional step context.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Restoration(#[from] RestorationError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep { step, source: Box::new(e) },
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::AtStep { source, .. } => source.kind(),
            Error::Mesh(_) => "mesh",
            Error::Curve(_) => "curve",
            Error::Region(_) => "region",
            Error::Evolution(_) => "evolution",
            Error::Topology(_) => "topology",
            Error::Restoration(_) => "restoration",
            Error::Linalg(_) => "linalg",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
