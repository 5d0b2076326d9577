//! Segmentation and restoration of images on triangulated surfaces.
//!
//! Curves evolve by forced geodesic curvature flow with a parametric finite
//! element scheme; regions enclosed by the curves carry Chan-Vese coefficients,
//! and a per-region surface diffusion restores the image afterwards.

pub mod curve;
mod error;
pub mod evolution;
pub mod flowtest;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod region;
pub mod restoration;
pub mod synth;
pub mod topology;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use curve::{Curve, CurveError, CurveId, CurveNetwork, End, JunctionEnd, NodeFrames, RegionId, TripleJunction};
pub use error::{Error, Result};
pub use linalg::{SolveMethod, SolveOptions};
pub use mesh::io::{load_mesh, save_mesh, MeshFormat};
pub use mesh::{FaceImage, MeshError, MeshLocation, MeshOptions, SurfaceMesh};
pub use pipeline::{run_segmentation, RunConfig, Segmenter};
pub use region::{ColorSpace, RegionMap, Weighting};
pub use topology::{EventKind, TopologyEvent};
