//! Content-aware image retargeting.
//!
//! The main method resizes an image by deforming a jittered Delaunay triangle
//! mesh laid over it. Where the mesh is allowed to stretch or shrink is driven
//! by an importance map (saliency, gradients, detected feature lines) and by a
//! graph-based colour segmentation of the image. Seam carving (backward and
//! forward energy) and plain bilinear scaling are provided as baselines.
//!
//! Pipeline stages map onto modules:
//!
//! - [`raster`]: images, scalar fields, gradients, normalization, resampling
//! - [`importance`]: the combined importance map and its components
//! - [`regions`]: graph-based segmentation and the region-weighted map
//! - [`mesh`]: mesh construction and triangle classification
//! - [`solver`]: the constrained mesh deformation
//! - [`warp`]: piecewise-affine rendering of the deformed mesh
//! - [`seam`]: seam carving baselines
//! - [`pipeline`]: end-to-end orchestration used by the command-line tool

pub mod error;
pub mod importance;
pub mod mesh;
pub mod pipeline;
pub mod raster;
pub mod regions;
pub mod seam;
pub mod solver;
pub mod warp;

pub use error::{Error, Result};
pub use importance::{ImportanceMaps, ImportanceParams, LineSegment};
pub use mesh::{BoundaryTag, ClassifyParams, TriMesh, TriangleClasses};
pub use pipeline::{Method, RunConfig, RunOutput, TargetSize};
pub use raster::{GradientNorm, RasterImage, ScalarField};
pub use regions::{RegionLabeling, SegmentationParams};
pub use seam::{Axis, CumulativeMap, SeamMode, SeamPath};
pub use solver::{DeformState, SolveStatus, SolverParams};
