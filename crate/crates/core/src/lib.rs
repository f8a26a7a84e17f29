//! Geometry processing for labeled intraoral scan meshes.
//!
//! The crate covers the non-learned half of a tooth segmentation pipeline:
//!
//! - [`mesh`]: the triangle mesh / point cloud data model, PLY and OBJ I/O,
//!   non-manifold repair, normalization and vertex normals.
//! - [`curvature`]: cotangent-Laplacian mean curvature and colormap export.
//! - [`simplify`]: quadric error metric simplification and its
//!   curvature-weighted variant that keeps more vertices in concave valleys
//!   (where teeth meet the gum).
//! - [`boundary`]: label-boundary detection on point clouds, the boundary
//!   density metric and boundary IoU.
//! - [`render`]: PCA alignment, the upper-hemisphere camera rig, a software
//!   rasterizer and point/pixel correspondence.
//! - [`fusion`]: back-projection of per-pixel class scores onto points.
//! - [`metrics`]: cross-entropy, contrastive boundary loss and IoU metrics.
//! - [`augment`]: seeded translation/rotation augmentation.
//! - [`synth`]: synthetic fixtures (crown-on-slab, icospheres, grids).
//!
//! Coordinates are unit-agnostic; everything downstream of loading expects
//! a mesh that went through [`mesh::normalize_coordinates`].

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod boundary;
pub mod curvature;
pub mod error;
pub mod fusion;
pub mod knn;
pub mod mesh;
pub mod metrics;
mod par;
pub mod render;
pub mod simplify;
pub mod synth;

pub use error::{Error, Result};
pub use mesh::{LabeledPointCloud, MeshStats, TriangleMesh};

/// Number of semantic classes: gingiva (0) plus sixteen teeth.
pub const NUM_CLASSES: usize = 17;

/// Largest valid class id.
pub const MAX_LABEL: u8 = (NUM_CLASSES - 1) as u8;

pub type Vec3 = nalgebra::Vector3<f64>;
