//! Learning signed distance functions as zero level sets of a small MLP,
//! trained directly on raw point clouds with an Eikonal regularizer.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: point clouds, nearest neighbors, bounding boxes and
//!   Chamfer/Hausdorff metrics.
//! * [`network`]: the MLP, its geometric initialization, the joint
//!   value/input-gradient forward pass and reverse-mode parameter gradients.
//! * [`training`]: the Eikonal loss, the sampling distribution, Adam, single
//!   shape training and the auto-decoder loop.
//! * [`levelset`]: grid evaluation, marching squares/cubes and the SDF
//!   relative-error probe.
//! * [`theory`]: the linear model, its critical points, gradient descent and
//!   the Liapunov certificate.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod levelset;
pub mod network;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{Aabb, MetricReport, PointCloud};
pub use network::{DualEval, Network, NetworkSpec, ParamGradient};
