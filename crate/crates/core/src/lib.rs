//! Novel view synthesis by blending neighboring multiplane images (MPIs).
//!
//! The crate covers the whole pipeline: planning how densely to capture a
//! scene, building one MPI per captured view, rendering each MPI into a
//! novel camera by per-plane homography warps and over-compositing, and
//! blending neighboring renders with accumulated-alpha weights.
//!
//! ```
//! use mpi_fusion::sampling::{capture_plan, CapturePlanRequest, PlanTarget};
//!
//! let req = CapturePlanRequest::new(64f64.to_radians(), 0.5, 1.0, PlanTarget::Width(500));
//! let plan = capture_plan(&req).unwrap();
//! assert_eq!(plan.views, 16);
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod bundle;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod image;
pub mod mpi;
pub mod path;
pub mod sampling;
pub mod util;
pub mod webexport;

pub use error::{Error, Result};
pub use fusion::{render_novel_view, BlendMode, FusedView, IrregularParams};
pub use geometry::{Camera, Intrinsics, Pose};
pub use image::Image;
pub use mpi::{render_mpi, Mpi, RenderOutput};
