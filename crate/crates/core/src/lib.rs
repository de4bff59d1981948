//! Contour-based corner detection by chord-to-point distance accumulation, with a single-chord
//! (`sca`) and a three-chord (`cpda`) mode, plus a synthetic transformation benchmark.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod curvature;
pub mod detector;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod io;
pub mod scalar;
pub mod synth;
pub mod transforms;

pub use curvature::{DetectorParams, Mode, OpCounters};
pub use detector::{detect, detect_edges, detect_with_id, Corner, CornerSet, Detection};
pub use error::{Error, Result};
pub use eval::{EvalReport, NamedDetector};
pub use geometry::Point;
pub use image::GrayImage;
pub use scalar::Scalar;
pub use transforms::{Family, TransformSpec};

pub type GrayImageF32 = GrayImage<f32>;
pub type GrayImageF64 = GrayImage<f64>;
pub type CurveF32 = contour::Curve<f32>;
pub type CurveF64 = contour::Curve<f64>;
pub type CornerSetF32 = CornerSet<f32>;
pub type CornerSetF64 = CornerSet<f64>;
pub type DetectionF32 = Detection<f32>;
pub type DetectionF64 = Detection<f64>;
