//! Uncompensated latency (UL) estimation for ADS-B position reports.
//!
//! The pipeline fits a smoothed pseudo-truth trajectory to tracker data,
//! then measures how far each reported position sits along-track from the
//! pseudo-truth at its timestamp. Two estimators are provided: a per-report
//! along-track estimate and a per-track least-squares time shift. A
//! synthetic report generator with known injected latency backs the
//! validation suite.
//!
//! Numerical kernels ([`spline`], [`optimize`], [`scalar`]) are generic over
//! [`Scalar`] (`f32`/`f64`); the report pipeline runs in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod anomaly;
pub mod error;
pub mod export;
pub mod ingest;
pub mod latency;
pub mod model;
pub mod optimize;
pub mod scalar;
pub mod simgen;
pub mod spline;
pub mod validation;

pub use error::{Error, Result};
pub use model::{AdsbReport, Epu, EpuTable, Icao, Track, TrackPoint, UlBudget, UlClass};
pub use scalar::{Scalar, Vec2};
pub use spline::{PseudoTruthTrack, Spline1D};

/// Double-precision spline, the pipeline default.
pub type Spline = Spline1D<f64>;
/// Single-precision spline for relative-time work.
pub type SplineF32 = Spline1D<f32>;
/// Planar vector in meters or meters/second.
pub type Point = Vec2<f64>;
pub type PointF32 = Vec2<f32>;
