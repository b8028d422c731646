//! Anomaly detection for multivariate network time series.
//!
//! The library extracts a *normal subspace* from a third-order measurement
//! tensor (entity x metric x minute) with a CP/PARAFAC decomposition and
//! detects anomalies in the residuals that the low-rank model cannot explain.
//! Two reference pipelines are provided on top of the shared tensor core:
//!
//! * a supervised DDoS pipeline that classifies per-minute residual features
//!   of router traffic counters (see [`features`], [`detect`]), and
//! * an unsupervised QoS pipeline that clusters residual statistics of
//!   latency/loss series and correlates clusters with an ISP topology tree
//!   (see [`cluster`]).
//!
//! Residuals can be produced offline (fit once, project new slices) or
//! online over a sliding tensor window with either a full refit per step
//! (FWO) or the cheaper partial refit (PWO) that only re-estimates the
//! newest time loading (see [`stream`]).

pub mod cluster;
pub mod cp;
pub mod cp_validate;
pub mod datagen;
pub mod detect;
pub mod error;
pub mod features;
pub mod gmm;
pub mod linalg;
pub mod stream;
pub mod tensor;
pub mod tensor_io;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use tensor::Tensor3;
