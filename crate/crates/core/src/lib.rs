//! Geometry of displaced stereo render cameras and estimation of
//! perceptual detection thresholds for those displacements.
//!
//! * [`geometry`]: eye placement during horizontal VOR, camera displacement,
//!   and the disparity / visual-direction / depth error model.
//! * [`scenarios`]: preset scenes for the AR and VR viewing conditions.
//! * [`threshold`]: probit GP fits of 2IFC data, radial monotone projection
//!   and 75% threshold contours.
//! * [`harness`]: seeded adaptive experiments against simulated observers.
//! * [`predictor`]: Savitzky-Golay forward prediction of head angle.

// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod harness;
pub mod normal;
pub mod predictor;
pub mod scenarios;
pub mod threshold;
