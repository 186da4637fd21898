//! Landing-zone evaluation kernels.
//!
//! Two complementary gates decide whether the surface under a small UAV is
//! fit to land on:
//!
//! - a monocular rigidity monitor ([`flow`] + [`homography`]) that tracks a
//!   regular grid of pixels with pyramidal Lucas-Kanade, fits a planar
//!   homography to the correspondences and low-pass filters the fit residual;
//!   water and other non-rigid surfaces produce a large residual.
//! - a stereo terrain classifier ([`stereo`] + [`imu`] + [`terrain`]) that
//!   block-matches a rectified pair, lifts the disparity into a
//!   gravity-aligned point cloud, fits a plane per 0.5 m cell and checks the
//!   slope and roughness of the cells under the vehicle.
//!
//! [`sim`] renders synthetic scenes with exact ground truth for both paths.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `touchdown` crate.

#![no_std]
// `!(x > 0.0)` checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod flow;
pub mod geometry;
pub mod homography;
pub mod imu;
pub mod linalg;
pub(crate) mod math;
pub mod sim;
pub mod stereo;
pub mod terrain;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, GrayImage, UnitQuaternion, Vec3};
