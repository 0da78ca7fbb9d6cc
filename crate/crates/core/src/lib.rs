//! Multi-suction grasp detection from depth images.
//!
//! The pipeline turns a registered intensity/depth scene grid into a ranked
//! list of 6-DoF suction grasp poses:
//!
//! 1. [`geometry`] — depth preprocessing, ordered point cloud, surface
//!    normals, and a per-pixel normal-deviation channel.
//! 2. [`quality`] / [`labeling`] — a pixel-wise grasp quality map in [0, 1],
//!    either loaded from file or generated analytically from the scene
//!    geometry (deviation-based score blended with a center-distance score,
//!    masked by depth-based background subtraction).
//! 3. [`footprint`] — gripper footprints and activation patterns are stacked
//!    into a multi-channel rotation kernel; convolving quality and normals
//!    with the stack yields per-pixel gripper type, rotation, and feasibility.
//! 4. [`pose`] — per-cluster pixel selection and conversion to full 6-DoF
//!    grasp candidates with gripper assignment.
//! 5. [`evaluation`] — scene metrics against pixel-wise ground truth.
//!
//! [`scenegen`] renders synthetic primitive scenes with exact ground truth
//! for testing, and [`pipeline`] wires the stages together with timing
//! instrumentation. File formats live in [`io`].

pub mod camera;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod footprint;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod labeling;
pub mod math;
pub mod pipeline;
pub mod pose;
pub mod quality;
pub mod scenegen;
pub mod windows;

pub use camera::CameraIntrinsics;
pub use error::{Error, Result};
pub use grid::{Grid, VectorGrid};
