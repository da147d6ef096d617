//! Tactile rotation measurement and closed-loop regrasp control.
//!
//! The per-frame pipeline runs over tracked marker positions from a
//! vision-based tactile sensor:
//!
//! 1. [`contact`] waits for the grasp to settle and splits markers into
//!    contact and non-contact sets.
//! 2. [`motion`] screens each frame for sliding and for the onset of
//!    rotation.
//! 3. [`cor`] fits the center of rotation, the rotation angle and its
//!    orientation; [`contour`] takes over for small contact patches.
//!
//! [`control`] turns per-grasp verdicts into regrasp offsets along the
//! object axis, whose length comes from [`geometry`]. [`sim`] generates
//! synthetic grasps with ground truth and [`eval`] scores the pipeline
//! against them.

pub mod config;
pub mod contact;
pub mod contour;
pub mod control;
pub mod cor;
pub mod data;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod motion;
pub mod pipeline;
pub mod sim;
pub mod stats;
