//! Kinematics and gait toolkit for a planar snake robot whose joint units travel along the
//! body on two flexible racks.
//!
//! The body is modeled as a chain of circular arcs whose lengths and angles are set by the
//! rack extensions of the joint motors. On top of that model the crate provides serpenoid
//! gait synthesis, arc-segmentation fitting, shape-hold and unit-reset planning for
//! obstacle-aided locomotion, and an idealized planar locomotion simulator.

pub mod arc_model;
pub mod error;
pub mod locomotion_sim;
pub mod obstacle_gait;
pub mod segmentation_fit;
pub mod serpenoid;

pub use error::{Error, LengthKind, Result};
