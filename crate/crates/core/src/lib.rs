//! Reduced-order locomotion planning and navigation for a bipedal robot in
//! cluttered, height-constrained environments.

pub mod collocation;
pub mod command_set;
pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod lp;
pub mod planner;
pub mod router;
pub mod sim;
pub mod vslip;

pub use command_set::{CommandSet, SetLibrary};
pub use error::{Error, Result};
pub use vslip::{FootPlacementCoeffs, Foothold, Input, RobotParams, State};
