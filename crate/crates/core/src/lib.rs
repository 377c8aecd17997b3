//! Adaptive compatible performance control for spacecraft attitude tracking
//! under angular-velocity limits, actuator saturation and prescribed
//! performance envelopes.
//!
//! The crate is organised bottom-up: [`attitude`] math, the truth [`plant`],
//! the performance [`envelope`], the bounded velocity generator [`bvg`], the
//! [`controller`] itself, and the closed-loop [`sim`] engine. [`config`] and
//! [`cli`] wrap those into a file-driven scenario runner.

pub mod attitude;
pub mod bvg;
pub mod cli;
pub mod config;
pub mod controller;
pub mod envelope;
pub mod plant;
pub mod sim;

pub use attitude::{UnitQuaternion, Vec3};
pub use controller::{ControllerGains, Variant};
pub use sim::{run, RunResult, ScenarioConfig};
