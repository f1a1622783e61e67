//! Numerical laboratory for the Kähler–Ricci flow on rotationally symmetric
//! complete model geometries. The flow is integrated as a scalar parabolic
//! equation for the potential increment; companion modules build the cutoff
//! and exhaustion functions, the constant ledger with its iteration schedule,
//! and a harness that verifies a-priori estimates along computed trajectories.

pub mod barriers;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod schedule;

pub use error::{KrfError, Result};
