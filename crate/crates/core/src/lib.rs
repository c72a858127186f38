//! Time-minimal navigation when the current is as strong as the vessel.
//!
//! The crate models a craft of speed `|u(x)|` moving through a wind field
//! `W̃(x)` of exactly matching strength. The resultant velocities sweep out a
//! sphere through the origin of each tangent space, which is the unit ball of
//! a Kropina metric; its geodesics are the time-minimal paths. Modules build
//! up from jet arithmetic and chart geometry through metric construction, the
//! geodesic spray, an adaptive integrator, and a worked navigation scenario
//! with its command-line driver.

pub mod chart;
pub mod cli;
pub mod config;
pub mod error;
pub mod integrate;
pub mod jet;
pub mod navigation;
pub mod output;
pub mod scenario;
pub mod spray;
pub mod verify;

pub use chart::{ChartMetric, ChartPoint, ScalarField, TangentVector, VectorField};
pub use error::KropinaError;
pub use jet::Jet2;
pub use navigation::{KropinaMetric, MetricBranch, NavigationData};

/// Command-line entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::run()
}
