//! U(n)-invariant Kähler metrics in the radial reduction s = log|z|^2:
//! grids, reference backgrounds, metric states, and curvature.

pub mod background;
pub mod curvature;
pub mod grid;
pub mod state;

pub use background::{Background, BackgroundKind};
pub use curvature::{christoffel_difference_sq, curvature, interior_range, CurvatureReport};
pub use grid::RadialGrid;
pub use state::{EigenDirection, EquivalenceBand, MetricState};
