//! Post-processing of stationary densities.

pub mod grids;
pub mod histogram;
pub mod norms;

pub use grids::{marginal1d, marginal2d, marginal2d_with_resolution, slice, Grid1D, Grid2D};
pub use histogram::{mass_outside_sample_shell, ssa_cross_check, CrossCheck, Histogram3D};
pub use norms::{evaluate, integrate, l2_diff, ErrorReport};
