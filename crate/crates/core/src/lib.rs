//! Stationary chemical Fokker-Planck solver on adaptive octree meshes guided
//! by stochastic simulation samples.

pub mod analysis;
pub mod dense;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod network;
pub mod pipeline;
pub mod scalar;
pub mod solver;
pub mod ssa;

pub use error::{Error, Result, StageExt};
pub use scalar::{LuScalar, Real};

pub use mesh::{AdaptiveMesh, Domain};
pub use network::ReactionNetwork;
pub use pipeline::RunConfig;
pub use solver::{SolverMethod, SolverOptions, StationaryDensity};

/// Double-precision aliases.
pub type Mesh = AdaptiveMesh<f64>;
pub type Network = ReactionNetwork<f64>;
pub type Density = StationaryDensity<f64>;
pub type Box3 = Domain<f64>;
