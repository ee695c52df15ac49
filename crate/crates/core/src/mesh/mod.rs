//! Adaptive octree meshes and their tetrahedral FEM topology.

pub mod adaptive;
pub mod dofs;
pub mod export;
pub mod octree;
pub mod region;
pub mod tet;

pub use adaptive::{build_mesh, AdaptiveMesh, HangingKind, HangingNode, MeshStats, Tetrahedron};
pub use dofs::DofMap;
pub use octree::{Octree, PassStats};
pub use region::{compute_domain, compute_region, Domain, Interval, RefinementRegion};
