//! Piecewise-linear finite elements for the stationary equation.

pub mod assembly;
pub mod coefficients;
pub mod quadrature;
pub mod sparse;

pub use assembly::{
    apply_density_ops, assemble, assemble_vertex_matrix, local_form, AssemblyOptions, ElementMatrix,
    SparseOperator,
};
pub use coefficients::{CoefficientField, ConstantField, WithoutDrift};
pub use quadrature::QuadratureRule;
pub use sparse::CsrMatrix;
