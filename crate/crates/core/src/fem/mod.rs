//! Quadratic Lagrange finite elements.

pub mod assemble;
pub mod boundary;
pub mod divergence;
pub mod quadrature;
pub mod recovery;
pub mod space;
pub mod sparse;

pub use assemble::{
    assemble_bilinear, assemble_energy, assemble_form, assemble_load, for_each_point, h1_gram, integrate, mass_matrix,
    QuadPoint, DEFAULT_ORDER,
};
pub use boundary::{boundary_integral, boundary_integral_at, for_each_boundary_point, BoundaryPoint};
pub use divergence::weak_divergence_residual;
pub use quadrature::{gauss_legendre_3, quadrature_rule, QuadRule};
pub use recovery::{recover_gradient, Projector, RecoveredGradient};
pub use space::{p2_gradients, p2_hessians, p2_values, DofMap, FEFunction, LocalBasis};
pub use sparse::{solve_spd, SparseSpd, SpdFactor};
