//! Shape functionals `J(Ω) = −min ∫ f(∇u) + g(u)` on planar domains and their
//! first and second shape derivatives, computed with quadratic finite
//! elements and cross-checked by finite differences of deformed meshes.

pub mod cli;
pub mod config;
pub mod error;
pub mod fem;
pub mod integrands;
pub mod linalg;
pub mod mesh;
pub mod scalar;
pub mod shape;
pub mod solver;
pub mod validation;

pub use error::{Error, Result};
pub use scalar::Real;

// Double-precision instances of the generic core. Every algorithm is written
// over `T: Real`; `f32` works as well but cannot meet the default tolerances.
pub type Mesh = mesh::Mesh2D<f64>;
pub type Field = mesh::DeformationField<f64>;
pub type Pair = integrands::ConvexPair<f64>;
pub type State = solver::StateSolution<f64>;
pub type Options = solver::SolverOptions<f64>;
pub type Shape<'a> = shape::ShapeContext<'a, f64>;
pub type Sweep = validation::FdSweep<f64>;
