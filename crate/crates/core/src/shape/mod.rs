//! First and second shape derivatives of `J` by several independent
//! representations.
//!
//! * volume routes integrate over `Ω` and need only `∇u` (the reference);
//! * boundary routes integrate normal traces over `∂Ω` and need the boundary
//!   jet of `u` together with an auxiliary quadratic minimisation;
//! * specialised routes for the torsion and p-torsion pairs, and the
//!   boundary quadratic form `l₂(φ)`.

pub mod fields;
pub mod jet;
mod routes;

pub use fields::{
    check_div_a, check_div_b, field_b, field_b_at, field_c, field_c_at, tensor_a, tensor_a_at, CVariant, PointData,
};
pub use jet::{BoundaryGeometry, BoundaryJet, BoundaryJets};
pub use routes::{first_derivative_volume, AuxQuadraticProblem, ShapeContext, VolumeProblem};

/// All derivative values for one `(Ω, f, g, V)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DerivativeReport {
    pub j_value: f64,
    pub j1_volume: f64,
    /// `None` when `f*` has no closed form.
    pub j1_boundary: Option<f64>,
    pub j2_volume: f64,
    pub j2_boundary: f64,
    /// Torsion or p-torsion representation, when it applies.
    pub j2_special: Option<f64>,
    pub special_route: Option<String>,
    pub fd_first: Option<f64>,
    pub fd_second: Option<f64>,
    pub div_a_residual: f64,
    pub div_b_residual: f64,
    /// `|J2_volume − J2_boundary|`.
    pub route_disagreement: f64,
    pub h: f64,
    pub eps: Vec<f64>,
    /// Routes that were skipped, with the reason.
    pub notes: Vec<String>,
}

impl DerivativeReport {
    pub fn is_finite(&self) -> bool {
        let opt = |v: Option<f64>| v.is_none_or(f64::is_finite);
        [self.j_value, self.j1_volume, self.j2_volume, self.j2_boundary, self.div_a_residual, self.div_b_residual]
            .iter()
            .all(|v| v.is_finite())
            && opt(self.j1_boundary)
            && opt(self.j2_special)
            && opt(self.fd_first)
            && opt(self.fd_second)
    }
}
