use crate::error::{Error, Result};
use crate::fem::{assemble_form, assemble_load, integrate, p2_values, FEFunction, SparseSpd, SpdFactor, DEFAULT_ORDER};
use crate::linalg::{Mat2, Vec2};
use crate::mesh::{BoundaryTag, DeformationField, TagFilter};
use crate::scalar::Real;
use crate::solver::StateSolution;

use super::fields::{field_b_at, field_c_at, tensor_a_at, CVariant, PointData};
use super::jet::{BoundaryJet, BoundaryJets};

/// Everything the derivative routes share for one state: the boundary jets
/// and the factored matrix of `𝒬(w) = ∫ ⟨∇²f(∇u)∇w, ∇w⟩ + g''(u) w²` with
/// the Γ_D dofs held fixed.
pub struct ShapeContext<'a, T: Real> {
    pub state: &'a StateSolution<T>,
    pub jets: BoundaryJets<T>,
    q_factor: SpdFactor<T>,
    fixed: Vec<bool>,
}

/// Minimiser of `vᵀMv + 2ℓᵀv` over FE functions with prescribed values on
/// the Γ_D dofs, where `M` is the matrix of `𝒬` (see
/// [`ShapeContext::q_matrix`]) and `ℓ` collects the boundary load.
#[derive(Clone, Debug)]
pub struct AuxQuadraticProblem<T> {
    pub dirichlet_data: Vec<(usize, T)>,
    pub neumann_load: Vec<T>,
    pub minimizer: FEFunction<T>,
    pub min_value: T,
}

/// The functional `E(w, V) = c + 2ℓᵀw + wᵀMw` over FE functions vanishing
/// on Γ_D, with its minimiser.
#[derive(Clone, Debug)]
pub struct VolumeProblem<T> {
    pub constant: T,
    pub load: Vec<T>,
    pub minimizer: Vec<T>,
    pub min_value: T,
}

/// `∫_Ω A(u) : DV` with the elementwise gradient of the discrete state.
pub fn first_derivative_volume<T: Real>(state: &StateSolution<T>, v: &DeformationField<T>) -> Result<T> {
    let pair = &state.pair;
    let u = &state.u.values;
    integrate(&state.mesh, DEFAULT_ORDER, |q| {
        tensor_a_at(pair, q.basis.value(u), q.basis.gradient(u)).ddot(&v.jacobian(q.x))
    })
}

fn frame_split<T: Real>(v: Vec2<T>, p: &BoundaryJet<T>) -> (T, T) {
    (v.dot(p.normal), v.dot(p.tangent))
}

impl<'a, T: Real> ShapeContext<'a, T> {
    pub fn new(state: &'a StateSolution<T>) -> Result<Self> {
        let jets = BoundaryJets::new(state)?;
        let pair = &state.pair;
        let u = &state.u.values;
        let m = assemble_form(&state.mesh, DEFAULT_ORDER, |q| {
            (pair.hess_f(q.basis.gradient(u)), pair.d2g(q.basis.value(u)))
        })?;
        let fixed: Vec<bool> = (0..state.dofs.n_dofs).map(|i| state.dofs.is_dirichlet(i)).collect();
        let q_factor = SpdFactor::new(&m, &fixed)?;
        Ok(Self { state, jets, q_factor, fixed })
    }

    pub fn q_matrix(&self) -> &SparseSpd<T> {
        self.q_factor.matrix()
    }

    fn raw_point(&self, q: &crate::fem::QuadPoint<T>) -> PointData<T> {
        let u = &self.state.u.values;
        PointData { x: q.x, u: q.basis.value(u), grad: q.basis.gradient(u), hess: Mat2::zero() }
    }

    fn jet_point(p: &BoundaryJet<T>) -> PointData<T> {
        PointData { x: p.x, u: p.u, grad: p.grad_u, hess: p.hess_u }
    }

    /// Adds `w·density(p)·φ_i(p)` over the boundary points with tag `tag`.
    fn boundary_load(&self, tag: BoundaryTag, density: impl Fn(&BoundaryJet<T>) -> T) -> Vec<T> {
        let mesh = &self.state.mesh;
        let mut load = vec![T::zero(); self.state.dofs.n_dofs];
        for p in self.jets.iter().filter(|p| p.tag == tag) {
            let d = p.weight * density(p);
            if d == T::zero() {
                continue;
            }
            let phi = p2_values(p.bary);
            for (node, ph) in mesh.p2_element(p.triangle).into_iter().zip(phi) {
                load[node] += d * ph;
            }
        }
        load
    }

    fn solve_aux(factor: &SpdFactor<T>, dirichlet: Vec<(usize, T)>, load: Vec<T>, state: &StateSolution<T>) -> Result<AuxQuadraticProblem<T>> {
        let mut pinned = vec![T::zero(); load.len()];
        for &(i, v) in &dirichlet {
            pinned[i] = v;
        }
        let rhs: Vec<T> = load.iter().map(|v| -*v).collect();
        let v = factor.solve(&rhs, |i| pinned[i])?;
        let min_value = factor.matrix().quad_form(&v) + T::lit(2.0) * load.iter().zip(&v).map(|(a, b)| *a * *b).sum::<T>();
        Ok(AuxQuadraticProblem {
            dirichlet_data: dirichlet,
            neumann_load: load,
            minimizer: FEFunction { mesh: state.mesh.clone(), values: v },
            min_value,
        })
    }

    /// `min 𝒬(v) + 2∫_{Γ_N} v·b` over `v` with `v = data(x, n, ∂_n u)` on Γ_D.
    pub fn aux_problem(
        &self,
        dirichlet: impl Fn(Vec2<T>, Vec2<T>, T) -> T,
        neumann_density: impl Fn(&BoundaryJet<T>) -> T,
    ) -> Result<AuxQuadraticProblem<T>> {
        let data: Vec<(usize, T)> = self
            .jets
            .dirichlet_values(&self.state.mesh, dirichlet)
            .into_iter()
            .filter(|(i, _)| self.fixed[*i])
            .collect();
        let load = self.boundary_load(BoundaryTag::Neumann, neumann_density);
        Self::solve_aux(&self.q_factor, data, load, self.state)
    }

    pub fn first_derivative_volume(&self, v: &DeformationField<T>) -> Result<T> {
        first_derivative_volume(self.state, v)
    }

    /// `∫_{Γ_D} f*(σ) V_n − ∫_{Γ_N} (f + g) V_n`.
    pub fn first_derivative_boundary(&self, v: &DeformationField<T>) -> Result<T> {
        let pair = &self.state.pair;
        let mut acc = T::zero();
        for p in self.jets.iter() {
            let vn = v.value(p.x).dot(p.normal);
            let dens = match p.tag {
                BoundaryTag::Dirichlet => pair.f_conjugate(p.sigma).ok_or(Error::ConjugateUnavailable)?,
                BoundaryTag::Neumann => -(pair.f(p.grad_u) + pair.g(p.u)),
            };
            acc += p.weight * dens * vn;
        }
        Ok(acc)
    }

    /// Assembles and minimises `E(·, V)`.
    pub fn volume_problem(&self, v: &DeformationField<T>) -> Result<VolumeProblem<T>> {
        let pair = &self.state.pair;
        let mesh = &self.state.mesh;
        let point = |q: &crate::fem::QuadPoint<T>| {
            let p = self.raw_point(q);
            let dv = v.jacobian(q.x);
            let div = dv.trace();
            let s = dv - Mat2::identity().scale(div);
            let a = dv.transpose().mul_vec(p.grad);
            (p, dv, div, s, a)
        };
        let load = assemble_load(mesh, DEFAULT_ORDER, |q| {
            let (p, _, div, s, a) = point(q);
            let hf = pair.hess_f(p.grad);
            (div * pair.dg(p.u), -(hf.mul_vec(a) + s.mul_vec(pair.grad_f(p.grad))))
        })?;
        let two = T::lit(2.0);
        let constant = integrate(mesh, DEFAULT_ORDER, |q| {
            let (p, dv, _, s, a) = point(q);
            let hf = pair.hess_f(p.grad);
            two * (pair.f(p.grad) + pair.g(p.u)) * dv.det()
                + hf.form(a, a)
                + two * s.mul_vec(pair.grad_f(p.grad)).dot(a)
        })?;
        let rhs: Vec<T> = load.iter().map(|x| -*x).collect();
        let w = self.q_factor.solve(&rhs, |_| T::zero())?;
        let mut problem = VolumeProblem { constant, load, minimizer: w, min_value: T::zero() };
        problem.min_value = self.e_value(&problem, &problem.minimizer);
        Ok(problem)
    }

    /// `E(w, V)` for the given coefficients (Γ_D entries must be zero).
    pub fn e_value(&self, problem: &VolumeProblem<T>, w: &[T]) -> T {
        problem.constant
            + T::lit(2.0) * problem.load.iter().zip(w).map(|(a, b)| *a * *b).sum::<T>()
            + self.q_matrix().quad_form(w)
    }

    /// `−min_w E(w, V)`.
    pub fn second_derivative_volume(&self, v: &DeformationField<T>) -> Result<T> {
        Ok(-self.volume_problem(v)?.min_value)
    }

    /// Normal traces of `C_D`, `C_N` and the auxiliary problem with
    /// `v = −V_n ∂_n u` on Γ_D and load `B·n` on Γ_N.
    pub fn second_derivative_boundary_parts(&self, v: &DeformationField<T>) -> Result<(T, AuxQuadraticProblem<T>)> {
        let pair = &self.state.pair;
        let mut traces = T::zero();
        for p in self.jets.iter() {
            let variant = match p.tag {
                BoundaryTag::Dirichlet => CVariant::Dirichlet,
                BoundaryTag::Neumann => CVariant::Neumann,
            };
            traces += p.weight * field_c_at(pair, &Self::jet_point(p), v, variant).dot(p.normal);
        }
        let aux = self.aux_problem(
            |x, n, q| -v.value(x).dot(n) * q,
            |p| field_b_at(pair, &Self::jet_point(p), v).dot(p.normal),
        )?;
        Ok((traces, aux))
    }

    pub fn second_derivative_boundary(&self, v: &DeformationField<T>) -> Result<T> {
        let (traces, aux) = self.second_derivative_boundary_parts(v)?;
        Ok(traces - aux.min_value)
    }

    /// Torsion representation, including the terms carried by the
    /// tangential part of `V`.
    pub fn second_derivative_torsion(&self, v: &DeformationField<T>) -> Result<T> {
        let pair = &self.state.pair;
        if !pair.is_torsion_class() {
            return Err(Error::WrongPair { expected: "torsion" });
        }
        let lambda = pair.lambda();
        let (half, two) = (T::lit(0.5), T::lit(2.0));
        // ∂_τ V_n = ⟨DV τ, n⟩ + H V_τ
        let dt_vn = |p: &BoundaryJet<T>| {
            let (_, vt) = frame_split(v.value(p.x), p);
            v.jacobian(p.x).mul_vec(p.tangent).dot(p.normal) + p.curvature * vt
        };
        let mut acc = T::zero();
        for p in self.jets.iter() {
            let (vn, vt) = frame_split(v.value(p.x), p);
            let un = p.dn_u();
            let g2 = p.grad_u.norm_sq();
            let z = p.curvature * vt * vt - two * vt * dt_vn(p);
            let term = match p.tag {
                BoundaryTag::Dirichlet => {
                    -half * vn * vn * (two * lambda * un + un * un * p.curvature) + half * un * un * z
                }
                BoundaryTag::Neumann => {
                    -half * vn * vn * ((g2 - two * lambda * p.u) * p.curvature + two * p.hess_u.form(p.grad_u, p.normal))
                        - (half * g2 - lambda * p.u) * z
                }
            };
            acc += p.weight * term;
        }
        // The Γ_N load carries V_n ∂²_nn u next to ⟨∇u, ∇_Γ V_n⟩; without it
        // the representation disagrees with l₂(V_n) whenever Γ_N ≠ ∅.
        let aux = self.aux_problem(
            |x, n, q| -v.value(x).dot(n) * q,
            |p| v.value(p.x).dot(p.normal) * p.hess_u.form(p.normal, p.normal) - p.dt_u() * dt_vn(p),
        )?;
        Ok(acc - aux.min_value)
    }

    /// p-torsion representation for normal `V` on a pure-Dirichlet domain,
    /// with the weight of the quadratic form floored at
    /// `rho_factor · max|∇u|`.
    pub fn second_derivative_ptorsion_floored(&self, v: &DeformationField<T>, rho_factor: T) -> Result<T> {
        let pair = &self.state.pair;
        let Some((p_exp, _)) = pair.p_exponent() else {
            return Err(Error::WrongPair { expected: "p_torsion" });
        };
        let mesh = &self.state.mesh;
        if mesh.boundary().iter().any(|e| e.tag == BoundaryTag::Neumann) {
            return Err(Error::UnsupportedCombination("p-torsion second derivative needs a pure Dirichlet boundary".into()));
        }
        self.check_normal(v)?;
        let lambda = pair.lambda();
        let mut acc = T::zero();
        for p in self.jets.iter() {
            let vn = v.value(p.x).dot(p.normal);
            let un = p.dn_u();
            acc += p.weight * vn * vn * (p_exp * lambda * un + un.abs().powf(p_exp) * p.curvature);
        }
        let boundary = -acc / p_exp;
        let rho = rho_factor * self.state.max_gradient();
        let u = &self.state.u.values;
        let m = assemble_form(mesh, DEFAULT_ORDER, |q| (pair.hess_f_floored(q.basis.gradient(u), rho), T::zero()))?;
        let factor = SpdFactor::new(&m, &self.fixed)?;
        let data = self.jets.dirichlet_values(mesh, |x, n, q| -v.value(x).dot(n) * q);
        let aux = Self::solve_aux(&factor, data, vec![T::zero(); self.fixed.len()], self.state)?;
        Ok(boundary - aux.min_value)
    }

    pub fn second_derivative_ptorsion(&self, v: &DeformationField<T>) -> Result<T> {
        self.second_derivative_ptorsion_floored(v, T::lit(1e-6))
    }

    /// Rejects fields whose tangential part at the boundary vertices exceeds
    /// the geometric resolution `max(h², 10⁻⁶)·max|V|`.
    fn check_normal(&self, v: &DeformationField<T>) -> Result<()> {
        let mesh = &self.state.mesh;
        let verts = mesh.vertices();
        let (mut vt, mut vmax) = (T::zero(), T::zero());
        for (k, e) in mesh.boundary().iter().enumerate() {
            let x = verts[e.a];
            let n = self.jets.geometry.normals[k][0];
            let val = v.value(x);
            vt = vt.max(val.dot(n.perp()).abs());
            vmax = vmax.max(val.norm());
        }
        let h = mesh.max_edge_length();
        let tol = (h * h).max(T::lit(1e-6)) * vmax;
        if vt > tol {
            return Err(Error::NonNormalV(vt.to_f64_lossy()));
        }
        Ok(())
    }

    /// Boundary quadratic form `l₂(φ)`; tangential derivatives of `φ` are
    /// central differences along the smoothed tangent.
    pub fn l2_form(&self, phi: &dyn Fn(Vec2<T>) -> T) -> Result<T> {
        let pair = &self.state.pair;
        let step = T::epsilon().cbrt() * self.state.mesh.diameter();
        let dphi = |p: &BoundaryJet<T>| (phi(p.x + p.tangent.scale(step)) - phi(p.x - p.tangent.scale(step))) / (step + step);
        // ⟨Dσ n, n⟩ with Dσ = ∇²f(∇u) ∇²u
        let dsigma_nn = |p: &BoundaryJet<T>| pair.hess_f(p.grad_u).mul_vec(p.hess_u.mul_vec(p.normal)).dot(p.normal);
        let two = T::lit(2.0);
        let mut acc = T::zero();
        for p in self.jets.iter() {
            let f = phi(p.x);
            let un = p.dn_u();
            let term = match p.tag {
                BoundaryTag::Dirichlet => {
                    let fstar = pair.f_conjugate(p.sigma).ok_or(Error::ConjugateUnavailable)?;
                    f * f * (un * dsigma_nn(p) + fstar * p.curvature)
                }
                BoundaryTag::Neumann => {
                    let st = p.sigma.dot(p.tangent);
                    let u_tn = p.hess_u.form(p.tangent, p.normal);
                    st * (two * f * dphi(p) * un + f * f * (u_tn + p.curvature * p.dt_u()))
                        - f * f
                            * (p.hess_u.mul_vec(p.sigma).dot(p.normal)
                                + (pair.f(p.grad_u) + pair.g(p.u)) * p.curvature
                                + un * dsigma_nn(p))
                }
            };
            acc += p.weight * term;
        }
        let aux = self.aux_problem(|x, _, q| -phi(x) * q, |p| phi(p.x) * dsigma_nn(p) - p.sigma.dot(p.tangent) * dphi(p))?;
        Ok(acc - aux.min_value)
    }

    /// `∫_{∂Ω} |V|` style size of `V` on the boundary, used for scale-aware
    /// null tests.
    pub fn boundary_norm(&self, v: &DeformationField<T>) -> T {
        self.jets.integrate(TagFilter::Both, |p| v.value(p.x).norm_sq()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrands::{make_p_torsion, make_torsion};
    use crate::mesh::{generate_annulus, generate_disk, generate_ellipse, Mesh2D};
    use crate::solver::solve_state;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::f64::consts::PI;
    use std::sync::{Arc, OnceLock};

    fn solve(mesh: Mesh2D<f64>, pair: &crate::integrands::ConvexPair<f64>) -> StateSolution<f64> {
        solve_state(Arc::new(mesh), pair, 1e-10, 60).unwrap()
    }

    fn disk() -> &'static StateSolution<f64> {
        static S: OnceLock<StateSolution<f64>> = OnceLock::new();
        S.get_or_init(|| solve(generate_disk(1.0, 0.1, 1.0).unwrap(), &make_torsion(1.0).unwrap()))
    }

    fn ellipse() -> &'static StateSolution<f64> {
        static S: OnceLock<StateSolution<f64>> = OnceLock::new();
        S.get_or_init(|| solve(generate_ellipse(1.5, 1.0, 0.1, 1.0).unwrap(), &make_torsion(1.0).unwrap()))
    }

    fn annulus() -> &'static StateSolution<f64> {
        static S: OnceLock<StateSolution<f64>> = OnceLock::new();
        S.get_or_init(|| {
            let mesh = generate_annulus(0.5, 1.0, 0.05, BoundaryTag::Neumann, BoundaryTag::Dirichlet).unwrap();
            solve(mesh, &make_torsion(1.0).unwrap())
        })
    }

    fn poly() -> DeformationField<f64> {
        DeformationField::polynomial(vec![(1, 0, 0.3), (0, 2, 0.2), (0, 0, 0.1)], vec![(1, 1, 0.4), (0, 1, -0.1)])
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn disk_dilation_all_routes() {
        // J(tΩ) = t⁴ J(Ω) with J = π/16, so J' = π/4 and J'' = 3π/4.
        let ctx = ShapeContext::new(disk()).unwrap();
        let v = DeformationField::dilation();
        assert!(rel(ctx.first_derivative_volume(&v).unwrap(), PI / 4.0) < 1e-2);
        assert!(rel(ctx.first_derivative_boundary(&v).unwrap(), PI / 4.0) < 1e-2);
        for j2 in [
            ctx.second_derivative_volume(&v).unwrap(),
            ctx.second_derivative_boundary(&v).unwrap(),
            ctx.second_derivative_torsion(&v).unwrap(),
        ] {
            assert!(rel(j2, 0.75 * PI) < 1e-2, "{j2}");
        }
    }

    #[test]
    fn routes_agree_off_the_disk() {
        for state in [ellipse(), annulus()] {
            let ctx = ShapeContext::new(state).unwrap();
            let v = poly();
            let jv = ctx.second_derivative_volume(&v).unwrap();
            let jb = ctx.second_derivative_boundary(&v).unwrap();
            let jt = ctx.second_derivative_torsion(&v).unwrap();
            assert!(rel(jb, jv) < 3e-2 && rel(jt, jv) < 3e-2, "{jv} {jb} {jt}");
            let j1v = ctx.first_derivative_volume(&v).unwrap();
            assert!(rel(ctx.first_derivative_boundary(&v).unwrap(), j1v) < 1e-2);
        }
    }

    #[test]
    fn volume_minimizer_beats_random_competitors() {
        let state = ellipse();
        let ctx = ShapeContext::new(state).unwrap();
        let problem = ctx.volume_problem(&poly()).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..10 {
            let w: Vec<f64> = problem
                .minimizer
                .iter()
                .enumerate()
                .map(|(i, &m)| if ctx.fixed[i] { 0.0 } else { m + 0.1 * rng.random_range(-1.0..1.0) })
                .collect();
            assert!(ctx.e_value(&problem, &w) >= problem.min_value);
        }
    }

    #[test]
    fn aux_problem_reproduces_constants() {
        let ctx = ShapeContext::new(disk()).unwrap();
        let aux = ctx.aux_problem(|_, _, _| 0.5, |_| 0.0).unwrap();
        assert!(aux.minimizer.values.iter().all(|v| (v - 0.5).abs() < 1e-8));
        assert!(aux.min_value.abs() < 1e-8);
    }

    #[test]
    fn compact_field_material_derivative() {
        // For V supported inside Ω the volume minimiser is ⟨V, ∇u⟩.
        let state = disk();
        let ctx = ShapeContext::new(state).unwrap();
        let v = DeformationField::radial_bump(Vec2::new(0.1, -0.1), 0.5, 0.3);
        let w = FEFunction { mesh: state.mesh.clone(), values: ctx.volume_problem(&v).unwrap().minimizer };
        let target = FEFunction::interpolate(state.mesh.clone(), |x| v.value(x).dot(Vec2::new(-0.5 * x.x, -0.5 * x.y)));
        let (err, size) = (
            integrate(&state.mesh, DEFAULT_ORDER, |q| (q.basis.value(&w.values) - q.basis.value(&target.values)).powi(2)).unwrap(),
            integrate(&state.mesh, DEFAULT_ORDER, |q| q.basis.value(&target.values).powi(2)).unwrap(),
        );
        assert!((err / size).sqrt() < 1e-2, "{}", (err / size).sqrt());
    }

    #[test]
    fn boundary_routes_see_only_the_boundary() {
        let ctx = ShapeContext::new(ellipse()).unwrap();
        let v = poly();
        let w = v.plus(&DeformationField::radial_bump(Vec2::new(0.2, 0.1), 0.4, 0.5));
        assert!(rel(ctx.second_derivative_boundary(&w).unwrap(), ctx.second_derivative_boundary(&v).unwrap()) < 1e-12);
        assert!(rel(ctx.second_derivative_torsion(&w).unwrap(), ctx.second_derivative_torsion(&v).unwrap()) < 1e-12);
        assert!(rel(ctx.second_derivative_volume(&w).unwrap(), ctx.second_derivative_volume(&v).unwrap()) < 1e-3);
    }

    #[test]
    fn l2_form_is_quadratic() {
        let ctx = ShapeContext::new(ellipse()).unwrap();
        let phi = |x: Vec2<f64>| 0.3 + x.x * x.y - 0.2 * x.y;
        let a = ctx.l2_form(&phi).unwrap();
        let b = ctx.l2_form(&|x| 2.0 * phi(x)).unwrap();
        assert!(rel(b, 4.0 * a) < 1e-10);
    }

    #[test]
    fn l2_form_matches_normal_routes() {
        // V = φ x is normal on the unit circle with V_n = φ.
        let ctx = ShapeContext::new(disk()).unwrap();
        let phi = |x: Vec2<f64>| 1.0 + 0.3 * x.x;
        let v = DeformationField::polynomial(vec![(1, 0, 1.0), (2, 0, 0.3)], vec![(0, 1, 1.0), (1, 1, 0.3)]);
        let l2 = ctx.l2_form(&phi).unwrap();
        assert!(rel(l2, ctx.second_derivative_torsion(&v).unwrap()) < 1e-2);
        assert!(rel(l2, ctx.second_derivative_volume(&v).unwrap()) < 1e-2);
    }

    #[test]
    fn p2_instance_of_ptorsion_matches_torsion() {
        let state = solve(generate_disk(1.0, 0.1, 1.0).unwrap(), &make_p_torsion(2.0, 1.0, 0.0).unwrap());
        let ctx = ShapeContext::new(&state).unwrap();
        let v = DeformationField::disk_normal(1.0);
        let a = ctx.second_derivative_ptorsion(&v).unwrap();
        let b = ctx.second_derivative_torsion(&v).unwrap();
        assert!(rel(a, b) < 1e-8, "{a} {b}");
    }

    #[test]
    fn route_preconditions() {
        let ctx = ShapeContext::new(disk()).unwrap();
        let err = ctx.second_derivative_ptorsion(&DeformationField::disk_normal(1.0)).unwrap_err();
        assert_eq!(err.code(), "WRONG_PAIR");

        let p3 = solve(generate_disk(1.0, 0.2, 1.0).unwrap(), &make_p_torsion(3.0, 1.0, 1e-4).unwrap());
        let ctx = ShapeContext::new(&p3).unwrap();
        let err = ctx.second_derivative_torsion(&DeformationField::dilation()).unwrap_err();
        assert_eq!(err.code(), "WRONG_PAIR");
        let err = ctx.second_derivative_ptorsion(&DeformationField::constant(Vec2::new(1.0, 0.0))).unwrap_err();
        assert_eq!(err.code(), "NONNORMAL_V");
        assert!(ctx.second_derivative_ptorsion(&DeformationField::disk_normal(1.0)).is_ok());

        let mixed = solve(generate_disk(1.0, 0.2, 0.5).unwrap(), &make_p_torsion(3.0, 1.0, 1e-4).unwrap());
        let ctx = ShapeContext::new(&mixed).unwrap();
        let err = ctx.second_derivative_ptorsion(&DeformationField::disk_normal(1.0)).unwrap_err();
        assert_eq!(err.code(), "UNSUPPORTED_COMBINATION");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn derivatives_are_homogeneous(
            t in prop::sample::select(vec![-1.0, 2.0, 5.0]),
            c in prop::collection::vec(-0.5f64..0.5, 5),
        ) {
            let ctx = ShapeContext::new(ellipse()).unwrap();
            let v = DeformationField::polynomial(
                vec![(1, 0, c[0]), (0, 2, c[1]), (0, 0, c[2])],
                vec![(1, 1, c[3]), (0, 1, c[4])],
            );
            let tv = v.scaled(t);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * b.abs().max(1e-12);
            prop_assert!(close(ctx.first_derivative_volume(&tv).unwrap(), t * ctx.first_derivative_volume(&v).unwrap()));
            prop_assert!(close(ctx.first_derivative_boundary(&tv).unwrap(), t * ctx.first_derivative_boundary(&v).unwrap()));
            prop_assert!(close(ctx.second_derivative_volume(&tv).unwrap(), t * t * ctx.second_derivative_volume(&v).unwrap()));
            prop_assert!(close(ctx.second_derivative_boundary(&tv).unwrap(), t * t * ctx.second_derivative_boundary(&v).unwrap()));
            prop_assert!(close(ctx.second_derivative_torsion(&tv).unwrap(), t * t * ctx.second_derivative_torsion(&v).unwrap()));
        }
    }
}
