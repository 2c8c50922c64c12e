//! The state problem: Newton's method for `min ∫ f(∇u) + g(u)` with `u = 0`
//! on Γ_D, and diagnostics of the resulting optimality system.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_energy, assemble_form, assemble_load, boundary_integral_at, for_each_point, h1_gram, integrate,
    DofMap, FEFunction, Projector, RecoveredGradient, SpdFactor, DEFAULT_ORDER,
};
use crate::integrands::{make_torsion, ConvexPair};
use crate::linalg::{Mat2, Vec2};
use crate::mesh::{Mesh2D, TagFilter};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SolverOptions<T> {
    /// Stopping threshold on the H¹-dual norm of the residual.
    pub tol: T,
    pub max_iter: usize,
    pub armijo: T,
    pub backtrack: T,
    /// Starting coefficients (Dirichlet entries are overwritten by zero).
    pub initial: Option<Vec<T>>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iter: 50, armijo: T::lit(1e-4), backtrack: T::lit(0.5), initial: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport<T> {
    pub iterations: usize,
    pub residual: T,
    /// Energy before each step and after the last one.
    pub energies: Vec<T>,
}

/// Discrete minimiser with its recovered derivatives.
#[derive(Clone, Debug)]
pub struct StateSolution<T> {
    pub mesh: Arc<Mesh2D<T>>,
    pub pair: ConvexPair<T>,
    pub dofs: DofMap,
    pub u: FEFunction<T>,
    /// L²-projected gradient; its derivative is the recovered Hessian.
    pub grad: RecoveredGradient<T>,
    /// `J(Ω) = −∫ f(∇u) + g(u)`.
    pub j_value: T,
    pub report: NewtonReport<T>,
}

impl<T: Real> StateSolution<T> {
    /// Elementwise gradient of the discrete state.
    pub fn raw_gradient(&self, t: usize, bary: [T; 3]) -> Vec2<T> {
        self.u.gradient_at(t, bary)
    }

    pub fn recovered_gradient(&self, t: usize, bary: [T; 3]) -> Vec2<T> {
        self.grad.gradient_at(t, bary)
    }

    pub fn hessian(&self, t: usize, bary: [T; 3]) -> Mat2<T> {
        self.grad.hessian_at(t, bary)
    }

    /// `σ = ∇f(G)` from the recovered gradient `G`.
    pub fn sigma(&self, t: usize, bary: [T; 3]) -> Vec2<T> {
        self.pair.grad_f(self.recovered_gradient(t, bary))
    }

    pub fn value(&self, t: usize, bary: [T; 3]) -> T {
        self.u.value_at(t, bary)
    }

    pub fn max_gradient(&self) -> T {
        let mut m = T::zero();
        for_each_point(&self.mesh, DEFAULT_ORDER, |q| m = m.max(q.basis.gradient(&self.u.values).norm()))
            .expect("default order");
        m
    }
}

fn fixed_mask(dofs: &DofMap) -> Vec<bool> {
    (0..dofs.n_dofs).map(|i| dofs.is_dirichlet(i)).collect()
}

fn residual<T: Real>(mesh: &Mesh2D<T>, pair: &ConvexPair<T>, u: &[T], fixed: &[bool]) -> Result<Vec<T>> {
    let mut r = assemble_load(mesh, DEFAULT_ORDER, |q| {
        (pair.dg(q.basis.value(u)), pair.grad_f(q.basis.gradient(u)))
    })?;
    for (ri, &f) in r.iter_mut().zip(fixed) {
        if f {
            *ri = T::zero();
        }
    }
    Ok(r)
}

fn dual_norm<T: Real>(gram: &SpdFactor<T>, r: &[T]) -> Result<T> {
    if r.iter().all(|v| *v == T::zero()) {
        return Ok(T::zero());
    }
    let y = gram.solve(r, |_| T::zero())?;
    Ok(r.iter().zip(&y).map(|(a, b)| *a * *b).sum::<T>().max(T::zero()).sqrt())
}

fn energy<T: Real>(mesh: &Arc<Mesh2D<T>>, pair: &ConvexPair<T>, u: &[T]) -> T {
    assemble_energy(mesh, pair, &FEFunction { mesh: mesh.clone(), values: u.to_vec() })
}

/// Starting point for non-quadratic pairs: the torsion state scaled by the
/// energy-minimising factor along its ray.
fn p_torsion_guess<T: Real>(mesh: &Arc<Mesh2D<T>>, pair: &ConvexPair<T>) -> Result<Vec<T>> {
    let base = solve_state_with(mesh.clone(), &make_torsion(pair.lambda())?, &SolverOptions::default())?;
    let u0 = base.u.values;
    if u0.iter().all(|v| *v == T::zero()) {
        return Ok(u0);
    }
    let e = |t: T| energy(mesh, pair, &u0.iter().map(|v| *v * t).collect::<Vec<_>>());
    // bracket the minimiser of the convex map t ↦ E(t·u0), then golden-section search
    let (mut lo, mut hi) = (T::zero(), T::one());
    while e(hi + hi) < e(hi) && hi < T::lit(1e6) {
        lo = hi;
        hi = hi + hi;
    }
    hi = hi + hi;
    let g = T::lit(0.618_033_988_749_895);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if e(a) < e(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let t = T::lit(0.5) * (lo + hi);
    Ok(u0.into_iter().map(|v| v * t).collect())
}

pub fn solve_state<T: Real>(mesh: Arc<Mesh2D<T>>, pair: &ConvexPair<T>, tol: T, max_iter: usize) -> Result<StateSolution<T>> {
    solve_state_with(mesh, pair, &SolverOptions { tol, max_iter, ..SolverOptions::default() })
}

/// Damped Newton iteration with Armijo backtracking on the energy.
pub fn solve_state_with<T: Real>(mesh: Arc<Mesh2D<T>>, pair: &ConvexPair<T>, opts: &SolverOptions<T>) -> Result<StateSolution<T>> {
    let dofs = DofMap::new(&mesh);
    let fixed = fixed_mask(&dofs);
    let n = dofs.n_dofs;
    let mut u = match &opts.initial {
        Some(v) if v.len() == n => v.clone(),
        Some(v) => return Err(Error::InvalidParameter(format!("initial guess has {} entries, expected {n}", v.len()))),
        None if pair.p_exponent().is_some() && !pair.is_torsion_class() => p_torsion_guess(&mesh, pair)?,
        None => vec![T::zero(); n],
    };
    for &d in &dofs.dirichlet_dofs {
        u[d] = T::zero();
    }
    let gram = SpdFactor::new(&h1_gram(&mesh)?, &fixed)?;
    // floating-point floor: a residual this small is indistinguishable from zero
    let tol = opts.tol.max(T::lit(1e3) * T::epsilon());
    let mut e0 = energy(&mesh, pair, &u);
    let mut energies = vec![e0];
    let mut iterations = 0;
    loop {
        let r = residual(&mesh, pair, &u, &fixed)?;
        let rn = dual_norm(&gram, &r)?;
        if !rn.is_finite() {
            return Err(Error::NoConvergence { iterations, residual: f64::INFINITY });
        }
        if rn <= tol {
            let u = FEFunction { mesh: mesh.clone(), values: u };
            let grad = Projector::new(mesh.clone())?.recover_gradient(&u)?;
            return Ok(StateSolution {
                mesh,
                pair: *pair,
                dofs,
                u,
                grad,
                j_value: -e0,
                report: NewtonReport { iterations, residual: rn, energies },
            });
        }
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: rn.to_f64_lossy() });
        }
        let uref = &u;
        let k = assemble_form(&mesh, DEFAULT_ORDER, |q| {
            (pair.hess_f(q.basis.gradient(uref)), pair.d2g(q.basis.value(uref)))
        })?;
        let rhs: Vec<T> = r.iter().map(|v| -*v).collect();
        let d = SpdFactor::new(&k, &fixed)?.solve(&rhs, |_| T::zero())?;
        let slope: T = r.iter().zip(&d).map(|(a, b)| *a * *b).sum();
        let round = T::lit(64.0) * T::epsilon() * (T::one() + e0.abs());
        let mut alpha = T::one();
        let (un, en) = loop {
            let trial: Vec<T> = u.iter().zip(&d).map(|(a, b)| *a + alpha * *b).collect();
            let et = energy(&mesh, pair, &trial);
            if et <= e0 + opts.armijo * alpha * slope + round {
                break (trial, et);
            }
            alpha *= opts.backtrack;
            if alpha < T::lit(1e-12) {
                return Err(Error::NoConvergence { iterations, residual: rn.to_f64_lossy() });
            }
        };
        u = un;
        e0 = en;
        energies.push(en);
        iterations += 1;
    }
}

/// Residuals of the discrete optimality system.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityDiagnostics<T> {
    /// H¹-dual norm of the Euler–Lagrange residual.
    pub el_residual: T,
    /// `|J − ∫ f*(σ) + g*(div σ)|`; the `g*` term is dropped for linear `g`.
    pub duality_gap: Option<T>,
    /// `|∫ (div σ − g'(u))|` for linear `g`, the feasibility defect of the
    /// indicator constraint; `None` otherwise.
    pub dual_feasibility: Option<T>,
    /// `∫_{Γ_N} |σ·n|`.
    pub neumann_flux: T,
}

pub fn optimality_diagnostics<T: Real>(state: &StateSolution<T>) -> Result<OptimalityDiagnostics<T>> {
    let mesh = &state.mesh;
    let pair = &state.pair;
    let neumann_flux = boundary_integral_at(mesh, TagFilter::Neumann, |p| {
        state.sigma(p.triangle, p.bary).dot(p.normal).abs()
    });
    let (duality_gap, dual_feasibility) = if pair.has_f_conjugate() {
        // divergence of the projected dual field
        let proj = Projector::new(mesh.clone())?;
        let sx = proj.project(|t, b, _| state.sigma(t, b).x)?;
        let sy = proj.project(|t, b, _| state.sigma(t, b).y)?;
        let div = |q: &crate::fem::QuadPoint<T>| q.basis.gradient(&sx).x + q.basis.gradient(&sy).y;
        if pair.g_linear() {
            let fs = integrate(mesh, DEFAULT_ORDER, |q| pair.f_conjugate(state.sigma(q.triangle, q.bary)).unwrap())?;
            let feas = integrate(mesh, DEFAULT_ORDER, |q| div(q) - pair.dg(T::zero()))?;
            (Some((state.j_value - fs).abs()), Some(feas.abs()))
        } else {
            let dual = integrate(mesh, DEFAULT_ORDER, |q| {
                pair.f_conjugate(state.sigma(q.triangle, q.bary)).unwrap() + pair.g_conjugate(div(q)).unwrap()
            })?;
            (Some((state.j_value - dual).abs()), None)
        }
    } else {
        (None, None)
    };
    Ok(OptimalityDiagnostics { el_residual: state.report.residual, duality_gap, dual_feasibility, neumann_flux })
}

/// L² norm of the recovered Hessian over elements whose centroid lies at
/// distance ≥ `margin` from the boundary.
pub fn interior_hessian_norm<T: Real>(state: &StateSolution<T>, margin: T) -> Result<T> {
    let mesh = &state.mesh;
    let verts = mesh.vertices();
    let dist = |p: Vec2<T>| {
        mesh.boundary()
            .iter()
            .map(|e| {
                let (a, b) = (verts[e.a], verts[e.b]);
                let d = b - a;
                let s = ((p - a).dot(d) / d.norm_sq()).max(T::zero()).min(T::one());
                (p - a - d.scale(s)).norm()
            })
            .fold(T::infinity(), T::min)
    };
    let third = T::one() / T::lit(3.0);
    let inside: Vec<bool> = (0..mesh.n_triangles()).map(|t| dist(mesh.geometry(t).point([third; 3])) >= margin).collect();
    let s = integrate(mesh, DEFAULT_ORDER, |q| {
        if inside[q.triangle] {
            let h = state.hessian(q.triangle, q.bary);
            h.ddot(&h)
        } else {
            T::zero()
        }
    })?;
    Ok(s.sqrt())
}
