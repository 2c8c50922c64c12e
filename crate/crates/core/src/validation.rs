//! Independent checks of the derivative routes: finite differences of `J`
//! on deformed meshes and the difference-quotient minimiser check.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{for_each_boundary_point, integrate, DEFAULT_ORDER};
use crate::integrands::ConvexPair;
use crate::mesh::{deform, DeformationField, Mesh2D, PointLocator, TagFilter};
use crate::scalar::Real;
use crate::shape::{first_derivative_volume, DerivativeReport, ShapeContext};
use crate::solver::{solve_state_with, SolverOptions, StateSolution};

pub const DEFAULT_EPS: [f64; 4] = [0.08, 0.04, 0.02, 0.01];

/// Richardson estimate with its error bar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolated<T> {
    pub value: T,
    pub error: T,
}

#[derive(Clone, Debug)]
pub struct FdSweep<T> {
    /// Strictly decreasing step sizes that produced valid meshes for `±ε`.
    pub eps_list: Vec<T>,
    pub j0: T,
    pub j_plus: Vec<T>,
    pub j_minus: Vec<T>,
    /// `(J(ε) − J(−ε)) / 2ε`.
    pub r1_values: Vec<T>,
    /// `(J(ε) − 2J + J(−ε)) / ε²`.
    pub r2_values: Vec<T>,
    /// One-sided quotients `2(J(±ε) − J − (±ε)J′)/ε²` with `J′` from the
    /// volume route.
    pub r_eps_plus: Vec<T>,
    pub r_eps_minus: Vec<T>,
    pub j1_reference: T,
    pub first: Extrapolated<T>,
    pub second: Extrapolated<T>,
    /// Step sizes dropped because a deformed element inverted.
    pub dropped: Vec<T>,
    /// Newton iterations per solve, `+ε` then `−ε` for each kept step.
    pub iterations: Vec<(usize, usize)>,
}

impl<T: Real> FdSweep<T> {
    /// Slope of `ε ↦ r_ε` at the smallest step, `(r_ε − r_{−ε}) / 2ε`,
    /// which is exact for quadratic dependence on `ε`.
    pub fn r_eps_slope(&self) -> Option<T> {
        let k = self.eps_list.len().checked_sub(1)?;
        Some((self.r_eps_plus[k] - self.r_eps_minus[k]) / (self.eps_list[k] + self.eps_list[k]))
    }
}

/// Successive Richardson estimates for a quantity with an even error
/// expansion `Q(ε) = Q₀ + cε² + O(ε⁴)`; the error bar is the spread of the
/// last two estimates (or the last correction when only one exists).
pub fn richardson<T: Real>(eps: &[T], q: &[T]) -> Option<Extrapolated<T>> {
    match q.len() {
        0 => None,
        1 => Some(Extrapolated { value: q[0], error: T::infinity() }),
        n => {
            let est: Vec<T> = (1..n)
                .map(|k| {
                    let (a, b) = (eps[k - 1] * eps[k - 1], eps[k] * eps[k]);
                    (a * q[k] - b * q[k - 1]) / (a - b)
                })
                .collect();
            let last = est[est.len() - 1];
            let error = if est.len() >= 2 { (last - est[est.len() - 2]).abs() } else { (last - q[n - 1]).abs() };
            Some(Extrapolated { value: last, error })
        }
    }
}

/// Solves the state on `deform(mesh, V, ±ε)` for every `ε` (in parallel,
/// merged in order) starting Newton from the coefficients of `state`.
pub fn fd_sweep<T: Real>(
    state: &StateSolution<T>,
    v: &DeformationField<T>,
    eps_list: &[T],
    solver: &SolverOptions<T>,
) -> Result<FdSweep<T>> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[0] > w[1])) || !(eps_list[eps_list.len() - 1] > T::zero()) {
        return Err(Error::InvalidParameter("eps_list must be positive and strictly decreasing".into()));
    }
    let mesh = &state.mesh;
    let jobs: Vec<T> = eps_list.iter().flat_map(|&e| [e, -e]).collect();
    let solved: Vec<Result<Option<(T, usize)>>> = jobs
        .par_iter()
        .map(|&e| {
            let moved = match deform(mesh, v, e) {
                Ok(m) => m,
                Err(Error::InvertedElement { .. }) => return Ok(None),
                Err(err) => return Err(err),
            };
            let opts = SolverOptions { initial: Some(state.u.values.clone()), ..solver.clone() };
            let s = solve_state_with(Arc::new(moved), &state.pair, &opts)?;
            Ok(Some((s.j_value, s.report.iterations)))
        })
        .collect();
    let j1 = first_derivative_volume(state, v)?;
    let j0 = state.j_value;
    let two = T::lit(2.0);
    let mut out = FdSweep {
        eps_list: Vec::new(),
        j0,
        j_plus: Vec::new(),
        j_minus: Vec::new(),
        r1_values: Vec::new(),
        r2_values: Vec::new(),
        r_eps_plus: Vec::new(),
        r_eps_minus: Vec::new(),
        j1_reference: j1,
        first: Extrapolated { value: T::nan(), error: T::infinity() },
        second: Extrapolated { value: T::nan(), error: T::infinity() },
        dropped: Vec::new(),
        iterations: Vec::new(),
    };
    let mut it = solved.into_iter();
    for &e in eps_list {
        let (p, m) = (it.next().expect("two jobs per step")?, it.next().expect("two jobs per step")?);
        let (Some((jp, ip)), Some((jm, im))) = (p, m) else {
            out.dropped.push(e);
            continue;
        };
        out.eps_list.push(e);
        out.j_plus.push(jp);
        out.j_minus.push(jm);
        out.r1_values.push((jp - jm) / (e + e));
        out.r2_values.push((jp - two * j0 + jm) / (e * e));
        out.r_eps_plus.push(two * (jp - j0 - e * j1) / (e * e));
        out.r_eps_minus.push(two * (jm - j0 + e * j1) / (e * e));
        out.iterations.push((ip, im));
    }
    if let Some(x) = richardson(&out.eps_list, &out.r1_values) {
        out.first = x;
    }
    if let Some(x) = richardson(&out.eps_list, &out.r2_values) {
        out.second = x;
    }
    Ok(out)
}

/// `‖w_ε − ⟨V, ∇u⟩‖_{L²}` for each `ε`, where
/// `w_ε(x) = (u(x + εV(x)) − u(x)) / ε` on the same mesh.
pub fn gamma_limit_check<T: Real>(state: &StateSolution<T>, v: &DeformationField<T>, eps_list: &[T]) -> Result<Vec<T>> {
    let mesh = &state.mesh;
    let scale = mesh.diameter().max(T::one());
    let mut on_boundary = T::zero();
    for x in mesh.boundary().iter().map(|e| mesh.vertices()[e.a]) {
        on_boundary = on_boundary.max(v.value(x).norm());
    }
    for_each_boundary_point(mesh, TagFilter::Both, |p| on_boundary = on_boundary.max(v.value(p.x).norm()));
    if on_boundary > T::lit(1e-12) * scale {
        return Err(Error::SupportViolation(on_boundary.to_f64_lossy()));
    }
    let locator = PointLocator::new(mesh);
    let u = &state.u;
    eps_list
        .iter()
        .map(|&e| {
            let outside = std::cell::Cell::new(false);
            let sq = integrate(mesh, DEFAULT_ORDER, |q| {
                let vx = v.value(q.x);
                let target = vx.dot(q.basis.gradient(&u.values));
                let Some((t, b)) = locator.locate(q.x + vx.scale(e)) else {
                    outside.set(true);
                    return T::zero();
                };
                let w = (u.value_at(t, b) - q.basis.value(&u.values)) / e;
                (w - target) * (w - target)
            });
            let sq = sq?;
            if outside.get() {
                return Err(Error::SupportViolation(e.to_f64_lossy()));
            }
            Ok(sq.sqrt())
        })
        .collect()
}

/// `|J| + ‖V‖²_{C¹}` with the norm sampled at the mesh vertices: the scale
/// against which first and second derivatives along null directions are
/// judged.
pub fn null_scale<T: Real>(state: &StateSolution<T>, v: &DeformationField<T>) -> T {
    let c1 = state
        .mesh
        .vertices()
        .iter()
        .map(|&x| {
            let dv = v.jacobian(x);
            let fro = (0..2).map(|r| dv.row(r).norm_sq()).sum::<T>().sqrt();
            v.value(x).norm().max(fro)
        })
        .fold(T::zero(), T::max);
    state.j_value.abs() + c1 * c1
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug)]
pub struct ReportOptions<T> {
    pub solver: SolverOptions<T>,
    /// Finite-difference steps; `None` skips the sweep.
    pub eps_list: Option<Vec<T>>,
    pub special: SpecialRoute,
}

/// Treatment of the torsion / p-torsion representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialRoute {
    Skip,
    /// Evaluate when the pair and data allow it; otherwise leave a note.
    IfApplicable,
    /// Evaluate and propagate any precondition failure.
    Required,
}

impl<T: Real> Default for ReportOptions<T> {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            eps_list: Some(DEFAULT_EPS.iter().map(|&e| T::lit(e)).collect()),
            special: SpecialRoute::IfApplicable,
        }
    }
}

/// Every route plus residuals and, optionally, the finite-difference oracle.
pub fn full_report<T: Real>(
    mesh: Arc<Mesh2D<T>>,
    pair: &ConvexPair<T>,
    v: &DeformationField<T>,
    options: &ReportOptions<T>,
) -> Result<(DerivativeReport, Option<FdSweep<T>>)> {
    let state = solve_state_with(mesh, pair, &options.solver)?;
    report_for_state(&state, v, options)
}

/// As [`full_report`] for an already solved state.
pub fn report_for_state<T: Real>(
    state: &StateSolution<T>,
    v: &DeformationField<T>,
    options: &ReportOptions<T>,
) -> Result<(DerivativeReport, Option<FdSweep<T>>)> {
    let pair = &state.pair;
    let ctx = ShapeContext::new(state)?;
    let f = |x: T| x.to_f64_lossy();
    let mut notes = Vec::new();
    let j1_boundary = match ctx.first_derivative_boundary(v) {
        Ok(x) => Some(f(x)),
        Err(e @ Error::ConjugateUnavailable) => {
            notes.push(format!("J1_boundary: {}", e.code()));
            None
        }
        Err(e) => return Err(e),
    };
    let j2_volume = f(ctx.second_derivative_volume(v)?);
    let j2_boundary = f(ctx.second_derivative_boundary(v)?);
    let (mut j2_special, mut special_route) = (None, None);
    if options.special != SpecialRoute::Skip {
        let attempt = if pair.is_torsion_class() {
            Some(("torsion", ctx.second_derivative_torsion(v)))
        } else if pair.p_exponent().is_some() {
            Some(("p_torsion", ctx.second_derivative_ptorsion(v)))
        } else if options.special == SpecialRoute::Required {
            return Err(Error::WrongPair { expected: "torsion or p_torsion" });
        } else {
            None
        };
        let lenient = options.special == SpecialRoute::IfApplicable;
        match attempt {
            Some((name, Ok(x))) => {
                j2_special = Some(f(x));
                special_route = Some(name.to_string());
            }
            Some((name, Err(e @ (Error::NonNormalV(_) | Error::UnsupportedCombination(_))))) if lenient => {
                notes.push(format!("J2_{name}: {}", e.code()));
            }
            Some((_, Err(e))) => return Err(e),
            None => {}
        }
    }
    let sweep = match &options.eps_list {
        Some(eps) => Some(fd_sweep(state, v, eps, &options.solver)?),
        None => None,
    };
    let report = DerivativeReport {
        j_value: f(state.j_value),
        j1_volume: f(ctx.first_derivative_volume(v)?),
        j1_boundary,
        j2_volume,
        j2_boundary,
        j2_special,
        special_route,
        fd_first: sweep.as_ref().map(|s| f(s.first.value)),
        fd_second: sweep.as_ref().map(|s| f(s.second.value)),
        div_a_residual: f(crate::shape::check_div_a(state)?),
        div_b_residual: f(crate::shape::check_div_b(state, v)?),
        route_disagreement: (j2_volume - j2_boundary).abs(),
        h: f(state.mesh.max_edge_length()),
        eps: sweep.as_ref().map(|s| s.eps_list.iter().map(|&e| f(e)).collect()).unwrap_or_default(),
        notes,
    };
    Ok((report, sweep))
}
