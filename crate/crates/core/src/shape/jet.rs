//! Second-order boundary data of the state on a polygonal approximation of
//! a smooth boundary.
//!
//! On a polygon the discrete state has `∂_ττ u = 0` along every flat side, so
//! the Hessian of the discrete solution (raw or recovered) carries no trace of
//! the curvature of the underlying smooth boundary. The jet is therefore
//! rebuilt from first-order data and the equation itself: vertex normals and
//! turning-angle curvatures describe the curve, the flux (on Γ_D) or the
//! tangential derivative (on Γ_N) is smoothed along each boundary chain, the
//! boundary condition differentiated along the curve fixes two Hessian entries
//! and the Euler–Lagrange equation fixes the third.

use crate::error::Result;
use crate::fem::{gauss_legendre_3, SparseSpd, SpdFactor};
use crate::linalg::{Mat2, Vec2};
use crate::mesh::{BoundaryTag, Mesh2D};
use crate::scalar::Real;
use crate::solver::StateSolution;

/// Vertex normals and discrete curvature of the boundary polygon.
#[derive(Clone, Debug)]
pub struct BoundaryGeometry<T> {
    /// Per boundary edge: smoothed unit normals at its start and end vertex.
    pub normals: Vec<[Vec2<T>; 2]>,
    /// Per boundary edge: curvature at its start and end vertex.
    pub curvature: Vec<[T; 2]>,
    pub lengths: Vec<T>,
    pub edge_normals: Vec<Vec2<T>>,
}

impl<T: Real> BoundaryGeometry<T> {
    pub fn new(mesh: &Mesh2D<T>) -> Self {
        let nb = mesh.boundary().len();
        let mut edge_normals = Vec::with_capacity(nb);
        let mut lengths = Vec::with_capacity(nb);
        for k in 0..nb {
            let (n, len) = mesh.boundary_normal(k);
            edge_normals.push(n);
            lengths.push(len);
        }
        let nbrs = mesh.boundary_neighbours();
        // vertex data stored at the start of each edge
        let mut vn = vec![Vec2::zero(); nb];
        let mut vh = vec![T::zero(); nb];
        for k in 0..nb {
            let p = nbrs[k].0;
            let s = edge_normals[p] + edge_normals[k];
            vn[k] = s.scale(T::one() / s.norm());
            let (tp, tk) = (edge_normals[p].perp(), edge_normals[k].perp());
            let turn = tp.cross(tk).atan2(tp.dot(tk));
            vh[k] = turn / (T::lit(0.5) * (lengths[p] + lengths[k]));
        }
        let normals = (0..nb).map(|k| [vn[k], vn[nbrs[k].1]]).collect();
        let curvature = (0..nb).map(|k| [vh[k], vh[nbrs[k].1]]).collect();
        Self { normals, curvature, lengths, edge_normals }
    }

    /// Smoothed normal at parameter `s ∈ [0, 1]` along edge `k`.
    pub fn normal(&self, k: usize, s: T) -> Vec2<T> {
        let [a, b] = self.normals[k];
        let n = a.scale(T::one() - s) + b.scale(s);
        n.scale(T::one() / n.norm())
    }

    /// Linearly interpolated discrete curvature.
    pub fn curvature(&self, k: usize, s: T) -> T {
        let [a, b] = self.curvature[k];
        a * (T::one() - s) + b * s
    }
}

/// Maximal runs of equally tagged edges along each boundary loop.
#[derive(Clone, Debug)]
struct Chain {
    edges: Vec<usize>,
    closed: bool,
}

fn chains<T: Real>(mesh: &Mesh2D<T>, tag: BoundaryTag) -> Vec<Chain> {
    let b = mesh.boundary();
    let mut out = Vec::new();
    for lp in mesh.boundary_loops() {
        if lp.iter().all(|&k| b[k].tag == tag) {
            out.push(Chain { edges: lp, closed: true });
            continue;
        }
        // rotate so the loop starts right after a change of tag
        let m = lp.len();
        let start = (0..m).find(|&i| b[lp[i]].tag == tag && b[lp[(i + m - 1) % m]].tag != tag);
        let Some(start) = start else { continue };
        let mut cur = Vec::new();
        for i in 0..m {
            let k = lp[(start + i) % m];
            if b[k].tag == tag {
                cur.push(k);
            } else if !cur.is_empty() {
                out.push(Chain { edges: std::mem::take(&mut cur), closed: false });
            }
        }
        if !cur.is_empty() {
            out.push(Chain { edges: cur, closed: false });
        }
    }
    out
}

/// End values and arclength derivatives of a chain fit on one edge.
#[derive(Clone, Copy, Debug)]
struct EdgeFit<T> {
    value: [T; 2],
    slope: [T; 2],
}

impl<T: Real> EdgeFit<T> {
    fn at(&self, s: T) -> (T, T) {
        let l = |v: [T; 2]| v[0] * (T::one() - s) + v[1] * s;
        (l(self.value), l(self.slope))
    }
}

/// Continuous piecewise-linear L² fit (in arclength) of boundary samples
/// given at the three Gauss points of every edge of the chains of one tag.
///
/// Element-wise slopes of such a fit inherit the O(h) oscillation of the
/// samples divided by h, so the derivative is taken by centred differences
/// of the nodal values instead (one-sided at the ends of open chains).
fn fit_on_chains<T: Real>(
    mesh: &Mesh2D<T>,
    geom: &BoundaryGeometry<T>,
    tag: BoundaryTag,
    sample: impl Fn(usize, usize) -> T,
) -> Result<Vec<Option<EdgeFit<T>>>> {
    let gl = gauss_legendre_3::<T>();
    let mut ends = vec![None; mesh.boundary().len()];
    for ch in chains(mesh, tag) {
        let m = ch.edges.len();
        let nn = if ch.closed { m } else { m + 1 };
        let node = |i: usize, side: usize| if ch.closed { (i + side) % m } else { i + side };
        let rows = (0..nn).map(|i| {
            let mut r = vec![i];
            if i > 0 || ch.closed { r.push((i + nn - 1) % nn) }
            if i + 1 < nn || ch.closed { r.push((i + 1) % nn) }
            r
        });
        let mut mass = SparseSpd::from_pattern(rows.collect());
        let mut rhs = vec![T::zero(); nn];
        let six = T::lit(6.0);
        for (i, &k) in ch.edges.iter().enumerate() {
            let len = geom.lengths[k];
            let (a, b) = (node(i, 0), node(i, 1));
            if a == b {
                // a closed chain of one edge cannot occur on a valid mesh
                continue;
            }
            mass.add_sym(a, a, len * T::lit(2.0) / six);
            mass.add_sym(b, b, len * T::lit(2.0) / six);
            mass.add_sym(a, b, len / six);
            for (j, &(s, w)) in gl.iter().enumerate() {
                let f = sample(k, j) * w * len;
                rhs[a] += f * (T::one() - s);
                rhs[b] += f * s;
            }
        }
        let c = SpdFactor::new(&mass, &vec![false; nn])?.solve(&rhs, |_| T::zero())?;
        // edge i joins nodes node(i, 0) and node(i, 1)
        let len = |i: usize| geom.lengths[ch.edges[i]];
        let slope = |i: usize| (c[node(i, 1)] - c[node(i, 0)]) / len(i);
        let mut d = vec![T::zero(); nn];
        for (j, dj) in d.iter_mut().enumerate() {
            // edges before and after node j
            let before = if j > 0 { Some(j - 1) } else if ch.closed { Some(m - 1) } else { None };
            let after = if j < m { Some(j) } else { None };
            *dj = match (before, after) {
                (Some(a), Some(b)) => (c[node(b, 1)] - c[node(a, 0)]) / (len(a) + len(b)),
                (Some(a), None) => slope(a),
                (None, Some(b)) => slope(b),
                (None, None) => T::zero(),
            };
        }
        for (i, &k) in ch.edges.iter().enumerate() {
            let (a, b) = (node(i, 0), node(i, 1));
            ends[k] = Some(EdgeFit { value: [c[a], c[b]], slope: [d[a], d[b]] });
        }
    }
    Ok(ends)
}

/// Reconstructed state data at one boundary quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryJet<T> {
    pub x: Vec2<T>,
    /// Smoothed outward normal and its counter-clockwise rotation.
    pub normal: Vec2<T>,
    pub tangent: Vec2<T>,
    pub curvature: T,
    pub weight: T,
    pub tag: BoundaryTag,
    pub edge: usize,
    pub s: T,
    pub triangle: usize,
    pub bary: [T; 3],
    pub u: T,
    pub grad_u: Vec2<T>,
    pub hess_u: Mat2<T>,
    pub sigma: Vec2<T>,
    /// Tangential derivative of `∂_n u` along the boundary.
    pub dn_u_ds: T,
}

impl<T: Real> BoundaryJet<T> {
    pub fn dn_u(&self) -> T {
        self.grad_u.dot(self.normal)
    }

    pub fn dt_u(&self) -> T {
        self.grad_u.dot(self.tangent)
    }
}

/// Boundary jets at the three Gauss points of every boundary edge
/// (index `3k + j`), plus the smoothed flux used for Dirichlet data.
#[derive(Clone, Debug)]
pub struct BoundaryJets<T> {
    pub geometry: BoundaryGeometry<T>,
    pub points: Vec<BoundaryJet<T>>,
    /// Chain fits of `∂_n u` on Γ_D and of `∂_τ u` on Γ_N.
    flux: Vec<Option<EdgeFit<T>>>,
    tangential: Vec<Option<EdgeFit<T>>>,
}

/// Owning triangle and barycentric coordinates of the point at parameter
/// `s` along boundary edge `k`.
fn edge_bary<T: Real>(mesh: &Mesh2D<T>, k: usize, s: T) -> (usize, [T; 3]) {
    let e = &mesh.boundary()[k];
    let mut bary = [T::zero(); 3];
    bary[e.local] = T::one() - s;
    bary[(e.local + 1) % 3] = s;
    (e.triangle, bary)
}

/// Solves `⟨∇f(t τ + m n), n⟩ = 0` for `m` by Newton's method.
fn neumann_normal_component<T: Real>(pair: &crate::integrands::ConvexPair<T>, t: T, tau: Vec2<T>, n: Vec2<T>, m0: T) -> T {
    let mut m = m0;
    for _ in 0..50 {
        let z = tau.scale(t) + n.scale(m);
        let r = pair.grad_f(z).dot(n);
        let d = pair.hess_f(z).form(n, n);
        if !(d > T::zero()) {
            break;
        }
        let step = r / d;
        m -= step;
        if step.abs() <= T::epsilon() * (T::one() + m.abs()) {
            break;
        }
    }
    m
}

impl<T: Real> BoundaryJets<T> {
    pub fn new(state: &StateSolution<T>) -> Result<Self> {
        let mesh = &state.mesh;
        let geometry = BoundaryGeometry::new(mesh);
        let gl = gauss_legendre_3::<T>();
        let locate = |k: usize, j: usize| {
            let s = gl[j].0;
            (edge_bary(mesh, k, s), s)
        };
        let flux = fit_on_chains(mesh, &geometry, BoundaryTag::Dirichlet, |k, j| {
            let ((t, b), s) = locate(k, j);
            state.recovered_gradient(t, b).dot(geometry.normal(k, s))
        })?;
        let tangential = fit_on_chains(mesh, &geometry, BoundaryTag::Neumann, |k, j| {
            let ((t, b), _) = locate(k, j);
            state.raw_gradient(t, b).dot(geometry.edge_normals[k].perp())
        })?;
        let mut jets = Self { geometry, points: Vec::new(), flux, tangential };
        let mut points = Vec::with_capacity(3 * mesh.boundary().len());
        for k in 0..mesh.boundary().len() {
            for &(s, w) in &gl {
                points.push(jets.evaluate(state, k, s, w * jets.geometry.lengths[k]));
            }
        }
        jets.points = points;
        Ok(jets)
    }

    /// Jet at parameter `s` of boundary edge `k`.
    pub fn evaluate(&self, state: &StateSolution<T>, k: usize, s: T, weight: T) -> BoundaryJet<T> {
        let mesh = &state.mesh;
        let pair = &state.pair;
        let e = &mesh.boundary()[k];
        let verts = mesh.vertices();
        let (t, bary) = edge_bary(mesh, k, s);
        let n = self.geometry.normal(k, s);
        let tau = n.perp();
        let h = self.geometry.curvature(k, s);
        let x = verts[e.a].scale(T::one() - s) + verts[e.b].scale(s);
        let (u, grad, uss, dq) = match e.tag {
            BoundaryTag::Dirichlet => {
                let (q, dq) = self.flux[k].expect("Dirichlet edge lies on a chain").at(s);
                (T::zero(), n.scale(q), None, dq)
            }
            BoundaryTag::Neumann => {
                let (dt, ddt) = self.tangential[k].expect("Neumann edge lies on a chain").at(s);
                let g0 = state.recovered_gradient(t, bary);
                let m = neumann_normal_component(pair, dt, tau, n, g0.dot(n));
                (state.value(t, bary), tau.scale(dt) + n.scale(m), Some(ddt), T::zero())
            }
        };
        let a = pair.hess_f(grad);
        let (a_tt, a_tn, a_nn) = (a.form(tau, tau), a.form(tau, n), a.form(n, n));
        let sigma = pair.grad_f(grad);
        let (u_n, u_t) = (grad.dot(n), grad.dot(tau));
        let (u_tt, u_tn) = match uss {
            // u = 0 along the curve: ∂_ττu = H ∂_n u, ∂_τn u = d(∂_n u)/ds
            None => (h * u_n, dq),
            // σ·n = 0 along the curve, differentiated tangentially
            Some(d_ut) => {
                let u_tt = d_ut + h * u_n;
                (u_tt, -(h * sigma.dot(tau) + a_tn * u_tt) / a_nn)
            }
        };
        let u_nn = (pair.dg(u) - a_tt * u_tt - T::lit(2.0) * a_tn * u_tn) / a_nn;
        let hess = tau.outer(tau).scale(u_tt) + (tau.outer(n) + n.outer(tau)).scale(u_tn) + n.outer(n).scale(u_nn);
        let dn_u_ds = match e.tag {
            BoundaryTag::Dirichlet => dq,
            BoundaryTag::Neumann => u_tn + h * u_t,
        };
        BoundaryJet {
            x,
            normal: n,
            tangent: tau,
            curvature: h,
            weight,
            tag: e.tag,
            edge: k,
            s,
            triangle: t,
            bary,
            u,
            grad_u: grad,
            hess_u: hess,
            sigma,
            dn_u_ds,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &BoundaryJet<T>> {
        self.points.iter()
    }

    /// `Σ w·f(jet)` over the points whose tag passes `filter`.
    pub fn integrate(&self, filter: crate::mesh::TagFilter, f: impl Fn(&BoundaryJet<T>) -> T) -> T {
        self.points.iter().filter(|p| filter.accepts(p.tag)).map(|p| p.weight * f(p)).sum()
    }

    /// Values `data(x, n, ∂_n u)` at every Dirichlet dof, using the fitted
    /// flux and smoothed normals (edge midpoints take `s = ½`).
    pub fn dirichlet_values(&self, mesh: &Mesh2D<T>, data: impl Fn(Vec2<T>, Vec2<T>, T) -> T) -> Vec<(usize, T)> {
        let nv = mesh.n_vertices();
        let verts = mesh.vertices();
        let half = T::lit(0.5);
        let mut out = Vec::new();
        for (k, e) in mesh.boundary().iter().enumerate() {
            let Some(EdgeFit { value: [qa, qb], .. }) = self.flux[k] else { continue };
            let [na, nb] = self.geometry.normals[k];
            out.push((e.a, data(verts[e.a], na, qa)));
            out.push((e.b, data(verts[e.b], nb, qb)));
            let nm = self.geometry.normal(k, half);
            out.push((nv + e.edge, data(mesh.p2_node(nv + e.edge), nm, half * (qa + qb))));
        }
        out.sort_by_key(|p| p.0);
        out.dedup_by_key(|p| p.0);
        out
    }
}
