//! Symmetric sparse matrices and a direct Cholesky solver with
//! nested-dissection ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mesh::Mesh2D;
use crate::scalar::Real;

/// Symmetric matrix in compressed-row form; both triangles are stored and
/// every update is mirrored so symmetry is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSpd<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseSpd<T> {
    /// Zero matrix with the given (symmetric) row patterns.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![T::zero(); col_idx.len()];
        Self { n, row_ptr, col_idx, values }
    }

    /// Coupling pattern of the quadratic Lagrange space.
    pub fn p2_pattern(mesh: &Mesh2D<T>) -> Self {
        let mut rows = vec![Vec::new(); mesh.n_p2_nodes()];
        for t in 0..mesh.n_triangles() {
            let nodes = mesh.p2_element(t);
            for &a in &nodes {
                rows[a].extend_from_slice(&nodes);
            }
        }
        Self::from_pattern(rows)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern((0..n).map(|i| vec![i]).collect());
        m.values.iter_mut().for_each(|v| *v = T::one());
        m
    }

    pub fn from_dense(a: &[Vec<T>]) -> Self {
        let rows = a.iter().map(|r| (0..r.len()).filter(|&j| r[j] != T::zero()).collect()).collect();
        let mut m = Self::from_pattern(rows);
        for i in 0..m.n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = a[i][m.col_idx[k]];
            }
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |k| self.values[k])
    }

    /// Adds `v` to entries (i, j) and (j, i).
    ///
    /// Panics if the entry is outside the pattern.
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: T) {
        let k = self.slot(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
        if i != j {
            let k = self.slot(j, i).expect("entry outside sparsity pattern");
            self.values[k] += v;
        }
    }

    /// Adds a symmetric element matrix, reading only its upper triangle.
    pub fn add_local<const N: usize>(&mut self, nodes: &[usize; N], local: &[[T; N]; N]) {
        for a in 0..N {
            for b in a..N {
                self.add_sym(nodes[a], nodes[b], local[a][b]);
            }
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// ⟨Mx, x⟩.
    pub fn quad_form(&self, x: &[T]) -> T {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<T>()).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self + s·other`; both must share the pattern.
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        assert_eq!(self.col_idx, other.col_idx, "patterns differ");
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += s * *b;
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}

/// Fill-reducing order (new → old) of the graph restricted to `active`
/// nodes, by recursive bisection along breadth-first level sets.
fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    const LEAF: usize = 48;
    let n = adj.len();
    let mut order = vec![usize::MAX; n];
    let mut tag = vec![0usize; n];
    let mut level = vec![usize::MAX; n];
    let mut next_tag = 1;
    let mut stack: Vec<(Vec<usize>, usize, usize)> = Vec::new();
    if n > 0 {
        tag.iter_mut().for_each(|t| *t = 1);
        next_tag = 2;
        stack.push(((0..n).collect(), n, 1));
    }

    let bfs = |root: usize, id: usize, tag: &[usize], level: &mut [usize], seen: &mut Vec<usize>| {
        seen.clear();
        let mut q = VecDeque::new();
        level[root] = 0;
        q.push_back(root);
        while let Some(v) = q.pop_front() {
            seen.push(v);
            for &w in &adj[v] {
                if tag[w] == id && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
    };

    let mut seen = Vec::new();
    while let Some((nodes, end, id)) = stack.pop() {
        let start = end - nodes.len();
        if nodes.len() <= LEAF {
            for (k, &v) in nodes.iter().enumerate() {
                order[start + k] = v;
            }
            continue;
        }
        // connected component of the first node
        bfs(nodes[0], id, &tag, &mut level, &mut seen);
        if seen.len() < nodes.len() {
            let comp: Vec<usize> = seen.clone();
            for &v in &nodes {
                level[v] = usize::MAX;
            }
            let in_comp: std::collections::HashSet<usize> = comp.iter().copied().collect();
            let rest: Vec<usize> = nodes.iter().copied().filter(|v| !in_comp.contains(v)).collect();
            let (ta, tb) = (next_tag, next_tag + 1);
            next_tag += 2;
            comp.iter().for_each(|&v| tag[v] = ta);
            rest.iter().for_each(|&v| tag[v] = tb);
            let split = start + comp.len();
            stack.push((comp, split, ta));
            stack.push((rest, end, tb));
            continue;
        }
        // pseudo-peripheral root: repeat sweeps from the farthest node
        let mut depth = seen.iter().map(|&v| level[v]).max().unwrap();
        for _ in 0..4 {
            let far = *seen.iter().max_by_key(|&&v| (level[v], std::cmp::Reverse(v))).unwrap();
            for &v in &nodes {
                level[v] = usize::MAX;
            }
            bfs(far, id, &tag, &mut level, &mut seen);
            let d = seen.iter().map(|&v| level[v]).max().unwrap();
            if d <= depth {
                break;
            }
            depth = d;
        }
        let nlev = seen.iter().map(|&v| level[v]).max().unwrap() + 1;
        if nlev < 3 {
            for &v in &nodes {
                level[v] = usize::MAX;
            }
            for (k, &v) in nodes.iter().enumerate() {
                order[start + k] = v;
            }
            continue;
        }
        let mut counts = vec![0usize; nlev];
        for &v in &seen {
            counts[level[v]] += 1;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (l, &c) in counts.iter().enumerate() {
            acc += c;
            if acc >= half {
                mid = l.clamp(1, nlev - 2);
                break;
            }
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut s = Vec::new();
        // iterate `nodes` (not BFS order) so the result is independent of hashing
        for &v in &nodes {
            match level[v].cmp(&mid) {
                std::cmp::Ordering::Less => a.push(v),
                std::cmp::Ordering::Greater => b.push(v),
                std::cmp::Ordering::Equal => s.push(v),
            }
            level[v] = usize::MAX;
        }
        for (k, &v) in s.iter().enumerate() {
            order[end - s.len() + k] = v;
        }
        let (ta, tb) = (next_tag, next_tag + 1);
        next_tag += 2;
        a.iter().for_each(|&v| tag[v] = ta);
        b.iter().for_each(|&v| tag[v] = tb);
        s.iter().for_each(|&v| tag[v] = 0);
        let split = start + a.len();
        let b_end = split + b.len();
        stack.push((a, split, ta));
        stack.push((b, b_end, tb));
    }
    debug_assert!(order.iter().all(|&v| v != usize::MAX));
    order
}

/// Cholesky factor L Lᵀ = P M_ff Pᵀ of the free block of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SpdFactor<T> {
    matrix: SparseSpd<T>,
    fixed: Vec<bool>,
    /// free local index → global dof
    free: Vec<usize>,
    /// global dof → free local index
    local: Vec<usize>,
    /// factor position → free local index
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
}

impl<T: Real> SpdFactor<T> {
    /// Factors the block of `m` on dofs with `fixed[i] == false`.
    pub fn new(m: &SparseSpd<T>, fixed: &[bool]) -> Result<Self> {
        assert_eq!(fixed.len(), m.n);
        if !m.is_finite() {
            return Err(Error::SolverBreakdown("non-finite matrix entries".into()));
        }
        let free: Vec<usize> = (0..m.n).filter(|&i| !fixed[i]).collect();
        let mut local = vec![usize::MAX; m.n];
        for (k, &g) in free.iter().enumerate() {
            local[g] = k;
        }
        let nf = free.len();
        let adj: Vec<Vec<usize>> = free
            .iter()
            .map(|&g| m.row(g).filter(|&(j, _)| j != g && !fixed[j]).map(|(j, _)| local[j]).collect())
            .collect();
        let perm = nested_dissection(&adj);
        let mut inv = vec![0; nf];
        for (k, &v) in perm.iter().enumerate() {
            inv[v] = k;
        }
        // upper-triangular columns of C = P A Pᵀ: column k holds rows i ≤ k
        let mut cp = Vec::with_capacity(nf + 1);
        let mut ci = Vec::new();
        let mut cx = Vec::new();
        cp.push(0);
        for k in 0..nf {
            let g = free[perm[k]];
            let mut col: Vec<(usize, T)> = m
                .row(g)
                .filter(|&(j, _)| !fixed[j])
                .map(|(j, v)| (inv[local[j]], v))
                .filter(|&(i, _)| i <= k)
                .collect();
            col.sort_unstable_by_key(|e| e.0);
            for (i, v) in col {
                ci.push(i);
                cx.push(v);
            }
            cp.push(ci.len());
        }
        // elimination tree
        let mut parent = vec![usize::MAX; nf];
        let mut ancestor = vec![usize::MAX; nf];
        for k in 0..nf {
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                while i != usize::MAX && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == usize::MAX {
                        parent[i] = k;
                        break;
                    }
                    i = next;
                }
            }
        }
        let mut mark = vec![usize::MAX; nf];
        let mut stack = Vec::with_capacity(nf);
        let mut path = Vec::with_capacity(nf);
        // row pattern of L(k, :) is the union of etree paths from the entries of C(:, k)
        let mut ereach = |k: usize, stack: &mut Vec<usize>, mark: &mut Vec<usize>| {
            stack.clear();
            mark[k] = k;
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                path.clear();
                while i < k && mark[i] != k {
                    path.push(i);
                    mark[i] = k;
                    i = parent[i];
                }
                stack.extend(path.iter().rev());
            }
        };
        let mut counts = vec![1usize; nf];
        for k in 0..nf {
            ereach(k, &mut stack, &mut mark);
            for &i in stack.iter() {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0; nf + 1];
        for k in 0..nf {
            lp[k + 1] = lp[k] + counts[k];
        }
        let mut li = vec![0; lp[nf]];
        let mut lx = vec![T::zero(); lp[nf]];
        let mut next = lp[..nf].to_vec();
        let mut x = vec![T::zero(); nf];
        mark.iter_mut().for_each(|v| *v = usize::MAX);
        for k in 0..nf {
            ereach(k, &mut stack, &mut mark);
            // etree ancestors carry larger indices, so ascending is a topological order
            stack.sort_unstable();
            for p in cp[k]..cp[k + 1] {
                x[ci[p]] = cx[p];
            }
            let mut d = x[k];
            x[k] = T::zero();
            for &i in stack.iter() {
                let lki = x[i] / lx[lp[i]];
                x[i] = T::zero();
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::SolverBreakdown(format!("matrix not positive definite (pivot {k} = {d})")));
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(Self { matrix: m.clone(), fixed: fixed.to_vec(), free, local, perm, lp, li, lx })
    }

    pub fn matrix(&self) -> &SparseSpd<T> {
        &self.matrix
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn factor_nnz(&self) -> usize {
        self.li.len()
    }

    /// In-place solve of the factored free block, in factor ordering.
    fn solve_permuted(&self, b: &mut [T]) {
        let n = b.len();
        for j in 0..n {
            b[j] /= self.lx[self.lp[j]];
            let bj = b[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                b[self.li[p]] -= self.lx[p] * bj;
            }
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                s -= self.lx[p] * b[self.li[p]];
            }
            b[j] = s / self.lx[self.lp[j]];
        }
    }

    /// Solves the free block for a right-hand side indexed by free dofs.
    fn solve_free(&self, rhs: &[T]) -> Vec<T> {
        let mut b: Vec<T> = self.perm.iter().map(|&v| rhs[v]).collect();
        self.solve_permuted(&mut b);
        let mut out = vec![T::zero(); rhs.len()];
        for (k, &v) in self.perm.iter().enumerate() {
            out[v] = b[k];
        }
        out
    }

    fn free_residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        self.free
            .iter()
            .enumerate()
            .map(|(k, &g)| {
                let ax: T = self.matrix.row(g).filter(|&(j, _)| !self.fixed[j]).map(|(j, v)| v * x[self.local[j]]).sum();
                b[k] - ax
            })
            .collect()
    }

    /// Solves `M x = rhs` on the free dofs with `x[i] = pinned(i)` on fixed
    /// dofs. One step of iterative refinement is applied and the relative
    /// residual is checked against the scalar's solve tolerance.
    pub fn solve(&self, rhs: &[T], pinned: impl Fn(usize) -> T) -> Result<Vec<T>> {
        let n = self.matrix.n;
        assert_eq!(rhs.len(), n);
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            if self.fixed[i] {
                x[i] = pinned(i);
            }
        }
        let b: Vec<T> = self
            .free
            .iter()
            .map(|&g| rhs[g] - self.matrix.row(g).filter(|&(j, _)| self.fixed[j]).map(|(j, v)| v * x[j]).sum::<T>())
            .collect();
        let mut xf = self.solve_free(&b);
        let r = self.free_residual(&xf, &b);
        let dx = self.solve_free(&r);
        for (a, d) in xf.iter_mut().zip(&dx) {
            *a += *d;
        }
        let r = self.free_residual(&xf, &b);
        let norm = |v: &[T]| v.iter().map(|a| *a * *a).sum::<T>().sqrt();
        let (rn, bn) = (norm(&r), norm(&b));
        if !rn.is_finite() || rn > T::solve_tol() * bn {
            return Err(Error::SolverBreakdown(format!(
                "relative residual {} exceeds tolerance",
                (rn / bn).to_f64_lossy()
            )));
        }
        for (k, &g) in self.free.iter().enumerate() {
            x[g] = xf[k];
        }
        Ok(x)
    }
}

/// Solves `M x = rhs` with the listed dofs pinned to the given values.
pub fn solve_spd<T: Real>(m: &SparseSpd<T>, rhs: &[T], constraints: &[(usize, T)]) -> Result<Vec<T>> {
    let mut fixed = vec![false; m.n];
    let mut value = vec![T::zero(); m.n];
    for &(i, v) in constraints {
        fixed[i] = true;
        value[i] = v;
    }
    SpdFactor::new(m, &fixed)?.solve(rhs, |i| value[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplace_1d(n: usize) -> SparseSpd<f64> {
        let rows = (0..n).map(|i| (i.saturating_sub(1)..(i + 2).min(n)).collect()).collect();
        let mut m = SparseSpd::from_pattern(rows);
        for i in 0..n - 1 {
            m.add_sym(i, i, 1.0);
            m.add_sym(i + 1, i + 1, 1.0);
            m.add_sym(i, i + 1, -1.0);
        }
        m
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = SparseSpd::<f64>::identity(7);
        let x = solve_spd(&m, &[0.0; 7], &[]).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn harmonic_interpolation_on_strip() {
        let n = 40;
        let m = laplace_1d(n);
        let x = solve_spd(&m, &vec![0.0; n], &[(0, 0.0), (n - 1, 1.0)]).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((*v - i as f64 / (n - 1) as f64).abs() < 1e-12);
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn random_spd_residual() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let n = 50;
        let mut g = StdRng::seed_from_u64(7);
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| g.random::<f64>() - 0.5).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let m = SparseSpd::from_dense(&a);
        let rhs: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
        let x = solve_spd(&m, &rhs, &[]).unwrap();
        let r: f64 = m.matvec(&x).iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-10 * bn);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = SparseSpd::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert_eq!(solve_spd(&m, &[1.0, 0.0], &[]).unwrap_err().code(), "SOLVER_BREAKDOWN");
    }

    #[test]
    fn mesh_laplacian_matches_dense_solve() {
        use crate::fem::{assemble_bilinear, DofMap};
        use crate::integrands::QuadraticFormSpec;
        use crate::linalg::Mat2;
        let mesh = crate::mesh::generate_disk::<f64>(1.0, 0.2, 1.0).unwrap();
        let m = assemble_bilinear(&mesh, &QuadraticFormSpec::constant(Mat2::identity(), 0.3)).unwrap();
        let n = m.n();
        let rhs: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let dofs = DofMap::new(&mesh);
        let cons: Vec<(usize, f64)> = dofs.dirichlet_dofs.iter().map(|&i| (i, 0.1 * i as f64)).collect();
        let x = solve_spd(&m, &rhs, &cons).unwrap();
        let fixed: Vec<bool> = (0..n).map(|i| dofs.is_dirichlet(i)).collect();
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let d = m.to_dense();
        let a = nalgebra::DMatrix::from_fn(free.len(), free.len(), |i, j| d[free[i]][free[j]]);
        let b = nalgebra::DVector::from_fn(free.len(), |i, _| {
            rhs[free[i]] - cons.iter().map(|&(c, v)| d[free[i]][c] * v).sum::<f64>()
        });
        let y = a.cholesky().unwrap().solve(&b);
        for (k, &g) in free.iter().enumerate() {
            assert!((x[g] - y[k]).abs() < 1e-10 * (1.0 + y[k].abs()));
        }
        for &(c, v) in &cons {
            assert_eq!(x[c], v);
        }
    }

    #[test]
    fn deterministic_bits() {
        let mesh = crate::mesh::generate_disk::<f64>(1.0, 0.25, 0.5).unwrap();
        let run = || {
            let m = crate::fem::assemble_bilinear(&mesh, &crate::integrands::QuadraticFormSpec::constant(crate::linalg::Mat2::identity(), 1.0)).unwrap();
            let rhs: Vec<f64> = (0..m.n()).map(|i| (i as f64).sin()).collect();
            solve_spd(&m, &rhs, &[]).unwrap()
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    proptest! {
        #[test]
        fn tridiagonal_spd_solves(diag in proptest::collection::vec(2.5f64..5.0, 3..40), off in -1.0f64..1.0) {
            let n = diag.len();
            let rows = (0..n).map(|i| (i.saturating_sub(1)..(i + 2).min(n)).collect()).collect();
            let mut m = SparseSpd::from_pattern(rows);
            for i in 0..n {
                m.add_sym(i, i, diag[i]);
                if i + 1 < n { m.add_sym(i, i + 1, off); }
            }
            let rhs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            let x = solve_spd(&m, &rhs, &[]).unwrap();
            let ax = m.matvec(&x);
            for i in 0..n { prop_assert!((ax[i] - rhs[i]).abs() < 1e-10 * 40.0 * n as f64); }
        }
    }
}
