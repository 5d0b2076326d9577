//! Sparse symmetric linear algebra shared by the curve and restoration solvers.
//!
//! Matrices are assembled from triplets into compressed sparse rows. Symmetric
//! positive definite systems are solved either by an envelope (skyline)
//! Cholesky factorization under a reverse Cuthill-McKee ordering, or by a
//! Jacobi-preconditioned conjugate gradient iteration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    Dimension { rows: usize, cols: usize, len: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("zero or negative pivot {pivot:e} at row {row} (diagonal {diagonal:e}); matrix is singular or indefinite")]
    ZeroPivot { row: usize, pivot: f64, diagonal: f64 },
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Solution method for [`solve_spd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    #[default]
    Direct,
    Cg,
}

impl std::str::FromStr for SolveMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(SolveMethod::Direct),
            "cg" => Ok(SolveMethod::Cg),
            other => Err(format!("unknown solver method `{other}` (expected direct|cg)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual target `|Ax-b| / |b|`.
    pub tol: f64,
    /// Pivots below `pivot_tol * diag` abort the factorization.
    pub pivot_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, tol: 1e-10, pivot_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Triplet buffer used during assembly. Duplicate entries are summed on
/// [`TripletMatrix::finalize`].
#[derive(Debug, Clone, Default)]
pub struct TripletMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols, "triplet ({row},{col}) out of range");
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts, merges duplicates and compresses into CSR.
    pub fn finalize(mut self, symmetric: bool) -> CsrMatrix {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values, symmetric }
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        let mut t = TripletMatrix::with_capacity(n, n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.finalize(true)
    }

    pub fn from_dense(rows: &[Vec<f64>], symmetric: bool) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut t = TripletMatrix::new(n, m);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.finalize(symmetric)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let bn = norm(b);
    if bn == 0.0 {
        norm(&r)
    } else {
        norm(&r) / bn
    }
}

fn check_system(a: &CsrMatrix, b: &[f64]) -> Result<(), LinalgError> {
    if a.nrows != a.ncols {
        return Err(LinalgError::NotSquare { rows: a.nrows, cols: a.ncols });
    }
    if b.len() != a.nrows {
        return Err(LinalgError::Dimension { rows: a.nrows, cols: a.ncols, len: b.len() });
    }
    Ok(())
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    check_system(a, b)?;
    if b.iter().all(|&v| v == 0.0) {
        let stats = SolveStats { method: opts.method, iterations: 0, relative_residual: 0.0 };
        return Ok((vec![0.0; b.len()], stats));
    }
    match opts.method {
        SolveMethod::Direct => {
            let factor = EnvelopeCholesky::factor(a, opts.pivot_tol)?;
            let x = factor.solve(b);
            let res = relative_residual(a, &x, b);
            Ok((x, SolveStats { method: SolveMethod::Direct, iterations: 0, relative_residual: res }))
        }
        SolveMethod::Cg => {
            let max_iter = 10 * a.nrows.max(1);
            let (x, iterations) = conjugate_gradient(a, b, opts.tol, max_iter)?;
            let res = relative_residual(a, &x, b);
            Ok((x, SolveStats { method: SolveMethod::Cg, iterations, relative_residual: res }))
        }
    }
}

/// Jacobi-preconditioned conjugate gradient. Returns the iterate and the
/// iteration count.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), LinalgError> {
    check_system(a, b)?;
    let n = b.len();
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, 0));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::NotConverged { iterations: it, residual: norm(&r) / bn });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) / bn <= tol {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NotConverged { iterations: max_iter, residual: norm(&r) / bn })
}

/// Reverse Cuthill-McKee ordering of the symmetric sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows;
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    // Component by component, starting from a pseudo-peripheral node.
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(current, adj);
        let depth = level.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
        if depth <= ecc && current != seed {
            break;
        }
        ecc = depth;
        let candidate =
            (0..adj.len()).filter(|&v| level[v] == depth).min_by_key(|&v| (degree[v], v)).unwrap_or(current);
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

/// Cholesky factor `L L^T = P A P^T` stored row-wise over the lower envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// First stored column of each (permuted) row.
    first: Vec<usize>,
    /// Offset of each row's first entry in `values`.
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix, pivot_tol: f64) -> Result<Self, LinalgError> {
        if a.nrows != a.ncols {
            return Err(LinalgError::NotSquare { rows: a.nrows, cols: a.ncols });
        }
        let n = a.nrows;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, _) in a.row(old_i) {
                let j = inv[old_j];
                let (r, c) = if j <= i { (i, j) } else { (j, i) };
                first[r] = first[r].min(c);
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; offset[n]];
        let mut diag = vec![0.0; n];
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j <= i {
                    values[offset[i] + (j - first[i])] = v;
                }
                if j == i {
                    diag[i] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[offset[i] + (j - fi)];
                let row_i = &values[offset[i] + (k0 - fi)..offset[i] + (j - fi)];
                let row_j = &values[offset[j] + (k0 - fj)..offset[j] + (j - fj)];
                s -= dot(row_i, row_j);
                let ljj = values[offset[j] + (j - fj)];
                values[offset[i] + (j - fi)] = s / ljj;
            }
            let row_i = &values[offset[i]..offset[i] + (i - fi)];
            let pivot = values[offset[i] + (i - fi)] - dot(row_i, row_i);
            let scale = diag[i].abs().max(f64::MIN_POSITIVE);
            if !(pivot > pivot_tol * scale) {
                return Err(LinalgError::ZeroPivot { row: perm[i], pivot, diagonal: diag[i] });
            }
            values[offset[i] + (i - fi)] = pivot.sqrt();
        }
        Ok(Self { n, perm, first, offset, values })
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // forward: L y = Pb
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i] + (i - fi)];
            let s = y[i] - dot(row, &y[fi..i]);
            y[i] = s / self.values[self.offset[i] + (i - fi)];
        }
        // backward: L^T x = y, column-oriented over the row storage
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i] / self.values[self.offset[i] + (i - fi)];
            y[i] = xi;
            let row = &self.values[self.offset[i]..self.offset[i] + (i - fi)];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_plus_identity(n: usize) -> CsrMatrix {
        let mut t = TripletMatrix::new(n, n);
        for i in 0..n {
            t.push(i, i, 3.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        t.finalize(true)
    }

    /// Gaussian elimination with partial pivoting, independent of the sparse path.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut rhs = b.to_vec();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            rhs.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (rhs[r] - s) / m[r][r];
        }
        x
    }

    #[test]
    fn finalize_sums_duplicates_and_sorts() {
        let mut t = TripletMatrix::new(2, 2);
        t.push(1, 1, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 1, 4.0);
        t.push(0, 0, 1.0);
        let a = t.finalize(false);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 1), 5.0);
        let cols: Vec<usize> = a.row(0).map(|(j, _)| j).collect();
        assert_eq!(cols, vec![0, 1]);
    }

    #[test]
    fn scaled_identity() {
        let mut t = TripletMatrix::new(3, 3);
        for i in 0..3 {
            t.push(i, i, 2.0);
        }
        let a = t.finalize(true);
        for method in [SolveMethod::Direct, SolveMethod::Cg] {
            let opts = SolveOptions { method, ..Default::default() };
            let (x, _) = solve_spd(&a, &[2.0, 4.0, 6.0], &opts).unwrap();
            for (xi, e) in x.iter().zip([1.0, 2.0, 3.0]) {
                assert_relative_eq!(*xi, e, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn laplacian_matches_dense() {
        let a = laplacian_plus_identity(5);
        let b = vec![1.0; 5];
        let expected = dense_solve(&a.to_dense(), &b);
        let (x, stats) = solve_spd(&a, &b, &SolveOptions::default()).unwrap();
        assert!(stats.relative_residual < 1e-14);
        for (xi, e) in x.iter().zip(&expected) {
            assert!((xi - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_exact_zero() {
        let a = laplacian_plus_identity(4);
        for method in [SolveMethod::Direct, SolveMethod::Cg] {
            let opts = SolveOptions { method, ..Default::default() };
            let (x, _) = solve_spd(&a, &[0.0; 4], &opts).unwrap();
            assert!(x.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn singular_matrix_reports_zero_pivot() {
        // Path-graph Laplacian annihilates constants.
        let mut t = TripletMatrix::new(4, 4);
        for i in 0..3 {
            t.push(i, i, 1.0);
            t.push(i + 1, i + 1, 1.0);
            t.push(i, i + 1, -1.0);
            t.push(i + 1, i, -1.0);
        }
        let a = t.finalize(true);
        let err = solve_spd(&a, &[1.0, 0.0, 0.0, -1.0], &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, LinalgError::ZeroPivot { .. }), "{err:?}");
    }

    #[test]
    fn periodic_band_is_ordered_compactly() {
        // Cyclic coupling: natural ordering has a full-width envelope.
        let n = 200;
        let mut t = TripletMatrix::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0);
            let j = (i + 1) % n;
            t.push(i, j, -1.0);
            t.push(j, i, -1.0);
        }
        let a = t.finalize(true);
        let f = EnvelopeCholesky::factor(&a, 1e-12).unwrap();
        assert!(f.envelope_size() < 6 * n, "envelope {}", f.envelope_size());
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        assert!(relative_residual(&a, &x, &b) < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_spd(n: usize, seed: u64) -> CsrMatrix {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = TripletMatrix::new(n, n);
            let mut rowsum = vec![0.0; n];
            for i in 0..n {
                for _ in 0..3 {
                    let j = rng.random_range(0..n);
                    if j == i {
                        continue;
                    }
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push(i, j, v);
                    t.push(j, i, v);
                    rowsum[i] += v.abs();
                    rowsum[j] += v.abs();
                }
            }
            for (i, s) in rowsum.iter().enumerate() {
                t.push(i, i, s + rng.random_range(0.01..1.0));
            }
            t.finalize(true)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn direct_and_cg_agree(n in 2usize..2000, seed in any::<u64>()) {
                let a = random_spd(n, seed);
                let b: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
                let (xd, sd) = solve_spd(&a, &b, &SolveOptions::default()).unwrap();
                let cg = SolveOptions { method: SolveMethod::Cg, tol: 1e-12, ..Default::default() };
                let (xc, _) = solve_spd(&a, &b, &cg).unwrap();
                prop_assert!(sd.relative_residual <= 1e-10);
                let scale = norm(&xd).max(1e-300);
                let diff: Vec<f64> = xd.iter().zip(&xc).map(|(p, q)| p - q).collect();
                prop_assert!(norm(&diff) / scale <= 1e-8);
                prop_assert!(a.symmetry_defect() <= 1e-12 * a.max_abs());
            }
        }
    }
}
