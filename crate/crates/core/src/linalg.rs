//! Sparse symmetric storage, the mean-zero projected conjugate-gradient
//! solver, and small dense oracles.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest system handled by the dense oracles.
pub const DENSE_MAX: usize = 2000;
/// Default relative tolerance for [`solve_mean_zero`].
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const PAR_ROWS: usize = 4096;

/// Symmetric matrix in compressed-row form with the full pattern stored.
/// Column indices are sorted within each row; explicit zeros are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from upper-triangle triplets `(i, j, v)` with `i ≤ j`.
    ///
    /// Duplicates are summed in insertion order, and the lower triangle is
    /// mirrored from the summed upper entries, so the result is bitwise
    /// symmetric.
    pub fn from_upper_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i > j || j >= n {
                return Err(Error::InvalidInput(format!("triplet ({i}, {j}) outside the upper triangle of {n}x{n}")));
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() / 2);
        for (i, j, v) in triplets {
            match upper.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => upper.push((i, j, v)),
            }
        }
        let mut counts = vec![0usize; n];
        for &(i, j, _) in &upper {
            counts[i] += 1;
            if i != j {
                counts[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        // lower entries (j, i) for i < j arrive in increasing i per row j,
        // ahead of that row's own upper entries, so rows stay sorted
        for &(i, j, v) in &upper {
            if i != j {
                let p = fill[j];
                col_idx[p] = i;
                values[p] = v;
                fill[j] += 1;
            }
        }
        let mut rows_upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in &upper {
            rows_upper[i].push((j, v));
        }
        for (i, row) in rows_upper.into_iter().enumerate() {
            for (j, v) in row {
                let p = fill[i];
                col_idx[p] = j;
                values[p] = v;
                fill[i] += 1;
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: a.ncols() });
        }
        let mut t = Vec::new();
        for i in 0..n {
            for j in i..n {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_upper_triplets(n, t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// `self + s·other` on an identical pattern.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        if !self.same_pattern(other) {
            return Err(Error::InvalidInput("sparsity patterns differ".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += s * w;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij − A_ji|` over the stored pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[(i, j)] = v;
            }
        }
        a
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.values[p] * x[self.col_idx[p]];
        }
        s
    }

    /// `y = A x` into a caller buffer; each row sums in column order.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: x.len() });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: y.len() });
        }
        if self.n >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }
}

pub fn matvec(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.matvec(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean projection onto `{v : cᵀv = 0}`.
#[derive(Clone, Debug)]
pub struct MeanProjector<'a> {
    c: &'a [f64],
    cc: f64,
}

impl<'a> MeanProjector<'a> {
    pub fn new(c: &'a [f64]) -> Result<Self> {
        let cc = dot(c, c);
        if !(cc > 0.0) {
            return Err(Error::InvalidInput("constraint vector is zero".into()));
        }
        Ok(Self { c, cc })
    }

    pub fn apply(&self, v: &mut [f64]) {
        let s = dot(self.c, v) / self.cc;
        for (vi, ci) in v.iter_mut().zip(self.c) {
            *vi -= s * ci;
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        self.apply(&mut w);
        w
    }
}

/// Outcome of [`solve_mean_zero`].
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖Π(Ax − b)‖ / ‖Πb‖`, recomputed from `x`.
    pub residual: f64,
    /// Relative size of the rounding error in evaluating `Ax − b`,
    /// `ε‖|A||x| + |b|‖ / ‖Πb‖`; residuals below a small multiple of this
    /// cannot be certified in double precision.
    pub roundoff_floor: f64,
    /// Recursively updated relative residual after each iteration.
    pub history: Vec<f64>,
    /// Energy `½xᵀAx − bᵀx` after each iteration.
    pub energy: Vec<f64>,
}

/// Multiple of [`SolveResult::roundoff_floor`] accepted as converged when
/// `rel_tol` lies below what double precision can resolve.
pub const ROUNDOFF_FACTOR: f64 = 8.0;

/// `(Π(b − Ax), ε‖|A||x| + |b|‖)`
fn true_residual(a: &CsrMatrix, proj: &MeanProjector, x: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut r = a.matvec(x)?;
    let mut mag = 0.0;
    for i in 0..r.len() {
        let row_abs: f64 = a.row(i).map(|(j, v)| (v * x[j]).abs()).sum::<f64>() + b[i].abs();
        mag += row_abs * row_abs;
        r[i] = b[i] - r[i];
    }
    proj.apply(&mut r);
    Ok((r, f64::EPSILON * mag.sqrt()))
}

/// Preconditioner for [`solve_mean_zero_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Preconditioner {
    /// Diagonal scaling.
    #[default]
    Jacobi,
    /// Sparse Cholesky factor of `A` with the first row and column removed.
    /// Requires `A` positive semidefinite with the constants as its only
    /// null direction, which holds for assembled systems.
    PinnedCholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_iter: 50_000,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

fn pinned_matrix(a: &CsrMatrix, pin: usize) -> Result<faer::sparse::SparseColMat<usize, f64>> {
    use faer::sparse::{SparseColMat, Triplet};
    let n = a.n();
    if n < 2 {
        return Err(Error::InvalidInput("pinned factorization needs at least two unknowns".into()));
    }
    let squeeze = |i: usize| if i > pin { i - 1 } else { i };
    let mut t = Vec::with_capacity(a.nnz());
    for i in (0..n).filter(|&i| i != pin) {
        for (j, v) in a.row(i) {
            if j != pin {
                t.push(Triplet::new(squeeze(i), squeeze(j), v));
            }
        }
    }
    SparseColMat::<usize, f64>::try_new_from_triplets(n - 1, n - 1, &t)
        .map_err(|e| Error::InvalidInput(format!("sparse matrix: {e:?}")))
}

fn pin_index(c: &[f64]) -> usize {
    c.iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
        .0
}

/// Whether `A` is positive definite on `{x : cᵀx = 0}`, for symmetric `A`
/// with `A·1 = 0` and `cᵀ1 ≠ 0`. Any indefinite direction can be shifted by
/// a multiple of `1` to vanish at the pin, so this is equivalent to the
/// Cholesky factorization of `A` without the pinned row and column existing.
pub fn positive_on_complement(a: &CsrMatrix, c: &[f64]) -> Result<bool> {
    if c.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), actual: c.len() });
    }
    Ok(pinned_matrix(a, pin_index(c))?.sp_cholesky(faer::Side::Lower).is_ok())
}

struct PinnedCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    pin: usize,
}

impl PinnedCholesky {
    /// Factor `A` without row and column `pin`. The pinned unknown should
    /// carry a large constraint weight `c_pin`; otherwise the preconditioner
    /// nearly loses the direction `e_pin` inside `c^⊥`.
    fn new(a: &CsrMatrix, pin: usize) -> Result<Self> {
        let llt = pinned_matrix(a, pin)?
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::InvalidInput(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self { llt, pin })
    }

    fn apply(&self, r: &[f64], z: &mut Vec<f64>) {
        use faer::linalg::solvers::Solve;
        let pin = self.pin;
        let rhs = faer::Mat::<f64>::from_fn(r.len() - 1, 1, |i, _| r[if i >= pin { i + 1 } else { i }]);
        let y = self.llt.solve(&rhs);
        z.clear();
        z.extend((0..r.len()).map(|i| match i.cmp(&pin) {
            std::cmp::Ordering::Less => y[(i, 0)],
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => y[(i - 1, 0)],
        }));
    }
}

/// Jacobi-preconditioned conjugate gradients on `{x : cᵀx = 0}`.
///
/// Solves `Π A x = Π b` with `Π v = v − (cᵀv / cᵀc) c`, starting from zero.
/// Convergence is confirmed on the recomputed residual; if that disagrees
/// with the recursive one the iteration restarts from the current iterate.
/// The target is `max(rel_tol, ROUNDOFF_FACTOR · roundoff_floor)`.
pub fn solve_mean_zero(a: &CsrMatrix, c: &[f64], b: &[f64], rel_tol: f64, max_iter: usize) -> Result<SolveResult> {
    solve_mean_zero_with(
        a,
        c,
        b,
        &SolverOptions {
            rel_tol,
            max_iter,
            preconditioner: Preconditioner::Jacobi,
        },
    )
}

/// [`solve_mean_zero`] with a choice of preconditioner.
pub fn solve_mean_zero_with(a: &CsrMatrix, c: &[f64], b: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    let (rel_tol, max_iter) = (opts.rel_tol, opts.max_iter);
    let n = a.n();
    for len in [c.len(), b.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }
    let proj = MeanProjector::new(c)?;
    let pb = proj.project(b);
    let b_norm = norm(&pb);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(SolveResult {
            x,
            iterations: 0,
            residual: 0.0,
            roundoff_floor: 0.0,
            history: Vec::new(),
            energy: Vec::new(),
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let cholesky = match opts.preconditioner {
        Preconditioner::Jacobi => None,
        Preconditioner::PinnedCholesky => {
            Some(PinnedCholesky::new(a, pin_index(c))?)
        }
    };
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        match &cholesky {
            Some(f) => f.apply(r, z),
            None => {
                z.clear();
                z.extend(r.iter().zip(&inv_diag).map(|(ri, di)| ri * di));
            }
        }
        proj.apply(z);
    };

    let mut r = pb.clone();
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut energy = Vec::new();
    let mut current_energy = 0.0;
    let mut rel = 1.0;
    let mut last_check = f64::INFINITY;

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut q)?;
        proj.apply(&mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: rel,
                history_tail: tail(&history),
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        current_energy -= 0.5 * alpha * rz;
        energy.push(current_energy);
        rel = norm(&r) / b_norm;
        history.push(rel);
        // confirm against the recomputed residual, at most once per halving
        if rel <= rel_tol || rel <= 0.5 * last_check {
            let (r_true, floor) = true_residual(a, &proj, &x, b)?;
            let true_rel = norm(&r_true) / b_norm;
            let floor = floor / b_norm;
            if true_rel <= rel_tol.max(ROUNDOFF_FACTOR * floor) {
                proj.apply(&mut x);
                return Ok(SolveResult {
                    x,
                    iterations: it,
                    residual: true_rel,
                    roundoff_floor: floor,
                    history,
                    energy,
                });
            }
            last_check = rel;
            if rel <= rel_tol || true_rel > 2.0 * rel {
                // recursive residual has drifted: restart
                r = r_true;
                precondition(&r, &mut z);
                p.clone_from(&z);
                rz = dot(&r, &z);
                last_check = norm(&r) / b_norm;
                continue;
            }
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: rel,
        history_tail: tail(&history),
    })
}

fn tail(h: &[f64]) -> Vec<f64> {
    h[h.len().saturating_sub(10)..].to_vec()
}

/// Orthonormal basis of `c^⊥` as the trailing columns of a Householder reflector.
fn complement_basis(c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    let cn = norm(c);
    let mut v = DVector::from_iterator(n, c.iter().map(|x| x / cn));
    // reflect ĉ onto ±e₁ choosing the sign that avoids cancellation
    let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv = v.dot(&v);
    let h = DMatrix::identity(n, n) - (2.0 / vv) * &v * v.transpose();
    h.columns(1, n - 1).into_owned()
}

/// Smallest eigenvalue of `A` restricted to `{x : cᵀx = 0}`.
pub fn dense_eigen_min(a: &CsrMatrix, c: &[f64]) -> Result<f64> {
    let n = a.n();
    if n > DENSE_MAX {
        return Err(Error::SizeExceeded { max: DENSE_MAX, actual: n });
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: c.len() });
    }
    if !(norm(c) > 0.0) {
        return Err(Error::InvalidInput("constraint vector is zero".into()));
    }
    let q = complement_basis(c);
    let b = q.transpose() * a.to_dense() * &q;
    let b = 0.5 * (&b + b.transpose());
    let eig = nalgebra::SymmetricEigen::new(b);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Solve the bordered system `[A c; cᵀ 0][x; λ] = [b; 0]` densely.
pub fn dense_bordered_solve(a: &CsrMatrix, c: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.n();
    if n > DENSE_MAX {
        return Err(Error::SizeExceeded { max: DENSE_MAX, actual: n });
    }
    for len in [c.len(), b.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k.view_mut((0, 0), (n, n)).copy_from(&a.to_dense());
    for i in 0..n {
        k[(i, n)] = c[i];
        k[(n, i)] = c[i];
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from_slice(b);
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("bordered system is singular".into()))?;
    Ok((sol.rows(0, n).iter().copied().collect(), sol[n]))
}
