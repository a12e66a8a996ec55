//! Sparse symmetric-positive-definite solvers (preconditioned conjugate
//! gradients and a direct envelope Cholesky), a general sparse LU backed by
//! faer for the coupled Newton systems, and a damped Newton-Raphson driver.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }
        // Sort each row by column and merge duplicates.
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n_rows {
            scratch.clear();
            for p in counts[r]..counts[r + 1] {
                scratch.push((cols[p], vals[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let c = scratch[i].0;
                let mut v = scratch[i].1;
                let mut j = i + 1;
                while j < scratch.len() && scratch[j].0 == c {
                    v += scratch[j].1;
                    j += 1;
                }
                out_cols.push(c);
                out_vals.push(v);
                i = j;
            }
            row_ptr[r + 1] = out_cols.len();
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            out[r] = acc;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[p] == r {
                    d[r] = self.vals[p];
                }
            }
        }
        d
    }

    pub fn transpose(&self) -> Csr {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((self.cols[p], r, self.vals[p]));
            }
        }
        Csr::from_triplets(self.n_cols, self.n_rows, &triplets)
    }

    /// Max-norm of A - A^T.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let a = self.row_ptr[r]..self.row_ptr[r + 1];
            let b = t.row_ptr[r]..t.row_ptr[r + 1];
            let mut ia = a.start;
            let mut ib = b.start;
            while ia < a.end || ib < b.end {
                let ca = if ia < a.end { self.cols[ia] } else { usize::MAX };
                let cb = if ib < b.end { t.cols[ib] } else { usize::MAX };
                if ca == cb {
                    worst = worst.max((self.vals[ia] - t.vals[ib]).abs());
                    ia += 1;
                    ib += 1;
                } else if ca < cb {
                    worst = worst.max(self.vals[ia].abs());
                    ia += 1;
                } else {
                    worst = worst.max(t.vals[ib].abs());
                    ib += 1;
                }
            }
        }
        worst
    }

    /// Kronecker product self (x) other.
    pub fn kron(&self, other: &Csr) -> Csr {
        let nr = self.n_rows * other.n_rows;
        let nc = self.n_cols * other.n_cols;
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for ra in 0..self.n_rows {
            for pa in self.row_ptr[ra]..self.row_ptr[ra + 1] {
                let (ca, va) = (self.cols[pa], self.vals[pa]);
                for rb in 0..other.n_rows {
                    for pb in other.row_ptr[rb]..other.row_ptr[rb + 1] {
                        triplets.push((
                            ra * other.n_rows + rb,
                            ca * other.n_cols + other.cols[pb],
                            va * other.vals[pb],
                        ));
                    }
                }
            }
        }
        Csr::from_triplets(nr, nc, &triplets)
    }

    /// self + alpha * other (matching shapes).
    pub fn add(&self, other: &Csr, alpha: f64) -> Csr {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.cols[p], self.vals[p]));
            }
            for p in other.row_ptr[r]..other.row_ptr[r + 1] {
                triplets.push((r, other.cols[p], alpha * other.vals[p]));
            }
        }
        Csr::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.vals {
            *v *= s;
        }
    }

    pub fn from_dense_dropping_zeros(d: &crate::fem::factor::Dense) -> Csr {
        let mut triplets = Vec::new();
        for r in 0..d.rows {
            for c in 0..d.cols {
                let v = d.at(r, c);
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Csr::from_triplets(d.rows, d.cols, &triplets)
    }
}

/// Sparse symmetric matrix: a CSR storing the full pattern whose asymmetry
/// has been checked at construction.
#[derive(Debug, Clone)]
pub struct SparseSym(Csr);

impl SparseSym {
    pub fn new(csr: Csr) -> Result<SparseSym> {
        if csr.n_rows != csr.n_cols {
            return Err(Error::Matrix("SparseSym: matrix not square".into()));
        }
        let asym = csr.asymmetry();
        if asym > 1e-12 {
            return Err(Error::Matrix(format!(
                "SparseSym: |A - A^T| = {asym:.3e} exceeds 1e-12"
            )));
        }
        Ok(SparseSym(csr))
    }

    pub fn n(&self) -> usize {
        self.0.n_rows
    }

    pub fn csr(&self) -> &Csr {
        &self.0
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        self.0.matvec(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pcg,
    DirectCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    SymmetricGaussSeidel,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub method: Method,
    pub preconditioner: Preconditioner,
    pub rel_tol: f64,
    /// 0 means the default of 10 * n iterations.
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: Method::Pcg,
            preconditioner: Preconditioner::Jacobi,
            rel_tol: 1e-10,
            max_iter: 0,
        }
    }
}

/// Solve A x = b for a symmetric positive definite A.
pub fn spd_solve(a: &SparseSym, b: &[f64], config: &SolveConfig) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(Error::invalid(format!(
            "spd_solve: rhs length {} does not match n = {}",
            b.len(),
            a.n()
        )));
    }
    match config.method {
        Method::Pcg => pcg(a.csr(), b, config),
        Method::DirectCholesky => {
            let chol = EnvelopeCholesky::factorize(a.csr())?;
            Ok(chol.solve(b))
        }
    }
}

fn pcg(a: &Csr, b: &[f64], config: &SolveConfig) -> Result<Vec<f64>> {
    let n = a.n_rows;
    let max_iter = if config.max_iter == 0 {
        10 * n
    } else {
        config.max_iter
    };
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diag();
    let sgs = matches!(config.preconditioner, Preconditioner::SymmetricGaussSeidel);
    let apply_precond = |r: &[f64], z: &mut Vec<f64>| match config.preconditioner {
        Preconditioner::None => z.copy_from_slice(r),
        Preconditioner::Jacobi => {
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
        }
        Preconditioner::SymmetricGaussSeidel => {
            // (D + L) D^{-1} (D + U) z = r via forward then backward sweep.
            for i in 0..n {
                let mut acc = r[i];
                for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                    let c = a.cols[p];
                    if c < i {
                        acc -= a.vals[p] * z[c];
                    }
                }
                z[i] = acc / diag[i];
            }
            for i in (0..n).rev() {
                let mut acc = z[i] * diag[i];
                for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                    let c = a.cols[p];
                    if c > i {
                        acc -= a.vals[p] * z[c];
                    }
                }
                z[i] = acc / diag[i];
            }
        }
    };
    let _ = sgs;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Matrix(format!(
                "pcg: non-positive curvature p'Ap = {pap:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= config.rel_tol * bnorm {
            return Ok(x);
        }
        apply_precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence {
        context: "pcg".into(),
        residual: norm2(&r) / bnorm,
        iterations: max_iter,
    })
}

/// Direct Cholesky factorization on the envelope (skyline) of the matrix.
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    rows: Vec<Vec<f64>>, // lower-triangular rows, columns first[i]..=i
}

impl EnvelopeCholesky {
    pub fn factorize(a: &Csr) -> Result<EnvelopeCholesky> {
        let n = a.n_rows;
        let mut first = vec![0usize; n];
        for i in 0..n {
            let mut f = i;
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.cols[p] < f {
                    f = a.cols[p];
                }
            }
            first[i] = f;
        }
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[p];
                if j <= i {
                    rows[i][j - first[i]] = a.vals[p];
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut sum = rows[i][j - fi];
                for k in lo..j {
                    sum -= rows[i][k - fi] * rows[j][k - fj];
                }
                rows[i][j - fi] = sum / rows[j][j - fj];
            }
            let mut sum = rows[i][i - fi];
            for k in fi..i {
                let l = rows[i][k - fi];
                sum -= l * l;
            }
            if sum <= 0.0 {
                return Err(Error::Matrix(format!(
                    "cholesky: non-positive pivot {sum:.3e} at row {i}"
                )));
            }
            rows[i][i - fi] = sum.sqrt();
        }
        Ok(EnvelopeCholesky { n, first, rows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let mut acc = y[i];
            for k in fi..i {
                acc -= self.rows[i][k - fi] * y[k];
            }
            y[i] = acc / self.rows[i][i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i] / self.rows[i][i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.rows[i][k - fi] * xi;
            }
        }
        y
    }
}

/// General sparse LU (partial pivoting) for the coupled Newton systems,
/// backed by faer.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn factorize(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseLu> {
        use faer::sparse::{SparseColMat, Triplet};
        let trips: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Matrix(format!("sparse assembly failed: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Matrix(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: bool,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            damping: true,
            max_halvings: 30,
        }
    }
}

#[derive(Debug)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Damped Newton-Raphson for F(x) = 0. `eval` returns the residual and a
/// Jacobian handle; `solve` solves J d = rhs. A feasibility predicate, when
/// supplied, rejects line-search trial points (used to keep heights positive).
pub fn newton_solve<J>(
    mut eval: impl FnMut(&[f64]) -> Result<(Vec<f64>, J)>,
    mut solve: impl FnMut(&J, &[f64]) -> Result<Vec<f64>>,
    x0: Vec<f64>,
    opts: &NewtonOptions,
    feasible: Option<&dyn Fn(&[f64]) -> bool>,
) -> Result<NewtonResult> {
    let mut x = x0;
    let (mut r, mut jac) = eval(&x)?;
    let mut rnorm = norm2(&r);
    for it in 0..opts.max_iter {
        if rnorm <= opts.tol {
            return Ok(NewtonResult {
                x,
                iterations: it,
                residual_norm: rnorm,
            });
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve(&jac, &rhs)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        let halvings = if opts.damping { opts.max_halvings } else { 0 };
        for _ in 0..=halvings {
            let xt: Vec<f64> = x
                .iter()
                .zip(&delta)
                .map(|(xi, di)| xi + alpha * di)
                .collect();
            if let Some(f) = feasible {
                if !f(&xt) {
                    alpha *= 0.5;
                    continue;
                }
            }
            let (rt, jt) = eval(&xt)?;
            let rtn = norm2(&rt);
            if rtn <= (1.0 - 1e-4 * alpha) * rnorm || rtn <= opts.tol {
                x = xt;
                r = rt;
                jac = jt;
                rnorm = rtn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Convergence {
                context: "newton line search stagnated".into(),
                residual: rnorm,
                iterations: it,
            });
        }
    }
    if rnorm <= opts.tol {
        return Ok(NewtonResult {
            x,
            iterations: opts.max_iter,
            residual_norm: rnorm,
        });
    }
    Err(Error::Convergence {
        context: "newton max iterations".into(),
        residual: rnorm,
        iterations: opts.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn identity(n: usize) -> SparseSym {
        let trips: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseSym::new(Csr::from_triplets(n, n, &trips)).unwrap()
    }

    #[test]
    fn identity_solve() {
        let a = identity(5);
        let b = vec![3.0, -1.0, 0.5, 2.0, 7.0];
        let x = spd_solve(&a, &b, &SolveConfig::default()).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two() {
        let a = SparseSym::new(Csr::from_triplets(
            2,
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
        ))
        .unwrap();
        for method in [Method::Pcg, Method::DirectCholesky] {
            let cfg = SolveConfig {
                method,
                ..Default::default()
            };
            let x = spd_solve(&a, &[3.0, 3.0], &cfg).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-10);
            assert!((x[1] - 1.0).abs() < 1e-10);
        }
    }

    fn random_spd(n: usize, seed: u64) -> (SparseSym, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // A = B^T B + I with a banded random B.
        let mut dense = vec![vec![0.0; n]; n];
        let band = 4usize;
        let mut b = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(band)..(i + band + 1).min(n) {
                b[i][j] = rng.gen_range(-1.0..1.0);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    acc += b[k][i] * b[k][j];
                }
                dense[i][j] = acc;
            }
        }
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if dense[i][j] != 0.0 {
                    trips.push((i, j, dense[i][j]));
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (
            SparseSym::new(Csr::from_triplets(n, n, &trips)).unwrap(),
            rhs,
        )
    }

    #[test]
    fn random_spd_residual_contract() {
        let (a, b) = random_spd(50, 7);
        for pc in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::SymmetricGaussSeidel,
        ] {
            let cfg = SolveConfig {
                preconditioner: pc,
                ..Default::default()
            };
            let x = spd_solve(&a, &b, &cfg).unwrap();
            let mut ax = vec![0.0; 50];
            a.matvec(&x, &mut ax);
            let rnorm = norm2(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
            assert!(rnorm <= 1e-10 * norm2(&b), "pc {pc:?}: residual {rnorm:e}");
        }
        // Direct route agrees too.
        let cfg = SolveConfig {
            method: Method::DirectCholesky,
            ..Default::default()
        };
        let x = spd_solve(&a, &b, &cfg).unwrap();
        let mut ax = vec![0.0; 50];
        a.matvec(&x, &mut ax);
        let rnorm = norm2(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
        assert!(rnorm <= 1e-9 * norm2(&b));
    }

    #[test]
    fn non_spd_detected() {
        let a = SparseSym::new(Csr::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (1, 1, -1.0)],
        ))
        .unwrap();
        let cfg = SolveConfig {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        match spd_solve(&a, &[0.0, 1.0], &cfg) {
            Err(Error::Matrix(_)) => {}
            other => panic!("expected matrix error, got {other:?}"),
        }
    }

    #[test]
    fn symmetry_is_enforced() {
        let bad = Csr::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 0.5)]);
        assert!(SparseSym::new(bad).is_err());
    }

    #[test]
    fn jacobi_iteration_count_vs_plain() {
        // Jacobi-preconditioned CG should not need more than 2x the
        // unpreconditioned iterations on these matrices. Count via a
        // shrinking max_iter probe.
        let (a, b) = random_spd(60, 3);
        let count_iters = |pc: Preconditioner| -> usize {
            for iters in 1..600 {
                let cfg = SolveConfig {
                    preconditioner: pc,
                    max_iter: iters,
                    ..Default::default()
                };
                if spd_solve(&a, &b, &cfg).is_ok() {
                    return iters;
                }
            }
            600
        };
        let plain = count_iters(Preconditioner::None);
        let jacobi = count_iters(Preconditioner::Jacobi);
        assert!(
            jacobi <= 2 * plain,
            "jacobi {jacobi} vs plain {plain} iterations"
        );
    }

    #[test]
    fn sparse_lu_roundtrip() {
        let trips = vec![
            (0usize, 0usize, 4.0),
            (0, 1, 1.0),
            (1, 0, 2.0),
            (1, 1, 3.0),
            (2, 2, 1.5),
        ];
        let lu = SparseLu::factorize(3, &trips).unwrap();
        let x = lu.solve(&[5.0, 5.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
        assert!((x[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn newton_scalar_quadratic() {
        let opts = NewtonOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let res = newton_solve(
            |x| Ok((vec![x[0] * x[0] - 4.0], 2.0 * x[0])),
            |j, r| Ok(vec![r[0] / j]),
            vec![3.0],
            &opts,
            None,
        )
        .unwrap();
        assert!((res.x[0] - 2.0).abs() < 1e-12);
        assert!(res.iterations <= 8);
    }

    #[test]
    fn newton_linear_single_iteration() {
        // A x - b with A = [[2,0],[0,4]]: one Newton step.
        let opts = NewtonOptions::default();
        let res = newton_solve(
            |x| Ok((vec![2.0 * x[0] - 2.0, 4.0 * x[1] + 8.0], ())),
            |_, r| Ok(vec![r[0] / 2.0, r[1] / 4.0]),
            vec![5.0, 5.0],
            &opts,
            None,
        )
        .unwrap();
        assert_eq!(res.iterations, 1);
        assert!((res.x[0] - 1.0).abs() < 1e-12);
        assert!((res.x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn newton_accepts_root_immediately() {
        let opts = NewtonOptions::default();
        let res = newton_solve(
            |x| Ok((vec![x[0] * x[0] - 4.0], 2.0 * x[0])),
            |j, r| Ok(vec![r[0] / j]),
            vec![2.0],
            &opts,
            None,
        )
        .unwrap();
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn newton_superlinear_residual_decay() {
        // Smooth 2D system; the accepted-iterate residual norms are recorded
        // through the eval closure (full steps are accepted near the root).
        use std::cell::RefCell;
        let norms: RefCell<Vec<f64>> = RefCell::new(Vec::new());
        let f = |x: &[f64]| {
            vec![
                x[0].powi(3) + x[1] - 2.0,
                x[0] + x[1].powi(3) - 2.0,
            ]
        };
        let res = newton_solve(
            |y| {
                let r = f(y);
                norms.borrow_mut().push(norm2(&r));
                let j = (
                    [3.0 * y[0] * y[0], 1.0],
                    [1.0, 3.0 * y[1] * y[1]],
                );
                Ok((r, j))
            },
            |j: &([f64; 2], [f64; 2]), r| {
                let det = j.0[0] * j.1[1] - j.0[1] * j.1[0];
                Ok(vec![
                    (r[0] * j.1[1] - r[1] * j.0[1]) / det,
                    (j.0[0] * r[1] - j.1[0] * r[0]) / det,
                ])
            },
            vec![1.2, 0.8],
            &NewtonOptions {
                tol: 1e-13,
                damping: false,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(res.residual_norm <= 1e-13);
        let norms = norms.borrow();
        let mut ratios = Vec::new();
        for w in norms.windows(2) {
            if w[0] > 1e-12 && w[1] > 0.0 {
                ratios.push(w[1] / w[0]);
            }
        }
        assert!(ratios.len() >= 2, "norms: {norms:?}");
        assert!(
            ratios.last().unwrap() < &(0.2 * ratios[0].max(1e-3)),
            "ratios not shrinking: {ratios:?}"
        );
    }
}
