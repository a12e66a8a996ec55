//! Exact direct solvers for the tensor-product proximal systems: a fast
//! diagonalization solver for the scalar forms (sums of Kronecker products
//! of per-axis mass and stiffness factors) and a Schur complement solver for
//! the spatial Raviart-Thomas mass + div-div systems. Both produce the same
//! solutions as assembling the sparse form and solving it directly; they
//! exist because the proximal solves sit inside the optimization loop.

use crate::error::{Error, Result};
use crate::fem::factor::Dense;
use crate::fem::RtSpace;
use nalgebra::DMatrix;

/// Generalized symmetric eigendecomposition of (K, M) with M positive
/// definite: returns Z and lambda with Z^T M Z = I and Z^T K Z = diag(lambda).
pub fn gen_eig(k: &Dense, m: &Dense) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = k.rows;
    let m_na = m.to_nalgebra();
    let k_na = k.to_nalgebra();
    let chol = nalgebra::linalg::Cholesky::new(m_na)
        .ok_or_else(|| Error::Matrix("gen_eig: mass factor not positive definite".into()))?;
    let l = chol.l();
    // C = L^-1 K L^-T, symmetrized against roundoff.
    let x = l.solve_lower_triangular(&k_na).unwrap();
    let c = l.solve_lower_triangular(&x.transpose()).unwrap();
    let c = (&c + c.transpose()) * 0.5;
    let eig = nalgebra::linalg::SymmetricEigen::new(c);
    // Z = L^-T Q.
    let z = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .unwrap();
    let lambda = eig.eigenvalues.iter().copied().collect();
    let _ = n;
    Ok((z, lambda))
}

struct Axis {
    z: DMatrix<f64>,
    zt: DMatrix<f64>,
    n: usize,
}

/// Direct solver for A = sum_a c_a M_1 (x) ... K_a ... (x) M_d
///                     + c0 M_1 (x) ... (x) M_d
/// via per-axis generalized eigenvectors; the transformed operator is
/// diagonal with entries sum_a c_a lambda_a + c0.
pub struct FastDiag {
    axes: Vec<Axis>,
    diag_inv: Vec<f64>,
    n: usize,
}

impl FastDiag {
    /// Each axis contributes (K, M, coeff); `mass_coeff` scales the pure
    /// mass term.
    pub fn new(axes: &[(&Dense, &Dense, f64)], mass_coeff: f64) -> Result<FastDiag> {
        let mut built = Vec::new();
        let mut lambdas: Vec<Vec<f64>> = Vec::new();
        for (k, m, coeff) in axes {
            let (z, lam) = gen_eig(k, m)?;
            lambdas.push(lam.iter().map(|l| l * coeff).collect());
            let zt = z.transpose();
            built.push(Axis { n: k.rows, z, zt });
        }
        let n: usize = built.iter().map(|a| a.n).product();
        let mut diag_inv = vec![0.0; n];
        let dims: Vec<usize> = built.iter().map(|a| a.n).collect();
        for (idx, d) in diag_inv.iter_mut().enumerate() {
            let mut rem = idx;
            let mut acc = mass_coeff;
            for a in (0..dims.len()).rev() {
                let i = rem % dims[a];
                rem /= dims[a];
                acc += lambdas[a][i];
            }
            if acc <= 0.0 {
                return Err(Error::Matrix(format!(
                    "fast diagonalization: nonpositive transformed pivot {acc:.3e}"
                )));
            }
            *d = 1.0 / acc;
        }
        Ok(FastDiag {
            axes: built,
            diag_inv,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        let mut scratch = vec![0.0; self.n];
        // Forward transform with Z^T along every mode.
        for (a, axis) in self.axes.iter().enumerate() {
            self.apply_mode(a, &axis.zt, &mut x, &mut scratch);
        }
        for (xi, d) in x.iter_mut().zip(&self.diag_inv) {
            *xi *= d;
        }
        for (a, axis) in self.axes.iter().enumerate() {
            self.apply_mode(a, &axis.z, &mut x, &mut scratch);
        }
        x
    }

    fn apply_mode(&self, mode: usize, m: &DMatrix<f64>, data: &mut [f64], scratch: &mut [f64]) {
        let dims: Vec<usize> = self.axes.iter().map(|a| a.n).collect();
        let na = dims[mode];
        let pre: usize = dims[..mode].iter().product();
        let post: usize = dims[mode + 1..].iter().product();
        let block = na * post;
        for p in 0..pre {
            let base = p * block;
            scratch[..block].copy_from_slice(&data[base..base + block]);
            for j in 0..na {
                let out = &mut data[base + j * post..base + (j + 1) * post];
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..na {
                    let c = m[(j, i)];
                    if c != 0.0 {
                        let src = &scratch[i * post..(i + 1) * post];
                        for (o, s) in out.iter_mut().zip(src) {
                            *o += c * s;
                        }
                    }
                }
            }
        }
    }
}

/// Direct solver for the spatial RT system  M + alpha^2 div'div.
///
/// In 1D this is a small dense SPD matrix. In 2D the component blocks are
/// Kronecker products of 1D factors; eliminating the y-component gives a
/// Schur complement of the form  A_x (x) D_y - alpha^4 S1 (x) S2  which a
/// generalized eigendecomposition in the x-index turns into independent
/// dense SPD systems per x-mode.
pub enum RtSolver {
    Dense1d {
        chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
        n: usize,
    },
    Schur2d(Box<Schur2d>),
}

pub struct Schur2d {
    n_hx: usize,
    n_ly: usize,
    n_lx: usize,
    n_hy: usize,
    alpha2: f64,
    g1: DMatrix<f64>,
    g2: DMatrix<f64>,
    dlx_inv: Vec<f64>,
    ahy_chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
    z1: DMatrix<f64>,
    z1t: DMatrix<f64>,
    block_chols: Vec<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>>,
}

impl RtSolver {
    pub fn new(space: &RtSpace, alpha: f64) -> Result<RtSolver> {
        let a2 = alpha * alpha;
        let h = space.hx;
        if space.dim == 1 {
            let mut a = space.fx_h.mass(h);
            a.add_assign(&space.fx_h.stiffness(h), a2);
            let chol = nalgebra::linalg::Cholesky::new(a.to_nalgebra())
                .ok_or_else(|| Error::Matrix("rt solver: 1D system not SPD".into()))?;
            return Ok(RtSolver::Dense1d {
                chol,
                n: space.fx_h.ndofs,
            });
        }
        let fy_l = space.fy_l.as_ref().unwrap();
        let fx_l = space.fx_l.as_ref().unwrap();
        let fy_h = space.fy_h.as_ref().unwrap();
        // x block: Ahx (x) Dly; y block: Dlx (x) Ahy.
        let mut ahx = space.fx_h.mass(h);
        ahx.add_assign(&space.fx_h.stiffness(h), a2);
        let mut ahy = fy_h.mass(h);
        ahy.add_assign(&fy_h.stiffness(h), a2);
        let diag_of = |m: &Dense| -> Result<Vec<f64>> {
            let mut d = vec![0.0; m.rows];
            for i in 0..m.rows {
                for j in 0..m.cols {
                    let v = m.at(i, j);
                    if i == j {
                        d[i] = v;
                    } else if v.abs() > 1e-12 {
                        return Err(Error::Matrix(
                            "rt solver: discontinuous factor mass not diagonal".into(),
                        ));
                    }
                }
            }
            Ok(d)
        };
        let dly = diag_of(&fy_l.mass(h))?;
        let dlx = diag_of(&fx_l.mass(h))?;
        let g1 = space.fx_h.mixed_der_val(fx_l, h).to_nalgebra();
        let g2 = fy_h.mixed_der_val(fy_l, h).to_nalgebra();
        let ahy_chol = nalgebra::linalg::Cholesky::new(ahy.to_nalgebra())
            .ok_or_else(|| Error::Matrix("rt solver: y block not SPD".into()))?;
        // S1 = G1 Dlx^-1 G1^T (x factor), S2 = G2^T Ahy^-1 G2 (y factor).
        let n_hx = space.fx_h.ndofs;
        let n_lx = fx_l.ndofs;
        let n_hy = fy_h.ndofs;
        let n_ly = fy_l.ndofs;
        let mut g1_scaled = g1.clone();
        for c in 0..n_lx {
            for r in 0..n_hx {
                g1_scaled[(r, c)] /= dlx[c];
            }
        }
        let s1_na = &g1_scaled * g1.transpose();
        let s2_na = g2.transpose() * ahy_chol.solve(&g2);
        // Pencil (S1, Ahx): Z1^T Ahx Z1 = I, Z1^T S1 Z1 = D1.
        let s1_dense = Dense {
            rows: n_hx,
            cols: n_hx,
            a: s1_na.transpose().as_slice().to_vec(),
        };
        let ahx_dense = ahx;
        let (z1, d1) = gen_eig(&s1_dense, &ahx_dense)?;
        // Per-x-mode dense blocks: Dly - alpha^4 d1_i S2, SPD.
        let a4 = a2 * a2;
        let mut block_chols = Vec::with_capacity(n_hx);
        for &d1i in &d1 {
            let mut b = -a4 * d1i * &s2_na;
            for j in 0..n_ly {
                b[(j, j)] += dly[j];
            }
            let chol = nalgebra::linalg::Cholesky::new(b).ok_or_else(|| {
                Error::Matrix("rt solver: Schur block not SPD".into())
            })?;
            block_chols.push(chol);
        }
        let z1t = z1.transpose();
        Ok(RtSolver::Schur2d(Box::new(Schur2d {
            n_hx,
            n_ly,
            n_lx,
            n_hy,
            alpha2: a2,
            g1,
            g2,
            dlx_inv: dlx.iter().map(|d| 1.0 / d).collect(),
            ahy_chol,
            z1,
            z1t,
            block_chols,
        })))
    }

    pub fn n(&self) -> usize {
        match self {
            RtSolver::Dense1d { n, .. } => *n,
            RtSolver::Schur2d(s) => s.n_hx * s.n_ly + s.n_lx * s.n_hy,
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            RtSolver::Dense1d { chol, n } => {
                let b = nalgebra::DVector::from_column_slice(&rhs[..*n]);
                chol.solve(&b).as_slice().to_vec()
            }
            RtSolver::Schur2d(s) => s.solve(rhs),
        }
    }
}

impl Schur2d {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let nx = self.n_hx * self.n_ly;
        // Row-major (n_hx x n_ly) and (n_lx x n_hy) views of the two blocks.
        let f = DMatrix::from_row_slice(self.n_hx, self.n_ly, &rhs[..nx]);
        let g = DMatrix::from_row_slice(self.n_lx, self.n_hy, &rhs[nx..]);
        // Ayy^-1 g: scale rows by 1/dlx, apply Ahy^-1 across the y index.
        let ayy_inv = |m: &DMatrix<f64>| -> DMatrix<f64> {
            let mut t = self.ahy_chol.solve(&m.transpose()); // (n_hy x n_lx)
            for c in 0..self.n_lx {
                for r in 0..self.n_hy {
                    t[(r, c)] *= self.dlx_inv[c];
                }
            }
            t.transpose()
        };
        // C y = alpha^2 G1 (y G2), mapping (n_lx x n_hy) -> (n_hx x n_ly).
        let apply_c = |y: &DMatrix<f64>| -> DMatrix<f64> {
            let t = y * &self.g2; // (n_lx x n_ly)
            self.alpha2 * (&self.g1 * t)
        };
        let apply_ct = |x: &DMatrix<f64>| -> DMatrix<f64> {
            let t = self.g1.transpose() * x; // (n_lx x n_ly)
            self.alpha2 * (t * self.g2.transpose())
        };
        let g1v = ayy_inv(&g);
        let t = &f - apply_c(&g1v);
        // Transform in the x index, solve per-mode blocks, transform back.
        let that = &self.z1t * t; // (n_hx x n_ly)
        let mut xhat = DMatrix::zeros(self.n_hx, self.n_ly);
        for i in 0..self.n_hx {
            let row = that.row(i).transpose();
            let sol = self.block_chols[i].solve(&row);
            xhat.row_mut(i).copy_from(&sol.transpose());
        }
        let x = &self.z1 * xhat;
        let y = ayy_inv(&(g - apply_ct(&x)));
        let mut out = vec![0.0; self.n_hx * self.n_ly + self.n_lx * self.n_hy];
        for r in 0..self.n_hx {
            for c in 0..self.n_ly {
                out[r * self.n_ly + c] = x[(r, c)];
            }
        }
        for r in 0..self.n_lx {
            for c in 0..self.n_hy {
                out[nx + r * self.n_hy + c] = y[(r, c)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_spd, build_space, FemSpace, FormSpec, SpaceKind};
    use crate::linsolve::{spd_solve, SolveConfig};
    use crate::mesh::{build_grid, Boundary};
    use rand::{Rng, SeedableRng};

    #[test]
    fn fastdiag_matches_direct_solve_phi_form() {
        // The MFC phi proximal form assembled sparsely vs fast diagonalization.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (dim, boundary) in [
            (1, Boundary::Neumann),
            (1, Boundary::Periodic),
            (2, Boundary::Neumann),
        ] {
            let g = build_grid(dim, 3, 2, 0.7, 1, boundary).unwrap();
            let space = build_space(&g, SpaceKind::ScalarH1SpaceTime, 1).unwrap();
            let s = match &space {
                FemSpace::Scalar(s) => s,
                _ => unreachable!(),
            };
            let ft = s.temporal_factor().unwrap();
            let mut ktp = ft.stiffness(s.dt_seg);
            let last = ft.endpoint_dof(1).unwrap();
            *ktp.at_mut(last, last) += 1.0;
            let mt = ft.mass(s.dt_seg);
            let kx = s.fx.stiffness(s.hx);
            let mx = s.fx.mass(s.hx);
            let mut axes: Vec<(&crate::fem::factor::Dense, &crate::fem::factor::Dense, f64)> =
                vec![(&ktp, &mt, 1.0), (&kx, &mx, 1.0)];
            let tmp;
            if let Some(fy) = &s.fy {
                tmp = (fy.stiffness(s.hx), fy.mass(s.hx));
                axes.push((&tmp.0, &tmp.1, 1.0));
            }
            let fd = FastDiag::new(&axes, 1.0).unwrap();
            let a = assemble_spd(&space, FormSpec::PhiProx).unwrap();
            assert_eq!(fd.n(), a.n());
            let b: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_fd = fd.solve(&b);
            let x_ref = spd_solve(&a, &b, &SolveConfig::default()).unwrap();
            let err: f64 = x_fd
                .iter()
                .zip(&x_ref)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale: f64 = x_ref.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(err < 1e-8 * scale.max(1.0), "dim {dim}: err {err:.3e}");
        }
    }

    #[test]
    fn rt_solver_matches_direct_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for (dim, boundary) in [
            (1, Boundary::Neumann),
            (1, Boundary::Periodic),
            (2, Boundary::Neumann),
            (2, Boundary::Periodic),
        ] {
            let g = build_grid(dim, 3, 2, 0.7, 2, boundary).unwrap();
            let space = build_space(&g, SpaceKind::HDivSpatial, 2).unwrap();
            let rt = match &space {
                FemSpace::Rt(s) => s,
                _ => unreachable!(),
            };
            let alpha = 0.13;
            let solver = RtSolver::new(rt, alpha).unwrap();
            let a = assemble_spd(&space, FormSpec::HdivProx { alpha }).unwrap();
            assert_eq!(solver.n(), a.n());
            let b: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_fast = solver.solve(&b);
            let x_ref = spd_solve(&a, &b, &SolveConfig::default()).unwrap();
            let err: f64 = x_fast
                .iter()
                .zip(&x_ref)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale: f64 = x_ref.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(
                err < 1e-8 * scale.max(1.0),
                "dim {dim} {boundary:?}: err {err:.3e}"
            );
        }
    }
}
