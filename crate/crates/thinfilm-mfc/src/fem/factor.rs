//! One-dimensional building blocks for the tensor-product finite element
//! spaces: nodal Lagrange factors on a uniform 1D mesh, their connectivity,
//! and the small dense factor matrices (mass, stiffness, mixed) that the
//! tensor-product assembly and the fast direct solvers are built from.

use crate::error::Result;
use crate::mesh::{gauss_legendre_rule, gauss_lobatto_nodes};

/// Minimal row-major dense matrix for small factor-level linear algebra.
#[derive(Debug, Clone)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.a[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Dense {
        let mut t = Dense::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *t.at_mut(c, r) = self.at(r, c);
            }
        }
        t
    }

    /// self * x for a dense vector.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            out[r] = dot(self.row(r), x);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.a {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Dense, s: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (v, w) in self.a.iter_mut().zip(&other.a) {
            *v += s * w;
        }
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.a)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluate the Lagrange basis through `nodes` (value and derivative) at `x`.
pub fn lagrange_eval(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut vals = vec![0.0; n];
    let mut ders = vec![0.0; n];
    for j in 0..n {
        let mut v = 1.0;
        for m in 0..n {
            if m != j {
                v *= (x - nodes[m]) / (nodes[j] - nodes[m]);
            }
        }
        vals[j] = v;
        let mut d = 0.0;
        for i in 0..n {
            if i == j {
                continue;
            }
            let mut term = 1.0 / (nodes[j] - nodes[i]);
            for m in 0..n {
                if m != j && m != i {
                    term *= (x - nodes[m]) / (nodes[j] - nodes[m]);
                }
            }
            d += term;
        }
        ders[j] = d;
    }
    (vals, ders)
}

/// Tabulate the Lagrange basis at a set of reference points; rows are points,
/// columns are basis functions. Derivatives are with respect to the reference
/// coordinate on [0, 1].
pub fn basis_tables(nodes: &[f64], points: &[f64]) -> (Dense, Dense) {
    let mut bv = Dense::zeros(points.len(), nodes.len());
    let mut bd = Dense::zeros(points.len(), nodes.len());
    for (q, &x) in points.iter().enumerate() {
        let (v, d) = lagrange_eval(nodes, x);
        for j in 0..nodes.len() {
            *bv.at_mut(q, j) = v[j];
            *bd.at_mut(q, j) = d[j];
        }
    }
    (bv, bd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorBc {
    Free,
    Zero,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Continuous nodal basis on Gauss-Lobatto points (H1-conforming).
    Continuous,
    /// Discontinuous nodal basis on Gauss-Legendre points (L2).
    Discontinuous,
}

/// A one-dimensional finite element factor on a uniform mesh of the unit
/// interval (or of [0, T] for temporal factors; lengths are handled by the
/// caller via the cell size).
#[derive(Debug, Clone)]
pub struct Factor1d {
    pub kind: FactorKind,
    pub bc: FactorBc,
    pub cells: usize,
    /// Per-cell polynomial degree.
    pub degree: usize,
    pub ndofs: usize,
    /// Local nodal points on the reference cell [0, 1].
    pub nodes_ref: Vec<f64>,
    /// Local-to-global map, `cells x nloc`; -1 marks a constrained (zero) dof.
    pub conn: Vec<isize>,
    /// Basis tables at the primary quadrature points (k+1 per cell).
    pub b_val: Dense,
    pub b_der: Dense,
    /// Primary rule on the reference cell.
    pub quad_ref: Vec<f64>,
    pub wq_ref: Vec<f64>,
}

impl Factor1d {
    pub fn nloc(&self) -> usize {
        self.nodes_ref.len()
    }

    pub fn nq(&self) -> usize {
        self.quad_ref.len()
    }

    #[inline]
    pub fn gdof(&self, cell: usize, j: usize) -> isize {
        self.conn[cell * self.nloc() + j]
    }

    /// Continuous factor of degree `degree` on `cells` cells with boundary
    /// treatment `bc`, using (k+1)-point Gauss-Legendre as the primary rule.
    pub fn continuous(cells: usize, degree: usize, k: usize, bc: FactorBc) -> Result<Factor1d> {
        assert!(degree >= 1);
        let nloc = degree + 1;
        let nodes_ref = gauss_lobatto_nodes(nloc);
        let raw = cells * degree + 1;
        let (ndofs, map): (usize, Box<dyn Fn(usize) -> isize>) = match bc {
            FactorBc::Free => (raw, Box::new(|g| g as isize)),
            FactorBc::Zero => (
                raw - 2,
                Box::new(move |g| {
                    if g == 0 || g == raw - 1 {
                        -1
                    } else {
                        (g - 1) as isize
                    }
                }),
            ),
            FactorBc::Periodic => {
                let n = raw - 1;
                (n, Box::new(move |g| (g % n) as isize))
            }
        };
        let mut conn = Vec::with_capacity(cells * nloc);
        for c in 0..cells {
            for j in 0..nloc {
                conn.push(map(c * degree + j));
            }
        }
        let (quad_ref, wq_ref) = gauss_legendre_rule(k + 1, 0.0, 1.0)?;
        let (b_val, b_der) = basis_tables(&nodes_ref, &quad_ref);
        Ok(Factor1d {
            kind: FactorKind::Continuous,
            bc,
            cells,
            degree,
            ndofs,
            nodes_ref,
            conn,
            b_val,
            b_der,
            quad_ref,
            wq_ref,
        })
    }

    /// Discontinuous factor of degree `degree` with nodes at the (degree+1)
    /// Gauss-Legendre points; with degree = k these nodes coincide with the
    /// primary quadrature points.
    pub fn discontinuous(cells: usize, degree: usize, k: usize) -> Result<Factor1d> {
        let nloc = degree + 1;
        let (nodes_ref, _) = gauss_legendre_rule(nloc, 0.0, 1.0)?;
        let conn: Vec<isize> = (0..cells * nloc).map(|g| g as isize).collect();
        let (quad_ref, wq_ref) = gauss_legendre_rule(k + 1, 0.0, 1.0)?;
        let (b_val, b_der) = basis_tables(&nodes_ref, &quad_ref);
        Ok(Factor1d {
            kind: FactorKind::Discontinuous,
            bc: FactorBc::Free,
            cells,
            degree,
            ndofs: cells * nloc,
            nodes_ref,
            conn,
            b_val,
            b_der,
            quad_ref,
            wq_ref,
        })
    }

    /// Global dof holding the value at an interval endpoint (continuous
    /// factors with free ends only): end = 0 for the left, 1 for the right.
    pub fn endpoint_dof(&self, end: usize) -> Option<usize> {
        if self.kind != FactorKind::Continuous || self.bc != FactorBc::Free {
            return None;
        }
        Some(if end == 0 { 0 } else { self.ndofs - 1 })
    }

    /// Factor mass matrix (exactly integrated), scaled by the cell size.
    pub fn mass(&self, cell_size: f64) -> Dense {
        self.form_matrix(cell_size, false, false)
    }

    /// Factor stiffness matrix (derivative-derivative, exactly integrated).
    pub fn stiffness(&self, cell_size: f64) -> Dense {
        self.form_matrix(cell_size, true, true)
    }

    fn form_matrix(&self, cell_size: f64, der_row: bool, der_col: bool) -> Dense {
        let npts = self.degree + 2; // exact for products of degree 2*degree
        let (xs, ws) = gauss_legendre_rule(npts, 0.0, 1.0).unwrap();
        let (bv, bd) = basis_tables(&self.nodes_ref, &xs);
        let nloc = self.nloc();
        let mut m = Dense::zeros(self.ndofs, self.ndofs);
        for c in 0..self.cells {
            for q in 0..npts {
                let w = ws[q] * cell_size;
                for i in 0..nloc {
                    let gi = self.gdof(c, i);
                    if gi < 0 {
                        continue;
                    }
                    let ri = if der_row {
                        bd.at(q, i) / cell_size
                    } else {
                        bv.at(q, i)
                    };
                    for j in 0..nloc {
                        let gj = self.gdof(c, j);
                        if gj < 0 {
                            continue;
                        }
                        let rj = if der_col {
                            bd.at(q, j) / cell_size
                        } else {
                            bv.at(q, j)
                        };
                        *m.at_mut(gi as usize, gj as usize) += w * ri * rj;
                    }
                }
            }
        }
        m
    }

    /// Mixed matrix `int phi_i' psi_j dx` between this factor (rows,
    /// differentiated) and another factor on the same mesh (columns, values).
    pub fn mixed_der_val(&self, other: &Factor1d, cell_size: f64) -> Dense {
        assert_eq!(self.cells, other.cells);
        let npts = self.degree + other.degree + 1;
        let (xs, ws) = gauss_legendre_rule(npts.max(2), 0.0, 1.0).unwrap();
        let (_, bd) = basis_tables(&self.nodes_ref, &xs);
        let (bv, _) = basis_tables(&other.nodes_ref, &xs);
        let mut m = Dense::zeros(self.ndofs, other.ndofs);
        for c in 0..self.cells {
            for (q, &wq) in ws.iter().enumerate() {
                let w = wq * cell_size;
                for i in 0..self.nloc() {
                    let gi = self.gdof(c, i);
                    if gi < 0 {
                        continue;
                    }
                    let di = bd.at(q, i) / cell_size;
                    for j in 0..other.nloc() {
                        let gj = other.gdof(c, j);
                        if gj < 0 {
                            continue;
                        }
                        *m.at_mut(gi as usize, gj as usize) += w * di * bv.at(q, j);
                    }
                }
            }
        }
        m
    }

    /// Interpolate a function given at the factor's nodal points: returns the
    /// coefficient vector for a continuous/discontinuous nodal interpolant.
    pub fn node_positions(&self, cell_size: f64) -> Vec<(isize, f64)> {
        let mut out = Vec::with_capacity(self.cells * self.nloc());
        for c in 0..self.cells {
            for j in 0..self.nloc() {
                let x = (c as f64 + self.nodes_ref[j]) * cell_size;
                out.push((self.gdof(c, j), x));
            }
        }
        out
    }
}
