//! Structured tensor-product meshes on the unit interval/square and on [0, T],
//! together with Gauss-Legendre quadrature rules.
//!
//! Quadrature point ordering conventions used throughout the crate:
//! * temporal points: `seg * (k+1) + i`, ascending in time,
//! * spatial points, 1D: `cell * (k+1) + j`, ascending in x,
//! * spatial points, 2D: `qx * nq_y + qy` with `qx`, `qy` the global 1D
//!   indices along each axis (x-major),
//! * space-time points: `qt * n_spatial + qs`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Neumann,
}

/// Uniform mesh of the unit interval or unit square.
#[derive(Debug, Clone)]
pub struct SpatialMesh {
    pub dim: usize,
    pub cells_per_axis: usize,
    pub boundary: Boundary,
}

impl SpatialMesh {
    pub fn cell_size(&self) -> f64 {
        1.0 / self.cells_per_axis as f64
    }

    pub fn n_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }
}

/// Uniform partition of the time interval [0, T].
#[derive(Debug, Clone)]
pub struct TemporalMesh {
    pub horizon: f64,
    pub segments: usize,
}

impl TemporalMesh {
    pub fn segment_length(&self) -> f64 {
        self.horizon / self.segments as f64
    }
}

/// Gauss-Legendre quadrature data: the per-axis reference rule plus the
/// assembled spatial and temporal point/weight sets.
#[derive(Debug, Clone)]
pub struct QuadratureSet {
    pub degree: usize,
    /// Reference rule on [0, 1] with k+1 points.
    pub ref_nodes: Vec<f64>,
    pub ref_weights: Vec<f64>,
    /// Spatial points (dim coordinates each, flattened) and weights.
    pub spatial_points: Vec<f64>,
    pub spatial_weights: Vec<f64>,
    pub temporal_points: Vec<f64>,
    pub temporal_weights: Vec<f64>,
}

/// Tensor-product space-time grid: mesh data plus quadrature sets.
#[derive(Debug, Clone)]
pub struct SpaceTimeGrid {
    pub spatial: SpatialMesh,
    pub temporal: TemporalMesh,
    pub quad: QuadratureSet,
}

/// Gauss-Legendre rule with `npts` points on (a, b). Nodes are computed by
/// Newton iteration on the Legendre polynomial to 1e-15; the rule is exact
/// for polynomials of degree <= 2*npts - 1 and its weights sum to b - a.
pub fn gauss_legendre_rule(npts: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if npts == 0 {
        return Err(Error::invalid("gauss_legendre_rule: npts must be >= 1"));
    }
    if !(a < b) {
        return Err(Error::invalid(format!(
            "gauss_legendre_rule: need a < b, got a={a}, b={b}"
        )));
    }
    let n = npts;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots on [-1, 1]; exploit symmetry by solving the first half.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs(); // first half: negative side, ascending later
        weights[i] = w;
        nodes[n - 1 - i] = x.abs();
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    // Map from [-1, 1] to [a, b].
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    Ok((nodes, weights))
}

/// Legendre P_n and its derivative at x via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Lobatto-Legendre nodes (npts >= 2) on [0, 1], used as nodal points
/// for the continuous finite element bases.
pub fn gauss_lobatto_nodes(npts: usize) -> Vec<f64> {
    assert!(npts >= 2);
    let n = npts - 1; // interior nodes are roots of P_n'
    let mut nodes = vec![0.0; npts];
    nodes[0] = -1.0;
    nodes[npts - 1] = 1.0;
    for i in 1..n {
        // Initial guess: Chebyshev-Gauss-Lobatto point.
        let mut x = -(std::f64::consts::PI * i as f64 / n as f64).cos();
        for _ in 0..100 {
            // Newton on P_n'(x): use the identity
            // (1-x^2) P_n''(x) = 2x P_n'(x) - n(n+1) P_n(x).
            let (p, d) = legendre_with_derivative(n, x);
            let d2 = (2.0 * x * d - (n * (n + 1)) as f64 * p) / (1.0 - x * x);
            let dx = d / d2;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
    }
    nodes.iter().map(|x| 0.5 * (x + 1.0)).collect()
}

/// Build a space-time grid with (k+1)-point Gauss-Legendre quadrature on
/// every cell and segment.
pub fn build_grid(
    dim: usize,
    n: usize,
    n_t: usize,
    horizon: f64,
    degree: usize,
    boundary: Boundary,
) -> Result<SpaceTimeGrid> {
    if dim == 0 || dim > 2 {
        return Err(Error::unsupported(format!(
            "build_grid: spatial dimension {dim} (supported: 1, 2)"
        )));
    }
    if n < 2 {
        return Err(Error::invalid("build_grid: need at least 2 cells per axis"));
    }
    if n_t == 0 {
        return Err(Error::invalid("build_grid: need at least 1 time segment"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("build_grid: horizon must be positive"));
    }
    let (ref_nodes, ref_weights) = gauss_legendre_rule(degree + 1, 0.0, 1.0)?;
    let npc = degree + 1;
    let hx = 1.0 / n as f64;

    // Per-axis global 1D points.
    let axis_pts: Vec<f64> = (0..n * npc)
        .map(|g| (g / npc) as f64 * hx + ref_nodes[g % npc] * hx)
        .collect();
    let axis_wts: Vec<f64> = (0..n * npc).map(|g| ref_weights[g % npc] * hx).collect();

    let (spatial_points, spatial_weights) = match dim {
        1 => (axis_pts.clone(), axis_wts.clone()),
        2 => {
            let nq = axis_pts.len();
            let mut pts = Vec::with_capacity(2 * nq * nq);
            let mut wts = Vec::with_capacity(nq * nq);
            for ix in 0..nq {
                for iy in 0..nq {
                    pts.push(axis_pts[ix]);
                    pts.push(axis_pts[iy]);
                    wts.push(axis_wts[ix] * axis_wts[iy]);
                }
            }
            (pts, wts)
        }
        _ => unreachable!(),
    };

    let dt_seg = horizon / n_t as f64;
    let temporal_points: Vec<f64> = (0..n_t * npc)
        .map(|g| (g / npc) as f64 * dt_seg + ref_nodes[g % npc] * dt_seg)
        .collect();
    let temporal_weights: Vec<f64> = (0..n_t * npc)
        .map(|g| ref_weights[g % npc] * dt_seg)
        .collect();

    Ok(SpaceTimeGrid {
        spatial: SpatialMesh {
            dim,
            cells_per_axis: n,
            boundary,
        },
        temporal: TemporalMesh {
            horizon,
            segments: n_t,
        },
        quad: QuadratureSet {
            degree,
            ref_nodes,
            ref_weights,
            spatial_points,
            spatial_weights,
            temporal_points,
            temporal_weights,
        },
    })
}

impl SpaceTimeGrid {
    pub fn degree(&self) -> usize {
        self.quad.degree
    }

    pub fn n_spatial_points(&self) -> usize {
        self.quad.spatial_weights.len()
    }

    pub fn n_temporal_points(&self) -> usize {
        self.quad.temporal_weights.len()
    }

    pub fn n_spacetime_points(&self) -> usize {
        self.n_spatial_points() * self.n_temporal_points()
    }

    /// Coordinates of spatial quadrature point `q` (1 or 2 entries).
    pub fn spatial_point(&self, q: usize) -> &[f64] {
        let d = self.spatial.dim;
        &self.quad.spatial_points[q * d..(q + 1) * d]
    }

    /// Sum f(chi) * omega over the spatial quadrature set.
    pub fn integrate_spatial(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_spatial_points() {
            return Err(Error::invalid(format!(
                "integrate_spatial: got {} values, expected {}",
                values.len(),
                self.n_spatial_points()
            )));
        }
        Ok(dot(values, &self.quad.spatial_weights))
    }

    /// Sum f(chi_t, chi_s) * omega_t * omega_s over the space-time set.
    pub fn integrate_spacetime(&self, values: &[f64]) -> Result<f64> {
        let ns = self.n_spatial_points();
        if values.len() != self.n_spacetime_points() {
            return Err(Error::invalid(format!(
                "integrate_spacetime: got {} values, expected {}",
                values.len(),
                self.n_spacetime_points()
            )));
        }
        let mut total = 0.0;
        for (qt, wt) in self.quad.temporal_weights.iter().enumerate() {
            total += wt * dot(&values[qt * ns..(qt + 1) * ns], &self.quad.spatial_weights);
        }
        Ok(total)
    }

    /// Evaluate a function of (t, x) at every space-time quadrature point.
    pub fn sample_spacetime(&self, f: impl Fn(f64, &[f64]) -> f64) -> Vec<f64> {
        let ns = self.n_spatial_points();
        let mut out = Vec::with_capacity(self.n_spacetime_points());
        for &t in &self.quad.temporal_points {
            for qs in 0..ns {
                out.push(f(t, self.spatial_point(qs)));
            }
        }
        out
    }

    /// Evaluate a function of x at every spatial quadrature point.
    pub fn sample_spatial(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.n_spatial_points())
            .map(|qs| f(self.spatial_point(qs)))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_rule() {
        let (n, w) = gauss_legendre_rule(1, 0.0, 1.0).unwrap();
        assert!((n[0] - 0.5).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule() {
        let (n, w) = gauss_legendre_rule(2, 0.0, 1.0).unwrap();
        let lo = (3.0 - 3f64.sqrt()) / 6.0;
        let hi = (3.0 + 3f64.sqrt()) / 6.0;
        assert!((n[0] - lo).abs() < 1e-14, "{} vs {}", n[0], lo);
        assert!((n[1] - hi).abs() < 1e-14);
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
        // Cubic exactness: integral of x^3 on [0,1] is 1/4.
        let integral: f64 = n.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
        assert!((integral - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rule_rejects_bad_arguments() {
        assert!(gauss_legendre_rule(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre_rule(3, 1.0, 1.0).is_err());
        assert!(gauss_legendre_rule(3, 2.0, 1.0).is_err());
    }

    #[test]
    fn exactness_up_to_degree() {
        // n-point rule integrates monomials up to degree 2n-1 on [a, b].
        for n in 1..=8 {
            let (nodes, weights) = gauss_legendre_rule(n, -0.3, 1.7).unwrap();
            for deg in 0..=(2 * n - 1) {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = (1.7f64.powi(deg as i32 + 1) - (-0.3f64).powi(deg as i32 + 1))
                    / (deg as f64 + 1.0);
                assert!(
                    (quad - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                    "n={n} deg={deg}: {quad} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let (_, w) = gauss_legendre_rule(5, 0.25, 0.75).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lobatto_nodes_basic() {
        let n = gauss_lobatto_nodes(2);
        assert_eq!(n, vec![0.0, 1.0]);
        let n = gauss_lobatto_nodes(3);
        assert!((n[1] - 0.5).abs() < 1e-15);
        // 5-node GLL on [0,1]: interior nodes (1 +- sqrt(3/7))/2.
        let n = gauss_lobatto_nodes(5);
        let a = 0.5 * (1.0 - (3.0f64 / 7.0).sqrt());
        assert!((n[1] - a).abs() < 1e-14, "{} vs {}", n[1], a);
    }

    #[test]
    fn grid_point_counts() {
        let g = build_grid(1, 32, 16, 1.0, 3, Boundary::Periodic).unwrap();
        assert_eq!(g.n_temporal_points(), 64);
        assert_eq!(g.n_spatial_points(), 128);
        let g = build_grid(2, 64, 16, 1.0, 3, Boundary::Neumann).unwrap();
        assert_eq!(g.n_temporal_points(), 64);
        assert_eq!(g.n_spatial_points(), 65536);
        assert!(build_grid(3, 8, 4, 1.0, 1, Boundary::Neumann).is_err());
    }

    #[test]
    fn degree_zero_weights() {
        let g = build_grid(1, 2, 1, 1.0, 0, Boundary::Neumann).unwrap();
        assert_eq!(g.quad.spatial_weights, vec![0.5, 0.5]);
    }

    #[test]
    fn integrate_constants() {
        let g = build_grid(2, 8, 4, 0.4, 2, Boundary::Neumann).unwrap();
        let ones = vec![1.0; g.n_spatial_points()];
        assert!((g.integrate_spatial(&ones).unwrap() - 1.0).abs() < 1e-13);
        let ones_st = vec![1.0; g.n_spacetime_points()];
        assert!((g.integrate_spacetime(&ones_st).unwrap() - 0.4).abs() < 1e-13);
        assert!(g.integrate_spatial(&ones_st).is_err());
    }

    #[test]
    fn integrate_resolves_cosine() {
        let g = build_grid(1, 32, 4, 1.0, 3, Boundary::Periodic).unwrap();
        let vals = g.sample_spatial(|x| 1.0 - 0.2 * (2.0 * std::f64::consts::PI * x[0]).cos());
        assert!((g.integrate_spatial(&vals).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_exactness_per_degree() {
        // Random per-axis polynomials of degree <= 2k+1 integrate exactly.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for k in 0..=4usize {
            let g = build_grid(2, 3, 2, 1.0, k, Boundary::Neumann).unwrap();
            let deg = 2 * k + 1;
            let cx: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cy: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let poly = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci);
            let vals = g.sample_spatial(|x| poly(&cx, x[0]) * poly(&cy, x[1]));
            // Exact integral: product of 1D monomial integrals over [0,1].
            let int1 = |c: &[f64]| -> f64 {
                c.iter()
                    .enumerate()
                    .map(|(i, ci)| ci / (i as f64 + 1.0))
                    .sum()
            };
            let exact = int1(&cx) * int1(&cy);
            let got = g.integrate_spatial(&vals).unwrap();
            assert!(
                (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                "k={k}: {got} vs {exact}"
            );
        }
    }
}
