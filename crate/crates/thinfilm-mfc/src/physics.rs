//! Model functions and functionals for the volatile thin film: mobilities,
//! wettability potential, dynamic pressure, surface energy, dissipation
//! functional, the control Hamiltonian densities, activity recovery and mass
//! diagnostics.

use crate::error::{Error, Result};
use crate::mesh::SpaceTimeGrid;

#[derive(Debug, Clone, Copy)]
pub struct PhysParams {
    /// Phase change rate (gamma >= 0; 0 switches off evaporation).
    pub gamma: f64,
    /// Kinetic parameter (K > 0).
    pub kin: f64,
    /// Surface-energy scale (alpha > 0).
    pub alpha: f64,
    /// Precursor scale (eps > 0).
    pub eps: f64,
    /// Temperature constant.
    pub p_star: f64,
    /// Strength of the uncontrolled dynamics inside the control constraint.
    pub beta: f64,
    /// Running potential weight (h log h density).
    pub c_f: f64,
    /// Terminal tracking weight.
    pub c_g: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            gamma: 0.04,
            kin: 0.1,
            alpha: 0.01,
            eps: 0.3,
            p_star: 0.5,
            beta: 0.01,
            c_f: 0.02,
            c_g: 0.05,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        if self.kin <= 0.0 || self.alpha <= 0.0 || self.eps <= 0.0 {
            return Err(Error::invalid("PhysParams: K, alpha, eps must be positive"));
        }
        if self.gamma < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid("PhysParams: gamma and beta must be >= 0"));
        }
        Ok(())
    }

    /// Mobilities V1 = h^3 and V2 = gamma / (h + K) with derivatives.
    pub fn mobility(&self, h: f64) -> Result<(f64, f64, f64, f64)> {
        if h < 0.0 {
            return Err(Error::domain(format!("mobility: negative height {h}")));
        }
        let v1 = h * h * h;
        let v1p = 3.0 * h * h;
        let denom = h + self.kin;
        let v2 = self.gamma / denom;
        let v2p = -self.gamma / (denom * denom);
        Ok((v1, v1p, v2, v2p))
    }

    /// Local free energy U(h) = (eps/h)^3/3 - (eps/h)^2/2 - P* h and its
    /// first two derivatives. U' = Pi(h) - P* with the disjoining pressure
    /// Pi(h) = eps^2/h^3 (1 - eps/h). Blows up as h -> 0+.
    pub fn potential(&self, h: f64) -> Result<(f64, f64, f64)> {
        if h <= 0.0 {
            return Err(Error::domain(format!("potential: nonpositive height {h}")));
        }
        let e = self.eps;
        let r = e / h;
        let u = r * r * r / 3.0 - r * r / 2.0 - self.p_star * h;
        let up = self.disjoining(h) - self.p_star;
        let h4 = h * h * h * h;
        let upp = -3.0 * e * e / h4 + 4.0 * e * e * e / (h4 * h);
        Ok((u, up, upp))
    }

    /// Third derivative of U, used by the pointwise primal optimality system.
    pub fn potential_d3(&self, h: f64) -> f64 {
        let e = self.eps;
        let h5 = h.powi(5);
        12.0 * e * e / h5 - 20.0 * e * e * e / (h5 * h)
    }

    pub fn disjoining(&self, h: f64) -> f64 {
        let e = self.eps;
        e * e / (h * h * h) * (1.0 - e / h)
    }

    /// Dynamic pressure P = U'(h) + p from the auxiliary variable p.
    pub fn pressure_from_aux(&self, h: f64, p: f64) -> Result<f64> {
        let (_, up, _) = self.potential(h)?;
        Ok(up + p)
    }

    /// grad P = (U''(h) n + q) / alpha from the auxiliary variables.
    pub fn grad_pressure_from_aux(&self, h: f64, n: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        let (_, _, upp) = self.potential(h)?;
        Ok(n.iter()
            .zip(q)
            .map(|(ni, qi)| (upp * ni + qi) / self.alpha)
            .collect())
    }
}

/// Surface energy E = <alpha^2/2 |grad h|^2 + U(h)> by spatial quadrature.
/// `grad_h` holds the gradient components back to back (dim * npts values).
pub fn energy_total(
    grid: &SpaceTimeGrid,
    params: &PhysParams,
    h: &[f64],
    grad_h: &[f64],
) -> Result<f64> {
    let npts = grid.n_spatial_points();
    let dim = grid.spatial.dim;
    if h.len() != npts || grad_h.len() != dim * npts {
        return Err(Error::invalid("energy_total: field length mismatch"));
    }
    let a2 = params.alpha * params.alpha;
    let mut density = vec![0.0; npts];
    for q in 0..npts {
        let mut g2 = 0.0;
        for d in 0..dim {
            let g = grad_h[d * npts + q];
            g2 += g * g;
        }
        let (u, _, _) = params.potential(h[q])?;
        density[q] = 0.5 * a2 * g2 + u;
    }
    grid.integrate_spatial(&density)
}

/// Generalized Fisher information I = <V1 |grad P|^2 + V2 |P|^2>.
pub fn fisher_info(
    grid: &SpaceTimeGrid,
    params: &PhysParams,
    h: &[f64],
    p_dyn: &[f64],
    grad_p: &[f64],
) -> Result<f64> {
    let npts = grid.n_spatial_points();
    let dim = grid.spatial.dim;
    if h.len() != npts || p_dyn.len() != npts || grad_p.len() != dim * npts {
        return Err(Error::invalid("fisher_info: field length mismatch"));
    }
    let mut density = vec![0.0; npts];
    for q in 0..npts {
        let (v1, _, v2, _) = params.mobility(h[q])?;
        let mut gp2 = 0.0;
        for d in 0..dim {
            let g = grad_p[d * npts + q];
            gp2 += g * g;
        }
        density[q] = v1 * gp2 + v2 * p_dyn[q] * p_dyn[q];
    }
    grid.integrate_spatial(&density)
}

/// Pointwise state of the running Hamiltonian: u = (h, m, s, n, p, q).
#[derive(Debug, Clone, Copy)]
pub struct HamState {
    pub h: f64,
    pub m: [f64; 2],
    pub s: f64,
    pub n: [f64; 2],
    pub p: f64,
    pub q: [f64; 2],
    pub dim: usize,
}

impl HamState {
    pub fn new_1d(h: f64, m: f64, s: f64, n: f64, p: f64, q: f64) -> Self {
        HamState {
            h,
            m: [m, 0.0],
            s,
            n: [n, 0.0],
            p,
            q: [q, 0.0],
            dim: 1,
        }
    }
}

/// Gradient of H with the same layout as the state.
#[derive(Debug, Clone, Copy, Default)]
pub struct HamGrad {
    pub h: f64,
    pub m: [f64; 2],
    pub s: f64,
    pub n: [f64; 2],
    pub p: f64,
    pub q: [f64; 2],
}

/// Running Hamiltonian density
/// H = |m|^2/(2 V1) + |s|^2/(2 V2) + beta^2/(2 alpha^2) |U'' n + q|^2 V1
///   + beta^2/2 |U' + p|^2 V2 + c_F h log h.
/// Infinite for h = 0 unless every singular term vanishes; for gamma = 0 the
/// s-terms are dropped entirely (s must be 0).
pub fn hamiltonian_h(u: &HamState, params: &PhysParams) -> Result<f64> {
    if u.h < 0.0 {
        return Err(Error::domain(format!("hamiltonian_h: negative height {}", u.h)));
    }
    let m2: f64 = u.m[..u.dim].iter().map(|v| v * v).sum();
    if u.h == 0.0 {
        let singular = m2 > 0.0 || u.s != 0.0 || params.beta > 0.0;
        return Ok(if singular { f64::INFINITY } else { 0.0 });
    }
    let (v1, _, v2, _) = params.mobility(u.h)?;
    let (_, up, upp) = params.potential(u.h)?;
    let mut h_val = m2 / (2.0 * v1);
    if params.gamma == 0.0 {
        if u.s != 0.0 {
            return Ok(f64::INFINITY);
        }
    } else {
        h_val += u.s * u.s / (2.0 * v2);
    }
    let b2 = params.beta * params.beta;
    if b2 > 0.0 {
        let mut nq2 = 0.0;
        for d in 0..u.dim {
            let t = upp * u.n[d] + u.q[d];
            nq2 += t * t;
        }
        h_val += b2 / (2.0 * params.alpha * params.alpha) * nq2 * v1;
        let pp = up + u.p;
        h_val += 0.5 * b2 * pp * pp * v2;
    }
    h_val += params.c_f * u.h * u.h.ln();
    Ok(h_val)
}

/// Analytic partial derivatives of H at a feasible point (h > 0).
pub fn hamiltonian_h_grad(u: &HamState, params: &PhysParams) -> Result<HamGrad> {
    if u.h <= 0.0 {
        return Err(Error::domain("hamiltonian_h_grad: need h > 0".to_string()));
    }
    let (v1, v1p, v2, v2p) = params.mobility(u.h)?;
    let (_, up, upp) = params.potential(u.h)?;
    let uppp = params.potential_d3(u.h);
    let mut g = HamGrad::default();
    let m2: f64 = u.m[..u.dim].iter().map(|v| v * v).sum();
    for d in 0..u.dim {
        g.m[d] = u.m[d] / v1;
    }
    let mut dh = -m2 / (2.0 * v1 * v1) * v1p;
    if params.gamma > 0.0 {
        g.s = u.s / v2;
        dh -= u.s * u.s / (2.0 * v2 * v2) * v2p;
    }
    let b2 = params.beta * params.beta;
    if b2 > 0.0 {
        let a2 = params.alpha * params.alpha;
        let mut nq2 = 0.0;
        let mut nq_dot_n = 0.0;
        for d in 0..u.dim {
            let t = upp * u.n[d] + u.q[d];
            nq2 += t * t;
            nq_dot_n += t * u.n[d];
            g.n[d] = b2 / a2 * t * upp * v1;
            g.q[d] = b2 / a2 * t * v1;
        }
        dh += b2 / (2.0 * a2) * (nq2 * v1p + 2.0 * nq_dot_n * uppp * v1);
        let pp = up + u.p;
        g.p = b2 * pp * v2;
        dh += 0.5 * b2 * (2.0 * pp * upp * v2 + pp * pp * v2p);
    }
    dh += params.c_f * (u.h.ln() + 1.0);
    g.h = dh;
    Ok(g)
}

/// Terminal Hamiltonian density
/// H_T = beta (U(h_T) + |n_T|^2/2) + c_G h_T (log(h_T / h_target) - 1).
pub fn hamiltonian_ht(
    h_t: f64,
    n_t: &[f64],
    h_target: f64,
    params: &PhysParams,
) -> Result<f64> {
    if h_t <= 0.0 || h_target <= 0.0 {
        return Err(Error::domain(format!(
            "hamiltonian_ht: nonpositive height {h_t} or target {h_target}"
        )));
    }
    let (u, _, _) = params.potential(h_t)?;
    let n2: f64 = n_t.iter().map(|v| v * v).sum();
    Ok(params.beta * (u + 0.5 * n2) + params.c_g * h_t * ((h_t / h_target).ln() - 1.0))
}

/// Partial derivatives of H_T: (d/dh_T, d/dn_T components).
pub fn hamiltonian_ht_grad(
    h_t: f64,
    n_t: &[f64],
    h_target: f64,
    params: &PhysParams,
) -> Result<(f64, Vec<f64>)> {
    if h_t <= 0.0 || h_target <= 0.0 {
        return Err(Error::domain("hamiltonian_ht_grad: need positive heights".to_string()));
    }
    let (_, up, _) = params.potential(h_t)?;
    let dh = params.beta * up + params.c_g * (h_t / h_target).ln();
    let dn: Vec<f64> = n_t.iter().map(|v| params.beta * v).collect();
    Ok((dh, dn))
}

/// Activity field zeta = (beta (U'(h) + p) + phi) / h at quadrature points.
pub fn recover_activity(
    params: &PhysParams,
    h: &[f64],
    p: &[f64],
    phi: &[f64],
) -> Result<Vec<f64>> {
    if h.len() != p.len() || h.len() != phi.len() {
        return Err(Error::invalid("recover_activity: length mismatch"));
    }
    let mut zeta = vec![0.0; h.len()];
    for i in 0..h.len() {
        if h[i] <= 0.0 {
            return Err(Error::domain(format!(
                "recover_activity: nonpositive height {} at point {i}",
                h[i]
            )));
        }
        let (_, up, _) = params.potential(h[i])?;
        zeta[i] = (params.beta * (up + p[i]) + phi[i]) / h[i];
    }
    Ok(zeta)
}

/// Total mass M = <h> and its rate of change due to the non-mass-conserving
/// terms of the controlled dynamics, gamma <(zeta h - beta P) / (K + h)>.
/// The beta factor carries the rescaling of the dynamics strength used by
/// the control formulation; with beta = 1 this is the plain evaporation
/// balance of the uncontrolled model.
pub fn mass_and_rate(
    grid: &SpaceTimeGrid,
    params: &PhysParams,
    h: &[f64],
    p_dyn: &[f64],
    zeta: &[f64],
) -> Result<(f64, f64)> {
    let mass = grid.integrate_spatial(h)?;
    let mut density = vec![0.0; h.len()];
    for i in 0..h.len() {
        density[i] = params.gamma * (zeta[i] * h[i] - params.beta * p_dyn[i])
            / (params.kin + h[i]);
    }
    let rate = grid.integrate_spatial(&density)?;
    Ok((mass, rate))
}
