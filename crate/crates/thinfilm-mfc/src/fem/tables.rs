//! Per-cell basis tables for coupled-system assembly: for each spatial cell,
//! the local-to-global dof map plus dense tables of basis values and
//! derivatives at the cell's quadrature points. The tables are identical for
//! every cell of the uniform mesh; only the dof maps differ.

use super::factor::Dense;
use super::{RtSpace, ScalarSpace};

pub struct ScalarCellTables {
    pub cells: usize,
    pub nloc: usize,
    pub nq: usize,
    /// Basis values, (nq x nloc).
    pub val: Dense,
    /// Spatial gradients (physical scaling included), per axis.
    pub grad: Vec<Dense>,
    /// Per-cell global dofs (-1 = constrained).
    pub gdofs: Vec<Vec<isize>>,
    /// Per-cell global quadrature point indices.
    pub qps: Vec<Vec<usize>>,
    /// Local quadrature weights including the cell measure.
    pub wq: Vec<f64>,
}

impl ScalarCellTables {
    pub fn build(s: &ScalarSpace) -> ScalarCellTables {
        let nq1 = s.fx.nq();
        let nlx = s.fx.nloc();
        match &s.fy {
            None => {
                let mut gdofs = Vec::with_capacity(s.fx.cells);
                let mut qps = Vec::with_capacity(s.fx.cells);
                for c in 0..s.fx.cells {
                    gdofs.push((0..nlx).map(|j| s.fx.gdof(c, j)).collect());
                    qps.push((0..nq1).map(|q| c * nq1 + q).collect());
                }
                let mut gx = s.fx.b_der.clone();
                gx.scale(1.0 / s.hx);
                ScalarCellTables {
                    cells: s.fx.cells,
                    nloc: nlx,
                    nq: nq1,
                    val: s.fx.b_val.clone(),
                    grad: vec![gx],
                    gdofs,
                    qps,
                    wq: s.fx.wq_ref.iter().map(|w| w * s.hx).collect(),
                }
            }
            Some(fy) => {
                let nly = fy.nloc();
                let nloc = nlx * nly;
                let nq = nq1 * nq1;
                let nqy_tot = fy.cells * nq1;
                let nyd = fy.ndofs;
                let mut val = Dense::zeros(nq, nloc);
                let mut gx = Dense::zeros(nq, nloc);
                let mut gy = Dense::zeros(nq, nloc);
                let mut wq = vec![0.0; nq];
                for qx in 0..nq1 {
                    for qy in 0..nq1 {
                        let q = qx * nq1 + qy;
                        wq[q] = s.fx.wq_ref[qx] * fy.wq_ref[qy] * s.hx * s.hx;
                        for i in 0..nlx {
                            for j in 0..nly {
                                let l = i * nly + j;
                                *val.at_mut(q, l) = s.fx.b_val.at(qx, i) * fy.b_val.at(qy, j);
                                *gx.at_mut(q, l) =
                                    s.fx.b_der.at(qx, i) / s.hx * fy.b_val.at(qy, j);
                                *gy.at_mut(q, l) =
                                    s.fx.b_val.at(qx, i) * fy.b_der.at(qy, j) / s.hx;
                            }
                        }
                    }
                }
                let mut gdofs = Vec::with_capacity(s.fx.cells * fy.cells);
                let mut qps = Vec::with_capacity(s.fx.cells * fy.cells);
                for cx in 0..s.fx.cells {
                    for cy in 0..fy.cells {
                        let mut dofs = Vec::with_capacity(nloc);
                        for i in 0..nlx {
                            let gxd = s.fx.gdof(cx, i);
                            for j in 0..nly {
                                let gyd = fy.gdof(cy, j);
                                dofs.push(if gxd >= 0 && gyd >= 0 {
                                    gxd * nyd as isize + gyd
                                } else {
                                    -1
                                });
                            }
                        }
                        gdofs.push(dofs);
                        let mut q_idx = Vec::with_capacity(nq);
                        for qx in 0..nq1 {
                            for qy in 0..nq1 {
                                q_idx.push((cx * nq1 + qx) * nqy_tot + cy * nq1 + qy);
                            }
                        }
                        qps.push(q_idx);
                    }
                }
                ScalarCellTables {
                    cells: s.fx.cells * fy.cells,
                    nloc,
                    nq,
                    val,
                    grad: vec![gx, gy],
                    gdofs,
                    qps,
                    wq,
                }
            }
        }
    }
}

/// One component block of the RT cell tables.
pub struct RtCompTables {
    pub nloc: usize,
    /// Component values, (nq x nloc).
    pub val: Dense,
    /// Contribution to the divergence, (nq x nloc).
    pub div: Dense,
    /// Per-cell global dofs (component offset already applied; -1 constrained).
    pub gdofs: Vec<Vec<isize>>,
}

pub struct RtCellTables {
    pub cells: usize,
    pub nq: usize,
    pub comps: Vec<RtCompTables>,
    pub qps: Vec<Vec<usize>>,
    pub wq: Vec<f64>,
}

impl RtCellTables {
    pub fn build(s: &RtSpace) -> RtCellTables {
        let nq1 = s.fx_h.nq();
        if s.dim == 1 {
            let f = &s.fx_h;
            let mut div = f.b_der.clone();
            div.scale(1.0 / s.hx);
            let mut gdofs = Vec::with_capacity(f.cells);
            let mut qps = Vec::with_capacity(f.cells);
            for c in 0..f.cells {
                gdofs.push((0..f.nloc()).map(|j| f.gdof(c, j)).collect());
                qps.push((0..nq1).map(|q| c * nq1 + q).collect());
            }
            return RtCellTables {
                cells: f.cells,
                nq: nq1,
                comps: vec![RtCompTables {
                    nloc: f.nloc(),
                    val: f.b_val.clone(),
                    div,
                    gdofs,
                }],
                qps,
                wq: f.wq_ref.iter().map(|w| w * s.hx).collect(),
            };
        }
        let fy_l = s.fy_l.as_ref().unwrap();
        let fx_l = s.fx_l.as_ref().unwrap();
        let fy_h = s.fy_h.as_ref().unwrap();
        let cells = s.fx_h.cells * fy_h.cells;
        let nq = nq1 * nq1;
        let nqy_tot = fy_l.cells * nq1;
        let mut wq = vec![0.0; nq];
        for qx in 0..nq1 {
            for qy in 0..nq1 {
                wq[qx * nq1 + qy] = s.fx_h.wq_ref[qx] * fy_l.wq_ref[qy] * s.hx * s.hx;
            }
        }
        let build_comp = |fa: &super::factor::Factor1d,
                          fb: &super::factor::Factor1d,
                          div_on_x: bool,
                          offset: usize|
         -> RtCompTables {
            let nla = fa.nloc();
            let nlb = fb.nloc();
            let nloc = nla * nlb;
            let mut val = Dense::zeros(nq, nloc);
            let mut div = Dense::zeros(nq, nloc);
            for qx in 0..nq1 {
                for qy in 0..nq1 {
                    let q = qx * nq1 + qy;
                    for i in 0..nla {
                        for j in 0..nlb {
                            let l = i * nlb + j;
                            *val.at_mut(q, l) = fa.b_val.at(qx, i) * fb.b_val.at(qy, j);
                            *div.at_mut(q, l) = if div_on_x {
                                fa.b_der.at(qx, i) / s.hx * fb.b_val.at(qy, j)
                            } else {
                                fa.b_val.at(qx, i) * fb.b_der.at(qy, j) / s.hx
                            };
                        }
                    }
                }
            }
            let nbd = fb.ndofs;
            let mut gdofs = Vec::with_capacity(fa.cells * fb.cells);
            for cx in 0..fa.cells {
                for cy in 0..fb.cells {
                    let mut dofs = Vec::with_capacity(nloc);
                    for i in 0..nla {
                        let ga = fa.gdof(cx, i);
                        for j in 0..nlb {
                            let gb = fb.gdof(cy, j);
                            dofs.push(if ga >= 0 && gb >= 0 {
                                (offset + ga as usize * nbd + gb as usize) as isize
                            } else {
                                -1
                            });
                        }
                    }
                    gdofs.push(dofs);
                }
            }
            RtCompTables {
                nloc,
                val,
                div,
                gdofs,
            }
        };
        let comp0 = build_comp(&s.fx_h, fy_l, true, 0);
        let comp1 = build_comp(fx_l, fy_h, false, s.comp_dofs[0]);
        let mut qps = Vec::with_capacity(cells);
        for cx in 0..s.fx_h.cells {
            for cy in 0..fy_h.cells {
                let mut q_idx = Vec::with_capacity(nq);
                for qx in 0..nq1 {
                    for qy in 0..nq1 {
                        q_idx.push((cx * nq1 + qx) * nqy_tot + cy * nq1 + qy);
                    }
                }
                qps.push(q_idx);
            }
        }
        RtCellTables {
            cells,
            nq,
            comps: vec![comp0, comp1],
            qps,
            wq,
        }
    }
}
