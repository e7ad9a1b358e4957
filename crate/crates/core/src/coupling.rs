//! Interface assembly and the runtime trace exchange across a glue grid.
//!
//! Every interface participant (a finite difference face or a DG edge) owns a
//! projection pair onto its portion of a shared glue space. At each
//! evaluation the participants push surface-Jacobian-scaled traces to the
//! glue, starred values are formed there from both sides, and each
//! participant pulls its penalty (or numerical flux) back. Finite difference
//! participants carry the projection-error correction term; DG edges do not
//! need one because their round trip through the glue is exact.

use crate::fd::{Face, Material};
use crate::glue::{self, GlueSpace, ProjectionCoefficients};
use crate::poly::{gauss_legendre, legendre, legendre_vandermonde};
use crate::sbp::SbpOperator1D;
use crate::{Error, Result};
use ndarray::{Array1, Array2, s};
use ndarray_linalg::Inverse;
use std::ops::Range;
use std::sync::Arc;

/// Row-compressed sparse matrix for the banded projection operators (the
/// composed matrices are dense containers with mostly structural zeros).
#[derive(Debug, Clone)]
pub struct SparseMat {
    shape: (usize, usize),
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseMat {
    pub fn from_dense(a: &Array2<f64>) -> Self {
        let (m, n) = a.dim();
        let rows = (0..m)
            .map(|i| {
                a.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j as u32, *v))
                    .collect()
            })
            .collect();
        SparseMat { shape: (m, n), rows }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn dot(&self, x: &Array1<f64>) -> Array1<f64> {
        debug_assert_eq!(x.len(), self.shape.1);
        let xs = x.as_slice().expect("contiguous");
        Array1::from_iter(self.rows.iter().map(|row| {
            row.iter().map(|&(j, v)| v * xs[j as usize]).sum::<f64>()
        }))
    }

    /// `y = self * x[range]` without materializing the slice.
    pub fn dot_slice(&self, x: &Array1<f64>, offset: usize) -> Array1<f64> {
        let xs = x.as_slice().expect("contiguous");
        Array1::from_iter(self.rows.iter().map(|row| {
            row.iter()
                .map(|&(j, v)| v * xs[offset + j as usize])
                .sum::<f64>()
        }))
    }
}

/// What a participant is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticipantKind {
    FdFace { block: usize, face: Face },
    DgEdge { elem: usize, edge: usize },
}

/// One member of an interface side, ready for runtime exchange.
pub struct Participant {
    pub kind: ParticipantKind,
    pub delta: f64,
    /// `sqrt(S_J / delta)` at the face/edge points
    pub scale: Array1<f64>,
    /// scaled trace -> glue modal coefficients of `dof_range`
    pub p_f2g: Array2<f64>,
    /// glue modal coefficients of `dof_range` -> face/edge values
    pub p_g2f: Array2<f64>,
    f2g_sparse: SparseMat,
    g2f_sparse: SparseMat,
    pub dof_range: Range<usize>,
    /// finite difference members include the projection-error term
    pub projection_error_term: bool,
}

impl Participant {
    pub fn new(
        kind: ParticipantKind,
        delta: f64,
        scale: Array1<f64>,
        p_f2g: Array2<f64>,
        p_g2f: Array2<f64>,
        dof_range: Range<usize>,
        projection_error_term: bool,
    ) -> Self {
        Participant {
            kind,
            delta,
            scale,
            f2g_sparse: SparseMat::from_dense(&p_f2g),
            g2f_sparse: SparseMat::from_dense(&p_g2f),
            p_f2g,
            p_g2f,
            dof_range,
            projection_error_term,
        }
    }
}

/// Specification of a finite difference member: a block face covering
/// `[beta_lo, beta_hi]` of the interface parameter.
pub struct FdMemberSpec {
    pub block: usize,
    pub face: Face,
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// the face-parallel 1-D operator
    pub op: Arc<SbpOperator1D>,
    /// surface Jacobian at the face points
    pub s_j: Array1<f64>,
    pub coeffs: Arc<ProjectionCoefficients>,
}

/// Specification of a DG edge member over `[eta_lo, eta_hi]`.
pub struct DgMemberSpec {
    pub elem: usize,
    pub edge: usize,
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// interface parameter of each edge quadrature point
    pub eta_points: Array1<f64>,
    /// surface Jacobian at the edge quadrature points
    pub s_j: Array1<f64>,
    /// reference edge quadrature weights (sum = reference edge length 2)
    pub quad_w: Array1<f64>,
    /// DG polynomial order
    pub order: usize,
}

pub enum MemberSpec {
    Fd(FdMemberSpec),
    Dg(DgMemberSpec),
}

impl MemberSpec {
    fn span(&self) -> (f64, f64) {
        match self {
            MemberSpec::Fd(m) => (m.beta_lo, m.beta_hi),
            MemberSpec::Dg(m) => (m.eta_lo, m.eta_hi),
        }
    }
}

/// A fully assembled nonconforming interface.
pub struct InterfaceSpec {
    pub common: GlueSpace,
    pub minus: Vec<Participant>,
    pub plus: Vec<Participant>,
}

/// Penalty output for one participant. For an FD face the fields are the
/// differences `(p* - p, v* - v)`; for a DG edge they are `(p*, v* - v)`.
pub struct PenaltyOut {
    pub kind: ParticipantKind,
    pub dp: Array1<f64>,
    pub dv: Array1<f64>,
}

fn check_tiling(specs: &[MemberSpec], name: &str) -> Result<()> {
    let tol = 1e-10;
    if specs.is_empty() {
        return Err(Error::PartitionMismatch(format!("{name} side empty")));
    }
    let (lo, _) = specs[0].span();
    if (lo + 1.0).abs() > tol {
        return Err(Error::PartitionMismatch(format!(
            "{name} side starts at {lo}"
        )));
    }
    for w in specs.windows(2) {
        let (_, hi0) = w[0].span();
        let (lo1, _) = w[1].span();
        if (hi0 - lo1).abs() > tol {
            return Err(Error::PartitionMismatch(format!(
                "{name} side gap at {hi0}"
            )));
        }
    }
    let (_, hi) = specs.last().unwrap().span();
    if (hi - 1.0).abs() > tol {
        return Err(Error::PartitionMismatch(format!("{name} side ends at {hi}")));
    }
    Ok(())
}

/// Assemble an interface: build the finest common glue over `[-1, 1]` from
/// both sides' members, then compose every member's projection onto it.
pub fn build_interface(minus: Vec<MemberSpec>, plus: Vec<MemberSpec>) -> Result<InterfaceSpec> {
    check_tiling(&minus, "minus")?;
    check_tiling(&plus, "plus")?;
    let tol = 1e-12;

    // pass 1: realize FD members on their own glue, collect breakpoints/order
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut order = 0usize;
    let mut own_pairs: Vec<Option<glue::ProjectionPair>> = Vec::new();
    for m in minus.iter().chain(plus.iter()) {
        match m {
            MemberSpec::Fd(f) => {
                let pair = glue::realize_pair(&f.coeffs, &f.op, f.beta_lo, f.beta_hi);
                breakpoints.extend(pair.target_space.breakpoints.iter().cloned());
                order = order.max(f.coeffs.params.n);
                own_pairs.push(Some(pair));
            }
            MemberSpec::Dg(d) => {
                breakpoints.push(d.eta_lo);
                breakpoints.push(d.eta_hi);
                order = order.max(d.order);
                own_pairs.push(None);
            }
        }
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let n_int = breakpoints.len() - 1;
    let common = GlueSpace::new(breakpoints, vec![order; n_int]);

    // pass 2: compose per member
    let n_minus = minus.len();
    let mut participants = Vec::with_capacity(own_pairs.len());
    for (idx, m) in minus.iter().chain(plus.iter()).enumerate() {
        let part = match m {
            MemberSpec::Fd(f) => {
                let pair = own_pairs[idx].as_ref().unwrap();
                let (sub, dof_range) = common.restrict(f.beta_lo, f.beta_hi, tol)?;
                let (a2b, b2a) = glue::glue_to_glue(&pair.target_space, &sub)?;
                let delta = pair.delta;
                let scale = f.s_j.mapv(|s| (s / delta).sqrt());
                let p_f2g = a2b.dot(&pair.p_f2g);
                let p_g2f = pair.p_g2f.dot(&b2a);
                Participant {
                    kind: ParticipantKind::FdFace {
                        block: f.block,
                        face: f.face,
                    },
                    delta,
                    scale,
                    f2g_sparse: SparseMat::from_dense(&p_f2g),
                    g2f_sparse: SparseMat::from_dense(&p_g2f),
                    p_f2g,
                    p_g2f,
                    dof_range,
                    projection_error_term: true,
                }
            }
            MemberSpec::Dg(d) => build_dg_participant(d, &common)?,
        };
        participants.push(part);
    }
    let plus_parts = participants.split_off(n_minus);
    Ok(InterfaceSpec {
        common,
        minus: participants,
        plus: plus_parts,
    })
}

/// Build a DG edge participant directly on the common glue restriction.
///
/// The edge trace is a polynomial of degree `order` known at the quadrature
/// points; it is L2-fitted on the edge with the quadrature inner product,
/// expanded on the glue intervals, and the reverse map is fixed by the
/// compatibility relation with `Omega_bc`.
fn build_dg_participant(d: &DgMemberSpec, common: &GlueSpace) -> Result<Participant> {
    let tol = 1e-12;
    let (sub, dof_range) = common.restrict(d.eta_lo, d.eta_hi, tol)?;
    let glue_order = *sub.orders.iter().min().unwrap();
    if glue_order < d.order {
        return Err(Error::GlueOrderTooLow {
            glue: glue_order,
            dg: d.order,
            interior: 0,
        });
    }
    let n_e = d.eta_points.len();
    let np1 = d.order + 1;
    // edge-local coordinate of the quadrature points
    let sigma = d
        .eta_points
        .mapv(|eta| (2.0 * eta - d.eta_lo - d.eta_hi) / (d.eta_hi - d.eta_lo));
    let v = legendre_vandermonde(&sigma, d.order);
    // G = V' Omega V
    let mut g = Array2::zeros((np1, np1));
    for a in 0..n_e {
        for i in 0..np1 {
            for j in 0..np1 {
                g[[i, j]] += v[[a, i]] * d.quad_w[a] * v[[a, j]];
            }
        }
    }
    let g_inv = g.inv().map_err(|_| Error::SingularMass)?;
    // W[(interval dof), m] = integral over the interval of chi * psi_m
    let (xg, wg) = gauss_legendre(glue_order + d.order + 2);
    let mut w = Array2::zeros((sub.n_dofs(), np1));
    for k in 0..sub.n_intervals() {
        let (lo, hi) = sub.interval(k);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for i in 0..=sub.orders[k] {
            for m in 0..np1 {
                let mut acc = 0.0;
                for (t, wq) in xg.iter().zip(wg.iter()) {
                    let eta = mid + half * t;
                    let sg = (2.0 * eta - d.eta_lo - d.eta_hi) / (d.eta_hi - d.eta_lo);
                    acc += wq * legendre(i, *t) * legendre(m, sg);
                }
                w[[sub.dof_offset(k) + i, m]] = acc * half;
            }
        }
    }
    let delta = 0.5 * (d.eta_hi - d.eta_lo); // reference edge length is 2
    // P_f2g = M^{-1} W G^{-1} V' Omega ; P_g2f = delta^{-1} V G^{-1} W'
    let gv = g_inv.dot(&v.t()); // (np1, n_e)
    let mut gv_om = gv.clone();
    for a in 0..n_e {
        let mut col = gv_om.slice_mut(s![.., a]);
        col *= d.quad_w[a];
    }
    let mut p_f2g = w.dot(&gv_om);
    for (r, mut row) in p_f2g.outer_iter_mut().enumerate() {
        row.mapv_inplace(|x| x / sub.mass[r]);
    }
    let p_g2f = v.dot(&g_inv).dot(&w.t()).mapv(|x| x / delta);

    // exactness of the round trip on degree-`order` traces
    let mut worst = 0.0f64;
    for deg in 0..=d.order {
        let trace = sigma.mapv(|s| legendre(deg, s));
        let rt = p_g2f.dot(&p_f2g.dot(&trace));
        for (a, b) in rt.iter().zip(trace.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst > 1e-10 {
        return Err(Error::QuadratureTooCoarse(worst));
    }

    let scale = d.s_j.mapv(|s| (s / delta).sqrt());
    Ok(Participant {
        kind: ParticipantKind::DgEdge {
            elem: d.elem,
            edge: d.edge,
        },
        delta,
        scale,
        f2g_sparse: SparseMat::from_dense(&p_f2g),
        g2f_sparse: SparseMat::from_dense(&p_g2f),
        p_f2g,
        p_g2f,
        dof_range,
        projection_error_term: false,
    })
}

impl InterfaceSpec {
    pub fn n_glue_dofs(&self) -> usize {
        self.common.n_dofs()
    }

    /// Project one side's raw traces (pressure, normal velocity per
    /// participant) to stacked glue vectors.
    pub fn glue_side(
        side: &[Participant],
        traces: &[(Array1<f64>, Array1<f64>)],
        n_dofs: usize,
    ) -> (Array1<f64>, Array1<f64>) {
        let mut pbar = Array1::zeros(n_dofs);
        let mut vbar = Array1::zeros(n_dofs);
        for (part, (p, v)) in side.iter().zip(traces.iter()) {
            let sp = &part.scale * p;
            let sv = &part.scale * v;
            pbar
                .slice_mut(s![part.dof_range.clone()])
                .assign(&part.f2g_sparse.dot(&sp));
            vbar
                .slice_mut(s![part.dof_range.clone()])
                .assign(&part.f2g_sparse.dot(&sv));
        }
        (pbar, vbar)
    }

    /// Run the full exchange: traces in, penalties/fluxes out (one entry per
    /// participant per side; see [`PenaltyOut`] for the semantics).
    pub fn exchange(
        &self,
        alpha: f64,
        mat: &Material,
        minus_traces: &[(Array1<f64>, Array1<f64>)],
        plus_traces: &[(Array1<f64>, Array1<f64>)],
    ) -> Result<(Vec<PenaltyOut>, Vec<PenaltyOut>)> {
        if alpha < 0.0 {
            return Err(Error::NegativeAlpha(alpha));
        }
        if minus_traces.len() != self.minus.len() || plus_traces.len() != self.plus.len() {
            return Err(Error::ShapeMismatch("participant count".into()));
        }
        let n = self.n_glue_dofs();
        let (pbar_m, vbar_m) = Self::glue_side(&self.minus, minus_traces, n);
        let (pbar_p, vbar_p) = Self::glue_side(&self.plus, plus_traces, n);
        let z = mat.impedance();

        // starred differences on the glue, per side
        let mut dbar_p_m = Array1::zeros(n);
        let mut dbar_v_m = Array1::zeros(n);
        let mut dbar_p_p = Array1::zeros(n);
        let mut dbar_v_p = Array1::zeros(n);
        for i in 0..n {
            let pjump = 0.5 * (pbar_p[i] - pbar_m[i]);
            let vsum = 0.5 * (vbar_p[i] + vbar_m[i]);
            dbar_p_m[i] = pjump + alpha * z * vsum;
            dbar_v_m[i] = -vsum - alpha / z * pjump;
            dbar_p_p[i] = -pjump + alpha * z * vsum;
            dbar_v_p[i] = -vsum + alpha / z * pjump;
        }

        let back = |side: &[Participant],
                    traces: &[(Array1<f64>, Array1<f64>)],
                    dbar_p: &Array1<f64>,
                    dbar_v: &Array1<f64>,
                    pbar: &Array1<f64>,
                    vbar: &Array1<f64>|
         -> Vec<PenaltyOut> {
            side.iter()
                .zip(traces.iter())
                .map(|(part, (p, v))| {
                    let off = part.dof_range.start;
                    let inv = part.scale.mapv(|s| 1.0 / s);
                    let back_dp = &inv * &part.g2f_sparse.dot_slice(dbar_p, off);
                    let back_dv = &inv * &part.g2f_sparse.dot_slice(dbar_v, off);
                    let rt_p = &inv * &part.g2f_sparse.dot_slice(pbar, off);
                    let rt_v = &inv * &part.g2f_sparse.dot_slice(vbar, off);
                    if part.projection_error_term {
                        PenaltyOut {
                            kind: part.kind,
                            dp: back_dp + 0.5 * (&rt_p - p),
                            dv: back_dv + 0.5 * (&rt_v - v),
                        }
                    } else {
                        // DG: return (p*, v* - v)
                        PenaltyOut {
                            kind: part.kind,
                            dp: back_dp + rt_p,
                            dv: back_dv,
                        }
                    }
                })
                .collect()
        };
        let out_m = back(
            &self.minus,
            minus_traces,
            &dbar_p_m,
            &dbar_v_m,
            &pbar_m,
            &vbar_m,
        );
        let out_p = back(
            &self.plus,
            plus_traces,
            &dbar_p_p,
            &dbar_v_p,
            &pbar_p,
            &vbar_p,
        );
        Ok((out_m, out_p))
    }

    /// The interface dissipation quadratic form
    /// `-alpha Z/2 (vbar- + vbar+)' M (vbar- + vbar+)
    ///  -alpha/(2Z) (pbar- - pbar+)' M (pbar- - pbar+)`.
    pub fn dissipation_form(
        &self,
        alpha: f64,
        mat: &Material,
        minus_traces: &[(Array1<f64>, Array1<f64>)],
        plus_traces: &[(Array1<f64>, Array1<f64>)],
    ) -> f64 {
        let n = self.n_glue_dofs();
        let (pbar_m, vbar_m) = Self::glue_side(&self.minus, minus_traces, n);
        let (pbar_p, vbar_p) = Self::glue_side(&self.plus, plus_traces, n);
        let z = mat.impedance();
        let mut d = 0.0;
        for i in 0..n {
            let vs = vbar_m[i] + vbar_p[i];
            let pd = pbar_m[i] - pbar_p[i];
            d += -0.5 * alpha * z * vs * self.common.mass[i] * vs
                - 0.5 * alpha / z * pd * self.common.mass[i] * pd;
        }
        d
    }
}
