//! Scenario assembly, time integration, error measurement, energy tracing,
//! and global-operator spectra.

use crate::coupling::{
    build_interface, DgMemberSpec, FdMemberSpec, InterfaceSpec, MemberSpec, ParticipantKind,
};
use crate::dg::mesh::{build_domain, DgDomain, EdgeConn};
use crate::dg::{self, EdgeFlux};
use crate::fd::{
    apply_face_penalty, block_energy, boundary_penalty, conforming_penalty, rhs_volume,
    BlockScratch, BlockState, Face, FdBlock, Material,
};
use crate::geometry::{
    metrics_for_block, CurvedLeft, CurvedRight, CurvedRightBottom, CurvedRightTop,
};
use crate::glue::projection_coefficients;
use crate::sbp::build_sbp;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use std::sync::Arc;

/// The standing-wave reference solution of the free-surface problem on
/// `[-1,1]^2` with unit material parameters.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolution {
    pub k1: f64,
    pub k2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl Default for ExactSolution {
    fn default() -> Self {
        let k1 = std::f64::consts::FRAC_PI_2;
        let k2 = std::f64::consts::PI;
        ExactSolution {
            k1,
            k2,
            omega1: k1 * (2.0f64).sqrt(),
            omega2: k2 * (2.0f64).sqrt(),
        }
    }
}

impl ExactSolution {
    pub fn p(&self, x1: f64, x2: f64, t: f64) -> f64 {
        (self.omega1 * t).cos() * (self.k1 * x1).cos() * (self.k1 * x2).cos()
            + (self.omega2 * t).cos() * (self.k2 * x1).sin() * (self.k2 * x2).sin()
    }

    pub fn v1(&self, x1: f64, x2: f64, t: f64) -> f64 {
        self.k1 / self.omega1 * (self.omega1 * t).sin() * (self.k1 * x1).sin() * (self.k1 * x2).cos()
            - self.k2 / self.omega2
                * (self.omega2 * t).sin()
                * (self.k2 * x1).cos()
                * (self.k2 * x2).sin()
    }

    pub fn v2(&self, x1: f64, x2: f64, t: f64) -> f64 {
        self.k1 / self.omega1 * (self.omega1 * t).sin() * (self.k1 * x1).cos() * (self.k1 * x2).sin()
            - self.k2 / self.omega2
                * (self.omega2 * t).sin()
                * (self.k2 * x1).sin()
                * (self.k2 * x2).cos()
    }
}

/// The coupling arrangements reproduced by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    TwoBlockConforming,
    TwoBlockNested,
    TwoBlockUnnested,
    ThreeBlockNested,
    ThreeBlockUnnested,
    SbpDg,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::TwoBlockConforming,
        Scenario::TwoBlockNested,
        Scenario::TwoBlockUnnested,
        Scenario::ThreeBlockNested,
        Scenario::ThreeBlockUnnested,
        Scenario::SbpDg,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::TwoBlockConforming => "two-block-conforming",
            Scenario::TwoBlockNested => "two-block-nested",
            Scenario::TwoBlockUnnested => "two-block-unnested",
            Scenario::ThreeBlockNested => "three-block-nested",
            Scenario::ThreeBlockUnnested => "three-block-unnested",
            Scenario::SbpDg => "sbp-dg",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .iter()
            .find(|sc| sc.name() == s)
            .copied()
            .ok_or_else(|| Error::ConfigParse(format!("unknown scenario '{s}'")))
    }
}

/// One run of the harness.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub q: usize,
    pub n: usize,
    pub alpha: f64,
    pub t_final: f64,
    pub dt: Option<f64>,
}

/// System state: per-block fields plus optional DG fields
/// (`(n_elements, n_nodes)` arrays).
#[derive(Debug, Clone)]
pub struct SystemState {
    pub blocks: Vec<BlockState>,
    pub dg: Option<DgState>,
}

#[derive(Debug, Clone)]
pub struct DgState {
    pub v1: Array2<f64>,
    pub v2: Array2<f64>,
    pub p: Array2<f64>,
}

impl SystemState {
    fn fill_zero(&mut self) {
        for b in &mut self.blocks {
            b.fill_zero();
        }
        if let Some(d) = &mut self.dg {
            d.v1.fill(0.0);
            d.v2.fill(0.0);
            d.p.fill(0.0);
        }
    }

    fn assign(&mut self, other: &SystemState) {
        for (a, b) in self.blocks.iter_mut().zip(other.blocks.iter()) {
            a.v1.assign(&b.v1);
            a.v2.assign(&b.v2);
            a.p.assign(&b.p);
        }
        if let (Some(a), Some(b)) = (self.dg.as_mut(), other.dg.as_ref()) {
            a.v1.assign(&b.v1);
            a.v2.assign(&b.v2);
            a.p.assign(&b.p);
        }
    }

    fn scaled_add(&mut self, c: f64, other: &SystemState) {
        for (a, b) in self.blocks.iter_mut().zip(other.blocks.iter()) {
            a.v1.scaled_add(c, &b.v1);
            a.v2.scaled_add(c, &b.v2);
            a.p.scaled_add(c, &b.p);
        }
        if let (Some(a), Some(b)) = (self.dg.as_mut(), other.dg.as_ref()) {
            a.v1.scaled_add(c, &b.v1);
            a.v2.scaled_add(c, &b.v2);
            a.p.scaled_add(c, &b.p);
        }
    }

    fn is_finite(&self) -> bool {
        let ok_arr = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
        self.blocks
            .iter()
            .all(|b| ok_arr(&b.v1) && ok_arr(&b.v2) && ok_arr(&b.p))
            && self
                .dg
                .as_ref()
                .map_or(true, |d| ok_arr(&d.v1) && ok_arr(&d.v2) && ok_arr(&d.p))
    }
}

enum FaceRole {
    Boundary,
    /// conforming interface: the paired block/face
    Conforming { other: usize, other_face: Face },
    /// nonconforming: handled through interface `idx`, participant
    /// `(side, member)`
    Glue,
}

/// A fully assembled coupled system with `du/dt = rhs(u)`.
pub struct CoupledSystem {
    pub material: Material,
    pub alpha: f64,
    pub blocks: Vec<FdBlock>,
    pub dg: Option<DgDomain>,
    face_roles: Vec<[FaceRole; 4]>,
    interfaces: Vec<InterfaceSpec>,
    pub dt_suggest: f64,
    pub exact: ExactSolution,
}

fn face_slot(f: Face) -> usize {
    match f {
        Face::West => 0,
        Face::East => 1,
        Face::South => 2,
        Face::North => 3,
    }
}

/// Build the coupled system of a run configuration.
pub fn build_scenario(cfg: &RunConfig) -> Result<CoupledSystem> {
    if cfg.alpha < 0.0 {
        return Err(Error::NegativeAlpha(cfg.alpha));
    }
    let mat = Material::new(1.0, 1.0);
    let n = cfg.n;
    if n % 2 != 0 || n < 8 {
        return Err(Error::ConfigParse(format!(
            "base resolution N must be even and >= 8, got {n}"
        )));
    }
    let q = cfg.q;
    let coeffs = if cfg.scenario == Scenario::TwoBlockConforming {
        None
    } else {
        Some(projection_coefficients(q, false)?)
    };

    let left = FdBlock {
        op1: Arc::new(build_sbp(q, n / 2)?),
        op2: Arc::new(build_sbp(q, n)?),
        metrics: metrics_for_block(&CurvedLeft, n / 2, n)?,
    };

    let mut blocks = vec![left];
    let mut face_roles: Vec<[FaceRole; 4]> = Vec::new();
    let mut interfaces = Vec::new();
    let mut dg_domain = None;

    let all_boundary = || {
        [
            FaceRole::Boundary,
            FaceRole::Boundary,
            FaceRole::Boundary,
            FaceRole::Boundary,
        ]
    };

    match cfg.scenario {
        Scenario::TwoBlockConforming => {
            let right = FdBlock {
                op1: Arc::new(build_sbp(q, n / 2)?),
                op2: Arc::new(build_sbp(q, n)?),
                metrics: metrics_for_block(&CurvedRight, n / 2, n)?,
            };
            blocks.push(right);
            let mut roles0 = all_boundary();
            roles0[face_slot(Face::East)] = FaceRole::Conforming {
                other: 1,
                other_face: Face::West,
            };
            let mut roles1 = all_boundary();
            roles1[face_slot(Face::West)] = FaceRole::Conforming {
                other: 0,
                other_face: Face::East,
            };
            face_roles.push(roles0);
            face_roles.push(roles1);
        }
        Scenario::TwoBlockNested | Scenario::TwoBlockUnnested => {
            let m = if cfg.scenario == Scenario::TwoBlockNested {
                2 * n
            } else {
                2 * n + 1
            };
            let right = FdBlock {
                op1: Arc::new(build_sbp(q, m / 2)?),
                op2: Arc::new(build_sbp(q, m)?),
                metrics: metrics_for_block(&CurvedRight, m / 2, m)?,
            };
            let coeffs = coeffs.clone().unwrap();
            let iface = build_interface(
                vec![MemberSpec::Fd(FdMemberSpec {
                    block: 0,
                    face: Face::East,
                    beta_lo: -1.0,
                    beta_hi: 1.0,
                    op: blocks[0].op2.clone(),
                    s_j: blocks[0].metrics.face(Face::East).s_j.clone(),
                    coeffs: coeffs.clone(),
                })],
                vec![MemberSpec::Fd(FdMemberSpec {
                    block: 1,
                    face: Face::West,
                    beta_lo: -1.0,
                    beta_hi: 1.0,
                    op: right.op2.clone(),
                    s_j: right.metrics.face(Face::West).s_j.clone(),
                    coeffs,
                })],
            )?;
            blocks.push(right);
            interfaces.push(iface);
            let mut roles0 = all_boundary();
            roles0[face_slot(Face::East)] = FaceRole::Glue;
            let mut roles1 = all_boundary();
            roles1[face_slot(Face::West)] = FaceRole::Glue;
            face_roles.push(roles0);
            face_roles.push(roles1);
        }
        Scenario::ThreeBlockNested | Scenario::ThreeBlockUnnested => {
            let m = if cfg.scenario == Scenario::ThreeBlockNested {
                n
            } else {
                n + 1
            };
            let bottom = FdBlock {
                op1: Arc::new(build_sbp(q, n)?),
                op2: Arc::new(build_sbp(q, m)?),
                metrics: metrics_for_block(&CurvedRightBottom, n, m)?,
            };
            let top = FdBlock {
                op1: Arc::new(build_sbp(q, n)?),
                op2: Arc::new(build_sbp(q, m)?),
                metrics: metrics_for_block(&CurvedRightTop, n, m)?,
            };
            let coeffs = coeffs.clone().unwrap();
            let iface = build_interface(
                vec![MemberSpec::Fd(FdMemberSpec {
                    block: 0,
                    face: Face::East,
                    beta_lo: -1.0,
                    beta_hi: 1.0,
                    op: blocks[0].op2.clone(),
                    s_j: blocks[0].metrics.face(Face::East).s_j.clone(),
                    coeffs: coeffs.clone(),
                })],
                vec![
                    MemberSpec::Fd(FdMemberSpec {
                        block: 1,
                        face: Face::West,
                        beta_lo: -1.0,
                        beta_hi: 0.0,
                        op: bottom.op2.clone(),
                        s_j: bottom.metrics.face(Face::West).s_j.clone(),
                        coeffs: coeffs.clone(),
                    }),
                    MemberSpec::Fd(FdMemberSpec {
                        block: 2,
                        face: Face::West,
                        beta_lo: 0.0,
                        beta_hi: 1.0,
                        op: top.op2.clone(),
                        s_j: top.metrics.face(Face::West).s_j.clone(),
                        coeffs,
                    }),
                ],
            )?;
            blocks.push(bottom);
            blocks.push(top);
            interfaces.push(iface);
            let mut roles0 = all_boundary();
            roles0[face_slot(Face::East)] = FaceRole::Glue;
            // bottom: north face meets top's south face conformally
            let mut roles1 = all_boundary();
            roles1[face_slot(Face::West)] = FaceRole::Glue;
            roles1[face_slot(Face::North)] = FaceRole::Conforming {
                other: 2,
                other_face: Face::South,
            };
            let mut roles2 = all_boundary();
            roles2[face_slot(Face::West)] = FaceRole::Glue;
            roles2[face_slot(Face::South)] = FaceRole::Conforming {
                other: 1,
                other_face: Face::North,
            };
            face_roles.push(roles0);
            face_roles.push(roles1);
            face_roles.push(roles2);
        }
        Scenario::SbpDg => {
            // base mesh matched to N=64 dof density, refined hierarchically
            let (e2, refinements) = if n >= 64 && (n / 64).is_power_of_two() && n % 64 == 0 {
                (64usize.div_ceil(q + 1), (n / 64).trailing_zeros() as usize)
            } else {
                (n.div_ceil(q + 1), 0)
            };
            let dom = build_domain(q, e2, refinements)?;
            let coeffs = coeffs.clone().unwrap();
            // interface members: DG edges sorted along the interface
            let mut dg_members: Vec<(f64, MemberSpec)> = Vec::new();
            for (t, e) in dom.mesh.interface_edges() {
                let (eta_a, eta_b) = dom.mesh.edge_eta[t][e].unwrap();
                let (lo, hi) = (eta_a.min(eta_b), eta_a.max(eta_b));
                let eta_points = Array1::from_iter(
                    dom.rt
                        .edge_quad_t
                        .iter()
                        .map(|&tq| eta_a + 0.5 * (1.0 + tq) * (eta_b - eta_a)),
                );
                dg_members.push((
                    lo,
                    MemberSpec::Dg(DgMemberSpec {
                        elem: t,
                        edge: e,
                        eta_lo: lo,
                        eta_hi: hi,
                        eta_points,
                        s_j: dom.elements[t].edge_s_j[e].clone(),
                        quad_w: dom.rt.edge_quad_w.clone(),
                        order: q,
                    }),
                ));
            }
            dg_members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let iface = build_interface(
                vec![MemberSpec::Fd(FdMemberSpec {
                    block: 0,
                    face: Face::East,
                    beta_lo: -1.0,
                    beta_hi: 1.0,
                    op: blocks[0].op2.clone(),
                    s_j: blocks[0].metrics.face(Face::East).s_j.clone(),
                    coeffs,
                })],
                dg_members.into_iter().map(|(_, m)| m).collect(),
            )?;
            interfaces.push(iface);
            dg_domain = Some(dom);
            let mut roles0 = all_boundary();
            roles0[face_slot(Face::East)] = FaceRole::Glue;
            face_roles.push(roles0);
        }
    }

    // time step: FD from the smallest physical spacing, DG from the smallest
    // inscribed-circle diameter scaled by q^2
    let c = mat.wave_speed();
    let mut dt = f64::INFINITY;
    for b in &blocks {
        let (n1p, n2p) = b.shape();
        let mut hmin = f64::INFINITY;
        for k in 0..n1p {
            for l in 0..n2p {
                if k + 1 < n1p {
                    let dx = b.metrics.x1[[k + 1, l]] - b.metrics.x1[[k, l]];
                    let dy = b.metrics.x2[[k + 1, l]] - b.metrics.x2[[k, l]];
                    hmin = hmin.min((dx * dx + dy * dy).sqrt());
                }
                if l + 1 < n2p {
                    let dx = b.metrics.x1[[k, l + 1]] - b.metrics.x1[[k, l]];
                    let dy = b.metrics.x2[[k, l + 1]] - b.metrics.x2[[k, l]];
                    hmin = hmin.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        dt = dt.min(0.25 * hmin / c);
    }
    if let Some(dom) = &dg_domain {
        dt = dt.min(0.25 * dom.h_min / (c * (q * q) as f64));
    }

    Ok(CoupledSystem {
        material: mat,
        alpha: cfg.alpha,
        blocks,
        dg: dg_domain,
        face_roles,
        interfaces,
        dt_suggest: dt,
        exact: ExactSolution::default(),
    })
}

/// Reusable buffers for one right-hand-side evaluation.
pub struct SystemScratch {
    per_block: Vec<BlockScratch>,
    /// per DG element and edge: (pressure, normal velocity) traces
    dg_traces: Vec<[(Array1<f64>, Array1<f64>); 3]>,
}

impl CoupledSystem {
    pub fn interfaces(&self) -> &[InterfaceSpec] {
        &self.interfaces
    }

    pub fn new_state(&self) -> SystemState {
        SystemState {
            blocks: self.blocks.iter().map(|b| BlockState::zeros(b.shape())).collect(),
            dg: self.dg.as_ref().map(|d| {
                let ne = d.mesh.n_elements();
                let np = d.rt.n_nodes;
                DgState {
                    v1: Array2::zeros((ne, np)),
                    v2: Array2::zeros((ne, np)),
                    p: Array2::zeros((ne, np)),
                }
            }),
        }
    }

    pub fn new_scratch(&self) -> SystemScratch {
        let n_e = self.dg.as_ref().map_or(0, |d| d.rt.edge_quad_t.len());
        SystemScratch {
            per_block: self.blocks.iter().map(|b| BlockScratch::new(b.shape())).collect(),
            dg_traces: self
                .dg
                .as_ref()
                .map(|d| {
                    vec![
                        std::array::from_fn(|_| (Array1::zeros(n_e), Array1::zeros(n_e)));
                        d.mesh.n_elements()
                    ]
                })
                .unwrap_or_default(),
        }
    }

    /// Set the state to the exact solution at time `t`.
    pub fn set_exact(&self, state: &mut SystemState, t: f64) {
        for (b, st) in self.blocks.iter().zip(state.blocks.iter_mut()) {
            let (n1p, n2p) = b.shape();
            for k in 0..n1p {
                for l in 0..n2p {
                    let (x1, x2) = (b.metrics.x1[[k, l]], b.metrics.x2[[k, l]]);
                    st.v1[[k, l]] = self.exact.v1(x1, x2, t);
                    st.v2[[k, l]] = self.exact.v2(x1, x2, t);
                    st.p[[k, l]] = self.exact.p(x1, x2, t);
                }
            }
        }
        if let (Some(dom), Some(dst)) = (self.dg.as_ref(), state.dg.as_mut()) {
            for (e, el) in dom.elements.iter().enumerate() {
                for k in 0..dom.rt.n_nodes {
                    let (x1, x2) = (el.node_coords[[k, 0]], el.node_coords[[k, 1]]);
                    dst.v1[[e, k]] = self.exact.v1(x1, x2, t);
                    dst.v2[[e, k]] = self.exact.v2(x1, x2, t);
                    dst.p[[e, k]] = self.exact.p(x1, x2, t);
                }
            }
        }
    }

    /// Full right-hand side `du/dt = rhs(u)`.
    pub fn rhs(
        &self,
        state: &SystemState,
        out: &mut SystemState,
        scratch: &mut SystemScratch,
    ) -> Result<()> {
        let mat = &self.material;
        let alpha = self.alpha;

        // DG edge traces (needed for fluxes and glue exchange)
        if let (Some(dom), Some(dst)) = (self.dg.as_ref(), state.dg.as_ref()) {
            let rt = &dom.rt;
            scratch
                .dg_traces
                .par_iter_mut()
                .enumerate()
                .for_each(|(t, traces)| {
                    let el = &dom.elements[t];
                    let v1 = dst.v1.row(t).to_owned();
                    let v2 = dst.v2.row(t).to_owned();
                    let p = dst.p.row(t).to_owned();
                    for e in 0..3 {
                        traces[e].0 = el.edge_pressure(rt, &p, e);
                        traces[e].1 = el.edge_normal_velocity(rt, &v1, &v2, e);
                    }
                });
        }

        // nonconforming interfaces: gather traces, exchange, collect penalties
        let mut fd_pen: Vec<[Option<(Array1<f64>, Array1<f64>)>; 4]> =
            (0..self.blocks.len()).map(|_| std::array::from_fn(|_| None)).collect();
        let mut dg_flux: Vec<[Option<EdgeFlux>; 3]> = self
            .dg
            .as_ref()
            .map(|d| (0..d.mesh.n_elements()).map(|_| std::array::from_fn(|_| None)).collect())
            .unwrap_or_default();

        for iface in &self.interfaces {
            let gather = |parts: &[crate::coupling::Participant]| -> Vec<(Array1<f64>, Array1<f64>)> {
                parts
                    .iter()
                    .map(|p| match p.kind {
                        ParticipantKind::FdFace { block, face } => {
                            self.blocks[block].face_traces(&state.blocks[block], face)
                        }
                        ParticipantKind::DgEdge { elem, edge } => {
                            scratch.dg_traces[elem][edge].clone()
                        }
                    })
                    .collect()
            };
            let tr_m = gather(&iface.minus);
            let tr_p = gather(&iface.plus);
            let (out_m, out_p) = iface.exchange(alpha, mat, &tr_m, &tr_p)?;
            for pen in out_m.into_iter().chain(out_p.into_iter()) {
                match pen.kind {
                    ParticipantKind::FdFace { block, face } => {
                        fd_pen[block][face_slot(face)] = Some((pen.dp, pen.dv));
                    }
                    ParticipantKind::DgEdge { elem, edge } => {
                        dg_flux[elem][edge] = Some(EdgeFlux {
                            p_star: pen.dp,
                            v_star_minus_v: pen.dv,
                        });
                    }
                }
            }
        }

        // conforming interfaces and boundaries
        for (b, roles) in self.face_roles.iter().enumerate() {
            for face in Face::ALL {
                match &roles[face_slot(face)] {
                    FaceRole::Glue => {
                        debug_assert!(fd_pen[b][face_slot(face)].is_some());
                    }
                    FaceRole::Boundary => {
                        let (p_f, _) = self.blocks[b].face_traces(&state.blocks[b], face);
                        let pen = boundary_penalty(&p_f, alpha, mat)?;
                        fd_pen[b][face_slot(face)] = Some(pen);
                    }
                    FaceRole::Conforming { other, other_face } => {
                        let (p_m, v_m) = self.blocks[b].face_traces(&state.blocks[b], face);
                        let (p_p, v_p) =
                            self.blocks[*other].face_traces(&state.blocks[*other], *other_face);
                        let pen = conforming_penalty(&p_m, &v_m, &p_p, &v_p, alpha, mat)?;
                        fd_pen[b][face_slot(face)] = Some(pen);
                    }
                }
            }
        }

        // block right-hand sides
        self.blocks
            .par_iter()
            .zip(state.blocks.par_iter())
            .zip(out.blocks.par_iter_mut())
            .zip(scratch.per_block.par_iter_mut())
            .zip(fd_pen.par_iter())
            .for_each(|((((block, st), o), sc), pens)| {
                rhs_volume(block, st, mat, o, sc);
                for face in Face::ALL {
                    let (dp, dv) = pens[face_slot(face)].as_ref().expect("face resolved");
                    apply_face_penalty(block, face, dp, dv, mat, o);
                }
            });

        // DG right-hand sides
        if let (Some(dom), Some(dst), Some(dout)) =
            (self.dg.as_ref(), state.dg.as_ref(), out.dg.as_mut())
        {
            let rt = &dom.rt;
            let traces = &scratch.dg_traces;
            let flux_ref = &dg_flux;
            let nel = dom.mesh.n_elements();
            let (ov1, ov2, op) = (&mut dout.v1, &mut dout.v2, &mut dout.p);
            // zip the three output field rows elementwise
            ndarray::Zip::indexed(ov1.rows_mut())
                .and(ov2.rows_mut())
                .and(op.rows_mut())
                .par_for_each(|t, mut r1, mut r2, mut rp| {
                    let el = &dom.elements[t];
                    let v1 = dst.v1.row(t).to_owned();
                    let v2 = dst.v2.row(t).to_owned();
                    let p = dst.p.row(t).to_owned();
                    let n_e = rt.edge_quad_t.len();
                    let fluxes: [EdgeFlux; 3] = std::array::from_fn(|e| {
                        if let Some(f) = &flux_ref[t][e] {
                            EdgeFlux {
                                p_star: f.p_star.clone(),
                                v_star_minus_v: f.v_star_minus_v.clone(),
                            }
                        } else {
                            match dom.mesh.conn[t][e] {
                                EdgeConn::Boundary => {
                                    dg::dg_boundary_flux(&traces[t][e].0, alpha, mat)
                                }
                                EdgeConn::Interior { elem, edge } => {
                                    let rev = |a: &Array1<f64>| {
                                        Array1::from_iter(a.iter().rev().cloned())
                                    };
                                    let (pp, vp) = (
                                        rev(&traces[elem][edge].0),
                                        rev(&traces[elem][edge].1),
                                    );
                                    dg::dg_dg_flux(
                                        &traces[t][e].0,
                                        &traces[t][e].1,
                                        &pp,
                                        &vp,
                                        alpha,
                                        mat,
                                    )
                                    .expect("matched edge lengths")
                                }
                                EdgeConn::Interface => unreachable!("interface flux missing"),
                            }
                        }
                    });
                    let _ = n_e;
                    let mut d1 = Array1::zeros(rt.n_nodes);
                    let mut d2 = Array1::zeros(rt.n_nodes);
                    let mut dp = Array1::zeros(rt.n_nodes);
                    dg::dg_rhs(rt, el, &v1, &v2, &p, mat, &fluxes, (&mut d1, &mut d2, &mut dp));
                    r1.assign(&d1);
                    r2.assign(&d2);
                    rp.assign(&dp);
                });
            let _ = nel;
        }
        Ok(())
    }

    /// Total discrete energy.
    pub fn energy(&self, state: &SystemState) -> f64 {
        let mut e = 0.0;
        for (b, st) in self.blocks.iter().zip(state.blocks.iter()) {
            e += block_energy(b, st, &self.material);
        }
        if let (Some(dom), Some(dst)) = (self.dg.as_ref(), state.dg.as_ref()) {
            for (t, el) in dom.elements.iter().enumerate() {
                e += el.energy(
                    &dst.v1.row(t).to_owned(),
                    &dst.v2.row(t).to_owned(),
                    &dst.p.row(t).to_owned(),
                    &self.material,
                );
            }
        }
        e
    }

    /// Energy-norm error against the exact solution at time `t`, with the
    /// per-field contributions `(v1, v2, p)`.
    pub fn error(&self, state: &SystemState, t: f64) -> (f64, [f64; 3]) {
        let mut acc = [0.0f64; 3];
        let mat = &self.material;
        for (b, st) in self.blocks.iter().zip(state.blocks.iter()) {
            let h1 = b.op1.h_diag();
            let h2 = b.op2.h_diag();
            let (n1p, n2p) = b.shape();
            for k in 0..n1p {
                for l in 0..n2p {
                    let w = b.metrics.jac[[k, l]] * h1[k] * h2[l];
                    let (x1, x2) = (b.metrics.x1[[k, l]], b.metrics.x2[[k, l]]);
                    let d1 = st.v1[[k, l]] - self.exact.v1(x1, x2, t);
                    let d2 = st.v2[[k, l]] - self.exact.v2(x1, x2, t);
                    let dp = st.p[[k, l]] - self.exact.p(x1, x2, t);
                    acc[0] += 0.5 * mat.rho * d1 * d1 * w;
                    acc[1] += 0.5 * mat.rho * d2 * d2 * w;
                    acc[2] += 0.5 / mat.lambda * dp * dp * w;
                }
            }
        }
        if let (Some(dom), Some(dst)) = (self.dg.as_ref(), state.dg.as_ref()) {
            for (te, el) in dom.elements.iter().enumerate() {
                let np = dom.rt.n_nodes;
                let mut d1 = Array1::zeros(np);
                let mut d2 = Array1::zeros(np);
                let mut dp = Array1::zeros(np);
                for k in 0..np {
                    let (x1, x2) = (el.node_coords[[k, 0]], el.node_coords[[k, 1]]);
                    d1[k] = dst.v1[[te, k]] - self.exact.v1(x1, x2, t);
                    d2[k] = dst.v2[[te, k]] - self.exact.v2(x1, x2, t);
                    dp[k] = dst.p[[te, k]] - self.exact.p(x1, x2, t);
                }
                acc[0] += 0.5 * mat.rho * d1.dot(&el.m_j.dot(&d1));
                acc[1] += 0.5 * mat.rho * d2.dot(&el.m_j.dot(&d2));
                acc[2] += 0.5 / mat.lambda * dp.dot(&el.m_j.dot(&dp));
            }
        }
        ((acc[0] + acc[1] + acc[2]).sqrt(), acc)
    }

    /// Total number of unknowns.
    pub fn dof_count(&self) -> usize {
        let fd: usize = self.blocks.iter().map(|b| 3 * b.n_points()).sum();
        let dg = self
            .dg
            .as_ref()
            .map_or(0, |d| 3 * d.mesh.n_elements() * d.rt.n_nodes);
        fd + dg
    }

    /// Pack a state into a flat vector (blocks then DG, `v1, v2, p` per part).
    pub fn pack(&self, state: &SystemState, out: &mut Array1<f64>) {
        let mut idx = 0;
        for st in &state.blocks {
            for f in [&st.v1, &st.v2, &st.p] {
                for v in f.iter() {
                    out[idx] = *v;
                    idx += 1;
                }
            }
        }
        if let Some(d) = &state.dg {
            for f in [&d.v1, &d.v2, &d.p] {
                for v in f.iter() {
                    out[idx] = *v;
                    idx += 1;
                }
            }
        }
        debug_assert_eq!(idx, self.dof_count());
    }

    pub fn unpack(&self, v: &Array1<f64>, state: &mut SystemState) {
        let mut idx = 0;
        for st in &mut state.blocks {
            for f in [&mut st.v1, &mut st.v2, &mut st.p] {
                for x in f.iter_mut() {
                    *x = v[idx];
                    idx += 1;
                }
            }
        }
        if let Some(d) = &mut state.dg {
            for f in [&mut d.v1, &mut d.v2, &mut d.p] {
                for x in f.iter_mut() {
                    *x = v[idx];
                    idx += 1;
                }
            }
        }
    }

    /// Diagonal weights of the energy quadratic form in packed order
    /// (`E = 1/2 u' W u`).
    pub fn energy_weights(&self) -> Array1<f64> {
        let mut w = Array1::zeros(self.dof_count());
        let mut idx = 0;
        let mat = &self.material;
        for b in &self.blocks {
            let h1 = b.op1.h_diag();
            let h2 = b.op2.h_diag();
            let (n1p, n2p) = b.shape();
            for field in 0..3 {
                let c = if field < 2 { mat.rho } else { 1.0 / mat.lambda };
                for k in 0..n1p {
                    for l in 0..n2p {
                        w[idx] = c * b.metrics.jac[[k, l]] * h1[k] * h2[l];
                        idx += 1;
                    }
                }
            }
        }
        // DG blocks are not diagonal; they are handled separately in the
        // spectrum checks through the full M_J form.
        w
    }

    /// Apply the energy inner product `u' W v` (including DG mass blocks).
    pub fn energy_product(&self, u: &SystemState, v: &SystemState) -> f64 {
        let mat = &self.material;
        let mut acc = 0.0;
        for (b, (su, sv)) in self.blocks.iter().zip(u.blocks.iter().zip(v.blocks.iter())) {
            let h1 = b.op1.h_diag();
            let h2 = b.op2.h_diag();
            let (n1p, n2p) = b.shape();
            for k in 0..n1p {
                for l in 0..n2p {
                    let w = b.metrics.jac[[k, l]] * h1[k] * h2[l];
                    acc += mat.rho * su.v1[[k, l]] * sv.v1[[k, l]] * w;
                    acc += mat.rho * su.v2[[k, l]] * sv.v2[[k, l]] * w;
                    acc += su.p[[k, l]] * sv.p[[k, l]] * w / mat.lambda;
                }
            }
        }
        if let (Some(dom), Some(du), Some(dv)) = (self.dg.as_ref(), u.dg.as_ref(), v.dg.as_ref()) {
            for (t, el) in dom.elements.iter().enumerate() {
                let q = |a: &Array2<f64>, b: &Array2<f64>| {
                    a.row(t).dot(&el.m_j.dot(&b.row(t).to_owned()))
                };
                acc += mat.rho * q(&du.v1, &dv.v1);
                acc += mat.rho * q(&du.v2, &dv.v2);
                acc += q(&du.p, &dv.p) / mat.lambda;
            }
        }
        acc
    }
}

/// One classical RK4 step on a plain vector (the reference implementation
/// the system-level stepper is checked against).
pub fn rk4_step_vec(u: &mut Array1<f64>, dt: f64, mut f: impl FnMut(&Array1<f64>) -> Array1<f64>) {
    let k1 = f(u);
    let k2 = f(&(&*u + &(0.5 * dt * &k1)));
    let k3 = f(&(&*u + &(0.5 * dt * &k2)));
    let k4 = f(&(&*u + &(dt * &k3)));
    *u += &((dt / 6.0) * (&k1 + &(2.0 * &k2) + &(2.0 * &k3) + &k4));
}

/// Classical four-stage Runge-Kutta advance to `t_final`; returns the number
/// of steps taken.
pub fn rk4_advance(
    sys: &CoupledSystem,
    state: &mut SystemState,
    dt: f64,
    t_final: f64,
    mut on_sample: Option<&mut dyn FnMut(f64, &SystemState)>,
) -> Result<usize> {
    assert!(dt > 0.0);
    let n_steps = (t_final / dt).ceil().max(1.0) as usize;
    let dt = t_final / n_steps as f64;
    let mut scratch = sys.new_scratch();
    let mut k1 = sys.new_state();
    let mut k2 = sys.new_state();
    let mut k3 = sys.new_state();
    let mut k4 = sys.new_state();
    let mut tmp = sys.new_state();
    if let Some(cb) = on_sample.as_deref_mut() {
        cb(0.0, state);
    }
    for step in 0..n_steps {
        let t = step as f64 * dt;
        sys.rhs(state, &mut k1, &mut scratch)?;
        tmp.assign(state);
        tmp.scaled_add(0.5 * dt, &k1);
        sys.rhs(&tmp, &mut k2, &mut scratch)?;
        tmp.assign(state);
        tmp.scaled_add(0.5 * dt, &k2);
        sys.rhs(&tmp, &mut k3, &mut scratch)?;
        tmp.assign(state);
        tmp.scaled_add(dt, &k3);
        sys.rhs(&tmp, &mut k4, &mut scratch)?;
        state.scaled_add(dt / 6.0, &k1);
        state.scaled_add(dt / 3.0, &k2);
        state.scaled_add(dt / 3.0, &k3);
        state.scaled_add(dt / 6.0, &k4);
        if !state.is_finite() {
            return Err(Error::NonFiniteState(t + dt));
        }
        if let Some(cb) = on_sample.as_deref_mut() {
            cb(t + dt, state);
        }
    }
    Ok(n_steps)
}

/// Result of one simulation run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub error: f64,
    pub error_fields: [f64; 3],
    pub dt: f64,
    pub steps: usize,
    pub energy: Vec<(f64, f64)>,
    pub dofs: usize,
}

/// Run a configuration from the exact initial condition to `t_final`,
/// sampling the energy along the way.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunResult> {
    let sys = build_scenario(cfg)?;
    let mut state = sys.new_state();
    sys.set_exact(&mut state, 0.0);
    let dt = cfg.dt.unwrap_or(sys.dt_suggest);
    let n_steps_planned = (cfg.t_final / dt).ceil().max(1.0) as usize;
    let sample_every = (n_steps_planned / 200).max(1);
    let mut energy = Vec::new();
    let mut count = 0usize;
    let steps = {
        let mut cb = |t: f64, s: &SystemState| {
            if count % sample_every == 0 || t >= cfg.t_final {
                energy.push((t, sys.energy(s)));
            }
            count += 1;
        };
        rk4_advance(&sys, &mut state, dt, cfg.t_final, Some(&mut cb))?
    };
    let (error, error_fields) = sys.error(&state, cfg.t_final);
    Ok(RunResult {
        error,
        error_fields,
        dt: cfg.t_final / steps as f64,
        steps,
        energy,
        dofs: sys.dof_count(),
    })
}

/// Convergence study: errors and successive rates over doublings of `n`.
pub fn convergence_study(
    base: &RunConfig,
    levels: usize,
) -> Result<Vec<(usize, f64, Option<f64>)>> {
    let mut out: Vec<(usize, f64, Option<f64>)> = Vec::new();
    for lv in 0..levels {
        let n = base.n << lv;
        let cfg = RunConfig {
            n,
            ..base.clone()
        };
        let res = run_simulation(&cfg)?;
        let rate = out.last().map(|(pn, pe, _)| {
            (res.error.ln() - pe.ln()) / ((*pn as f64).ln() - (n as f64).ln())
        });
        out.push((n, res.error, rate));
    }
    Ok(out)
}

/// Assemble the dense operator `A` with `du/dt = A u` by applying the
/// right-hand side to unit vectors. Linearity is verified on random vectors.
pub fn assemble_global_operator(sys: &CoupledSystem) -> Result<Array2<f64>> {
    const GUARD: usize = 40_000;
    let n = sys.dof_count();
    if n > GUARD {
        return Err(Error::SystemTooLarge(n, GUARD));
    }
    let cols: Vec<Array1<f64>> = (0..n)
        .into_par_iter()
        .map_init(
            || (sys.new_state(), sys.new_state(), sys.new_scratch(), Array1::zeros(n)),
            |(state, out, scratch, packed), j| {
                state.fill_zero();
                let mut e = Array1::zeros(n);
                e[j] = 1.0;
                sys.unpack(&e, state);
                sys.rhs(state, out, scratch).expect("rhs");
                sys.pack(out, packed);
                packed.clone()
            },
        )
        .collect();
    let mut a = Array2::zeros((n, n));
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            a[[i, j]] = col[i];
        }
    }

    // linearity spot check: A(u+v) = Au + Av on generic dense data
    {
        let u = Array1::from_iter((0..n).map(|i| (3.7 * i as f64 + 0.5).sin()));
        let v = Array1::from_iter((0..n).map(|i| (2.3 * i as f64).cos()));
        let mut st = sys.new_state();
        let mut out = sys.new_state();
        let mut sc = sys.new_scratch();
        let mut apply = |x: &Array1<f64>| -> Array1<f64> {
            sys.unpack(x, &mut st);
            sys.rhs(&st, &mut out, &mut sc).expect("rhs");
            let mut p = Array1::zeros(n);
            sys.pack(&out, &mut p);
            p
        };
        let fu = apply(&u);
        let fv = apply(&v);
        let fuv = apply(&(&u + &v));
        let resid = (&fuv - &fu - &fv)
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        let scale = fu.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
        if resid > 1e-12 * scale {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side is not linear: residual {resid:.3e}"
            )));
        }
    }
    Ok(a)
}

/// Eigenvalues of the assembled operator, sorted by real part then imaginary
/// part.
pub fn operator_spectrum(a: &Array2<f64>) -> Vec<num_complex::Complex64> {
    use ndarray_linalg::Eig;
    let (eigs, _) = a.eig().expect("eigendecomposition");
    let mut v: Vec<num_complex::Complex64> = eigs.to_vec();
    v.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    v
}
