//! SBP-SAT semi-discretization of the transformed acoustic wave equation on
//! curvilinear blocks.
//!
//! The transformed system is kept in skew-symmetric split form: the velocity
//! equations use the conservative transform, the pressure equation the
//! non-conservative one. Face penalties are scattered with explicit index
//! maps; the equivalence with the Kronecker-product formulas is covered by a
//! test.

use crate::geometry::MetricData;
use crate::sbp::SbpOperator1D;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use std::sync::Arc;

/// Constant material parameters.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub rho: f64,
    pub lambda: f64,
}

impl Material {
    pub fn new(rho: f64, lambda: f64) -> Self {
        assert!(rho > 0.0 && lambda > 0.0);
        Material { rho, lambda }
    }

    pub fn wave_speed(&self) -> f64 {
        (self.lambda / self.rho).sqrt()
    }

    /// Impedance as defined alongside the boundary treatment,
    /// `Z = sqrt(rho / lambda)`.
    pub fn impedance(&self) -> f64 {
        (self.rho / self.lambda).sqrt()
    }
}

/// Block face identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    West,
    East,
    South,
    North,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::West, Face::East, Face::South, Face::North];
}

/// One curvilinear finite difference block: operators per direction plus
/// metric data.
pub struct FdBlock {
    pub op1: Arc<SbpOperator1D>,
    pub op2: Arc<SbpOperator1D>,
    pub metrics: MetricData,
}

impl FdBlock {
    pub fn n1(&self) -> usize {
        self.op1.n_cells()
    }
    pub fn n2(&self) -> usize {
        self.op2.n_cells()
    }
    pub fn n_points(&self) -> usize {
        self.op1.n_points * self.op2.n_points
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.op1.n_points, self.op2.n_points)
    }

    /// Number of grid points along a face.
    pub fn face_len(&self, f: Face) -> usize {
        match f {
            Face::West | Face::East => self.op2.n_points,
            Face::South | Face::North => self.op1.n_points,
        }
    }

    /// Grid index of the `p`-th point along a face.
    pub fn face_index(&self, f: Face, p: usize) -> (usize, usize) {
        match f {
            Face::West => (0, p),
            Face::East => (self.n1(), p),
            Face::South => (p, 0),
            Face::North => (p, self.n2()),
        }
    }

    /// Norm diagonal along the face (the parallel direction).
    pub fn face_h(&self, f: Face) -> &Array1<f64> {
        match f {
            Face::West | Face::East => self.op2.h_diag(),
            Face::South | Face::North => self.op1.h_diag(),
        }
    }

    /// Norm weight perpendicular to the face at the face itself.
    pub fn perp_h(&self, f: Face) -> f64 {
        match f {
            Face::West => self.op1.h_diag()[0],
            Face::East => self.op1.h_diag()[self.n1()],
            Face::South => self.op2.h_diag()[0],
            Face::North => self.op2.h_diag()[self.n2()],
        }
    }

    pub fn extract_face(&self, field: &Array2<f64>, f: Face) -> Array1<f64> {
        let len = self.face_len(f);
        let mut out = Array1::zeros(len);
        for p in 0..len {
            let (k, l) = self.face_index(f, p);
            out[p] = field[[k, l]];
        }
        out
    }

    /// Pressure and outward-normal velocity traces along a face.
    pub fn face_traces(&self, state: &BlockState, f: Face) -> (Array1<f64>, Array1<f64>) {
        let fm = self.metrics.face(f);
        let p = self.extract_face(&state.p, f);
        let v1 = self.extract_face(&state.v1, f);
        let v2 = self.extract_face(&state.v2, f);
        let v = Array1::from_iter((0..p.len()).map(|i| fm.n1[i] * v1[i] + fm.n2[i] * v2[i]));
        (p, v)
    }
}

/// Fields of one block, shape `(n1+1, n2+1)`.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub v1: Array2<f64>,
    pub v2: Array2<f64>,
    pub p: Array2<f64>,
}

impl BlockState {
    pub fn zeros(shape: (usize, usize)) -> Self {
        BlockState {
            v1: Array2::zeros(shape),
            v2: Array2::zeros(shape),
            p: Array2::zeros(shape),
        }
    }

    pub fn fill_zero(&mut self) {
        self.v1.fill(0.0);
        self.v2.fill(0.0);
        self.p.fill(0.0);
    }
}

/// `out = D f` along the first (xi1) axis.
pub fn apply_d_axis0(op: &SbpOperator1D, f: &Array2<f64>, out: &mut Array2<f64>) {
    let (n1p, n2p) = f.dim();
    debug_assert_eq!(n1p, op.n_points);
    let w = op.closure_width;
    let q = op.boundary_order;
    let d_int = op.d_interior();
    let d_b = op.d_boundary();
    let fs = f.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    let row = |k: usize| &fs[k * n2p..(k + 1) * n2p];
    for k in 0..w {
        let (top, rest) = os.split_at_mut((k + 1) * n2p);
        let otop = &mut top[k * n2p..];
        let obot = &mut rest[(n1p - 1 - k) * n2p - (k + 1) * n2p..(n1p - k) * n2p - (k + 1) * n2p];
        otop.fill(0.0);
        obot.fill(0.0);
        for j in 0..(w + q) {
            let c = d_b[[k, j]];
            for (o, v) in otop.iter_mut().zip(row(j)) {
                *o += c * v;
            }
            for (o, v) in obot.iter_mut().zip(row(n1p - 1 - j)) {
                *o -= c * v;
            }
        }
    }
    for k in w..(n1p - w) {
        let orow = &mut os[k * n2p..(k + 1) * n2p];
        orow.fill(0.0);
        for (s, &c) in d_int.iter().enumerate() {
            for (o, v) in orow.iter_mut().zip(row(k - q + s)) {
                *o += c * v;
            }
        }
    }
}

/// `out = D f` along the second (xi2) axis.
pub fn apply_d_axis1(op: &SbpOperator1D, f: &Array2<f64>, out: &mut Array2<f64>) {
    let (n1p, n2p) = f.dim();
    debug_assert_eq!(n2p, op.n_points);
    let w = op.closure_width;
    let q = op.boundary_order;
    let sw = 2 * q + 1;
    let d_int = op.d_interior();
    let d_b = op.d_boundary();
    let fs = f.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    for k in 0..n1p {
        let frow = &fs[k * n2p..(k + 1) * n2p];
        let orow = &mut os[k * n2p..(k + 1) * n2p];
        for l in 0..w {
            let mut accl = 0.0;
            let mut accr = 0.0;
            for j in 0..(w + q) {
                let c = d_b[[l, j]];
                accl += c * frow[j];
                accr -= c * frow[n2p - 1 - j];
            }
            orow[l] = accl;
            orow[n2p - 1 - l] = accr;
        }
        for (win, o) in frow[w - q..].windows(sw).zip(orow[w..n2p - w].iter_mut()) {
            let mut acc = 0.0;
            for (v, c) in win.iter().zip(d_int.iter()) {
                acc += c * v;
            }
            *o = acc;
        }
    }
}

/// Scratch buffers for one block's volume evaluation.
pub struct BlockScratch {
    t1: Array2<f64>,
    t2: Array2<f64>,
    t3: Array2<f64>,
}

impl BlockScratch {
    pub fn new(shape: (usize, usize)) -> Self {
        BlockScratch {
            t1: Array2::zeros(shape),
            t2: Array2::zeros(shape),
            t3: Array2::zeros(shape),
        }
    }
}

/// Volume part of the semi-discretization (no penalties): writes the
/// skew-split derivative terms into `out`.
pub fn rhs_volume(
    block: &FdBlock,
    state: &BlockState,
    mat: &Material,
    out: &mut BlockState,
    scratch: &mut BlockScratch,
) {
    let m = &block.metrics;
    let shape = state.p.dim();
    assert_eq!(shape, block.shape(), "state shape mismatch");
    // velocity equations: dv_i = -(D1 (a_1i p) + D2 (a_2i p)) / (rho J)
    for i in 0..2 {
        scratch.t1.assign(&state.p);
        scratch.t1 *= &m.a[0][i];
        apply_d_axis0(&block.op1, &scratch.t1, &mut scratch.t2);
        scratch.t1.assign(&state.p);
        scratch.t1 *= &m.a[1][i];
        apply_d_axis1(&block.op2, &scratch.t1, &mut scratch.t3);
        let dst = if i == 0 { &mut out.v1 } else { &mut out.v2 };
        ndarray::azip!((d in dst, &a in &scratch.t2, &b in &scratch.t3, &j in &m.jac) {
            *d = -(a + b) / (mat.rho * j);
        });
    }
    // pressure equation:
    // dp = -lambda (a_11 D1 v1 + a_21 D2 v1 + a_12 D1 v2 + a_22 D2 v2) / J
    apply_d_axis0(&block.op1, &state.v1, &mut scratch.t1);
    ndarray::azip!((d in &mut out.p, &dv in &scratch.t1, &a in &m.a[0][0]) *d = a * dv);
    apply_d_axis1(&block.op2, &state.v1, &mut scratch.t1);
    ndarray::azip!((d in &mut out.p, &dv in &scratch.t1, &a in &m.a[1][0]) *d += a * dv);
    apply_d_axis0(&block.op1, &state.v2, &mut scratch.t1);
    ndarray::azip!((d in &mut out.p, &dv in &scratch.t1, &a in &m.a[0][1]) *d += a * dv);
    apply_d_axis1(&block.op2, &state.v2, &mut scratch.t1);
    ndarray::azip!((d in &mut out.p, &dv in &scratch.t1, &a in &m.a[1][1]) *d += a * dv);
    ndarray::azip!((d in &mut out.p, &j in &m.jac) *d *= -mat.lambda / j);
}

/// Exterior (zero-pressure) penalty: returns `(p* - p, v* - v)`.
pub fn boundary_penalty(
    p_face: &Array1<f64>,
    alpha: f64,
    mat: &Material,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    let z = mat.impedance();
    Ok((-p_face.clone(), p_face.mapv(|p| alpha * p / z)))
}

/// Conforming-interface penalty for the minus side: returns `(p* - p^-,
/// v* - v^-)` from the two-sided traces (normal velocities are each side's
/// own outward components).
pub fn conforming_penalty(
    p_minus: &Array1<f64>,
    v_minus: &Array1<f64>,
    p_plus: &Array1<f64>,
    v_plus: &Array1<f64>,
    alpha: f64,
    mat: &Material,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if p_minus.len() != p_plus.len() || v_minus.len() != v_plus.len() {
        return Err(Error::ShapeMismatch(format!(
            "conforming traces: {} vs {}",
            p_minus.len(),
            p_plus.len()
        )));
    }
    if alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    let z = mat.impedance();
    let n = p_minus.len();
    let mut dp = Array1::zeros(n);
    let mut dv = Array1::zeros(n);
    for i in 0..n {
        dp[i] = 0.5 * (p_plus[i] - p_minus[i]) + 0.5 * alpha * z * (v_plus[i] + v_minus[i]);
        dv[i] = -0.5 * (v_plus[i] + v_minus[i]) - 0.5 * alpha / z * (p_plus[i] - p_minus[i]);
    }
    Ok((dp, dv))
}

/// Accumulate one face's penalty into the block right-hand side. `dp` is
/// `p* - p`, `dv` is `v* - v` at the face points.
pub fn apply_face_penalty(
    block: &FdBlock,
    face: Face,
    dp: &Array1<f64>,
    dv: &Array1<f64>,
    mat: &Material,
    out: &mut BlockState,
) {
    let fm = block.metrics.face(face);
    let hp = block.perp_h(face);
    let len = block.face_len(face);
    debug_assert_eq!(dp.len(), len);
    for pidx in 0..len {
        let (k, l) = block.face_index(face, pidx);
        let j = block.metrics.jac[[k, l]];
        let c = fm.s_j[pidx] / hp;
        out.v1[[k, l]] -= c * fm.n1[pidx] * dp[pidx] / (mat.rho * j);
        out.v2[[k, l]] -= c * fm.n2[pidx] * dp[pidx] / (mat.rho * j);
        out.p[[k, l]] -= mat.lambda * c * dv[pidx] / j;
    }
}

/// Discrete block energy
/// `E = rho/2 v1' J H v1 + rho/2 v2' J H v2 + 1/(2 lambda) p' J H p`.
pub fn block_energy(block: &FdBlock, state: &BlockState, mat: &Material) -> f64 {
    let h1 = block.op1.h_diag();
    let h2 = block.op2.h_diag();
    let m = &block.metrics;
    let mut e = 0.0;
    for k in 0..block.op1.n_points {
        for l in 0..block.op2.n_points {
            let w = m.jac[[k, l]] * h1[k] * h2[l];
            let v1 = state.v1[[k, l]];
            let v2 = state.v2[[k, l]];
            let p = state.p[[k, l]];
            e += 0.5 * mat.rho * (v1 * v1 + v2 * v2) * w + 0.5 / mat.lambda * p * p * w;
        }
    }
    e
}

/// Edge dissipation rate of one face from its traces and starred values:
/// `D_K = -v' H S p* + v' H S p - (v*)' H S p`.
pub fn edge_dissipation(
    block: &FdBlock,
    face: Face,
    p_face: &Array1<f64>,
    v_face: &Array1<f64>,
    p_star: &Array1<f64>,
    v_star: &Array1<f64>,
) -> f64 {
    let h = block.face_h(face);
    let s = &block.metrics.face(face).s_j;
    let mut d = 0.0;
    for i in 0..p_face.len() {
        let hs = h[i] * s[i];
        d += -v_face[i] * hs * p_star[i] + v_face[i] * hs * p_face[i] - v_star[i] * hs * p_face[i];
    }
    d
}
