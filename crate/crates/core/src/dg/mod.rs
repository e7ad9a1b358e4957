//! Nodal discontinuous Galerkin method on (curved) triangles for the acoustic
//! system, sharing the numerical-flux structure of the SBP-SAT penalties.
//!
//! The reference element is the bi-unit right triangle with an orthonormal
//! Koornwinder-Dubiner modal basis and warp-and-blend interpolation nodes.
//! Volume integrals use a collapsed-coordinate Gauss cubature (positive
//! weights, exact to degree `2q + 2`); edge integrals use Gauss quadrature
//! exact to degree `2q + 3`. Elements adjacent to a curved interface are
//! deformed by transfinite blending of the edge toward the analytic curve,
//! with metric terms differentiated in closed form.

pub mod mesh;

use crate::fd::Material;
use crate::poly::{gauss_jacobi, gauss_legendre, gauss_lobatto, legendre};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::Inverse;

/// Orthonormal 1-D Jacobi polynomial `\hat P_n^{(a,b)}(x)`.
pub fn jacobi_normalized(n: usize, a: f64, b: f64, x: f64) -> f64 {
    crate::poly::jacobi(n, a, b, x) / jacobi_norm(n, a, b)
}

fn gamma_ratio_norm(n: usize, a: f64, b: f64) -> f64 {
    // gamma_n = 2^{a+b+1} / (2n+a+b+1) * G(n+a+1) G(n+b+1) / (G(n+a+b+1) n!)
    let g = |x: f64| ln_gamma(x);
    let ln = (a + b + 1.0) * (2.0f64).ln() - (2.0 * n as f64 + a + b + 1.0).ln()
        + g(n as f64 + a + 1.0)
        + g(n as f64 + b + 1.0)
        - g(n as f64 + a + b + 1.0)
        - g(n as f64 + 1.0);
    ln.exp()
}

fn jacobi_norm(n: usize, a: f64, b: f64) -> f64 {
    gamma_ratio_norm(n, a, b).sqrt()
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos
    const G: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = G[0];
        let t = x + 7.5;
        for (i, &c) in G.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// d/dx of the orthonormal Jacobi polynomial.
pub fn grad_jacobi_normalized(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64 * (n as f64 + a + b + 1.0)).sqrt()
            * jacobi_normalized(n - 1, a + 1.0, b + 1.0, x)
    }
}

fn collapsed(r: f64, s: f64) -> (f64, f64) {
    let a = if (1.0 - s).abs() > 1e-12 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

/// Orthonormal Dubiner basis function `(i, j)` at `(r, s)`.
pub fn simplex_basis(i: usize, j: usize, r: f64, s: f64) -> f64 {
    let (a, b) = collapsed(r, s);
    let h1 = jacobi_normalized(i, 0.0, 0.0, a);
    let h2 = jacobi_normalized(j, 2.0 * i as f64 + 1.0, 0.0, b);
    (2.0f64).sqrt() * h1 * h2 * (1.0 - b).powi(i as i32)
}

/// Gradient `(d/dr, d/ds)` of the Dubiner basis function.
pub fn simplex_basis_grad(i: usize, j: usize, r: f64, s: f64) -> (f64, f64) {
    let (a, b) = collapsed(r, s);
    let fa = jacobi_normalized(i, 0.0, 0.0, a);
    let dfa = grad_jacobi_normalized(i, 0.0, 0.0, a);
    let gb = jacobi_normalized(j, 2.0 * i as f64 + 1.0, 0.0, b);
    let dgb = grad_jacobi_normalized(j, 2.0 * i as f64 + 1.0, 0.0, b);
    let half1mb = 0.5 * (1.0 - b);
    let mut dr = dfa * gb;
    if i > 0 {
        dr *= half1mb.powi(i as i32 - 1);
    }
    let mut ds = dfa * gb * 0.5 * (1.0 + a);
    if i > 0 {
        ds *= half1mb.powi(i as i32 - 1);
    }
    let mut tmp = dgb * half1mb.powi(i as i32);
    if i > 0 {
        tmp -= 0.5 * i as f64 * gb * half1mb.powi(i as i32 - 1);
    }
    ds += fa * tmp;
    let norm = (2.0f64).powf(i as f64 + 0.5);
    (norm * dr, norm * ds)
}

/// The modal index pairs `(i, j)` with `i + j <= q`, in the conventional
/// order.
fn mode_pairs(q: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..=q {
        for j in 0..=(q - i) {
            out.push((i, j));
        }
    }
    out
}

/// Warp-and-blend interpolation nodes of order `q` on the bi-unit triangle.
pub fn warp_blend_nodes(q: usize) -> Array2<f64> {
    let n = q;
    let alpopt = [
        0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.98, 1.0999, 1.2832, 1.3648, 1.4773, 1.4959,
    ];
    let alpha = if n < alpopt.len() { alpopt[n] } else { 5.0 / 3.0 };
    let np = (n + 1) * (n + 2) / 2;
    let mut l1 = Array1::zeros(np);
    let mut l2 = Array1::zeros(np);
    let mut l3 = Array1::zeros(np);
    let mut sk = 0;
    for row in 0..=n {
        for m in 0..=(n - row) {
            l1[sk] = row as f64 / n as f64;
            l3[sk] = m as f64 / n as f64;
            l2[sk] = 1.0 - l1[sk] - l3[sk];
            sk += 1;
        }
    }
    let mut x = Array1::zeros(np);
    let mut y = Array1::zeros(np);
    for k in 0..np {
        x[k] = -l2[k] + l3[k];
        y[k] = (-l2[k] - l3[k] + 2.0 * l1[k]) / (3.0f64).sqrt();
    }
    let warp = |d: &Array1<f64>| warp_factor(n, d);
    let d1 = Array1::from_iter((0..np).map(|k| l3[k] - l2[k]));
    let d2 = Array1::from_iter((0..np).map(|k| l1[k] - l3[k]));
    let d3 = Array1::from_iter((0..np).map(|k| l2[k] - l1[k]));
    let w1 = warp(&d1);
    let w2 = warp(&d2);
    let w3 = warp(&d3);
    for k in 0..np {
        let b1 = 4.0 * l2[k] * l3[k];
        let b2 = 4.0 * l1[k] * l3[k];
        let b3 = 4.0 * l1[k] * l2[k];
        let wf1 = b1 * w1[k] * (1.0 + (alpha * l1[k]).powi(2));
        let wf2 = b2 * w2[k] * (1.0 + (alpha * l2[k]).powi(2));
        let wf3 = b3 * w3[k] * (1.0 + (alpha * l3[k]).powi(2));
        x[k] += wf1 + (2.0 * std::f64::consts::PI / 3.0).cos() * wf2
            + (4.0 * std::f64::consts::PI / 3.0).cos() * wf3;
        y[k] += (2.0 * std::f64::consts::PI / 3.0).sin() * wf2
            + (4.0 * std::f64::consts::PI / 3.0).sin() * wf3;
    }
    // equilateral (x, y) -> reference (r, s)
    let mut nodes = Array2::zeros((np, 2));
    for k in 0..np {
        let m1 = ((3.0f64).sqrt() * y[k] + 1.0) / 3.0;
        let m2 = (-3.0 * x[k] - (3.0f64).sqrt() * y[k] + 2.0) / 6.0;
        let m3 = (3.0 * x[k] - (3.0f64).sqrt() * y[k] + 2.0) / 6.0;
        nodes[[k, 0]] = -m2 + m3 - m1;
        nodes[[k, 1]] = -m2 - m3 + m1;
    }
    nodes
}

/// 1-D warp factor: displacement from equidistant to Gauss-Lobatto nodes,
/// interpolated at `rout`.
fn warp_factor(n: usize, rout: &Array1<f64>) -> Array1<f64> {
    let lgl = gauss_lobatto(n + 1);
    let req = Array1::from_iter((0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64));
    // Lagrange evaluation through the orthonormal Legendre Vandermonde
    let veq = legendre_vandermonde_norm(&req, n);
    let veq_inv = veq.inv().expect("equidistant Vandermonde invertible");
    let mut out = Array1::zeros(rout.len());
    for (idx, &r) in rout.iter().enumerate() {
        // row of basis values at r
        let pr = Array1::from_iter((0..=n).map(|m| legendre_norm(m, r)));
        let lag = veq_inv.t().dot(&pr);
        let mut w = 0.0;
        for k in 0..=n {
            w += lag[k] * (lgl[k] - req[k]);
        }
        let zerof = r.abs() < 1.0 - 1e-10;
        let sf = if zerof { 1.0 - r * r } else { 1.0 };
        out[idx] = w / sf + if zerof { 0.0 } else { w };
        if !zerof {
            out[idx] = 0.0; // endpoints carry no warp
        }
    }
    out
}

fn legendre_norm(nn: usize, x: f64) -> f64 {
    legendre(nn, x) * ((2.0 * nn as f64 + 1.0) / 2.0).sqrt()
}

fn legendre_vandermonde_norm(pts: &Array1<f64>, order: usize) -> Array2<f64> {
    let mut v = Array2::zeros((pts.len(), order + 1));
    for (k, &x) in pts.iter().enumerate() {
        for m in 0..=order {
            v[[k, m]] = legendre_norm(m, x);
        }
    }
    v
}

/// Nodal reference triangle data for order `q`.
pub struct RefTriangle {
    pub order: usize,
    pub n_nodes: usize,
    /// interpolation nodes, rows `(r, s)`
    pub nodes: Array2<f64>,
    pub dr: Array2<f64>,
    pub ds: Array2<f64>,
    /// volume cubature points, rows `(r, s)`
    pub cub_points: Array2<f64>,
    /// positive cubature weights
    pub cub_weights: Array1<f64>,
    /// nodal -> cubature evaluation
    pub p_c: Array2<f64>,
    /// reference mass `P_c' diag(w) P_c`
    pub mass_ref: Array2<f64>,
    /// node indices on each edge, ordered along the edge
    pub edge_nodes: [Vec<usize>; 3],
    /// edge quadrature points on `[-1, 1]`
    pub edge_quad_t: Array1<f64>,
    /// edge quadrature weights (sum 2)
    pub edge_quad_w: Array1<f64>,
    /// edge nodal values -> edge quadrature values
    pub p_bc: Array2<f64>,
    /// `T_K = P_bc L_K`: volume nodal -> edge quadrature values
    pub edge_trace: [Array2<f64>; 3],
    /// `B_K = L_K' P_bc'`: edge quadrature -> volume (lift before mass solve)
    pub edge_lift: [Array2<f64>; 3],
    /// gradient evaluation at the cubature points (nodal -> d/dr, d/ds)
    pub grad_r_cub: Array2<f64>,
    pub grad_s_cub: Array2<f64>,
    /// gradient evaluation at the edge quadrature points of each edge
    pub grad_r_edge: [Array2<f64>; 3],
    pub grad_s_edge: [Array2<f64>; 3],
}

/// The three reference edges as ordered local vertex pairs.
pub const EDGE_VERTICES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Reference triangle vertices `(r, s)`.
pub const REF_VERTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];

/// Build the nodal reference data for `q in 1..=5`.
pub fn build_ref_triangle(q: usize) -> Result<RefTriangle> {
    if !(1..=5).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    let modes = mode_pairs(q);
    let np = modes.len();
    let nodes = warp_blend_nodes(q);
    let mut v = Array2::zeros((np, np));
    let mut vr = Array2::zeros((np, np));
    let mut vs = Array2::zeros((np, np));
    for k in 0..np {
        let (r, s) = (nodes[[k, 0]], nodes[[k, 1]]);
        for (m, &(i, j)) in modes.iter().enumerate() {
            v[[k, m]] = simplex_basis(i, j, r, s);
            let (gr, gs) = simplex_basis_grad(i, j, r, s);
            vr[[k, m]] = gr;
            vs[[k, m]] = gs;
        }
    }
    let v_inv = v.inv().map_err(|_| Error::SingularMass)?;
    let dr = vr.dot(&v_inv);
    let ds = vs.dot(&v_inv);

    // collapsed-coordinate cubature exact to degree 2q+2
    let deg = 2 * q + 2;
    let n1d = deg / 2 + 1;
    let (ga, wa) = gauss_legendre(n1d);
    let (gb, wb) = gauss_jacobi(n1d, 1.0, 0.0);
    let n_cub = n1d * n1d;
    let mut cub_points = Array2::zeros((n_cub, 2));
    let mut cub_weights = Array1::zeros(n_cub);
    let mut idx = 0;
    for ia in 0..n1d {
        for ib in 0..n1d {
            let a = ga[ia];
            let b = gb[ib];
            cub_points[[idx, 0]] = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
            cub_points[[idx, 1]] = b;
            cub_weights[idx] = 0.5 * wa[ia] * wb[ib];
            idx += 1;
        }
    }
    let mut v_cub = Array2::zeros((n_cub, np));
    for k in 0..n_cub {
        for (m, &(i, j)) in modes.iter().enumerate() {
            v_cub[[k, m]] = simplex_basis(i, j, cub_points[[k, 0]], cub_points[[k, 1]]);
        }
    }
    let p_c = v_cub.dot(&v_inv);
    let mut vr_cub = Array2::zeros((n_cub, np));
    let mut vs_cub = Array2::zeros((n_cub, np));
    for k in 0..n_cub {
        for (m, &(i, j)) in modes.iter().enumerate() {
            let (gr, gs) = simplex_basis_grad(i, j, cub_points[[k, 0]], cub_points[[k, 1]]);
            vr_cub[[k, m]] = gr;
            vs_cub[[k, m]] = gs;
        }
    }
    let grad_r_cub = vr_cub.dot(&v_inv);
    let grad_s_cub = vs_cub.dot(&v_inv);
    let mut mass_ref = Array2::zeros((np, np));
    for a in 0..n_cub {
        for i in 0..np {
            for j in 0..np {
                mass_ref[[i, j]] += p_c[[a, i]] * cub_weights[a] * p_c[[a, j]];
            }
        }
    }

    // edge node lists ordered along each edge
    let tol = 1e-10;
    let mut edge_nodes: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for k in 0..np {
        let (r, s) = (nodes[[k, 0]], nodes[[k, 1]]);
        if (s + 1.0).abs() < tol {
            edge_nodes[0].push(k);
        }
        if (r + s).abs() < tol {
            edge_nodes[1].push(k);
        }
        if (r + 1.0).abs() < tol {
            edge_nodes[2].push(k);
        }
    }
    let edge_param = |e: usize, k: usize| -> f64 {
        let (r, s) = (nodes[[k, 0]], nodes[[k, 1]]);
        match e {
            0 => r,
            1 => s,
            _ => -s,
        }
    };
    for e in 0..3 {
        edge_nodes[e].sort_by(|&a, &b| {
            edge_param(e, a)
                .partial_cmp(&edge_param(e, b))
                .unwrap()
        });
        debug_assert_eq!(edge_nodes[e].len(), q + 1);
    }

    // edge quadrature exact to degree 2q+3
    let n_e = q + 2;
    let (edge_quad_t, edge_quad_w) = gauss_legendre(n_e);
    // edge nodal positions are Gauss-Lobatto along any edge
    let lgl = gauss_lobatto(q + 1);
    let v_lgl = legendre_vandermonde_norm(&lgl, q);
    let v_g = legendre_vandermonde_norm(&edge_quad_t, q);
    let p_bc = v_g.dot(&v_lgl.inv().map_err(|_| Error::SingularMass)?);

    let mut edge_trace: [Array2<f64>; 3] = [
        Array2::zeros((n_e, np)),
        Array2::zeros((n_e, np)),
        Array2::zeros((n_e, np)),
    ];
    let mut edge_lift: [Array2<f64>; 3] = [
        Array2::zeros((np, n_e)),
        Array2::zeros((np, n_e)),
        Array2::zeros((np, n_e)),
    ];
    for e in 0..3 {
        for (loc, &node) in edge_nodes[e].iter().enumerate() {
            for a in 0..n_e {
                edge_trace[e][[a, node]] = p_bc[[a, loc]];
                edge_lift[e][[node, a]] = p_bc[[a, loc]];
            }
        }
    }

    let mut grad_r_edge: [Array2<f64>; 3] = [
        Array2::zeros((n_e, np)),
        Array2::zeros((n_e, np)),
        Array2::zeros((n_e, np)),
    ];
    let mut grad_s_edge: [Array2<f64>; 3] = grad_r_edge.clone();
    for e in 0..3 {
        let (a, b) = EDGE_VERTICES[e];
        for (qi, &t) in edge_quad_t.iter().enumerate() {
            let u = 0.5 * (1.0 + t);
            let r = REF_VERTS[a][0] + u * (REF_VERTS[b][0] - REF_VERTS[a][0]);
            let s = REF_VERTS[a][1] + u * (REF_VERTS[b][1] - REF_VERTS[a][1]);
            let mut vr = Array1::zeros(np);
            let mut vs = Array1::zeros(np);
            for (m, &(i, j)) in modes.iter().enumerate() {
                let (gr, gs) = simplex_basis_grad(i, j, r, s);
                vr[m] = gr;
                vs[m] = gs;
            }
            let lr = v_inv.t().dot(&vr);
            let ls = v_inv.t().dot(&vs);
            for n2 in 0..np {
                grad_r_edge[e][[qi, n2]] = lr[n2];
                grad_s_edge[e][[qi, n2]] = ls[n2];
            }
        }
    }
    Ok(RefTriangle {
        order: q,
        n_nodes: np,
        nodes,
        dr,
        ds,
        cub_points,
        cub_weights,
        p_c,
        mass_ref,
        edge_nodes,
        edge_quad_t,
        edge_quad_w,
        p_bc,
        edge_trace,
        edge_lift,
        grad_r_cub,
        grad_s_cub,
        grad_r_edge,
        grad_s_edge,
    })
}

/// Geometric and operator data of one element.
pub struct DgElement {
    pub verts: [[f64; 2]; 3],
    /// curved local edge and the interface parameter of its two endpoints
    pub curved: Option<(usize, (f64, f64))>,
    /// physical node coordinates, rows `(x1, x2)`
    pub node_coords: Array2<f64>,
    /// stiffness `G_i = Dr' M_{1i} + Ds' M_{2i}`
    pub g1: Array2<f64>,
    pub g2: Array2<f64>,
    pub m_j: Array2<f64>,
    pub m_j_inv: Array2<f64>,
    /// per edge: surface Jacobian and normal components at edge quadrature
    pub edge_s_j: [Array1<f64>; 3],
    pub edge_n1: [Array1<f64>; 3],
    pub edge_n2: [Array1<f64>; 3],
}

/// The analytic map of an element (straight or blended toward the interface
/// curve).
pub struct ElementMap<'a> {
    pub verts: [[f64; 2]; 3],
    pub curved: Option<(usize, (f64, f64))>,
    pub curve: &'a dyn Fn(f64) -> ([f64; 2], [f64; 2]),
}

impl ElementMap<'_> {
    /// Position and Jacobian `dx/d(r,s)` at a reference point.
    pub fn eval(&self, r: f64, s: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let l = [-(r + s) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0];
        let dl = [[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]];
        let mut x = [0.0, 0.0];
        let mut dx = [[0.0; 2]; 2];
        for i in 0..3 {
            for c in 0..2 {
                x[c] += l[i] * self.verts[i][c];
                dx[c][0] += dl[i][0] * self.verts[i][c];
                dx[c][1] += dl[i][1] * self.verts[i][c];
            }
        }
        if let Some((edge, (eta_a, eta_b))) = self.curved {
            let (a, b) = EDGE_VERTICES[edge];
            let blend = l[a] + l[b];
            if blend > 1e-14 {
                let theta = l[b] / blend;
                let eta = eta_a + theta * (eta_b - eta_a);
                let (c, ct) = (self.curve)(eta);
                let xa = self.verts[a];
                let xb = self.verts[b];
                let d = [
                    c[0] - ((1.0 - theta) * xa[0] + theta * xb[0]),
                    c[1] - ((1.0 - theta) * xa[1] + theta * xb[1]),
                ];
                let dprime = [
                    ct[0] * (eta_b - eta_a) - (xb[0] - xa[0]),
                    ct[1] * (eta_b - eta_a) - (xb[1] - xa[1]),
                ];
                for c2 in 0..2 {
                    x[c2] += blend * d[c2];
                    for k in 0..2 {
                        let dblend = dl[a][k] + dl[b][k];
                        let dtheta_blend = dl[b][k] - theta * dblend;
                        dx[c2][k] += dblend * d[c2] + dprime[c2] * dtheta_blend;
                    }
                }
            }
        }
        (x, dx)
    }
}

/// Assemble the per-element operator data.
pub fn build_element(
    rt: &RefTriangle,
    map: &ElementMap,
) -> Result<DgElement> {
    let np = rt.n_nodes;
    let n_cub = rt.cub_weights.len();
    // metric data at cubature points
    let mut jw = Array1::zeros(n_cub);
    let mut axw = [[Array1::<f64>::zeros(n_cub), Array1::zeros(n_cub)], [
        Array1::zeros(n_cub),
        Array1::zeros(n_cub),
    ]];
    for c in 0..n_cub {
        let (r, s) = (rt.cub_points[[c, 0]], rt.cub_points[[c, 1]]);
        let (_, dx) = map.eval(r, s);
        let j = dx[0][0] * dx[1][1] - dx[1][0] * dx[0][1];
        if j <= 0.0 {
            return Err(Error::NonPositiveJacobian {
                value: j,
                xi1: r,
                xi2: s,
            });
        }
        jw[c] = j;
        // J * d xi_i/d x_k
        axw[0][0][c] = dx[1][1];
        axw[0][1][c] = -dx[0][1];
        axw[1][0][c] = -dx[1][0];
        axw[1][1][c] = dx[0][0];
    }
    // mass and stiffness assembly through the cubature
    let weighted = |diag: &Array1<f64>| -> Array2<f64> {
        let mut m = Array2::zeros((np, np));
        for c in 0..n_cub {
            let w = rt.cub_weights[c] * diag[c];
            for i in 0..np {
                let pci = rt.p_c[[c, i]];
                if pci == 0.0 {
                    continue;
                }
                for j in 0..np {
                    m[[i, j]] += pci * w * rt.p_c[[c, j]];
                }
            }
        }
        m
    };
    let m_j = weighted(&jw);
    let m_j_inv = m_j.inv().map_err(|_| Error::SingularMass)?;
    let m11 = weighted(&axw[0][0]);
    let m12 = weighted(&axw[0][1]);
    let m21 = weighted(&axw[1][0]);
    let m22 = weighted(&axw[1][1]);
    let g1 = rt.dr.t().dot(&m11) + rt.ds.t().dot(&m21);
    let g2 = rt.dr.t().dot(&m12) + rt.ds.t().dot(&m22);

    // node coordinates
    let mut node_coords = Array2::zeros((np, 2));
    for k in 0..np {
        let (x, _) = map.eval(rt.nodes[[k, 0]], rt.nodes[[k, 1]]);
        node_coords[[k, 0]] = x[0];
        node_coords[[k, 1]] = x[1];
    }

    // edge geometry at quadrature points
    let n_e = rt.edge_quad_t.len();
    let mut edge_s_j: [Array1<f64>; 3] =
        [Array1::zeros(n_e), Array1::zeros(n_e), Array1::zeros(n_e)];
    let mut edge_n1 = edge_s_j.clone();
    let mut edge_n2 = edge_s_j.clone();
    for e in 0..3 {
        let (a, b) = EDGE_VERTICES[e];
        let (ra, sa) = (REF_VERTS[a][0], REF_VERTS[a][1]);
        let (rb, sb) = (REF_VERTS[b][0], REF_VERTS[b][1]);
        for (qi, &t) in rt.edge_quad_t.iter().enumerate() {
            let u = 0.5 * (1.0 + t);
            let r = ra + u * (rb - ra);
            let s = sa + u * (sb - sa);
            let (_, dx) = map.eval(r, s);
            // tangent along the edge parameter t
            let drdt = 0.5 * (rb - ra);
            let dsdt = 0.5 * (sb - sa);
            let tx = dx[0][0] * drdt + dx[0][1] * dsdt;
            let ty = dx[1][0] * drdt + dx[1][1] * dsdt;
            let sj = (tx * tx + ty * ty).sqrt();
            if sj <= 0.0 {
                return Err(Error::NonPositiveSurfaceJacobian(sj));
            }
            edge_s_j[e][qi] = sj;
            // outward normal of a counterclockwise element
            edge_n1[e][qi] = ty / sj;
            edge_n2[e][qi] = -tx / sj;
        }
    }

    Ok(DgElement {
        verts: map.verts,
        curved: map.curved,
        node_coords,
        g1,
        g2,
        m_j,
        m_j_inv,
        edge_s_j,
        edge_n1,
        edge_n2,
    })
}

impl DgElement {
    /// Pressure trace at the edge quadrature points.
    pub fn edge_pressure(&self, rt: &RefTriangle, p: &Array1<f64>, e: usize) -> Array1<f64> {
        rt.edge_trace[e].dot(p)
    }

    /// Outward-normal velocity at the edge quadrature points.
    pub fn edge_normal_velocity(
        &self,
        rt: &RefTriangle,
        v1: &Array1<f64>,
        v2: &Array1<f64>,
        e: usize,
    ) -> Array1<f64> {
        let t1 = rt.edge_trace[e].dot(v1);
        let t2 = rt.edge_trace[e].dot(v2);
        Array1::from_iter(
            (0..t1.len()).map(|i| self.edge_n1[e][i] * t1[i] + self.edge_n2[e][i] * t2[i]),
        )
    }

    /// Element energy `rho/2 v' M_J v + 1/(2 lambda) p' M_J p`.
    pub fn energy(
        &self,
        v1: &Array1<f64>,
        v2: &Array1<f64>,
        p: &Array1<f64>,
        mat: &Material,
    ) -> f64 {
        let q = |u: &Array1<f64>| u.dot(&self.m_j.dot(u));
        0.5 * mat.rho * (q(v1) + q(v2)) + 0.5 / mat.lambda * q(p)
    }
}

/// Per-edge flux inputs to the element right-hand side: `p*` and `v* - v^-`
/// at the edge quadrature points.
pub struct EdgeFlux {
    pub p_star: Array1<f64>,
    pub v_star_minus_v: Array1<f64>,
}

/// Element right-hand side of the skew-form semi-discretization.
#[allow(clippy::too_many_arguments)]
pub fn dg_rhs(
    rt: &RefTriangle,
    el: &DgElement,
    v1: &Array1<f64>,
    v2: &Array1<f64>,
    p: &Array1<f64>,
    mat: &Material,
    fluxes: &[EdgeFlux; 3],
    out: (&mut Array1<f64>, &mut Array1<f64>, &mut Array1<f64>),
) {
    let (dv1, dv2, dp) = out;
    let mut rv1 = el.g1.dot(p);
    let mut rv2 = el.g2.dot(p);
    let mut rp = el.g1.t().dot(v1) + el.g2.t().dot(v2);
    for e in 0..3 {
        let n_e = rt.edge_quad_t.len();
        let mut fz1 = Array1::zeros(n_e);
        let mut fz2 = Array1::zeros(n_e);
        let mut fzp = Array1::zeros(n_e);
        for i in 0..n_e {
            let wsj = rt.edge_quad_w[i] * el.edge_s_j[e][i];
            fz1[i] = el.edge_n1[e][i] * wsj * fluxes[e].p_star[i];
            fz2[i] = el.edge_n2[e][i] * wsj * fluxes[e].p_star[i];
            fzp[i] = wsj * fluxes[e].v_star_minus_v[i];
        }
        rv1 -= &rt.edge_lift[e].dot(&fz1);
        rv2 -= &rt.edge_lift[e].dot(&fz2);
        rp += &rt.edge_lift[e].dot(&fzp);
    }
    dv1.assign(&el.m_j_inv.dot(&rv1));
    *dv1 /= mat.rho;
    dv2.assign(&el.m_j_inv.dot(&rv2));
    *dv2 /= mat.rho;
    dp.assign(&el.m_j_inv.dot(&rp));
    *dp *= -mat.lambda;
}

/// Numerical flux between two DG elements from matched traces.
pub fn dg_dg_flux(
    p_minus: &Array1<f64>,
    v_minus: &Array1<f64>,
    p_plus: &Array1<f64>,
    v_plus: &Array1<f64>,
    alpha: f64,
    mat: &Material,
) -> Result<EdgeFlux> {
    if p_minus.len() != p_plus.len() {
        return Err(Error::ShapeMismatch("dg-dg trace length".into()));
    }
    let z = mat.impedance();
    let n = p_minus.len();
    let mut p_star = Array1::zeros(n);
    let mut dv = Array1::zeros(n);
    for i in 0..n {
        p_star[i] = 0.5 * (p_plus[i] + p_minus[i]) + 0.5 * alpha * z * (v_plus[i] + v_minus[i]);
        dv[i] = -0.5 * (v_plus[i] + v_minus[i]) - 0.5 * alpha / z * (p_plus[i] - p_minus[i]);
    }
    Ok(EdgeFlux {
        p_star,
        v_star_minus_v: dv,
    })
}

/// Free-surface flux `p* = 0`, `v* - v = alpha p / Z`.
pub fn dg_boundary_flux(
    p_minus: &Array1<f64>,
    alpha: f64,
    mat: &Material,
) -> EdgeFlux {
    let z = mat.impedance();
    EdgeFlux {
        p_star: Array1::zeros(p_minus.len()),
        v_star_minus_v: p_minus.mapv(|p| alpha * p / z),
    }
}

/// Edge dissipation rate of a DG element edge:
/// `D_K = -(v^-)' Omega S p* - (p^-)' Omega S (v* - v^-)`.
pub fn dg_edge_dissipation(
    rt: &RefTriangle,
    el: &DgElement,
    e: usize,
    p_minus: &Array1<f64>,
    v_minus: &Array1<f64>,
    flux: &EdgeFlux,
) -> f64 {
    let mut d = 0.0;
    for i in 0..rt.edge_quad_t.len() {
        let wsj = rt.edge_quad_w[i] * el.edge_s_j[e][i];
        d += -v_minus[i] * wsj * flux.p_star[i] - p_minus[i] * wsj * flux.v_star_minus_v[i];
    }
    d
}
