//! Triangle mesh of the right half domain: structured generation, hierarchic
//! four-way refinement, and curving of interface-adjacent elements.

use super::{build_element, build_ref_triangle, DgElement, ElementMap, RefTriangle, EDGE_VERTICES};
use crate::geometry::{interface_curve, CurvedRight, Transform};
use crate::Result;
use std::collections::HashMap;

/// Edge connectivity of one local edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeConn {
    /// interior edge shared with `elem`'s local `edge` (traversed oppositely)
    Interior { elem: usize, edge: usize },
    /// free-surface boundary
    Boundary,
    /// coupling interface toward the finite difference side
    Interface,
}

/// Unstructured triangle mesh with interface markers.
pub struct DgMesh {
    pub verts: Vec<[f64; 2]>,
    /// interface parameter of on-curve vertices
    pub vert_eta: Vec<Option<f64>>,
    /// counterclockwise vertex triples
    pub tris: Vec<[usize; 3]>,
    pub conn: Vec<[EdgeConn; 3]>,
    /// per element and local edge: interface parameter of the two local
    /// endpoints, for marked (interface) edges
    pub edge_eta: Vec<[Option<(f64, f64)>; 3]>,
}

impl DgMesh {
    pub fn n_elements(&self) -> usize {
        self.tris.len()
    }

    /// `(element, local edge)` pairs on the coupling interface.
    pub fn interface_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, marks) in self.edge_eta.iter().enumerate() {
            for (e, m) in marks.iter().enumerate() {
                if m.is_some() {
                    out.push((t, e));
                }
            }
        }
        out
    }
}

/// Structured triangulation of the right half domain: an `e1 x e2` grid of
/// quads under the right-block transform, each split into two triangles.
/// Interface edges (the curved west side) carry their parameter range.
pub fn right_half_mesh(e1: usize, e2: usize) -> DgMesh {
    assert!(e1 >= 1 && e2 >= 1);
    let t = CurvedRight;
    let vid = |i: usize, j: usize| i * (e2 + 1) + j;
    let mut verts = Vec::with_capacity((e1 + 1) * (e2 + 1));
    let mut vert_eta = Vec::with_capacity((e1 + 1) * (e2 + 1));
    for i in 0..=e1 {
        for j in 0..=e2 {
            let xi1 = -1.0 + 2.0 * i as f64 / e1 as f64;
            let xi2 = -1.0 + 2.0 * j as f64 / e2 as f64;
            let jet = t.eval(xi1, xi2);
            verts.push(jet.x);
            vert_eta.push(if i == 0 { Some(xi2) } else { None });
        }
    }
    let mut tris = Vec::with_capacity(2 * e1 * e2);
    for i in 0..e1 {
        for j in 0..e2 {
            let (v00, v10) = (vid(i, j), vid(i + 1, j));
            let (v11, v01) = (vid(i + 1, j + 1), vid(i, j + 1));
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }
    finish_mesh(verts, vert_eta, tris)
}

/// Split every triangle into four nested ones. Midpoints of interface edges
/// are placed on the analytic curve.
pub fn refine(mesh: &DgMesh) -> DgMesh {
    let mut verts = mesh.verts.clone();
    let mut vert_eta = mesh.vert_eta.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut get_mid = |a: usize, b: usize, verts: &mut Vec<[f64; 2]>, vert_eta: &mut Vec<Option<f64>>| {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = midpoint.get(&key) {
            return m;
        }
        let m = match (vert_eta[a], vert_eta[b]) {
            (Some(ea), Some(eb)) => {
                let eta = 0.5 * (ea + eb);
                let (x, _) = interface_curve(eta);
                verts.push(x);
                vert_eta.push(Some(eta));
                verts.len() - 1
            }
            _ => {
                let x = [
                    0.5 * (verts[a][0] + verts[b][0]),
                    0.5 * (verts[a][1] + verts[b][1]),
                ];
                verts.push(x);
                vert_eta.push(None);
                verts.len() - 1
            }
        };
        midpoint.insert(key, m);
        m
    };
    let mut tris = Vec::with_capacity(4 * mesh.tris.len());
    for t in &mesh.tris {
        let [a, b, c] = *t;
        let mab = get_mid(a, b, &mut verts, &mut vert_eta);
        let mbc = get_mid(b, c, &mut verts, &mut vert_eta);
        let mca = get_mid(c, a, &mut verts, &mut vert_eta);
        tris.push([a, mab, mca]);
        tris.push([mab, b, mbc]);
        tris.push([mca, mbc, c]);
        tris.push([mab, mbc, mca]);
    }
    finish_mesh(verts, vert_eta, tris)
}

fn finish_mesh(verts: Vec<[f64; 2]>, vert_eta: Vec<Option<f64>>, tris: Vec<[usize; 3]>) -> DgMesh {
    // connectivity by sorted vertex pair
    let mut by_pair: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for (e, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
            let (va, vb) = (tri[a], tri[b]);
            let key = (va.min(vb), va.max(vb));
            by_pair.entry(key).or_default().push((t, e));
        }
    }
    let mut conn = vec![[EdgeConn::Boundary; 3]; tris.len()];
    let mut edge_eta = vec![[None; 3]; tris.len()];
    for (t, tri) in tris.iter().enumerate() {
        for (e, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
            let (va, vb) = (tri[a], tri[b]);
            let key = (va.min(vb), va.max(vb));
            let shared = &by_pair[&key];
            if shared.len() == 2 {
                let other = shared.iter().find(|&&(ot, _)| ot != t);
                if let Some(&(ot, oe)) = other {
                    conn[t][e] = EdgeConn::Interior { elem: ot, edge: oe };
                    continue;
                }
            }
            // boundary: interface when both endpoints are on the curve
            if let (Some(ea), Some(eb)) = (vert_eta[va], vert_eta[vb]) {
                conn[t][e] = EdgeConn::Interface;
                edge_eta[t][e] = Some((ea, eb));
            } else {
                conn[t][e] = EdgeConn::Boundary;
            }
        }
    }
    DgMesh {
        verts,
        vert_eta,
        tris,
        conn,
        edge_eta,
    }
}

/// A ready-to-run DG domain: reference data plus per-element operators.
pub struct DgDomain {
    pub rt: RefTriangle,
    pub mesh: DgMesh,
    pub elements: Vec<DgElement>,
    /// smallest inscribed-circle diameter over the elements
    pub h_min: f64,
}

/// Build the DG half-domain of order `q` with `e2` base edges along the
/// interface and `refinements` levels of four-way splitting.
pub fn build_domain(q: usize, e2: usize, refinements: usize) -> Result<DgDomain> {
    let e1 = e2.div_ceil(2);
    let mut mesh = right_half_mesh(e1, e2);
    for _ in 0..refinements {
        mesh = refine(&mesh);
    }
    let rt = build_ref_triangle(q)?;
    let curve = |eta: f64| interface_curve(eta);
    let mut elements = Vec::with_capacity(mesh.n_elements());
    let mut h_min = f64::INFINITY;
    for t in 0..mesh.n_elements() {
        let tri = mesh.tris[t];
        let verts = [
            mesh.verts[tri[0]],
            mesh.verts[tri[1]],
            mesh.verts[tri[2]],
        ];
        let curved = mesh.edge_eta[t]
            .iter()
            .enumerate()
            .find_map(|(e, m)| m.map(|eta| (e, eta)));
        let map = ElementMap {
            verts,
            curved,
            curve: &curve,
        };
        elements.push(build_element(&rt, &map)?);
        // inscribed-circle diameter from the straight vertices
        let ab = dist(verts[0], verts[1]);
        let bc = dist(verts[1], verts[2]);
        let ca = dist(verts[2], verts[0]);
        let s = 0.5 * (ab + bc + ca);
        let area = (s * (s - ab) * (s - bc) * (s - ca)).max(0.0).sqrt();
        h_min = h_min.min(4.0 * area / (ab + bc + ca));
    }
    Ok(DgDomain {
        rt,
        mesh,
        elements,
        h_min,
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
