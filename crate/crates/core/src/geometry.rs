//! Curvilinear block transforms, metric terms, surface Jacobians and outward
//! normals.
//!
//! Transforms map the reference square `[-1,1]^2` to a physical block and
//! carry analytic partial derivatives, so all metric data is evaluated in
//! closed form rather than by discrete differentiation.

use crate::fd::Face;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use std::collections::HashMap;
use std::sync::Arc;

/// Value and Jacobian of a coordinate map at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct TransformJet {
    pub x: [f64; 2],
    /// `dx_dxi[i][j] = d x_i / d xi_j`
    pub dx_dxi: [[f64; 2]; 2],
}

/// A curvilinear coordinate transform with analytic partials.
pub trait Transform: Send + Sync {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet;
}

/// `x = xi`.
pub struct Identity;

impl Transform for Identity {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
        TransformJet {
            x: [xi1, xi2],
            dx_dxi: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

/// `x = origin + B xi` for a constant matrix `B`.
pub struct Affine {
    pub origin: [f64; 2],
    pub matrix: [[f64; 2]; 2],
}

impl Transform for Affine {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
        let b = &self.matrix;
        TransformJet {
            x: [
                self.origin[0] + b[0][0] * xi1 + b[0][1] * xi2,
                self.origin[1] + b[1][0] * xi1 + b[1][1] * xi2,
            ],
            dx_dxi: *b,
        }
    }
}

/// Left block of the curved two-block arrangement: the east face follows
/// `x1 = (1/5) sin(pi (x2 + 1))`.
pub struct CurvedLeft;

impl Transform for CurvedLeft {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
        let s = (std::f64::consts::PI * (xi2 + 1.0)).sin();
        let c = (std::f64::consts::PI * (xi2 + 1.0)).cos();
        TransformJet {
            x: [(1.0 + xi1) / 10.0 * s - (1.0 - xi1) / 2.0, xi2],
            dx_dxi: [
                [s / 10.0 + 0.5, (1.0 + xi1) / 10.0 * std::f64::consts::PI * c],
                [0.0, 1.0],
            ],
        }
    }
}

/// Right block sharing the curved interface with [`CurvedLeft`].
pub struct CurvedRight;

impl Transform for CurvedRight {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
        let s = (std::f64::consts::PI * (xi2 + 1.0)).sin();
        let c = (std::f64::consts::PI * (xi2 + 1.0)).cos();
        TransformJet {
            x: [(1.0 - xi1) / 10.0 * s + (1.0 + xi1) / 2.0, xi2],
            dx_dxi: [
                [-s / 10.0 + 0.5, (1.0 - xi1) / 10.0 * std::f64::consts::PI * c],
                [0.0, 1.0],
            ],
        }
    }
}

/// Top half (`x2 in [0, 1]`) of the right block.
pub struct CurvedRightTop;

impl Transform for CurvedRightTop {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
        let inner = CurvedRight.eval(xi1, (xi2 + 1.0) / 2.0);
        TransformJet {
            x: inner.x,
            dx_dxi: [
                [inner.dx_dxi[0][0], inner.dx_dxi[0][1] / 2.0],
                [inner.dx_dxi[1][0], inner.dx_dxi[1][1] / 2.0],
            ],
        }
    }
}

/// Bottom half (`x2 in [-1, 0]`) of the right block.
pub struct CurvedRightBottom;

impl Transform for CurvedRightBottom {
    fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
        let inner = CurvedRight.eval(xi1, (xi2 - 1.0) / 2.0);
        TransformJet {
            x: inner.x,
            dx_dxi: [
                [inner.dx_dxi[0][0], inner.dx_dxi[0][1] / 2.0],
                [inner.dx_dxi[1][0], inner.dx_dxi[1][1] / 2.0],
            ],
        }
    }
}

/// The shared interface curve `eta -> (x1, x2)` of the curved blocks, with
/// its tangent.
pub fn interface_curve(eta: f64) -> ([f64; 2], [f64; 2]) {
    let s = (std::f64::consts::PI * (eta + 1.0)).sin();
    let c = (std::f64::consts::PI * (eta + 1.0)).cos();
    ([s / 5.0, eta], [std::f64::consts::PI * c / 5.0, 1.0])
}

/// Named transform registry; the catalog entries are pre-registered and user
/// transforms can be added under new names.
pub struct TransformRegistry {
    map: HashMap<String, Arc<dyn Transform>>,
}

impl TransformRegistry {
    pub fn with_catalog() -> Self {
        let mut r = TransformRegistry {
            map: HashMap::new(),
        };
        r.register("identity", Arc::new(Identity));
        r.register(
            "affine-2x",
            Arc::new(Affine {
                origin: [0.0, 0.0],
                matrix: [[2.0, 0.0], [0.0, 2.0]],
            }),
        );
        r.register("curved-left", Arc::new(CurvedLeft));
        r.register("curved-right", Arc::new(CurvedRight));
        r.register("curved-right-top", Arc::new(CurvedRightTop));
        r.register("curved-right-bottom", Arc::new(CurvedRightBottom));
        r
    }

    pub fn register(&mut self, name: &str, t: Arc<dyn Transform>) {
        self.map.insert(name.to_string(), t);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Transform>> {
        self.map
            .get(name)
            .cloned()
            .ok_or_else(|| Error::ConfigParse(format!("unknown transform '{name}'")))
    }
}

/// Per-face metric data: surface Jacobian and outward unit normal at the
/// face grid points.
#[derive(Debug, Clone)]
pub struct FaceMetric {
    pub s_j: Array1<f64>,
    pub n1: Array1<f64>,
    pub n2: Array1<f64>,
}

/// Volume and face metric data of one block on an `(n1+1) x (n2+1)` grid.
#[derive(Debug, Clone)]
pub struct MetricData {
    /// Jacobian determinant at the grid points
    pub jac: Array2<f64>,
    /// `a[i][k] = J * d xi_{i+1} / d x_{k+1}` at the grid points
    pub a: [[Array2<f64>; 2]; 2],
    /// physical coordinates of the grid points
    pub x1: Array2<f64>,
    pub x2: Array2<f64>,
    pub west: FaceMetric,
    pub east: FaceMetric,
    pub south: FaceMetric,
    pub north: FaceMetric,
}

impl MetricData {
    pub fn face(&self, f: Face) -> &FaceMetric {
        match f {
            Face::West => &self.west,
            Face::East => &self.east,
            Face::South => &self.south,
            Face::North => &self.north,
        }
    }
}

fn jet_metrics(jet: &TransformJet) -> (f64, [[f64; 2]; 2]) {
    let d = &jet.dx_dxi;
    let jac = d[0][0] * d[1][1] - d[1][0] * d[0][1];
    // J dxi1/dx1 = dx2/dxi2 ; J dxi1/dx2 = -dx1/dxi2
    // J dxi2/dx1 = -dx2/dxi1; J dxi2/dx2 = dx1/dxi1
    let a = [[d[1][1], -d[0][1]], [-d[1][0], d[0][0]]];
    (jac, a)
}

/// Evaluate metric data on the tensor grid of an `(n1+1) x (n2+1)` block.
pub fn metrics_for_block(t: &dyn Transform, n1: usize, n2: usize) -> Result<MetricData> {
    let h1 = 2.0 / n1 as f64;
    let h2 = 2.0 / n2 as f64;
    let mut jac = Array2::zeros((n1 + 1, n2 + 1));
    let mut a = [
        [Array2::zeros((n1 + 1, n2 + 1)), Array2::zeros((n1 + 1, n2 + 1))],
        [Array2::zeros((n1 + 1, n2 + 1)), Array2::zeros((n1 + 1, n2 + 1))],
    ];
    let mut x1 = Array2::zeros((n1 + 1, n2 + 1));
    let mut x2 = Array2::zeros((n1 + 1, n2 + 1));
    for k in 0..=n1 {
        for l in 0..=n2 {
            let (xi1, xi2) = (-1.0 + h1 * k as f64, -1.0 + h2 * l as f64);
            let jet = t.eval(xi1, xi2);
            let (j, am) = jet_metrics(&jet);
            if j <= 0.0 {
                return Err(Error::NonPositiveJacobian {
                    value: j,
                    xi1,
                    xi2,
                });
            }
            jac[[k, l]] = j;
            for i in 0..2 {
                for m in 0..2 {
                    a[i][m][[k, l]] = am[i][m];
                }
            }
            x1[[k, l]] = jet.x[0];
            x2[[k, l]] = jet.x[1];
        }
    }

    let face = |f: Face| -> Result<FaceMetric> {
        let (len, fixed) = match f {
            Face::West | Face::East => (n2 + 1, Face::West),
            Face::South | Face::North => (n1 + 1, Face::South),
        };
        let _ = fixed;
        let mut s_j = Array1::zeros(len);
        let mut nn1 = Array1::zeros(len);
        let mut nn2 = Array1::zeros(len);
        for p in 0..len {
            let (k, l) = match f {
                Face::West => (0, p),
                Face::East => (n1, p),
                Face::South => (p, 0),
                Face::North => (p, n2),
            };
            // gradient row of the fixed reference coordinate, times J
            let (g1, g2, sign) = match f {
                Face::West => (a[0][0][[k, l]], a[0][1][[k, l]], -1.0),
                Face::East => (a[0][0][[k, l]], a[0][1][[k, l]], 1.0),
                Face::South => (a[1][0][[k, l]], a[1][1][[k, l]], -1.0),
                Face::North => (a[1][0][[k, l]], a[1][1][[k, l]], 1.0),
            };
            let sj = (g1 * g1 + g2 * g2).sqrt();
            if sj <= 0.0 {
                return Err(Error::NonPositiveSurfaceJacobian(sj));
            }
            s_j[p] = sj;
            nn1[p] = sign * g1 / sj;
            nn2[p] = sign * g2 / sj;
        }
        Ok(FaceMetric {
            s_j,
            n1: nn1,
            n2: nn2,
        })
    };

    Ok(MetricData {
        west: face(Face::West)?,
        east: face(Face::East)?,
        south: face(Face::South)?,
        north: face(Face::North)?,
        jac,
        a,
        x1,
        x2,
    })
}

/// Max residual of the inverse-metric identities over a sample grid, checked
/// directly from the analytic jet.
pub fn metric_identity_residual(t: &dyn Transform, samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..=samples {
        for l in 0..=samples {
            let xi1 = -1.0 + 2.0 * k as f64 / samples as f64;
            let xi2 = -1.0 + 2.0 * l as f64 / samples as f64;
            let jet = t.eval(xi1, xi2);
            let (j, a) = jet_metrics(&jet);
            let d = &jet.dx_dxi;
            worst = worst.max((a[0][0] - d[1][1]).abs());
            worst = worst.max((a[0][1] + d[0][1]).abs());
            worst = worst.max((a[1][0] + d[1][0]).abs());
            worst = worst.max((a[1][1] - d[0][0]).abs());
            // a / J must invert dx_dxi
            let inv = [
                [a[0][0] / j, a[0][1] / j],
                [a[1][0] / j, a[1][1] / j],
            ];
            let prod = [
                [
                    inv[0][0] * d[0][0] + inv[0][1] * d[1][0],
                    inv[0][0] * d[0][1] + inv[0][1] * d[1][1],
                ],
                [
                    inv[1][0] * d[0][0] + inv[1][1] * d[1][0],
                    inv[1][0] * d[0][1] + inv[1][1] * d[1][1],
                ],
            ];
            for (r, row) in prod.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max((v - expect).abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_metrics_are_trivial() {
        let m = metrics_for_block(&Identity, 4, 6).unwrap();
        for v in m.jac.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
        }
        for f in [Face::West, Face::East, Face::South, Face::North] {
            let fm = m.face(f);
            for p in 0..fm.s_j.len() {
                assert_abs_diff_eq!(fm.s_j[p], 1.0, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(m.face(Face::West).n1[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.face(Face::East).n1[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.face(Face::South).n2[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.face(Face::North).n2[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn curved_left_point_value_matches_hand_evaluation() {
        let jet = CurvedLeft.eval(1.0, -0.5);
        assert_abs_diff_eq!(jet.x[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(jet.x[1], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn affine_double_has_j4_and_face_scaling_2() {
        let t = Affine {
            origin: [0.0, 0.0],
            matrix: [[2.0, 0.0], [0.0, 2.0]],
        };
        let m = metrics_for_block(&t, 3, 3).unwrap();
        for v in m.jac.iter() {
            assert_abs_diff_eq!(*v, 4.0, epsilon = 1e-14);
        }
        for f in [Face::West, Face::East, Face::South, Face::North] {
            for v in m.face(f).s_j.iter() {
                assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn metric_identities_hold_for_the_catalog() {
        let reg = TransformRegistry::with_catalog();
        for name in [
            "identity",
            "affine-2x",
            "curved-left",
            "curved-right",
            "curved-right-top",
            "curved-right-bottom",
        ] {
            let t = reg.get(name).unwrap();
            let res = metric_identity_residual(t.as_ref(), 17);
            assert!(res <= 1e-12, "{name}: residual {res:.2e}");
        }
    }

    #[test]
    fn curved_pair_is_conforming_along_the_interface() {
        for p in 0..=40 {
            let xi2 = -1.0 + 2.0 * p as f64 / 40.0;
            let l = CurvedLeft.eval(1.0, xi2);
            let r = CurvedRight.eval(-1.0, xi2);
            assert_abs_diff_eq!(l.x[0], r.x[0], epsilon = 1e-14);
            assert_abs_diff_eq!(l.x[1], r.x[1], epsilon = 1e-14);
            let (c, _) = interface_curve(xi2);
            assert_abs_diff_eq!(l.x[0], c[0], epsilon = 1e-14);
        }
    }

    #[test]
    fn nonpositive_jacobian_is_reported() {
        struct Fold;
        impl Transform for Fold {
            fn eval(&self, xi1: f64, xi2: f64) -> TransformJet {
                // flips orientation
                TransformJet {
                    x: [-xi1, xi2],
                    dx_dxi: [[-1.0, 0.0], [0.0, 1.0]],
                }
            }
        }
        assert!(matches!(
            metrics_for_block(&Fold, 2, 2),
            Err(Error::NonPositiveJacobian { .. })
        ));
    }
}
