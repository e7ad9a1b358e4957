//! 1-D diagonal-norm summation-by-parts first-derivative operators.
//!
//! An operator is the bundle `(H, Q, D, B)` on an `N+1`-point grid over
//! `[-1, 1]`: `D = H^{-1} Q`, `H` diagonal positive, `Q + Q^T = B =
//! diag(-1, 0, ..., 0, 1)`. Interior rows carry a central stencil of order
//! `2q`; the `closure_width` rows at each end carry one-sided stencils of
//! order `q`.
//!
//! Coefficients are read from a checked-in data file (`data/sbp_operators.txt`,
//! embedded at compile time) holding decimal strings; [`derive`] reconstructs
//! the same tables from the defining accuracy and norm conditions, and the
//! test suite keeps the two in agreement.

pub mod derive;

use crate::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use std::sync::OnceLock;

const DATA: &str = include_str!("../../data/sbp_operators.txt");

/// Raw coefficient table for one operator family on a unit-spacing grid.
#[derive(Debug, Clone)]
pub struct SbpCoefficients {
    pub boundary_order: usize,
    pub interior_order: usize,
    pub closure_width: usize,
    /// boundary norm weights (interior weight is 1)
    pub h_boundary: Vec<f64>,
    /// interior stencil of `D` (= of `Q`), offsets `-q..=q`
    pub interior: Vec<f64>,
    /// boundary block of `Q`, `closure_width` rows by `closure_width + q` columns
    pub q_block: Array2<f64>,
}

/// 1-D diagonal-norm SBP operator realized on an `n_points` grid over `[-1,1]`.
#[derive(Debug, Clone)]
pub struct SbpOperator1D {
    pub n_points: usize,
    pub spacing: f64,
    pub boundary_order: usize,
    pub interior_order: usize,
    pub closure_width: usize,
    /// unscaled boundary norm weights (interior weight 1)
    pub h_boundary: Vec<f64>,
    /// H diagonal including the `spacing` factor
    h_diag: Array1<f64>,
    /// interior stencil of D, scaled by 1/spacing
    d_interior: Vec<f64>,
    /// boundary rows of D, scaled by 1/spacing
    d_boundary: Array2<f64>,
}

fn coefficient_tables() -> &'static [SbpCoefficients] {
    static TABLES: OnceLock<Vec<SbpCoefficients>> = OnceLock::new();
    TABLES.get_or_init(|| parse_data(DATA).expect("embedded SBP table is well-formed"))
}

/// Parse the coefficient data format (see the header of the data file).
pub fn parse_data(text: &str) -> Result<Vec<SbpCoefficients>> {
    let bad = |msg: &str| Error::BadCoefficientData(msg.to_string());
    let mut out = Vec::new();
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    while let Some(line) = lines.next() {
        let mut kv = std::collections::HashMap::new();
        let mut parts = line.split_whitespace();
        if parts.next() != Some("operator") {
            return Err(bad("expected 'operator' section header"));
        }
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| bad("malformed header field"))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<usize> {
            kv.get(k)
                .ok_or_else(|| bad(&format!("missing header field {k}")))?
                .parse()
                .map_err(|_| bad(&format!("bad value for {k}")))
        };
        let q = get("q")?;
        let interior_order = get("interior_order")?;
        let w = get("closure_width")?;
        let parse_row = |l: &str| -> Result<Vec<f64>> {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad("bad number")))
                .collect()
        };
        let hline = lines.next().ok_or_else(|| bad("missing h line"))?;
        let h_boundary = parse_row(hline.strip_prefix("h").ok_or_else(|| bad("expected h line"))?)?;
        let iline = lines.next().ok_or_else(|| bad("missing interior line"))?;
        let interior = parse_row(
            iline
                .strip_prefix("interior")
                .ok_or_else(|| bad("expected interior line"))?,
        )?;
        if h_boundary.len() != w || interior.len() != interior_order + 1 {
            return Err(bad("h/interior length mismatch"));
        }
        let mut rows = Vec::with_capacity(w);
        for k in 0..w {
            let rline = lines.next().ok_or_else(|| bad("missing row line"))?;
            let rest = rline
                .strip_prefix("row")
                .ok_or_else(|| bad("expected row line"))?;
            let vals = parse_row(rest)?;
            if vals.len() != w + q + 1 {
                return Err(bad("row length mismatch"));
            }
            let idx = vals[0] as usize;
            if idx != k {
                return Err(bad("row index out of order"));
            }
            rows.push(vals[1..].to_vec());
        }
        if lines.next() != Some("end") {
            return Err(bad("missing 'end'"));
        }

        // Rebuild the block with exact almost-skew-symmetry: the upper
        // triangle and the out-of-block columns are taken as stored, the
        // lower triangle mirrors the upper. Stored lower entries must agree.
        let mut q_block = Array2::zeros((w, w + q));
        for k in 0..w {
            q_block[[k, k]] = if k == 0 { -0.5 } else { 0.0 };
            for j in (k + 1)..(w + q) {
                q_block[[k, j]] = rows[k][j];
            }
        }
        for k in 0..w {
            for j in 0..k {
                q_block[[k, j]] = -q_block[[j, k]];
                if (rows[k][j] - q_block[[k, j]]).abs() > 1e-13 {
                    return Err(bad("stored lower triangle violates skew symmetry"));
                }
            }
            if (rows[k][k] - q_block[[k, k]]).abs() > 1e-13 {
                return Err(bad("stored diagonal violates skew symmetry"));
            }
        }
        out.push(SbpCoefficients {
            boundary_order: q,
            interior_order,
            closure_width: w,
            h_boundary,
            interior,
            q_block,
        });
    }
    Ok(out)
}

/// Serialize coefficient tables in the data-file format with 17 significant
/// digits (enough for exact f64 round-trip).
pub fn format_data(tables: &[SbpCoefficients]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    s.push_str(
        "# 1-D diagonal-norm SBP first-derivative coefficients on a unit-spacing grid.\n\
         # For each boundary order q (interior order 2q):\n\
         #   h        boundary norm weights (closure_width values; interior weight is 1)\n\
         #   interior interior stencil of Q (= of D), row offsets -q..q\n\
         #   row k    boundary row k of Q, columns 0..closure_width+q-1\n\
         # Values carry 17 significant digits.\n",
    );
    for t in tables {
        writeln!(
            s,
            "operator q={} interior_order={} closure_width={}",
            t.boundary_order, t.interior_order, t.closure_width
        )
        .unwrap();
        let fmt = |v: f64| format!("{v:.16e}");
        writeln!(
            s,
            "h {}",
            t.h_boundary.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        writeln!(
            s,
            "interior {}",
            t.interior.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        for k in 0..t.closure_width {
            let row: Vec<String> = t.q_block.row(k).iter().map(|&v| fmt(v)).collect();
            writeln!(s, "row {k} {}", row.join(" ")).unwrap();
        }
        writeln!(s, "end").unwrap();
    }
    s
}

/// Look up the coefficient table for boundary order `q`.
pub fn coefficients(q: usize) -> Result<&'static SbpCoefficients> {
    coefficient_tables()
        .iter()
        .find(|t| t.boundary_order == q)
        .ok_or(Error::UnsupportedOrder(q))
}

/// Build the SBP operator of boundary order `q` on `n_cells + 1` points over
/// `[-1, 1]`.
pub fn build_sbp(q: usize, n_cells: usize) -> Result<SbpOperator1D> {
    let c = coefficients(q)?;
    SbpOperator1D::from_coefficients(c, n_cells)
}

impl SbpOperator1D {
    pub fn from_coefficients(c: &SbpCoefficients, n_cells: usize) -> Result<Self> {
        let n_points = n_cells + 1;
        let w = c.closure_width;
        if n_points < 2 * w {
            return Err(Error::GridTooSmall {
                points: n_points,
                closure: w,
            });
        }
        let h = 2.0 / n_cells as f64;
        let mut h_diag = Array1::from_elem(n_points, h);
        for k in 0..w {
            h_diag[k] = h * c.h_boundary[k];
            h_diag[n_points - 1 - k] = h * c.h_boundary[k];
        }
        let d_interior: Vec<f64> = c.interior.iter().map(|v| v / h).collect();
        let mut d_boundary = Array2::zeros((w, w + c.boundary_order));
        for k in 0..w {
            for j in 0..(w + c.boundary_order) {
                d_boundary[[k, j]] = c.q_block[[k, j]] / (c.h_boundary[k] * h);
            }
        }
        Ok(SbpOperator1D {
            n_points,
            spacing: h,
            boundary_order: c.boundary_order,
            interior_order: c.interior_order,
            closure_width: w,
            h_boundary: c.h_boundary.clone(),
            h_diag,
            d_interior,
            d_boundary,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_points - 1
    }

    /// Diagonal of the norm matrix `H` (includes the grid spacing).
    pub fn h_diag(&self) -> &Array1<f64> {
        &self.h_diag
    }

    /// Interior stencil of `D` (scaled by `1/spacing`), offsets `-q..=q`.
    pub fn d_interior(&self) -> &[f64] {
        &self.d_interior
    }

    /// Boundary rows of `D` (scaled by `1/spacing`).
    pub fn d_boundary(&self) -> &Array2<f64> {
        &self.d_boundary
    }

    /// Grid coordinates on `[-1, 1]`.
    pub fn grid(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n_points).map(|k| -1.0 + self.spacing * k as f64))
    }

    /// Apply `D` to a vector.
    pub fn apply_d(&self, f: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let n = self.n_points;
        debug_assert_eq!(f.len(), n);
        debug_assert_eq!(out.len(), n);
        let w = self.closure_width;
        let q = self.boundary_order;
        let bw = w + q;
        for k in 0..w {
            let mut accl = 0.0;
            let mut accr = 0.0;
            for j in 0..bw {
                let c = self.d_boundary[[k, j]];
                accl += c * f[j];
                // mirrored right closure with sign flip
                accr -= c * f[n - 1 - j];
            }
            out[k] = accl;
            out[n - 1 - k] = accr;
        }
        for k in w..(n - w) {
            let mut acc = 0.0;
            for (s, c) in self.d_interior.iter().enumerate() {
                acc += c * f[k - q + s];
            }
            out[k] = acc;
        }
    }

    /// Dense `D`.
    pub fn d_matrix(&self) -> Array2<f64> {
        let n = self.n_points;
        let mut d = Array2::zeros((n, n));
        let mut e = Array1::zeros(n);
        let mut col = Array1::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            self.apply_d(e.view(), col.view_mut());
            for i in 0..n {
                d[[i, j]] = col[i];
            }
        }
        d
    }

    /// Dense `Q = H D`.
    pub fn q_matrix(&self) -> Array2<f64> {
        let mut q = self.d_matrix();
        for (i, mut row) in q.outer_iter_mut().enumerate() {
            row.mapv_inplace(|v| v * self.h_diag[i]);
        }
        q
    }

    /// Dense `B = diag(-1, 0, ..., 0, 1)`.
    pub fn b_matrix(&self) -> Array2<f64> {
        let n = self.n_points;
        let mut b = Array2::zeros((n, n));
        b[[0, 0]] = -1.0;
        b[[n - 1, n - 1]] = 1.0;
        b
    }
}

/// One line of the accuracy report produced by [`verify_sbp_accuracy`].
#[derive(Debug, Clone)]
pub struct AccuracyEntry {
    pub degree: usize,
    /// "interior" or "boundary"
    pub region: &'static str,
    pub max_error: f64,
    /// true when the error violates the order contract for this region
    pub flagged: bool,
}

/// Certify derivative exactness of an operator: apply `D` to samples of
/// `x^m` for `m = 0..=interior_order` and report the max pointwise error in
/// the interior and closure regions. The contract is exactness (to
/// `1e-10 * N`) for `m <= interior_order` at interior rows and
/// `m <= boundary_order` at closure rows.
pub fn verify_sbp_accuracy(op: &SbpOperator1D) -> Vec<AccuracyEntry> {
    let n = op.n_points;
    let w = op.closure_width;
    let x = op.grid();
    let tol = 1e-10 * op.n_cells() as f64;
    let mut out = Vec::new();
    let mut df = Array1::zeros(n);
    for m in 0..=op.interior_order {
        let f = x.mapv(|v| v.powi(m as i32));
        let exact = if m == 0 {
            Array1::zeros(n)
        } else {
            x.mapv(|v| m as f64 * v.powi(m as i32 - 1))
        };
        op.apply_d(f.view(), df.view_mut());
        let err = &df - &exact;
        let interior_err = err
            .iter()
            .take(n - w)
            .skip(w)
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let boundary_err = err
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < w || *i >= n - w)
            .fold(0.0f64, |a, (_, v)| a.max(v.abs()));
        out.push(AccuracyEntry {
            degree: m,
            region: "interior",
            max_error: interior_err,
            flagged: m <= op.interior_order && interior_err > tol,
        });
        out.push(AccuracyEntry {
            degree: m,
            region: "boundary",
            max_error: boundary_err,
            flagged: m <= op.boundary_order && boundary_err > tol,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn q1_n4_matches_the_closed_form_operator() {
        let op = build_sbp(1, 4).unwrap();
        let h = 0.5;
        let expect_h = [0.5 * h, h, h, h, 0.5 * h];
        for (a, b) in op.h_diag().iter().zip(expect_h.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let d = op.d_matrix();
        let first: Vec<f64> = d.row(0).to_vec();
        assert_abs_diff_eq!(first[0], -1.0 / h, epsilon = 1e-13);
        assert_abs_diff_eq!(first[1], 1.0 / h, epsilon = 1e-13);
        for v in &first[2..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn q_plus_qt_equals_b_for_all_orders() {
        for q in 1..=5 {
            let op = build_sbp(q, 32).unwrap();
            let qm = op.q_matrix();
            let b = op.b_matrix();
            let skew = (&qm + &qm.t()) - &b;
            let max = skew.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max <= 1e-14, "q={q}: skew residual {max:.2e}");
        }
    }

    #[test]
    fn derivative_exactness_holds_per_order_contract() {
        for q in 1..=5 {
            for n in [16usize, 32, 64] {
                match build_sbp(q, n) {
                    Ok(op) => {
                        let report = verify_sbp_accuracy(&op);
                        for e in &report {
                            assert!(!e.flagged, "q={q} N={n} degree {} {}: {:.2e}", e.degree, e.region, e.max_error);
                        }
                    }
                    Err(Error::GridTooSmall { .. }) => {
                        // closures overlap (q=5 at N=16); contract is the error
                        assert!(2 * coefficients(q).unwrap().closure_width > n + 1);
                    }
                    Err(e) => panic!("unexpected error: {e}"),
                }
            }
        }
    }

    #[test]
    fn x_cubed_derivative_is_exact_in_the_interior_for_q2() {
        let op = build_sbp(2, 16).unwrap();
        let x = op.grid();
        let f = x.mapv(|v| v * v * v);
        let mut df = Array1::zeros(op.n_points);
        op.apply_d(f.view(), df.view_mut());
        for k in op.closure_width..(op.n_points - op.closure_width) {
            assert_abs_diff_eq!(df[k], 3.0 * x[k] * x[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn unsupported_order_and_small_grid_are_rejected() {
        assert!(matches!(build_sbp(0, 16), Err(Error::UnsupportedOrder(0))));
        assert!(matches!(build_sbp(6, 16), Err(Error::UnsupportedOrder(6))));
        assert!(matches!(build_sbp(5, 12), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn constant_input_has_zero_derivative_everywhere() {
        for q in 1..=5 {
            let op = build_sbp(q, 32).unwrap();
            let f = Array1::from_elem(op.n_points, 3.7);
            let mut df = Array1::zeros(op.n_points);
            op.apply_d(f.view(), df.view_mut());
            let tol = 5e-13 * op.n_cells() as f64;
            for v in df.iter() {
                assert!(v.abs() < tol);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn discrete_integration_by_parts(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for q in 1..=3usize {
                let op = build_sbp(q, 24).unwrap();
                let n = op.n_points;
                let u = Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0)));
                let f = Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0)));
                let mut du = Array1::zeros(n);
                let mut dfv = Array1::zeros(n);
                op.apply_d(u.view(), du.view_mut());
                op.apply_d(f.view(), dfv.view_mut());
                let h = op.h_diag();
                let lhs: f64 = (0..n).map(|i| u[i] * h[i] * dfv[i] + f[i] * h[i] * du[i]).sum();
                let rhs = u[n - 1] * f[n - 1] - u[0] * f[0];
                let unorm = u.dot(&u).sqrt();
                let fnorm = f.dot(&f).sqrt();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * unorm * fnorm + 1e-13);
            }
        }
    }
}
