//! Piecewise-polynomial glue spaces and norm-compatible projection pairs.
//!
//! A glue space holds discontinuous piecewise Legendre expansions on a
//! partition of an interface segment. A projection pair `(P_f2g, P_g2f)`
//! moves a grid trace into the glue and back subject to the compatibility
//! relation `delta * P_g2f^T H = M P_f2g`, which is what the energy estimates
//! rely on; accuracy conditions (exact transfer of polynomials up to the
//! interior/boundary order of the finite difference operator) pin the
//! coefficients up to a residual null space.
//!
//! Interior grid points take contributions from the `2l` surrounding
//! intervals through one symmetric stencil; the `s+1` points nearest a
//! boundary take contributions from the first `r` intervals. The stencil and
//! closure coefficients are found once per operator family from a linear
//! constraint system and then realized on any grid.

use crate::lsq::min_norm_lstsq;
use crate::poly::{legendre, legendre_modal_coeffs};
use crate::sbp::{self, SbpOperator1D};
use crate::{Error, Result};
use ndarray::{Array1, Array2, Array3};
use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

/// Construction parameters per boundary order (interior order `2q`):
/// `l` half-width of the interior stencil, `s + 1` boundary points,
/// `r` boundary intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlueParams {
    pub q: usize,
    pub l: usize,
    pub s_plus_1: usize,
    pub r: usize,
    /// per-interval polynomial order `n = 2q - 1`
    pub n: usize,
}

impl GlueParams {
    pub fn for_order(q: usize) -> Result<Self> {
        let (l, s_plus_1, r) = match q {
            1 => (1, 1, 1),
            2 => (2, 4, 5),
            3 => (3, 6, 8),
            4 => (4, 9, 12),
            5 => (5, 12, 16),
            _ => return Err(Error::UnsupportedOrder(q)),
        };
        debug_assert_eq!(s_plus_1, r + 1 - l);
        Ok(GlueParams {
            q,
            l,
            s_plus_1,
            r,
            n: 2 * q - 1,
        })
    }

    /// total unknowns `n_d = m(n+1) + r(s+1)(n+1)` with `m = 2l`
    pub fn unknown_count(&self) -> usize {
        let np1 = self.n + 1;
        2 * self.l * np1 + self.r * self.s_plus_1 * np1
    }

    /// total constraints `n_c = l(n+1) + p_i + p_i(n+1) + (s+1)p_b + r p_b (n+1)`
    pub fn constraint_count(&self) -> usize {
        let np1 = self.n + 1;
        let (pi, pb) = (2 * self.q, self.q);
        self.l * np1 + pi + pi * np1 + self.s_plus_1 * pb + self.r * pb * np1
    }
}

/// A piecewise-polynomial space on a partition with a Legendre basis per
/// interval and a diagonal mass matrix.
#[derive(Debug, Clone)]
pub struct GlueSpace {
    pub breakpoints: Vec<f64>,
    /// polynomial order per interval
    pub orders: Vec<usize>,
    /// diagonal of the mass matrix, interval-major
    pub mass: Array1<f64>,
    /// dof offset per interval
    offsets: Vec<usize>,
}

impl GlueSpace {
    pub fn new(breakpoints: Vec<f64>, orders: Vec<usize>) -> Self {
        assert_eq!(orders.len() + 1, breakpoints.len());
        assert!(breakpoints.windows(2).all(|w| w[1] > w[0]));
        let mut offsets = Vec::with_capacity(orders.len());
        let mut mass = Vec::new();
        let mut off = 0;
        for (k, &n) in orders.iter().enumerate() {
            offsets.push(off);
            let w = breakpoints[k + 1] - breakpoints[k];
            for i in 0..=n {
                mass.push(w / (2.0 * i as f64 + 1.0));
            }
            off += n + 1;
        }
        GlueSpace {
            breakpoints,
            orders,
            mass: Array1::from_vec(mass),
            offsets,
        }
    }

    /// Uniform partition of `[lo, hi]` into `n_cells` intervals of order `n`.
    pub fn uniform(lo: f64, hi: f64, n_cells: usize, n: usize) -> Self {
        assert!(n_cells >= 1);
        let pts = (0..=n_cells)
            .map(|k| lo + (hi - lo) * k as f64 / n_cells as f64)
            .collect();
        GlueSpace::new(pts, vec![n; n_cells])
    }

    pub fn n_intervals(&self) -> usize {
        self.orders.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.mass.len()
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    pub fn dof_offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    pub fn dof_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k] + self.orders[k] + 1
    }

    pub fn span(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Modal representation of a scalar function, exact for polynomials of
    /// degree <= interval order (the projection oracle used in tests and
    /// certificates).
    pub fn project_function(&self, f: impl Fn(f64) -> f64 + Copy) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_dofs());
        for k in 0..self.n_intervals() {
            let (lo, hi) = self.interval(k);
            let c = legendre_modal_coeffs(f, lo, hi, self.orders[k]);
            out.slice_mut(ndarray::s![self.dof_range(k)]).assign(&c);
        }
        out
    }

    /// Evaluate a modal vector at a point (intervals are half-open; the last
    /// one is closed).
    pub fn evaluate(&self, modal: &Array1<f64>, x: f64) -> f64 {
        let k = match self
            .breakpoints
            .windows(2)
            .position(|w| x >= w[0] && x < w[1])
        {
            Some(k) => k,
            None => self.n_intervals() - 1,
        };
        let (lo, hi) = self.interval(k);
        let t = (2.0 * x - lo - hi) / (hi - lo);
        let mut acc = 0.0;
        for i in 0..=self.orders[k] {
            acc += modal[self.offsets[k] + i] * legendre(i, t);
        }
        acc
    }

    /// The restriction of this space to the intervals covering `[lo, hi]`,
    /// together with the dof range of that restriction.
    pub fn restrict(&self, lo: f64, hi: f64, tol: f64) -> Result<(GlueSpace, Range<usize>)> {
        let k0 = self
            .breakpoints
            .iter()
            .position(|&b| (b - lo).abs() <= tol)
            .ok_or_else(|| Error::NotNested(format!("{lo} is not a breakpoint")))?;
        let k1 = self
            .breakpoints
            .iter()
            .position(|&b| (b - hi).abs() <= tol)
            .ok_or_else(|| Error::NotNested(format!("{hi} is not a breakpoint")))?;
        if k1 <= k0 {
            return Err(Error::NotNested("empty restriction".into()));
        }
        let sub = GlueSpace::new(
            self.breakpoints[k0..=k1].to_vec(),
            self.orders[k0..k1].to_vec(),
        );
        Ok((
            sub,
            self.offsets[k0]..self.offsets[k1 - 1] + self.orders[k1 - 1] + 1,
        ))
    }
}

/// The glue space conforming to an `n_cells + 1`-point equispaced grid on
/// `[-1, 1]`: one interval per grid cell, order `interior_order - 1`.
pub fn build_glue_for_grid(n_cells: usize, interior_order: usize) -> GlueSpace {
    GlueSpace::uniform(-1.0, 1.0, n_cells, interior_order - 1)
}

/// Interior stencil and boundary closure coefficients of a projection family.
#[derive(Debug, Clone)]
pub struct ProjectionCoefficients {
    pub params: GlueParams,
    /// `c_left[(j-1, i)]`: weight of mode `i` of the `j`-th interval left of a
    /// grid point (`j = 1..=l`)
    pub c_left: Array2<f64>,
    /// `c_right[(j-1, i)]`: weight of mode `i` of the `j`-th interval right of
    /// a grid point
    pub c_right: Array2<f64>,
    /// `alpha[(k, j, i)]`: weight of mode `i` of interval `j` (`0..r`) for
    /// boundary grid point `k` (`0..=s`)
    pub alpha: Array3<f64>,
    /// residual of the (scaled) constraint system
    pub residual: f64,
    pub rank: usize,
}

/// The assembled linear constraint system for one operator family.
pub struct ConstraintSystem {
    pub params: GlueParams,
    pub matrix: Array2<f64>,
    pub rhs: Array1<f64>,
    /// H closure weights of the associated SBP family (unit spacing)
    pub h_boundary: Vec<f64>,
}

impl ConstraintSystem {
    pub fn unknown_count(&self) -> usize {
        self.matrix.ncols()
    }
    pub fn constraint_count(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Unknown layout inside the constraint system.
#[derive(Clone, Copy)]
struct Layout {
    l: usize,
    n: usize,
    r: usize,
}

impl Layout {
    fn left(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.l).contains(&j));
        (j - 1) * (self.n + 1) + i
    }
    fn right(&self, i: usize, j: usize) -> usize {
        self.l * (self.n + 1) + (j - 1) * (self.n + 1) + i
    }
    fn alpha(&self, k: usize, i: usize, j: usize) -> usize {
        2 * self.l * (self.n + 1) + k * self.r * (self.n + 1) + j * (self.n + 1) + i
    }
}

/// Assemble the projection constraint system for boundary order `q`.
///
/// The system is posed on a unit-spacing half-line grid whose first
/// `closure_width` points carry the boundary norm weights of the SBP family.
pub fn assemble_projection_constraints(q: usize) -> Result<ConstraintSystem> {
    let params = GlueParams::for_order(q)?;
    let coeffs = sbp::coefficients(q)?;
    let (l, s, r, n) = (params.l, params.s_plus_1 - 1, params.r, params.n);
    let (pi, pb) = (2 * q, q);
    let lay = Layout { l, n, r };
    let n_unk = params.unknown_count();
    let w = coeffs.closure_width;
    let h_at = |g: usize| -> f64 {
        if g < w {
            coeffs.h_boundary[g]
        } else {
            1.0
        }
    };
    // mass of mode i on a unit-width interval
    let m_i = |i: usize| 1.0 / (2.0 * i as f64 + 1.0);
    // modal coefficients of f on [a, a+1]
    let modal =
        |f: &dyn Fn(f64) -> f64, a: f64| -> Array1<f64> { legendre_modal_coeffs(f, a, a + 1.0, n) };

    let mut rows: Vec<Array1<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    // 1. symmetry of the interior stencil: c_left = (-1)^i c_right
    for j in 1..=l {
        for i in 0..=n {
            let mut row = Array1::zeros(n_unk);
            row[lay.left(i, j)] = 1.0;
            row[lay.right(i, j)] = -if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(row);
            rhs.push(0.0);
        }
    }

    // representative interior point / interval far from the closure
    let kstar = (w + l + r + 4) as f64;
    let kint = w + l + r + 4; // interval [kint, kint+1]

    // 2. interior grid-point exactness for polynomials of degree < p_i
    for d in 0..pi {
        let f = |x: f64| legendre(d, (x - kstar) / l as f64);
        let mut row = Array1::zeros(n_unk);
        for j in 1..=l {
            let wl = modal(&f, kstar - j as f64);
            let wr = modal(&f, kstar - 1.0 + j as f64);
            for i in 0..=n {
                row[lay.left(i, j)] += wl[i];
                row[lay.right(i, j)] += wr[i];
            }
        }
        rows.push(row);
        rhs.push(f(kstar));
    }

    // 3. interior modal exactness of the induced grid-to-glue projection
    for d in 0..pi {
        let c0 = kint as f64 + 0.5;
        let f = |x: f64| legendre(d, (x - c0) / l as f64);
        let wexact = modal(&f, kint as f64);
        for i in 0..=n {
            let mut row = Array1::zeros(n_unk);
            for j in 1..=l {
                row[lay.left(i, j)] += f((kint + j) as f64);
                row[lay.right(i, j)] += f((kint + 1 - j) as f64);
            }
            rows.push(row);
            rhs.push(m_i(i) * wexact[i]);
        }
    }

    // 4. boundary grid-point exactness for polynomials of degree < p_b
    for k in 0..=s {
        for d in 0..pb {
            let f = |x: f64| legendre(d, 2.0 * x / r as f64 - 1.0);
            let mut row = Array1::zeros(n_unk);
            for j in 0..r {
                let wj = modal(&f, j as f64);
                for i in 0..=n {
                    row[lay.alpha(k, i, j)] += wj[i];
                }
            }
            rows.push(row);
            rhs.push(f(k as f64));
        }
    }

    // 5. boundary modal exactness: interval j takes weight from the closure
    //    points (alpha) and the interior points whose stencils reach it
    for j in 0..r {
        for d in 0..pb {
            let span = (r + l) as f64;
            let f = |x: f64| legendre(d, 2.0 * x / span - 1.0);
            let wexact = modal(&f, j as f64);
            for i in 0..=n {
                let mut row = Array1::zeros(n_unk);
                for g in 0..=s {
                    row[lay.alpha(g, i, j)] += h_at(g) * f(g as f64);
                }
                let g_lo = (s + 1).max(j.saturating_sub(l - 1));
                for g in g_lo..=(j + l) {
                    let jj = g as isize - j as isize;
                    if (1..=l as isize).contains(&jj) {
                        row[lay.left(i, jj as usize)] += h_at(g) * f(g as f64);
                    }
                    let jj = j as isize - g as isize + 1;
                    if (1..=l as isize).contains(&jj) {
                        row[lay.right(i, jj as usize)] += h_at(g) * f(g as f64);
                    }
                }
                rows.push(row);
                rhs.push(m_i(i) * wexact[i]);
            }
        }
    }

    debug_assert_eq!(rows.len(), params.constraint_count());
    let mut matrix = Array2::zeros((rows.len(), n_unk));
    for (i, r) in rows.iter().enumerate() {
        matrix.row_mut(i).assign(r);
    }
    Ok(ConstraintSystem {
        params,
        matrix,
        rhs: Array1::from_vec(rhs),
        h_boundary: coeffs.h_boundary.clone(),
    })
}

fn unpack_solution(
    params: GlueParams,
    x: &Array1<f64>,
    residual: f64,
    rank: usize,
) -> ProjectionCoefficients {
    let (l, s1, r, n) = (params.l, params.s_plus_1, params.r, params.n);
    let lay = Layout { l, n, r };
    let mut c_left = Array2::zeros((l, n + 1));
    let mut c_right = Array2::zeros((l, n + 1));
    for j in 1..=l {
        for i in 0..=n {
            c_left[[j - 1, i]] = x[lay.left(i, j)];
            c_right[[j - 1, i]] = x[lay.right(i, j)];
        }
    }
    let mut alpha = Array3::zeros((s1, r, n + 1));
    for k in 0..s1 {
        for j in 0..r {
            for i in 0..=n {
                alpha[[k, j, i]] = x[lay.alpha(k, i, j)];
            }
        }
    }
    ProjectionCoefficients {
        params,
        c_left,
        c_right,
        alpha,
        residual,
        rank,
    }
}

/// Solve the constraint system for the minimum-norm coefficient set, and
/// optionally spend the null-space freedom on clustering the eigenvalues of
/// the round trip `B = P_g2f P_f2g` (computed on an `N = 64` grid) toward one
/// another. Stability never depends on the refinement.
pub fn solve_projection_coefficients(
    system: &ConstraintSystem,
    refine: bool,
) -> Result<ProjectionCoefficients> {
    let sol = min_norm_lstsq(&system.matrix, &system.rhs, 1e-10);
    if sol.residual > 1e-8 {
        return Err(Error::InconsistentConstraints {
            residual: sol.residual,
        });
    }
    let base = unpack_solution(system.params, &sol.x, sol.residual, sol.rank);
    if !refine || sol.null_space.ncols() == 0 {
        return Ok(base);
    }

    let q = system.params.q;
    let op = sbp::build_sbp(q, 64)?;
    let objective = |x: &Array1<f64>| -> f64 {
        let c = unpack_solution(system.params, x, 0.0, 0);
        let pair = realize_pair(&c, &op, -1.0, 1.0);
        let b = pair.p_g2f.dot(&pair.p_f2g);
        eigen_gap_objective(&b)
    };
    let refined = nelder_mead(&sol.x, &sol.null_space, objective, 400);
    Ok(unpack_solution(
        system.params,
        &refined,
        sol.residual,
        sol.rank,
    ))
}

/// Sum of nearest-neighbour gaps of the eigenvalues of `b`.
fn eigen_gap_objective(b: &Array2<f64>) -> f64 {
    use ndarray_linalg::Eig;
    let (eigs, _) = b.eig().expect("eigendecomposition");
    let mut total = 0.0;
    for (i, ei) in eigs.iter().enumerate() {
        let mut nearest = f64::INFINITY;
        for (j, ej) in eigs.iter().enumerate() {
            if i != j {
                nearest = nearest.min((ei - ej).norm());
            }
        }
        if nearest.is_finite() {
            total += nearest;
        }
    }
    total
}

/// Local Nelder-Mead over `x = x0 + V t` (V orthonormal null-space basis).
fn nelder_mead(
    x0: &Array1<f64>,
    v: &Array2<f64>,
    f: impl Fn(&Array1<f64>) -> f64,
    max_iters: usize,
) -> Array1<f64> {
    let dim = v.ncols();
    let expand = |t: &Array1<f64>| -> Array1<f64> { x0 + &v.dot(t) };
    let eval = |t: &Array1<f64>| f(&expand(t));
    let mut simplex: Vec<(Array1<f64>, f64)> = Vec::with_capacity(dim + 1);
    let t0 = Array1::zeros(dim);
    simplex.push((t0.clone(), eval(&t0)));
    for k in 0..dim {
        let mut t = t0.clone();
        t[k] = 0.05;
        let val = eval(&t);
        simplex.push((t, val));
    }
    let (a_r, a_e, a_c, a_s) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = Array1::<f64>::zeros(dim);
        for (t, _) in simplex.iter().take(dim) {
            centroid += t;
        }
        centroid /= dim as f64;
        let xr = &centroid + &((&centroid - &simplex[dim].0) * a_r);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = &centroid + &((&xr - &centroid) * a_e);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let xc = &centroid + &((&simplex[dim].0 - &centroid) * a_c);
            let fc = eval(&xc);
            if fc < simplex[dim].1 {
                simplex[dim] = (xc, fc);
            } else {
                let x0s = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let t = &x0s + &((&entry.0 - &x0s) * a_s);
                    let v = eval(&t);
                    *entry = (t, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    expand(&simplex[0].0)
}

/// A realized grid <-> glue projection pair on a specific grid and glue span.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    /// grid values -> glue modal coefficients
    pub p_f2g: Array2<f64>,
    /// glue modal coefficients -> grid values
    pub p_g2f: Array2<f64>,
    /// diagonal of the source grid norm (H of the 1-D operator, or edge
    /// quadrature weights for a DG edge)
    pub source_norm: Array1<f64>,
    pub target_space: GlueSpace,
    /// interval fraction `delta = (hi - lo) / 2`
    pub delta: f64,
}

impl ProjectionPair {
    /// `max |delta P_g2f^T H - M P_f2g|`, relative to `max |M|`.
    pub fn compatibility_residual(&self) -> f64 {
        let m_max = self
            .target_space
            .mass
            .iter()
            .fold(0.0f64, |a, v| a.max(*v));
        let mut worst = 0.0f64;
        let (nd, np) = self.p_f2g.dim();
        for a in 0..nd {
            for g in 0..np {
                let lhs = self.delta * self.p_g2f[[g, a]] * self.source_norm[g];
                let rhs = self.target_space.mass[a] * self.p_f2g[[a, g]];
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst / m_max
    }
}

/// Realize the projection pair for `op` onto the glue space conforming to its
/// grid mapped onto `[lo, hi]`.
pub fn realize_pair(
    coeffs: &ProjectionCoefficients,
    op: &SbpOperator1D,
    lo: f64,
    hi: f64,
) -> ProjectionPair {
    let p = coeffs.params;
    let (l, s, r, n) = (p.l, p.s_plus_1 - 1, p.r, p.n);
    let n_cells = op.n_cells();
    assert!(
        n_cells >= 2 * r,
        "grid too small for the projection closure: {} cells < {}",
        n_cells,
        2 * r
    );
    let glue = GlueSpace::uniform(lo, hi, n_cells, n);
    let np1 = n + 1;
    let n_points = op.n_points;
    let mut p_g2f = Array2::zeros((n_points, glue.n_dofs()));
    // closure rows
    for k in 0..=s {
        for j in 0..r {
            for i in 0..=n {
                p_g2f[[k, j * np1 + i]] += coeffs.alpha[[k, j, i]];
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                p_g2f[[n_points - 1 - k, (n_cells - 1 - j) * np1 + i]] +=
                    sign * coeffs.alpha[[k, j, i]];
            }
        }
    }
    // interior rows
    for k in (s + 1)..(n_points - 1 - s) {
        for j in 1..=l {
            for i in 0..=n {
                p_g2f[[k, (k - j) * np1 + i]] += coeffs.c_left[[j - 1, i]];
                p_g2f[[k, (k - 1 + j) * np1 + i]] += coeffs.c_right[[j - 1, i]];
            }
        }
    }
    // compatibility defines the other direction: P_f2g = delta M^{-1} P_g2f^T H
    let delta = 0.5 * (hi - lo);
    let h = op.h_diag();
    let mut p_f2g = Array2::zeros((glue.n_dofs(), n_points));
    for a in 0..glue.n_dofs() {
        for g in 0..n_points {
            p_f2g[[a, g]] = delta * p_g2f[[g, a]] * h[g] / glue.mass[a];
        }
    }
    ProjectionPair {
        p_f2g,
        p_g2f,
        source_norm: h.clone(),
        target_space: glue,
        delta,
    }
}

fn coefficient_cache() -> &'static Mutex<HashMap<(usize, bool), Arc<ProjectionCoefficients>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<ProjectionCoefficients>>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached coefficient solve per `(q, refine)`.
pub fn projection_coefficients(q: usize, refine: bool) -> Result<Arc<ProjectionCoefficients>> {
    if let Some(c) = coefficient_cache().lock().unwrap().get(&(q, refine)) {
        return Ok(c.clone());
    }
    let system = assemble_projection_constraints(q)?;
    let solved = Arc::new(solve_projection_coefficients(&system, refine)?);
    coefficient_cache()
        .lock()
        .unwrap()
        .insert((q, refine), solved.clone());
    Ok(solved)
}

/// Solve the constraint system and realize the whole-interface pair
/// (`delta = 1`) for `op` on `[-1, 1]`.
pub fn solve_projection(
    system: &ConstraintSystem,
    op: &SbpOperator1D,
    refine: bool,
) -> Result<ProjectionPair> {
    let coeffs = solve_projection_coefficients(system, refine)?;
    Ok(realize_pair(&coeffs, op, -1.0, 1.0))
}

/// Basis embedding `P_a2b` of a coarse glue space into a nested finer one,
/// and the mass-compatible reverse map `P_b2a = M_a^{-1} P_a2b^T M_b`.
pub fn glue_to_glue(coarse: &GlueSpace, fine: &GlueSpace) -> Result<(Array2<f64>, Array2<f64>)> {
    let tol = 1e-12;
    let (clo, chi) = coarse.span();
    let (flo, fhi) = fine.span();
    if (clo - flo).abs() > tol || (chi - fhi).abs() > tol {
        return Err(Error::NotNested("spans differ".into()));
    }
    for b in &coarse.breakpoints {
        if !fine.breakpoints.iter().any(|fb| (fb - b).abs() <= tol) {
            return Err(Error::NotNested(format!("coarse breakpoint {b} missing")));
        }
    }
    let mut a2b = Array2::zeros((fine.n_dofs(), coarse.n_dofs()));
    let (xg, wg) = crate::poly::gauss_legendre(
        coarse.orders.iter().chain(fine.orders.iter()).max().unwrap() + 2,
    );
    let mut fk = 0usize;
    for ck in 0..coarse.n_intervals() {
        let (c_lo, c_hi) = coarse.interval(ck);
        while fk < fine.n_intervals() {
            let (f_lo, f_hi) = fine.interval(fk);
            if f_lo >= c_hi - tol {
                break;
            }
            if fine.orders[fk] < coarse.orders[ck] {
                return Err(Error::NotNested(format!(
                    "fine order {} below coarse order {} on interval {fk}",
                    fine.orders[fk], coarse.orders[ck]
                )));
            }
            let (fmid, fhalf) = (0.5 * (f_lo + f_hi), 0.5 * (f_hi - f_lo));
            for j in 0..=fine.orders[fk] {
                for i in 0..=coarse.orders[ck] {
                    let mut acc = 0.0;
                    for (t, w) in xg.iter().zip(wg.iter()) {
                        let x = fmid + fhalf * t;
                        let tc = (2.0 * x - c_lo - c_hi) / (c_hi - c_lo);
                        acc += w * legendre(i, tc) * legendre(j, *t);
                    }
                    a2b[[fine.dof_offset(fk) + j, coarse.dof_offset(ck) + i]] =
                        acc * (2.0 * j as f64 + 1.0) / 2.0;
                }
            }
            fk += 1;
        }
    }
    // P_b2a = M_a^{-1} P_a2b^T M_b
    let mut b2a = Array2::zeros((coarse.n_dofs(), fine.n_dofs()));
    for a in 0..coarse.n_dofs() {
        for b in 0..fine.n_dofs() {
            b2a[[a, b]] = a2b[[b, a]] * fine.mass[b] / coarse.mass[a];
        }
    }
    Ok((a2b, b2a))
}

/// One side member of an interface composition: a realized pair living on
/// `[beta_lo, beta_hi]`.
pub struct SideMember {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub pair: ProjectionPair,
}

/// A pair composed onto the common glue, restricted to the member's span.
#[derive(Debug, Clone)]
pub struct ComposedPair {
    pub p_f2g: Array2<f64>,
    pub p_g2f: Array2<f64>,
    pub source_norm: Array1<f64>,
    pub delta: f64,
    /// dof range of the member's span inside the common glue
    pub dof_range: Range<usize>,
}

pub struct ComposedInterface {
    pub common: GlueSpace,
    pub minus: Vec<ComposedPair>,
    pub plus: Vec<ComposedPair>,
}

fn check_partition(side: &[SideMember], name: &str) -> Result<()> {
    if side.is_empty() {
        return Err(Error::PartitionMismatch(format!("{name} side is empty")));
    }
    let tol = 1e-12;
    if (side[0].beta_lo + 1.0).abs() > tol {
        return Err(Error::PartitionMismatch(format!(
            "{name} side starts at {}",
            side[0].beta_lo
        )));
    }
    for w in side.windows(2) {
        if (w[0].beta_hi - w[1].beta_lo).abs() > tol {
            return Err(Error::PartitionMismatch(format!(
                "{name} side has a gap at {}",
                w[0].beta_hi
            )));
        }
    }
    if (side.last().unwrap().beta_hi - 1.0).abs() > tol {
        return Err(Error::PartitionMismatch(format!(
            "{name} side ends at {}",
            side.last().unwrap().beta_hi
        )));
    }
    Ok(())
}

/// Compose both sides of an interface onto the finest common glue space.
///
/// Every member pair projects onto its own glue over `[beta_lo, beta_hi]`;
/// the common space refines all member spaces (union of breakpoints, maximum
/// order), so the member pairs compose with basis embeddings and stay
/// compatible.
pub fn compose_to_common_glue(
    minus: Vec<SideMember>,
    plus: Vec<SideMember>,
) -> Result<ComposedInterface> {
    check_partition(&minus, "minus")?;
    check_partition(&plus, "plus")?;
    let tol = 1e-12;
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut order = 0usize;
    for m in minus.iter().chain(plus.iter()) {
        breakpoints.extend(m.pair.target_space.breakpoints.iter().cloned());
        order = order.max(*m.pair.target_space.orders.iter().max().unwrap());
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let n_int = breakpoints.len() - 1;
    let common = GlueSpace::new(breakpoints, vec![order; n_int]);

    let compose_side = |side: &[SideMember]| -> Result<Vec<ComposedPair>> {
        side.iter()
            .map(|m| {
                let (sub, dof_range) = common.restrict(m.beta_lo, m.beta_hi, tol)?;
                let (a2b, b2a) = glue_to_glue(&m.pair.target_space, &sub)?;
                Ok(ComposedPair {
                    p_f2g: a2b.dot(&m.pair.p_f2g),
                    p_g2f: m.pair.p_g2f.dot(&b2a),
                    source_norm: m.pair.source_norm.clone(),
                    delta: m.pair.delta,
                    dof_range,
                })
            })
            .collect()
    };
    Ok(ComposedInterface {
        minus: compose_side(&minus)?,
        plus: compose_side(&plus)?,
        common,
    })
}

impl ComposedPair {
    /// `max |delta P_g2f^T H - M_sub P_f2g| / max M` against a mass diagonal.
    pub fn compatibility_residual(&self, mass_sub: &[f64]) -> f64 {
        let m_max = mass_sub.iter().fold(0.0f64, |a, v| a.max(*v));
        let (nd, np) = self.p_f2g.dim();
        let mut worst = 0.0f64;
        for a in 0..nd {
            for g in 0..np {
                let lhs = self.delta * self.p_g2f[[g, a]] * self.source_norm[g];
                let rhs = mass_sub[a] * self.p_f2g[[a, g]];
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst / m_max
    }
}
