//! Rank-revealing minimum-norm least squares, shared by the operator and
//! projection constructors.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{JobSvd, SVDDC};

pub struct LsqSolution {
    pub x: Array1<f64>,
    /// max-abs residual of the row-equilibrated system
    pub residual: f64,
    pub rank: usize,
    /// orthonormal basis of the null space (columns), in original variables
    pub null_space: Array2<f64>,
}

/// Solve `A x = b` in the least-squares sense, returning the minimum-norm
/// solution. Rows and columns are equilibrated before the SVD; singular
/// values below `rtol * sigma_max` are treated as zero.
pub fn min_norm_lstsq(a: &Array2<f64>, b: &Array1<f64>, rtol: f64) -> LsqSolution {
    let (m, n) = a.dim();
    assert_eq!(b.len(), m);

    // row scaling (includes rhs so consistent systems stay consistent)
    let mut rs = Array1::<f64>::zeros(m);
    for i in 0..m {
        let mx = a
            .row(i)
            .iter()
            .fold(b[i].abs(), |acc, v| acc.max(v.abs()));
        rs[i] = if mx > 0.0 { mx } else { 1.0 };
    }
    let mut a1 = a.clone();
    for (i, mut row) in a1.axis_iter_mut(Axis(0)).enumerate() {
        row.mapv_inplace(|v| v / rs[i]);
    }
    let b1 = Array1::from_iter(b.iter().zip(rs.iter()).map(|(bi, ri)| bi / ri));

    // column scaling
    let mut cs = Array1::<f64>::zeros(n);
    for j in 0..n {
        let mx = a1.column(j).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        cs[j] = if mx > 0.0 { mx } else { 1.0 };
    }
    for (j, mut col) in a1.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / cs[j]);
    }

    // full SVD: for wide systems the complete null space lives in the
    // trailing rows of V^T, which the economy form does not return
    let (u, s, vt) = a1.svddc(JobSvd::All).expect("SVD failed");
    let u = u.expect("SVD left vectors");
    let vt = vt.expect("SVD right vectors");
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    let tol = rtol * smax;
    let rank = s.iter().filter(|&&sv| sv > tol).count();

    // x' = V diag(1/s) U^T b on the retained part
    let utb = u.t().dot(&b1);
    let mut y = Array1::<f64>::zeros(vt.nrows());
    for k in 0..rank {
        y[k] = utb[k] / s[k];
    }
    let xs = vt.t().dot(&y);
    let x = Array1::from_iter(xs.iter().zip(cs.iter()).map(|(xi, ci)| xi / ci));

    let residual = {
        let r = a1.dot(&xs) - &b1;
        r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    };

    // null space of the scaled system, mapped back (columns stay a basis)
    let n_null = n - rank;
    let mut null_space = Array2::<f64>::zeros((n, n_null));
    for k in 0..n_null {
        for j in 0..n {
            null_space[[j, k]] = vt[[rank + k, j]] / cs[j];
        }
    }

    LsqSolution {
        x,
        residual,
        rank,
        null_space,
    }
}
