//! Legendre/Jacobi polynomials and Gauss-type quadrature rules.

use ndarray::{Array1, Array2};

/// Legendre polynomial `P_n(x)` by three-term recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut pm, mut p) = (1.0, x);
            for k in 1..n {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * p - kf * pm) / (kf + 1.0);
                pm = p;
                p = next;
            }
            p
        }
    }
}

/// Derivative `P_n'(x)`.
pub fn legendre_deriv(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // (1-x^2) P_n' = n (P_{n-1} - x P_n); at |x|=1 use the closed form.
    let d = 1.0 - x * x;
    if d.abs() < 1e-13 {
        let s = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        return s * (n * (n + 1)) as f64 / 2.0;
    }
    (n as f64) * (legendre(n - 1, x) - x * legendre(n, x)) / d
}

/// Gauss-Legendre nodes and weights on `[-1,1]`, exact for degree `2n-1`.
pub fn gauss_legendre(n: usize) -> (Array1<f64>, Array1<f64>) {
    assert!(n >= 1);
    let mut x = Array1::zeros(n);
    let mut w = Array1::zeros(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre(n, z);
            let dp = legendre_deriv(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let dp = legendre_deriv(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Lobatto-Legendre nodes on `[-1,1]` (endpoints included).
pub fn gauss_lobatto(n: usize) -> Array1<f64> {
    assert!(n >= 2);
    let mut x = Array1::zeros(n);
    x[0] = -1.0;
    x[n - 1] = 1.0;
    let deg = n - 1;
    // interior nodes: roots of P'_{n-1}
    for i in 1..n - 1 {
        let mut z = -((std::f64::consts::PI * i as f64) / deg as f64).cos();
        for _ in 0..100 {
            // Newton on f = P'_deg using f' from the Legendre ODE:
            // (1-x^2) P'' = 2x P' - deg(deg+1) P
            let p = legendre(deg, z);
            let dp = legendre_deriv(deg, z);
            let ddp = (2.0 * z * dp - (deg * (deg + 1)) as f64 * p) / (1.0 - z * z);
            let dz = dp / ddp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
    }
    x
}

/// Jacobi polynomial `P_n^{(a,b)}(x)`, conventional normalization.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut pm = 1.0;
    let mut p = 0.5 * (a - b + (a + b + 2.0) * x);
    for k in 1..n {
        let kf = k as f64;
        let c = 2.0 * kf + a + b;
        let a1 = 2.0 * (kf + 1.0) * (kf + a + b + 1.0) * c;
        let a2 = (c + 1.0) * (a * a - b * b);
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (kf + a) * (kf + b) * (c + 2.0);
        let next = ((a2 + a3 * x) * p - a4 * pm) / a1;
        pm = p;
        p = next;
    }
    p
}

/// d/dx of the Jacobi polynomial.
pub fn jacobi_deriv(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + b + 1.0) * jacobi(n - 1, a + 1.0, b + 1.0, x)
    }
}

/// Gauss-Jacobi nodes/weights for weight `(1-x)^a (1+x)^b` on `[-1,1]`.
///
/// Newton iteration with deflation; exact for degree `2n-1` against the
/// weighted measure.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Array1<f64>, Array1<f64>) {
    assert!(n >= 1);
    let mut x = Array1::zeros(n);
    let mut w = Array1::zeros(n);
    for i in 0..n {
        // initial guess: Chebyshev-like, then polish
        let mut z = -((std::f64::consts::PI * (2.0 * i as f64 + 1.0)) / (2.0 * n as f64)).cos();
        if i > 0 {
            z = 0.5 * (z + x[i - 1]);
        }
        for _ in 0..200 {
            // deflate previously found roots
            let mut s = 0.0;
            for &xj in x.iter().take(i) {
                s += 1.0 / (z - xj);
            }
            let p = jacobi(n, a, b, z);
            let dp = jacobi_deriv(n, a, b, z);
            let dz = p / (dp - p * s);
            z -= dz;
            if dz.abs() < 3e-15 {
                break;
            }
        }
        x[i] = z;
    }
    // weights from the derivative formula
    let ab = a + b;
    let gamma = |v: f64| gamma_fn(v);
    let c = (2f64).powf(ab + 1.0) * gamma(a + n as f64 + 1.0) * gamma(b + n as f64 + 1.0)
        / (gamma(n as f64 + 1.0) * gamma(n as f64 + ab + 1.0));
    for i in 0..n {
        let dp = jacobi_deriv(n, a, b, x[i]);
        w[i] = c / ((1.0 - x[i] * x[i]) * dp * dp);
    }
    (x, w)
}

/// Lanczos approximation of the gamma function (ample accuracy here since the
/// arguments are small half-integers).
fn gamma_fn(x: f64) -> f64 {
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
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, &g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Modal Legendre coefficients of `f` on `[lo, hi]` for modes `0..=n`,
/// computed with Gauss quadrature of ample degree.
pub fn legendre_modal_coeffs(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Array1<f64> {
    let ng = n + 12;
    let (xg, wg) = gauss_legendre(ng);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut out = Array1::zeros(n + 1);
    for i in 0..=n {
        let mut acc = 0.0;
        for (t, w) in xg.iter().zip(wg.iter()) {
            acc += w * f(mid + half * t) * legendre(i, *t);
        }
        // divide by the squared norm (hi-lo)/(2i+1); the half factor cancels
        out[i] = acc * (2.0 * i as f64 + 1.0) / 2.0;
    }
    out
}

/// 1-D Legendre Vandermonde `V[a, m] = P_m(x_a)` for `m = 0..=order`.
pub fn legendre_vandermonde(points: &Array1<f64>, order: usize) -> Array2<f64> {
    let mut v = Array2::zeros((points.len(), order + 1));
    for (a, &x) in points.iter().enumerate() {
        for m in 0..=order {
            v[[a, m]] = legendre(m, x);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..=(2 * n - 1) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gauss_jacobi_10_handles_the_triangle_weight() {
        // integral of (1-x)^1 * x^d over [-1,1]
        for n in 2..=8 {
            let (x, w) = gauss_jacobi(n, 1.0, 0.0);
            for deg in 0..=(2 * n - 1) {
                let d = deg as f64;
                // ∫ (1-x) x^d dx = [x^{d+1}/(d+1) - x^{d+2}/(d+2)]
                let f = |x: f64| x.powf(d + 1.0) / (d + 1.0) - x.powf(d + 2.0) / (d + 2.0);
                let exact = f(1.0) - f(-1.0);
                let got: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert_abs_diff_eq!(got, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lobatto_nodes_bracket_and_match_lgl4() {
        let x = gauss_lobatto(4);
        // 4-point GLL interior nodes are ±1/sqrt(5)
        assert_abs_diff_eq!(x[1], -(0.2f64).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(x[2], (0.2f64).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn modal_coefficients_recover_a_polynomial() {
        // f(x) = 3 P_0 - 2 P_1 + 0.5 P_2 on a shifted interval
        let (lo, hi) = (0.25, 0.75);
        let f = |x: f64| {
            let t = (2.0 * x - (lo + hi)) / (hi - lo);
            3.0 - 2.0 * t + 0.5 * legendre(2, t)
        };
        let c = legendre_modal_coeffs(f, lo, hi, 4);
        assert_abs_diff_eq!(c[0], 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(c[1], -2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(c[2], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(c[3], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(c[4], 0.0, epsilon = 1e-13);
    }
}
