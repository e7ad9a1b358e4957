//! Interface dissipation identities: the summed per-side edge dissipation
//! computed from the starred values must equal the glue-level quadratic form,
//! for one-to-one, many-to-one, and DG-coupled interfaces.

use gluewave::coupling::{
    build_interface, DgMemberSpec, FdMemberSpec, MemberSpec, Participant, ParticipantKind,
    PenaltyOut,
};
use gluewave::fd::{Face, Material};
use gluewave::glue::projection_coefficients;
use gluewave::poly::gauss_legendre;
use gluewave::sbp::build_sbp;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use std::sync::Arc;

fn rvec(rng: &mut rand_chacha::ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.random_range(lo..hi)))
}

fn fd_member(
    q: usize,
    n: usize,
    beta: (f64, f64),
    s_j: Array1<f64>,
    block: usize,
) -> MemberSpec {
    MemberSpec::Fd(FdMemberSpec {
        block,
        face: Face::East,
        beta_lo: beta.0,
        beta_hi: beta.1,
        op: Arc::new(build_sbp(q, n).unwrap()),
        s_j,
        coeffs: projection_coefficients(q, false).unwrap(),
    })
}

/// FD-side edge dissipation from the penalty differences:
/// `D = sum h s (-v p* + v p - v* p)` with `p* = p + dp`, `v* = v + dv`.
fn fd_dissipation(
    h: &Array1<f64>,
    s_j: &Array1<f64>,
    p: &Array1<f64>,
    v: &Array1<f64>,
    out: &PenaltyOut,
) -> f64 {
    let mut d = 0.0;
    for i in 0..p.len() {
        let hs = h[i] * s_j[i];
        let ps = p[i] + out.dp[i];
        let vs = v[i] + out.dv[i];
        d += -v[i] * hs * ps + v[i] * hs * p[i] - vs * hs * p[i];
    }
    d
}

/// DG-side edge dissipation: `D = sum w s (-v p* - p (v* - v))`.
fn dg_dissipation(
    w: &Array1<f64>,
    s_j: &Array1<f64>,
    p: &Array1<f64>,
    v: &Array1<f64>,
    out: &PenaltyOut,
) -> f64 {
    let mut d = 0.0;
    for i in 0..p.len() {
        let ws = w[i] * s_j[i];
        d += -v[i] * ws * out.dp[i] - p[i] * ws * out.dv[i];
    }
    d
}

#[test]
fn one_to_one_unnested_interface_satisfies_the_dissipation_identity() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    for q in 1..=3 {
        let (nm, np) = (16usize, 33usize);
        let s_m = rvec(&mut rng, nm + 1, 0.5, 1.5);
        let s_p = rvec(&mut rng, np + 1, 0.5, 1.5);
        let iface = build_interface(
            vec![fd_member(q, nm, (-1.0, 1.0), s_m.clone(), 0)],
            vec![fd_member(q, np, (-1.0, 1.0), s_p.clone(), 1)],
        )
        .unwrap();
        let mat = Material::new(1.2, 0.7);
        let h_m = build_sbp(q, nm).unwrap().h_diag().clone();
        let h_p = build_sbp(q, np).unwrap().h_diag().clone();
        let tr_m = vec![(rvec(&mut rng, nm + 1, -1.0, 1.0), rvec(&mut rng, nm + 1, -1.0, 1.0))];
        let tr_p = vec![(rvec(&mut rng, np + 1, -1.0, 1.0), rvec(&mut rng, np + 1, -1.0, 1.0))];
        for alpha in [0.0, 0.55, 1.0] {
            let (out_m, out_p) = iface.exchange(alpha, &mat, &tr_m, &tr_p).unwrap();
            let d = fd_dissipation(&h_m, &s_m, &tr_m[0].0, &tr_m[0].1, &out_m[0])
                + fd_dissipation(&h_p, &s_p, &tr_p[0].0, &tr_p[0].1, &out_p[0]);
            let expect = iface.dissipation_form(alpha, &mat, &tr_m, &tr_p);
            let scale = d.abs().max(expect.abs()).max(1.0);
            assert!(
                (d - expect).abs() <= 1e-11 * scale,
                "q={q} alpha={alpha}: {d:.6e} vs {expect:.6e}"
            );
            if alpha == 0.0 {
                assert!(d.abs() <= 1e-11, "alpha=0 not conservative: {d:.2e}");
            }
        }
    }
}

#[test]
fn t_intersection_interface_satisfies_the_dissipation_identity() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let q = 2;
    let n = 16usize;
    let s_m = rvec(&mut rng, n + 1, 0.5, 1.5);
    let s_b = rvec(&mut rng, n + 1, 0.5, 1.5);
    let s_t = rvec(&mut rng, n + 1, 0.5, 1.5);
    let iface = build_interface(
        vec![fd_member(q, n, (-1.0, 1.0), s_m.clone(), 0)],
        vec![
            fd_member(q, n, (-1.0, 0.0), s_b.clone(), 1),
            fd_member(q, n, (0.0, 1.0), s_t.clone(), 2),
        ],
    )
    .unwrap();
    // deltas: whole interface 1, halves 1/2
    assert!((iface.minus[0].delta - 1.0).abs() < 1e-14);
    assert!((iface.plus[0].delta - 0.5).abs() < 1e-14);
    let mat = Material::new(1.0, 1.0);
    let h = build_sbp(q, n).unwrap().h_diag().clone();
    let tr_m = vec![(rvec(&mut rng, n + 1, -1.0, 1.0), rvec(&mut rng, n + 1, -1.0, 1.0))];
    let tr_p = vec![
        (rvec(&mut rng, n + 1, -1.0, 1.0), rvec(&mut rng, n + 1, -1.0, 1.0)),
        (rvec(&mut rng, n + 1, -1.0, 1.0), rvec(&mut rng, n + 1, -1.0, 1.0)),
    ];
    for alpha in [0.0, 1.0] {
        let (out_m, out_p) = iface.exchange(alpha, &mat, &tr_m, &tr_p).unwrap();
        let d = fd_dissipation(&h, &s_m, &tr_m[0].0, &tr_m[0].1, &out_m[0])
            + fd_dissipation(&h, &s_b, &tr_p[0].0, &tr_p[0].1, &out_p[0])
            + fd_dissipation(&h, &s_t, &tr_p[1].0, &tr_p[1].1, &out_p[1]);
        let expect = iface.dissipation_form(alpha, &mat, &tr_m, &tr_p);
        let scale = d.abs().max(expect.abs()).max(1.0);
        assert!(
            (d - expect).abs() <= 1e-11 * scale,
            "alpha={alpha}: {d:.6e} vs {expect:.6e}"
        );
    }
}

#[test]
fn sbp_dg_interface_satisfies_the_corollary_dissipation_identity() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for q in [2usize, 3] {
        let n = 16usize;
        let s_m = rvec(&mut rng, n + 1, 0.5, 1.5);
        let minus = vec![fd_member(q, n, (-1.0, 1.0), s_m.clone(), 0)];
        // three DG edges tiling [-1,1]; the middle one reversed in orientation
        let cuts = [-1.0, -0.4, 0.3, 1.0];
        let n_e = q + 2;
        let (gt, gw) = gauss_legendre(n_e);
        let mut plus = Vec::new();
        let mut dg_meta = Vec::new();
        for (k, w) in cuts.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let reversed = k == 1;
            let eta = Array1::from_iter(gt.iter().map(|&t| {
                let tt = if reversed { -t } else { t };
                0.5 * (lo + hi) + 0.5 * (hi - lo) * tt
            }));
            let s_j = rvec(&mut rng, n_e, 0.5, 1.5);
            dg_meta.push((s_j.clone(), gw.clone()));
            plus.push(MemberSpec::Dg(DgMemberSpec {
                elem: k,
                edge: 0,
                eta_lo: lo,
                eta_hi: hi,
                eta_points: eta,
                s_j,
                quad_w: gw.clone(),
                order: q,
            }));
        }
        let iface = build_interface(minus, plus).unwrap();
        let mat = Material::new(1.0, 1.0);
        let h = build_sbp(q, n).unwrap().h_diag().clone();
        let tr_m = vec![(rvec(&mut rng, n + 1, -1.0, 1.0), rvec(&mut rng, n + 1, -1.0, 1.0))];
        let tr_p: Vec<_> = (0..3)
            .map(|_| (rvec(&mut rng, n_e, -1.0, 1.0), rvec(&mut rng, n_e, -1.0, 1.0)))
            .collect();
        for alpha in [0.0, 1.0] {
            let (out_m, out_p) = iface.exchange(alpha, &mat, &tr_m, &tr_p).unwrap();
            let mut d = fd_dissipation(&h, &s_m, &tr_m[0].0, &tr_m[0].1, &out_m[0]);
            for k in 0..3 {
                assert!(matches!(out_p[k].kind, ParticipantKind::DgEdge { .. }));
                d += dg_dissipation(
                    &dg_meta[k].1,
                    &dg_meta[k].0,
                    &tr_p[k].0,
                    &tr_p[k].1,
                    &out_p[k],
                );
            }
            let expect = iface.dissipation_form(alpha, &mat, &tr_m, &tr_p);
            let scale = d.abs().max(expect.abs()).max(1.0);
            assert!(
                (d - expect).abs() <= 1e-11 * scale,
                "q={q} alpha={alpha}: {d:.6e} vs {expect:.6e}"
            );
        }
    }
}

#[test]
fn dg_round_trip_through_the_glue_is_exact_on_polynomial_traces() {
    let q = 3usize;
    let n_e = q + 2;
    let (gt, gw) = gauss_legendre(n_e);
    let (lo, hi) = (-0.25, 0.6);
    let eta = Array1::from_iter(gt.iter().map(|&t| 0.5 * (lo + hi) + 0.5 * (hi - lo) * t));
    let minus = vec![fd_member(2, 16, (-1.0, 1.0), Array1::ones(17), 0)];
    let plus = vec![
        MemberSpec::Dg(DgMemberSpec {
            elem: 0,
            edge: 0,
            eta_lo: -1.0,
            eta_hi: lo,
            eta_points: Array1::from_iter(
                gt.iter().map(|&t| 0.5 * (-1.0 + lo) + 0.5 * (lo + 1.0) * t),
            ),
            s_j: Array1::ones(n_e),
            quad_w: gw.clone(),
            order: q,
        }),
        MemberSpec::Dg(DgMemberSpec {
            elem: 1,
            edge: 0,
            eta_lo: lo,
            eta_hi: hi,
            eta_points: eta.clone(),
            s_j: Array1::ones(n_e),
            quad_w: gw.clone(),
            order: q,
        }),
        MemberSpec::Dg(DgMemberSpec {
            elem: 2,
            edge: 0,
            eta_lo: hi,
            eta_hi: 1.0,
            eta_points: Array1::from_iter(
                gt.iter().map(|&t| 0.5 * (hi + 1.0) + 0.5 * (1.0 - hi) * t),
            ),
            s_j: Array1::ones(n_e),
            quad_w: gw,
            order: q,
        }),
    ];
    let iface = build_interface(minus, plus).unwrap();
    for part in &iface.plus {
        // round trip on each monomial trace degree <= q
        for d in 0..=q {
            let trace = eta.mapv(|e| e.powi(d as i32));
            // use the participant's own eta points through sigma implicitly:
            // p_g2f p_f2g must reproduce any degree-q polynomial sampled at
            // its quadrature points
            let vals = match part.kind {
                ParticipantKind::DgEdge { elem, .. } => {
                    if elem == 1 {
                        trace.clone()
                    } else {
                        continue;
                    }
                }
                _ => unreachable!(),
            };
            let rt = part.p_g2f.dot(&part.p_f2g.dot(&vals));
            for (a, b) in rt.iter().zip(vals.iter()) {
                assert!((a - b).abs() <= 1e-12, "deg {d}: {:.2e}", (a - b).abs());
            }
        }
    }
}

#[test]
fn identity_projection_interface_reduces_to_the_conforming_penalty() {
    use gluewave::coupling::InterfaceSpec;
    use gluewave::glue::GlueSpace;
    use ndarray::Array2;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 9usize;
    let s_j = rvec(&mut rng, n, 0.5, 1.5);
    let eye = Array2::eye(n);
    let make = |block: usize| {
        Participant::new(
            ParticipantKind::FdFace {
                block,
                face: Face::East,
            },
            1.0,
            s_j.mapv(f64::sqrt),
            eye.clone(),
            eye.clone(),
            0..n,
            true,
        )
    };
    let iface = InterfaceSpec {
        common: GlueSpace::uniform(-1.0, 1.0, n, 0),
        minus: vec![make(0)],
        plus: vec![make(1)],
    };
    let mat = Material::new(1.0, 1.0);
    let tr_m = vec![(rvec(&mut rng, n, -1.0, 1.0), rvec(&mut rng, n, -1.0, 1.0))];
    let tr_p = vec![(rvec(&mut rng, n, -1.0, 1.0), rvec(&mut rng, n, -1.0, 1.0))];
    for alpha in [0.0, 0.8] {
        let (out_m, out_p) = iface.exchange(alpha, &mat, &tr_m, &tr_p).unwrap();
        let (dp_ref, dv_ref) = gluewave::fd::conforming_penalty(
            &tr_m[0].0, &tr_m[0].1, &tr_p[0].0, &tr_p[0].1, alpha, &mat,
        )
        .unwrap();
        for i in 0..n {
            assert!((out_m[0].dp[i] - dp_ref[i]).abs() <= 1e-14);
            assert!((out_m[0].dv[i] - dv_ref[i]).abs() <= 1e-14);
        }
        let (dp_ref, dv_ref) = gluewave::fd::conforming_penalty(
            &tr_p[0].0, &tr_p[0].1, &tr_m[0].0, &tr_m[0].1, alpha, &mat,
        )
        .unwrap();
        for i in 0..n {
            assert!((out_p[0].dp[i] - dp_ref[i]).abs() <= 1e-14);
            assert!((out_p[0].dv[i] - dv_ref[i]).abs() <= 1e-14);
        }
    }
}

#[test]
fn zero_traces_give_zero_penalties() {
    let q = 2;
    let n = 16;
    let iface = build_interface(
        vec![fd_member(q, n, (-1.0, 1.0), Array1::ones(n + 1), 0)],
        vec![fd_member(q, 2 * n, (-1.0, 1.0), Array1::ones(2 * n + 1), 1)],
    )
    .unwrap();
    let mat = Material::new(1.0, 1.0);
    let tr_m = vec![(Array1::zeros(n + 1), Array1::zeros(n + 1))];
    let tr_p = vec![(Array1::zeros(2 * n + 1), Array1::zeros(2 * n + 1))];
    let (out_m, out_p) = iface.exchange(1.0, &mat, &tr_m, &tr_p).unwrap();
    for o in out_m.iter().chain(out_p.iter()) {
        for v in o.dp.iter().chain(o.dv.iter()) {
            assert!(v.abs() < 1e-14);
        }
    }
}
