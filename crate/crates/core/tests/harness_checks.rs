//! System-level checks: reference solution, time stepping, semi-discrete
//! energy identities, and operator spectra at small sizes.

use gluewave::harness::{
    assemble_global_operator, build_scenario, operator_spectrum, rk4_advance, rk4_step_vec,
    run_simulation, ExactSolution, RunConfig, Scenario,
};
use ndarray::Array1;

fn cfg(scenario: Scenario, q: usize, n: usize, alpha: f64) -> RunConfig {
    RunConfig {
        scenario,
        q,
        n,
        alpha,
        t_final: 1.0,
        dt: None,
    }
}

#[test]
fn exact_solution_satisfies_the_pde_and_boundary_conditions() {
    let ex = ExactSolution::default();
    let h = 1e-5;
    let pts = [(-0.33, 0.71, 0.4), (0.2, -0.9, 0.13), (0.85, 0.05, 0.77)];
    for (x1, x2, t) in pts {
        // rho dv1/dt + dp/dx1 = 0 (central differences, O(h^2) oracle)
        let dv1dt = (ex.v1(x1, x2, t + h) - ex.v1(x1, x2, t - h)) / (2.0 * h);
        let dpdx1 = (ex.p(x1 + h, x2, t) - ex.p(x1 - h, x2, t)) / (2.0 * h);
        assert!((dv1dt + dpdx1).abs() < 1e-8, "momentum-1: {}", dv1dt + dpdx1);
        let dv2dt = (ex.v2(x1, x2, t + h) - ex.v2(x1, x2, t - h)) / (2.0 * h);
        let dpdx2 = (ex.p(x1, x2 + h, t) - ex.p(x1, x2 - h, t)) / (2.0 * h);
        assert!((dv2dt + dpdx2).abs() < 1e-8);
        // dp/dt + div v = 0
        let dpdt = (ex.p(x1, x2, t + h) - ex.p(x1, x2, t - h)) / (2.0 * h);
        let dv1dx1 = (ex.v1(x1 + h, x2, t) - ex.v1(x1 - h, x2, t)) / (2.0 * h);
        let dv2dx2 = (ex.v2(x1, x2 + h, t) - ex.v2(x1, x2 - h, t)) / (2.0 * h);
        assert!((dpdt + dv1dx1 + dv2dx2).abs() < 1e-8);
    }
    // free surface on all four boundaries, and the t=0 initial condition
    for s in [-1.0, -0.3, 0.44, 1.0] {
        for t in [0.0, 0.3, 1.3] {
            assert!(ex.p(1.0, s, t).abs() < 1e-13);
            assert!(ex.p(-1.0, s, t).abs() < 1e-13);
            assert!(ex.p(s, 1.0, t).abs() < 1e-13);
            assert!(ex.p(s, -1.0, t).abs() < 1e-13);
        }
        assert!(ex.v1(s, 0.17, 0.0).abs() < 1e-15);
        assert!(ex.v2(s, 0.17, 0.0).abs() < 1e-15);
    }
}

#[test]
fn rk4_matches_the_exponential_taylor_expansion() {
    let mut u = Array1::from_vec(vec![1.0]);
    rk4_step_vec(&mut u, 0.1, |x| -x.clone());
    let expect = 1.0 - 0.1 + 0.005 - 1e-3 / 6.0 + 1e-4 / 24.0;
    assert!((u[0] - expect).abs() < 1e-15, "{} vs {expect}", u[0]);
}

#[test]
fn system_stepper_matches_the_vector_reference() {
    let sys = build_scenario(&cfg(Scenario::TwoBlockNested, 1, 8, 1.0)).unwrap();
    let n = sys.dof_count();
    let mut state = sys.new_state();
    sys.set_exact(&mut state, 0.0);
    let mut packed = Array1::zeros(n);
    sys.pack(&state, &mut packed);

    // vector path
    let mut u = packed.clone();
    let dt = 0.01;
    let mut st = sys.new_state();
    let mut out = sys.new_state();
    let mut sc = sys.new_scratch();
    for _ in 0..3 {
        rk4_step_vec(&mut u, dt, |x| {
            sys.unpack(x, &mut st);
            sys.rhs(&st, &mut out, &mut sc).unwrap();
            let mut p = Array1::zeros(n);
            sys.pack(&out, &mut p);
            p
        });
    }

    // system path
    rk4_advance(&sys, &mut state, dt, 3.0 * dt, None).unwrap();
    let mut got = Array1::zeros(n);
    sys.pack(&state, &mut got);
    let diff = (&got - &u).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(diff < 1e-13, "stepper mismatch {diff:.2e}");
}

#[test]
fn rhs_is_zero_on_the_zero_state_and_error_is_zero_on_exact_samples() {
    for scenario in [Scenario::TwoBlockConforming, Scenario::ThreeBlockNested, Scenario::SbpDg] {
        let sys = build_scenario(&cfg(scenario, 2, 16, 1.0)).unwrap();
        let state = sys.new_state();
        let mut out = sys.new_state();
        let mut sc = sys.new_scratch();
        sys.rhs(&state, &mut out, &mut sc).unwrap();
        let mut packed = Array1::zeros(sys.dof_count());
        sys.pack(&out, &mut packed);
        for v in packed.iter() {
            assert!(v.abs() < 1e-14);
        }
        let mut st = sys.new_state();
        sys.set_exact(&mut st, 0.37);
        let (eps, _) = sys.error(&st, 0.37);
        assert!(eps.abs() < 1e-13, "{scenario:?}: eps {eps:.2e}");
    }
}

#[test]
fn semi_discrete_energy_rate_is_zero_for_central_and_nonpositive_for_upwind() {
    // u' W A u == 0 (alpha = 0) and <= 0 (alpha = 1) on deterministic
    // dense states, for every scenario
    for scenario in Scenario::ALL {
        for alpha in [0.0, 1.0] {
            let sys = build_scenario(&cfg(scenario, 2, 16, alpha)).unwrap();
            let n = sys.dof_count();
            let u_vec = Array1::from_iter((0..n).map(|i| (0.7 * i as f64 + 0.2).sin()));
            let mut u = sys.new_state();
            sys.unpack(&u_vec, &mut u);
            let mut au = sys.new_state();
            let mut sc = sys.new_scratch();
            sys.rhs(&u, &mut au, &mut sc).unwrap();
            let rate = sys.energy_product(&u, &au);
            let unorm = sys.energy_product(&u, &u);
            if alpha == 0.0 {
                assert!(
                    rate.abs() <= 1e-11 * unorm,
                    "{scenario:?} alpha=0: rate {rate:.3e} vs norm {unorm:.3e}"
                );
            } else {
                assert!(
                    rate <= 1e-11 * unorm,
                    "{scenario:?} alpha=1: rate {rate:.3e} not dissipative"
                );
            }
        }
    }
}

#[test]
fn manufactured_solution_residual_shrinks_under_refinement() {
    // with the exact solution loaded, the full right-hand side approximates
    // the analytic time derivative; the defect must drop with resolution
    let t0 = 0.3;
    let ex = ExactSolution::default();
    let hder = 1e-6;
    let mut defects = Vec::new();
    for n in [16usize, 32] {
        let sys = build_scenario(&cfg(Scenario::TwoBlockConforming, 2, n, 1.0)).unwrap();
        let mut st = sys.new_state();
        sys.set_exact(&mut st, t0);
        let mut out = sys.new_state();
        let mut sc = sys.new_scratch();
        sys.rhs(&st, &mut out, &mut sc).unwrap();
        // analytic time derivative by a tight central difference in t
        let mut lo = sys.new_state();
        let mut hi = sys.new_state();
        sys.set_exact(&mut lo, t0 - hder);
        sys.set_exact(&mut hi, t0 + hder);
        let mut worst = 0.0f64;
        for (b, (o, (l, h))) in out
            .blocks
            .iter()
            .zip(lo.blocks.iter().zip(hi.blocks.iter()))
            .enumerate()
        {
            let _ = b;
            for (field, (fl, fh)) in [(&o.v1, (&l.v1, &h.v1)), (&o.v2, (&l.v2, &h.v2)), (&o.p, (&l.p, &h.p))] {
                for ((g, a), c) in field.iter().zip(fl.iter()).zip(fh.iter()) {
                    let dd = (c - a) / (2.0 * hder);
                    worst = worst.max((g - dd).abs());
                }
            }
        }
        let _ = &ex;
        defects.push(worst);
    }
    assert!(
        defects[1] < defects[0] / 2.5,
        "defect did not drop: {defects:?}"
    );
}

#[test]
fn central_spectra_are_imaginary_and_upwind_spectra_sit_in_the_left_half_plane() {
    // small versions of the spectrum study
    for (scenario, q, n) in [
        (Scenario::TwoBlockUnnested, 1, 8),
        (Scenario::SbpDg, 2, 16),
    ] {
        for alpha in [0.0, 1.0] {
            let sys = build_scenario(&cfg(scenario, q, n, alpha)).unwrap();
            let a = assemble_global_operator(&sys).unwrap();
            let eigs = operator_spectrum(&a);
            let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
            if alpha == 0.0 {
                let max_abs_re = eigs.iter().map(|e| e.re.abs()).fold(0.0, f64::max);
                assert!(
                    max_abs_re <= 1e-10,
                    "{scenario:?} alpha=0: max |Re| = {max_abs_re:.3e}"
                );
            } else {
                assert!(
                    max_re <= 1e-10,
                    "{scenario:?} alpha=1: max Re = {max_re:.3e}"
                );
            }
        }
    }
}

#[test]
fn short_upwind_run_is_stable_and_accurate_at_modest_resolution() {
    let mut c = cfg(Scenario::TwoBlockNested, 2, 16, 1.0);
    c.t_final = 0.25;
    let res = run_simulation(&c).unwrap();
    assert!(res.error.is_finite());
    assert!(res.error < 0.05, "error {:.3e}", res.error);
    // energy samples are non-increasing
    for w in res.energy.windows(2) {
        assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12), "energy grew: {w:?}");
    }
}
