use proptest::prelude::*;

use wbc_hopf::dynamics::{classify, classify_with, default_horizon, ClassifyConfig};
use wbc_hopf::model::{
    invariant_box, relative_residual, rhs, steady_state_e2, CellState, ModelParameters, ParamName,
};
use wbc_hopf::presets;
use wbc_hopf::stability::{beta_gamma, char_poly_e2, hopf_point, Classification};
use wbc_hopf::sweep::{bifurcation_bracket, run_sweep_with, Axis, SweepSpec};
use wbc_hopf::{integrate, Execution, IntegrationConfig};

fn extended() -> impl Strategy<Value = ModelParameters> {
    (0.5f64..1.0, 0.0f64..1.0, 0.01f64..1.0, 0.01f64..1.0, 0.0f64..0.3, 0.0f64..3.0, 0.1f64..3.0, -10.0f64..-6.0)
        .prop_map(|(a1, a2, p1, p2, d1, d2, d3, lk)| ModelParameters { a1, a2, p1, p2, d1, d2, d3, k: 10f64.powf(lk) })
        .prop_filter("E2 must exist", |p| p.validate().is_ok() && steady_state_e2(p).is_some())
}

fn basic() -> impl Strategy<Value = ModelParameters> {
    (0.51f64..0.99, 0.01f64..0.99, 0.05f64..1.0, 0.01f64..1.0, 0.1f64..3.0, -10.0f64..-6.0)
        .prop_filter("a2 < a1", |t| t.1 < t.0)
        .prop_map(|(a1, a2, p1, p2, d3, lk)| ModelParameters::basic(a1, a2, p1, p2, d3, 10f64.powf(lk)).unwrap())
}

/// Newton iteration on the scaled right-hand side with a finite-difference
/// Jacobian, independent of the closed forms.
fn newton_root(p: &ModelParameters, start: CellState) -> CellState {
    let scale = start.to_array();
    let f = |x: [f64; 3]| {
        let u = CellState::new(x[0] * scale[0], x[1] * scale[1], x[2] * scale[2]);
        let r = rhs(p, &u);
        [r[0] / scale[0], r[1] / scale[1], r[2] / scale[2]]
    };
    let mut x = [1.0; 3];
    for _ in 0..50 {
        let fx = f(x);
        let mut j = [[0.0; 3]; 3];
        for c in 0..3 {
            let h = 1e-7 * x[c].abs().max(1e-3);
            let (mut xp, mut xm) = (x, x);
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (f(xp), f(xm));
            for r in 0..3 {
                j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let m = nalgebra::Matrix3::from_fn(|r, c| j[r][c]);
        let Some(inv) = m.try_inverse() else { break };
        let dx = inv * nalgebra::Vector3::new(fx[0], fx[1], fx[2]);
        for i in 0..3 {
            x[i] -= dx[i];
        }
        if dx.norm() < 1e-14 {
            break;
        }
    }
    CellState::new(x[0] * scale[0], x[1] * scale[1], x[2] * scale[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn e2_is_a_positive_root(p in extended()) {
        let e2 = steady_state_e2(&p).unwrap().state;
        prop_assert!(e2.u1 > 0.0 && e2.u2 > 0.0 && e2.u3 > 0.0);
        prop_assert!(relative_residual(&p, &e2) < 1e-9);
    }

    #[test]
    fn e2_matches_newton(p in extended(), bump in 0.9f64..1.1) {
        let e2 = steady_state_e2(&p).unwrap().state;
        let root = newton_root(&p, e2.scaled([bump, 2.0 - bump, bump]));
        prop_assert!(root.distance(&e2) < 1e-7 * e2.norm(), "{root:?} vs {e2:?}");
    }

    #[test]
    fn k_scales_e2_and_leaves_hurwitz_sign(p in extended(), lk in -10.0f64..-6.0) {
        let q = p.with(ParamName::K, 10f64.powf(lk));
        let (a, b) = (steady_state_e2(&p).unwrap().state, steady_state_e2(&q).unwrap().state);
        let ratio = q.k / p.k;
        prop_assert!((b.u3 * ratio - a.u3).abs() <= 1e-12 * a.u3);
        let (ha, hb) = (char_poly_e2(&p).unwrap().hurwitz(), char_poly_e2(&q).unwrap().hurwitz());
        prop_assert_eq!(ha < 0.0, hb < 0.0);
    }

    #[test]
    fn bracket_matches_closed_form(p in basic()) {
        if let Ok(h) = hopf_point(p.a1, p.a2, p.d3, p.p1) {
            let lo = 0.5 * h.p2_star;
            let hi = (1.5 * h.p2_star).min(h.p2_star + 0.5 * p.p1);
            let x = bifurcation_bracket(&p, lo, hi).unwrap();
            prop_assert!((x - h.p2_star).abs() <= 1e-8 * h.p2_star);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectories_stay_in_box_and_nonnegative(
        a1 in 0.5f64..0.99, a2 in 0.01f64..0.99, p1 in 0.05f64..1.0, p2 in 0.01f64..1.0,
        d1 in 0.0f64..0.3, d2 in 0.0f64..3.0, d3 in 0.1f64..3.0, lk in -10.0f64..-6.0,
        lu in proptest::array::uniform3(3.0f64..10.0),
    ) {
        let p = ModelParameters { a1, a2, p1, p2, d1, d2, d3, k: 10f64.powf(lk) };
        let init = CellState::new(10f64.powf(lu[0]), 10f64.powf(lu[1]), 10f64.powf(lu[2]));
        let bx = invariant_box(&p, &init).unwrap();
        let cfg = IntegrationConfig { t_end: 100.0 / p1, output_stride: 0.25 / p1, ..Default::default() };
        let traj = integrate(&p, &init, &cfg).unwrap();
        for s in &traj.states {
            prop_assert!(s.is_nonnegative());
            prop_assert!(bx.contains(s), "{s:?} outside {bx:?}");
        }
    }

    /// Unstable grid points satisfy the instability inequality of the basic
    /// model and stable ones the opposite, barring near-ties.
    #[test]
    fn sweep_agrees_with_theory(a1 in 0.55f64..0.99, frac in 0.02f64..0.98) {
        let a2 = frac * a1;
        let base = ModelParameters::basic(a1, a2, 1.0, 0.5, 0.5, 1e-9).unwrap();
        let spec = SweepSpec::new(base, vec![Axis::new(ParamName::P2, 0.0, 2.0, 40), Axis::new(ParamName::D3, 0.0, 2.0, 40)]);
        let bg = beta_gamma(a1, a2).unwrap();
        let r = a2 / a1;
        let res = run_sweep_with(&spec, Execution::Sequential).unwrap();
        for row in &res.rows {
            let (p2, d3) = (row.coords[0], row.coords[1]);
            let lhs = ((1.0 - r) * p2 + bg.beta * d3) * bg.gamma;
            if (lhs - 1.0).abs() < 1e-12 {
                continue;
            }
            match row.class {
                Classification::Unstable => prop_assert!(lhs < 1.0),
                Classification::Stable => prop_assert!(lhs > 1.0),
                other => prop_assert!(false, "unexpected {other:?}"),
            }
        }
    }
}

#[test]
fn sweep_is_identical_across_executions() {
    let spec = SweepSpec::plausible(presets::reference(), &[ParamName::P1, ParamName::A2, ParamName::D3])
        .map(|mut s| {
            for a in &mut s.axes {
                a.points = 25;
            }
            s
        })
        .unwrap();
    let runs: Vec<String> = [Execution::Sequential, Execution::Parallel { workers: 4 }, Execution::Parallel { workers: 8 }]
        .into_iter()
        .map(|e| serde_json::to_string(&run_sweep_with(&spec, e).unwrap()).unwrap())
        .collect();
    assert!(runs.iter().all(|r| *r == runs[0]));
}

#[test]
fn equilibrium_verdicts_have_small_residual() {
    let fixtures = [
        (presets::fig3(0.5), presets::FIG3_INITIAL_A),
        (presets::reference(), steady_state_e2(&presets::reference()).unwrap().state.scaled([1.1, 1.0, 1.0])),
    ];
    for (p, init) in fixtures {
        let v = classify(&p, &init, default_horizon(&p)).unwrap();
        assert!(v.equilibrium().is_some());
        let r = rhs(&p, &v.final_state);
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        assert!(norm < 1e-6 * v.final_state.norm(), "{norm:e} vs {:e}", v.final_state.norm());
    }
}

#[test]
fn verdicts_survive_tighter_tolerances() {
    let h = hopf_point(0.7, 0.5, 0.1337, 1.0).unwrap();
    let fixtures = [
        (presets::fig3(0.5), presets::FIG3_INITIAL_A),
        (presets::fig3(0.3), presets::FIG3_INITIAL_B[0]),
        (presets::fig3(0.3), presets::FIG3_INITIAL_B[1]),
        (presets::fig3(0.98 * h.p2_star), presets::FIG3_INITIAL_A),
        (presets::CONSTELLATIONS[0].params(), steady_state_e2(&presets::CONSTELLATIONS[0].params()).unwrap().state.scaled([1.1, 1.0, 1.0])),
        (presets::CONSTELLATIONS[6].params(), steady_state_e2(&presets::CONSTELLATIONS[6].params()).unwrap().state.scaled([1.1, 1.0, 1.0])),
    ];
    let base = ClassifyConfig::default();
    let tight = ClassifyConfig {
        integration: IntegrationConfig {
            rel_tol: base.integration.rel_tol / 10.0,
            abs_tol: base.integration.abs_tol / 10.0,
            ..base.integration
        },
        ..base
    };
    for (p, init) in fixtures {
        let horizon = default_horizon(&p);
        let a = classify_with(&p, &init, horizon, &base).unwrap();
        let b = classify_with(&p, &init, horizon, &tight).unwrap();
        assert_eq!(a.kind, b.kind);
    }
}

#[test]
fn neutropenia_fits_oscillate() {
    for p in [presets::neutropenia_a(), presets::neutropenia_b()] {
        let init = steady_state_e2(&p).unwrap().state.scaled([1.1, 1.0, 1.0]);
        let v = classify(&p, &init, default_horizon(&p)).unwrap();
        assert!(v.is_limit_cycle(), "{v:?}");
    }
}

#[test]
fn limit_cycle_is_shared_by_both_initial_conditions() {
    let p = presets::fig3(0.3);
    let h = default_horizon(&p);
    let v: Vec<_> = presets::FIG3_INITIAL_B.iter().map(|s| classify(&p, s, h).unwrap()).collect();
    let (pa, pb) = (v[0].period.unwrap(), v[1].period.unwrap());
    let (aa, ab) = (v[0].amplitude_u3.unwrap(), v[1].amplitude_u3.unwrap());
    assert!((pa - pb).abs() <= 0.02 * pa);
    assert!((aa - ab).abs() <= 0.02 * aa);
}

#[test]
fn neutropenia_a_has_a_hopf_bracket() {
    let p = presets::neutropenia_a();
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let h: Vec<Option<f64>> = grid
        .iter()
        .map(|&x| char_poly_e2(&p.with(ParamName::P2, x)).ok().map(|c| c.hurwitz()))
        .collect();
    let i = (1..grid.len())
        .find(|&i| matches!((h[i - 1], h[i]), (Some(a), Some(b)) if a * b < 0.0))
        .expect("sign change on the p2 grid");
    let x = bifurcation_bracket(&p, grid[i - 1], grid[i]).unwrap();
    assert!(x > 0.0 && x < 1.0);
}
