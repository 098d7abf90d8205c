//! The sine-coupled model H = p² + sin(x)·u − 1/4 end to end, at the
//! library default step τ = 1/32 on n = 512 nodes.

use kam::asymptotic::*;
use kam::flow::{integrate_orbit, Orbit, PhasePoint};
use kam::geometry::{default_kink_tol, PeriodicGrid, ScalarField};
use kam::model::ContactModel;
use kam::variational::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

struct Setup {
    model: ContactModel,
    grid: PeriodicGrid,
    params: LaxParams,
    upper: ScalarField,
    lower: ScalarField,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let model = ContactModel::sine_coupled();
        let grid = PeriodicGrid::new(512).unwrap();
        let params = LaxParams::new(grid, DEFAULT_TAU, DEFAULT_V_MAX);
        let zero = ScalarField::constant(grid, 0.0).unwrap();
        let up = weak_kam_limit(&model, &zero, &params, Direction::Backward, LimitOptions::default()).unwrap();
        let lo = weak_kam_limit(&model, &zero, &params, Direction::Forward, LimitOptions::default()).unwrap();
        assert_eq!(up.status, WeakKamStatus::Converged);
        assert_eq!(lo.status, WeakKamStatus::Converged);
        Setup {
            model,
            grid,
            params,
            upper: up.field,
            lower: lo.field,
        }
    })
}

fn split_subsolution(g: PeriodicGrid) -> ScalarField {
    ScalarField::from_fn(g, |x| if x <= 0.0 { 0.5 * x.sin() + 0.25 } else { 0.25 }).unwrap()
}

#[test]
fn maximal_solution_from_above() {
    let s = setup();
    let one = ScalarField::constant(s.grid, 1.0).unwrap();
    let r = weak_kam_limit(&s.model, &one, &s.params, Direction::Backward, LimitOptions::default()).unwrap();
    assert_eq!(r.status, WeakKamStatus::Converged);
    assert!(r.residual <= 1e-7);
    assert!((r.field.interpolate(PI / 2.0) - 0.25).abs() <= 5e-3);
    assert!(r.field.min() > 0.0);
    assert!(r.field.sup_distance(&s.upper) < 1e-5);
    assert!((s.lower.interpolate(-PI / 2.0) + 0.25).abs() <= 5e-3);
}

#[test]
fn deep_initial_data_diverges() {
    let s = setup();
    let low = ScalarField::constant(s.grid, -10.0).unwrap();
    let r = weak_kam_limit(&s.model, &low, &s.params, Direction::Backward, LimitOptions::default()).unwrap();
    assert_eq!(r.status, WeakKamStatus::DivergedMinus);
}

#[test]
fn weak_kam_residual_is_first_order() {
    let s = setup();
    let sample = s.upper.pseudograph_sample(default_kink_tol(s.grid.dx(), 1.0));
    let worst = sample
        .nodes
        .iter()
        .filter(|n| n.differentiable)
        .map(|n| s.model.hamiltonian(n.x, n.u, n.momenta()[0]).unwrap().abs())
        .fold(0.0, f64::max);
    let c = worst / s.grid.dx();
    eprintln!("max |H| at differentiable nodes = {worst:.3e} = {c:.2} dx");
    assert!(c <= 10.0);
}

#[test]
fn subsolution_evolves_upward() {
    let s = setup();
    let phi = split_subsolution(s.grid);
    assert!(s.model.subsolution_check(&phi, false).passed);
    let ev = semigroup_evolve(&s.model, &phi, &s.params, 4.0, Direction::Backward, 8).unwrap();
    for w in ev.snapshots.windows(2) {
        for i in 0..s.grid.n() {
            assert!(w[1].1.get(i) >= w[0].1.get(i) - 1e-12);
        }
    }
    for (t, f) in &ev.snapshots {
        if *t >= 1.0 {
            assert!(f.interpolate(-PI / 2.0) <= -0.25 + 5e-3);
        }
    }
}

#[test]
fn characteristic_defect_shrinks_under_refinement() {
    let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
    let mut defects = Vec::new();
    for n in [128, 256, 512] {
        let g = PeriodicGrid::new(n).unwrap();
        // τ ∝ Δx keeps the velocity lattice fixed while both errors shrink
        let p = LaxParams::new(g, 8.0 * g.dx(), 8.0);
        let phi = ScalarField::from_fn(g, |x| 0.25 + 0.1 * x.sin()).unwrap();
        let c = characteristic_orbit(&m, &phi, 0.7, 2.0, &p, CharOptions::for_dx(g.dx())).unwrap();
        defects.push((c.max_defect, g.dx()));
    }
    for w in defects.windows(2) {
        assert!(w[1].0 < w[0].0, "{defects:?}");
    }
    for &(d, dx) in &defects {
        assert!(d <= 0.2 * dx, "{defects:?}");
    }
}

#[test]
fn semi_infinite_orbit_reaches_the_fixed_point() {
    let s = setup();
    let one = ScalarField::constant(s.grid, 1.0).unwrap();
    let r = semi_infinite_orbit(&s.model, &one, &s.params, &SemiInfiniteOptions::default()).unwrap();
    let zbar = PhasePoint::new(PI / 2.0, 0.25, 0.0);
    assert!(r.orbit.last().distance(&zbar) <= 1e-2);
    assert!(r.tail_slice_distance.unwrap() <= 1e-2);
    // u_− itself is only known to the convergence tolerance
    for w in r.tail_u_defects.windows(2) {
        assert!(w[1] <= w[0] + 1e-7);
    }
}

#[test]
fn semi_infinite_orbit_monotone_model() {
    let g = PeriodicGrid::new(256).unwrap();
    let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
    let p = LaxParams::new(g, DEFAULT_TAU, DEFAULT_V_MAX);
    let phi = ScalarField::from_fn(g, f64::sin).unwrap();
    let r = semi_infinite_orbit(&m, &phi, &p, &SemiInfiniteOptions::default()).unwrap();
    let z = r.orbit.last();
    assert!((z.u - 0.25).abs() <= 1e-2 && z.p.abs() <= 1e-2);
    assert!(r.tail_pseudograph_distance <= 1e-2);
}

#[test]
fn attainment_improves_with_time_and_is_sample_stable() {
    let g = PeriodicGrid::new(256).unwrap();
    let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
    let phi = ScalarField::from_fn(g, f64::sin).unwrap();
    let um = ScalarField::constant(g, 0.25).unwrap();
    let d: Vec<f64> = [5.0, 10.0, 20.0]
        .iter()
        .map(|&t| pseudograph_attainment(&m, &phi, &um, t, 512, 1e-2).unwrap())
        .collect();
    assert!(d[1] <= 2e-2, "{d:?}");
    assert!(d[1] <= d[0] && d[2] <= d[1], "{d:?}");
    let doubled = pseudograph_attainment(&m, &phi, &um, 10.0, 1024, 1e-2).unwrap();
    assert!((doubled - d[1]).abs() <= 5.0 * g.dx());
}

#[test]
fn classifier_cases_of_the_model_problem() {
    let s = setup();
    let tol = 5e-3;
    let c = |x0: f64, u0: f64| classify_minimizer(&s.model, &s.upper, &s.lower, x0, u0, tol, Some(20.0)).unwrap();
    let top = c(PI / 2.0, 0.25);
    assert_eq!(top.case, 2);
    assert_eq!((top.alpha, top.omega), (LimitBehavior::UpperSlice, LimitBehavior::UpperSlice));
    let bottom = c(-PI / 2.0, -0.25);
    assert_eq!(bottom.case, 4);
    assert_eq!((bottom.alpha, bottom.omega), (LimitBehavior::LowerSlice, LimitBehavior::LowerSlice));
    let below = c(0.0, s.lower.interpolate(0.0) - 0.5);
    assert_eq!(below.case, 5);
    assert!(below.evidence.as_ref().unwrap().blew_up);
    assert_eq!(c(0.0, 0.0).case, 3);
    assert_eq!(c(0.0, 5.0).case, 1);
    // cases 2 and 4 are invariant along their evidence orbits
    for r in [&top, &bottom] {
        let ev = r.evidence.as_ref().unwrap();
        for z in ev.orbit.states.iter().step_by(1000) {
            assert_eq!(c(z.x, z.u).case, r.case);
        }
    }
}

#[test]
fn busemann_field_of_the_upper_fixed_point() {
    let s = setup();
    let z = PhasePoint::new(PI / 2.0, 0.25, 0.0);
    let orbit = Orbit::from_parts(vec![-10.0, -5.0, 0.0], vec![z; 3]);
    let b = busemann_solution(&s.model, &orbit, &s.params, s.grid, 30.0, &[0.0, -5.0, -10.0]).unwrap();
    assert!(b.field.sup_distance(&s.upper) <= 1e-2);
    assert!(b.residual <= 1e-7, "{}", b.residual);
    assert!(b.monotone_violation <= 5.0 * s.grid.dx());
    // the orbit is calibrated by the field it generates
    for (x, u) in orbit.states.iter().map(|z| (z.x, z.u)) {
        assert!((b.field.interpolate(x) - u).abs() <= 5.0 * s.grid.dx());
    }
}

#[test]
fn busemann_field_monotone_model() {
    let g = PeriodicGrid::new(256).unwrap();
    let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
    let p = LaxParams::new(g, DEFAULT_TAU, DEFAULT_V_MAX);
    let z = PhasePoint::new(0.0, 0.25, 0.0);
    let orbit = Orbit::from_parts(vec![-5.0, 0.0], vec![z; 2]);
    let b = busemann_solution(&m, &orbit, &p, g, 20.0, &[0.0, -5.0]).unwrap();
    assert!(b.field.values().iter().all(|v| (v - 0.25).abs() <= 1e-3));
}

#[test]
fn minimality_of_fixed_and_generic_orbits() {
    let s = setup();
    let tol = 5.0 * s.grid.dx();
    let z = PhasePoint::new(PI / 2.0, 0.25, 0.0);
    let fixed = Orbit::from_parts(vec![0.0, 10.0], vec![z; 2]);
    let pairs = sample_pairs(0.0, 10.0, 5);
    for mode in [MinimalityMode::Global, MinimalityMode::SemiStatic] {
        let r = minimality_test(&s.model, &fixed, &s.params, s.grid, mode, &pairs, 10.0).unwrap();
        assert!(r.passes(tol), "{mode:?}: {}", r.max_defect);
    }
    let generic = integrate_orbit(&s.model, PhasePoint::new(0.4, 0.8, -1.3), (0.0, 4.0), 1e-3).unwrap();
    let r = minimality_test(
        &s.model,
        &generic,
        &s.params,
        s.grid,
        MinimalityMode::Global,
        &sample_pairs(0.0, 4.0, 5),
        10.0,
    )
    .unwrap();
    assert!(!r.passes(tol), "{}", r.max_defect);
}

#[test]
fn obstruction_verdicts() {
    let s = setup();
    let tol = 1e-2;
    let zl = PhasePoint::new(-PI / 2.0, -0.25, 0.0);
    let zu = PhasePoint::new(PI / 2.0, 0.25, 0.0);
    // connection data: parked at z̲, a ramp, parked at z̄
    let times: Vec<f64> = (0..=100).map(|k| k as f64 / 10.0).collect();
    let states: Vec<PhasePoint> = times
        .iter()
        .map(|&t| {
            let f = ((t - 3.0) / 4.0).clamp(0.0, 1.0);
            PhasePoint::new(zl.x + f * (zu.x - zl.x), zl.u + f * (zu.u - zl.u), 0.0)
        })
        .collect();
    let data = Orbit::from_parts(times, states);
    let r = obstruction_check(&data, &s.upper, &s.lower, tol);
    assert_eq!(r.verdict, Verdict::Consistent);
    assert_eq!(obstruction_check(&data.time_reversed(), &s.upper, &s.lower, tol).verdict, Verdict::Violation);

    // seeded above the lower solution, its ω-samples sit on the upper one
    let up = integrate_orbit(&s.model, PhasePoint::new(PI / 2.0, 0.6, 0.0), (0.0, 30.0), 1e-3).unwrap();
    let r = obstruction_check(&up, &s.upper, &s.lower, tol);
    assert_eq!(r.verdict, Verdict::Consistent);
    assert_eq!(r.above_v_plus_bound, Some(true));

    // whatever the connection algorithm returns is oriented correctly
    let zero = ScalarField::constant(s.grid, 0.0).unwrap();
    let res = match heteroclinic_connect(&s.model, &zero, &s.params, &HeteroclinicOptions::default()) {
        Ok(r) => r,
        Err(AsymError::EndpointsNotAccepted(r)) => *r,
        Err(e) => panic!("{e}"),
    };
    let r = obstruction_check(&res.orbit, &res.u_minus, &res.v_plus, tol);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn connection_requires_ordered_solutions() {
    let s = setup();
    // this subsolution touches both extremal solutions, so its two limits
    // meet at the fixed points
    let phi = split_subsolution(s.grid);
    match heteroclinic_connect(&s.model, &phi, &s.params, &HeteroclinicOptions::default()) {
        Err(AsymError::Ordering { min_gap }) => assert!(min_gap <= 1e-6),
        other => panic!("expected an ordering failure, got {other:?}"),
    }
}
