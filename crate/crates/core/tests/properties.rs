use kam::flow::{energy_transport_residual, find_fixed_points, integrate_orbit, repolish, PhasePoint};
use kam::geometry::{PeriodicGrid, ScalarField};
use kam::model::{parse_expression, ContactModel};
use kam::variational::{
    action_table, candidate_offsets, lax_step, semigroup_evolve, Direction, LaxParams, Stepper,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(100)
}

fn general_model() -> ContactModel {
    ContactModel::general("p^2 + 0.5*p*sin(x) + 0.3*cos(x)*u - 0.2").unwrap()
}

fn small_grid() -> PeriodicGrid {
    PeriodicGrid::new(64).unwrap()
}

fn params(g: PeriodicGrid) -> LaxParams {
    LaxParams::new(g, 1.0 / 16.0, 8.0)
}

/// Random trigonometric field with a few modes.
fn field_strategy(g: PeriodicGrid) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-1.0f64..1.0, 6).prop_map(move |c| {
        ScalarField::from_fn(g, |x| {
            c[0] + c[1] * x.sin() + c[2] * x.cos() + 0.5 * c[3] * (2.0 * x).sin() + 0.5 * c[4] * (3.0 * x).cos()
                + 0.25 * c[5] * (x + 1.0).sin().abs()
        })
        .unwrap()
    })
}

fn models() -> Vec<ContactModel> {
    vec![ContactModel::sine_coupled(), general_model()]
}

// --- model -----------------------------------------------------------------

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn legendre_fenchel_identity(x in -PI..PI, u in -3.0f64..3.0, v in -6.0f64..6.0) {
        let m = ContactModel::sine_coupled();
        let (l, p) = m.lagrangian(x, u, v).unwrap();
        prop_assert!((p * v - m.hamiltonian(x, u, p).unwrap() - l).abs() <= 1e-9);
        let g = general_model();
        let (l, p) = g.lagrangian(x, u, v).unwrap();
        prop_assert!((p * v - g.hamiltonian(x, u, p).unwrap() - l).abs() <= 1e-6);
    }

    #[test]
    fn legendre_sup_never_exceeds_lagrangian(x in -PI..PI, u in -3.0f64..3.0, v in -6.0f64..6.0) {
        for m in models() {
            let (l, _) = m.lagrangian(x, u, v).unwrap();
            for k in 0..=400 {
                let p = -8.0 + 16.0 * k as f64 / 400.0;
                prop_assert!(p * v - m.hamiltonian(x, u, p).unwrap() <= l + 1e-6);
            }
        }
    }

    #[test]
    fn lambda_bounds_u_sensitivity(x in -PI..PI, u1 in -10.0f64..10.0, u2 in -10.0f64..10.0, p in -8.0f64..8.0) {
        for m in models() {
            let d = (m.hamiltonian(x, u1, p).unwrap() - m.hamiltonian(x, u2, p).unwrap()).abs();
            prop_assert!(d <= m.lambda_bound() * (u1 - u2).abs() * (1.0 + 1e-9) + 1e-12);
        }
    }
}

fn expr_strategy() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("u".to_string()),
        Just("p".to_string()),
        Just("pi".to_string()),
        (0u32..100).prop_map(|n| format!("{}", n as f64 / 4.0)),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop_oneof![Just('+'), Just('-'), Just('*'), Just('/'), Just('^')])
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (inner, prop_oneof![Just("sin"), Just("cos"), Just("exp"), Just("abs"), Just("sqrt")])
                .prop_map(|(a, f)| format!("{f}({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn parser_round_trip(src in expr_strategy()) {
        let e = parse_expression(&src).unwrap();
        let again = parse_expression(&e.to_string()).unwrap();
        prop_assert_eq!(e, again);
    }
}

// --- geometry --------------------------------------------------------------

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn interpolation_preserves_order(phi in field_strategy(small_grid()), bump in prop::collection::vec(0.0f64..0.5, 64), q in -PI..PI) {
        let g = phi.grid();
        let psi = ScalarField::new(g, phi.values().iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        prop_assert!(phi.interpolate(q) <= psi.interpolate(q));
    }

    #[test]
    fn mollify_commutes_with_constants(phi in field_strategy(small_grid()), c in -5.0f64..5.0, w in 1.0f64..4.0) {
        // exact in real arithmetic; the kernel sum moves the last few bits
        let g = phi.grid();
        let a = phi.map(|v| v + c).unwrap().mollify(w * g.dx()).unwrap();
        let b = phi.mollify(w * g.dx()).unwrap().map(|v| v + c).unwrap();
        prop_assert!(a.sup_distance(&b) <= 1e-12);
    }
}

#[test]
fn pseudograph_slopes_converge_first_order() {
    let f = |x: f64| (2.0 * x).sin() + 0.3 * x.cos();
    let df = |x: f64| 2.0 * (2.0 * x).cos() - 0.3 * x.sin();
    let mut errs = Vec::new();
    for n in [64, 128, 256, 512] {
        let g = PeriodicGrid::new(n).unwrap();
        let s = ScalarField::from_fn(g, f).unwrap().pseudograph_sample(1.0);
        assert!(s.all_differentiable());
        let e = s
            .nodes
            .iter()
            .map(|nd| (nd.momenta()[0] - df(nd.x)).abs())
            .fold(0.0, f64::max);
        errs.push((e, g.dx()));
    }
    for &(e, dx) in &errs {
        assert!(e <= 5.0 * dx, "{e} vs {dx}");
    }
    for w in errs.windows(2) {
        assert!(w[1].0 < w[0].0);
    }
}

// --- flow ------------------------------------------------------------------

#[test]
fn rk4_self_convergence_ratio() {
    let m = ContactModel::sine_coupled();
    let z0 = PhasePoint::new(0.3, 0.1, 0.4);
    let end = |h: f64| *integrate_orbit(&m, z0, (0.0, 2.0), h).unwrap().last();
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    let ratio = a.distance(&b) / b.distance(&c);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn energy_transport_fourth_order() {
    let m = ContactModel::sine_coupled();
    let z0 = PhasePoint::new(0.0, 0.0, 1.0);
    let r = |h| energy_transport_residual(&m, &integrate_orbit(&m, z0, (0.0, 5.0), h).unwrap()).unwrap();
    let (a, b) = (r(0.1), r(0.05));
    assert!(a / b > 12.0, "{a} {b}");
    assert!(r(1e-3) <= 1e-6);
}

#[test]
fn classical_case_conserves_energy() {
    let m = ContactModel::separable(1.0, "cos(x)", "0").unwrap();
    let o = integrate_orbit(&m, PhasePoint::new(0.2, 0.0, 0.7), (0.0, 10.0), 1e-3).unwrap();
    let e = o.energies(&m).unwrap();
    assert!(e.iter().all(|h| (h - e[0]).abs() <= 1e-8));
}

#[test]
fn repolish_is_idempotent() {
    for m in [ContactModel::sine_coupled(), general_model()] {
        for f in find_fixed_points(&m, 64).unwrap().points {
            let z = repolish(&m, f.z).unwrap();
            assert!(z.distance(&f.z) < 1e-12);
        }
    }
}

// --- variational -----------------------------------------------------------

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn action_is_strictly_monotone_in_u0(x0 in -PI..PI, u0 in -1.0f64..1.0, du in 1e-3f64..1.0, k in 1usize..24) {
        let g = small_grid();
        for m in models() {
            for dir in [Direction::Backward, Direction::Forward] {
                let a = action_table(&m, g, x0, u0, &params(g), k, dir).unwrap();
                let b = action_table(&m, g, x0, u0 + du, &params(g), k, dir).unwrap();
                for i in 0..g.n() {
                    let (x, y) = (a.layer(k)[i], b.layer(k)[i]);
                    if x.is_finite() {
                        prop_assert!(x < y);
                    }
                }
            }
        }
    }

    #[test]
    fn markov_recomposition(x0 in -PI..PI, u0 in -1.0f64..1.0, k1 in 1usize..8, k2 in 1usize..8) {
        let g = small_grid();
        let m = ContactModel::sine_coupled();
        let p = params(g);
        for dir in [Direction::Backward, Direction::Forward] {
            let whole = action_table(&m, g, x0, u0, &p, k1 + k2, dir).unwrap();
            let first = action_table(&m, g, x0, u0, &p, k1, dir).unwrap();
            let mut best = vec![match dir { Direction::Backward => f64::INFINITY, Direction::Forward => f64::NEG_INFINITY }; g.n()];
            for (j, &u) in first.layer(k1).iter().enumerate() {
                if !u.is_finite() {
                    continue;
                }
                let t = action_table(&m, g, g.x(j), u, &p, k2, dir).unwrap();
                for i in 0..g.n() {
                    let v = t.layer(k2)[i];
                    best[i] = match dir { Direction::Backward => best[i].min(v), Direction::Forward => best[i].max(v) };
                }
            }
            for i in 0..g.n() {
                let w = whole.layer(k1 + k2)[i];
                if w.is_finite() || best[i].is_finite() {
                    prop_assert!((w - best[i]).abs() <= 1e-9, "{} vs {}", w, best[i]);
                }
            }
        }
    }

    #[test]
    fn reversibility(x0 in -PI..PI, u0 in -1.0f64..1.0, xt in -PI..PI, k in 4usize..24) {
        let g = small_grid();
        let p = params(g);
        for m in models() {
            let back = action_table(&m, g, x0, u0, &p, k, Direction::Backward).unwrap();
            let i = g.nearest(xt);
            let u = back.layer(k)[i];
            if !u.is_finite() {
                continue;
            }
            let fwd = action_table(&m, g, g.x(i), u, &p, k, Direction::Forward).unwrap();
            let back_to = fwd.layer(k)[g.nearest(x0)];
            prop_assert!((back_to - u0).abs() <= 5.0 * g.dx(), "{} vs {}", back_to, u0);
        }
    }

    #[test]
    fn semigroup_duality(phi in field_strategy(small_grid())) {
        let g = phi.grid();
        let p = params(g);
        let slack = 5.0 * g.dx();
        for m in models() {
            let run = |f: &ScalarField, d| semigroup_evolve(&m, f, &p, 0.5, d, 1000).unwrap().last().clone();
            let up = run(&run(&phi, Direction::Forward), Direction::Backward);
            let down = run(&run(&phi, Direction::Backward), Direction::Forward);
            for i in 0..g.n() {
                prop_assert!(up.get(i) >= phi.get(i) - slack);
                prop_assert!(down.get(i) <= phi.get(i) + slack);
            }
        }
    }

    #[test]
    fn expansiveness_bound(phi in field_strategy(small_grid()), psi in field_strategy(small_grid()), t in 0.1f64..2.0) {
        let g = phi.grid();
        let p = params(g);
        for m in models() {
            for d in [Direction::Backward, Direction::Forward] {
                let ev_a = semigroup_evolve(&m, &phi, &p, t, d, 1).unwrap();
                let ev_b = semigroup_evolve(&m, &psi, &p, t, d, 1).unwrap();
                let gap0 = phi.sup_distance(&psi);
                for ((s, a), (_, b)) in ev_a.snapshots.iter().zip(&ev_b.snapshots) {
                    prop_assert!(a.sup_distance(b) <= (m.lambda_bound() * s).exp() * gap0 + 10.0 * g.dx());
                }
            }
        }
    }

    #[test]
    fn field_monotonicity(phi in field_strategy(small_grid()), bump in prop::collection::vec(0.0f64..0.5, 64)) {
        let g = phi.grid();
        let psi = ScalarField::new(g, phi.values().iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        let p = params(g);
        let m = ContactModel::sine_coupled();
        for d in [Direction::Backward, Direction::Forward] {
            let a = semigroup_evolve(&m, &phi, &p, 1.0, d, 4).unwrap();
            let b = semigroup_evolve(&m, &psi, &p, 1.0, d, 4).unwrap();
            for ((_, x), (_, y)) in a.snapshots.iter().zip(&b.snapshots) {
                prop_assert!((0..g.n()).all(|i| x.get(i) <= y.get(i)));
            }
        }
    }
}

/// Path enumeration for k ≤ 4 at n = 32: every offset sequence is walked
/// explicitly and the per-path action compared with the scheme.
fn enumerate_paths(stepper: &Stepper<'_>, g: PeriodicGrid, phi: &[f64], k: usize, dir: Direction) -> Vec<f64> {
    let offsets = candidate_offsets(stepper.params().m);
    let n = g.n() as isize;
    let base = offsets.len();
    let total = base.pow(k as u32);
    let mut out = vec![match dir { Direction::Backward => f64::INFINITY, Direction::Forward => f64::NEG_INFINITY }; g.n()];
    let (tau, dx) = (stepper.params().tau, g.dx());
    let model = ContactModel::sine_coupled();
    // one move computed from the Lagrangian directly: backward adds the
    // running cost, forward inverts it by bisection
    let move_value = |v: f64, from: usize, to: usize| -> f64 {
        let j = (to as isize - from as isize + n / 2).rem_euclid(n) - n / 2;
        match dir {
            Direction::Backward => {
                let vel = j as f64 * dx / tau;
                v + tau * model.lagrangian(g.x(to), v, vel).unwrap().0
            }
            Direction::Forward => {
                // the backward move to → from must land on v
                let vel = -j as f64 * dx / tau;
                let f = |w: f64| w + tau * model.lagrangian(g.x(from), w, vel).unwrap().0 - v;
                let (mut lo, mut hi) = (v - 50.0, v + 50.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    };
    for end in 0..g.n() {
        for code in 0..total {
            // offsets listed from the last step back to the first
            let mut c = code;
            let mut path = Vec::with_capacity(k);
            for _ in 0..k {
                path.push(offsets[c % base]);
                c /= base;
            }
            let mut nodes = vec![end];
            for &j in &path {
                let here = *nodes.last().unwrap() as isize;
                let prev = match dir {
                    Direction::Backward => here - j,
                    Direction::Forward => here + j,
                };
                nodes.push(prev.rem_euclid(n) as usize);
            }
            nodes.reverse();
            let mut v = phi[nodes[0]];
            for w in nodes.windows(2) {
                v = move_value(v, w[0], w[1]);
            }
            out[end] = match dir {
                Direction::Backward => out[end].min(v),
                Direction::Forward => out[end].max(v),
            };
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scheme_equals_path_enumeration(c in prop::collection::vec(-1.0f64..1.0, 4), k in 1usize..=4) {
        let g = PeriodicGrid::new(32).unwrap();
        let m = ContactModel::sine_coupled();
        // m = 2 keeps the (2m+1)^k path count small
        let p = LaxParams::new(g, 1.0 / 8.0, 3.0);
        prop_assert_eq!(p.m, 2);
        let stepper = Stepper::new(&m, g, p).unwrap();
        let phi: Vec<f64> = (0..g.n())
            .map(|i| { let x = g.x(i); c[0] + c[1] * x.sin() + c[2] * (2.0 * x).cos() + c[3] * x.cos() })
            .collect();
        for dir in [Direction::Backward, Direction::Forward] {
            let mut scheme = phi.clone();
            for _ in 0..k {
                scheme = stepper.step_raw(&scheme, dir).unwrap().values;
            }
            let paths = enumerate_paths(&stepper, g, &phi, k, dir);
            for i in 0..g.n() {
                prop_assert!((scheme[i] - paths[i]).abs() <= 1e-12, "{} vs {}", scheme[i], paths[i]);
            }
        }
    }
}

#[test]
fn one_step_matches_direct_minimization() {
    let g = PeriodicGrid::new(32).unwrap();
    let m = ContactModel::sine_coupled();
    let p = LaxParams::new(g, 1.0 / 8.0, 8.0);
    let phi = ScalarField::from_fn(g, |x| 0.3 * (2.0 * x).sin()).unwrap();
    let (out, _) = lax_step(&m, &phi, &p, Direction::Backward).unwrap();
    for i in 0..g.n() {
        let direct = candidate_offsets(p.m)
            .iter()
            .map(|&j| {
                let src = g.wrap(i as isize - j);
                let v = j as f64 * g.dx() / p.tau;
                phi.get(src) + p.tau * m.lagrangian(g.x(i), phi.get(src), v).unwrap().0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((out.get(i) - direct).abs() <= 1e-12);
    }
}
