//! Acceptance criteria for the toolkit, one runner per criterion.
//!
//! Each runner takes the numerical setting it should run at, so the same
//! code produces the verdict at the stated defaults and the informational
//! companion runs at other time steps.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use contact_kam::suite::{run_suite, SuiteOptions};
use kam::asymptotic::{
    heteroclinic_connect, minimality_test, sample_pairs, AsymError, HeteroclinicOptions, HeteroclinicResult,
    MinimalityMode,
};
use kam::flow::{
    characteristic_polynomial, connection_ordering_holds, energy_transport_residual, find_fixed_points,
    integrate_orbit, jacobian, jacobian_fd, solve_cubic, PhasePoint,
};
use kam::geometry::{periodic_distance, PeriodicGrid, ScalarField};
use kam::model::ContactModel;
use num_complex::Complex64;
use kam::variational::{
    action_table, semigroup_evolve, weak_kam_limit, Direction, LaxParams, LimitOptions, WeakKamStatus,
};

/// n = 512, τ = 2⁻⁸, v_max = 8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub n: usize,
    pub tau: f64,
    pub v_max: f64,
}

impl Default for Setting {
    fn default() -> Self {
        Setting {
            n: 512,
            tau: 1.0 / 256.0,
            v_max: 8.0,
        }
    }
}

impl Setting {
    pub fn with_tau(tau: f64) -> Setting {
        Setting {
            tau,
            ..Setting::default()
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        PeriodicGrid::new(self.n).expect("valid grid size")
    }

    pub fn params(&self) -> LaxParams {
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        LaxParams::new(self.grid(), self.tau, self.v_max).with_threads(threads)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Option<Duration>,
}

impl Verdict {
    pub fn line(&self) -> String {
        let limit = match self.limit {
            Some(l) => format!(" (limit {}s)", l.as_secs()),
            None => String::new(),
        };
        format!(
            "{} {}: {} [{:.2}s{limit}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Times `body`, which returns (passed, detail); a runtime limit is part of
/// the verdict.
fn judge(id: &str, limit: Option<u64>, body: impl FnOnce() -> Result<(bool, String), String>) -> Verdict {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let limit = limit.map(Duration::from_secs);
    let (mut passed, mut detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(l) = limit {
        if elapsed > l {
            passed = false;
            detail.push_str("; over the time limit");
        }
    }
    Verdict {
        id: id.to_string(),
        passed,
        detail,
        elapsed,
        limit,
    }
}

fn example() -> ContactModel {
    ContactModel::sine_coupled()
}

fn z_lower() -> PhasePoint {
    PhasePoint::new(-PI / 2.0, -0.25, 0.0)
}

fn z_upper() -> PhasePoint {
    PhasePoint::new(PI / 2.0, 0.25, 0.0)
}

fn split_subsolution(g: PeriodicGrid) -> ScalarField {
    ScalarField::from_fn(g, |x| if x < 0.0 { 0.5 * x.sin() + 0.25 } else { 0.25 }).expect("finite")
}

pub fn fixed_points() -> Verdict {
    judge("1 fixed points", Some(1), || {
        let r = find_fixed_points(&example(), 64).map_err(|e| e.to_string())?;
        let want = [z_lower(), z_upper()];
        let mut gaps = Vec::new();
        for w in &want {
            let d = r.points.iter().map(|f| f.z.distance(w)).fold(f64::INFINITY, f64::min);
            gaps.push(d);
        }
        let residual = r.points.iter().map(|f| f.residual).fold(0.0, f64::max);
        let ok = r.points.len() == 2 && gaps.iter().all(|&g| g <= 1e-8) && residual <= 1e-8;
        Ok((
            ok,
            format!(
                "{} points, distance to the expected pair {:.2e}/{:.2e}, max residual {:.2e}",
                r.points.len(),
                gaps[0],
                gaps[1],
                residual
            ),
        ))
    })
}

pub fn monotone_constant_rate(s: Setting) -> Verdict {
    judge("2 monotone constant-rate solution", Some(30), || {
        let m = ContactModel::separable(1.0, "-0.25", "1").map_err(|e| e.to_string())?;
        let phi = ScalarField::from_fn(s.grid(), f64::sin).map_err(|e| e.to_string())?;
        let r = weak_kam_limit(&m, &phi, &s.params(), Direction::Backward, LimitOptions::default())
            .map_err(|e| e.to_string())?;
        let err = r.field.values().iter().map(|v| (v - 0.25).abs()).fold(0.0, f64::max);
        Ok((
            r.status == WeakKamStatus::Converged && err <= 1e-3,
            format!("{} at t={}, sup|u - 1/4| = {err:.2e}", r.status.as_str(), r.elapsed),
        ))
    })
}

pub fn hopf_lax(s: Setting) -> Verdict {
    judge("3 Hopf-Lax oracle", Some(30), || {
        let m = ContactModel::separable(1.0, "0", "0").map_err(|e| e.to_string())?;
        let g = s.grid();
        let t = 1.0;
        let tent = |x: f64| (1.0 - x.abs()).max(0.0);
        let cases: [(&str, &dyn Fn(f64) -> f64); 3] = [("0", &|_| 0.0), ("sin", &f64::sin), ("tent", &tent)];
        let fine: Vec<f64> = (0..16384).map(|k| -PI + 2.0 * PI * k as f64 / 16384.0).collect();
        let mut errs = Vec::new();
        for (_, f) in cases {
            let phi = ScalarField::from_fn(g, f).map_err(|e| e.to_string())?;
            let ev = semigroup_evolve(&m, &phi, &s.params(), t, Direction::Backward, usize::MAX)
                .map_err(|e| e.to_string())?;
            let out = ev.last();
            let mut worst: f64 = 0.0;
            for i in 0..g.n() {
                let x = g.x(i);
                let exact = fine
                    .iter()
                    .map(|&y| f(y) + periodic_distance(x, y).powi(2) / (4.0 * t))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max((out.get(i) - exact).abs());
            }
            errs.push(worst);
        }
        Ok((
            errs.iter().all(|&e| e <= 5e-3),
            format!("sup errors 0/sin/tent = {:.2e}/{:.2e}/{:.2e}", errs[0], errs[1], errs[2]),
        ))
    })
}

pub fn extremal_solutions(s: Setting) -> Verdict {
    judge("4 extremal solutions", Some(120), || {
        let m = example();
        let p = s.params();
        let zero = ScalarField::constant(s.grid(), 0.0).map_err(|e| e.to_string())?;
        let lim = LimitOptions::default();
        let up = weak_kam_limit(&m, &zero, &p, Direction::Backward, lim).map_err(|e| e.to_string())?;
        let lo = weak_kam_limit(&m, &zero, &p, Direction::Forward, lim).map_err(|e| e.to_string())?;
        let low = ScalarField::constant(s.grid(), -10.0).map_err(|e| e.to_string())?;
        let div = weak_kam_limit(&m, &low, &p, Direction::Backward, lim).map_err(|e| e.to_string())?;
        let at_top = up.field.interpolate(PI / 2.0);
        let at_bottom = lo.field.interpolate(-PI / 2.0);
        let ok = up.status == WeakKamStatus::Converged
            && lo.status == WeakKamStatus::Converged
            && (at_top - 0.25).abs() <= 5e-3
            && up.field.min() > 0.0
            && (at_bottom + 0.25).abs() <= 5e-3
            && div.status == WeakKamStatus::DivergedMinus;
        Ok((
            ok,
            format!(
                "u_bar_-(pi/2) = {at_top:.5} ({}), min u_bar_- = {:.5}, u_under_+(-pi/2) = {at_bottom:.5} ({}), phi = -10 gives {}",
                up.status.as_str(),
                up.field.min(),
                lo.status.as_str(),
                div.status.as_str()
            ),
        ))
    })
}

pub fn subsolution_behavior(s: Setting) -> Verdict {
    judge("5 subsolution behavior", Some(60), || {
        let m = example();
        let g = s.grid();
        let phi = split_subsolution(g);
        let check = m.subsolution_check(&phi, false);
        let every = ((0.125 / s.tau).round() as usize).max(1);
        let ev = semigroup_evolve(&m, &phi, &s.params(), 10.0, Direction::Backward, every)
            .map_err(|e| e.to_string())?;
        let slack = 5.0 * g.dx();
        let mut below = f64::NEG_INFINITY;
        let mut at_bottom = f64::NEG_INFINITY;
        for (t, f) in &ev.snapshots {
            for i in 0..g.n() {
                below = below.max(phi.get(i) - f.get(i));
            }
            if *t >= 1.0 {
                at_bottom = at_bottom.max(f.interpolate(-PI / 2.0));
            }
        }
        let ok = check.passed && below <= slack && at_bottom <= -0.25 + 5e-3;
        Ok((
            ok,
            format!(
                "subsolution residual {:.2e} ({}), max(phi - T_t phi) = {below:.2e}, max_(t>=1) T_t phi(-pi/2) = {at_bottom:.5}",
                check.max_residual,
                if check.passed { "pass" } else { "fail" }
            ),
        ))
    })
}

/// The connection from the zero seed, accepted or not.
pub fn connection(s: Setting) -> Result<HeteroclinicResult, AsymError> {
    match heteroclinic_connect(&example(), &ScalarField::constant(s.grid(), 0.0)?, &s.params(), &HeteroclinicOptions::default()) {
        Ok(r) => Ok(r),
        Err(AsymError::EndpointsNotAccepted(r)) => Ok(*r),
        Err(e) => Err(e),
    }
}

pub fn heteroclinic(s: Setting) -> Verdict {
    judge("6 heteroclinic reproduction", Some(600), || {
        let m = example();
        let r = connection(s).map_err(|e| e.to_string())?;
        let alpha = r.orbit.first().distance(&z_lower());
        let omega = r.orbit.last().distance(&z_upper());
        let g = s.grid();
        let t0 = *r.orbit.times.first().expect("orbit");
        let t1 = *r.orbit.times.last().expect("orbit");
        let pairs = sample_pairs(t0, t1, 5);
        let global = minimality_test(&m, &r.orbit, &s.params(), g, MinimalityMode::Global, &pairs, t1 - t0)
            .map_err(|e| e.to_string())?;
        let semi = minimality_test(&m, &r.orbit, &s.params(), g, MinimalityMode::SemiStatic, &pairs, t1 - t0)
            .map_err(|e| e.to_string())?;
        let global_ok = global.passes(5.0 * g.dx());
        let semi_fails = semi.max_defect >= 10.0 * global.max_defect;
        let ok = alpha <= 1e-2
            && omega <= 1e-2
            && r.max_abs_h >= 1e-3
            && r.tail_abs_h <= 1e-3
            && global_ok
            && semi_fails;
        Ok((
            ok,
            format!(
                "endpoint distances to z_lower/z_upper {alpha:.2e}/{omega:.2e}, max|H| {:.2e}, tail|H| {:.2e}, global defect {:.2e}, semi-static defect {:.2e}, limit point ({:.4}, {:.4}, {:.4})",
                r.max_abs_h,
                r.tail_abs_h,
                global.max_defect,
                semi.max_defect,
                r.limit_point.x,
                r.limit_point.u,
                r.limit_point.p
            ),
        ))
    })
}

/// Sandwich v_+ ≤ u ≤ u_− (with 5Δx slack) and the α-below-ω ordering
/// along the computed connection.
pub fn heteroclinic_invariants(s: Setting) -> Verdict {
    judge("heteroclinic sandwich and ordering", None, || {
        let r = connection(s).map_err(|e| e.to_string())?;
        let ordered = connection_ordering_holds(&r.orbit);
        Ok((
            r.sandwich_violation <= 0.0 && ordered,
            format!(
                "sandwich violation {:.2e}, u at alpha end {:.4} below u at omega end {:.4}: {ordered}",
                r.sandwich_violation,
                r.orbit.first().u,
                r.orbit.last().u
            ),
        ))
    })
}

pub fn energy_transport() -> Verdict {
    judge("7 energy transport", None, || {
        let m = example();
        let z0 = PhasePoint::new(0.0, 0.0, 1.0);
        let o = integrate_orbit(&m, z0, (0.0, 5.0), 1e-3).map_err(|e| e.to_string())?;
        let r = energy_transport_residual(&m, &o).map_err(|e| e.to_string())?;
        let control = ContactModel::separable(1.0, "-0.25", "0").map_err(|e| e.to_string())?;
        let oc = integrate_orbit(&control, z0, (0.0, 5.0), 1e-3).map_err(|e| e.to_string())?;
        let e = oc.energies(&control).map_err(|e| e.to_string())?;
        let drift = e.iter().map(|h| (h - e[0]).abs()).fold(0.0, f64::max);
        Ok((
            r <= 1e-6 && drift <= 1e-8,
            format!("transport residual {r:.2e}, classical control drift {drift:.2e}"),
        ))
    })
}

pub fn property_suite(s: Setting, trials: usize) -> Verdict {
    judge("8 property suite", Some(300), || {
        let opts = SuiteOptions {
            trials,
            seed: 0,
            n: 64,
            tau: s.tau,
            v_max: s.v_max,
            threads: 1,
        };
        let outcomes = run_suite(&example(), &opts).map_err(|e| e.to_string())?;
        let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.line()).collect();
        let worst: Vec<String> = outcomes.iter().map(|o| format!("{}={:.1e}", o.name, o.worst)).collect();
        Ok((
            failed.is_empty(),
            if failed.is_empty() {
                format!("{} properties x {trials} trials; worst {}", outcomes.len(), worst.join(", "))
            } else {
                failed.join("; ")
            },
        ))
    })
}

pub fn shift_law(s: Setting) -> Verdict {
    judge("9 constant-rate shift law", None, || {
        let m = ContactModel::separable(1.0, "-0.25", "1").map_err(|e| e.to_string())?;
        let g = s.grid();
        let p = s.params();
        let k = (1.0 / s.tau).round() as usize;
        let delta = 0.1;
        let a = action_table(&m, g, 0.3, 0.0, &p, k, Direction::Backward).map_err(|e| e.to_string())?;
        let b = action_table(&m, g, 0.3, delta, &p, k, Direction::Backward).map_err(|e| e.to_string())?;
        let want = (-1.0f64).exp() * delta;
        let mut worst: f64 = 0.0;
        let mut reached = 0;
        for (x, y) in a.layer(k).iter().zip(b.layer(k)) {
            if x.is_finite() && y.is_finite() {
                worst = worst.max((y - x - want).abs());
                reached += 1;
            }
        }
        Ok((
            reached > 0 && worst <= 1e-3,
            format!("max |shift - e^-1 delta| = {worst:.2e} over {reached} nodes"),
        ))
    })
}

fn max_gap(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut g: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            g = g.max((a[r][c] - b[r][c]).abs());
        }
    }
    g
}

/// Largest distance from each eigenvalue to its nearest root.
fn root_gap(eig: &[Complex64; 3], roots: &[Complex64; 3]) -> f64 {
    eig.iter()
        .map(|e| roots.iter().map(|r| (e - r).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Checks the linearization at z̄ against a reference matrix and the
/// reference cubic s³ + c2 s² + c1 s + c0.
pub fn linearization_against(id: &str, reference: [[f64; 3]; 3], cubic: [f64; 3]) -> Verdict {
    judge(id, None, || {
        let m = example();
        let z = z_upper();
        let j = jacobian(&m, &z).map_err(|e| e.to_string())?;
        let jf = jacobian_fd(&m, &z, 1e-5).map_err(|e| e.to_string())?;
        // π/2 is not representable, so cos x and the like come out near 6e-17
        // rather than 0; "exact" means equal up to that rounding
        let analytic = max_gap(&j, &reference);
        let exact = analytic <= 4.0 * f64::EPSILON;
        let fd = max_gap(&jf, &reference);
        let c = characteristic_polynomial(&j);
        let eig = solve_cubic(c[0], c[1], c[2]);
        let roots = solve_cubic(cubic[0], cubic[1], cubic[2]);
        let gap = root_gap(&eig, &roots);
        Ok((
            exact && fd <= 1e-6 && gap <= 1e-8,
            format!(
                "analytic Jacobian {} (gap to reference {analytic:.2e}), finite-difference gap {fd:.2e}, eigenvalues {} vs reference roots gap {gap:.2e}",
                j.iter()
                    .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")))
                    .collect::<Vec<_>>()
                    .join(" "),
                eig.iter().map(|e| format!("{:.6}{:+.6}i", e.re, e.im)).collect::<Vec<_>>().join(", ")
            ),
        ))
    })
}

pub fn linearization() -> Verdict {
    // s³ − s + 1/2
    linearization_against(
        "10 linearization",
        [[0.0, 0.0, 2.0], [0.25, 0.0, -1.0], [0.0, -1.0, 0.0]],
        [0.0, -1.0, 0.5],
    )
}
