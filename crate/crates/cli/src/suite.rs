//! The bundled randomized property suite behind `contact-kam verify`.
//!
//! Every property draws its cases from one ChaCha stream, so a seed fixes
//! the whole run.

use kam::geometry::{PeriodicGrid, ScalarField};
use kam::model::ContactModel;
use kam::variational::{
    action_table, candidate_offsets, semigroup_evolve, Direction, LaxParams, Stepper, VarError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub trials: usize,
    pub seed: u64,
    pub n: usize,
    pub tau: f64,
    pub v_max: f64,
    pub threads: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            trials: 100,
            seed: 0,
            n: 64,
            tau: 1.0 / 16.0,
            v_max: 8.0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// largest observed value of the checked quantity
    pub worst: f64,
    pub tol: f64,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} trials={} failures={} worst={:e} tol={:e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.failures,
            self.worst,
            self.tol
        )
    }
}

struct Tally {
    name: &'static str,
    tol: f64,
    trials: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Tally {
        Tally {
            name,
            tol,
            trials: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Record one trial whose checked quantity is `value`; `ok` decides it.
    fn record(&mut self, value: f64, ok: bool) {
        self.trials += 1;
        self.worst = self.worst.max(value);
        if !ok {
            self.failures += 1;
        }
    }

    fn done(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name,
            trials: self.trials,
            failures: self.failures,
            worst: self.worst,
            tol: self.tol,
        }
    }
}

fn admissible_tau(model: &ContactModel, mut tau: f64) -> f64 {
    while tau * model.lambda_bound() > 0.5 {
        tau *= 0.5;
    }
    tau
}

fn random_field(rng: &mut ChaCha8Rng, g: PeriodicGrid) -> ScalarField {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_fn(g, |x| {
        c[0] + c[1] * x.sin() + c[2] * x.cos() + 0.5 * c[3] * (2.0 * x).sin() + 0.5 * c[4] * (3.0 * x).cos()
            + 0.25 * c[5] * (x + 1.0).sin().abs()
    })
    .expect("finite field")
}

fn both() -> [Direction; 2] {
    [Direction::Backward, Direction::Forward]
}

pub fn run_suite(model: &ContactModel, opts: &SuiteOptions) -> Result<Vec<PropertyOutcome>, VarError> {
    let g = PeriodicGrid::new(opts.n)?;
    let p = LaxParams::new(g, admissible_tau(model, opts.tau), opts.v_max).with_threads(opts.threads);
    let dx = g.dx();
    let lambda = model.lambda_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    let ext = |dir| match dir {
        Direction::Backward => f64::INFINITY,
        Direction::Forward => f64::NEG_INFINITY,
    };

    let mut t = Tally::new("u0_monotonicity", 0.0);
    for _ in 0..opts.trials {
        let (x0, u0) = (rng.gen_range(-1.0..1.0) * std::f64::consts::PI, rng.gen_range(-1.0..1.0));
        let du = rng.gen_range(1e-3..1.0);
        let k = rng.gen_range(1..24);
        // largest h(u0) − h(u0 + du); strict monotonicity needs it negative
        let mut worst = f64::NEG_INFINITY;
        for dir in both() {
            let a = action_table(model, g, x0, u0, &p, k, dir)?;
            let b = action_table(model, g, x0, u0 + du, &p, k, dir)?;
            for (x, y) in a.layer(k).iter().zip(b.layer(k)) {
                if x.is_finite() {
                    worst = worst.max(x - y);
                }
            }
        }
        t.record(worst, worst < 0.0);
    }
    out.push(t.done());

    let mut t = Tally::new("markov_recomposition", 1e-9);
    for _ in 0..opts.trials {
        let (x0, u0) = (rng.gen_range(-1.0..1.0) * std::f64::consts::PI, rng.gen_range(-1.0..1.0));
        let (k1, k2) = (rng.gen_range(1..8), rng.gen_range(1..8));
        let mut gap: f64 = 0.0;
        for dir in both() {
            let whole = action_table(model, g, x0, u0, &p, k1 + k2, dir)?;
            let first = action_table(model, g, x0, u0, &p, k1, dir)?;
            let mut best = vec![ext(dir); g.n()];
            for (j, &u) in first.layer(k1).iter().enumerate() {
                if !u.is_finite() {
                    continue;
                }
                let again = action_table(model, g, g.x(j), u, &p, k2, dir)?;
                for (b, &v) in best.iter_mut().zip(again.layer(k2)) {
                    *b = match dir {
                        Direction::Backward => b.min(v),
                        Direction::Forward => b.max(v),
                    };
                }
            }
            for (w, b) in whole.layer(k1 + k2).iter().zip(&best) {
                if w.is_finite() || b.is_finite() {
                    gap = gap.max((w - b).abs());
                }
            }
        }
        t.record(gap, gap <= 1e-9);
    }
    out.push(t.done());

    let mut t = Tally::new("reversibility", 5.0 * dx);
    for _ in 0..opts.trials {
        let (x0, u0) = (rng.gen_range(-1.0..1.0) * std::f64::consts::PI, rng.gen_range(-1.0..1.0));
        let xt = rng.gen_range(-1.0..1.0) * std::f64::consts::PI;
        let k = rng.gen_range(4..24);
        let back = action_table(model, g, x0, u0, &p, k, Direction::Backward)?;
        let i = g.nearest(xt);
        let u = back.layer(k)[i];
        if !u.is_finite() {
            t.record(0.0, true);
            continue;
        }
        let fwd = action_table(model, g, g.x(i), u, &p, k, Direction::Forward)?;
        let err = (fwd.layer(k)[g.nearest(x0)] - u0).abs();
        t.record(err, err <= 5.0 * dx);
    }
    out.push(t.done());

    let mut t = Tally::new("duality", 5.0 * dx);
    for _ in 0..opts.trials {
        let phi = random_field(&mut rng, g);
        let run = |f: &ScalarField, d| -> Result<ScalarField, VarError> {
            Ok(semigroup_evolve(model, f, &p, 0.5, d, usize::MAX)?.last().clone())
        };
        let up = run(&run(&phi, Direction::Forward)?, Direction::Backward)?;
        let down = run(&run(&phi, Direction::Backward)?, Direction::Forward)?;
        // T⁻T⁺φ ≥ φ and T⁺T⁻φ ≤ φ, up to the slack
        let mut worst = f64::NEG_INFINITY;
        for i in 0..g.n() {
            worst = worst.max(phi.get(i) - up.get(i)).max(down.get(i) - phi.get(i));
        }
        t.record(worst, worst <= 5.0 * dx);
    }
    out.push(t.done());

    let mut t = Tally::new("expansiveness", 10.0 * dx);
    for _ in 0..opts.trials {
        let phi = random_field(&mut rng, g);
        let psi = random_field(&mut rng, g);
        let horizon = rng.gen_range(0.1..2.0);
        let gap0 = phi.sup_distance(&psi);
        let mut worst = f64::NEG_INFINITY;
        for d in both() {
            let a = semigroup_evolve(model, &phi, &p, horizon, d, 1)?;
            let b = semigroup_evolve(model, &psi, &p, horizon, d, 1)?;
            for ((s, fa), (_, fb)) in a.snapshots.iter().zip(&b.snapshots) {
                worst = worst.max(fa.sup_distance(fb) - (lambda * s).exp() * gap0);
            }
        }
        t.record(worst, worst <= 10.0 * dx);
    }
    out.push(t.done());

    out.push(path_enumeration(model, opts, &mut rng)?);
    Ok(out)
}

/// Scheme against brute-force enumeration of every offset path at n = 32,
/// K ≤ 4, with v_max = 2Δx/τ so that m = 2.
fn path_enumeration(
    model: &ContactModel,
    opts: &SuiteOptions,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyOutcome, VarError> {
    let g = PeriodicGrid::new(32)?;
    let tau = admissible_tau(model, 1.0 / 8.0);
    // keep the candidate window at two nodes whatever τ had to become
    let v_max = 2.0 * g.dx() / tau;
    let p = LaxParams::new(g, tau, v_max);
    let stepper = Stepper::new(model, g, p)?;
    // (2m+1)^K = 625 paths per node at most
    let cases = opts.trials;
    let mut t = Tally::new("path_enumeration", 1e-12);
    for _ in 0..cases {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = rng.gen_range(1..=4);
        let phi: Vec<f64> = (0..g.n())
            .map(|i| {
                let x = g.x(i);
                c[0] + c[1] * x.sin() + c[2] * (2.0 * x).cos() + c[3] * x.cos()
            })
            .collect();
        let mut worst: f64 = 0.0;
        for dir in both() {
            let mut scheme = phi.clone();
            for _ in 0..k {
                scheme = stepper.step_raw(&scheme, dir)?.values;
            }
            let paths = enumerate_paths(model, &p, g, &phi, k, dir)?;
            for (a, b) in scheme.iter().zip(&paths) {
                worst = worst.max((a - b).abs());
            }
        }
        t.record(worst, worst <= 1e-12);
    }
    Ok(t.done())
}

/// Walks every offset sequence; each move comes straight from the
/// Lagrangian (backward adds the running cost, forward inverts it by
/// bisection).
fn enumerate_paths(
    model: &ContactModel,
    p: &LaxParams,
    g: PeriodicGrid,
    phi: &[f64],
    k: usize,
    dir: Direction,
) -> Result<Vec<f64>, VarError> {
    let offsets = candidate_offsets(p.m);
    let n = g.n() as isize;
    let base = offsets.len();
    let total = base.pow(k as u32);
    let (tau, dx) = (p.tau, g.dx());
    let lag = |x: f64, u: f64, v: f64| -> Result<f64, VarError> {
        Ok(model.lagrangian(x, u, v).map_err(VarError::from)?.0)
    };
    let move_value = |v: f64, from: usize, to: usize| -> Result<f64, VarError> {
        let j = (to as isize - from as isize + n / 2).rem_euclid(n) - n / 2;
        match dir {
            Direction::Backward => Ok(v + tau * lag(g.x(to), v, j as f64 * dx / tau)?),
            Direction::Forward => {
                // the backward move to → from must land on v
                let vel = -j as f64 * dx / tau;
                let (mut lo, mut hi) = (v - 50.0, v + 50.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid + tau * lag(g.x(from), mid, vel)? - v > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    };
    let mut out = vec![
        match dir {
            Direction::Backward => f64::INFINITY,
            Direction::Forward => f64::NEG_INFINITY,
        };
        g.n()
    ];
    for (end, best) in out.iter_mut().enumerate() {
        for code in 0..total {
            let mut c = code;
            let mut nodes = vec![end];
            for _ in 0..k {
                let j = offsets[c % base];
                c /= base;
                let here = *nodes.last().expect("nonempty") as isize;
                let prev = match dir {
                    Direction::Backward => here - j,
                    Direction::Forward => here + j,
                };
                nodes.push(prev.rem_euclid(n) as usize);
            }
            nodes.reverse();
            let mut v = phi[nodes[0]];
            for w in nodes.windows(2) {
                v = move_value(v, w[0], w[1])?;
            }
            *best = match dir {
                Direction::Backward => best.min(v),
                Direction::Forward => best.max(v),
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_outcomes() {
        let m = ContactModel::sine_coupled();
        let opts = SuiteOptions {
            trials: 4,
            seed: 11,
            ..SuiteOptions::default()
        };
        let a = run_suite(&m, &opts).unwrap();
        let b = run_suite(&m, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|o| o.passed()), "{a:?}");
    }

    #[test]
    fn general_variant_passes_too() {
        let m = ContactModel::general("p^2 + 0.5*p*sin(x) + 0.3*cos(x)*u - 0.2").unwrap();
        let opts = SuiteOptions {
            trials: 4,
            ..SuiteOptions::default()
        };
        for o in run_suite(&m, &opts).unwrap() {
            assert!(o.passed(), "{}", o.line());
        }
    }
}
