//! One function per subcommand. Each writes its files through the context
//! and returns the one-line summary, or a `Failure` carrying the exit code.

use std::f64::consts::PI;
use std::fmt::Write;

use kam::asymptotic::{
    characteristic_orbit, classify_minimizer, heteroclinic_connect, minimality_test, obstruction_check,
    sample_pairs, semi_infinite_orbit, AsymError, CharOptions, HeteroclinicOptions, HeteroclinicResult,
    MinimalityMode, SemiInfiniteOptions,
};
use kam::flow::{
    find_fixed_points, trace_invariant_manifold, FixedPointInfo, FlowError, ManifoldDirection, Orbit,
};
use kam::geometry::ScalarField;
use kam::model::{expr, ContactModel, Var};
use kam::variational::{action_table, semigroup_evolve, weak_kam_limit, Direction, WeakKamResult, WeakKamStatus};

use crate::config::ModelSpec;
use crate::suite::{run_suite, SuiteOptions};
use crate::svg::{self, Curve};
use crate::{Command, Context, Failure};

const ODE_H: f64 = 1e-3;
/// orbit CSVs keep every 10th RK4 step
const ORBIT_THIN: usize = 10;
const MANIFOLD_OFFSET: f64 = 1e-5;
const COARSE_FIXED: usize = 64;

pub(crate) fn dispatch(ctx: &mut Context, cmd: &Command) -> Result<String, Failure> {
    match cmd {
        Command::ParseCheck(_) => parse_check(ctx),
        Command::Evolve(_) => evolve(ctx),
        Command::Solve(_) => solve(ctx),
        Command::Action(_) => action(ctx),
        Command::Orbit(_) => orbit(ctx),
        Command::FixedPoints(_) => fixed_points(ctx),
        Command::Manifold(_) => manifold(ctx),
        Command::Connect(_) => connect(ctx),
        Command::Classify(_) => classify(ctx),
        Command::Verify(_) => verify(ctx),
        Command::ReproduceEx63(_) => reproduce(ctx),
    }
}

fn dir_name(d: Direction) -> &'static str {
    match d {
        Direction::Backward => "backward",
        Direction::Forward => "forward",
    }
}

fn field_points(f: &ScalarField) -> Vec<(f64, f64)> {
    let g = f.grid();
    (0..g.n()).map(|i| (g.x(i), f.get(i))).collect()
}

fn orbit_points(o: &Orbit) -> Vec<(f64, f64)> {
    o.states.iter().map(|z| (z.x, z.u)).collect()
}

fn parse_check(ctx: &mut Context) -> Result<String, Failure> {
    let mut s = String::new();
    let parsed = |src: &str, vars: &[Var]| -> Result<String, Failure> {
        expr::parse_in(src, vars)
            .map(|e| e.to_string())
            .map_err(|e| Failure::Config(format!("{src:?}: {e}")))
    };
    let variant = match &ctx.cfg.spec {
        ModelSpec::SeparableQuadratic { alpha, potential, rate } => {
            let _ = writeln!(s, "variant=SeparableQuadratic");
            let _ = writeln!(s, "alpha={alpha}");
            let _ = writeln!(s, "potential={}", parsed(potential, &[Var::X])?);
            let _ = writeln!(s, "rate={}", parsed(rate, &[Var::X])?);
            "SeparableQuadratic"
        }
        ModelSpec::General { hamiltonian, .. } => {
            let _ = writeln!(s, "variant=General");
            let _ = writeln!(s, "hamiltonian={}", parsed(hamiltonian, &[Var::X, Var::U, Var::P])?);
            "General"
        }
    };
    let lambda = ctx.cfg.model.lambda_bound();
    let _ = writeln!(s, "lambda_bound={lambda}");
    let _ = writeln!(s, "tau={}", ctx.cfg.numerics.tau);
    for w in ctx.cfg.model.warnings() {
        let _ = writeln!(s, "warning={w}");
    }
    let mut tail = String::new();
    if ctx.flags.phi.is_some() || ctx.cfg.phi.is_some() {
        let src = ctx.phi_source();
        let phi = ctx.cfg.field(&src)?;
        let report = ctx.cfg.model.subsolution_check(&phi, false);
        let _ = writeln!(s, "phi={src}");
        let _ = writeln!(s, "phi_min={:e}", phi.min());
        let _ = writeln!(s, "phi_max={:e}", phi.max());
        let _ = writeln!(s, "phi_subsolution={}", report.passed);
        let _ = writeln!(s, "phi_subsolution_residual={:e}", report.max_residual);
        tail = format!(", phi subsolution={}", report.passed);
    }
    ctx.write("model.txt", &s)?;
    Ok(format!("parse-check ok: {variant}, Lambda={lambda}{tail}"))
}

fn evolve(ctx: &mut Context) -> Result<String, Failure> {
    let t = ctx.require(ctx.flags.t, "t")?;
    let phi = ctx.cfg.field(&ctx.phi_source())?;
    let dir = ctx.direction();
    let params = ctx.cfg.params();
    let every = ((1.0 / params.tau).round() as usize).max(1);
    let ev = semigroup_evolve(&ctx.cfg.model, &phi, &params, t, dir, every)?;
    let last = ev.last();
    // one column per unit of model time
    let mut snaps = String::from("x");
    for (s, _) in &ev.snapshots {
        let _ = write!(snaps, ",t={s}");
    }
    snaps.push('\n');
    let g = phi.grid();
    for i in 0..g.n() {
        let _ = write!(snaps, "{:e}", g.x(i));
        for (_, f) in &ev.snapshots {
            let _ = write!(snaps, ",{:e}", f.get(i));
        }
        snaps.push('\n');
    }
    let mut s = String::new();
    let _ = writeln!(s, "direction={}", dir_name(dir));
    let _ = writeln!(s, "t_final={}", ev.steps as f64 * params.tau);
    let _ = writeln!(s, "steps={}", ev.steps);
    let _ = writeln!(s, "min={:e}", last.min());
    let _ = writeln!(s, "max={:e}", last.max());
    let _ = writeln!(s, "clamped={}", ev.clamped);
    let _ = writeln!(s, "edge_hits={}", ev.edge_hits);
    ctx.write("evolved.csv", &last.to_csv())?;
    ctx.write("evolved.summary.txt", &s)?;
    ctx.write("snapshots.csv", &snaps)?;
    Ok(format!(
        "evolve: {} to t={} in {} steps, min={:.6} max={:.6}",
        dir_name(dir),
        ev.steps as f64 * params.tau,
        ev.steps,
        last.min(),
        last.max()
    ))
}

fn limit_name(d: Direction) -> &'static str {
    match d {
        Direction::Backward => "u_minus",
        Direction::Forward => "v_plus",
    }
}

fn write_limit(ctx: &mut Context, name: &str, r: &WeakKamResult) -> Result<(), Failure> {
    ctx.write(&format!("{name}.csv"), &r.field.to_csv())?;
    ctx.write(&format!("{name}.summary.txt"), &r.summary())
}

fn solve(ctx: &mut Context) -> Result<String, Failure> {
    let phi = ctx.cfg.field(&ctx.phi_source())?;
    let dir = ctx.direction();
    let r = weak_kam_limit(&ctx.cfg.model, &phi, &ctx.cfg.params(), dir, ctx.cfg.limit())?;
    let name = limit_name(dir);
    write_limit(ctx, name, &r)?;
    let line = format!(
        "{} {} residual={:.3e} t={} -> {name}.csv",
        r.status.as_str(),
        dir_name(dir),
        r.residual,
        r.elapsed
    );
    match r.status {
        WeakKamStatus::Converged => Ok(format!("solve: {line}")),
        _ => Err(Failure::Numerical(line)),
    }
}

fn action(ctx: &mut Context) -> Result<String, Failure> {
    let x0 = ctx.require(ctx.flags.x0, "x0")?;
    let u0 = ctx.flags.u0.unwrap_or(0.0);
    let horizon = ctx.flags.horizon.unwrap_or(1.0);
    let dir = ctx.direction();
    let params = ctx.cfg.params();
    let k = ((horizon / params.tau).round() as usize).max(1);
    let table = action_table(&ctx.cfg.model, ctx.cfg.grid, x0, u0, &params, k, dir)?;
    ctx.write("action.csv", &table.to_csv())?;
    let last = table.layer(k);
    let reach: Vec<f64> = last.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = reach.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = reach.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "action: {} table from ({x0}, {u0}) with {k} layers, final layer reaches {}/{} nodes, range [{lo:.6}, {hi:.6}]",
        dir_name(dir),
        reach.len(),
        last.len()
    ))
}

fn maybe_svg(ctx: &mut Context, name: &str, title: &str, curves: &[Curve]) -> Result<(), Failure> {
    if ctx.flags.svg {
        let text = svg::render(&ctx.cfg.model, title, curves);
        ctx.write(name, &text)?;
    }
    Ok(())
}

fn orbit(ctx: &mut Context) -> Result<String, Failure> {
    let phi = ctx.cfg.field(&ctx.phi_source())?;
    let params = ctx.cfg.params();
    let model = ctx.cfg.model.clone();
    if let Some(x0) = ctx.flags.x0 {
        let t = ctx.flags.t.or(ctx.flags.horizon).unwrap_or(1.0);
        let opts = CharOptions {
            char_tol: ctx.cfg.char_tol(),
            ode_h: ODE_H,
            refine: true,
        };
        let c = characteristic_orbit(&model, &phi, x0, t, &params, opts)?;
        let mut s = String::new();
        let _ = writeln!(s, "kind=characteristic");
        let _ = writeln!(s, "x_target={x0}");
        let _ = writeln!(s, "t={t}");
        let _ = writeln!(s, "jet={:e},{:e},{:e}", c.jet.x, c.jet.u, c.jet.p);
        let _ = writeln!(s, "max_defect={:e}", c.max_defect);
        let _ = writeln!(s, "char_tol={:e}", opts.char_tol);
        let _ = writeln!(s, "ode_dp_gap={:e}", c.ode_dp_gap);
        ctx.write("orbit.csv", &c.orbit.to_csv(&model, ORBIT_THIN))?;
        ctx.write("orbit.summary.txt", &s)?;
        maybe_svg(
            ctx,
            "orbit.svg",
            "characteristic",
            &[
                Curve {
                    label: "phi".into(),
                    color: "#2b8a3e",
                    points: field_points(&phi),
                    dashed: true,
                },
                Curve {
                    label: "orbit".into(),
                    color: "#1c4fd8",
                    points: orbit_points(&c.orbit),
                    dashed: false,
                },
            ],
        )?;
        return Ok(format!(
            "orbit: characteristic to x={x0} at t={t}, jet=({:.6}, {:.6}, {:.6}), max_defect={:.3e}",
            c.jet.x, c.jet.u, c.jet.p, c.max_defect
        ));
    }
    let mut opts = SemiInfiniteOptions {
        limit: ctx.cfg.limit(),
        ..SemiInfiniteOptions::default()
    };
    if let Some(h) = ctx.flags.horizon {
        opts.horizons = [0.125, 0.25, 0.5, 1.0].iter().map(|f| f * h).collect();
    }
    let r = semi_infinite_orbit(&model, &phi, &params, &opts)?;
    let mut s = String::new();
    let _ = writeln!(s, "kind=semi_infinite");
    let _ = writeln!(s, "horizons={}", join(&opts.horizons));
    let _ = writeln!(s, "limit_jet={:e},{:e},{:e}", r.limit_jet.x, r.limit_jet.u, r.limit_jet.p);
    let _ = writeln!(s, "jet_shift={:e}", r.jet_shift);
    let _ = writeln!(s, "cluster_size={}", r.cluster_size);
    let _ = writeln!(s, "tail_pseudograph_distance={:e}", r.tail_pseudograph_distance);
    match r.tail_slice_distance {
        Some(d) => {
            let _ = writeln!(s, "tail_slice_distance={d:e}");
        }
        None => {
            let _ = writeln!(s, "tail_slice_distance=none");
        }
    }
    let _ = writeln!(s, "truncated_at={}", r.truncated_at);
    ctx.write("orbit.csv", &r.orbit.to_csv(&model, ORBIT_THIN))?;
    ctx.write("orbit.summary.txt", &s)?;
    ctx.write("u_minus.csv", &r.u_minus.field.to_csv())?;
    maybe_svg(
        ctx,
        "orbit.svg",
        "semi-infinite orbit",
        &[
            Curve {
                label: "u_-".into(),
                color: "#c92a2a",
                points: field_points(&r.u_minus.field),
                dashed: true,
            },
            Curve {
                label: "orbit".into(),
                color: "#1c4fd8",
                points: orbit_points(&r.orbit),
                dashed: false,
            },
        ],
    )?;
    let end = r.orbit.last();
    Ok(format!(
        "orbit: semi-infinite from jet ({:.6}, {:.6}, {:.6}), ends at ({:.6}, {:.6}, {:.6}), pseudograph distance {:.3e}",
        r.limit_jet.x, r.limit_jet.u, r.limit_jet.p, end.x, end.u, end.p, r.tail_pseudograph_distance
    ))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn fixed_points_csv(points: &[FixedPointInfo]) -> String {
    let mut s = String::from(
        "x,u,p,residual,ev1_re,ev1_im,ev2_re,ev2_im,ev3_re,ev3_im,stable_dim,unstable_dim,hyperbolic\n",
    );
    for f in points {
        let _ = write!(s, "{:e},{:e},{:e},{:e}", f.z.x, f.z.u, f.z.p, f.residual);
        for e in &f.eigenvalues {
            let _ = write!(s, ",{:e},{:e}", e.re, e.im);
        }
        let _ = writeln!(s, ",{},{},{}", f.stable_dim, f.unstable_dim, f.hyperbolic);
    }
    s
}

fn fixed_points(ctx: &mut Context) -> Result<String, Failure> {
    let report = find_fixed_points(&ctx.cfg.model, COARSE_FIXED)?;
    ctx.write("fixed_points.csv", &fixed_points_csv(&report.points))?;
    let mut line = format!("fixed-points: {} found", report.points.len());
    for f in &report.points {
        let _ = write!(line, " ({:.6}, {:.6}, {:.6})", f.z.x, f.z.u, f.z.p);
    }
    if let Some(family) = &report.degenerate_family {
        let _ = write!(line, "; degenerate family sampled at {} points", family.len());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(line)
}

fn manifold(ctx: &mut Context) -> Result<String, Failure> {
    let model = ctx.cfg.model.clone();
    let report = find_fixed_points(&model, COARSE_FIXED)?;
    if report.points.is_empty() {
        return Err(Failure::Numerical("no fixed points to trace from".into()));
    }
    // unstable unless --direction backward asks for the stable manifold
    let which = match ctx.flags.direction {
        Some(crate::DirArg::Backward) => ManifoldDirection::Stable,
        _ => ManifoldDirection::Unstable,
    };
    let t_max = ctx.flags.t.unwrap_or(10.0);
    let picked: Vec<usize> = match ctx.flags.x0 {
        Some(x0) => {
            let k = (0..report.points.len())
                .min_by(|&a, &b| {
                    kam::geometry::periodic_distance(report.points[a].z.x, x0)
                        .total_cmp(&kam::geometry::periodic_distance(report.points[b].z.x, x0))
                })
                .expect("nonempty");
            vec![k]
        }
        None => (0..report.points.len()).collect(),
    };
    let tag = match which {
        ManifoldDirection::Unstable => "unstable",
        ManifoldDirection::Stable => "stable",
    };
    let mut traced = Vec::new();
    let mut notes = Vec::new();
    for k in picked {
        let info = &report.points[k];
        for (branch, bname) in [(1.0, "plus"), (-1.0, "minus")] {
            let name = format!("manifold_{k}_{tag}_{bname}.csv");
            match trace_invariant_manifold(&model, info, which, branch, MANIFOLD_OFFSET, t_max, ODE_H) {
                Ok(tr) => {
                    ctx.write(&name, &tr.orbit.to_csv(&model, ORBIT_THIN))?;
                    traced.push((name, tr.orbit, tr.max_abs_h));
                }
                Err(FlowError::BlowUp { t, partial, .. }) => {
                    ctx.write(&name, &partial.to_csv(&model, ORBIT_THIN))?;
                    notes.push(format!("{name} left the bound at t={t:.3}"));
                    traced.push((name, *partial, f64::NAN));
                }
                Err(e @ FlowError::NoRealEigenvalue(_)) => {
                    notes.push(format!("point {k}: {e}"));
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let curves: Vec<Curve> = traced
        .iter()
        .map(|(name, o, _)| Curve {
            label: name.trim_end_matches(".csv").to_string(),
            color: if name.ends_with("plus.csv") { "#1c4fd8" } else { "#e8590c" },
            points: orbit_points(o),
            dashed: false,
        })
        .collect();
    maybe_svg(ctx, "manifold.svg", &format!("{tag} manifolds"), &curves)?;
    if traced.is_empty() {
        return Err(Failure::Numerical(format!("nothing traced: {}", notes.join("; "))));
    }
    let max_h = traced.iter().map(|t| t.2).fold(0.0, f64::max);
    let mut line = format!("manifold: {} {tag} branches traced to t={t_max}, max|H|={max_h:.3e}", traced.len());
    for n in notes {
        let _ = write!(line, "; {n}");
    }
    Ok(line)
}

fn heteroclinic_files(ctx: &mut Context, model: &ContactModel, r: &HeteroclinicResult, tol: f64) -> Result<(), Failure> {
    let obs = obstruction_check(&r.orbit, &r.u_minus, &r.v_plus, tol);
    let mut s = r.summary();
    let _ = writeln!(s, "accepted={}", r.accepted());
    let _ = writeln!(s, "obstruction_verdict={:?}", obs.verdict);
    let _ = writeln!(s, "alpha_to_u_minus={:e}", obs.alpha_to_u_minus);
    let _ = writeln!(s, "omega_to_v_plus={:e}", obs.omega_to_v_plus);
    for run in &r.runs {
        let _ = writeln!(
            s,
            "run eps={:e} tau0={} tau_eps={} band_clamps={} t_eps={:e} crossing={:e},{:e},{:e}",
            run.eps, run.tau0, run.tau_eps, run.band_clamps, run.t_eps, run.crossing.x, run.crossing.u, run.crossing.p
        );
    }
    ctx.write("heteroclinic.csv", &r.orbit.to_csv(model, ORBIT_THIN))?;
    ctx.write("heteroclinic.summary.txt", &s)?;
    ctx.write("u_minus.csv", &r.u_minus.to_csv())?;
    ctx.write("v_plus.csv", &r.v_plus.to_csv())?;
    Ok(())
}

fn heteroclinic_curves(r: &HeteroclinicResult) -> Vec<Curve> {
    vec![
        Curve {
            label: "u_-".into(),
            color: "#c92a2a",
            points: field_points(&r.u_minus),
            dashed: true,
        },
        Curve {
            label: "v_+".into(),
            color: "#2b8a3e",
            points: field_points(&r.v_plus),
            dashed: true,
        },
        Curve {
            label: "connecting orbit".into(),
            color: "#1c4fd8",
            points: orbit_points(&r.orbit),
            dashed: false,
        },
    ]
}

fn run_connect(ctx: &Context, model: &ContactModel, phi: &ScalarField) -> Result<HeteroclinicResult, AsymError> {
    let mut opts = HeteroclinicOptions {
        accept_tol: ctx.cfg.numerics.accept_tol,
        limit: ctx.cfg.limit(),
        target: ctx.flags.x0,
        ..HeteroclinicOptions::default()
    };
    if let Some(h) = ctx.flags.horizon {
        opts.horizon = h;
    }
    if let Some(t) = ctx.flags.t {
        opts.span = t;
    }
    heteroclinic_connect(model, phi, &ctx.cfg.params(), &opts)
}

fn connect(ctx: &mut Context) -> Result<String, Failure> {
    let phi = ctx.cfg.field(&ctx.phi_source())?;
    let model = ctx.cfg.model.clone();
    let tol = ctx.cfg.numerics.accept_tol;
    let (r, accepted) = match run_connect(ctx, &model, &phi) {
        Ok(r) => (r, true),
        Err(AsymError::EndpointsNotAccepted(r)) => (*r, false),
        Err(e) => return Err(e.into()),
    };
    heteroclinic_files(ctx, &model, &r, tol)?;
    maybe_svg(ctx, "heteroclinic.svg", "connecting orbit", &heteroclinic_curves(&r))?;
    let line = format!(
        "limit point ({:.6}, {:.6}, {:.6}), endpoint distances {:.3e} / {:.3e}, max|H|={:.3e}",
        r.limit_point.x, r.limit_point.u, r.limit_point.p, r.alpha_distance, r.omega_distance, r.max_abs_h
    );
    if accepted {
        Ok(format!("connect: {line}"))
    } else {
        Err(Failure::Numerical(format!("endpoints not accepted within {tol:e}; {line}")))
    }
}

/// The extremal solutions ū_− and u̲_+ reached from one seed field.
fn extremal_pair(ctx: &Context, model: &ContactModel, seed: &ScalarField) -> Result<(WeakKamResult, WeakKamResult), Failure> {
    let params = ctx.cfg.params();
    let up = weak_kam_limit(model, seed, &params, Direction::Backward, ctx.cfg.limit())?;
    let lo = weak_kam_limit(model, seed, &params, Direction::Forward, ctx.cfg.limit())?;
    for r in [&up, &lo] {
        if r.status != WeakKamStatus::Converged {
            return Err(Failure::Numerical(format!(
                "{} limit from the seed ended {}",
                dir_name(r.direction),
                r.status.as_str()
            )));
        }
    }
    Ok((up, lo))
}

fn classify(ctx: &mut Context) -> Result<String, Failure> {
    let x0 = ctx.require(ctx.flags.x0, "x0")?;
    let u0 = ctx.require(ctx.flags.u0, "u0")?;
    let t = ctx.flags.t.unwrap_or(10.0);
    let model = ctx.cfg.model.clone();
    let seed = ctx.cfg.field(&ctx.phi_source())?;
    let (up, lo) = extremal_pair(ctx, &model, &seed)?;
    let r = classify_minimizer(&model, &up.field, &lo.field, x0, u0, ctx.cfg.numerics.class_tol, Some(t))?;
    ctx.write("classification.txt", &r.to_kv())?;
    ctx.write("u_bar_minus.csv", &up.field.to_csv())?;
    ctx.write("u_under_plus.csv", &lo.field.to_csv())?;
    if let Some(e) = &r.evidence {
        ctx.write("evidence.csv", &e.orbit.to_csv(&model, ORBIT_THIN))?;
        let curves = [
            Curve {
                label: "u_bar_-".into(),
                color: "#c92a2a",
                points: field_points(&up.field),
                dashed: true,
            },
            Curve {
                label: "u_under_+".into(),
                color: "#2b8a3e",
                points: field_points(&lo.field),
                dashed: true,
            },
            Curve {
                label: "evidence orbit".into(),
                color: "#1c4fd8",
                points: orbit_points(&e.orbit),
                dashed: false,
            },
        ];
        maybe_svg(ctx, "classification.svg", "classification", &curves)?;
    }
    Ok(format!(
        "classify: case {} at ({x0}, {u0}): alpha={:?} omega={:?}{}",
        r.case,
        r.alpha,
        r.omega,
        if r.ambiguous { " (ambiguous)" } else { "" }
    ))
}

fn verify(ctx: &mut Context) -> Result<String, Failure> {
    let opts = SuiteOptions {
        trials: ctx.cfg.numerics.trials,
        seed: ctx.cfg.numerics.seed,
        v_max: ctx.cfg.numerics.v_max,
        threads: ctx.cfg.threads,
        ..SuiteOptions::default()
    };
    let outcomes = run_suite(&ctx.cfg.model, &opts)?;
    let mut s = String::new();
    for o in &outcomes {
        let _ = writeln!(s, "{}", o.line());
        eprintln!("{}", o.line());
    }
    ctx.write("verify.txt", &s)?;
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(format!("verify: {} properties passed (seed {})", outcomes.len(), opts.seed))
    } else {
        Err(Failure::Numerical(format!("verify: failed {}", failed.join(", "))))
    }
}

/// Fixed points, the extremal solutions, the connecting orbit, the unstable
/// manifold of the lower fixed point and the minimality tests, for the
/// model problem H = p² + sin x·u − 1/4 on the configured grid.
fn reproduce(ctx: &mut Context) -> Result<String, Failure> {
    let model = ModelSpec::example().build()?.with_v_max(ctx.cfg.numerics.v_max);
    if ctx.cfg.spec != ModelSpec::example() {
        eprintln!("notice: reproduce-ex63 ignores the configured model and uses p^2 + sin(x)*u - 0.25");
    }
    let params = ctx.cfg.params();
    let grid = ctx.cfg.grid;

    let fixed = find_fixed_points(&model, COARSE_FIXED)?;
    ctx.write("fixed_points.csv", &fixed_points_csv(&fixed.points))?;

    let zero = ScalarField::constant(grid, 0.0).map_err(|e| Failure::Config(e.to_string()))?;
    let (up, lo) = extremal_pair(ctx, &model, &zero)?;
    write_limit(ctx, "u_bar_minus", &up)?;
    write_limit(ctx, "u_under_plus", &lo)?;

    let (het, accepted) = match run_connect(ctx, &model, &zero) {
        Ok(r) => (r, true),
        Err(AsymError::EndpointsNotAccepted(r)) => (*r, false),
        Err(e) => return Err(e.into()),
    };
    heteroclinic_files(ctx, &model, &het, ctx.cfg.numerics.accept_tol)?;

    // unstable manifold of the lower fixed point, both branches
    let mut curves = vec![
        Curve {
            label: "u_bar_-".into(),
            color: "#c92a2a",
            points: field_points(&up.field),
            dashed: true,
        },
        Curve {
            label: "u_under_+".into(),
            color: "#2b8a3e",
            points: field_points(&lo.field),
            dashed: true,
        },
    ];
    let lower = fixed
        .points
        .iter()
        .find(|f| kam::geometry::periodic_distance(f.z.x, -PI / 2.0) < 1e-6);
    let mut manifold_h = f64::NAN;
    if let Some(info) = lower {
        for (branch, bname, color) in [(1.0, "plus", "#1c4fd8"), (-1.0, "minus", "#e8590c")] {
            let name = format!("manifold_unstable_{bname}.csv");
            let orbit = match trace_invariant_manifold(&model, info, ManifoldDirection::Unstable, branch, MANIFOLD_OFFSET, 10.0, ODE_H) {
                Ok(tr) => {
                    if branch > 0.0 {
                        manifold_h = tr.max_abs_h;
                    }
                    tr.orbit
                }
                Err(FlowError::BlowUp { partial, .. }) => *partial,
                Err(e) => return Err(e.into()),
            };
            ctx.write(&name, &orbit.to_csv(&model, ORBIT_THIN))?;
            curves.push(Curve {
                label: format!("unstable manifold, branch {bname}"),
                color,
                points: orbit_points(&orbit),
                dashed: false,
            });
        }
    }
    curves.push(Curve {
        label: "connecting orbit".into(),
        color: "#5f3dc4",
        points: orbit_points(&het.orbit),
        dashed: false,
    });

    let t0 = *het.orbit.times.first().expect("nonempty orbit");
    let t1 = *het.orbit.times.last().expect("nonempty orbit");
    let pairs = sample_pairs(t0, t1, 5);
    let s_max = t1 - t0;
    let mut mins = String::new();
    let mut defects = Vec::new();
    for mode in [MinimalityMode::Global, MinimalityMode::SemiStatic] {
        let r = minimality_test(&model, &het.orbit, &params, grid, mode, &pairs, s_max)?;
        let _ = writeln!(mins, "mode={mode:?} max_defect={:e} skipped={}", r.max_defect, r.skipped);
        for p in &r.pairs {
            let _ = writeln!(
                mins,
                "  a={} b={} u_b={:e} action={:e} defect={:e}",
                p.a, p.b, p.u_b, p.action, p.defect
            );
        }
        defects.push(r.max_defect);
    }
    ctx.write("minimality.txt", &mins)?;
    let figure = svg::render(&model, "extremal solutions, manifold and connecting orbit", &curves);
    ctx.write("figure1.svg", &figure)?;

    let line = format!(
        "{} fixed points, u_bar_-(pi/2)={:.6}, u_under_+(-pi/2)={:.6}, manifold max|H|={:.3e}, connection endpoints {:.3e}/{:.3e}, minimality defects {:.3e}/{:.3e}",
        fixed.points.len(),
        up.field.interpolate(PI / 2.0),
        lo.field.interpolate(-PI / 2.0),
        manifold_h,
        het.alpha_distance,
        het.omega_distance,
        defects[0],
        defects[1]
    );
    if accepted {
        Ok(format!("reproduce-ex63: {line}"))
    } else {
        Err(Failure::Numerical(format!("connecting orbit not accepted; {line}")))
    }
}
