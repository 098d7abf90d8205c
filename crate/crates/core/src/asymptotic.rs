//! Orbit constructions on top of the semigroup: characteristics lifted from
//! dynamic-programming backtracks, semi-infinite orbits, heteroclinic
//! connections between two weak KAM solutions, the minimizer classifier,
//! minimality tests and Busemann-type solutions.
//!
//! Limit sets are represented by tail windows (the last or first 20% of an
//! integration span) and their phase distance to a Mañé slice proxy.

use std::fmt::Write as _;

use thiserror::Error;

use crate::flow::{find_fixed_points, integrate_orbit_with, FlowError, IntegrateOptions, Orbit, PhasePoint};
use crate::geometry::{default_kink_tol, periodic_distance, signed_offset, GridError, PseudographSample, ScalarField};
use crate::model::{ContactModel, DomainError, ModelError};
use crate::variational::{
    evolve_steps, field_table, point_table, weak_kam_limit, ActionTable, CurvePoint, Direction, LaxParams,
    LimitOptions, Stepper, VarError, WeakKamResult, WeakKamStatus,
};

pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymError {
    #[error(transparent)]
    Var(#[from] VarError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{which} weak KAM limit did not converge ({status:?})")]
    NotConverged { which: &'static str, status: WeakKamStatus },
    #[error("ordering v_+ < u_- fails: min(u_- - v_+) = {min_gap:.3e}")]
    Ordering { min_gap: f64 },
    #[error("initial field has a kink at the source node x = {x}")]
    NotSmooth { x: f64 },
    #[error("witness defect {max:.3e} exceeds char_tol {tol:.3e}")]
    WitnessDefect { max: f64, tol: f64 },
    #[error("no convergent cluster of jets within radius {radius:.1e} (nearest neighbour {spread:.3e})")]
    NoCluster { radius: f64, spread: f64 },
    #[error("crossing not reached for eps = {eps:.3e} before t = {t_max} (expected t_eps >= {lower_bound:.3})")]
    CrossingNotReached { eps: f64, t_max: f64, lower_bound: f64 },
    #[error("smoothed field for eps = {eps:.3e} leaves the band (v_+, v_+ + eps) at {violations} nodes")]
    Band { eps: f64, violations: usize },
    #[error("endpoints not accepted: alpha {alpha:.3e}, omega {omega:.3e} (tolerance {tol:.1e})",
        alpha = .0.alpha_distance, omega = .0.omega_distance, tol = .0.accept_tol)]
    EndpointsNotAccepted(Box<HeteroclinicResult>),
    #[error("invalid request: {0}")]
    Request(String),
}

/// Phase distance to a set of points, max norm, periodic in x.
pub fn distance_to_points(points: &[PhasePoint], z: &PhasePoint) -> f64 {
    points.iter().map(|q| q.distance(z)).fold(f64::INFINITY, f64::min)
}

/// Stand-in for a Mañé slice: the fixed points calibrated by a weak KAM
/// field when the model has any, otherwise the field's pseudograph.
#[derive(Debug, Clone, PartialEq)]
pub enum SliceProxy {
    Points(Vec<PhasePoint>),
    Pseudograph(PseudographSample),
}

impl SliceProxy {
    pub fn for_field(model: &ContactModel, field: &ScalarField, tol: f64) -> Result<SliceProxy, AsymError> {
        let report = find_fixed_points(model, 64)?;
        let pts: Vec<PhasePoint> = report
            .points
            .iter()
            .map(|f| f.z)
            .filter(|z| (z.u - field.interpolate(z.x)).abs() <= tol)
            .collect();
        if pts.is_empty() || report.degenerate_family.is_some() {
            Ok(SliceProxy::Pseudograph(pseudograph(field)))
        } else {
            Ok(SliceProxy::Points(pts))
        }
    }

    pub fn distance(&self, z: &PhasePoint) -> f64 {
        match self {
            SliceProxy::Points(p) => distance_to_points(p, z),
            SliceProxy::Pseudograph(s) => s.distance(z.x, z.u, z.p),
        }
    }

    pub fn points(&self) -> Option<&[PhasePoint]> {
        match self {
            SliceProxy::Points(p) => Some(p),
            SliceProxy::Pseudograph(_) => None,
        }
    }
}

fn pseudograph(field: &ScalarField) -> PseudographSample {
    field.pseudograph_sample(default_kink_tol(field.grid().dx(), 1.0))
}

fn window_min(orbit: &Orbit, range: std::ops::Range<usize>, f: impl Fn(&PhasePoint) -> f64) -> f64 {
    orbit.states[range].iter().map(f).fold(f64::INFINITY, f64::min)
}

/// RK4 forward or backward; a blow-up keeps the partial orbit.
fn integrate_lenient(
    model: &ContactModel,
    z0: PhasePoint,
    span: (f64, f64),
    h: f64,
) -> Result<(Orbit, bool), AsymError> {
    match integrate_orbit_with(model, z0, span, h, IntegrateOptions::default()) {
        Ok(o) => Ok((o, false)),
        Err(FlowError::BlowUp { partial, .. }) => Ok((*partial, true)),
        Err(e) => Err(e.into()),
    }
}

fn require_converged(r: &WeakKamResult, which: &'static str) -> Result<(), AsymError> {
    if r.status == WeakKamStatus::Converged {
        Ok(())
    } else {
        Err(AsymError::NotConverged { which, status: r.status })
    }
}

// ---------------------------------------------------------------------------
// characteristics

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharOptions {
    pub char_tol: f64,
    pub ode_h: f64,
    /// secant search for a source point whose ODE orbit lands on the
    /// target, within the velocity-quantization reach of the grid source
    pub refine: bool,
}

impl CharOptions {
    pub fn for_dx(dx: f64) -> CharOptions {
        CharOptions {
            char_tol: 5.0 * dx,
            ode_h: 1e-3,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicOrbit {
    /// ODE re-integration from the recovered jet
    pub orbit: Orbit,
    /// backtracked discrete minimizer, increasing in time
    pub dp_curve: Vec<CurvePoint>,
    /// p lifted on each discrete segment via ∂L/∂v
    pub dp_momenta: Vec<f64>,
    pub jet: PhasePoint,
    /// δ_k = |u(t_k) − (T⁻_{t_k}φ)(x(t_k))| along the ODE orbit
    pub defects: Vec<f64>,
    pub max_defect: f64,
    /// max_k |x_ode(t_k) − x_k| against the discrete curve
    pub ode_dp_gap: f64,
}

fn jet_at(phi: &ScalarField, x: f64) -> PhasePoint {
    PhasePoint::new(x, phi.interpolate(x), phi.slope_at(x))
}

/// Source jet of the discrete minimizer ending at (x_target, Kτ).
fn source_jet(table: &ActionTable, phi: &ScalarField, x_target: f64) -> Result<(Vec<CurvePoint>, PhasePoint), AsymError> {
    let curve = table.backtrack(x_target, table.steps())?;
    let x0 = curve[0].x;
    Ok((curve, jet_at(phi, x0)))
}

fn lift_momenta(model: &ContactModel, curve: &[CurvePoint], tau: f64) -> Result<Vec<f64>, AsymError> {
    curve
        .windows(2)
        .map(|w| {
            let v = signed_offset(w[0].x, w[1].x) / tau;
            Ok(model.lagrangian(w[1].x, w[0].u, v)?.1)
        })
        .collect()
}

/// Characteristic of T⁻_tφ through (x_target, t): backtracked on the grid,
/// then re-integrated as an ODE orbit from the recovered 1-jet of φ.
pub fn characteristic_orbit(
    model: &ContactModel,
    phi: &ScalarField,
    x_target: f64,
    t: f64,
    params: &LaxParams,
    opts: CharOptions,
) -> Result<CharacteristicOrbit, AsymError> {
    if !(t > 0.0) {
        return Err(AsymError::Request(format!("horizon must be positive, got {t}")));
    }
    let grid = phi.grid();
    let stepper = Stepper::new(model, grid, *params)?;
    let k = ((t / params.tau).round() as usize).max(1);
    let table = field_table(&stepper, phi, k, Direction::Backward)?;
    let (curve, mut jet) = source_jet(&table, phi, x_target)?;
    let node = phi.pseudograph_sample(default_kink_tol(grid.dx(), 1.0)).nodes[curve[0].i].clone();
    if !node.differentiable {
        return Err(AsymError::NotSmooth { x: node.x });
    }
    let horizon = k as f64 * params.tau;
    let land = |z: PhasePoint| -> Result<(Orbit, f64), AsymError> {
        let (o, _) = integrate_lenient(model, z, (0.0, horizon), opts.ode_h)?;
        let miss = if o.times.last().copied() == Some(horizon) {
            signed_offset(x_target, o.last().x)
        } else {
            f64::INFINITY
        };
        Ok((o, miss))
    };
    let (mut orbit, mut miss) = land(jet)?;
    if opts.refine && miss.is_finite() {
        let dx = grid.dx();
        // each discrete step can be off by half a velocity cell
        let reach = (2.0 * dx + 0.5 * horizon * dx / params.tau).min(std::f64::consts::PI);
        let (mut a, mut fa) = (jet.x, miss);
        let mut b = jet.x - miss.clamp(-reach, reach);
        let (mut ob, mut fb) = land(jet_at(phi, b))?;
        for _ in 0..30 {
            if !fb.is_finite() || (fb - fa).abs() < 1e-15 {
                break;
            }
            let c = b - fb * (b - a) / (fb - fa);
            if signed_offset(jet.x, c).abs() > reach {
                break;
            }
            a = b;
            fa = fb;
            b = c;
            (ob, fb) = land(jet_at(phi, b))?;
            if fb.abs() < 1e-12 {
                break;
            }
        }
        if fb.is_finite() && fb.abs() < miss.abs() {
            jet = jet_at(phi, b);
            orbit = ob;
            miss = fb;
        }
    }
    let _ = miss;
    let mut defects = Vec::with_capacity(curve.len());
    let mut gap: f64 = 0.0;
    for c in &curve {
        let (_, z) = orbit.at_time(c.t);
        defects.push((z.u - table.value(z.x, c.k)).abs());
        gap = gap.max(periodic_distance(z.x, c.x));
    }
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    let dp_momenta = lift_momenta(model, &curve, params.tau)?;
    let out = CharacteristicOrbit {
        orbit,
        dp_curve: curve,
        dp_momenta,
        jet,
        defects,
        max_defect,
        ode_dp_gap: gap,
    };
    if !(max_defect <= opts.char_tol) {
        return Err(AsymError::WitnessDefect {
            max: max_defect,
            tol: opts.char_tol,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// semi-infinite orbits

#[derive(Debug, Clone, PartialEq)]
pub struct SemiInfiniteOptions {
    pub horizons: Vec<f64>,
    pub targets: Vec<f64>,
    pub cluster_tol: f64,
    pub ode_h: f64,
    /// move the limit jet along J¹_φ, within the velocity-quantization reach
    /// of the grid, to the point whose orbit comes closest to the slice
    pub refine: bool,
    pub limit: LimitOptions,
}

impl Default for SemiInfiniteOptions {
    fn default() -> Self {
        SemiInfiniteOptions {
            horizons: vec![5.0, 10.0, 20.0, 40.0],
            targets: vec![0.0],
            cluster_tol: 1e-3,
            ode_h: 1e-3,
            refine: true,
            limit: LimitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiInfiniteOrbit {
    /// forward orbit from the limit jet, cut where it comes closest to the
    /// pseudograph of u_−
    pub orbit: Orbit,
    pub u_minus: WeakKamResult,
    /// source jets per horizon and target, in horizon order
    pub jets: Vec<(f64, f64, PhasePoint)>,
    pub limit_jet: PhasePoint,
    /// x-shift applied by the refinement
    pub jet_shift: f64,
    pub cluster_size: usize,
    pub tail_pseudograph_distance: f64,
    /// distance of the tail to the calibrated fixed points, when there are any
    pub tail_slice_distance: Option<f64>,
    /// |u(t) − u_−(x(t))| over the tail window
    pub tail_u_defects: Vec<f64>,
    pub truncated_at: f64,
}

/// Cluster of the points within `radius` of the last one; returns the
/// member indices and the nearest foreign distance when alone.
fn cluster_last(points: &[PhasePoint], radius: f64) -> (Vec<usize>, f64) {
    let last = points[points.len() - 1];
    let mut members = Vec::new();
    let mut spread = f64::INFINITY;
    for (k, z) in points.iter().enumerate() {
        let d = z.distance(&last);
        if d <= radius {
            members.push(k);
        } else {
            spread = spread.min(d);
        }
    }
    (members, spread)
}

pub fn semi_infinite_orbit(
    model: &ContactModel,
    phi: &ScalarField,
    params: &LaxParams,
    opts: &SemiInfiniteOptions,
) -> Result<SemiInfiniteOrbit, AsymError> {
    if opts.horizons.is_empty() || opts.targets.is_empty() {
        return Err(AsymError::Request("need at least one horizon and one target".into()));
    }
    let u_minus = weak_kam_limit(model, phi, params, Direction::Backward, opts.limit)?;
    require_converged(&u_minus, "backward")?;
    let stepper = Stepper::new(model, phi.grid(), *params)?;
    let t_last = opts.horizons.iter().copied().fold(0.0, f64::max);
    let k_max = (t_last / params.tau).round() as usize;
    let table = field_table(&stepper, phi, k_max, Direction::Backward)?;
    let mut jets = Vec::new();
    for &t in &opts.horizons {
        let k = ((t / params.tau).round() as usize).clamp(1, k_max);
        for &x in &opts.targets {
            let curve = table.backtrack(x, k)?;
            jets.push((t, x, jet_at(phi, curve[0].x)));
        }
    }
    // only the last target's sequence is extracted; the others are reported
    let target = *opts.targets.last().expect("target");
    let seq: Vec<PhasePoint> = jets.iter().filter(|j| j.1 == target).map(|j| j.2).collect();
    let (members, spread) = cluster_last(&seq, opts.cluster_tol);
    if members.len() < 2 {
        return Err(AsymError::NoCluster {
            radius: opts.cluster_tol,
            spread,
        });
    }
    let graph = pseudograph(&u_minus.field);
    let slice = SliceProxy::for_field(model, &u_minus.field, 1e-2)?;
    let closeness = |z: &PhasePoint| match &slice {
        SliceProxy::Points(p) => distance_to_points(p, z),
        SliceProxy::Pseudograph(_) => graph.distance(z.x, z.u, z.p),
    };
    let grid_jet = seq[seq.len() - 1];
    let limit_jet = if opts.refine {
        let objective = |x: f64| -> Result<f64, AsymError> {
            let (o, _) = integrate_lenient(model, jet_at(phi, x), (0.0, t_last), 1e-2)?;
            Ok(o.states.iter().map(closeness).fold(f64::INFINITY, f64::min))
        };
        // a discrete minimizer can drift by half a velocity cell per step
        // and tiny velocities do not exist on the grid, so the true source
        // may sit anywhere within that reach of the grid source
        let dx = phi.grid().dx();
        let reach = (2.0 * dx + 0.5 * t_last * dx / params.tau).min(std::f64::consts::PI);
        let scan = (reach / dx).ceil() as usize;
        let mut best = (grid_jet.x, objective(grid_jet.x)?);
        for k in 1..=scan {
            for sign in [-1.0, 1.0] {
                let x = grid_jet.x + sign * k as f64 * dx;
                let d = objective(x)?;
                if d < best.1 {
                    best = (x, d);
                }
            }
        }
        // golden section inside the bracketing scan cells
        let cell = dx;
        let (mut a, mut b) = (best.0 - cell, best.0 + cell);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let (c, d) = (b - r * (b - a), a + r * (b - a));
            if objective(c)? < objective(d)? {
                b = d;
            } else {
                a = c;
            }
        }
        let mid = 0.5 * (a + b);
        if objective(mid)? < best.1 {
            best.0 = mid;
        }
        jet_at(phi, best.0)
    } else {
        grid_jet
    };
    let (full, _) = integrate_lenient(model, limit_jet, (0.0, t_last), opts.ode_h)?;
    let dists: Vec<f64> = full.states.iter().map(closeness).collect();
    let cut = dists
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, &d)| if d < b.1 { (k, d) } else { b })
        .0
        .max(1);
    let orbit = Orbit::from_parts(full.times[..=cut].to_vec(), full.states[..=cut].to_vec());
    let tail = orbit.tail_window(TAIL_FRACTION);
    let tail_pseudograph_distance = window_min(&orbit, tail.clone(), |z| graph.distance(z.x, z.u, z.p));
    let tail_slice_distance = slice
        .points()
        .map(|p| window_min(&orbit, tail.clone(), |z| distance_to_points(p, z)));
    let tail_u_defects = orbit.states[tail]
        .iter()
        .map(|z| (z.u - u_minus.field.interpolate(z.x)).abs())
        .collect();
    Ok(SemiInfiniteOrbit {
        truncated_at: orbit.times[cut],
        orbit,
        u_minus,
        jets,
        limit_jet,
        jet_shift: signed_offset(grid_jet.x, limit_jet.x),
        cluster_size: members.len(),
        tail_pseudograph_distance,
        tail_slice_distance,
        tail_u_defects,
    })
}

/// Max-norm distance from z to the segment a→b (x periodic, the segment
/// taking the short way round); the distance is convex along the segment.
fn segment_distance(a: &PhasePoint, b: &PhasePoint, z: &PhasePoint) -> f64 {
    let bx = a.x + signed_offset(a.x, b.x);
    let at = |s: f64| {
        let x = a.x + s * (bx - a.x);
        periodic_distance(x, z.x)
            .max((a.u + s * (b.u - a.u) - z.u).abs())
            .max((a.p + s * (b.p - a.p) - z.p).abs())
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if at(m1) <= at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.5 * (lo + hi)).min(at(0.0)).min(at(1.0))
}

/// One-sided Hausdorff distance from the jets of u_− to Φ^s(J¹_φ),
/// s ∈ [T, T+1]. The flowed jet curve is represented at 21 time slices by
/// the closed polyline through `sample_count` flowed samples.
pub fn pseudograph_attainment(
    model: &ContactModel,
    phi: &ScalarField,
    u_minus: &ScalarField,
    t: f64,
    sample_count: usize,
    ode_h: f64,
) -> Result<f64, AsymError> {
    if sample_count < 2 || !(t >= 0.0) {
        return Err(AsymError::Request("need t >= 0 and at least two samples".into()));
    }
    let record = 20;
    // slices[r][k]: sample k at time T + r/record, None after a blow-up
    let mut slices: Vec<Vec<Option<PhasePoint>>> = vec![Vec::with_capacity(sample_count); record + 1];
    for k in 0..sample_count {
        let x = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / sample_count as f64;
        let (o, _) = integrate_lenient(model, jet_at(phi, x), (0.0, t + 1.0), ode_h)?;
        let reached = *o.times.last().expect("time");
        for (r, slice) in slices.iter_mut().enumerate() {
            let s = t + r as f64 / record as f64;
            slice.push((s <= reached + 1e-12).then(|| *o.at_time(s).1));
        }
    }
    let mut segments = Vec::new();
    for slice in &slices {
        for k in 0..sample_count {
            if let (Some(a), Some(b)) = (slice[k], slice[(k + 1) % sample_count]) {
                segments.push((a, b));
            }
        }
    }
    let graph = pseudograph(u_minus);
    let mut worst: f64 = 0.0;
    for nd in graph.nodes.iter().filter(|n| n.differentiable) {
        let z = PhasePoint::new(nd.x, nd.u, nd.momenta()[0]);
        let mut best = f64::INFINITY;
        for (a, b) in &segments {
            // cheap rejection: both endpoints far in u or p on the same side
            let (ulo, uhi) = (a.u.min(b.u), a.u.max(b.u));
            let (plo, phi_) = (a.p.min(b.p), a.p.max(b.p));
            if z.u < ulo - best || z.u > uhi + best || z.p < plo - best || z.p > phi_ + best {
                continue;
            }
            if periodic_distance(a.x, z.x).min(periodic_distance(b.x, z.x))
                > best + periodic_distance(a.x, b.x)
            {
                continue;
            }
            best = best.min(segment_distance(a, b, &z));
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// heteroclinic connections

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroclinicOptions {
    /// ε values; default ε₀·2^{−k}, k = 1..8
    pub eps_schedule: Option<Vec<f64>>,
    pub accept_tol: f64,
    pub cluster_tol: f64,
    /// half-width T of the final orbit span [−T, T]
    pub span: f64,
    /// DP horizon for the characteristics of T⁻_tφ_ε
    pub horizon: f64,
    /// crossing search limit
    pub t_max: f64,
    pub ode_h: f64,
    pub target: Option<f64>,
    pub limit: LimitOptions,
}

impl Default for HeteroclinicOptions {
    fn default() -> Self {
        HeteroclinicOptions {
            eps_schedule: None,
            accept_tol: 1e-2,
            cluster_tol: 1e-3,
            span: 20.0,
            horizon: 20.0,
            t_max: 40.0,
            ode_h: 1e-3,
            target: None,
            limit: LimitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRun {
    pub eps: f64,
    /// τ₀ and τ_ε as used for ψ = T⁺_{τ₀+τ_ε}∘T⁻_{τ₀}φ
    pub tau0: f64,
    pub tau_eps: f64,
    /// nodes where the smoothed field had to be clamped into its band
    pub band_clamps: usize,
    pub jet: PhasePoint,
    pub t_eps: f64,
    /// Z_ε at the crossing, i.e. time-translated to t = 0
    pub crossing: PhasePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroclinicResult {
    pub orbit: Orbit,
    pub u_minus: ScalarField,
    pub v_plus: ScalarField,
    pub eps0: f64,
    pub runs: Vec<EpsilonRun>,
    pub cluster_size: usize,
    pub limit_point: PhasePoint,
    pub alpha_distance: f64,
    pub omega_distance: f64,
    pub accept_tol: f64,
    pub max_abs_h: f64,
    /// max |H| over both tail windows
    pub tail_abs_h: f64,
    /// largest violation of v_+ − 5Δx ≤ u ≤ u_− + 5Δx along the orbit
    pub sandwich_violation: f64,
    pub blew_up: bool,
}

impl HeteroclinicResult {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let list = |v: Vec<f64>| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "eps0={:e}", self.eps0);
        let _ = writeln!(s, "epsilon_schedule={}", list(self.runs.iter().map(|r| r.eps).collect()));
        let _ = writeln!(s, "t_epsilon={}", list(self.runs.iter().map(|r| r.t_eps).collect()));
        let _ = writeln!(s, "cluster_size={}", self.cluster_size);
        let _ = writeln!(
            s,
            "limit_point={:e},{:e},{:e}",
            self.limit_point.x, self.limit_point.u, self.limit_point.p
        );
        let _ = writeln!(s, "endpoint_distances={:e},{:e}", self.alpha_distance, self.omega_distance);
        let _ = writeln!(s, "accept_tol={:e}", self.accept_tol);
        let _ = writeln!(s, "max_abs_H={:e}", self.max_abs_h);
        let _ = writeln!(s, "tail_abs_H={:e}", self.tail_abs_h);
        let _ = writeln!(s, "sandwich_violation={:e}", self.sandwich_violation);
        let _ = writeln!(s, "blew_up={}", self.blew_up);
        s
    }

    pub fn accepted(&self) -> bool {
        self.alpha_distance <= self.accept_tol && self.omega_distance <= self.accept_tol
    }
}

fn first_time_until(
    stepper: &Stepper<'_>,
    start: &ScalarField,
    dir: Direction,
    max_steps: usize,
    done: impl Fn(&ScalarField) -> bool,
) -> Result<Option<usize>, AsymError> {
    let mut cur = start.clone();
    for k in 0..=max_steps {
        if done(&cur) {
            return Ok(Some(k));
        }
        cur = stepper.step(&cur, dir)?.0;
    }
    Ok(None)
}

/// First crossing of u(t) − w(x(t)) from below along the ODE orbit from z0,
/// located by bisection inside the bracketing RK4 step.
fn first_crossing(
    model: &ContactModel,
    z0: PhasePoint,
    w: &ScalarField,
    t_max: f64,
    h: f64,
) -> Result<Option<(f64, PhasePoint)>, AsymError> {
    let g = |z: &PhasePoint| z.u - w.interpolate(z.x);
    if g(&z0) >= 0.0 {
        return Ok(Some((0.0, z0)));
    }
    let (o, _) = integrate_lenient(model, z0, (0.0, t_max), h)?;
    for k in 1..o.len() {
        if g(&o.states[k]) >= 0.0 {
            let base = o.states[k - 1];
            let (mut lo, mut hi) = (0.0, o.times[k] - o.times[k - 1]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let z = crate::flow::rk4_step(model, &base, mid)?;
                if g(&z) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let z = crate::flow::rk4_step(model, &base, hi)?;
            return Ok(Some((o.times[k - 1] + hi, z)));
        }
    }
    Ok(None)
}

/// Builds a connecting orbit whose α-end sits on the slice of v_+ and whose
/// ω-end sits on the slice of u_−.
pub fn heteroclinic_connect(
    model: &ContactModel,
    phi: &ScalarField,
    params: &LaxParams,
    opts: &HeteroclinicOptions,
) -> Result<HeteroclinicResult, AsymError> {
    let grid = phi.grid();
    let dx = grid.dx();
    let um = weak_kam_limit(model, phi, params, Direction::Backward, opts.limit)?;
    require_converged(&um, "backward")?;
    let vp = weak_kam_limit(model, phi, params, Direction::Forward, opts.limit)?;
    require_converged(&vp, "forward")?;
    let (u_minus, v_plus) = (um.field, vp.field);
    let min_gap = (0..grid.n())
        .map(|i| u_minus.get(i) - v_plus.get(i))
        .fold(f64::INFINITY, f64::min);
    if !(min_gap > 0.0) {
        return Err(AsymError::Ordering { min_gap });
    }
    let eps0 = 0.25 * min_gap;
    let schedule = opts
        .eps_schedule
        .clone()
        .unwrap_or_else(|| (1..=8).map(|k| eps0 * 0.5f64.powi(k)).collect());
    let w = ScalarField::new(
        grid,
        (0..grid.n()).map(|i| 0.5 * (u_minus.get(i) + v_plus.get(i))).collect(),
    )?;
    let u_slice = SliceProxy::for_field(model, &u_minus, 1e-2)?;
    let v_slice = SliceProxy::for_field(model, &v_plus, 1e-2)?;
    let target = opts.target.unwrap_or_else(|| match &u_slice {
        SliceProxy::Points(p) => p[0].x,
        SliceProxy::Pseudograph(_) => 0.0,
    });

    let stepper = Stepper::new(model, grid, *params)?;
    let max_steps = (opts.limit.t_max / params.tau).ceil() as usize;
    let k0 = first_time_until(&stepper, phi, Direction::Backward, max_steps, |f| {
        (0..grid.n()).all(|i| f.get(i) >= u_minus.get(i) - eps0)
    })?
    .ok_or(AsymError::Request("T⁻φ never came within ε₀ of u_−".into()))?;
    let lifted = evolve_steps(&stepper, phi, k0, Direction::Backward)?;
    let k_horizon = ((opts.horizon / params.tau).round() as usize).max(1);

    let mut runs = Vec::with_capacity(schedule.len());
    for &eps in &schedule {
        let ke = first_time_until(&stepper, phi, Direction::Forward, max_steps, |f| {
            (0..grid.n()).all(|i| f.get(i) <= v_plus.get(i) + 0.5 * eps)
        })?
        .ok_or(AsymError::Request(format!("T⁺φ never came within {eps:e} of v_+")))?;
        let psi = evolve_steps(&stepper, &lifted, k0 + ke, Direction::Forward)?;
        // smooth, lift by ε/4, keep inside [ψ + ε/8, ψ + 3ε/8]
        let smooth = psi.mollify(2.0 * dx)?;
        let mut clamps = 0;
        let vals: Vec<f64> = (0..grid.n())
            .map(|i| {
                let (lo, hi) = (psi.get(i) + 0.125 * eps, psi.get(i) + 0.375 * eps);
                let v = smooth.get(i) + 0.25 * eps;
                if v < lo || v > hi {
                    clamps += 1;
                }
                v.clamp(lo, hi)
            })
            .collect();
        let phi_eps = ScalarField::new(grid, vals)?;
        let violations = (0..grid.n())
            .filter(|&i| !(phi_eps.get(i) > v_plus.get(i) && phi_eps.get(i) < v_plus.get(i) + eps))
            .count();
        if violations > 0 {
            return Err(AsymError::Band { eps, violations });
        }
        let table = field_table(&stepper, &phi_eps, k_horizon, Direction::Backward)?;
        let (_, jet) = source_jet(&table, &phi_eps, target)?;
        let (t_eps, crossing) = first_crossing(model, jet, &w, opts.t_max, opts.ode_h)?.ok_or(
            AsymError::CrossingNotReached {
                eps,
                t_max: opts.t_max,
                lower_bound: (eps0 / eps).ln() / model.lambda_bound().max(f64::MIN_POSITIVE),
            },
        )?;
        runs.push(EpsilonRun {
            eps,
            tau0: k0 as f64 * params.tau,
            tau_eps: ke as f64 * params.tau,
            band_clamps: clamps,
            jet,
            t_eps,
            crossing,
        });
    }

    let points: Vec<PhasePoint> = runs.iter().map(|r| r.crossing).collect();
    let (members, spread) = cluster_last(&points, opts.cluster_tol);
    if members.len() < 2 {
        return Err(AsymError::NoCluster {
            radius: opts.cluster_tol,
            spread,
        });
    }
    let limit_point = points[points.len() - 1];
    let (fwd, up) = integrate_lenient(model, limit_point, (0.0, opts.span), opts.ode_h)?;
    let (bwd, down) = integrate_lenient(model, limit_point, (0.0, -opts.span), opts.ode_h)?;
    let mut times: Vec<f64> = bwd.times.iter().rev().copied().collect();
    let mut states: Vec<PhasePoint> = bwd.states.iter().rev().copied().collect();
    times.extend_from_slice(&fwd.times[1..]);
    states.extend_from_slice(&fwd.states[1..]);
    let orbit = Orbit::from_parts(times, states);

    let head = orbit.head_window(TAIL_FRACTION);
    let tail = orbit.tail_window(TAIL_FRACTION);
    let alpha_distance = window_min(&orbit, head.clone(), |z| v_slice.distance(z));
    let omega_distance = window_min(&orbit, tail.clone(), |z| u_slice.distance(z));
    let energies = orbit.energies(model)?;
    let max_abs_h = energies.iter().fold(0.0f64, |a, h| a.max(h.abs()));
    let tail_abs_h = head
        .chain(tail)
        .map(|k| energies[k].abs())
        .fold(0.0f64, f64::max);
    let band = 5.0 * dx;
    let sandwich_violation = orbit
        .states
        .iter()
        .map(|z| {
            let below = v_plus.interpolate(z.x) - band - z.u;
            let above = z.u - u_minus.interpolate(z.x) - band;
            below.max(above).max(0.0)
        })
        .fold(0.0, f64::max);
    let result = HeteroclinicResult {
        orbit,
        u_minus,
        v_plus,
        eps0,
        runs,
        cluster_size: members.len(),
        limit_point,
        alpha_distance,
        omega_distance,
        accept_tol: opts.accept_tol,
        max_abs_h,
        tail_abs_h,
        sandwich_violation,
        blew_up: up || down,
    };
    if result.accepted() {
        Ok(result)
    } else {
        Err(AsymError::EndpointsNotAccepted(Box::new(result)))
    }
}

// ---------------------------------------------------------------------------
// obstruction check

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionReport {
    pub verdict: Verdict,
    /// min distance of the α-window to the pseudograph of u_−
    pub alpha_to_u_minus: f64,
    /// min distance of the ω-window to the pseudograph of v_+
    pub omega_to_v_plus: f64,
    /// Some(ok) when some orbit point lies above v_+, in which case every
    /// ω-sample must satisfy u ≥ u_−(x) − tol
    pub above_v_plus_bound: Option<bool>,
}

pub fn obstruction_check(
    orbit: &Orbit,
    u_minus: &ScalarField,
    v_plus: &ScalarField,
    tol: f64,
) -> ObstructionReport {
    let gu = pseudograph(u_minus);
    let gv = pseudograph(v_plus);
    let head = orbit.head_window(TAIL_FRACTION);
    let tail = orbit.tail_window(TAIL_FRACTION);
    let alpha_to_u_minus = window_min(orbit, head, |z| gu.distance(z.x, z.u, z.p));
    let omega_to_v_plus = window_min(orbit, tail.clone(), |z| gv.distance(z.x, z.u, z.p));
    let verdict = if alpha_to_u_minus <= tol && omega_to_v_plus <= tol {
        Verdict::Violation
    } else {
        Verdict::Consistent
    };
    let above = orbit.states.iter().any(|z| v_plus.interpolate(z.x) < z.u);
    let above_v_plus_bound = above.then(|| {
        orbit.states[tail]
            .iter()
            .all(|z| z.u >= u_minus.interpolate(z.x) - tol)
    });
    ObstructionReport {
        verdict,
        alpha_to_u_minus,
        omega_to_v_plus,
        above_v_plus_bound,
    }
}

// ---------------------------------------------------------------------------
// classification of minimizers

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitBehavior {
    /// limit set inside the slice of the maximal backward solution
    UpperSlice,
    /// limit set inside the slice of the minimal forward solution
    LowerSlice,
    PlusInfinity,
    MinusInfinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub orbit: Orbit,
    pub blew_up: bool,
    /// the momentum used to complete the seed to a jet
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub x0: f64,
    pub u0: f64,
    pub upper: f64,
    pub lower: f64,
    /// 1..=5
    pub case: u8,
    /// u₀ matched one of the two values within class_tol
    pub boundary: bool,
    /// both boundary values lie within class_tol of u₀
    pub ambiguous: bool,
    pub alpha: LimitBehavior,
    pub omega: LimitBehavior,
    pub evidence: Option<Evidence>,
}

impl ClassificationReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "x0={}", self.x0);
        let _ = writeln!(s, "u0={}", self.u0);
        let _ = writeln!(s, "u_bar_minus={}", self.upper);
        let _ = writeln!(s, "u_under_plus={}", self.lower);
        let _ = writeln!(s, "case={}", self.case);
        let _ = writeln!(s, "boundary={}", self.boundary);
        let _ = writeln!(s, "ambiguous={}", self.ambiguous);
        let _ = writeln!(s, "alpha={:?}", self.alpha);
        let _ = writeln!(s, "omega={:?}", self.omega);
        if let Some(e) = &self.evidence {
            let _ = writeln!(s, "evidence_blew_up={}", e.blew_up);
            let _ = writeln!(s, "evidence_final_u={}", e.orbit.last().u);
        }
        // membership of the seed in the set of global minimizers is not
        // certified here; run the minimality test on the evidence orbit
        let _ = writeln!(s, "minimizer_certified=false");
        s
    }
}

/// Places u₀ against ū_−(x₀) and u̲_+(x₀). With `evidence_t`, integrates the
/// seed completed by the slope of the relevant field as a witness orbit.
pub fn classify_minimizer(
    model: &ContactModel,
    u_bar_minus: &ScalarField,
    u_under_plus: &ScalarField,
    x0: f64,
    u0: f64,
    class_tol: f64,
    evidence_t: Option<f64>,
) -> Result<ClassificationReport, AsymError> {
    use LimitBehavior::*;
    let upper = u_bar_minus.interpolate(x0);
    let lower = u_under_plus.interpolate(x0);
    let near_up = (u0 - upper).abs() <= class_tol;
    let near_lo = (u0 - lower).abs() <= class_tol;
    let (case, alpha, omega) = if near_up {
        (2, UpperSlice, UpperSlice)
    } else if near_lo {
        (4, LowerSlice, LowerSlice)
    } else if u0 > upper {
        (1, PlusInfinity, UpperSlice)
    } else if u0 > lower {
        (3, LowerSlice, UpperSlice)
    } else {
        (5, LowerSlice, MinusInfinity)
    };
    let evidence = match evidence_t {
        Some(t) => {
            let field = if case <= 3 { u_bar_minus } else { u_under_plus };
            let p0 = field.slope_at(x0);
            let (orbit, blew_up) = integrate_lenient(model, PhasePoint::new(x0, u0, p0), (0.0, t), 1e-3)?;
            Some(Evidence { orbit, blew_up, p0 })
        }
        None => None,
    };
    Ok(ClassificationReport {
        x0,
        u0,
        upper,
        lower,
        case,
        boundary: near_up || near_lo,
        ambiguous: near_up && near_lo,
        alpha,
        omega,
        evidence,
    })
}

// ---------------------------------------------------------------------------
// minimality and Busemann fields

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimalityMode {
    Global,
    SemiStatic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDefect {
    pub a: f64,
    pub b: f64,
    pub u_b: f64,
    pub action: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport {
    pub mode: MinimalityMode,
    pub pairs: Vec<PairDefect>,
    pub skipped: usize,
    pub max_defect: f64,
}

impl MinimalityReport {
    pub fn passes(&self, tol: f64) -> bool {
        !self.pairs.is_empty() && self.max_defect <= tol
    }
}

/// Deterministic pairs a < b spread over the orbit span: the starts sweep
/// the first half, the gaps sweep (0, half span].
pub fn sample_pairs(t0: f64, t1: f64, count: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (t1 - t0);
    (0..count)
        .map(|k| {
            let a = t0 + half * k as f64 / count.max(1) as f64;
            let gap = half * (k + 1) as f64 / count.max(1) as f64;
            (a, (a + gap).min(t1))
        })
        .collect()
}

/// Checks u(b) = h_{x(a),u(a)}(x(b), b − a) (global) or
/// u(b) = inf_{s ≤ s_max} h_{x(a),u(a)}(x(b), s) (semi-static) on sampled pairs.
pub fn minimality_test(
    model: &ContactModel,
    orbit: &Orbit,
    params: &LaxParams,
    grid: crate::geometry::PeriodicGrid,
    mode: MinimalityMode,
    pairs: &[(f64, f64)],
    s_max: f64,
) -> Result<MinimalityReport, AsymError> {
    let stepper = Stepper::new(model, grid, *params)?;
    let budget = (s_max / params.tau).round() as usize;
    let mut out = Vec::new();
    let mut skipped = 0;
    for &(a, b) in pairs {
        let k = ((b - a) / params.tau).round() as usize;
        if k < 1 || k > budget {
            skipped += 1;
            continue;
        }
        let b = a + k as f64 * params.tau;
        let za = *orbit.at_time(a).1;
        let zb = *orbit.at_time(b).1;
        let layers = if mode == MinimalityMode::Global { k } else { budget };
        let table = point_table(&stepper, za.x, za.u, layers, Direction::Backward)?;
        let action = match mode {
            MinimalityMode::Global => table.value(zb.x, k),
            MinimalityMode::SemiStatic => (1..=budget)
                .map(|kk| table.value(zb.x, kk))
                .fold(f64::INFINITY, f64::min),
        };
        out.push(PairDefect {
            a,
            b,
            u_b: zb.u,
            action,
            defect: (zb.u - action).abs(),
        });
    }
    let max_defect = out.iter().map(|p| p.defect).fold(0.0, f64::max);
    Ok(MinimalityReport {
        mode,
        pairs: out,
        skipped,
        max_defect,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusemannReport {
    pub field: ScalarField,
    /// U(·, t) per t of the sequence, in the order given
    pub fields: Vec<(f64, ScalarField)>,
    /// largest nodewise increase of U as t decreases (should be ≤ 0)
    pub monotone_violation: f64,
    /// sup-norm change between the last two fields of the sequence
    pub stabilization: f64,
    /// ‖T⁻_τ U − U‖
    pub residual: f64,
}

/// U(x, t) = inf_{s ∈ s-grid} h_{x(t),u(t)}(x, s) for each t of a decreasing
/// sequence; the result is the nodewise infimum over the sequence.
pub fn busemann_solution(
    model: &ContactModel,
    orbit: &Orbit,
    params: &LaxParams,
    grid: crate::geometry::PeriodicGrid,
    s_max: f64,
    t_sequence: &[f64],
) -> Result<BusemannReport, AsymError> {
    if t_sequence.is_empty() {
        return Err(AsymError::Request("empty t sequence".into()));
    }
    let stepper = Stepper::new(model, grid, *params)?;
    let k = ((s_max / params.tau).round() as usize).max(1);
    let mut fields = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let z = *orbit.at_time(t).1;
        let table = point_table(&stepper, z.x, z.u, k, Direction::Backward)?;
        let vals: Vec<f64> = (0..grid.n()).map(|i| table.min_over_layers(i, 1, k).0).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(AsymError::Request(format!("s_max = {s_max} does not reach every node")));
        }
        fields.push((t, ScalarField::new(grid, vals)?));
    }
    let mut monotone_violation = f64::NEG_INFINITY;
    for w in fields.windows(2) {
        let (t_hi, t_lo) = if w[1].0 < w[0].0 { (&w[0], &w[1]) } else { (&w[1], &w[0]) };
        for i in 0..grid.n() {
            monotone_violation = monotone_violation.max(t_lo.1.get(i) - t_hi.1.get(i));
        }
    }
    if fields.len() < 2 {
        monotone_violation = 0.0;
    }
    let vals: Vec<f64> = (0..grid.n())
        .map(|i| fields.iter().map(|f| f.1.get(i)).fold(f64::INFINITY, f64::min))
        .collect();
    let field = ScalarField::new(grid, vals)?;
    let stabilization = if fields.len() >= 2 {
        fields[fields.len() - 1].1.sup_distance(&fields[fields.len() - 2].1)
    } else {
        f64::INFINITY
    };
    let residual = stepper.step(&field, Direction::Backward)?.0.sup_distance(&field);
    Ok(BusemannReport {
        field,
        fields,
        monotone_violation,
        stabilization,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PeriodicGrid;
    use std::f64::consts::PI;

    fn monotone() -> ContactModel {
        ContactModel::separable(1.0, "-0.25", "1").unwrap()
    }

    #[test]
    fn characteristic_matches_semigroup() {
        let g = PeriodicGrid::new(256).unwrap();
        let m = monotone();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let phi = ScalarField::from_fn(g, |x| 0.25 + 0.1 * x.sin()).unwrap();
        let c = characteristic_orbit(&m, &phi, 0.7, 2.0, &p, CharOptions::for_dx(g.dx())).unwrap();
        assert!(c.max_defect <= 5.0 * g.dx(), "{}", c.max_defect);
        assert_eq!(c.dp_curve.len(), 65);
        assert!(periodic_distance(c.orbit.last().x, 0.7) < g.dx());
    }

    #[test]
    fn characteristic_of_zero_field_is_constant() {
        let g = PeriodicGrid::new(128).unwrap();
        let m = ContactModel::separable(1.0, "0", "0").unwrap();
        let p = LaxParams::new(g, 1.0 / 16.0, 8.0);
        let phi = ScalarField::constant(g, 0.0).unwrap();
        let c = characteristic_orbit(&m, &phi, 1.0, 1.0, &p, CharOptions::for_dx(g.dx())).unwrap();
        assert!(c.dp_curve.iter().all(|q| q.i == g.nearest(1.0)));
        assert!(c.orbit.states.iter().all(|z| z.p == 0.0));
        assert!(c.dp_momenta.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn semi_infinite_monotone_case() {
        let g = PeriodicGrid::new(256).unwrap();
        let m = monotone();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let phi = ScalarField::from_fn(g, f64::sin).unwrap();
        let s = semi_infinite_orbit(&m, &phi, &p, &SemiInfiniteOptions::default()).unwrap();
        let z = s.orbit.last();
        assert!((z.u - 0.25).abs() < 1e-2 && z.p.abs() < 1e-2, "{z:?}");
        assert!(s.tail_pseudograph_distance < 1e-2);
    }

    #[test]
    fn attainment_monotone_case() {
        let g = PeriodicGrid::new(256).unwrap();
        let m = monotone();
        let phi = ScalarField::from_fn(g, f64::sin).unwrap();
        let um = ScalarField::constant(g, 0.25).unwrap();
        let d = pseudograph_attainment(&m, &phi, &um, 10.0, 512, 1e-2).unwrap();
        assert!(d <= 2e-2, "{d}");
    }

    #[test]
    fn classifier_cases_against_fixed_fields() {
        let g = PeriodicGrid::new(64).unwrap();
        let up = ScalarField::constant(g, 1.0).unwrap();
        let lo = ScalarField::constant(g, -1.0).unwrap();
        let m = monotone();
        let case = |u0| classify_minimizer(&m, &up, &lo, 0.3, u0, 1e-3, None).unwrap().case;
        assert_eq!([case(2.0), case(1.0), case(0.0), case(-1.0), case(-2.0)], [1, 2, 3, 4, 5]);
        let r = classify_minimizer(&m, &up, &up, 0.3, 1.0, 1e-3, None).unwrap();
        assert!(r.ambiguous && r.boundary);
        assert!(r.to_kv().contains("case=2"));
    }

    #[test]
    fn obstruction_flags_reversed_connection() {
        let g = PeriodicGrid::new(64).unwrap();
        let um = ScalarField::constant(g, 1.0).unwrap();
        let vp = ScalarField::constant(g, -1.0).unwrap();
        let times: Vec<f64> = (0..=10).map(f64::from).collect();
        let states: Vec<PhasePoint> = (0..=10)
            .map(|k| PhasePoint::new(0.0, (-1.0 + 0.4 * k as f64).min(1.0), 0.0))
            .collect();
        let forward = Orbit::from_parts(times, states);
        let r = obstruction_check(&forward, &um, &vp, 1e-2);
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_eq!(r.above_v_plus_bound, Some(true));
        let r = obstruction_check(&forward.time_reversed(), &um, &vp, 1e-2);
        assert_eq!(r.verdict, Verdict::Violation);
    }

    #[test]
    fn busemann_of_monotone_fixed_point() {
        let g = PeriodicGrid::new(128).unwrap();
        let m = monotone();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let orbit = Orbit::from_parts(vec![-1.0, 0.0], vec![PhasePoint::new(0.0, 0.25, 0.0); 2]);
        let b = busemann_solution(&m, &orbit, &p, g, 20.0, &[0.0, -1.0]).unwrap();
        assert!(b.field.values().iter().all(|v| (v - 0.25).abs() < 1e-3));
        assert!(b.monotone_violation <= 5.0 * g.dx());
    }

    #[test]
    fn fixed_point_orbit_is_minimizing() {
        let g = PeriodicGrid::new(256).unwrap();
        let m = ContactModel::sine_coupled();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let z = PhasePoint::new(PI / 2.0, 0.25, 0.0);
        let orbit = Orbit::from_parts(vec![0.0, 10.0], vec![z, z]);
        let pairs = sample_pairs(0.0, 10.0, 4);
        for mode in [MinimalityMode::Global, MinimalityMode::SemiStatic] {
            let r = minimality_test(&m, &orbit, &p, g, mode, &pairs, 10.0).unwrap();
            assert!(r.passes(5.0 * g.dx()), "{mode:?} {}", r.max_defect);
        }
    }
}
