//! Semi-Lagrangian Lax-Oleinik steps on the periodic grid, action tables
//! with argmin backpointers, and weak KAM solutions as long-time limits.
//!
//! One backward step over time τ reads
//!
//! ```text
//! out_i = min_j  φ_{i−j} + τ·L(x_i, φ_{i−j}, jΔx/τ),   |j| ≤ m
//! ```
//!
//! with ties going to the smallest |j|, then the smallest j. The forward
//! step is the exact inverse of that one-step map: node i takes the largest
//! value g for which some backward move i → i+j lands on φ_{i+j}, i.e.
//! `g + τ·L(x_{i+j}, g, jΔx/τ) = φ_{i+j}`. This keeps the discrete pair
//! dual (T⁻∘T⁺ ≥ id, T⁺∘T⁻ ≤ id) and the action tables reversible.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{GridError, PeriodicGrid, ScalarField};
use crate::model::{ContactModel, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VarError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("target x = {x} is unreachable at step {k}")]
    Unreachable { x: f64, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxParams {
    pub tau: f64,
    pub v_max: f64,
    /// candidate offsets are j ∈ [−m, m]
    pub m: usize,
    pub u_clip: f64,
    /// evaluate L at the midpoint of each move instead of its arrival node
    pub midpoint: bool,
    /// node-parallel worker count; results do not depend on it
    pub threads: usize,
}

pub const DEFAULT_TAU: f64 = 1.0 / 32.0;
pub const DEFAULT_V_MAX: f64 = 8.0;
pub const DEFAULT_U_CLIP: f64 = 1e4;

impl LaxParams {
    pub fn new(grid: PeriodicGrid, tau: f64, v_max: f64) -> LaxParams {
        let m = ((v_max * tau / grid.dx()) - 1e-9).ceil().max(1.0) as usize;
        LaxParams {
            tau,
            v_max,
            m,
            u_clip: DEFAULT_U_CLIP,
            midpoint: false,
            threads: 1,
        }
    }

    pub fn with_u_clip(mut self, u_clip: f64) -> Self {
        self.u_clip = u_clip;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn with_midpoint(mut self, midpoint: bool) -> Self {
        self.midpoint = midpoint;
        self
    }

    /// τ·Λ ≤ 1/2 makes the explicit-in-u step a contraction in u.
    pub fn validate(&self, model: &ContactModel) -> Result<(), VarError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(VarError::Params(format!("time step must be positive, got {}", self.tau)));
        }
        if self.m < 1 {
            return Err(VarError::Params("need at least one candidate offset".into()));
        }
        if self.tau * model.lambda_bound() > 0.5 + 1e-15 {
            return Err(VarError::Params(format!(
                "tau * Lambda = {} exceeds 1/2",
                self.tau * model.lambda_bound()
            )));
        }
        if !(self.u_clip > 0.0) {
            return Err(VarError::Params("u_clip must be positive".into()));
        }
        Ok(())
    }

    /// Largest admissible τ for a model: τ·Λ ≤ 1/2.
    pub fn max_tau(model: &ContactModel) -> f64 {
        if model.lambda_bound() > 0.0 {
            0.5 / model.lambda_bound()
        } else {
            f64::INFINITY
        }
    }
}

/// Candidate order 0, −1, 1, −2, 2, …; with strict comparisons this gives
/// the smallest-|j|-then-smallest-j tie-break.
pub fn candidate_offsets(m: usize) -> Vec<isize> {
    let mut v = vec![0isize];
    for k in 1..=m as isize {
        v.push(-k);
        v.push(k);
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub values: Vec<f64>,
    /// chosen offset j per node (0 where unreachable)
    pub offsets: Vec<isize>,
    pub clamped: usize,
    /// nodes whose argmin sits on the edge of the velocity window
    pub edge_hits: usize,
}

/// Per-node closed-form data for the separable family.
#[derive(Debug, Clone)]
struct SepCache {
    alpha: f64,
    // indexed [i * (2m+1) + c] for candidate c, or [i] without midpoints
    v: Vec<f64>,
    lambda: Vec<f64>,
    per_candidate: bool,
}

/// One grid, one model, one parameter set: caches everything a step needs.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    model: &'a ContactModel,
    grid: PeriodicGrid,
    params: LaxParams,
    offsets: Vec<isize>,
    sep: Option<SepCache>,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a ContactModel, grid: PeriodicGrid, params: LaxParams) -> Result<Self, VarError> {
        params.validate(model)?;
        let offsets = candidate_offsets(params.m);
        let dx = grid.dx();
        let sep = if model.is_separable() {
            let nc = offsets.len();
            let mut v = Vec::new();
            let mut lambda = Vec::new();
            let mut alpha = 0.0;
            // Backward move i−j → i and forward move i → i+j share the
            // evaluation point: arrival node, or the midpoint of the move.
            for i in 0..grid.n() {
                let xs: Vec<f64> = if params.midpoint {
                    offsets.iter().map(|&j| grid.x(i) - 0.5 * j as f64 * dx).collect()
                } else {
                    vec![grid.x(i)]
                };
                for x in xs {
                    let s = model.separable_at(x).expect("separable").map_err(ModelError::from)?;
                    alpha = s.alpha;
                    v.push(s.v);
                    lambda.push(s.lambda);
                }
            }
            let _ = nc;
            Some(SepCache {
                alpha,
                v,
                lambda,
                per_candidate: params.midpoint,
            })
        } else {
            None
        };
        Ok(Stepper {
            model,
            grid,
            params,
            offsets,
            sep,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn params(&self) -> &LaxParams {
        &self.params
    }

    fn eval_point(&self, arrival: usize, c: usize) -> f64 {
        let x = self.grid.x(arrival);
        if self.params.midpoint {
            x - 0.5 * self.offsets[c] as f64 * self.grid.dx()
        } else {
            x
        }
    }

    fn sep_index(&self, arrival: usize, c: usize) -> usize {
        let s = self.sep.as_ref().expect("separable");
        if s.per_candidate {
            arrival * self.offsets.len() + c
        } else {
            arrival
        }
    }

    /// Value at `arrival` of a backward move with candidate `c` from value `phi`.
    fn backward_value(&self, arrival: usize, c: usize, phi: f64) -> Result<f64, ModelError> {
        let v = self.offsets[c] as f64 * self.grid.dx() / self.params.tau;
        let tau = self.params.tau;
        match &self.sep {
            Some(s) => {
                let k = self.sep_index(arrival, c);
                Ok(phi + tau * (v * v / (4.0 * s.alpha) - s.v[k] - s.lambda[k] * phi))
            }
            None => {
                let (l, _) = self.model.lagrangian(self.eval_point(arrival, c), phi, v)?;
                Ok(phi + tau * l)
            }
        }
    }

    /// Departure value g with backward_value(arrival, c, g) = target.
    fn forward_value(&self, arrival: usize, c: usize, target: f64) -> Result<f64, ModelError> {
        let v = self.offsets[c] as f64 * self.grid.dx() / self.params.tau;
        let tau = self.params.tau;
        match &self.sep {
            Some(s) => {
                let k = self.sep_index(arrival, c);
                Ok((target - tau * (v * v / (4.0 * s.alpha) - s.v[k])) / (1.0 - tau * s.lambda[k]))
            }
            None => {
                // g ↦ g + τ L(x, g, v) has slope in [1/2, 3/2]; Newton from
                // the explicit guess converges in a few steps.
                let x = self.eval_point(arrival, c);
                let mut g = target - tau * self.model.lagrangian(x, target, v)?.0;
                for _ in 0..50 {
                    let (l, p) = self.model.lagrangian(x, g, v)?;
                    let f = g + tau * l - target;
                    if f.abs() <= 1e-14 * (1.0 + target.abs()) {
                        break;
                    }
                    let hu = self.model.gradient(x, g, p)?.hu;
                    g -= f / (1.0 - tau * hu);
                }
                Ok(g)
            }
        }
    }

    fn step_node(&self, phi: &[f64], i: usize, dir: Direction) -> Result<(f64, isize), ModelError> {
        let n = self.grid.n() as isize;
        let mut best = match dir {
            Direction::Backward => f64::INFINITY,
            Direction::Forward => f64::NEG_INFINITY,
        };
        let mut best_j = 0isize;
        for (c, &j) in self.offsets.iter().enumerate() {
            match dir {
                Direction::Backward => {
                    let src = (i as isize - j).rem_euclid(n) as usize;
                    let f = phi[src];
                    if !f.is_finite() {
                        continue;
                    }
                    let val = self.backward_value(i, c, f)?;
                    if val < best {
                        best = val;
                        best_j = j;
                    }
                }
                Direction::Forward => {
                    let dst = (i as isize + j).rem_euclid(n) as usize;
                    let f = phi[dst];
                    if !f.is_finite() {
                        continue;
                    }
                    let val = self.forward_value(dst, c, f)?;
                    if val > best {
                        best = val;
                        best_j = j;
                    }
                }
            }
        }
        Ok((best, best_j))
    }

    /// One step on raw values; ±∞ marks unreachable nodes.
    pub fn step_raw(&self, phi: &[f64], dir: Direction) -> Result<StepOutput, VarError> {
        let n = self.grid.n();
        let threads = self.params.threads.clamp(1, n);
        let mut values = vec![0.0; n];
        let mut offsets = vec![0isize; n];
        if threads == 1 {
            for i in 0..n {
                let (v, j) = self.step_node(phi, i, dir)?;
                values[i] = v;
                offsets[i] = j;
            }
        } else {
            let chunk = n.div_ceil(threads);
            let results: Vec<Result<(), ModelError>> = std::thread::scope(|s| {
                let handles: Vec<_> = values
                    .chunks_mut(chunk)
                    .zip(offsets.chunks_mut(chunk))
                    .enumerate()
                    .map(|(t, (vs, js))| {
                        s.spawn(move || {
                            for (k, (v, j)) in vs.iter_mut().zip(js.iter_mut()).enumerate() {
                                let (a, b) = self.step_node(phi, t * chunk + k, dir)?;
                                *v = a;
                                *j = b;
                            }
                            Ok(())
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker")).collect()
            });
            for r in results {
                r?;
            }
        }
        let clip = self.params.u_clip;
        let mut clamped = 0;
        let mut edge_hits = 0;
        for (v, j) in values.iter_mut().zip(&offsets) {
            if v.is_finite() {
                if v.abs() > clip {
                    *v = v.clamp(-clip, clip);
                    clamped += 1;
                }
                if j.unsigned_abs() == self.params.m {
                    edge_hits += 1;
                }
            }
        }
        Ok(StepOutput {
            values,
            offsets,
            clamped,
            edge_hits,
        })
    }

    pub fn step(&self, phi: &ScalarField, dir: Direction) -> Result<(ScalarField, StepOutput), VarError> {
        let out = self.step_raw(phi.values(), dir)?;
        let field = ScalarField::new(self.grid, out.values.clone())?;
        Ok((field, out))
    }
}

/// A single semigroup step of length τ.
pub fn lax_step(
    model: &ContactModel,
    phi: &ScalarField,
    params: &LaxParams,
    dir: Direction,
) -> Result<(ScalarField, StepOutput), VarError> {
    Stepper::new(model, phi.grid(), *params)?.step(phi, dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub snapshots: Vec<(f64, ScalarField)>,
    pub steps: usize,
    pub clamped: usize,
    pub edge_hits: usize,
}

impl Evolution {
    pub fn last(&self) -> &ScalarField {
        &self.snapshots.last().expect("initial snapshot").1
    }
}

/// Repeated steps up to the step count nearest `t_final`; snapshots every
/// `snapshot_every` steps, always including t = 0 and the final time.
pub fn semigroup_evolve(
    model: &ContactModel,
    phi: &ScalarField,
    params: &LaxParams,
    t_final: f64,
    dir: Direction,
    snapshot_every: usize,
) -> Result<Evolution, VarError> {
    if !(t_final > 0.0) {
        return Err(VarError::Params(format!("t_final must be positive, got {t_final}")));
    }
    let stepper = Stepper::new(model, phi.grid(), *params)?;
    let steps = ((t_final / params.tau).round() as usize).max(1);
    let every = snapshot_every.max(1);
    let mut cur = phi.clone();
    let mut ev = Evolution {
        snapshots: vec![(0.0, phi.clone())],
        steps,
        clamped: 0,
        edge_hits: 0,
    };
    for k in 1..=steps {
        let (next, out) = stepper.step(&cur, dir)?;
        ev.clamped += out.clamped;
        ev.edge_hits += out.edge_hits;
        cur = next;
        if k % every == 0 || k == steps {
            ev.snapshots.push((k as f64 * params.tau, cur.clone()));
        }
    }
    Ok(ev)
}

/// Evolve for an exact number of steps and return only the final field.
pub fn evolve_steps(
    stepper: &Stepper<'_>,
    phi: &ScalarField,
    steps: usize,
    dir: Direction,
) -> Result<ScalarField, VarError> {
    let mut cur = phi.clone();
    for _ in 0..steps {
        cur = stepper.step(&cur, dir)?.0;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakKamStatus {
    Converged,
    DivergedMinus,
    DivergedPlus,
    MaxTime,
}

impl WeakKamStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeakKamStatus::Converged => "Converged",
            WeakKamStatus::DivergedMinus => "DivergedMinus",
            WeakKamStatus::DivergedPlus => "DivergedPlus",
            WeakKamStatus::MaxTime => "MaxTime",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakKamResult {
    pub field: ScalarField,
    pub direction: Direction,
    pub status: WeakKamStatus,
    /// sup-norm of the one-step defect ‖Tφ − φ‖
    pub residual: f64,
    /// sup-norm change across the last window
    pub window_defect: f64,
    pub elapsed: f64,
    pub clamped: usize,
    pub edge_hits: usize,
}

impl WeakKamResult {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status={}", self.status.as_str());
        let _ = writeln!(
            s,
            "direction={}",
            match self.direction {
                Direction::Backward => "backward",
                Direction::Forward => "forward",
            }
        );
        let _ = writeln!(s, "residual={:e}", self.residual);
        let _ = writeln!(s, "window_defect={:e}", self.window_defect);
        let _ = writeln!(s, "elapsed={}", self.elapsed);
        let _ = writeln!(s, "clamped={}", self.clamped);
        let _ = writeln!(s, "edge_hits={}", self.edge_hits);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    pub tol: f64,
    pub t_max: f64,
    pub window: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tol: 1e-7,
            t_max: 200.0,
            window: 1.0,
        }
    }
}

/// Evolve until the sup-norm change over a sliding window of model time
/// drops below `tol`, the field reaches ∓u_clip, or `t_max` passes.
pub fn weak_kam_limit(
    model: &ContactModel,
    phi: &ScalarField,
    params: &LaxParams,
    dir: Direction,
    opts: LimitOptions,
) -> Result<WeakKamResult, VarError> {
    if !(opts.tol > 0.0) || !(opts.window > 0.0) {
        return Err(VarError::Params("tol and window must be positive".into()));
    }
    let stepper = Stepper::new(model, phi.grid(), *params)?;
    let w = ((opts.window / params.tau).round() as usize).max(1);
    let max_steps = (opts.t_max / params.tau).ceil() as usize;
    let mut ring: std::collections::VecDeque<ScalarField> = std::collections::VecDeque::new();
    ring.push_back(phi.clone());
    let mut cur = phi.clone();
    let mut clamped = 0;
    let mut edge_hits = 0;
    let mut window_defect = f64::INFINITY;
    let clip_hit = params.u_clip * (1.0 - 1e-12);
    let mut k = 0;
    let status = loop {
        if k >= max_steps {
            break WeakKamStatus::MaxTime;
        }
        let (next, out) = stepper.step(&cur, dir)?;
        clamped += out.clamped;
        edge_hits += out.edge_hits;
        k += 1;
        cur = next;
        if cur.min() <= -clip_hit {
            break WeakKamStatus::DivergedMinus;
        }
        if cur.max() >= clip_hit {
            break WeakKamStatus::DivergedPlus;
        }
        ring.push_back(cur.clone());
        if ring.len() > w + 1 {
            ring.pop_front();
        }
        if ring.len() == w + 1 {
            window_defect = cur.sup_distance(&ring[0]);
            if window_defect <= opts.tol {
                let one = cur.sup_distance(&ring[w - 1]);
                if one <= opts.tol {
                    break WeakKamStatus::Converged;
                }
            }
        }
    };
    let (probe, _) = stepper.step(&cur, dir)?;
    let residual = probe.sup_distance(&cur);
    Ok(WeakKamResult {
        field: cur,
        direction: dir,
        status,
        residual,
        window_defect,
        elapsed: k as f64 * params.tau,
        clamped,
        edge_hits,
    })
}

// ---------------------------------------------------------------------------
// action tables

#[derive(Debug, Clone, PartialEq)]
pub enum TableSeed {
    /// h_{x0,u0} (backward) or h^{x0,u0} (forward); x0 snapped to node i0
    Point { i0: usize, x0: f64, u0: f64 },
    /// a full initial field, as in T_t^± φ
    Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    pub grid: PeriodicGrid,
    pub direction: Direction,
    pub seed: TableSeed,
    pub tau: f64,
    /// layers[k] holds values at time kτ; layers[0] is the seed layer
    /// (±∞ away from the base node for point seeds)
    pub layers: Vec<Vec<f64>>,
    /// sources[k-1][i]: node the step into layer k came from, None if unreachable
    pub sources: Vec<Vec<Option<usize>>>,
    pub clamped: usize,
    pub edge_hits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub t: f64,
    pub i: usize,
    pub x: f64,
    pub u: f64,
}

fn build_table(
    stepper: &Stepper<'_>,
    layer0: Vec<f64>,
    k_steps: usize,
    dir: Direction,
    seed: TableSeed,
) -> Result<ActionTable, VarError> {
    let grid = stepper.grid();
    let n = grid.n() as isize;
    let mut layers = Vec::with_capacity(k_steps + 1);
    let mut sources = Vec::with_capacity(k_steps);
    layers.push(layer0);
    let mut clamped = 0;
    let mut edge_hits = 0;
    for _ in 0..k_steps {
        let out = stepper.step_raw(layers.last().expect("layer"), dir)?;
        clamped += out.clamped;
        edge_hits += out.edge_hits;
        let src = out
            .values
            .iter()
            .zip(&out.offsets)
            .enumerate()
            .map(|(i, (v, &j))| {
                if v.is_finite() {
                    let s = match dir {
                        Direction::Backward => i as isize - j,
                        Direction::Forward => i as isize + j,
                    };
                    Some(s.rem_euclid(n) as usize)
                } else {
                    None
                }
            })
            .collect();
        sources.push(src);
        layers.push(out.values);
    }
    Ok(ActionTable {
        grid,
        direction: dir,
        seed,
        tau: stepper.params().tau,
        layers,
        sources,
        clamped,
        edge_hits,
    })
}

/// Discrete h_{x0,u0}(·, kτ) (backward) or h^{x0,u0}(·, kτ) (forward) for
/// k = 1..K. The first layer is one step from the point seed, so only
/// nodes within m cells of x0 are reachable there.
pub fn action_table(
    model: &ContactModel,
    grid: PeriodicGrid,
    x0: f64,
    u0: f64,
    params: &LaxParams,
    k_steps: usize,
    dir: Direction,
) -> Result<ActionTable, VarError> {
    if k_steps < 1 {
        return Err(VarError::Params("need at least one step".into()));
    }
    let stepper = Stepper::new(model, grid, *params)?;
    point_table(&stepper, x0, u0, k_steps, dir)
}

pub fn point_table(
    stepper: &Stepper<'_>,
    x0: f64,
    u0: f64,
    k_steps: usize,
    dir: Direction,
) -> Result<ActionTable, VarError> {
    let grid = stepper.grid();
    let i0 = grid.nearest(x0);
    let sentinel = match dir {
        Direction::Backward => f64::INFINITY,
        Direction::Forward => f64::NEG_INFINITY,
    };
    let mut layer0 = vec![sentinel; grid.n()];
    layer0[i0] = u0;
    build_table(
        stepper,
        layer0,
        k_steps,
        dir,
        TableSeed::Point {
            i0,
            x0: grid.x(i0),
            u0,
        },
    )
}

/// Table for T_{kτ}^± φ with backpointers, used to lift characteristics.
pub fn field_table(
    stepper: &Stepper<'_>,
    phi: &ScalarField,
    k_steps: usize,
    dir: Direction,
) -> Result<ActionTable, VarError> {
    build_table(stepper, phi.values().to_vec(), k_steps, dir, TableSeed::Field)
}

impl ActionTable {
    pub fn steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        &self.layers[k]
    }

    /// Value of layer k at x: exact at nodes, linear between finite nodes,
    /// the sentinel when a neighbour is unreachable.
    pub fn value(&self, x: f64, k: usize) -> f64 {
        let layer = &self.layers[k];
        let dx = self.grid.dx();
        let n = self.grid.n();
        let t = (crate::geometry::wrap_angle(x) + std::f64::consts::PI) / dx;
        let r = t.round();
        if (t - r).abs() < 1e-9 {
            return layer[(r as usize) % n];
        }
        let i = (t.floor() as usize) % n;
        let f = t - t.floor();
        let (a, b) = (layer[i], layer[(i + 1) % n]);
        if !(a.is_finite() && b.is_finite()) {
            return if self.direction == Direction::Backward {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        (1.0 - f) * a + f * b
    }

    /// Minimum over layers k ∈ [k_lo, k_hi] at node i.
    pub fn min_over_layers(&self, i: usize, k_lo: usize, k_hi: usize) -> (f64, usize) {
        let mut best = (f64::INFINITY, k_lo);
        for k in k_lo..=k_hi.min(self.steps()) {
            if self.layers[k][i] < best.0 {
                best = (self.layers[k][i], k);
            }
        }
        best
    }

    /// Follow backpointers from the node nearest x at layer k down to layer
    /// 0; returned in increasing time.
    pub fn backtrack(&self, x: f64, k: usize) -> Result<Vec<CurvePoint>, VarError> {
        let mut i = self.grid.nearest(x);
        if !self.layers[k][i].is_finite() {
            return Err(VarError::Unreachable { x, k });
        }
        let mut curve = Vec::with_capacity(k + 1);
        for kk in (0..=k).rev() {
            curve.push(CurvePoint {
                k: kk,
                t: kk as f64 * self.tau,
                i,
                x: self.grid.x(i),
                u: self.layers[kk][i],
            });
            if kk > 0 {
                i = self.sources[kk - 1][i].ok_or(VarError::Unreachable { x, k: kk })?;
            }
        }
        curve.reverse();
        Ok(curve)
    }

    /// CSV rows `k,i,x,h,backpointer` for k ≥ 1; unreachable entries carry
    /// `inf` and backpointer −1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,i,x,h,backpointer\n");
        for k in 1..=self.steps() {
            for i in 0..self.grid.n() {
                let bp = self.sources[k - 1][i].map(|v| v as i64).unwrap_or(-1);
                let _ = writeln!(s, "{},{},{},{},{}", k, i, self.grid.x(i), self.layers[k][i], bp);
            }
        }
        s
    }
}

/// Backtracked discrete minimizer ending at (x, Kτ).
pub fn backtrack_minimizer(table: &ActionTable, x: f64) -> Result<Vec<CurvePoint>, VarError> {
    table.backtrack(x, table.steps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::periodic_distance;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn candidate_order() {
        assert_eq!(candidate_offsets(2), vec![0, -1, 1, -2, 2]);
        let g = grid(512);
        assert_eq!(LaxParams::new(g, 1.0 / 32.0, 8.0).m, 21);
    }

    #[test]
    fn nonnegative_lagrangian_keeps_zero() {
        let g = grid(128);
        let m = ContactModel::separable(1.0, "0", "0").unwrap();
        let p = LaxParams::new(g, 0.125, 8.0);
        let z = ScalarField::constant(g, 0.0).unwrap();
        let (out, step) = lax_step(&m, &z, &p, Direction::Backward).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        assert!(step.offsets.iter().all(|&j| j == 0));
    }

    #[test]
    fn stationary_solution_is_a_discrete_fixed_point() {
        let g = grid(128);
        let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let q = ScalarField::constant(g, 0.25).unwrap();
        for dir in [Direction::Backward, Direction::Forward] {
            let (out, _) = lax_step(&m, &q, &p, dir).unwrap();
            assert!(out.values().iter().all(|&v| v == 0.25), "{dir:?}");
        }
    }

    #[test]
    fn rejects_large_tau() {
        let g = grid(64);
        let m = ContactModel::separable(1.0, "0", "3").unwrap();
        let p = LaxParams::new(g, 0.25, 8.0);
        assert!(p.validate(&m).is_err());
        assert!((LaxParams::max_tau(&m) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn threads_do_not_change_results() {
        let g = grid(256);
        let m = ContactModel::sine_coupled();
        let phi = ScalarField::from_fn(g, |x| (3.0 * x).cos() * 0.3).unwrap();
        let p1 = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let p4 = p1.with_threads(4);
        for dir in [Direction::Backward, Direction::Forward] {
            let a = lax_step(&m, &phi, &p1, dir).unwrap();
            let b = lax_step(&m, &phi, &p4, dir).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn forward_step_inverts_backward_move() {
        // the dual step applied to a backward image recovers the original
        // wherever that node's own move was optimal
        let g = grid(128);
        let m = ContactModel::sine_coupled();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let phi = ScalarField::from_fn(g, |x| 0.2 * x.sin()).unwrap();
        let (b, _) = lax_step(&m, &phi, &p, Direction::Backward).unwrap();
        let (fb, _) = lax_step(&m, &b, &p, Direction::Forward).unwrap();
        for i in 0..g.n() {
            assert!(fb.get(i) >= phi.get(i) - 1e-12);
        }
        let general = m.as_general().unwrap();
        let (b2, _) = lax_step(&general, &phi, &p, Direction::Backward).unwrap();
        let (fb2, _) = lax_step(&general, &b2, &p, Direction::Forward).unwrap();
        assert!(b.sup_distance(&b2) < 1e-10);
        assert!(fb.sup_distance(&fb2) < 1e-10);
    }

    #[test]
    fn hopf_lax_tent() {
        // with λ ≡ 0 and V ≡ 0 the exact solution is min_y φ(y) + d(x,y)²/(4t)
        let g = grid(512);
        let m = ContactModel::separable(1.0, "0", "0").unwrap();
        let p = LaxParams::new(g, 0.125, 8.0);
        let tent = |x: f64| (1.0 - x.abs()).max(0.0);
        let phi = ScalarField::from_fn(g, tent).unwrap();
        let t = 0.5;
        let ev = semigroup_evolve(&m, &phi, &p, t, Direction::Backward, 1000).unwrap();
        let out = ev.last();
        let fine: Vec<f64> = (0..8192).map(|k| -PI + 2.0 * PI * k as f64 / 8192.0).collect();
        let mut worst: f64 = 0.0;
        for i in 0..g.n() {
            let x = g.x(i);
            let exact = fine
                .iter()
                .map(|&y| tent(y) + periodic_distance(x, y).powi(2) / (4.0 * t))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((out.get(i) - exact).abs());
        }
        assert!(worst < 5e-3, "hopf-lax error {worst}");
    }

    #[test]
    fn hopf_lax_point_seed() {
        // h_{0,0}(π/2, 1) = π²/16 for the free particle
        let g = grid(512);
        let m = ContactModel::separable(1.0, "0", "0").unwrap();
        let p = LaxParams::new(g, 0.125, 8.0);
        let table = action_table(&m, g, 0.0, 0.0, &p, 8, Direction::Backward).unwrap();
        let v = table.value(PI / 2.0, 8);
        assert!((v - PI * PI / 16.0).abs() < 5e-3, "{v}");
        let curve = backtrack_minimizer(&table, PI / 2.0).unwrap();
        assert_eq!(curve[0].i, g.nearest(0.0));
        assert_eq!(curve.last().unwrap().u, table.layer(8)[g.nearest(PI / 2.0)]);
        for c in &curve {
            let straight = c.t / 1.0 * PI / 2.0;
            assert!((c.x - straight).abs() <= g.dx() + 1e-12, "{c:?}");
        }
    }

    #[test]
    fn fixed_point_is_calibrated() {
        let g = grid(512);
        let m = ContactModel::sine_coupled();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let k = 64;
        let table = action_table(&m, g, PI / 2.0, 0.25, &p, k, Direction::Backward).unwrap();
        for kk in 1..=k {
            assert!((table.value(PI / 2.0, kk) - 0.25).abs() < 5e-3);
        }
        let curve = backtrack_minimizer(&table, PI / 2.0).unwrap();
        assert!(curve.iter().all(|c| c.i == g.nearest(PI / 2.0) && (c.u - 0.25).abs() < 5e-3));
    }

    #[test]
    fn constant_rate_shift_law() {
        let g = grid(256);
        let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let a = action_table(&m, g, 0.3, 0.0, &p, 32, Direction::Backward).unwrap();
        let b = action_table(&m, g, 0.3, 0.1, &p, 32, Direction::Backward).unwrap();
        let want = 0.1 * (-1.0f64).exp();
        for i in 0..g.n() {
            let (x, y) = (a.layer(32)[i], b.layer(32)[i]);
            if x.is_finite() {
                assert!((y - x - want).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn weak_kam_monotone_model() {
        let g = grid(256);
        let m = ContactModel::separable(1.0, "-0.25", "1").unwrap();
        let p = LaxParams::new(g, 1.0 / 32.0, 8.0);
        let phi = ScalarField::from_fn(g, f64::sin).unwrap();
        let r = weak_kam_limit(&m, &phi, &p, Direction::Backward, LimitOptions::default()).unwrap();
        assert_eq!(r.status, WeakKamStatus::Converged);
        assert!(r.residual <= 1e-7);
        assert!(r.field.values().iter().all(|v| (v - 0.25).abs() < 1e-3));
        assert!(r.summary().contains("status=Converged"));
    }

    #[test]
    fn table_csv_shape() {
        let g = grid(16);
        let m = ContactModel::separable(1.0, "0", "0").unwrap();
        let p = LaxParams::new(g, 0.25, 2.0);
        let t = action_table(&m, g, 0.0, 1.0, &p, 2, Direction::Backward).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("k,i,x,h,backpointer\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * 16);
        assert!(csv.contains(",inf,-1"));
    }
}
