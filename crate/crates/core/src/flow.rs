//! The contact flow ẋ = H_p, u̇ = p·H_p − H, ṗ = −H_x − p·H_u: fixed-step RK4,
//! fixed points, their linearization, and invariant-manifold traces.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{periodic_distance, wrap_angle};
use crate::model::{ContactModel, DomainError};

pub const DEFAULT_U_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub u: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, u: f64, p: f64) -> Self {
        PhasePoint {
            x: wrap_angle(x),
            u,
            p,
        }
    }

    /// max(|Δx|, |Δu|, |Δp|) with Δx measured on the circle.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        periodic_distance(self.x, other.x)
            .max((self.u - other.u).abs())
            .max((self.p - other.p).abs())
    }

    fn axpy(&self, a: f64, d: [f64; 3]) -> PhasePoint {
        // x is left unwrapped inside a step
        PhasePoint {
            x: self.x + a * d[0],
            u: self.u + a * d[1],
            p: self.p + a * d[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// signed integration step
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("orbit left the bound |u|,|p| <= {bound} at t = {t} (state {state:?})")]
    BlowUp {
        t: f64,
        state: PhasePoint,
        bound: f64,
        partial: Box<Orbit>,
    },
    #[error("invalid integration request: {0}")]
    Request(String),
    #[error("point is not a fixed point: vector field norm {0:.3e}")]
    NotFixed(f64),
    #[error("no real {0} eigenvalue at this fixed point")]
    NoRealEigenvalue(&'static str),
}

pub fn vector_field(model: &ContactModel, z: &PhasePoint) -> Result<[f64; 3], DomainError> {
    let g = model.gradient(z.x, z.u, z.p)?;
    let h = model.hamiltonian(z.x, z.u, z.p)?;
    Ok([g.hp, z.p * g.hp - h, -g.hx - z.p * g.hu])
}

/// Analytic Jacobian of the vector field; rows (ẋ, u̇, ṗ), columns (x, u, p).
pub fn jacobian(model: &ContactModel, z: &PhasePoint) -> Result<[[f64; 3]; 3], DomainError> {
    let g = model.gradient(z.x, z.u, z.p)?;
    let s = model.hessian(z.x, z.u, z.p)?;
    let p = z.p;
    Ok([
        [s.xp, s.up, s.pp],
        [p * s.xp - g.hx, p * s.up - g.hu, p * s.pp],
        [-s.xx - p * s.xu, -s.xu - p * s.uu, -s.xp - g.hu - p * s.up],
    ])
}

pub fn jacobian_fd(
    model: &ContactModel,
    z: &PhasePoint,
    h: f64,
) -> Result<[[f64; 3]; 3], DomainError> {
    let mut j = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut d = [0.0; 3];
        d[col] = h;
        let fp = vector_field(model, &z.axpy(1.0, d))?;
        let fm = vector_field(model, &z.axpy(-1.0, d))?;
        for row in 0..3 {
            j[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

pub fn rk4_step(model: &ContactModel, z: &PhasePoint, h: f64) -> Result<PhasePoint, DomainError> {
    let k1 = vector_field(model, z)?;
    let k2 = vector_field(model, &z.axpy(0.5 * h, k1))?;
    let k3 = vector_field(model, &z.axpy(0.5 * h, k2))?;
    let k4 = vector_field(model, &z.axpy(h, k3))?;
    let mut d = [0.0; 3];
    for c in 0..3 {
        d[c] = (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) / 6.0;
    }
    let out = z.axpy(h, d);
    Ok(PhasePoint {
        x: wrap_angle(out.x),
        ..out
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub u_max: f64,
    /// store every `thin`-th step (the final state is always stored)
    pub thin: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            u_max: DEFAULT_U_MAX,
            thin: 1,
        }
    }
}

pub fn integrate_orbit(
    model: &ContactModel,
    z0: PhasePoint,
    span: (f64, f64),
    h: f64,
) -> Result<Orbit, FlowError> {
    integrate_orbit_with(model, z0, span, h, IntegrateOptions::default())
}

/// Fixed-step RK4 from `span.0` to `span.1`; a reversed span integrates the
/// reversed field. The step is shrunk slightly so it divides the span.
pub fn integrate_orbit_with(
    model: &ContactModel,
    z0: PhasePoint,
    span: (f64, f64),
    h: f64,
    opts: IntegrateOptions,
) -> Result<Orbit, FlowError> {
    let (t0, t1) = span;
    if !(h > 0.0) || !h.is_finite() {
        return Err(FlowError::Request(format!("step must be positive, got {h}")));
    }
    if t0 == t1 || !(t1 - t0).is_finite() {
        return Err(FlowError::Request("empty time span".into()));
    }
    let len = (t1 - t0).abs();
    let mut steps = (len / h).round().max(1.0) as usize;
    if len / steps as f64 > h * (1.0 + 1e-9) {
        steps = (len / h).ceil() as usize;
    }
    let hs = (t1 - t0) / steps as f64;
    let thin = opts.thin.max(1);
    let mut z = PhasePoint::new(z0.x, z0.u, z0.p);
    let mut orbit = Orbit {
        times: vec![t0],
        states: vec![z],
        h: hs,
    };
    for k in 1..=steps {
        z = rk4_step(model, &z, hs)?;
        let t = t0 + k as f64 * hs;
        let blown = !(z.u.abs() <= opts.u_max && z.p.abs() <= opts.u_max);
        if blown || k % thin == 0 || k == steps {
            orbit.times.push(t);
            orbit.states.push(z);
        }
        if blown {
            return Err(FlowError::BlowUp {
                t,
                state: z,
                bound: opts.u_max,
                partial: Box::new(orbit),
            });
        }
    }
    Ok(orbit)
}

impl Orbit {
    pub fn from_parts(times: Vec<f64>, states: Vec<PhasePoint>) -> Orbit {
        let h = if times.len() > 1 {
            times[1] - times[0]
        } else {
            0.0
        };
        Orbit { times, states, h }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &PhasePoint {
        &self.states[0]
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("orbit is never empty")
    }

    /// Same states in reversed time order, with times negated.
    pub fn time_reversed(&self) -> Orbit {
        Orbit {
            times: self.times.iter().rev().map(|t| -t).collect(),
            states: self.states.iter().rev().copied().collect(),
            h: self.h,
        }
    }

    /// Index ranges of the leading and trailing `frac` of the time span.
    pub fn head_window(&self, frac: f64) -> std::ops::Range<usize> {
        let t0 = self.times[0];
        let span = self.times[self.len() - 1] - t0;
        let end = self
            .times
            .iter()
            .position(|&t| (t - t0) > frac * span)
            .unwrap_or(self.len());
        0..end.max(1)
    }

    pub fn tail_window(&self, frac: f64) -> std::ops::Range<usize> {
        let t1 = self.times[self.len() - 1];
        let span = t1 - self.times[0];
        let start = self
            .times
            .iter()
            .position(|&t| (t1 - t) <= frac * span)
            .unwrap_or(self.len() - 1);
        start.min(self.len() - 1)..self.len()
    }

    pub fn energies(&self, model: &ContactModel) -> Result<Vec<f64>, DomainError> {
        self.states
            .iter()
            .map(|z| model.hamiltonian(z.x, z.u, z.p))
            .collect()
    }

    pub fn max_abs_energy(&self, model: &ContactModel) -> Result<f64, DomainError> {
        Ok(self.energies(model)?.iter().fold(0.0, |a, h| a.max(h.abs())))
    }

    /// State nearest in time to `t`.
    pub fn at_time(&self, t: f64) -> (usize, &PhasePoint) {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        (best, &self.states[best])
    }

    /// CSV with header `t,x,u,p,H`, keeping every `thin`-th row and the last.
    pub fn to_csv(&self, model: &ContactModel, thin: usize) -> String {
        let thin = thin.max(1);
        let mut s = String::from("t,x,u,p,H\n");
        for (k, (t, z)) in self.times.iter().zip(&self.states).enumerate() {
            if k % thin != 0 && k + 1 != self.len() {
                continue;
            }
            let h = model.hamiltonian(z.x, z.u, z.p).unwrap_or(f64::NAN);
            let _ = writeln!(s, "{},{},{},{},{}", t, z.x, z.u, z.p, h);
        }
        s
    }
}

/// max_k |H(z_k) − H(z_0)·exp(−∫₀^{t_k} H_u ds)|. The integral uses the
/// four-point cubic rule on each step (fourth order on uniform steps),
/// falling back to the trapezoid rule on orbits shorter than four samples.
pub fn energy_transport_residual(model: &ContactModel, orbit: &Orbit) -> Result<f64, DomainError> {
    let hu: Vec<f64> = orbit
        .states
        .iter()
        .map(|z| model.gradient(z.x, z.u, z.p).map(|g| g.hu))
        .collect::<Result<_, _>>()?;
    let energies = orbit.energies(model)?;
    let n = hu.len();
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..n.saturating_sub(1) {
        let dt = orbit.times[k + 1] - orbit.times[k];
        integral += if n < 4 {
            0.5 * dt * (hu[k] + hu[k + 1])
        } else if k == 0 {
            dt / 24.0 * (9.0 * hu[0] + 19.0 * hu[1] - 5.0 * hu[2] + hu[3])
        } else if k + 2 >= n {
            dt / 24.0 * (9.0 * hu[k + 1] + 19.0 * hu[k] - 5.0 * hu[k - 1] + hu[k - 2])
        } else {
            dt / 24.0 * (-hu[k - 1] + 13.0 * hu[k] + 13.0 * hu[k + 1] - hu[k + 2])
        };
        worst = worst.max((energies[k + 1] - energies[0] * (-integral).exp()).abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// fixed points

#[derive(Debug, Clone, PartialEq)]
pub struct RealEigen {
    pub value: f64,
    /// unit vector, sign fixed so its largest component is positive
    pub vector: [f64; 3],
    /// |∇H·v| / |∇H|; zero means tangent to the energy shell
    pub shell_transversality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointInfo {
    pub z: PhasePoint,
    pub jacobian: [[f64; 3]; 3],
    /// max entrywise gap between the analytic and finite-difference Jacobians
    pub fd_gap: f64,
    /// coefficients (c2, c1, c0) of s³ + c2 s² + c1 s + c0
    pub char_poly: [f64; 3],
    pub eigenvalues: [Complex64; 3],
    pub real_eigen: Vec<RealEigen>,
    pub stable_dim: usize,
    pub unstable_dim: usize,
    pub hyperbolic: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedPointReport {
    pub points: Vec<FixedPointInfo>,
    /// set when H_x vanishes identically along a zero set of H: the fixed
    /// points are then not isolated; holds sample (x, u) of the family
    pub degenerate_family: Option<Vec<(f64, f64)>>,
    pub warnings: Vec<String>,
}

fn norm_inf(v: [f64; 3]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&a[r]);
        m[r][3] = b[r];
    }
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        for r in 0..3 {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..4 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Damped Newton on the vector field.
fn newton_polish(model: &ContactModel, mut z: PhasePoint) -> Result<(PhasePoint, f64), DomainError> {
    let mut f = vector_field(model, &z)?;
    let mut r = norm_inf(f);
    for _ in 0..100 {
        if r <= 1e-15 {
            break;
        }
        let j = jacobian(model, &z)?;
        let Some(d) = solve3(j, f) else { break };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-6 {
            let trial = z.axpy(-step, d);
            let trial = PhasePoint::new(trial.x, trial.u, trial.p);
            if let Ok(ft) = vector_field(model, &trial) {
                let rt = norm_inf(ft);
                if rt < r {
                    z = trial;
                    f = ft;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((z, r))
}

/// Scan a coarse (x, u) lattice at p = 0 for cells where both H and H_x
/// change sign, then polish each seed with damped Newton.
pub fn find_fixed_points(model: &ContactModel, coarse_n: usize) -> Result<FixedPointReport, DomainError> {
    let nx = coarse_n.max(8);
    let nu = coarse_n.max(8);
    let ub = model.bounds().u;
    let xs: Vec<f64> = (0..nx).map(|i| -PI + 2.0 * PI * i as f64 / nx as f64).collect();
    let us: Vec<f64> = (0..=nu).map(|j| -ub + 2.0 * ub * j as f64 / nu as f64).collect();
    let mut hv = vec![vec![0.0; us.len()]; nx];
    let mut hxv = vec![vec![0.0; us.len()]; nx];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &u) in us.iter().enumerate() {
            hv[i][j] = model.hamiltonian(x, u, 0.0)?;
            hxv[i][j] = model.gradient(x, u, 0.0)?.hx;
        }
    }
    let changes = |v: [f64; 4]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    };
    let mut report = FixedPointReport::default();
    let mut family = Vec::new();
    let mut seeds = Vec::new();
    for i in 0..nx {
        let i2 = (i + 1) % nx;
        for j in 0..nu {
            let h = [hv[i][j], hv[i2][j], hv[i][j + 1], hv[i2][j + 1]];
            let hx = [hxv[i][j], hxv[i2][j], hxv[i][j + 1], hxv[i2][j + 1]];
            if !changes(h) {
                continue;
            }
            let xc = xs[i] + PI / nx as f64;
            let uc = 0.5 * (us[j] + us[j + 1]);
            if hx.iter().all(|v| v.abs() < 1e-12) {
                family.push((xc, uc));
            } else if changes(hx) {
                seeds.push(PhasePoint::new(xc, uc, 0.0));
            }
        }
    }
    if !family.is_empty() {
        report.warnings.push(format!(
            "H_x vanishes on {} lattice cells of the zero set of H: fixed points are not isolated",
            family.len()
        ));
        report.degenerate_family = Some(family);
    }
    let mut found: Vec<PhasePoint> = Vec::new();
    for seed in seeds {
        let (z, r) = newton_polish(model, seed)?;
        if r > 1e-10 {
            report
                .warnings
                .push(format!("seed ({:.4}, {:.4}) dropped: Newton residual {r:.2e}", seed.x, seed.u));
            continue;
        }
        if found.iter().any(|f| f.distance(&z) < 1e-6) {
            continue;
        }
        found.push(z);
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x));
    for z in found {
        match linearize_fixed_point(model, z) {
            Ok(info) => report.points.push(info),
            Err(FlowError::Domain(e)) => return Err(e),
            Err(e) => report.warnings.push(format!("linearization failed: {e}")),
        }
    }
    Ok(report)
}

/// Re-polish a fixed point with Newton; returns the moved point.
pub fn repolish(model: &ContactModel, z: PhasePoint) -> Result<PhasePoint, DomainError> {
    Ok(newton_polish(model, z)?.0)
}

pub fn linearize_fixed_point(model: &ContactModel, z: PhasePoint) -> Result<FixedPointInfo, FlowError> {
    let residual = norm_inf(vector_field(model, &z)?);
    if residual > 1e-8 {
        return Err(FlowError::NotFixed(residual));
    }
    let j = jacobian(model, &z)?;
    let jfd = jacobian_fd(model, &z, 1e-6)?;
    let mut fd_gap: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            fd_gap = fd_gap.max((j[r][c] - jfd[r][c]).abs());
        }
    }
    let char_poly = characteristic_polynomial(&j);
    let eigenvalues = solve_cubic(char_poly[0], char_poly[1], char_poly[2]);
    let g = model.gradient(z.x, z.u, z.p)?;
    let grad = [g.hx, g.hu, g.hp];
    let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut real_eigen = Vec::new();
    for s in eigenvalues.iter().filter(|s| s.im == 0.0) {
        if let Some(v) = null_vector(&j, s.re) {
            let dot: f64 = (0..3).map(|k| v[k] * grad[k]).sum();
            real_eigen.push(RealEigen {
                value: s.re,
                vector: v,
                shell_transversality: if gnorm > 0.0 { dot.abs() / gnorm } else { 0.0 },
            });
        }
    }
    let stable_dim = eigenvalues.iter().filter(|s| s.re < -1e-8).count();
    let unstable_dim = eigenvalues.iter().filter(|s| s.re > 1e-8).count();
    Ok(FixedPointInfo {
        z,
        jacobian: j,
        fd_gap,
        char_poly,
        eigenvalues,
        real_eigen,
        stable_dim,
        unstable_dim,
        hyperbolic: stable_dim + unstable_dim == 3,
        residual,
    })
}

/// Coefficients (c2, c1, c0) of det(sI − J) = s³ + c2 s² + c1 s + c0.
pub fn characteristic_polynomial(j: &[[f64; 3]; 3]) -> [f64; 3] {
    let tr = j[0][0] + j[1][1] + j[2][2];
    let minors = j[0][0] * j[1][1] - j[0][1] * j[1][0] + j[0][0] * j[2][2] - j[0][2] * j[2][0]
        + j[1][1] * j[2][2]
        - j[1][2] * j[2][1];
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    [-tr, minors, -det]
}

/// Roots of s³ + a s² + b s + c in closed form: trigonometric branch for
/// three real roots, Cardano otherwise. Real roots come first, ascending;
/// a complex pair is returned with positive imaginary part first.
pub fn solve_cubic(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let scale = 1.0 + a.abs() + b.abs() + c.abs();
    let polish = |mut s: f64| {
        for _ in 0..3 {
            let f = ((s + a) * s + b) * s + c;
            let d = (3.0 * s + 2.0 * a) * s + b;
            if d == 0.0 {
                break;
            }
            s -= f / d;
        }
        s
    };
    if disc > 1e-14 * scale * scale {
        let sq = disc.sqrt();
        let big = -(q.signum()) * (q.abs() / 2.0 + sq).cbrt();
        let small = if big != 0.0 { -p / (3.0 * big) } else { 0.0 };
        let r = polish(big + small - shift);
        let re = -(big + small) / 2.0 - shift;
        let im = (3.0f64).sqrt() / 2.0 * (big - small).abs();
        [
            Complex64::new(r, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    } else if p.abs() < 1e-300 {
        let r = -shift;
        [Complex64::new(r, 0.0); 3]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut roots = [0.0; 3];
        for (k, r) in roots.iter_mut().enumerate() {
            *r = polish(m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift);
        }
        roots.sort_by(|x, y| x.total_cmp(y));
        [
            Complex64::new(roots[0], 0.0),
            Complex64::new(roots[1], 0.0),
            Complex64::new(roots[2], 0.0),
        ]
    }
}

/// Unit null vector of J − sI from the best-conditioned row cross product.
fn null_vector(j: &[[f64; 3]; 3], s: f64) -> Option<[f64; 3]> {
    let mut m = *j;
    for k in 0..3 {
        m[k][k] -= s;
    }
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let cands = [cross(m[0], m[1]), cross(m[0], m[2]), cross(m[1], m[2])];
    let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let best = cands
        .iter()
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .copied()?;
    let nb = norm(&best);
    if nb < 1e-14 {
        return None;
    }
    let mut v = best.map(|x| x / nb);
    let lead = (0..3)
        .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
        .unwrap_or(0);
    if v[lead] < 0.0 {
        v = v.map(|x| -x);
    }
    Some(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldDirection {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTrace {
    pub orbit: Orbit,
    pub eigen: RealEigen,
    pub seed: PhasePoint,
    /// initial displacement from the fixed point along the eigenline
    pub seed_offset: [f64; 3],
    pub max_abs_h: f64,
}

/// Seeds at z★ ± offset·v for the real eigenvector v of the requested sign
/// (the one most tangent to the energy shell when several qualify) and
/// integrates forward for unstable, backward for stable traces. A shell-
/// tangent seed is projected back onto H = 0 along u.
pub fn trace_invariant_manifold(
    model: &ContactModel,
    info: &FixedPointInfo,
    direction: ManifoldDirection,
    branch: f64,
    offset: f64,
    t_max: f64,
    h: f64,
) -> Result<ManifoldTrace, FlowError> {
    let wanted = |s: f64| match direction {
        ManifoldDirection::Unstable => s > 1e-8,
        ManifoldDirection::Stable => s < -1e-8,
    };
    let eigen = info
        .real_eigen
        .iter()
        .filter(|e| wanted(e.value))
        .min_by(|a, b| {
            a.shell_transversality
                .total_cmp(&b.shell_transversality)
                .then(b.value.abs().total_cmp(&a.value.abs()))
        })
        .cloned()
        .ok_or(FlowError::NoRealEigenvalue(match direction {
            ManifoldDirection::Unstable => "unstable",
            ManifoldDirection::Stable => "stable",
        }))?;
    let sgn = if branch < 0.0 { -1.0 } else { 1.0 };
    let d = eigen.vector.map(|c| sgn * offset * c);
    let z = &info.z;
    let mut seed = PhasePoint {
        x: z.x + d[0],
        u: z.u + d[1],
        p: z.p + d[2],
    };
    if eigen.shell_transversality < 1e-8 {
        for _ in 0..20 {
            let hval = model.hamiltonian(seed.x, seed.u, seed.p)?;
            let hu = model.gradient(seed.x, seed.u, seed.p)?.hu;
            if hu.abs() < 1e-12 || hval.abs() < 1e-17 {
                break;
            }
            seed.u -= hval / hu;
        }
    }
    let seed = PhasePoint::new(seed.x, seed.u, seed.p);
    let span = match direction {
        ManifoldDirection::Unstable => (0.0, t_max),
        ManifoldDirection::Stable => (0.0, -t_max),
    };
    let orbit = integrate_orbit(model, seed, span, h)?;
    let max_abs_h = orbit.max_abs_energy(model)?;
    Ok(ManifoldTrace {
        orbit,
        eigen,
        seed,
        seed_offset: d,
        max_abs_h,
    })
}

/// Necessary ordering for a connection between fixed points: u at the
/// α-end lies strictly below u at the ω-end.
pub fn connection_ordering_holds(orbit: &Orbit) -> bool {
    orbit.first().u < orbit.last().u
}
