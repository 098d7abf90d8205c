//! Contact Hamiltonians H(x, u, p) on the circle and their Legendre duals.

pub mod expr;

use std::f64::consts::PI;

use thiserror::Error;

pub use expr::{parse_expression, DomainError, Env, Expr, ParseError, Var};

use crate::geometry::ScalarField;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("stiffness must be positive and finite, got {0}")]
    Stiffness(f64),
    #[error("u-Lipschitz bound is not finite")]
    Lipschitz,
    #[error("Legendre transform failed at (x={x}, u={u}, v={v}): {reason}")]
    Legendre {
        x: f64,
        u: f64,
        v: f64,
        reason: String,
    },
}

/// Box in (u, p) over which a general model is validated and its
/// u-Lipschitz constant is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBounds {
    pub u: f64,
    pub p: f64,
}

impl Default for ModelBounds {
    fn default() -> Self {
        ModelBounds { u: 10.0, p: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub hx: f64,
    pub hu: f64,
    pub hp: f64,
}

/// Second partials of H.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub xx: f64,
    pub xu: f64,
    pub xp: f64,
    pub uu: f64,
    pub up: f64,
    pub pp: f64,
}

#[derive(Debug, Clone)]
struct Separable {
    alpha: f64,
    v: Expr,
    lambda: Expr,
    dv: Expr,
    dlambda: Expr,
    d2v: Expr,
    d2lambda: Expr,
}

#[derive(Debug, Clone)]
struct General {
    h: Expr,
    hx: Expr,
    hu: Expr,
    hp: Expr,
    hxx: Expr,
    hxu: Expr,
    hxp: Expr,
    huu: Expr,
    hup: Expr,
    hpp: Expr,
}

#[derive(Debug, Clone)]
enum Kind {
    Separable(Separable),
    General(General),
}

#[derive(Debug, Clone)]
pub struct ContactModel {
    kind: Kind,
    lambda_bound: f64,
    v_max: f64,
    bounds: ModelBounds,
    warnings: Vec<String>,
}

/// Closed-form pieces of H = α p² + V(x) + λ(x) u at one x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableAt {
    pub alpha: f64,
    pub v: f64,
    pub lambda: f64,
}

const LATTICE: usize = 1024;

impl ContactModel {
    /// H = α p² + V(x) + λ(x) u with V and λ given as expressions in x.
    pub fn separable(alpha: f64, potential: &str, rate: &str) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::Stiffness(alpha));
        }
        let v = expr::parse_in(potential, &[Var::X])?;
        let lambda = expr::parse_in(rate, &[Var::X])?;
        let dv = v.diff(Var::X);
        let dlambda = lambda.diff(Var::X);
        let sep = Separable {
            alpha,
            d2v: dv.diff(Var::X),
            d2lambda: dlambda.diff(Var::X),
            v,
            lambda,
            dv,
            dlambda,
        };
        // λ does not depend on u or p, so the lattice reduces to x.
        let mut bound: f64 = 0.0;
        for k in 0..LATTICE {
            let x = -PI + 2.0 * PI * k as f64 / LATTICE as f64;
            let env = Env::new(x, 0.0, 0.0);
            bound = bound.max(sep.lambda.eval(&env)?.abs());
            sep.v.eval(&env)?;
            sep.dv.eval(&env)?;
            sep.dlambda.eval(&env)?;
        }
        if !bound.is_finite() {
            return Err(ModelError::Lipschitz);
        }
        Ok(ContactModel {
            kind: Kind::Separable(sep),
            lambda_bound: bound,
            v_max: 8.0,
            bounds: ModelBounds::default(),
            warnings: Vec::new(),
        })
    }

    /// The model problem H = p² + sin x·u − 1/4.
    pub fn sine_coupled() -> Self {
        ContactModel::separable(1.0, "-0.25", "sin(x)").expect("built-in model")
    }

    pub fn general(source: &str) -> Result<Self, ModelError> {
        ContactModel::general_with_bounds(source, ModelBounds::default())
    }

    pub fn general_with_bounds(source: &str, bounds: ModelBounds) -> Result<Self, ModelError> {
        let h = parse_expression(source)?;
        let hx = h.diff(Var::X);
        let hu = h.diff(Var::U);
        let hp = h.diff(Var::P);
        let g = General {
            hxx: hx.diff(Var::X),
            hxu: hx.diff(Var::U),
            hxp: hx.diff(Var::P),
            huu: hu.diff(Var::U),
            hup: hu.diff(Var::P),
            hpp: hp.diff(Var::P),
            h,
            hx,
            hu,
            hp,
        };
        // 16 x 8 x 8 = 1024 lattice points
        let mut bound: f64 = 0.0;
        let mut convex_failures = 0usize;
        let mut min_hpp = f64::INFINITY;
        for i in 0..16 {
            let x = -PI + 2.0 * PI * i as f64 / 16.0;
            for j in 0..8 {
                let u = -bounds.u + 2.0 * bounds.u * j as f64 / 7.0;
                for k in 0..8 {
                    let p = -bounds.p + 2.0 * bounds.p * k as f64 / 7.0;
                    let env = Env::new(x, u, p);
                    g.h.eval(&env)?;
                    bound = bound.max(g.hu.eval(&env)?.abs());
                    let hpp = g.hpp.eval(&env)?;
                    min_hpp = min_hpp.min(hpp);
                    if hpp <= 0.0 {
                        convex_failures += 1;
                    }
                }
            }
        }
        if !bound.is_finite() {
            return Err(ModelError::Lipschitz);
        }
        let mut warnings = Vec::new();
        if convex_failures > 0 {
            warnings.push(format!(
                "H_pp is not positive at {convex_failures} of {LATTICE} lattice points (min {min_hpp:.3e}); the Legendre transform may fail"
            ));
        }
        Ok(ContactModel {
            kind: Kind::General(g),
            lambda_bound: bound,
            v_max: 8.0,
            bounds,
            warnings,
        })
    }

    /// Re-express the model problem through the general code path.
    pub fn as_general(&self) -> Result<ContactModel, ModelError> {
        match &self.kind {
            Kind::General(_) => Ok(self.clone()),
            Kind::Separable(s) => {
                let src = format!("{:?} * p^2 + {} + ({}) * u", s.alpha, s.v, s.lambda);
                let mut m = ContactModel::general_with_bounds(&src, self.bounds)?;
                m.v_max = self.v_max;
                Ok(m)
            }
        }
    }

    pub fn with_v_max(mut self, v_max: f64) -> Self {
        self.v_max = v_max;
        self
    }

    /// Λ, the sampled bound on |∂H/∂u|.
    pub fn lambda_bound(&self) -> f64 {
        self.lambda_bound
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn bounds(&self) -> ModelBounds {
        self.bounds
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, Kind::Separable(_))
    }

    /// Closed-form data at x for the separable family.
    pub fn separable_at(&self, x: f64) -> Option<Result<SeparableAt, DomainError>> {
        match &self.kind {
            Kind::Separable(s) => {
                let env = Env::new(x, 0.0, 0.0);
                Some((|| {
                    Ok(SeparableAt {
                        alpha: s.alpha,
                        v: s.v.eval(&env)?,
                        lambda: s.lambda.eval(&env)?,
                    })
                })())
            }
            Kind::General(_) => None,
        }
    }

    pub fn hamiltonian(&self, x: f64, u: f64, p: f64) -> Result<f64, DomainError> {
        match &self.kind {
            Kind::Separable(s) => {
                let env = Env::new(x, u, p);
                Ok(s.alpha * p * p + s.v.eval(&env)? + s.lambda.eval(&env)? * u)
            }
            Kind::General(g) => g.h.eval(&Env::new(x, u, p)),
        }
    }

    pub fn gradient(&self, x: f64, u: f64, p: f64) -> Result<Gradient, DomainError> {
        let env = Env::new(x, u, p);
        match &self.kind {
            Kind::Separable(s) => Ok(Gradient {
                hx: s.dv.eval(&env)? + s.dlambda.eval(&env)? * u,
                hu: s.lambda.eval(&env)?,
                hp: 2.0 * s.alpha * p,
            }),
            Kind::General(g) => Ok(Gradient {
                hx: g.hx.eval(&env)?,
                hu: g.hu.eval(&env)?,
                hp: g.hp.eval(&env)?,
            }),
        }
    }

    pub fn hessian(&self, x: f64, u: f64, p: f64) -> Result<Hessian, DomainError> {
        let env = Env::new(x, u, p);
        match &self.kind {
            Kind::Separable(s) => Ok(Hessian {
                xx: s.d2v.eval(&env)? + s.d2lambda.eval(&env)? * u,
                xu: s.dlambda.eval(&env)?,
                xp: 0.0,
                uu: 0.0,
                up: 0.0,
                pp: 2.0 * s.alpha,
            }),
            Kind::General(g) => Ok(Hessian {
                xx: g.hxx.eval(&env)?,
                xu: g.hxu.eval(&env)?,
                xp: g.hxp.eval(&env)?,
                uu: g.huu.eval(&env)?,
                up: g.hup.eval(&env)?,
                pp: g.hpp.eval(&env)?,
            }),
        }
    }

    /// Central-difference gradient, for cross-checking the symbolic one.
    pub fn gradient_fd(&self, x: f64, u: f64, p: f64, h: f64) -> Result<Gradient, DomainError> {
        let c = |a: f64, b: f64| (a - b) / (2.0 * h);
        Ok(Gradient {
            hx: c(self.hamiltonian(x + h, u, p)?, self.hamiltonian(x - h, u, p)?),
            hu: c(self.hamiltonian(x, u + h, p)?, self.hamiltonian(x, u - h, p)?),
            hp: c(self.hamiltonian(x, u, p + h)?, self.hamiltonian(x, u, p - h)?),
        })
    }

    /// L(x, u, v) = sup_p { p v − H(x, u, p) } and the maximizing momentum.
    pub fn lagrangian(&self, x: f64, u: f64, v: f64) -> Result<(f64, f64), ModelError> {
        match &self.kind {
            Kind::Separable(s) => {
                let env = Env::new(x, u, 0.0);
                let l = v * v / (4.0 * s.alpha) - s.v.eval(&env)? - s.lambda.eval(&env)? * u;
                Ok((l, v / (2.0 * s.alpha)))
            }
            Kind::General(g) => {
                let p = solve_momentum(g, x, u, v)?;
                let l = p * v - g.h.eval(&Env::new(x, u, p))?;
                Ok((l, p))
            }
        }
    }

    /// ∂L/∂u at (x, u, v), which equals −∂H/∂u at the maximizing momentum.
    pub fn lagrangian_du(&self, x: f64, u: f64, v: f64) -> Result<f64, ModelError> {
        let (_, p) = self.lagrangian(x, u, v)?;
        Ok(-self.gradient(x, u, p)?.hu)
    }

    pub fn subsolution_check(&self, field: &ScalarField, strict: bool) -> SubsolutionReport {
        self.subsolution_check_tol(field, strict, field.grid().dx())
    }

    /// At every node take the smaller of H over the two one-sided slopes;
    /// the field passes when the largest such value is at most `tol`
    /// (strictly negative when `strict`).
    pub fn subsolution_check_tol(
        &self,
        field: &ScalarField,
        strict: bool,
        tol: f64,
    ) -> SubsolutionReport {
        let grid = field.grid();
        let n = grid.n();
        let dx = grid.dx();
        let mut max_residual = f64::NEG_INFINITY;
        let mut residuals = Vec::with_capacity(n);
        let mut domain_failures = Vec::new();
        for i in 0..n {
            let u = field.get(i);
            let back = (u - field.get((i + n - 1) % n)) / dx;
            let fwd = (field.get((i + 1) % n) - u) / dx;
            let x = grid.x(i);
            let r = match (self.hamiltonian(x, u, back), self.hamiltonian(x, u, fwd)) {
                (Ok(a), Ok(b)) => a.min(b),
                _ => {
                    domain_failures.push(i);
                    f64::INFINITY
                }
            };
            residuals.push(r);
            max_residual = max_residual.max(r);
        }
        let violating: Vec<usize> = residuals
            .iter()
            .enumerate()
            .filter(|(_, &r)| if strict { r >= 0.0 } else { r > tol })
            .map(|(i, _)| i)
            .collect();
        SubsolutionReport {
            passed: violating.is_empty(),
            max_residual,
            violating,
            domain_failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsolutionReport {
    pub passed: bool,
    pub max_residual: f64,
    pub violating: Vec<usize>,
    pub domain_failures: Vec<usize>,
}

/// Solve ∂H/∂p(x, u, p) = v: bracket, then Newton safeguarded by bisection.
fn solve_momentum(g: &General, x: f64, u: f64, v: f64) -> Result<f64, ModelError> {
    let fail = |reason: String| ModelError::Legendre { x, u, v, reason };
    let hp = |p: f64| g.hp.eval(&Env::new(x, u, p));
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut widen = 0;
    while hp(lo)? > v || hp(hi)? < v {
        lo *= 2.0;
        hi *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(fail("could not bracket the momentum".into()));
        }
    }
    let mut p = 0.0_f64.clamp(lo, hi);
    for _ in 0..200 {
        let r = hp(p)? - v;
        if r.abs() <= 1e-14 * (1.0 + v.abs()) {
            return Ok(p);
        }
        if r > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        let d = g.hpp.eval(&Env::new(x, u, p))?;
        let newton = p - r / d;
        p = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + p.abs()) {
            return Ok(p);
        }
    }
    Err(fail("Newton iteration did not converge".into()))
}
