//! Run configuration: one JSON file per experiment.

use std::path::{Path, PathBuf};

use kam::geometry::{PeriodicGrid, ScalarField};
use kam::model::{expr, ContactModel, Env, ModelBounds, Var};
use kam::variational::{LaxParams, LimitOptions, DEFAULT_TAU, DEFAULT_U_CLIP, DEFAULT_V_MAX};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum ModelSpec {
    /// H = alpha p² + potential(x) + rate(x) u
    SeparableQuadratic {
        alpha: f64,
        potential: String,
        rate: String,
    },
    General {
        hamiltonian: String,
        #[serde(default)]
        u_bound: Option<f64>,
        #[serde(default)]
        p_bound: Option<f64>,
    },
}

impl ModelSpec {
    pub fn example() -> ModelSpec {
        ModelSpec::SeparableQuadratic {
            alpha: 1.0,
            potential: "-0.25".into(),
            rate: "sin(x)".into(),
        }
    }

    pub fn build(&self) -> Result<ContactModel, Failure> {
        let built = match self {
            ModelSpec::SeparableQuadratic { alpha, potential, rate } => {
                ContactModel::separable(*alpha, potential, rate)
            }
            ModelSpec::General {
                hamiltonian,
                u_bound,
                p_bound,
            } => {
                let d = ModelBounds::default();
                let bounds = ModelBounds {
                    u: u_bound.unwrap_or(d.u),
                    p: p_bound.unwrap_or(d.p),
                };
                if !(bounds.u > 0.0 && bounds.p > 0.0) {
                    return Err(Failure::Config("model bounds must be positive".into()));
                }
                ContactModel::general_with_bounds(hamiltonian, bounds)
            }
        };
        built.map_err(|e| Failure::Config(format!("model: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub tau: f64,
    pub v_max: f64,
    pub u_clip: f64,
    pub tol: f64,
    pub t_max: f64,
    pub window: f64,
    /// defaults to 5 Δx
    pub char_tol: Option<f64>,
    pub class_tol: f64,
    pub accept_tol: f64,
    pub seed: u64,
    /// random cases per property in `verify`
    pub trials: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tau: DEFAULT_TAU,
            v_max: DEFAULT_V_MAX,
            u_clip: DEFAULT_U_CLIP,
            tol: 1e-7,
            t_max: 200.0,
            window: 1.0,
            char_tol: None,
            class_tol: 1e-3,
            accept_tol: 1e-2,
            seed: 0,
            trials: 100,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelSpec,
    grid: GridSpec,
    #[serde(default)]
    numerics: Numerics,
    #[serde(default)]
    out: Option<String>,
    /// initial field used when no --phi is given
    #[serde(default)]
    phi: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ModelSpec,
    pub model: ContactModel,
    pub grid: PeriodicGrid,
    pub numerics: Numerics,
    pub out: Option<PathBuf>,
    pub phi: Option<String>,
    pub sha256: String,
    pub threads: usize,
    pub notices: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let raw: RawConfig =
            serde_json::from_slice(&bytes).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let threads = thread_cap()?;
        RunConfig::from_parts(raw.model, raw.grid, raw.numerics, raw.out.map(PathBuf::from), raw.phi, sha256, threads)
    }

    pub fn from_parts(
        spec: ModelSpec,
        grid: GridSpec,
        mut numerics: Numerics,
        out: Option<PathBuf>,
        phi: Option<String>,
        sha256: String,
        threads: usize,
    ) -> Result<RunConfig, Failure> {
        let grid = PeriodicGrid::new(grid.n).map_err(|e| Failure::Config(format!("grid: {e}")))?;
        let positive = [
            ("tau", numerics.tau),
            ("v_max", numerics.v_max),
            ("u_clip", numerics.u_clip),
            ("tol", numerics.tol),
            ("t_max", numerics.t_max),
            ("window", numerics.window),
            ("char_tol", numerics.char_tol.unwrap_or(1.0)),
            ("class_tol", numerics.class_tol),
            ("accept_tol", numerics.accept_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Failure::Config(format!("numerics.{name} must be positive and finite, got {v}")));
            }
        }
        if numerics.trials == 0 {
            return Err(Failure::Config("numerics.trials must be at least 1".into()));
        }
        let model = spec.build()?.with_v_max(numerics.v_max);
        let mut notices: Vec<String> = model.warnings().iter().map(|w| format!("warning: {w}")).collect();
        let lambda = model.lambda_bound();
        let requested = numerics.tau;
        while numerics.tau * lambda > 0.5 {
            numerics.tau *= 0.5;
        }
        if numerics.tau != requested {
            notices.push(format!(
                "notice: tau shrunk from {requested} to {} so that tau * Lambda <= 1/2 (Lambda = {lambda})",
                numerics.tau
            ));
        }
        Ok(RunConfig {
            spec,
            model,
            grid,
            numerics,
            out,
            phi,
            sha256,
            threads,
            notices,
        })
    }

    pub fn params(&self) -> LaxParams {
        self.params_on(self.grid)
    }

    pub fn params_on(&self, grid: PeriodicGrid) -> LaxParams {
        LaxParams::new(grid, self.numerics.tau, self.numerics.v_max)
            .with_u_clip(self.numerics.u_clip)
            .with_threads(self.threads)
    }

    pub fn limit(&self) -> LimitOptions {
        LimitOptions {
            tol: self.numerics.tol,
            t_max: self.numerics.t_max,
            window: self.numerics.window,
        }
    }

    pub fn char_tol(&self) -> f64 {
        self.numerics.char_tol.unwrap_or(5.0 * self.grid.dx())
    }

    /// `--phi` value: an expression in x, or `@path` to a field CSV.
    pub fn field(&self, source: &str) -> Result<ScalarField, Failure> {
        if let Some(path) = source.strip_prefix('@') {
            let text =
                std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("phi file {path}: {e}")))?;
            let f = ScalarField::from_csv(&text).map_err(|e| Failure::Config(format!("phi file {path}: {e}")))?;
            if f.grid().n() != self.grid.n() {
                return Err(Failure::Config(format!(
                    "phi file {path} has {} nodes, grid has {}",
                    f.grid().n(),
                    self.grid.n()
                )));
            }
            return Ok(f);
        }
        let e = expr::parse_in(source, &[Var::X]).map_err(|e| Failure::Config(format!("phi: {e}")))?;
        let mut values = Vec::with_capacity(self.grid.n());
        for x in self.grid.nodes() {
            let v = e
                .eval(&Env::new(x, 0.0, 0.0))
                .map_err(|err| Failure::Config(format!("phi: {err}")))?;
            if !v.is_finite() {
                return Err(Failure::Config(format!("phi is not finite at x = {x}")));
            }
            values.push(v);
        }
        ScalarField::new(self.grid, values).map_err(|e| Failure::Config(format!("phi: {e}")))
    }
}

/// Worker count: available cores, capped by CONTACT_KAM_THREADS.
pub fn thread_cap() -> Result<usize, Failure> {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("CONTACT_KAM_THREADS") {
        Ok(s) => {
            let cap: usize = s
                .trim()
                .parse()
                .map_err(|_| Failure::Config(format!("CONTACT_KAM_THREADS must be a positive integer, got {s:?}")))?;
            if cap == 0 {
                return Err(Failure::Config("CONTACT_KAM_THREADS must be at least 1".into()));
            }
            Ok(cores.min(cap))
        }
        Err(_) => Ok(cores),
    }
}
