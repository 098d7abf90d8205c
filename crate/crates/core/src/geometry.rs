//! Uniform periodic grid on the circle [-π, π) and fields sampled on it.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs an even node count of at least 16, got {0}")]
    BadSize(usize),
    #[error("field has {got} values but the grid has {n} nodes")]
    Length { got: usize, n: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("mollifier width {width} is below the grid spacing {dx}")]
    Width { width: f64, dx: f64 },
    #[error("field csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Wrap an angle into [-π, π).
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TWO_PI) - PI;
    // rem_euclid can return exactly 2π for tiny negative inputs
    if y >= PI {
        y - TWO_PI
    } else {
        y
    }
}

/// Signed shortest displacement from `x` to `y`, in [-π, π).
pub fn signed_offset(x: f64, y: f64) -> f64 {
    wrap_angle(y - x)
}

/// Geodesic distance on the circle.
pub fn periodic_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 16 || n % 2 != 0 {
            return Err(GridError::BadSize(n));
        }
        Ok(PeriodicGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -PI + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// Index of the node nearest to `x` (after wrapping).
    pub fn nearest(&self, x: f64) -> usize {
        let t = (wrap_angle(x) + PI) / self.dx();
        (t.round() as usize) % self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n() {
            return Err(GridError::Length {
                got: values.len(),
                n: grid.n(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        ScalarField::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Result<Self, GridError> {
        ScalarField::new(grid, vec![c; grid.n()])
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField, GridError> {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Periodic piecewise-linear interpolation, exact at nodes.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.grid.n();
        let t = (wrap_angle(x) + PI) / self.grid.dx();
        let r = t.round();
        if (t - r).abs() < 1e-9 {
            return self.values[(r as usize) % n];
        }
        let i = t.floor();
        let frac = t - i;
        let i = (i as usize) % n;
        let j = (i + 1) % n;
        (1.0 - frac) * self.values[i] + frac * self.values[j]
    }

    /// Circular convolution with a normalized Gaussian of standard deviation
    /// `width`, truncated at three deviations.
    pub fn mollify(&self, width: f64) -> Result<ScalarField, GridError> {
        let dx = self.grid.dx();
        if width < dx * (1.0 - 1e-12) {
            return Err(GridError::Width { width, dx });
        }
        let half = (3.0 * width / dx).ceil() as isize;
        let mut w: Vec<f64> = (-half..=half)
            .map(|k| {
                let s = k as f64 * dx / width;
                (-0.5 * s * s).exp()
            })
            .collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        let (lo, hi) = (self.min(), self.max());
        let out = (0..self.grid.n() as isize)
            .map(|i| {
                let mut acc = 0.0;
                for (k, wk) in (-half..=half).zip(&w) {
                    acc += wk * self.values[self.grid.wrap(i + k)];
                }
                // guard the convex-combination bounds against rounding
                acc.clamp(lo, hi)
            })
            .collect();
        ScalarField::new(self.grid, out)
    }

    pub fn pseudograph_sample(&self, kink_tol: f64) -> PseudographSample {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let nodes = (0..n)
            .map(|i| {
                let prev = self.values[(i + n - 1) % n];
                let next = self.values[(i + 1) % n];
                let left = (self.values[i] - prev) / dx;
                let right = (next - self.values[i]) / dx;
                PseudographNode {
                    index: i,
                    x: self.grid.x(i),
                    u: self.values[i],
                    left,
                    right,
                    differentiable: (right - left).abs() < kink_tol,
                }
            })
            .collect();
        PseudographSample { nodes }
    }

    /// Central-difference slope at node `i`.
    pub fn slope(&self, i: usize) -> f64 {
        let n = self.grid.n();
        (self.values[(i + 1) % n] - self.values[(i + n - 1) % n]) / (2.0 * self.grid.dx())
    }

    /// Slope of the linear interpolant at `x` (central difference at nodes).
    pub fn slope_at(&self, x: f64) -> f64 {
        let n = self.grid.n();
        let t = (wrap_angle(x) + PI) / self.grid.dx();
        let r = t.round();
        if (t - r).abs() < 1e-9 {
            return self.slope((r as usize) % n);
        }
        let i = (t.floor() as usize) % n;
        (self.values[(i + 1) % n] - self.values[i]) / self.grid.dx()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.grid.x(i), v);
        }
        s
    }

    /// Reads the `x,value` format; the node count is the row count.
    pub fn from_csv(text: &str) -> Result<ScalarField, GridError> {
        let mut values = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "x,value" => {}
            _ => {
                return Err(GridError::Csv {
                    line: 1,
                    message: "expected header `x,value`".into(),
                })
            }
        }
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(_), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(GridError::Csv {
                    line: ln + 1,
                    message: "expected two columns".into(),
                });
            };
            let v: f64 = v.trim().parse().map_err(|_| GridError::Csv {
                line: ln + 1,
                message: format!("bad number `{v}`"),
            })?;
            values.push(v);
        }
        let grid = PeriodicGrid::new(values.len())?;
        ScalarField::new(grid, values)
    }
}

/// Default kink tolerance: ten cells times a curvature bound.
pub fn default_kink_tol(dx: f64, curvature: f64) -> f64 {
    10.0 * dx * curvature.max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudographNode {
    pub index: usize,
    pub x: f64,
    pub u: f64,
    /// backward difference quotient
    pub left: f64,
    /// forward difference quotient
    pub right: f64,
    pub differentiable: bool,
}

impl PseudographNode {
    /// One matched jet at a differentiable node, both one-sided jets at a kink.
    pub fn momenta(&self) -> Vec<f64> {
        if self.differentiable {
            vec![0.5 * (self.left + self.right)]
        } else {
            vec![self.left, self.right]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudographSample {
    pub nodes: Vec<PseudographNode>,
}

impl PseudographSample {
    pub fn jets(&self) -> Vec<(f64, f64, f64)> {
        self.nodes
            .iter()
            .flat_map(|nd| nd.momenta().into_iter().map(move |p| (nd.x, nd.u, p)))
            .collect()
    }

    pub fn all_differentiable(&self) -> bool {
        self.nodes.iter().all(|n| n.differentiable)
    }

    /// Phase-space distance (max norm, periodic in x) from a point to the sample.
    pub fn distance(&self, x: f64, u: f64, p: f64) -> f64 {
        self.jets()
            .iter()
            .map(|&(a, b, c)| {
                periodic_distance(a, x)
                    .max((b - u).abs())
                    .max((c - p).abs())
            })
            .fold(f64::INFINITY, f64::min)
    }
}
