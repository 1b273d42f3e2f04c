//! Uniform-grid functions on `[0, 1]`, coefficient fields, finite-difference
//! stencils and composite Simpson quadrature.
//!
//! Every engine in the crate resamples onto a caller-chosen uniform grid
//! `x_i = i / (n - 1)`; nothing here adapts the mesh.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of Simpson panels used by [`integrate`].
pub const DEFAULT_QUAD_PANELS: usize = 512;

/// Minimum grid size accepted by [`GridFunction`].
pub const MIN_GRID: usize = 3;

/// Anything that exposes a contiguous run of samples.
pub trait Samples {
    fn samples(&self) -> &[f64];
}

impl Samples for [f64] {
    fn samples(&self) -> &[f64] {
        self
    }
}

impl Samples for Vec<f64> {
    fn samples(&self) -> &[f64] {
        self
    }
}

/// A scalar function of one real variable.
pub trait ScalarFn {
    fn eval(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ScalarFn for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Real-valued samples on the uniform grid `x_i = i/(n-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunctionRepr", into = "GridFunctionRepr")]
pub struct GridFunction {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridFunctionRepr {
    n: usize,
    values: Vec<f64>,
}

impl TryFrom<GridFunctionRepr> for GridFunction {
    type Error = Error;

    fn try_from(repr: GridFunctionRepr) -> Result<Self> {
        if repr.n != repr.values.len() {
            return Err(Error::LengthMismatch {
                expected: repr.n,
                got: repr.values.len(),
            });
        }
        GridFunction::new(repr.values)
    }
}

impl From<GridFunction> for GridFunctionRepr {
    fn from(g: GridFunction) -> Self {
        GridFunctionRepr {
            n: g.values.len(),
            values: g.values,
        }
    }
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_GRID {
            return Err(Error::GridTooSmall {
                min: MIN_GRID,
                got: values.len(),
            });
        }
        let h = 1.0 / (values.len() - 1) as f64;
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: i as f64 * h,
                value: v,
            });
        }
        Ok(GridFunction { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Samples a closure on an `n`-point grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::GridTooSmall { min: MIN_GRID, got: n });
        }
        let h = 1.0 / (n - 1) as f64;
        Self::new((0..n).map(|i| f(grid_point(i, n, h))).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        grid_point(i, self.n(), self.step())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Cubic Lagrange interpolation on the four nearest nodes; `x` is clamped
    /// to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        cubic_interp(&self.values, 0.0, self.step(), x)
    }

    /// Piecewise-linear interpolation.
    pub fn eval_linear(&self, x: f64) -> f64 {
        linear_interp(&self.values, 0.0, self.step(), x)
    }

    pub fn scale(&self, alpha: f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `alpha * self + other`.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> Result<GridFunction> {
        self.check_len(other)?;
        Ok(GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        other.axpy(-1.0, self)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_len(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn check_len(&self, other: &GridFunction) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(())
    }

    /// Two-column `x,value` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.x(i), v);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "x,value" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `x,value`, found {other:?}"
                )))
            }
        }
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {}: missing comma", lineno + 2)))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            values.push(v);
        }
        Self::new(values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Samples for GridFunction {
    fn samples(&self) -> &[f64] {
        &self.values
    }
}

/// Grid abscissa with exact endpoints.
pub(crate) fn grid_point(i: usize, n: usize, h: f64) -> f64 {
    if i + 1 == n {
        1.0
    } else {
        i as f64 * h
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Linear interpolation of samples `values[i]` at `origin + i * h`.
pub(crate) fn linear_interp(values: &[f64], origin: f64, h: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    let s = ((x - origin) / h).clamp(0.0, last as f64);
    let i = (s.floor() as usize).min(last - 1);
    let w = s - i as f64;
    (1.0 - w) * values[i] + w * values[i + 1]
}

/// Four-point Lagrange interpolation of samples at `origin + i * h`.
pub(crate) fn cubic_interp(values: &[f64], origin: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    let last = n - 1;
    let s = ((x - origin) / h).clamp(0.0, last as f64);
    let nearest = s.round();
    if (s - nearest).abs() < 1e-13 {
        return values[nearest as usize];
    }
    if n < 4 {
        return linear_interp(values, origin, h, x);
    }
    let i = s.floor() as usize;
    let start = i.saturating_sub(1).min(n - 4);
    let t = s - start as f64;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for k in 0..4 {
            if k != j {
                w *= (t - k as f64) / (j as f64 - k as f64);
            }
        }
        acc += w * values[start + j];
    }
    acc
}

/// Coefficient of a differential operator, evaluable anywhere on `[0, 1]`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientField {
    Constant { value: f64 },
    Sampled { samples: GridFunction },
    /// Coefficients in increasing degree: `c0 + c1 x + c2 x^2 + ...`.
    Polynomial { coeffs: Vec<f64> },
    /// `amp * sin(freq * x) + offset`.
    Sinusoid { amp: f64, freq: f64, offset: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefficientField::Constant { value } => write!(f, "Constant({value})"),
            CoefficientField::Sampled { samples } => write!(f, "Sampled(n={})", samples.n()),
            CoefficientField::Polynomial { coeffs } => write!(f, "Polynomial({coeffs:?})"),
            CoefficientField::Sinusoid { amp, freq, offset } => {
                write!(f, "Sinusoid(amp={amp}, freq={freq}, offset={offset})")
            }
            CoefficientField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CoefficientField {
    pub fn constant(value: f64) -> Self {
        CoefficientField::Constant { value }
    }

    pub fn polynomial(coeffs: impl Into<Vec<f64>>) -> Self {
        CoefficientField::Polynomial {
            coeffs: coeffs.into(),
        }
    }

    pub fn sinusoid(amp: f64, freq: f64, offset: f64) -> Self {
        CoefficientField::Sinusoid { amp, freq, offset }
    }

    pub fn sampled(samples: GridFunction) -> Self {
        CoefficientField::Sampled { samples }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField::Custom(Arc::new(f))
    }

    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            CoefficientField::Constant { value } => *value,
            // Linear interpolation keeps sign information of the samples.
            CoefficientField::Sampled { samples } => samples.eval_linear(x),
            CoefficientField::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            CoefficientField::Sinusoid { amp, freq, offset } => amp * (freq * x).sin() + offset,
            CoefficientField::Custom(f) => f(x),
        }
    }

    /// Largest value over an `n`-point sampling.
    pub fn sampled_max(&self, n: usize) -> f64 {
        let h = 1.0 / (n.max(2) - 1) as f64;
        (0..n.max(2))
            .map(|i| self.value_at(grid_point(i, n.max(2), h)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest value over an `n`-point sampling, with its location.
    pub fn sampled_min(&self, n: usize) -> (f64, f64) {
        let n = n.max(2);
        let h = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = grid_point(i, n, h);
                (x, self.value_at(x))
            })
            .fold((0.0, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            })
    }
}

impl ScalarFn for CoefficientField {
    fn eval(&self, x: f64) -> f64 {
        self.value_at(x)
    }
}

/// Samples `f` at `x_i = i/(n-1)`.
pub fn sample(f: &CoefficientField, n: usize) -> Result<GridFunction> {
    if n < MIN_GRID {
        return Err(Error::GridTooSmall { min: MIN_GRID, got: n });
    }
    let h = 1.0 / (n - 1) as f64;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid_point(i, n, h);
        let v = f.value_at(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, value: v });
        }
        values.push(v);
    }
    Ok(GridFunction { values })
}

/// First derivative: centered differences inside, one-sided three-point
/// stencils at the ends. Second order everywhere.
pub fn derivative(phi: &GridFunction) -> GridFunction {
    GridFunction {
        values: first_difference(phi.values(), phi.step()),
    }
}

/// Second derivative: centered three-point stencil inside, one-sided
/// four-point stencils at the ends (three-point when `n == 3`).
pub fn second_derivative(phi: &GridFunction) -> GridFunction {
    GridFunction {
        values: second_difference(phi.values(), phi.step()),
    }
}

pub(crate) fn first_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    d[0] = (4.0 * (u[1] - u[0]) - (u[2] - u[0])) / (2.0 * h);
    d[n - 1] = (4.0 * (u[n - 1] - u[n - 2]) - (u[n - 1] - u[n - 3])) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d
}

pub(crate) fn second_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    }
    if n >= 4 {
        d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
        d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    } else {
        d[0] = d[1];
        d[n - 1] = d[1];
    }
    d
}

/// Composite Simpson estimate of `∫_lo^hi f` with `n_quad` panels, for
/// `lo, hi ∈ [0, 1]`.
pub fn integrate<F: ScalarFn + ?Sized>(f: &F, lo: f64, hi: f64, n_quad: usize) -> Result<f64> {
    for bound in [lo, hi] {
        if !(0.0..=1.0).contains(&bound) {
            return Err(Error::InvalidArgument(format!(
                "integration bound {bound} outside [0, 1]"
            )));
        }
    }
    simpson(f, lo, hi, n_quad)
}

/// Composite Simpson rule on an arbitrary finite interval. The sum is always
/// taken from the smaller to the larger bound, so swapping the bounds flips
/// the sign exactly.
pub(crate) fn simpson<F: ScalarFn + ?Sized>(f: &F, lo: f64, hi: f64, n_quad: usize) -> Result<f64> {
    if n_quad == 0 || n_quad % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "n_quad must be positive and even, got {n_quad}"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    let h = (b - a) / n_quad as f64;
    let mut acc = 0.0;
    for k in 0..=n_quad {
        let x = if k == n_quad { b } else { a + k as f64 * h };
        let v = f.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, value: v });
        }
        let w = if k == 0 || k == n_quad {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * v;
    }
    Ok(sign * acc * h / 3.0)
}
