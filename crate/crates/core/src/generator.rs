//! Recovery of `α`, `β`, `γ` in `(Aφ)(x) = α(x)φ''(x) + β(x)φ'(x) + γ(x)φ(x)`
//! from a black-box semigroup.
//!
//! Two extraction paths are computed at each interior probe `x`:
//!
//! * direct: `γ(x) = (A1)(x)`, `β(x) = (Ab^x)(x)`, `α(x) = (Aa^x)(x)` with the
//!   test functions of [`build_test_functions`];
//! * solve: a 2x2 system built from one fixed pair `φ, ψ` with
//!   `φ(½) = φ''(½) = 0, φ'(½) = 1` and `ψ(½) = ψ'(½) = 0, ψ''(½) = 1`,
//!   both with vanishing derivative at `0` and `1`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{first_difference, grid_point, second_difference, simpson, GridFunction};
use crate::lyapunov::{is_nondegenerate, Tolerance};
use crate::parabolic::{assemble, step, ParabolicProblem};
use crate::transport::{build_characteristics, semigroup_apply, CharacteristicMap, TransportProblem};

/// Default bump width around a probe point.
pub const DEFAULT_WIDTH: f64 = 0.2;
/// Probes stay this many grid steps away from the endpoints.
pub const PROBE_MARGIN: usize = 4;
/// Smallest `|d(x)|` accepted by the solve path.
pub const MIN_DETERMINANT: f64 = 1e-6;
/// Default report threshold for negative `α`.
pub const DEFAULT_TOL_ALPHA: f64 = 1e-3;

/// Simpson panels per integration segment.
const SEGMENT_PANELS: usize = 16;
/// Scale of the endpoint factor that makes test functions flat at `0`, `1`.
const ENDPOINT_SCALE: f64 = 0.2;

/// Time-`t` map of a strongly continuous semigroup on an `n`-point grid.
pub trait Semigroup: Sync {
    fn n(&self) -> usize;
    fn apply(&self, phi: &GridFunction, t: f64) -> Result<GridFunction>;
}

/// Implicit Euler with a single step of size `t`: `T(t) = (I - tL)⁻¹`.
#[derive(Debug, Clone)]
pub struct ParabolicSemigroup {
    pub problem: ParabolicProblem,
    pub n: usize,
}

impl ParabolicSemigroup {
    pub fn new(problem: ParabolicProblem, n: usize) -> Self {
        ParabolicSemigroup { problem, n }
    }
}

impl Semigroup for ParabolicSemigroup {
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, phi: &GridFunction, t: f64) -> Result<GridFunction> {
        if t == 0.0 {
            return Ok(phi.clone());
        }
        let op = assemble(&self.problem, self.n, t)?;
        step(phi, &op)
    }
}

/// Characteristics inside the region reached from the initial line, the
/// boundary feedback ODE elsewhere.
#[derive(Debug, Clone)]
pub struct TransportSemigroup {
    pub problem: TransportProblem,
    cmap: CharacteristicMap,
    substeps: usize,
}

impl TransportSemigroup {
    pub fn new(problem: TransportProblem, n: usize) -> Result<Self> {
        problem.validate(n)?;
        let cmap = build_characteristics(&problem.b, n)?;
        Ok(TransportSemigroup {
            problem,
            cmap,
            substeps: 64,
        })
    }

    pub fn characteristics(&self) -> &CharacteristicMap {
        &self.cmap
    }
}

impl Semigroup for TransportSemigroup {
    fn n(&self) -> usize {
        self.cmap.n()
    }

    fn apply(&self, phi: &GridFunction, t: f64) -> Result<GridFunction> {
        semigroup_apply(&self.problem, &self.cmap, phi, t, self.substeps)
    }
}

/// Wraps an oracle that cannot be called concurrently.
pub struct Serialized<F> {
    n: usize,
    inner: Mutex<F>,
}

impl<F> Serialized<F>
where
    F: FnMut(&GridFunction, f64) -> Result<GridFunction> + Send,
{
    pub fn new(n: usize, oracle: F) -> Self {
        Serialized {
            n,
            inner: Mutex::new(oracle),
        }
    }
}

impl<F> Semigroup for Serialized<F>
where
    F: FnMut(&GridFunction, f64) -> Result<GridFunction> + Send,
{
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, phi: &GridFunction, t: f64) -> Result<GridFunction> {
        let mut f = self
            .inner
            .lock()
            .map_err(|_| Error::InvalidArgument("semigroup oracle poisoned".into()))?;
        f(phi, t)
    }
}

/// Richardson-extrapolated difference quotient `2 D(t/2) - D(t)` with
/// `D(s) = (T(s)φ - φ) / s`.
#[allow(non_snake_case)]
pub fn estimate_A<S: Semigroup + ?Sized>(semigroup: &S, phi: &GridFunction, t_small: f64) -> Result<GridFunction> {
    if !(t_small > 0.0 && t_small.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_small must be positive, got {t_small}")));
    }
    if phi.n() != semigroup.n() {
        return Err(Error::LengthMismatch {
            expected: semigroup.n(),
            got: phi.n(),
        });
    }
    let full = semigroup.apply(phi, t_small)?;
    let half = semigroup.apply(phi, 0.5 * t_small)?;
    GridFunction::new(
        phi.values()
            .iter()
            .zip(full.values().iter().zip(half.values()))
            .map(|(&p, (&f, &h))| 2.0 * (h - p) / (0.5 * t_small) - (f - p) / t_small)
            .collect(),
    )
}

/// Smoothstep `6u⁵ - 15u⁴ + 10u³` clamped to `[0, 1]`.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// The test functions `a^ξ`, `b^ξ`, `c^ξ` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct TestTriple {
    pub xi: f64,
    pub width: f64,
    pub a_xi: GridFunction,
    pub b_xi: GridFunction,
    pub c_xi: GridFunction,
    /// Set at `ξ ∈ {0, 1}`, where `b^ξ` is built flat at the endpoint
    /// instead of having unit slope there.
    pub boundary_variant: bool,
}

/// Weight `m` with `a^ξ' = (x - ξ) m` and `b^ξ' = m`.
#[derive(Debug, Clone, Copy)]
struct Weight {
    xi: f64,
    plateau: f64,
    reach: f64,
    boundary: Option<bool>,
}

impl Weight {
    fn new(xi: f64, width: f64) -> Self {
        let dist = xi.min(1.0 - xi);
        let boundary = if xi == 0.0 {
            Some(false)
        } else if xi == 1.0 {
            Some(true)
        } else {
            None
        };
        let reach = if boundary.is_some() { width } else { width.min(dist) };
        Weight {
            xi,
            plateau: 0.5 * reach,
            reach,
            boundary,
        }
    }

    fn bump(&self, x: f64) -> f64 {
        let d = (x - self.xi).abs();
        if d <= self.plateau {
            1.0
        } else {
            smoothstep((self.reach - d) / (self.reach - self.plateau))
        }
    }

    fn endpoint(&self, x: f64) -> f64 {
        let left = smoothstep(x / ENDPOINT_SCALE);
        let right = smoothstep((1.0 - x) / ENDPOINT_SCALE);
        match self.boundary {
            Some(false) => right,
            Some(true) => left,
            None => left * right,
        }
    }

    fn m(&self, x: f64) -> f64 {
        let b = self.bump(x);
        b + (1.0 - b) * self.endpoint(x)
    }

    /// Slope of `b^ξ`: `m`, or `m` times a factor vanishing at `ξ` for the
    /// endpoint variant.
    fn b_slope(&self, x: f64) -> f64 {
        match self.boundary {
            Some(false) => self.m(x) * smoothstep(x / self.reach),
            Some(true) => self.m(x) * smoothstep((1.0 - x) / self.reach),
            None => self.m(x),
        }
    }
}

/// `∫_ξ^{x_i} f` on every grid node, accumulated outward from `ξ`.
fn primitive(xi: f64, n: usize, exact_within: f64, exact: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let h = 1.0 / (n - 1) as f64;
    let mut out = vec![0.0; n];
    let xs: Vec<f64> = (0..n).map(|i| grid_point(i, n, h)).collect();
    let right: Vec<usize> = (0..n).filter(|&i| xs[i] >= xi).collect();
    let left: Vec<usize> = (0..n).rev().filter(|&i| xs[i] < xi).collect();
    for side in [right, left] {
        let mut last_x = xi;
        let mut acc = 0.0;
        for i in side {
            let x = xs[i];
            if (x - xi).abs() <= exact_within {
                out[i] = exact(x);
                acc = out[i];
                last_x = x;
                continue;
            }
            if (last_x - xi).abs() < exact_within {
                let edge = xi + exact_within * (x - xi).signum();
                acc = exact(edge);
                last_x = edge;
            }
            acc += simpson(&f, last_x, x, SEGMENT_PANELS)?;
            out[i] = acc;
            last_x = x;
        }
    }
    Ok(out)
}

pub fn build_test_functions(xi: f64, n: usize) -> Result<TestTriple> {
    build_test_functions_with(xi, n, DEFAULT_WIDTH)
}

/// `a^ξ(x) = ∫_ξ^x (s - ξ) m(s) ds`, `b^ξ(x) = ∫_ξ^x m(s) ds`, `c^ξ ≡ 1`,
/// where `m ≡ 1` within `width / 2` of `ξ` (capped by the distance to the
/// nearer endpoint), `m > 0` on `(0, 1)` and `m` vanishes at the endpoints
/// other than `ξ`, so `a^ξ` and `b^ξ` are quadratic and linear near `ξ` and
/// flat at `0` and `1`.
pub fn build_test_functions_with(xi: f64, n: usize, width: f64) -> Result<TestTriple> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::ProbeOutOfRange(xi));
    }
    if !(width > 0.0 && width <= 0.5) {
        return Err(Error::InvalidArgument(format!("width must lie in (0, 0.5], got {width}")));
    }
    if n < 8 {
        return Err(Error::GridTooSmall { min: 8, got: n });
    }
    let w = Weight::new(xi, width);
    let boundary_variant = w.boundary.is_some();
    let a = primitive(xi, n, w.plateau, |x| 0.5 * (x - xi) * (x - xi), |s| (s - xi) * w.m(s))?;
    let b = if boundary_variant {
        primitive(xi, n, 0.0, |_| 0.0, |s| w.b_slope(s))?
    } else {
        primitive(xi, n, w.plateau, |x| x - xi, |s| w.m(s))?
    };
    Ok(TestTriple {
        xi,
        width,
        a_xi: GridFunction::new(a)?,
        b_xi: GridFunction::new(b)?,
        c_xi: GridFunction::new(vec![1.0; n])?,
        boundary_variant,
    })
}

impl TestTriple {
    fn node(&self) -> Result<usize> {
        let n = self.a_xi.n();
        let pos = self.xi * (n - 1) as f64;
        let i = pos.round();
        if (pos - i).abs() > 1e-9 {
            return Err(Error::Precondition(format!("ξ = {} is not a grid node", self.xi)));
        }
        Ok(i as usize)
    }

    /// Checks the defining conditions with the grid derivative stencils.
    /// Returns a description of the first failure.
    pub fn verify(&self) -> Result<()> {
        let i = self.node()?;
        let n = self.a_xi.n();
        let h = self.a_xi.step();
        let a = self.a_xi.values();
        let b = self.b_xi.values();
        let da = first_difference(a, h);
        let d2a = second_difference(a, h);
        let db = first_difference(b, h);
        let fail = |what: String| Err(Error::Precondition(what));
        if a[i].abs() > 1e-10 || da[i].abs() > 1e-10 || b[i].abs() > 1e-10 {
            return fail(format!("a, a', b at ξ: {}, {}, {}", a[i], da[i], b[i]));
        }
        if (d2a[i] - 1.0).abs() > 1e-8 || (self.c_xi.values()[i] - 1.0).abs() > 1e-8 {
            return fail(format!("a'' at ξ: {}", d2a[i]));
        }
        if !self.boundary_variant && (db[i] - 1.0).abs() > 1e-8 {
            return fail(format!("b' at ξ: {}", db[i]));
        }
        for j in 1..n - 1 {
            if j != i {
                let x = grid_point(j, n, h);
                if da[j] * (x - self.xi) <= 0.0 {
                    return fail(format!("sign condition fails at x = {x}"));
                }
            }
        }
        Ok(())
    }
}

/// The fixed pair used by the solve path, with closed-form derivatives.
#[derive(Debug, Clone, Copy)]
pub struct GlobalPair;

impl GlobalPair {
    /// `φ(x) = -cos(πx)/π`.
    pub fn phi(x: f64) -> f64 {
        -(PI * x).cos() / PI
    }

    pub fn dphi(x: f64) -> f64 {
        (PI * x).sin()
    }

    pub fn d2phi(x: f64) -> f64 {
        PI * (PI * x).cos()
    }

    /// `ψ(x) = ∫_{1/2}^x (s - ½) sin(πs) ds`.
    pub fn psi(x: f64) -> f64 {
        -(x - 0.5) * (PI * x).cos() / PI + ((PI * x).sin() - 1.0) / (PI * PI)
    }

    pub fn dpsi(x: f64) -> f64 {
        (x - 0.5) * (PI * x).sin()
    }

    pub fn d2psi(x: f64) -> f64 {
        (PI * x).sin() + PI * (x - 0.5) * (PI * x).cos()
    }

    /// `d(x) = φ'ψ'' - ψ'φ'' = sin²(πx)`.
    pub fn det(x: f64) -> f64 {
        Self::dphi(x) * Self::d2psi(x) - Self::dpsi(x) * Self::d2phi(x)
    }
}

/// Options for [`extract_coefficients_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub width: f64,
    /// Use every `stride`-th interior node as a probe.
    pub stride: usize,
    pub tol_alpha: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            width: DEFAULT_WIDTH,
            stride: 1,
            tol_alpha: DEFAULT_TOL_ALPHA,
        }
    }
}

/// Recovered coefficients on the probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEstimate {
    pub n: usize,
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha_solve: Vec<f64>,
    pub beta_solve: Vec<f64>,
    /// `α(0)` and `α(1)` from the endpoint test functions.
    pub alpha_endpoints: [f64; 2],
    pub t_small: f64,
    /// Largest discrepancy between the two paths.
    pub residual: f64,
    pub width: f64,
    pub tol_alpha: f64,
}

/// JSON summary of a [`GeneratorEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSummary {
    pub n: usize,
    pub probes: usize,
    pub t_small: f64,
    pub residual: f64,
    pub width: f64,
    pub tol_alpha: f64,
    pub min_det: f64,
    pub min_alpha: f64,
    pub alpha_nonnegative: bool,
    pub alpha_endpoints: [f64; 2],
}

impl GeneratorEstimate {
    /// Smallest recovered `α` over both paths and the endpoints.
    pub fn min_alpha(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.alpha_solve)
            .chain(&self.alpha_endpoints)
            .fold(f64::INFINITY, |m, &a| m.min(a))
    }

    pub fn alpha_nonnegative(&self) -> bool {
        self.min_alpha() >= -self.tol_alpha
    }

    /// Indices of probes inside `[lo, hi]`.
    pub fn probes_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.x.len()).filter(move |&k| self.x[k] >= lo && self.x[k] <= hi)
    }

    /// `x,alpha,beta,gamma` CSV of the direct path.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,alpha,beta,gamma\n");
        for k in 0..self.x.len() {
            let _ = writeln!(out, "{},{},{},{}", self.x[k], self.alpha[k], self.beta[k], self.gamma[k]);
        }
        out
    }

    /// Both paths side by side.
    pub fn paths_csv(&self) -> String {
        let mut out = String::from("x,alpha,beta,alpha_solve,beta_solve\n");
        for k in 0..self.x.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.x[k], self.alpha[k], self.beta[k], self.alpha_solve[k], self.beta_solve[k]
            );
        }
        out
    }

    pub fn summary(&self) -> GeneratorSummary {
        GeneratorSummary {
            n: self.n,
            probes: self.x.len(),
            t_small: self.t_small,
            residual: self.residual,
            width: self.width,
            tol_alpha: self.tol_alpha,
            min_det: MIN_DETERMINANT,
            min_alpha: self.min_alpha(),
            alpha_nonnegative: self.alpha_nonnegative(),
            alpha_endpoints: self.alpha_endpoints,
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

pub fn extract_coefficients<S: Semigroup + ?Sized>(semigroup: &S, t_small: f64) -> Result<GeneratorEstimate> {
    extract_coefficients_with(semigroup, t_small, &ProbeOptions::default())
}

/// Runs both extraction paths on the interior probes `[4h, 1 - 4h]`.
pub fn extract_coefficients_with<S: Semigroup + ?Sized>(
    semigroup: &S,
    t_small: f64,
    opts: &ProbeOptions,
) -> Result<GeneratorEstimate> {
    let n = semigroup.n();
    if n < 2 * PROBE_MARGIN + 1 {
        return Err(Error::GridTooSmall {
            min: 2 * PROBE_MARGIN + 1,
            got: n,
        });
    }
    let h = 1.0 / (n - 1) as f64;
    let probes: Vec<usize> = (PROBE_MARGIN..=n - 1 - PROBE_MARGIN).step_by(opts.stride.max(1)).collect();

    let ones = GridFunction::new(vec![1.0; n])?;
    let gamma_full = estimate_A(semigroup, &ones, t_small)?;

    let phi = GridFunction::from_fn(n, GlobalPair::phi)?;
    let psi = GridFunction::from_fn(n, GlobalPair::psi)?;
    let a_phi = estimate_A(semigroup, &phi, t_small)?;
    let a_psi = estimate_A(semigroup, &psi, t_small)?;

    let direct: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|&i| {
            let triple = build_test_functions_with(grid_point(i, n, h), n, opts.width)?;
            let aa = estimate_A(semigroup, &triple.a_xi, t_small)?;
            let ab = estimate_A(semigroup, &triple.b_xi, t_small)?;
            Ok((aa.values()[i], ab.values()[i]))
        })
        .collect::<Result<_>>()?;

    let mut est = GeneratorEstimate {
        n,
        x: Vec::with_capacity(probes.len()),
        alpha: Vec::with_capacity(probes.len()),
        beta: Vec::with_capacity(probes.len()),
        gamma: Vec::with_capacity(probes.len()),
        alpha_solve: Vec::with_capacity(probes.len()),
        beta_solve: Vec::with_capacity(probes.len()),
        alpha_endpoints: [0.0; 2],
        t_small,
        residual: 0.0,
        width: opts.width,
        tol_alpha: opts.tol_alpha,
    };
    for (k, &i) in probes.iter().enumerate() {
        let x = grid_point(i, n, h);
        let d = GlobalPair::det(x);
        if d.abs() < MIN_DETERMINANT {
            return Err(Error::Conditioning { x, d });
        }
        let g = gamma_full.values()[i];
        let rphi = a_phi.values()[i] - phi.values()[i] * g;
        let rpsi = a_psi.values()[i] - psi.values()[i] * g;
        let beta_s = (rphi * GlobalPair::d2psi(x) - rpsi * GlobalPair::d2phi(x)) / d;
        let alpha_s = (rpsi * GlobalPair::dphi(x) - rphi * GlobalPair::dpsi(x)) / d;
        let (alpha_d, beta_d) = direct[k];
        est.x.push(x);
        est.alpha.push(alpha_d);
        est.beta.push(beta_d);
        est.gamma.push(g);
        est.alpha_solve.push(alpha_s);
        est.beta_solve.push(beta_s);
        est.residual = est
            .residual
            .max((alpha_d - alpha_s).abs())
            .max((beta_d - beta_s).abs());
    }

    for (slot, (xi, node)) in [(0.0, 0), (1.0, n - 1)].into_iter().enumerate() {
        let triple = build_test_functions_with(xi, n, opts.width)?;
        est.alpha_endpoints[slot] = estimate_A(semigroup, &triple.a_xi, t_small)?.values()[node];
    }
    Ok(est)
}

/// `ψ(x) = (x - ξ)³ w(x)` with the plateau bump `w` of [`build_test_functions_with`].
pub fn standard_psi(xi: f64, n: usize, width: f64) -> Result<GridFunction> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("ξ must lie in (0, 1), got {xi}")));
    }
    let w = Weight::new(xi, width);
    GridFunction::from_fn(n, |x| (x - xi).powi(3) * w.bump(x))
}

/// Default triple-zero tolerance for [`lambda_degeneracy_scan`]: `10 h sup|ψ|`.
pub fn default_triple_zero_tol(psi: &GridFunction) -> f64 {
    10.0 * psi.step() * psi.sup_norm()
}

/// Fraction of `λ` for which `a^ξ + λψ` has a degenerate zero on the grid
/// outside a window of three steps around `ξ`.
pub fn lambda_degeneracy_scan(xi: f64, psi: &GridFunction, lambdas: &[f64], tol: f64) -> Result<f64> {
    let n = psi.n();
    let h = psi.step();
    let i = (xi / h).round() as usize;
    if (xi - grid_point(i, n, h)).abs() > 1e-9 || i == 0 || i >= n - 1 {
        return Err(Error::Precondition(format!("ξ = {xi} must be an interior grid node")));
    }
    let d1 = first_difference(psi.values(), h);
    let d2 = second_difference(psi.values(), h);
    let (p0, p1, p2) = (psi.values()[i], d1[i], d2[i]);
    if p0.abs() > tol || p1.abs() > tol || p2.abs() > tol {
        return Err(Error::Precondition(format!(
            "ψ must vanish to second order at ξ: ψ = {p0}, ψ' = {p1}, ψ'' = {p2}"
        )));
    }
    if lambdas.is_empty() {
        return Ok(0.0);
    }
    let a = build_test_functions(xi, n)?.a_xi;
    let window = 3;
    let lo_end = i.saturating_sub(window);
    let hi_start = (i + window + 1).min(n);
    let tol_zero = Tolerance::default();
    let degenerate = lambdas
        .par_iter()
        .filter(|&&lambda| {
            let phi: Vec<f64> = a
                .values()
                .iter()
                .zip(psi.values())
                .map(|(&u, &v)| u + lambda * v)
                .collect();
            let left = &phi[..lo_end];
            let right = &phi[hi_start..];
            let ok = |seg: &[f64]| seg.len() < 2 || is_nondegenerate(seg, tol_zero);
            !(ok(left) && ok(right))
        })
        .count();
    Ok(degenerate as f64 / lambdas.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CoefficientField;
    use crate::parabolic::BoundarySpec;

    fn heat(n: usize) -> ParabolicSemigroup {
        ParabolicSemigroup::new(ParabolicProblem::heat(), n)
    }

    #[test]
    fn triple_conditions_hold() {
        for &xi in &[0.5, 0.25, 4.0 / 256.0, 1.0 - 4.0 / 256.0, 0.125] {
            let t = build_test_functions(xi, 257).unwrap();
            t.verify().unwrap_or_else(|e| panic!("ξ = {xi}: {e}"));
            assert!(!t.boundary_variant);
        }
        let t = build_test_functions(0.5, 257).unwrap();
        assert_eq!(t.a_xi.values()[128], 0.0);
        let d2 = second_difference(t.a_xi.values(), t.a_xi.step());
        assert!((d2[128] - 1.0).abs() < 1e-6);
        let b06 = t.b_xi.eval(0.6);
        assert!(b06 * (0.6 - 0.5) > 0.0);
    }

    #[test]
    fn endpoint_variants_are_flat() {
        for &xi in &[0.0, 1.0] {
            let t = build_test_functions(xi, 257).unwrap();
            assert!(t.boundary_variant);
            t.verify().unwrap();
            let db = first_difference(t.b_xi.values(), t.b_xi.step());
            let end = if xi == 0.0 { 0 } else { 256 };
            assert!(db[end].abs() < 1e-3);
        }
        assert!(build_test_functions(1.5, 257).is_err());
    }

    #[test]
    fn test_functions_are_flat_at_far_endpoints() {
        let t = build_test_functions(0.3, 257).unwrap();
        let da = first_difference(t.a_xi.values(), t.a_xi.step());
        let db = first_difference(t.b_xi.values(), t.b_xi.step());
        for &i in &[0, 256] {
            assert!(da[i].abs() < 1e-3 && db[i].abs() < 1e-3, "{} {}", da[i], db[i]);
        }
    }

    #[test]
    fn heat_generator_on_cosine() {
        let sg = heat(257);
        let phi = GridFunction::from_fn(257, |x| (PI * x).cos()).unwrap();
        let est = estimate_A(&sg, &phi, 1e-5).unwrap();
        for (i, v) in est.values().iter().enumerate() {
            let x = i as f64 / 256.0;
            assert!((v + PI * PI * (PI * x).cos()).abs() < 5e-3);
        }
        let zero = GridFunction::zeros(257).unwrap();
        assert!(estimate_A(&sg, &zero, 1e-5).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn time_error_shrinks_when_t_is_halved() {
        let n = 129;
        let sg = heat(n);
        let h = 1.0 / (n - 1) as f64;
        let lambda = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let phi = GridFunction::from_fn(n, |x| (PI * x).cos()).unwrap();
        let exact = phi.scale(-lambda);
        let err = |t: f64| estimate_A(&sg, &phi, t).unwrap().max_abs_diff(&exact).unwrap();
        let (e1, e2, e3) = (err(2e-2), err(1e-2), err(5e-3));
        assert!(e1 / e2 > 2.0 && e2 / e3 > 2.0, "{e1} {e2} {e3}");
    }

    #[test]
    fn transport_generator_is_derivative() {
        let p = TransportProblem::new(CoefficientField::constant(1.0), CoefficientField::constant(0.0), -1.0, 0.0);
        let sg = TransportSemigroup::new(p, 257).unwrap();
        let phi = GridFunction::from_fn(257, |x| (2.0 * x).sin()).unwrap();
        let est = estimate_A(&sg, &phi, 1e-6).unwrap();
        for i in 4..250 {
            let x = i as f64 / 256.0;
            assert!((est.values()[i] - 2.0 * (2.0 * x).cos()).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn estimate_is_linear() {
        let sg = heat(129);
        let f = GridFunction::from_fn(129, |x| (PI * x).cos()).unwrap();
        let g = GridFunction::from_fn(129, |x| (3.0 * PI * x).cos() + 0.2).unwrap();
        let combo = f.axpy(-2.5, &g).unwrap();
        let lhs = estimate_A(&sg, &combo, 1e-5).unwrap();
        let rhs = estimate_A(&sg, &f, 1e-5)
            .unwrap()
            .axpy(-2.5, &estimate_A(&sg, &g, 1e-5).unwrap())
            .unwrap();
        let scale = lhs.sup_norm().max(1.0);
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9 * scale);
    }

    #[test]
    fn richardson_error_shrinks_with_t() {
        let n = 257;
        let sg = heat(n);
        let phi = GridFunction::from_fn(n, |x| (PI * x).cos()).unwrap();
        // Reference: the discrete operator itself, T'(0).
        let reference = estimate_A(&sg, &phi, 1e-7).unwrap();
        let err = |t: f64| estimate_A(&sg, &phi, t).unwrap().max_abs_diff(&reference).unwrap();
        let (e1, e2) = (err(2e-3), err(1e-3));
        assert!((e1 / e2).log2() >= 1.0, "{e1} {e2}");
    }

    #[test]
    fn heat_extraction() {
        let est = extract_coefficients(&heat(129), 1e-6).unwrap();
        for k in 0..est.x.len() {
            assert!((est.alpha[k] - 1.0).abs() < 5e-3, "x = {}", est.x[k]);
            assert!(est.beta[k].abs() < 5e-3);
            assert!(est.gamma[k].abs() < 5e-3);
        }
        assert!(est.residual < 1e-2, "residual {}", est.residual);
        assert!(est.alpha_nonnegative());
        assert!(est.to_csv().starts_with("x,alpha,beta,gamma\n"));
        assert!(est.summary_json().unwrap().contains("\"residual\""));
    }

    #[test]
    fn serialized_adapter_matches() {
        let inner = heat(65);
        let wrapped = Serialized::new(65, move |phi: &GridFunction, t: f64| inner.apply(phi, t));
        let phi = GridFunction::from_fn(65, |x| (PI * x).cos()).unwrap();
        let a = estimate_A(&wrapped, &phi, 1e-5).unwrap();
        let b = estimate_A(&heat(65), &phi, 1e-5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonseparated_semigroup_still_evaluates() {
        let p = ParabolicProblem::new(
            CoefficientField::constant(1.0),
            CoefficientField::constant(0.0),
            CoefficientField::constant(0.0),
            BoundarySpec::NonSeparated {
                d00: 0.0,
                d01: -0.5,
                d10: 0.5,
                d11: 0.0,
            },
        );
        let sg = ParabolicSemigroup::new(p, 65);
        let phi = GridFunction::from_fn(65, |x| x).unwrap();
        assert!(estimate_A(&sg, &phi, 1e-5).is_ok());
    }

    #[test]
    fn global_pair_conditions() {
        assert!(GlobalPair::phi(0.5).abs() < 1e-15);
        assert!((GlobalPair::dphi(0.5) - 1.0).abs() < 1e-15);
        assert!(GlobalPair::d2phi(0.5).abs() < 1e-15);
        assert!(GlobalPair::psi(0.5).abs() < 1e-15);
        assert!(GlobalPair::dpsi(0.5).abs() < 1e-15);
        assert!((GlobalPair::d2psi(0.5) - 1.0).abs() < 1e-15);
        for &x in &[0.1, 0.37, 0.8] {
            assert!((GlobalPair::det(x) - (PI * x).sin().powi(2)).abs() < 1e-14);
            let e = 1e-6;
            let fd = (GlobalPair::psi(x + e) - GlobalPair::psi(x - e)) / (2.0 * e);
            assert!((fd - GlobalPair::dpsi(x)).abs() < 1e-8);
        }
        assert!(GlobalPair::dphi(0.0).abs() < 1e-15 && GlobalPair::dpsi(1.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_scan_trivial_cases() {
        let n = 257;
        let psi = standard_psi(0.5, n, DEFAULT_WIDTH).unwrap();
        let tol = default_triple_zero_tol(&psi);
        assert_eq!(lambda_degeneracy_scan(0.5, &psi, &[0.0], tol).unwrap(), 0.0);
        let zero = GridFunction::zeros(n).unwrap();
        assert_eq!(lambda_degeneracy_scan(0.5, &zero, &[1.0, -3.0, 50.0], 1e-12).unwrap(), 0.0);
        let bad = GridFunction::from_fn(n, |x| x - 0.5).unwrap();
        assert!(matches!(
            lambda_degeneracy_scan(0.5, &bad, &[1.0], 1e-3),
            Err(Error::Precondition(_))
        ));
    }
}
