//! First-order semigroup `(Aφ)(x) = b(x)φ'(x) + c(x)φ(x)` with `b > 0`,
//! solved by characteristics.
//!
//! With `θ(ξ) = -∫_ξ^1 ds/b(s)` and its inverse `ξ(θ)`, the boundary trace
//! `y(t) = u(1, t)` determines the whole state through the linear bijection
//!
//! ```text
//! (hψ)(ξ)      = ψ(θ(ξ)) · exp(C(ξ)),      C(ξ) = ∫_ξ^1 c(s)/b(s) ds,
//! (h⁻¹φ)(θ)    = φ(ξ(θ)) · exp(-C(ξ(θ))),
//! ```
//!
//! and `y` solves the generalized delay equation
//! `y'(t) = a (h y_t)(0) + α̃ (h y_t)(1) = a e^{C(0)} y(t - r) + α̃ y(t)`.
//! `C` is the `θ`-parametrized exponent `∫_{θ(ξ)}^0 c(ξ(u)) du` after the
//! substitution `du = dx / b(x)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::delay::{heun_march, History};
use crate::error::{Error, Result};
use crate::grid::{cubic_interp, grid_point, simpson, CoefficientField, GridFunction};
use crate::lyapunov::{zero_number, Functional, Tolerance};
use crate::parabolic::step_count;
use crate::trajectory::{Recording, Snapshot, Trajectory};

/// Simpson panels per grid cell for the cumulative tables.
const CELL_PANELS: usize = 8;
/// Minimum grid size for a characteristic map.
pub const MIN_CHARACTERISTIC_GRID: usize = 33;
/// Slack allowed when testing membership of the characteristic region.
const REGION_SLACK: f64 = 1e-12;

/// Tabulated `θ(ξ)` and `ξ(θ)` for a positive speed `b`.
#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    r: f64,
    n: usize,
    b: CoefficientField,
    /// `F(ξ_i) = ∫_0^{ξ_i} ds/b(s)`.
    cumulative: Vec<f64>,
    theta_of_xi: Vec<f64>,
    xi_of_theta: Vec<f64>,
}

pub fn build_characteristics(b: &CoefficientField, n: usize) -> Result<CharacteristicMap> {
    if n < MIN_CHARACTERISTIC_GRID {
        return Err(Error::GridTooSmall {
            min: MIN_CHARACTERISTIC_GRID,
            got: n,
        });
    }
    let h = 1.0 / (n - 1) as f64;
    for i in 0..n {
        let x = grid_point(i, n, h);
        let v = b.value_at(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, value: v });
        }
        if v <= 0.0 {
            return Err(Error::NonPositiveSpeed { x, value: v });
        }
    }
    let recip = |x: f64| 1.0 / b.value_at(x);
    let cumulative = cumulative_table(&recip, n)?;
    let r = cumulative[n - 1];
    let theta_of_xi: Vec<f64> = cumulative.iter().map(|f| f - r).collect();
    let mut map = CharacteristicMap {
        r,
        n,
        b: b.clone(),
        cumulative,
        theta_of_xi,
        xi_of_theta: Vec::new(),
    };
    let dtheta = r / (n - 1) as f64;
    map.xi_of_theta = (0..n)
        .map(|j| {
            if j == n - 1 {
                1.0
            } else {
                map.xi(-r + j as f64 * dtheta)
            }
        })
        .collect();
    Ok(map)
}

/// `∫_0^{x_i} f` on the uniform `n`-point grid.
fn cumulative_table(f: &impl Fn(f64) -> f64, n: usize) -> Result<Vec<f64>> {
    let h = 1.0 / (n - 1) as f64;
    let mut table = Vec::with_capacity(n);
    table.push(0.0);
    for i in 1..n {
        let lo = grid_point(i - 1, n, h);
        let hi = grid_point(i, n, h);
        let prev = table[i - 1];
        table.push(prev + simpson(f, lo, hi, CELL_PANELS)?);
    }
    Ok(table)
}

impl CharacteristicMap {
    /// Transit time `r = ∫_0^1 ds/b(s)`.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> &CoefficientField {
        &self.b
    }

    fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// `θ(ξ_i)` on the uniform `ξ` grid.
    pub fn theta_table(&self) -> &[f64] {
        &self.theta_of_xi
    }

    /// `ξ(θ_j)` on the uniform `θ` grid over `[-r, 0]` with `n` points.
    pub fn xi_table(&self) -> &[f64] {
        &self.xi_of_theta
    }

    /// `F(ξ) = ∫_0^ξ ds/b(s)`.
    fn transit(&self, xi: f64) -> f64 {
        let xi = xi.clamp(0.0, 1.0);
        let h = self.h();
        let i = ((xi / h).floor() as usize).min(self.n - 1);
        let base = grid_point(i, self.n, h);
        if xi == base {
            return self.cumulative[i];
        }
        let recip = |x: f64| 1.0 / self.b.value_at(x);
        self.cumulative[i] + simpson(&recip, base, xi, CELL_PANELS).unwrap_or(f64::NAN)
    }

    pub fn theta(&self, xi: f64) -> f64 {
        if xi >= 1.0 {
            0.0
        } else if xi <= 0.0 {
            -self.r
        } else {
            self.transit(xi) - self.r
        }
    }

    /// Inverse of [`theta`](Self::theta): locates the cell in the cumulative
    /// table by bisection, then polishes with safeguarded Newton steps.
    pub fn xi(&self, theta: f64) -> f64 {
        if theta >= 0.0 {
            return 1.0;
        }
        if theta <= -self.r {
            return 0.0;
        }
        let target = theta + self.r;
        let (mut lo_i, mut hi_i) = (0usize, self.n - 1);
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            if self.cumulative[mid] <= target {
                lo_i = mid;
            } else {
                hi_i = mid;
            }
        }
        let h = self.h();
        let (mut lo, mut hi) = (grid_point(lo_i, self.n, h), grid_point(hi_i, self.n, h));
        let (f_lo, f_hi) = (self.cumulative[lo_i], self.cumulative[hi_i]);
        let mut x = lo + (target - f_lo) / (f_hi - f_lo) * (hi - lo);
        for _ in 0..60 {
            let resid = self.transit(x) - target;
            if resid.abs() <= 1e-15 * self.r.max(1.0) {
                break;
            }
            if resid > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - resid * self.b.value_at(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 {
                break;
            }
        }
        x
    }

    /// Forward characteristic `g(x₀, t) = ξ(θ(x₀) - t)`.
    pub fn g(&self, x0: f64, t: f64) -> f64 {
        self.xi(self.theta(x0) - t)
    }

    /// Foot of the backward characteristic, `g⁰(x, t) = ξ(θ(x) + t)`.
    pub fn g0(&self, x: f64, t: f64) -> f64 {
        self.xi(self.theta(x) + t)
    }

    /// `(x, t)` with `0 <= t <= -θ(x)`.
    pub fn in_region(&self, x: f64, t: f64) -> bool {
        (0.0..=1.0).contains(&x) && t >= 0.0 && t <= -self.theta(x) + REGION_SLACK
    }

    /// `xi,theta` CSV of the tabulated map.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,theta\n");
        let h = self.h();
        for (i, th) in self.theta_of_xi.iter().enumerate() {
            let _ = writeln!(out, "{},{}", grid_point(i, self.n, h), th);
        }
        out
    }
}

/// Speed, potential and boundary functional `L₁φ = a φ(0) + α̃ φ(1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportProblem {
    pub b: CoefficientField,
    pub c: CoefficientField,
    pub a_coef: f64,
    pub alpha_tilde: f64,
}

impl TransportProblem {
    pub fn new(b: CoefficientField, c: CoefficientField, a_coef: f64, alpha_tilde: f64) -> Self {
        TransportProblem {
            b,
            c,
            a_coef,
            alpha_tilde,
        }
    }

    /// Checks `b >= b_min > 0` on an `n`-point sampling and returns `b_min`.
    pub fn validate(&self, n: usize) -> Result<f64> {
        let (x, b_min) = self.b.sampled_min(n);
        if !(b_min > 0.0) {
            return Err(Error::NonPositiveSpeed { x, value: b_min });
        }
        Ok(b_min)
    }

    /// Functional expected to decay: `V⁻` for `a < 0`, `V⁺` for `a > 0`,
    /// `z` when the boundary functional only sees `φ(1)`.
    pub fn expected_functional(&self) -> Functional {
        if self.a_coef < 0.0 {
            Functional::VMinus
        } else if self.a_coef > 0.0 {
            Functional::VPlus
        } else {
            Functional::Z
        }
    }

    pub fn characteristics(&self, n: usize) -> Result<CharacteristicMap> {
        build_characteristics(&self.b, n)
    }
}

/// The weighting part of `h`, tabulated for one potential.
struct Conjugacy<'a> {
    cmap: &'a CharacteristicMap,
    c: &'a CoefficientField,
    /// `G(ξ_i) = ∫_0^{ξ_i} c/b`.
    cumulative: Vec<f64>,
}

impl<'a> Conjugacy<'a> {
    fn new(problem: &'a TransportProblem, cmap: &'a CharacteristicMap) -> Result<Self> {
        let c = &problem.c;
        let b = &cmap.b;
        let ratio = |x: f64| c.value_at(x) / b.value_at(x);
        Ok(Conjugacy {
            cmap,
            c,
            cumulative: cumulative_table(&ratio, cmap.n)?,
        })
    }

    /// `C(ξ) = ∫_ξ^1 c/b`.
    fn exponent(&self, xi: f64) -> f64 {
        let n = self.cmap.n;
        let total = self.cumulative[n - 1];
        let xi = xi.clamp(0.0, 1.0);
        let h = self.cmap.h();
        let i = ((xi / h).floor() as usize).min(n - 1);
        let base = grid_point(i, n, h);
        let partial = if xi == base {
            0.0
        } else {
            let ratio = |x: f64| self.c.value_at(x) / self.cmap.b.value_at(x);
            simpson(&ratio, base, xi, CELL_PANELS).unwrap_or(f64::NAN)
        };
        total - (self.cumulative[i] + partial)
    }

    fn weight(&self, xi: f64) -> f64 {
        self.exponent(xi).exp()
    }

    fn check_span(&self, hist: &History) -> Result<()> {
        let r = self.cmap.r;
        if (hist.span() - r).abs() > 1e-12 * r.max(1.0) {
            return Err(Error::SpanMismatch {
                expected: r,
                got: hist.span(),
            });
        }
        Ok(())
    }

    fn apply(&self, psi: &History) -> Result<GridFunction> {
        self.check_span(psi)?;
        let n = self.cmap.n;
        let h = self.cmap.h();
        GridFunction::new(
            (0..n)
                .map(|i| {
                    let xi = grid_point(i, n, h);
                    psi.eval(self.cmap.theta_of_xi[i]) * self.weight(xi)
                })
                .collect(),
        )
    }

    /// `(h⁻¹φ)(θ)` at a single `θ`.
    fn inverse_at(&self, phi: &GridFunction, theta: f64) -> f64 {
        let xi = self.cmap.xi(theta);
        phi.eval(xi) * (-self.exponent(xi)).exp()
    }

    fn apply_inverse(&self, phi: &GridFunction, m: usize) -> Result<History> {
        if phi.n() != self.cmap.n {
            return Err(Error::LengthMismatch {
                expected: self.cmap.n,
                got: phi.n(),
            });
        }
        History::from_fn(m, self.cmap.r, |theta| self.inverse_at(phi, theta))
    }
}

/// `(hψ)(ξ) = ψ(θ(ξ)) · exp(∫_ξ^1 c/b)` on the map's `ξ` grid.
pub fn apply_h(psi: &History, problem: &TransportProblem, cmap: &CharacteristicMap) -> Result<GridFunction> {
    Conjugacy::new(problem, cmap)?.apply(psi)
}

/// `h⁻¹` sampled with `n - 1` history intervals.
pub fn apply_h_inv(phi: &GridFunction, problem: &TransportProblem, cmap: &CharacteristicMap) -> Result<History> {
    apply_h_inv_with(phi, problem, cmap, cmap.n - 1)
}

/// `h⁻¹` sampled with `m` history intervals.
pub fn apply_h_inv_with(
    phi: &GridFunction,
    problem: &TransportProblem,
    cmap: &CharacteristicMap,
    m: usize,
) -> Result<History> {
    if m == 0 {
        return Err(Error::InvalidArgument("history needs at least one interval".into()));
    }
    Conjugacy::new(problem, cmap)?.apply_inverse(phi, m)
}

/// `u(x, t) = φ₀(g⁰(x,t)) · exp(∫_0^t c(g⁰(x, t-s)) ds)` inside the region
/// reached by characteristics from the initial line.
pub fn interior_solution(
    phi0: &GridFunction,
    x: f64,
    t: f64,
    problem: &TransportProblem,
    cmap: &CharacteristicMap,
) -> Result<f64> {
    if !cmap.in_region(x, t) {
        return Err(Error::OutsideRegion { x, t });
    }
    let conj = Conjugacy::new(problem, cmap)?;
    Ok(interior_value(&conj, phi0, x, t))
}

fn interior_value(conj: &Conjugacy<'_>, phi0: &GridFunction, x: f64, t: f64) -> f64 {
    let foot = conj.cmap.g0(x, t);
    phi0.eval(foot) * (conj.exponent(x) - conj.exponent(foot)).exp()
}

/// `z(ψ) == z(hψ)`.
pub fn zero_conjugacy_check(
    psi: &History,
    problem: &TransportProblem,
    cmap: &CharacteristicMap,
    tol: Tolerance,
) -> Result<bool> {
    let image = apply_h(psi, problem, cmap)?;
    Ok(zero_number(psi, tol).z == zero_number(&image, tol).z)
}

/// Output of [`evolve`].
#[derive(Debug, Clone)]
pub struct TransportEvolution {
    /// Records computed on the reconstructed profiles `h y_t`.
    pub trajectory: Trajectory,
    /// Boundary trace `y(t_k) = u(1, t_k)` for `t_k = k * step`, `k >= 0`.
    pub trace_times: Vec<f64>,
    pub trace: Vec<f64>,
    /// Final history `y_T` and profile `h y_T`.
    pub history: History,
    pub state: GridFunction,
    pub step: f64,
}

/// Evolves `φ₀` to `t_final`. The history grid uses `m = round(r / dt)`
/// intervals so that the delay is an exact multiple of the step.
pub fn evolve(
    problem: &TransportProblem,
    phi0: &GridFunction,
    t_final: f64,
    dt: f64,
    cmap: &CharacteristicMap,
    record: &Recording,
) -> Result<TransportEvolution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let m = ((cmap.r / dt).round() as usize).max(1);
    let y0 = apply_h_inv_with(phi0, problem, cmap, m)?;
    evolve_history(problem, &y0, t_final, cmap, record)
}

/// Evolves from a boundary-trace history `y₀` on `[-r, 0]`.
pub fn evolve_history(
    problem: &TransportProblem,
    y0: &History,
    t_final: f64,
    cmap: &CharacteristicMap,
    record: &Recording,
) -> Result<TransportEvolution> {
    let conj = Conjugacy::new(problem, cmap)?;
    conj.check_span(y0)?;
    let m = y0.intervals();
    let step = y0.step();
    let steps = step_count(t_final, step)?;
    // (h y_t)(0) = y(t - r) e^{C(0)}, (h y_t)(1) = y(t) e^{C(1)}.
    let w0 = conj.weight(0.0);
    let w1 = conj.weight(1.0);
    let (a, alpha) = (problem.a_coef, problem.alpha_tilde);
    let rhs = move |current: f64, delayed: f64| a * w0 * delayed + alpha * w1 * current;

    let mut traj = Trajectory::new(record.keep_snapshots);
    let first = conj.apply(y0)?;
    traj.record(0.0, Snapshot::Grid(first.clone()), record.tol);
    let mut buf = y0.values().to_vec();
    buf.reserve(steps);
    let mut last_state = first;
    heun_march(&mut buf, m, step, 0.0, steps, rhs, |k, window| {
        if k % record.every == 0 || k == steps {
            let hist = History::new(window.to_vec(), cmap.r)?;
            let profile = conj.apply(&hist)?;
            last_state = profile.clone();
            traj.record(k as f64 * step, Snapshot::Grid(profile), record.tol);
        }
        Ok(())
    })?;
    let trace = buf[m..].to_vec();
    let trace_times = (0..trace.len()).map(|k| k as f64 * step).collect();
    let history = History::new(buf[buf.len() - (m + 1)..].to_vec(), cmap.r)?;
    Ok(TransportEvolution {
        trajectory: traj,
        trace_times,
        trace,
        history,
        state: last_state,
        step,
    })
}

/// `T(t)φ` evaluated directly: inside the characteristic region by
/// [`interior_solution`], elsewhere from the boundary trace, which for
/// `t <= r` solves `y' = a e^{C(0)} (h⁻¹φ)(s - r) + α̃ y` with known forcing
/// (classical RK4, `substeps` steps). Longer times are split into pieces of
/// length at most `r`.
pub fn semigroup_apply(
    problem: &TransportProblem,
    cmap: &CharacteristicMap,
    phi: &GridFunction,
    t: f64,
    substeps: usize,
) -> Result<GridFunction> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    if phi.n() != cmap.n {
        return Err(Error::LengthMismatch {
            expected: cmap.n,
            got: phi.n(),
        });
    }
    if t == 0.0 {
        return Ok(phi.clone());
    }
    let conj = Conjugacy::new(problem, cmap)?;
    let pieces = (t / cmap.r).ceil().max(1.0) as usize;
    let tau = t / pieces as f64;
    let mut state = phi.clone();
    for _ in 0..pieces {
        state = short_time(&conj, problem, &state, tau, substeps.max(4))?;
    }
    Ok(state)
}

fn short_time(
    conj: &Conjugacy<'_>,
    problem: &TransportProblem,
    phi: &GridFunction,
    t: f64,
    substeps: usize,
) -> Result<GridFunction> {
    let cmap = conj.cmap;
    let r = cmap.r;
    let forcing = |s: f64| problem.a_coef * conj.weight(0.0) * conj.inverse_at(phi, s - r);
    let alpha = problem.alpha_tilde * conj.weight(1.0);
    let ds = t / substeps as f64;
    let mut y = Vec::with_capacity(substeps + 1);
    y.push(phi.values()[phi.n() - 1]);
    for k in 0..substeps {
        let s = k as f64 * ds;
        let yk = y[k];
        let f = |s: f64, y: f64| forcing(s) + alpha * y;
        let k1 = f(s, yk);
        let k2 = f(s + 0.5 * ds, yk + 0.5 * ds * k1);
        let k3 = f(s + 0.5 * ds, yk + 0.5 * ds * k2);
        let k4 = f(s + ds, yk + ds * k3);
        let next = yk + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::NonFiniteRhs { t: s });
        }
        y.push(next);
    }
    let n = cmap.n;
    let h = cmap.h();
    GridFunction::new(
        (0..n)
            .map(|i| {
                let x = grid_point(i, n, h);
                let s = t + cmap.theta_of_xi[i];
                if s <= 0.0 {
                    interior_value(conj, phi, x, t)
                } else {
                    cubic_interp(&y, 0.0, ds, s) * conj.weight(x)
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> CoefficientField {
        CoefficientField::constant(1.0)
    }

    fn linear_speed() -> CoefficientField {
        CoefficientField::polynomial([1.0, 1.0])
    }

    #[test]
    fn unit_speed_map() {
        let cmap = build_characteristics(&unit(), 65).unwrap();
        assert!((cmap.r() - 1.0).abs() < 1e-14);
        for i in 0..65 {
            let xi = i as f64 / 64.0;
            assert!((cmap.theta(xi) - (xi - 1.0)).abs() < 1e-13);
            assert!((cmap.xi(xi - 1.0) - xi).abs() < 1e-13);
        }
        let two = build_characteristics(&CoefficientField::constant(2.0), 65).unwrap();
        assert!((two.r() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn linear_speed_map() {
        let cmap = build_characteristics(&linear_speed(), 129).unwrap();
        assert!((cmap.r() - 2f64.ln()).abs() < 1e-9);
        for &xi in &[0.0f64, 0.1, 0.37, 0.5, 0.91, 1.0] {
            let exact = ((1.0 + xi) / 2.0).ln();
            assert!((cmap.theta(xi) - exact).abs() < 1e-9);
        }
        assert_eq!(cmap.theta_table()[0], -cmap.r());
        assert_eq!(*cmap.theta_table().last().unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_speed_rejected() {
        let b = CoefficientField::polynomial([0.5, -1.0]);
        match build_characteristics(&b, 65) {
            Err(Error::NonPositiveSpeed { x, .. }) => assert!(x >= 0.5),
            other => panic!("expected NonPositiveSpeed, got {other:?}"),
        }
        assert!(build_characteristics(&unit(), 16).is_err());
    }

    #[test]
    fn round_trips_on_grids() {
        let b = CoefficientField::sinusoid(0.4, 3.0, 1.2);
        let cmap = build_characteristics(&b, 257).unwrap();
        for i in 0..257 {
            let xi = i as f64 / 256.0;
            assert!((cmap.xi(cmap.theta(xi)) - xi).abs() < 1e-9);
        }
        for j in 0..257 {
            let th = -cmap.r() + j as f64 * cmap.r() / 256.0;
            assert!((cmap.theta(cmap.xi(th)) - th).abs() < 1e-9);
        }
    }

    #[test]
    fn characteristic_composition() {
        let cmap = build_characteristics(&linear_speed(), 257).unwrap();
        for &(x, t, s) in &[(0.2, 0.3, 0.1), (0.05, 0.5, 0.45), (0.6, 0.2, 0.05)] {
            assert!(cmap.in_region(x, t));
            let lhs = cmap.g(cmap.g0(x, t), s);
            let rhs = cmap.g0(x, t - s);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn h_is_relabeling_for_unit_speed() {
        let p = TransportProblem::new(unit(), CoefficientField::constant(0.0), -1.0, 0.0);
        let cmap = p.characteristics(65).unwrap();
        let psi = History::from_fn(64, 1.0, |t| (3.0 * t).sin() + t).unwrap();
        let phi = apply_h(&psi, &p, &cmap).unwrap();
        for i in 0..65 {
            let xi = i as f64 / 64.0;
            let th = xi - 1.0;
            assert!((phi.values()[i] - ((3.0 * th).sin() + th)).abs() < 1e-12);
        }
        let back = apply_h_inv(&phi, &p, &cmap).unwrap();
        assert!(back.max_abs_diff(&psi).unwrap() < 1e-12);
        let ones = GridFunction::from_fn(65, |_| 1.0).unwrap();
        let h1 = apply_h_inv(&ones, &p, &cmap).unwrap();
        assert!(h1.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn h_weights_for_constant_potential() {
        let p = TransportProblem::new(unit(), unit(), -1.0, 0.0);
        let cmap = p.characteristics(65).unwrap();
        let psi = History::from_fn(64, 1.0, |t| 2.0 + t * t).unwrap();
        let phi = apply_h(&psi, &p, &cmap).unwrap();
        for i in 0..65 {
            let xi = i as f64 / 64.0;
            let expected = (2.0 + (xi - 1.0) * (xi - 1.0)) * (1.0 - xi).exp();
            assert!((phi.values()[i] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn span_mismatch_rejected() {
        let p = TransportProblem::new(linear_speed(), unit(), -1.0, 0.0);
        let cmap = p.characteristics(65).unwrap();
        let psi = History::constant(64, 1.0, 1.0).unwrap();
        assert!(matches!(apply_h(&psi, &p, &cmap), Err(Error::SpanMismatch { .. })));
    }

    #[test]
    fn interior_solution_examples() {
        let p = TransportProblem::new(unit(), CoefficientField::constant(0.0), -1.0, 0.0);
        let cmap = p.characteristics(129).unwrap();
        let phi = GridFunction::from_fn(129, |x| (2.0 * x).cos()).unwrap();
        let u = interior_solution(&phi, 0.25, 0.5, &p, &cmap).unwrap();
        assert!((u - phi.eval(0.75)).abs() < 1e-12);
        assert!(matches!(
            interior_solution(&phi, 0.75, 0.5, &p, &cmap),
            Err(Error::OutsideRegion { .. })
        ));

        let kappa = 0.7;
        let q = TransportProblem::new(linear_speed(), CoefficientField::constant(kappa), -1.0, 0.0);
        let cmap = q.characteristics(257).unwrap();
        let phi = GridFunction::from_fn(257, |x| 1.0 + x * x).unwrap();
        let (x, t) = (0.1, 0.3);
        let u = interior_solution(&phi, x, t, &q, &cmap).unwrap();
        let expected = phi.eval(cmap.g0(x, t)) * (kappa * t).exp();
        assert!((u - expected).abs() < 1e-10);
    }

    #[test]
    fn sign_is_carried_along_characteristics() {
        let p = TransportProblem::new(linear_speed(), CoefficientField::sinusoid(1.0, 6.0, 0.0), -1.0, 0.0);
        let cmap = p.characteristics(257).unwrap();
        let phi = GridFunction::from_fn(257, |x| (7.0 * x).sin() - 0.2).unwrap();
        for i in 0..257 {
            let x0 = i as f64 / 256.0;
            let v0 = phi.values()[i];
            for &t in &[0.05, 0.2, 0.5] {
                if cmap.theta(x0) - t <= -cmap.r() || v0.abs() < 1e-9 {
                    continue;
                }
                let x = cmap.g(x0, t);
                if !cmap.in_region(x, t) {
                    continue;
                }
                let u = interior_solution(&phi, x, t, &p, &cmap).unwrap();
                assert_eq!(u.signum(), v0.signum(), "x0={x0} t={t}");
            }
        }
    }

    #[test]
    fn zero_evolution_stays_zero() {
        let p = TransportProblem::new(linear_speed(), unit(), -1.0, 0.3);
        let cmap = p.characteristics(65).unwrap();
        let zero = GridFunction::zeros(65).unwrap();
        let ev = evolve(&p, &zero, 2.0, 0.01, &cmap, &Recording::every(10)).unwrap();
        assert!(ev.trace.iter().all(|&y| y == 0.0));
        assert!(ev.trajectory.z_series.iter().all(|&z| z == 0));
    }

    #[test]
    fn conjugacy_examples() {
        let p = TransportProblem::new(linear_speed(), CoefficientField::sinusoid(1.0, 2.0 * std::f64::consts::PI, 0.0), -1.0, 0.0);
        let cmap = p.characteristics(513).unwrap();
        let r = cmap.r();
        let tol = Tolerance::default();
        let ones = History::constant(512, r, 1.0).unwrap();
        assert!(zero_conjugacy_check(&ones, &p, &cmap, tol).unwrap());
        let six = History::from_fn(512, r, |t| (6.0 * std::f64::consts::PI * t / r).sin()).unwrap();
        assert!(zero_conjugacy_check(&six, &p, &cmap, tol).unwrap());
        let four = History::from_fn(512, r, |t| (4.0 * std::f64::consts::PI * t / r + 0.3).cos()).unwrap();
        assert_eq!(zero_number(&four, tol).z, 4);
        assert!(zero_conjugacy_check(&four, &p, &cmap, tol).unwrap());
    }

    #[test]
    fn direct_semigroup_matches_evolution() {
        let p = TransportProblem::new(linear_speed(), CoefficientField::constant(0.3), -1.0, 0.2);
        let cmap = p.characteristics(1025).unwrap();
        let phi = GridFunction::from_fn(1025, |x| (2.0 * x).cos() + 0.5 * x).unwrap();
        let t = 0.4;
        let dt = cmap.r() / 1000.0;
        let ev = evolve(&p, &phi, t, dt, &cmap, &Recording::every(1_000_000)).unwrap();
        let steps = ev.trace.len() - 1;
        assert!((steps as f64 * ev.step - t).abs() < 1e-3);
        let exact_t = steps as f64 * ev.step;
        let direct = semigroup_apply(&p, &cmap, &phi, exact_t, 400).unwrap();
        let diff = direct.max_abs_diff(&ev.state).unwrap();
        // The trace has a slope jump at t = 0, which interpolation resolves to O(dt).
        assert!(diff < 1e-4, "diff {diff}");
    }
}
