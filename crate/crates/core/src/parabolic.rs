//! Implicit-Euler semiflow for `u_t = a(x) u_xx + b(t,x) u_x + c(t,x) u` on
//! `[0, 1]` with Neumann or non-separated boundary rows.
//!
//! The step matrix `I - dt L` uses a centered second difference for the
//! diffusion, upwinded first differences for the drift and a diagonal
//! potential. Boundary rows eliminate the ghost value with the centered
//! boundary condition `φ'(0) = -(δ₀₀φ(0) + δ₀₁φ(1))`,
//! `φ'(1) = -(δ₁₀φ(0) + δ₁₁φ(1))`, which keeps the core tridiagonal and puts
//! the cross-coupling into the two corners. With Neumann rows and `c <= 0` the
//! result is a diagonally dominant tridiagonal M-matrix, whose inverse is
//! totally nonnegative and therefore cannot raise the sign-change count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grid_point, CoefficientField, GridFunction, MIN_GRID};
use crate::trajectory::{Recording, Snapshot, Trajectory};
use crate::tridiag::BorderedSolver;

/// Boundary operators `B₀φ = φ'(0) + δ₀₀φ(0) + δ₀₁φ(1)`,
/// `B₁φ = φ'(1) + δ₁₀φ(0) + δ₁₁φ(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySpec {
    Neumann,
    NonSeparated {
        d00: f64,
        d01: f64,
        d10: f64,
        d11: f64,
    },
}

/// Sign regime of the cross-boundary constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossSign {
    /// `δ₀₁ < 0 < δ₁₀`, the regime compatible with `V⁻`.
    VMinus,
    /// `δ₀₁ > 0 > δ₁₀`, the regime compatible with `V⁺`.
    VPlus,
    /// Both cross constants vanish.
    Separated,
    Other,
}

impl BoundarySpec {
    pub fn deltas(&self) -> [f64; 4] {
        match *self {
            BoundarySpec::Neumann => [0.0; 4],
            BoundarySpec::NonSeparated { d00, d01, d10, d11 } => [d00, d01, d10, d11],
        }
    }

    pub fn is_neumann(&self) -> bool {
        self.deltas() == [0.0; 4]
    }

    pub fn cross_sign(&self) -> CrossSign {
        let [_, d01, d10, _] = self.deltas();
        if d01 == 0.0 && d10 == 0.0 {
            CrossSign::Separated
        } else if d01 < 0.0 && d10 > 0.0 {
            CrossSign::VMinus
        } else if d01 > 0.0 && d10 < 0.0 {
            CrossSign::VPlus
        } else {
            CrossSign::Other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionMode {
    /// `a > 0` at every node.
    #[default]
    Strict,
    /// `a >= 0` accepted; the operator carries a warning flag if any `a = 0`.
    Degenerate,
}

/// Blend weight `s(t) ∈ [0, 1]` between a base and an alternate field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeBlend {
    /// `s(t) = min(t / ramp, 1)`.
    Ramp { ramp: f64 },
    /// `s(t) = (1 - cos(omega t)) / 2`.
    Periodic { omega: f64 },
}

impl TimeBlend {
    pub fn weight(&self, t: f64) -> f64 {
        match *self {
            TimeBlend::Ramp { ramp } => {
                if ramp <= 0.0 {
                    1.0
                } else {
                    (t / ramp).clamp(0.0, 1.0)
                }
            }
            TimeBlend::Periodic { omega } => 0.5 * (1.0 - (omega * t).cos()),
        }
    }
}

/// Time dependence of drift and potential:
/// `b(t,x) = (1-s(t)) b(x) + s(t) b_alt(x)`, likewise for `c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeDependence {
    pub b_alt: CoefficientField,
    pub c_alt: CoefficientField,
    pub blend: TimeBlend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicProblem {
    pub a: CoefficientField,
    pub b: CoefficientField,
    pub c: CoefficientField,
    pub bc: BoundarySpec,
    #[serde(default)]
    pub mode: DiffusionMode,
    #[serde(default)]
    pub time_dependence: Option<TimeDependence>,
}

impl ParabolicProblem {
    pub fn new(a: CoefficientField, b: CoefficientField, c: CoefficientField, bc: BoundarySpec) -> Self {
        ParabolicProblem {
            a,
            b,
            c,
            bc,
            mode: DiffusionMode::Strict,
            time_dependence: None,
        }
    }

    /// `u_t = u_xx` with Neumann boundary.
    pub fn heat() -> Self {
        Self::new(
            CoefficientField::constant(1.0),
            CoefficientField::constant(0.0),
            CoefficientField::constant(0.0),
            BoundarySpec::Neumann,
        )
    }

    pub fn degenerate(mut self) -> Self {
        self.mode = DiffusionMode::Degenerate;
        self
    }

    pub fn with_time_dependence(mut self, td: TimeDependence) -> Self {
        self.time_dependence = Some(td);
        self
    }

    pub fn is_autonomous(&self) -> bool {
        self.time_dependence.is_none()
    }

    pub fn drift_at(&self, t: f64, x: f64) -> f64 {
        match &self.time_dependence {
            None => self.b.value_at(x),
            Some(td) => {
                let s = td.blend.weight(t);
                (1.0 - s) * self.b.value_at(x) + s * td.b_alt.value_at(x)
            }
        }
    }

    pub fn potential_at(&self, t: f64, x: f64) -> f64 {
        match &self.time_dependence {
            None => self.c.value_at(x),
            Some(td) => {
                let s = td.blend.weight(t);
                (1.0 - s) * self.c.value_at(x) + s * td.c_alt.value_at(x)
            }
        }
    }

    /// Largest sampled potential over all blend weights.
    fn max_potential(&self, n: usize) -> f64 {
        let base = self.c.sampled_max(n);
        match &self.time_dependence {
            None => base,
            Some(td) => base.max(td.c_alt.sampled_max(n)),
        }
    }
}

/// The assembled implicit step `I - dt L` for one grid size and time step.
#[derive(Debug, Clone)]
pub struct StepOperator {
    n: usize,
    dt: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    top_right: f64,
    bottom_left: f64,
    degenerate_warning: bool,
    solver: BorderedSolver,
}

impl StepOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn degenerate_warning(&self) -> bool {
        self.degenerate_warning
    }

    /// Row `i` as `(sub, diag, super)`; missing neighbours are `0`.
    pub fn row(&self, i: usize) -> (f64, f64, f64) {
        (self.lower[i], self.diag[i], self.upper[i])
    }

    /// Corner entries `(0, n-1)` and `(n-1, 0)`.
    pub fn corners(&self) -> (f64, f64) {
        (self.top_right, self.bottom_left)
    }

    /// Dense copy, for inspection and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i > 0 {
                m[i][i - 1] = self.lower[i];
            }
            if i + 1 < n {
                m[i][i + 1] = self.upper[i];
            }
        }
        m[0][n - 1] += self.top_right;
        m[n - 1][0] += self.bottom_left;
        m
    }

    /// Positive diagonal and nonpositive off-diagonal entries, corners
    /// included.
    pub fn has_m_matrix_sign_pattern(&self) -> bool {
        let n = self.n;
        self.diag.iter().all(|&d| d > 0.0)
            && self.lower[1..].iter().all(|&l| l <= 0.0)
            && self.upper[..n - 1].iter().all(|&u| u <= 0.0)
            && self.top_right <= 0.0
            && self.bottom_left <= 0.0
    }
}

pub fn assemble(problem: &ParabolicProblem, n: usize, dt: f64) -> Result<StepOperator> {
    assemble_at(problem, n, dt, 0.0)
}

/// Assembles `I - dt L(t)`.
pub fn assemble_at(problem: &ParabolicProblem, n: usize, dt: f64, t: f64) -> Result<StepOperator> {
    if n < MIN_GRID {
        return Err(Error::GridTooSmall { min: MIN_GRID, got: n });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let c_max = problem.max_potential(n);
    if dt * c_max >= 1.0 {
        return Err(Error::Stability {
            dt,
            product: dt * c_max,
        });
    }

    let h = 1.0 / (n - 1) as f64;
    let h2 = h * h;
    let mut degenerate_warning = false;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    // Rows of L first; I - dt L is formed at the end.
    let [d00, d01, d10, d11] = problem.bc.deltas();
    let mut l_top_right = 0.0;
    let mut l_bottom_left = 0.0;

    for i in 0..n {
        let x = grid_point(i, n, h);
        let a = problem.a.value_at(x);
        let b = problem.drift_at(t, x);
        let c = problem.potential_at(t, x);
        if let Some(v) = [a, b, c].into_iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x, value: v });
        }
        match problem.mode {
            DiffusionMode::Strict if a <= 0.0 => {
                return Err(Error::NonPositiveDiffusion { x, value: a });
            }
            DiffusionMode::Degenerate if a < 0.0 => {
                return Err(Error::NonPositiveDiffusion { x, value: a });
            }
            DiffusionMode::Degenerate if a == 0.0 => degenerate_warning = true,
            _ => {}
        }

        if i == 0 {
            // Ghost u_{-1} = u_1 + 2h (δ₀₀u_0 + δ₀₁u_{n-1}); drift uses the
            // boundary value of u_x.
            let k = 2.0 * a / h - b;
            diag[0] = -2.0 * a / h2 + k * d00 + c;
            upper[0] = 2.0 * a / h2;
            l_top_right = k * d01;
        } else if i == n - 1 {
            // Ghost u_n = u_{n-2} - 2h (δ₁₀u_0 + δ₁₁u_{n-1}).
            let k = -(2.0 * a / h + b);
            diag[i] = -2.0 * a / h2 + k * d11 + c;
            lower[i] = 2.0 * a / h2;
            l_bottom_left = k * d10;
        } else {
            let (bl, bu) = if b >= 0.0 { (0.0, b / h) } else { (-b / h, 0.0) };
            lower[i] = a / h2 + bl;
            upper[i] = a / h2 + bu;
            diag[i] = -2.0 * a / h2 - bl - bu + c;
        }
    }

    for v in lower.iter_mut().chain(upper.iter_mut()) {
        *v *= -dt;
    }
    for d in diag.iter_mut() {
        *d = 1.0 - dt * *d;
    }
    let top_right = -dt * l_top_right;
    let bottom_left = -dt * l_bottom_left;

    let solver = BorderedSolver::new(&lower, &diag, &upper, top_right, bottom_left)
        .ok_or(Error::Singular { dt })?;
    Ok(StepOperator {
        n,
        dt,
        lower,
        diag,
        upper,
        top_right,
        bottom_left,
        degenerate_warning,
        solver,
    })
}

/// One implicit step: solves `(I - dt L) u⁺ = u`.
pub fn step(state: &GridFunction, op: &StepOperator) -> Result<GridFunction> {
    if state.n() != op.n {
        return Err(Error::LengthMismatch {
            expected: op.n,
            got: state.n(),
        });
    }
    GridFunction::new(op.solver.solve(state.values(), op.dt)?)
        .map_err(|_| Error::Singular { dt: op.dt })
}

/// Number of steps of size `dt` needed to reach `t_final`.
pub(crate) fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(((t_final / dt) - 1e-9).ceil().max(1.0) as usize)
}

/// Repeated implicit steps from `u0` to `t_final`, recording `z`, `V∓` and
/// the sup-norm at `t = 0`, every `record.every` steps, and at the end.
pub fn simulate(
    problem: &ParabolicProblem,
    u0: &GridFunction,
    t_final: f64,
    dt: f64,
    record: &Recording,
) -> Result<Trajectory> {
    let steps = step_count(t_final, dt)?;
    let n = u0.n();
    let mut op = assemble_at(problem, n, dt, dt)?;
    let mut traj = Trajectory::new(record.keep_snapshots);
    traj.record(0.0, Snapshot::Grid(u0.clone()), record.tol);
    let mut u = u0.clone();
    for k in 1..=steps {
        let t = k as f64 * dt;
        if !problem.is_autonomous() && k > 1 {
            op = assemble_at(problem, n, dt, t)?;
        }
        u = step(&u, &op)?;
        if k % record.every == 0 || k == steps {
            traj.record(t, Snapshot::Grid(u.clone()), record.tol);
        }
    }
    Ok(traj)
}

/// Runs `simulate` and also returns the final state.
pub fn simulate_to_end(
    problem: &ParabolicProblem,
    u0: &GridFunction,
    t_final: f64,
    dt: f64,
    record: &Recording,
) -> Result<(Trajectory, GridFunction)> {
    let mut rec = *record;
    rec.keep_snapshots = true;
    let mut traj = simulate(problem, u0, t_final, dt, &rec)?;
    let last = match traj.snapshots.as_ref().and_then(|s| s.last()) {
        Some(Snapshot::Grid(g)) => g.clone(),
        _ => u0.clone(),
    };
    if !record.keep_snapshots {
        traj.snapshots = None;
    }
    Ok((traj, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::{zero_number, Tolerance};
    use std::f64::consts::PI;

    fn heat_like(a: CoefficientField, b: f64, c: f64) -> ParabolicProblem {
        ParabolicProblem::new(
            a,
            CoefficientField::constant(b),
            CoefficientField::constant(c),
            BoundarySpec::Neumann,
        )
    }

    /// Hand-assembled 3x3 heat matrix, h = 1/2, dt = 0.1: dt/h² = 0.4.
    #[test]
    fn three_point_heat_matrix() {
        let op = assemble(&ParabolicProblem::heat(), 3, 0.1).unwrap();
        let expected = [[1.8, -0.8, 0.0], [-0.4, 1.8, -0.4], [0.0, -0.8, 1.8]];
        let m = op.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - expected[i][j]).abs() < 1e-14, "({i},{j}) {}", m[i][j]);
            }
        }
    }

    #[test]
    fn potential_shifts_diagonal() {
        let base = assemble(&ParabolicProblem::heat(), 9, 0.01).unwrap();
        let shifted = assemble(&heat_like(CoefficientField::constant(1.0), 0.0, -1.0), 9, 0.01).unwrap();
        for i in 0..9 {
            assert!((shifted.row(i).1 - base.row(i).1 - 0.01).abs() < 1e-14);
        }
    }

    #[test]
    fn corner_entries_follow_cross_constants() {
        let mut p = ParabolicProblem::heat();
        p.bc = BoundarySpec::NonSeparated {
            d00: 0.0,
            d01: -2.0,
            d10: 0.0,
            d11: 0.0,
        };
        let (n, dt) = (11, 0.01);
        let h = 0.1;
        let op = assemble(&p, n, dt).unwrap();
        let (tr, bl) = op.corners();
        // Row 0 of L gains (2a/h) δ₀₁ u_{n-1}; I - dt L negates it.
        assert!((tr - (-dt * (2.0 / h) * -2.0)).abs() < 1e-12);
        assert_eq!(bl, 0.0);
        assert!(!op.has_m_matrix_sign_pattern());
        assert_eq!(assemble(&ParabolicProblem::heat(), n, dt).unwrap().corners(), (0.0, 0.0));
    }

    #[test]
    fn assembly_errors() {
        let p = heat_like(CoefficientField::constant(1.0), 0.0, 2.0);
        assert!(matches!(assemble(&p, 9, 0.5), Err(Error::Stability { .. })));
        assert!(assemble(&p, 9, 0.4).is_ok());
        let bad = heat_like(CoefficientField::polynomial([0.0, 1.0]), 0.0, 0.0);
        assert!(matches!(
            assemble(&bad, 9, 0.1),
            Err(Error::NonPositiveDiffusion { .. })
        ));
        let op = assemble(&bad.degenerate(), 9, 0.1).unwrap();
        assert!(op.degenerate_warning());
    }

    #[test]
    fn constants_are_equilibria() {
        let p = heat_like(CoefficientField::sinusoid(0.5, PI, 1.0), 0.3, 0.0);
        let op = assemble(&p, 65, 0.01).unwrap();
        let u = GridFunction::from_fn(65, |_| 2.5).unwrap();
        let v = step(&u, &op).unwrap();
        assert!(v.max_abs_diff(&u).unwrap() < 1e-12);
    }

    #[test]
    fn cosine_decays_at_implicit_euler_rate() {
        let dt = 1e-4;
        let op = assemble(&ParabolicProblem::heat(), 257, dt).unwrap();
        let u = GridFunction::from_fn(257, |x| (PI * x).cos()).unwrap();
        let v = step(&u, &op).unwrap();
        let ratio = v.sup_norm() / u.sup_norm();
        let exact = (-PI * PI * dt).exp();
        assert!(ratio >= exact * (1.0 - 2e-3) && ratio <= exact * (1.0 + 2e-3));
        let oracle = 1.0 / (1.0 + PI * PI * dt);
        assert!((ratio - oracle).abs() / oracle < 1e-4);
    }

    #[test]
    fn three_mode_keeps_three_zeros() {
        let op = assemble(&ParabolicProblem::heat(), 257, 1e-3).unwrap();
        let u = GridFunction::from_fn(257, |x| (3.0 * PI * x).cos()).unwrap();
        let v = step(&u, &op).unwrap();
        assert_eq!(zero_number(&v, Tolerance::default()).z, 3);
    }

    #[test]
    fn zero_initial_stays_zero() {
        let u0 = GridFunction::zeros(33).unwrap();
        let traj = simulate(&ParabolicProblem::heat(), &u0, 0.1, 0.01, &Recording::every(1)).unwrap();
        assert!(traj.z_series.iter().all(|&z| z == 0));
        assert!(traj.sup_norms.iter().all(|&s| s == 0.0));
        assert_eq!(traj.len(), 11);
        traj.validate().unwrap();
    }

    #[test]
    fn two_mode_never_gains_zeros() {
        let u0 = GridFunction::from_fn(257, |x| (2.0 * PI * x).cos()).unwrap();
        let traj = simulate(&ParabolicProblem::heat(), &u0, 0.2, 1e-3, &Recording::every(1)).unwrap();
        assert_eq!(traj.z_series[0], 2);
        assert!(traj.z_series.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn time_dependent_reassembly_matches_frozen_when_blend_is_trivial() {
        let p = heat_like(CoefficientField::constant(1.0), 0.2, -0.1);
        let td = TimeDependence {
            b_alt: CoefficientField::constant(0.2),
            c_alt: CoefficientField::constant(-0.1),
            blend: TimeBlend::Periodic { omega: 3.0 },
        };
        let u0 = GridFunction::from_fn(65, |x| (2.0 * PI * x).cos() + 0.3).unwrap();
        let rec = Recording::every(1);
        let (_, a) = simulate_to_end(&p, &u0, 0.05, 0.005, &rec).unwrap();
        let (_, b) = simulate_to_end(&p.clone().with_time_dependence(td), &u0, 0.05, 0.005, &rec).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-13);
    }

    #[test]
    fn cross_sign_classifier() {
        let bc = |d01, d10| BoundarySpec::NonSeparated { d00: 0.0, d01, d10, d11: 0.0 };
        assert_eq!(bc(-1.0, 1.0).cross_sign(), CrossSign::VMinus);
        assert_eq!(bc(1.0, -1.0).cross_sign(), CrossSign::VPlus);
        assert_eq!(BoundarySpec::Neumann.cross_sign(), CrossSign::Separated);
        assert_eq!(bc(1.0, 1.0).cross_sign(), CrossSign::Other);
    }
}
