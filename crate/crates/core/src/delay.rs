//! Method-of-steps integration of `ẋ(t) = h(x(t), x(t - r))` with history
//! segments `x_t(θ) = x(t + θ)`, `θ ∈ [-r, 0]`, as the state.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cubic_interp, Samples};
use crate::trajectory::{Recording, Snapshot, Trajectory};

/// Default number of history intervals per delay span.
pub const DEFAULT_HISTORY_STEPS: usize = 200;

/// Samples of a function on `[-r, 0]` at `θ_j = -r + j r / m`, `j = 0..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistoryRepr", into = "HistoryRepr")]
pub struct History {
    values: Vec<f64>,
    span: f64,
}

#[derive(Serialize, Deserialize)]
struct HistoryRepr {
    span: f64,
    values: Vec<f64>,
}

impl TryFrom<HistoryRepr> for History {
    type Error = Error;

    fn try_from(r: HistoryRepr) -> Result<Self> {
        History::new(r.values, r.span)
    }
}

impl From<History> for HistoryRepr {
    fn from(h: History) -> Self {
        HistoryRepr {
            span: h.span,
            values: h.values,
        }
    }
}

impl History {
    pub fn new(values: Vec<f64>, span: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::GridTooSmall {
                min: 2,
                got: values.len(),
            });
        }
        if !(span > 0.0 && span.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delay span must be positive, got {span}"
            )));
        }
        let m = values.len() - 1;
        if let Some((j, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: -span + j as f64 * span / m as f64,
                value: v,
            });
        }
        Ok(History { values, span })
    }

    /// Samples `f(θ)` with `m` intervals over `[-span, 0]`.
    pub fn from_fn(m: usize, span: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::GridTooSmall { min: 2, got: 1 });
        }
        let dt = span / m as f64;
        Self::new(
            (0..=m)
                .map(|j| if j == m { f(0.0) } else { f(-span + j as f64 * dt) })
                .collect(),
            span,
        )
    }

    pub fn constant(m: usize, span: f64, value: f64) -> Result<Self> {
        Self::from_fn(m, span, |_| value)
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// Number of intervals `m`.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.span / self.intervals() as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        if j == self.intervals() {
            0.0
        } else {
            -self.span + j as f64 * self.step()
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `x(t)`, the newest sample.
    pub fn current(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Cubic interpolation at `θ ∈ [-r, 0]` (clamped).
    pub fn eval(&self, theta: f64) -> f64 {
        cubic_interp(&self.values, -self.span, self.step(), theta)
    }

    pub fn sup_norm(&self) -> f64 {
        crate::grid::sup_norm(&self.values)
    }

    pub fn scale(&self, alpha: f64) -> History {
        History {
            values: self.values.iter().map(|v| alpha * v).collect(),
            span: self.span,
        }
    }

    /// `alpha * self + other`.
    pub fn axpy(&self, alpha: f64, other: &History) -> Result<History> {
        if self.values.len() != other.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(History {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + b)
                .collect(),
            span: self.span,
        })
    }

    pub fn max_abs_diff(&self, other: &History) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `theta,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,value\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.theta(j), v);
        }
        out
    }
}

impl Samples for History {
    fn samples(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// `h_v < 0`.
    Negative,
    /// `h_v > 0`.
    Positive,
}

impl Feedback {
    fn label(self) -> &'static str {
        match self {
            Feedback::Negative => "negative",
            Feedback::Positive => "positive",
        }
    }
}

pub type DelayFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DelayRhs {
    /// `ẏ = -p y(t - r) + q y(t)`.
    Linear { p: f64, q: f64 },
    General { h: DelayFn, feedback: Feedback },
}

impl std::fmt::Debug for DelayRhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DelayRhs::Linear { p, q } => write!(f, "Linear {{ p: {p}, q: {q} }}"),
            DelayRhs::General { feedback, .. } => write!(f, "General {{ feedback: {feedback:?} }}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DelayProblem {
    rhs: DelayRhs,
}

impl DelayProblem {
    pub fn linear(p: f64, q: f64) -> Self {
        DelayProblem {
            rhs: DelayRhs::Linear { p, q },
        }
    }

    /// A nonlinear right-hand side `h(u, v)` with declared feedback sign,
    /// spot-checked by centered differences in `v` on a grid over `[-2, 2]²`.
    pub fn general(h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, feedback: Feedback) -> Result<Self> {
        let h: DelayFn = Arc::new(h);
        let eps = 1e-6;
        for i in 0..9 {
            for j in 0..9 {
                let u = -2.0 + 0.5 * i as f64;
                let v = -2.0 + 0.5 * j as f64;
                let h_v = (h(u, v + eps) - h(u, v - eps)) / (2.0 * eps);
                let ok = match feedback {
                    Feedback::Negative => h_v < 0.0,
                    Feedback::Positive => h_v > 0.0,
                };
                if !ok {
                    return Err(Error::FeedbackSign {
                        declared: feedback.label(),
                        u,
                        v,
                        h_v,
                    });
                }
            }
        }
        Ok(DelayProblem {
            rhs: DelayRhs::General { h, feedback },
        })
    }

    pub fn rhs(&self) -> &DelayRhs {
        &self.rhs
    }

    /// Feedback sign of the delayed argument; `None` for `p = 0`.
    pub fn feedback(&self) -> Option<Feedback> {
        match self.rhs {
            DelayRhs::Linear { p, .. } if p > 0.0 => Some(Feedback::Negative),
            DelayRhs::Linear { p, .. } if p < 0.0 => Some(Feedback::Positive),
            DelayRhs::Linear { .. } => None,
            DelayRhs::General { feedback, .. } => Some(feedback),
        }
    }

    pub fn eval(&self, current: f64, delayed: f64) -> f64 {
        match &self.rhs {
            DelayRhs::Linear { p, q } => -p * delayed + q * current,
            DelayRhs::General { h, .. } => h(current, delayed),
        }
    }
}

/// Heun march on a growing buffer whose first `m + 1` entries are the initial
/// history. At step `k` the delayed values for the two stages are the exact
/// grid reads `buf[k]` and `buf[k + 1]`.
pub(crate) fn heun_march(
    buf: &mut Vec<f64>,
    m: usize,
    dt: f64,
    t0: f64,
    steps: usize,
    f: impl Fn(f64, f64) -> f64,
    mut on_step: impl FnMut(usize, &[f64]) -> Result<()>,
) -> Result<()> {
    let base = buf.len() - (m + 1);
    for s in 0..steps {
        let k = base + s;
        let cur = buf[k + m];
        let t = t0 + s as f64 * dt;
        let f0 = f(cur, buf[k]);
        let pred = cur + dt * f0;
        let f1 = f(pred, buf[k + 1]);
        let next = cur + 0.5 * dt * (f0 + f1);
        if !next.is_finite() || !f0.is_finite() || !f1.is_finite() {
            return Err(Error::NonFiniteRhs { t });
        }
        buf.push(next);
        on_step(s + 1, &buf[k + 1..k + m + 2])?;
    }
    Ok(())
}

/// Advances the history segment by `steps` steps of size `r / m`.
pub fn advance(hist: &History, problem: &DelayProblem, steps: usize) -> Result<History> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let m = hist.intervals();
    let mut buf = hist.values.clone();
    buf.reserve(steps);
    heun_march(&mut buf, m, hist.step(), 0.0, steps, |u, v| problem.eval(u, v), |_, _| Ok(()))?;
    let tail = buf.split_off(buf.len() - (m + 1));
    History::new(tail, hist.span)
}

/// Integrates to `t_final` recording `z`, `V∓` and sup-norm of each window.
pub fn simulate(problem: &DelayProblem, phi0: &History, t_final: f64, record: &Recording) -> Result<Trajectory> {
    Ok(simulate_with_trace(problem, phi0, t_final, record)?.0)
}

/// As [`simulate`], also returning the scalar trace `x(t_k)` for `t_k >= 0`
/// and the final window.
pub fn simulate_with_trace(
    problem: &DelayProblem,
    phi0: &History,
    t_final: f64,
    record: &Recording,
) -> Result<(Trajectory, Vec<f64>, History)> {
    let dt = phi0.step();
    let steps = crate::parabolic::step_count(t_final, dt)?;
    let m = phi0.intervals();
    let span = phi0.span;
    let mut traj = Trajectory::new(record.keep_snapshots);
    traj.record(0.0, Snapshot::History(phi0.clone()), record.tol);
    let mut buf = phi0.values.clone();
    buf.reserve(steps);
    heun_march(
        &mut buf,
        m,
        dt,
        0.0,
        steps,
        |u, v| problem.eval(u, v),
        |k, window| {
            if k % record.every == 0 || k == steps {
                let t = k as f64 * dt;
                if record.keep_snapshots {
                    traj.record(t, Snapshot::History(History::new(window.to_vec(), span)?), record.tol);
                } else {
                    traj.record_values(t, window, record.tol);
                }
            }
            Ok(())
        },
    )?;
    let trace = buf[m..].to_vec();
    let last = History::new(buf[buf.len() - (m + 1)..].to_vec(), span)?;
    Ok((traj, trace, last))
}
