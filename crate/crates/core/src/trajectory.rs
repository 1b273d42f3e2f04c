//! Recorded trajectories and the monotonicity checks run against them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::delay::History;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Samples};
use crate::lyapunov::{v_minus_of, v_plus_of, zero_number, Functional, Tolerance};

/// Exact header of the trajectory CSV.
pub const TRAJECTORY_CSV_HEADER: &str = "t,z,v_minus,v_plus,sup_norm,degenerate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Snapshot {
    Grid(GridFunction),
    History(History),
}

impl Snapshot {
    pub fn values(&self) -> &[f64] {
        match self {
            Snapshot::Grid(g) => g.values(),
            Snapshot::History(h) => h.values(),
        }
    }
}

/// How often, and how much, to record along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recording {
    pub every: usize,
    pub keep_snapshots: bool,
    pub tol: Tolerance,
}

impl Recording {
    pub fn every(every: usize) -> Self {
        Recording {
            every: every.max(1),
            keep_snapshots: false,
            tol: Tolerance::default(),
        }
    }

    pub fn with_snapshots(mut self) -> Self {
        self.keep_snapshots = true;
        self
    }

    pub fn with_tol(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }
}

impl Default for Recording {
    fn default() -> Self {
        Recording::every(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub z_series: Vec<usize>,
    pub v_minus_series: Vec<usize>,
    pub v_plus_series: Vec<usize>,
    pub sup_norms: Vec<f64>,
    pub degenerate_mask: Vec<bool>,
    pub snapshots: Option<Vec<Snapshot>>,
}

impl Trajectory {
    pub fn new(keep_snapshots: bool) -> Self {
        Trajectory {
            snapshots: keep_snapshots.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends one record computed from `state`.
    pub fn record(&mut self, t: f64, state: Snapshot, tol: Tolerance) {
        let zc = zero_number(state.values(), tol);
        self.push_counts(t, zc.z, zc.degenerate, crate::grid::sup_norm(state.values()));
        if let Some(s) = &mut self.snapshots {
            s.push(state);
        }
    }

    pub(crate) fn record_values<S: Samples + ?Sized>(&mut self, t: f64, state: &S, tol: Tolerance) {
        let values = state.samples();
        let zc = zero_number(values, tol);
        self.push_counts(t, zc.z, zc.degenerate, crate::grid::sup_norm(values));
    }

    fn push_counts(&mut self, t: f64, z: usize, degenerate: bool, sup: f64) {
        self.times.push(t);
        self.z_series.push(z);
        self.v_minus_series.push(v_minus_of(z));
        self.v_plus_series.push(v_plus_of(z));
        self.sup_norms.push(sup);
        self.degenerate_mask.push(degenerate);
    }

    pub fn series(&self, functional: Functional) -> &[usize] {
        match functional {
            Functional::Z => &self.z_series,
            Functional::VMinus => &self.v_minus_series,
            Functional::VPlus => &self.v_plus_series,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        for len in [
            self.z_series.len(),
            self.v_minus_series.len(),
            self.v_plus_series.len(),
            self.sup_norms.len(),
            self.degenerate_mask.len(),
        ] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, got: len });
            }
        }
        if let Some(s) = &self.snapshots {
            if s.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
        }
        if let Some(w) = self.times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "times not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    /// Trajectory CSV with header [`TRAJECTORY_CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.len() + 1));
        out.push_str(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.times[i],
                self.z_series[i],
                self.v_minus_series[i],
                self.v_plus_series[i],
                self.sup_norms[i],
                u8::from(self.degenerate_mask[i])
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == TRAJECTORY_CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `{TRAJECTORY_CSV_HEADER}`, found {other:?}"
                )))
            }
        }
        let mut traj = Trajectory::new(false);
        for (k, line) in lines.enumerate() {
            let row = k + 2;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(Error::Parse(format!("row {row}: expected 6 fields")));
            }
            let bad = |what: &str, e: &dyn std::fmt::Display| {
                Error::Parse(format!("row {row}: bad {what}: {e}"))
            };
            traj.times.push(fields[0].parse().map_err(|e| bad("t", &e))?);
            traj.z_series.push(fields[1].parse().map_err(|e| bad("z", &e))?);
            traj.v_minus_series
                .push(fields[2].parse().map_err(|e| bad("v_minus", &e))?);
            traj.v_plus_series
                .push(fields[3].parse().map_err(|e| bad("v_plus", &e))?);
            traj.sup_norms
                .push(fields[4].parse().map_err(|e| bad("sup_norm", &e))?);
            let degenerate = match fields[5] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(bad("degenerate", &other)),
            };
            traj.degenerate_mask.push(degenerate);
        }
        traj.validate()?;
        Ok(traj)
    }

    /// Snapshot dump of record `index` as `x,value` CSV. History snapshots use
    /// their `θ` abscissae.
    pub fn snapshot_csv(&self, index: usize) -> Option<String> {
        let snap = self.snapshots.as_ref()?.get(index)?;
        Some(match snap {
            Snapshot::Grid(g) => g.to_csv(),
            Snapshot::History(h) => h.to_csv(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t_before: f64,
    pub t_after: f64,
    pub value_before: usize,
    pub value_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub functional: Functional,
    pub violations: Vec<Violation>,
    pub masked_count: usize,
    pub pass: bool,
}

/// Compares consecutive unmasked entries; any strict increase is a violation.
pub fn check_monotone(traj: &Trajectory, functional: Functional) -> MonotonicityReport {
    let series = traj.series(functional);
    let mut violations = Vec::new();
    let mut masked_count = 0;
    let mut last: Option<(f64, usize)> = None;
    for i in 0..series.len() {
        if traj.degenerate_mask[i] {
            masked_count += 1;
            continue;
        }
        let cur = (traj.times[i], series[i]);
        if let Some((t0, v0)) = last {
            if cur.1 > v0 {
                violations.push(Violation {
                    t_before: t0,
                    t_after: cur.0,
                    value_before: v0,
                    value_after: cur.1,
                });
            }
        }
        last = Some(cur);
    }
    MonotonicityReport {
        functional,
        pass: violations.is_empty(),
        violations,
        masked_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_from(z: &[usize], mask: &[bool]) -> Trajectory {
        let mut t = Trajectory::new(false);
        for (i, (&zi, &m)) in z.iter().zip(mask).enumerate() {
            t.push_counts(i as f64, zi, m, 1.0);
        }
        t
    }

    #[test]
    fn monotone_examples() {
        let t = traj_from(&[3, 3, 1, 1, 0], &[false; 5]);
        assert!(check_monotone(&t, Functional::Z).pass);

        let t = traj_from(&[2, 2, 4], &[false; 3]);
        let r = check_monotone(&t, Functional::Z);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].t_before, 1.0);
        assert_eq!(r.violations[0].t_after, 2.0);
        assert_eq!((r.violations[0].value_before, r.violations[0].value_after), (2, 4));

        let t = traj_from(&[3, 9, 5, 1], &[false, true, false, false]);
        let r = check_monotone(&t, Functional::Z);
        assert_eq!(r.masked_count, 1);
        assert_eq!(r.violations.len(), 1);
        assert_eq!((r.violations[0].value_before, r.violations[0].value_after), (3, 5));
    }

    #[test]
    fn csv_round_trip_and_header() {
        let t = traj_from(&[4, 3, 3], &[false, true, false]);
        let csv = t.to_csv();
        assert!(csv.starts_with("t,z,v_minus,v_plus,sup_norm,degenerate\n"));
        let back = Trajectory::from_csv(&csv).unwrap();
        assert_eq!(back, t);
        assert!(Trajectory::from_csv("t,z\n0,1\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mask_skip_equivalence(entries in proptest::collection::vec((0usize..6, any::<bool>()), 0..40)) {
                let z: Vec<usize> = entries.iter().map(|e| e.0).collect();
                let mask: Vec<bool> = entries.iter().map(|e| e.1).collect();
                let full = check_monotone(&traj_from(&z, &mask), Functional::Z);
                let kept: Vec<usize> = entries.iter().filter(|e| !e.1).map(|e| e.0).collect();
                let plain_pass = kept.windows(2).all(|w| w[1] <= w[0]);
                prop_assert_eq!(full.pass, plain_pass);
                prop_assert_eq!(full.pass, full.violations.is_empty());
            }
        }
    }
}
