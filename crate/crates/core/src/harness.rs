//! Seeded random initial data, trial campaigns and witness search.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::{self, DelayProblem, History};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lyapunov::{zero_number, Functional, Tolerance};
use crate::parabolic::{self, BoundarySpec, CrossSign, ParabolicProblem};
use crate::trajectory::{check_monotone, Recording, Trajectory, Violation};
use crate::transport::{self, TransportProblem};

/// Basis for random series on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `cos(kπx)`, `k = 0..=k_max`: zero slope at both ends.
    Neumann,
    /// Cosines and sines.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    Fourier { n: usize, k_max: usize, basis: BasisKind },
    History { m: usize, span: f64, modes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Grid(GridFunction),
    History(History),
}

/// Coefficients of a truncated series `Σ c_k cos(kπs) + s_k sin(kπs)` in
/// the normalized variable `s ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSeries {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl RandomSeries {
    /// Coefficients uniform in `[-1, 1]`.
    pub fn draw(seed: u64, k_max: usize, with_sines: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cos = (0..=k_max).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sin = if with_sines {
            (0..=k_max).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        } else {
            Vec::new()
        };
        RandomSeries { cos, sin }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let c: f64 = self
            .cos
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * PI * s).cos())
            .sum();
        let d: f64 = self
            .sin
            .iter()
            .enumerate()
            .map(|(k, b)| b * (k as f64 * PI * s).sin())
            .sum();
        c + d
    }

    fn grid(&self, n: usize) -> Result<GridFunction> {
        GridFunction::from_fn(n, |x| self.eval(x))
    }

    fn history(&self, m: usize, span: f64) -> Result<History> {
        History::from_fn(m, span, |theta| self.eval((theta + span) / span))
    }
}

impl InitialSpec {
    fn series(&self, seed: u64) -> Result<RandomSeries> {
        match *self {
            InitialSpec::Fourier { k_max, basis, .. } => {
                if k_max == 0 {
                    return Err(Error::InvalidArgument("k_max must be at least 1".into()));
                }
                Ok(RandomSeries::draw(seed, k_max, basis == BasisKind::Full))
            }
            InitialSpec::History { modes, .. } => {
                if modes == 0 {
                    return Err(Error::InvalidArgument("modes must be at least 1".into()));
                }
                Ok(RandomSeries::draw(seed, modes, true))
            }
        }
    }

    fn realize(&self, series: &RandomSeries) -> Result<Initial> {
        match *self {
            InitialSpec::Fourier { n, .. } => Ok(Initial::Grid(series.grid(n)?)),
            InitialSpec::History { m, span, .. } => Ok(Initial::History(series.history(m, span)?)),
        }
    }
}

/// Deterministic random initial datum for `seed`.
pub fn random_initial(seed: u64, spec: &InitialSpec) -> Result<Initial> {
    spec.realize(&spec.series(seed)?)
}

/// Problem section of a [`RunConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Parabolic(ParabolicProblem),
    /// `ẋ = -p x(t - r) + q x(t)`; the history grid uses `round(r / dt)` steps.
    Delay {
        p: f64,
        q: f64,
        #[serde(default = "one")]
        r: f64,
    },
    Transport(TransportProblem),
}

fn one() -> f64 {
    1.0
}

impl ProblemConfig {
    /// The functional each theory predicts to be nonincreasing.
    pub fn default_functional(&self) -> Functional {
        match self {
            ProblemConfig::Parabolic(p) => match p.bc.cross_sign() {
                CrossSign::VMinus => Functional::VMinus,
                CrossSign::VPlus => Functional::VPlus,
                _ => Functional::Z,
            },
            ProblemConfig::Delay { p, .. } => {
                if *p > 0.0 {
                    Functional::VMinus
                } else if *p < 0.0 {
                    Functional::VPlus
                } else {
                    Functional::Z
                }
            }
            ProblemConfig::Transport(t) => t.expected_functional(),
        }
    }
}

fn default_n() -> usize {
    257
}
fn default_trials() -> usize {
    1
}
fn default_eps() -> f64 {
    Tolerance::DEFAULT_EPS_REL
}
fn default_k_max() -> usize {
    8
}
fn default_every() -> usize {
    1
}

/// Everything needed to reproduce a campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default = "default_n")]
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_eps")]
    pub eps_rel: f64,
    /// Highest Fourier mode (or history mode) of the random initial data.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_every")]
    pub record_every: usize,
    #[serde(default)]
    pub functional: Option<Functional>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(problem: ProblemConfig, dt: f64, t_final: f64) -> Self {
        RunConfig {
            problem,
            n: default_n(),
            dt,
            t_final,
            seed: 0,
            trials: default_trials(),
            eps_rel: default_eps(),
            k_max: default_k_max(),
            record_every: default_every(),
            functional: None,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn functional(&self) -> Functional {
        self.functional.unwrap_or_else(|| self.problem.default_functional())
    }

    pub fn tolerance(&self) -> Result<Tolerance> {
        Tolerance::new(self.eps_rel)
    }

    pub fn recording(&self) -> Result<Recording> {
        Ok(Recording::every(self.record_every).with_tol(self.tolerance()?))
    }

    pub fn initial_spec(&self) -> InitialSpec {
        match &self.problem {
            ProblemConfig::Parabolic(p) => InitialSpec::Fourier {
                n: self.n,
                k_max: self.k_max,
                basis: if p.bc.is_neumann() {
                    BasisKind::Neumann
                } else {
                    BasisKind::Full
                },
            },
            ProblemConfig::Delay { r, .. } => InitialSpec::History {
                m: ((r / self.dt).round() as usize).max(1),
                span: *r,
                modes: self.k_max,
            },
            ProblemConfig::Transport(_) => InitialSpec::Fourier {
                n: self.n,
                k_max: self.k_max,
                basis: BasisKind::Full,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.tolerance()?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if let ProblemConfig::Delay { r, .. } = self.problem {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("delay must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

/// Runs one problem from one initial datum.
pub fn run_single(config: &RunConfig, initial: &Initial) -> Result<Trajectory> {
    let rec = config.recording()?;
    match (&config.problem, initial) {
        (ProblemConfig::Parabolic(p), Initial::Grid(u0)) => {
            parabolic::simulate(p, u0, config.t_final, config.dt, &rec)
        }
        (ProblemConfig::Delay { p, q, .. }, Initial::History(h)) => {
            delay::simulate(&DelayProblem::linear(*p, *q), h, config.t_final, &rec)
        }
        (ProblemConfig::Transport(tp), Initial::Grid(u0)) => {
            let cmap = tp.characteristics(u0.n())?;
            Ok(transport::evolve(tp, u0, config.t_final, config.dt, &cmap, &rec)?.trajectory)
        }
        _ => Err(Error::InvalidArgument(
            "initial datum does not match the problem kind".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub index: usize,
    pub seed: u64,
    pub pass: bool,
    pub violations: Vec<Violation>,
    pub masked_count: usize,
    pub z_initial: Option<usize>,
    pub z_final: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub functional: Functional,
    pub seed: u64,
    pub trials: usize,
    /// Trials with `pass = false`, including those that errored.
    pub failures: usize,
    pub errors: usize,
    pub total_violations: usize,
    pub reports: Vec<TrialReport>,
}

impl CampaignReport {
    /// `0` when every trial passed, `2` when any trial errored, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            2
        } else if self.failures > 0 {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn run_trial(config: &RunConfig, index: usize, functional: Functional) -> (TrialReport, Option<String>) {
    let seed = config.seed.wrapping_add(index as u64);
    let outcome = random_initial(seed, &config.initial_spec()).and_then(|init| run_single(config, &init));
    match outcome {
        Ok(traj) => {
            let report = check_monotone(&traj, functional);
            (
                TrialReport {
                    index,
                    seed,
                    pass: report.pass,
                    violations: report.violations,
                    masked_count: report.masked_count,
                    z_initial: traj.z_series.first().copied(),
                    z_final: traj.z_series.last().copied(),
                    error: None,
                },
                Some(traj.to_csv()),
            )
        }
        Err(e) => (
            TrialReport {
                index,
                seed,
                pass: false,
                violations: Vec::new(),
                masked_count: 0,
                z_initial: None,
                z_final: None,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs all trials in parallel with seeds `seed + index`. Per-trial errors
/// are recorded in the report; only invalid configurations and output
/// failures return `Err`. With `out_dir` set, writes `trial_XXXX.csv` and
/// `summary.json`.
pub fn run_campaign(config: &RunConfig) -> Result<CampaignReport> {
    config.validate()?;
    let functional = config.functional();
    let mut results: Vec<(TrialReport, Option<String>)> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i, functional))
        .collect();
    results.sort_by_key(|(r, _)| r.index);

    let report = CampaignReport {
        functional,
        seed: config.seed,
        trials: config.trials,
        failures: results.iter().filter(|(r, _)| !r.pass).count(),
        errors: results.iter().filter(|(r, _)| r.error.is_some()).count(),
        total_violations: results.iter().map(|(r, _)| r.violations.len()).sum(),
        reports: results.iter().map(|(r, _)| r.clone()).collect(),
    };
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (r, csv) in &results {
            if let Some(csv) = csv {
                write_file(&dir.join(format!("trial_{:04}.csv", r.index)), csv)?;
            }
        }
        write_file(&dir.join("summary.json"), &report.to_json()?)?;
    }
    Ok(report)
}

/// A problem family searched for violations of a functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessFamily {
    /// `ẋ = -p x(t - 1) + q x(t)` over the grid `ps × qs`.
    Delay {
        ps: Vec<f64>,
        qs: Vec<f64>,
        m: usize,
        t_final: f64,
        modes: usize,
        functional: Functional,
    },
    /// Heat equation with non-separated boundary constants from `deltas`.
    Parabolic {
        deltas: Vec<[f64; 4]>,
        n: usize,
        dt: f64,
        t_final: f64,
        k_max: usize,
        functional: Functional,
    },
}

impl WitnessFamily {
    /// Delay equations with positive feedback checked against `V⁻`.
    pub fn positive_feedback_delay() -> Self {
        WitnessFamily::Delay {
            ps: vec![-1.0, -0.5, -2.0],
            qs: vec![0.0],
            m: 100,
            t_final: 10.0,
            modes: 6,
            functional: Functional::VMinus,
        }
    }

    /// Delay equations with negative feedback checked against `V⁻`.
    pub fn negative_feedback_delay() -> Self {
        WitnessFamily::Delay {
            ps: vec![1.0, 0.5, 2.0],
            qs: vec![0.0],
            m: 100,
            t_final: 10.0,
            modes: 6,
            functional: Functional::VMinus,
        }
    }

    fn combos(&self) -> usize {
        match self {
            WitnessFamily::Delay { ps, qs, .. } => ps.len() * qs.len(),
            WitnessFamily::Parabolic { deltas, .. } => deltas.len(),
        }
    }

    fn functional(&self) -> Functional {
        match self {
            WitnessFamily::Delay { functional, .. } | WitnessFamily::Parabolic { functional, .. } => *functional,
        }
    }

    fn params(&self, combo: usize) -> WitnessParams {
        match self {
            WitnessFamily::Delay { ps, qs, .. } => WitnessParams::Delay {
                p: ps[combo / qs.len()],
                q: qs[combo % qs.len()],
            },
            WitnessFamily::Parabolic { deltas, .. } => WitnessParams::Parabolic { deltas: deltas[combo] },
        }
    }

    /// Runs one candidate at the base resolution (`refine = 1`) or refined.
    fn run(&self, params: &WitnessParams, series: &RandomSeries, refine: usize) -> Result<Trajectory> {
        match (self, params) {
            (WitnessFamily::Delay { m, t_final, .. }, WitnessParams::Delay { p, q }) => {
                let hist = series.history(m * refine, 1.0)?;
                delay::simulate(&DelayProblem::linear(*p, *q), &hist, *t_final, &Recording::every(1))
            }
            (WitnessFamily::Parabolic { n, dt, t_final, .. }, WitnessParams::Parabolic { deltas }) => {
                let [d00, d01, d10, d11] = *deltas;
                let problem = ParabolicProblem::heat();
                let problem = ParabolicProblem {
                    bc: BoundarySpec::NonSeparated { d00, d01, d10, d11 },
                    ..problem
                };
                let u0 = series.grid((n - 1) * refine + 1)?;
                parabolic::simulate(&problem, &u0, *t_final, dt / refine as f64, &Recording::every(refine))
            }
            _ => Err(Error::InvalidArgument("parameters do not match the family".into())),
        }
    }

    fn draw(&self, seed: u64) -> RandomSeries {
        match self {
            WitnessFamily::Delay { modes, .. } => RandomSeries::draw(seed, *modes, true),
            WitnessFamily::Parabolic { k_max, .. } => RandomSeries::draw(seed, *k_max, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessParams {
    Delay { p: f64, q: f64 },
    Parabolic { deltas: [f64; 4] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub attempt: usize,
    pub seed: u64,
    pub params: WitnessParams,
    pub initial: RandomSeries,
    pub violations: Vec<Violation>,
    /// Violations found again with the grid refined by a factor two.
    pub refined_violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub functional: Functional,
    pub budget: usize,
    pub spent: usize,
    /// Candidates whose violation disappeared under refinement.
    pub unconfirmed: usize,
    pub witness: Option<Witness>,
}

/// Seeded search over initial data and the family's parameter grid for a
/// trajectory on which `functional` increases between unmasked records and
/// still does after refining the grid.
pub fn witness_search(family: &WitnessFamily, budget: usize, seed: u64) -> Result<WitnessReport> {
    if budget == 0 {
        return Err(Error::Precondition("witness search needs a budget of at least 1".into()));
    }
    let combos = family.combos();
    if combos == 0 {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let functional = family.functional();
    let mut unconfirmed = 0;
    for attempt in 0..budget {
        let trial_seed = seed.wrapping_add(attempt as u64);
        let params = family.params(attempt % combos);
        let series = family.draw(trial_seed);
        let report = check_monotone(&family.run(&params, &series, 1)?, functional);
        if report.pass {
            continue;
        }
        let refined = check_monotone(&family.run(&params, &series, 2)?, functional);
        if refined.pass {
            unconfirmed += 1;
            continue;
        }
        return Ok(WitnessReport {
            functional,
            budget,
            spent: attempt + 1,
            unconfirmed,
            witness: Some(Witness {
                attempt,
                seed: trial_seed,
                params,
                initial: series,
                violations: report.violations,
                refined_violations: refined.violations,
            }),
        });
    }
    Ok(WitnessReport {
        functional,
        budget,
        spent: budget,
        unconfirmed,
        witness: None,
    })
}

/// Mean zero number of `draws` random Fourier data.
pub fn mean_zero_number(seed: u64, draws: usize, spec: &InitialSpec, tol: Tolerance) -> Result<f64> {
    let mut total = 0usize;
    for i in 0..draws {
        total += match random_initial(seed.wrapping_add(i as u64), spec)? {
            Initial::Grid(g) => zero_number(&g, tol).z,
            Initial::History(h) => zero_number(&h, tol).z,
        };
    }
    Ok(total as f64 / draws.max(1) as f64)
}
