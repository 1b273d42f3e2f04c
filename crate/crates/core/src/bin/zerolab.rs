use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use zerolab::generator::{extract_coefficients_with, ParabolicSemigroup, ProbeOptions, TransportSemigroup};
use zerolab::harness::{run_campaign, witness_search, ProblemConfig, RunConfig, WitnessFamily};
use zerolab::{
    check_monotone, BoundarySpec, CoefficientField, Error, Functional, ParabolicProblem, Result, Trajectory,
    TransportProblem,
};

#[derive(Parser)]
#[command(name = "zerolab", version, about = "Zero-number Lyapunov functionals on 1-D semiflows")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Grid points on [0, 1].
    #[arg(long, default_value_t = 257)]
    n: usize,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long = "eps-rel", default_value_t = 1e-9)]
    eps_rel: f64,
    /// Output directory; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Kind {
    Parabolic,
    Delay,
    Transport,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Diffusion (parabolic): a number or a JSON coefficient field.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    a: String,
    /// Drift (parabolic) or speed (transport).
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Potential.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    c: String,
    /// `neumann` or `d00,d01,d10,d11`.
    #[arg(long, default_value = "neumann", allow_hyphen_values = true)]
    bc: String,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    p: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    q: f64,
    /// Delay length.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long = "a-coef", default_value_t = -1.0, allow_hyphen_values = true)]
    a_coef: f64,
    #[arg(long = "alpha-tilde", default_value_t = 0.0, allow_hyphen_values = true)]
    alpha_tilde: f64,
    /// Highest mode of the random initial data.
    #[arg(long = "k-max", default_value_t = 8)]
    k_max: usize,
    /// Functional to check; defaults to the one the theory predicts.
    #[arg(long)]
    functional: Option<String>,
    /// Record every k-th step.
    #[arg(long = "record-every", default_value_t = 1)]
    record_every: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Target {
    Heat,
    Parabolic,
    Transport,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    PositiveDelay,
    NegativeDelay,
}

#[derive(Subcommand)]
enum Cmd {
    /// Implicit-Euler parabolic runs from random Neumann data.
    SimulateParabolic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Linear delay equation `x' = -p x(t - r) + q x(t)` from random histories.
    SimulateDelay {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Transport with boundary feedback from random profiles.
    SimulateTransport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Recover generator coefficients from a semigroup.
    ProbeGenerator {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = Target::Heat)]
        target: Target,
        #[arg(long = "t-small", default_value_t = 1e-7)]
        t_small: f64,
        #[arg(long, default_value_t = 0.2)]
        width: f64,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Seeded campaign of trials.
    Campaign {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = Kind::Parabolic)]
        kind: Kind,
    },
    /// Search for a trajectory on which a functional increases.
    WitnessSearch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = FamilyArg::PositiveDelay)]
        family: FamilyArg,
        #[arg(long, default_value_t = 500)]
        budget: usize,
    },
    /// Re-verify monotonicity of a trajectory CSV.
    Check {
        file: PathBuf,
        #[arg(long, default_value = "z")]
        functional: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

fn parse_bc(text: &str) -> Result<BoundarySpec> {
    if text.eq_ignore_ascii_case("neumann") {
        return Ok(BoundarySpec::Neumann);
    }
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bc `{text}`: {e}"))))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        &[d00, d01, d10, d11] => Ok(BoundarySpec::NonSeparated { d00, d01, d10, d11 }),
        _ => Err(Error::Parse(format!("bc `{text}` needs four comma-separated values"))),
    }
}

/// `0.3` or `{"kind": "sinusoid", "amp": 0.5, "freq": 3.14, "offset": 1}`.
fn parse_field(text: &str) -> Result<CoefficientField> {
    match text.trim().parse::<f64>() {
        Ok(v) => Ok(CoefficientField::constant(v)),
        Err(_) => serde_json::from_str(text).map_err(|e| Error::Parse(format!("coefficient `{text}`: {e}"))),
    }
}

impl ProblemArgs {
    fn b_or(&self, default: f64) -> Result<CoefficientField> {
        match &self.b {
            Some(text) => parse_field(text),
            None => Ok(CoefficientField::constant(default)),
        }
    }

    fn parabolic(&self) -> Result<ParabolicProblem> {
        Ok(ParabolicProblem::new(
            parse_field(&self.a)?,
            self.b_or(0.0)?,
            parse_field(&self.c)?,
            parse_bc(&self.bc)?,
        ))
    }

    fn transport(&self) -> Result<TransportProblem> {
        Ok(TransportProblem::new(
            self.b_or(1.0)?,
            parse_field(&self.c)?,
            self.a_coef,
            self.alpha_tilde,
        ))
    }

    fn config(&self, kind: Kind) -> Result<(ProblemConfig, f64, f64)> {
        Ok(match kind {
            Kind::Parabolic => (ProblemConfig::Parabolic(self.parabolic()?), 1e-3, 0.5),
            Kind::Delay => (
                ProblemConfig::Delay {
                    p: self.p,
                    q: self.q,
                    r: self.r,
                },
                self.r / 200.0,
                20.0,
            ),
            Kind::Transport => (ProblemConfig::Transport(self.transport()?), 5e-3, 5.0),
        })
    }
}

/// Merges `overlay` into `base`, recursing into objects.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn build_config(common: &Common, problem: &ProblemArgs, kind: Kind) -> Result<RunConfig> {
    let (problem_cfg, dt, t_final) = problem.config(kind)?;
    let mut cfg = RunConfig::new(problem_cfg, common.dt.unwrap_or(dt), common.t_final.unwrap_or(t_final));
    cfg.n = common.n;
    cfg.seed = common.seed;
    cfg.trials = common.trials;
    cfg.eps_rel = common.eps_rel;
    cfg.k_max = problem.k_max;
    cfg.record_every = problem.record_every;
    cfg.functional = problem.functional.as_deref().map(str::parse).transpose()?;
    cfg.out_dir = common.out.clone();
    if let Some(path) = &common.config {
        let overlay: Value = serde_json::from_str(&read_text(path)?)?;
        let mut base = serde_json::to_value(&cfg)?;
        if let (Some(new_kind), Some(old_kind)) = (
            overlay.pointer("/problem/kind").cloned(),
            base.pointer("/problem/kind").cloned(),
        ) {
            if new_kind != old_kind {
                base["problem"] = Value::Null;
            }
        }
        merge(&mut base, overlay);
        cfg = serde_json::from_value(base)?;
    }
    Ok(cfg)
}

fn simulate(common: &Common, problem: &ProblemArgs, kind: Kind) -> Result<i32> {
    let cfg = build_config(common, problem, kind)?;
    let report = run_campaign(&cfg)?;
    if cfg.out_dir.is_none() {
        match common.format {
            Format::Json => println!("{}", report.to_json()?),
            Format::Csv if cfg.trials == 1 && report.errors == 0 => {
                let init = zerolab::harness::random_initial(cfg.seed, &cfg.initial_spec())?;
                print!("{}", zerolab::harness::run_single(&cfg, &init)?.to_csv());
            }
            Format::Csv => println!("{}", report.to_json()?),
        }
    }
    for r in report.reports.iter().filter(|r| r.error.is_some()) {
        eprintln!("trial {}: {}", r.index, r.error.as_deref().unwrap_or_default());
    }
    eprintln!(
        "{} trials, {} failures, {} errors ({})",
        report.trials,
        report.failures,
        report.errors,
        report.functional.name()
    );
    Ok(report.exit_code())
}

fn probe(common: &Common, problem: &ProblemArgs, target: Target, t_small: f64, width: f64, stride: usize) -> Result<i32> {
    let opts = ProbeOptions {
        width,
        stride,
        ..ProbeOptions::default()
    };
    let est = match target {
        Target::Heat => extract_coefficients_with(&ParabolicSemigroup::new(ParabolicProblem::heat(), common.n), t_small, &opts)?,
        Target::Parabolic => {
            extract_coefficients_with(&ParabolicSemigroup::new(problem.parabolic()?, common.n), t_small, &opts)?
        }
        Target::Transport => {
            extract_coefficients_with(&TransportSemigroup::new(problem.transport()?, common.n)?, t_small, &opts)?
        }
    };
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            write_text(&dir.join("coefficients.csv"), &est.to_csv())?;
            write_text(&dir.join("paths.csv"), &est.paths_csv())?;
            write_text(&dir.join("summary.json"), &est.summary_json()?)?;
        }
        None => match common.format {
            Format::Csv => print!("{}", est.to_csv()),
            Format::Json => println!("{}", est.summary_json()?),
        },
    }
    let parabolic = target != Target::Transport;
    Ok(if parabolic && !est.alpha_nonnegative() { 1 } else { 0 })
}

fn witness(common: &Common, family: FamilyArg, budget: usize) -> Result<i32> {
    let fam = match family {
        FamilyArg::PositiveDelay => WitnessFamily::positive_feedback_delay(),
        FamilyArg::NegativeDelay => WitnessFamily::negative_feedback_delay(),
    };
    let fam = match &common.config {
        Some(path) => serde_json::from_str(&read_text(path)?)?,
        None => fam,
    };
    let report = witness_search(&fam, budget, common.seed)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            write_text(&dir.join("witness.json"), &text)?;
        }
        None => println!("{text}"),
    }
    Ok(if report.witness.is_some() { 1 } else { 0 })
}

fn check(file: &Path, functional: &str, format: Format) -> Result<i32> {
    let functional: Functional = functional.parse()?;
    let traj = Trajectory::from_csv(&read_text(file)?)?;
    let report = check_monotone(&traj, functional);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Csv => {
            println!("t_before,t_after,value_before,value_after");
            for v in &report.violations {
                println!("{},{},{},{}", v.t_before, v.t_after, v.value_before, v.value_after);
            }
        }
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::SimulateParabolic { common, problem } => simulate(&common, &problem, Kind::Parabolic),
        Cmd::SimulateDelay { common, problem } => simulate(&common, &problem, Kind::Delay),
        Cmd::SimulateTransport { common, problem } => simulate(&common, &problem, Kind::Transport),
        Cmd::Campaign { common, problem, kind } => simulate(&common, &problem, kind),
        Cmd::ProbeGenerator {
            common,
            problem,
            target,
            t_small,
            width,
            stride,
        } => probe(&common, &problem, target, t_small, width, stride),
        Cmd::WitnessSearch { common, family, budget } => witness(&common, family, budget),
        Cmd::Check {
            file,
            functional,
            format,
        } => check(&file, &functional, format),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
