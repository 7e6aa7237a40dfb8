//! `peu`: persistency of excitation checks, behavior checks and
//! counterexample construction from the command line.

pub mod error;
pub mod io;
pub mod repro;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use peu_core::adversary::{self, CertificateOptions, CloudOptions, Overrides, DEFAULT_TOL_CERT};
use peu_core::lemma::{self, VerdictOptions};
use peu_core::lti::{self, StateSpaceSystem, Trajectory};
use peu_core::numkit::DEFAULT_RTOL;
use peu_core::{signals, Execution};
use serde::{Deserialize, Serialize};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "peu", version, about = "Persistency of excitation and universal inputs for linear systems")]
pub struct Cli {
    /// Relative rank tolerance.
    #[arg(long, global = true, default_value_t = DEFAULT_RTOL)]
    pub rtol: f64,
    /// Tolerance for certificate residuals.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL_CERT)]
    pub tol_cert: f64,
    #[arg(long, global = true, env = "PEU_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; a directory for `counterexample`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Run data-parallel loops on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Persistency of excitation order of a signal.
    Pe {
        input: PathBuf,
        /// Check a single order instead of scanning all of them.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Simulate a system from a JSON description.
    Simulate {
        system: PathBuf,
        input: PathBuf,
        /// Initial state, comma separated; zero if omitted.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
    /// Does the input-output data span the depth-L behavior of the system?
    Check {
        system: PathBuf,
        /// CSV with `u*` and `y*` columns.
        data: PathBuf,
        #[arg(short = 'L', long = "depth", visible_alias = "L")]
        depth: usize,
    },
    /// Is the input universal for depth L and state dimension n?
    Universal {
        input: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(short = 'L', long = "depth", visible_alias = "L")]
        depth: usize,
        /// Output dimension of the counterexample system.
        #[arg(long, default_value_t = 1)]
        outputs: usize,
    },
    /// Build a system whose input-state data are rank deficient.
    Counterexample {
        input: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(short = 'L', long = "depth", visible_alias = "L", required_unless_present = "l0")]
        depth: Option<usize>,
        /// Depth-0 variant: the input covers u(0) ..= u(T).
        #[arg(long, conflicts_with = "depth")]
        l0: bool,
        #[arg(long, default_value_t = 1)]
        outputs: usize,
        /// JSON matrix for A.
        #[arg(long)]
        override_a: Option<PathBuf>,
        /// JSON vector for zeta.
        #[arg(long)]
        override_zeta: Option<PathBuf>,
        /// JSON matrix with one row per input coordinate and one column per kernel block.
        #[arg(long)]
        override_eta: Option<PathBuf>,
    },
    /// Sample one-state systems that generate rank-deficient data.
    Cloud {
        input: PathBuf,
        #[arg(short = 'L', long = "depth", visible_alias = "L")]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
        a_range: String,
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
        zeta_range: String,
    },
    /// Reproduce a worked example from the shipped fixtures.
    Repro { example: Example },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

/// Settings echoed into every JSON artifact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rtol: f64,
    pub tol_cert: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { rtol: DEFAULT_RTOL, tol_cert: DEFAULT_TOL_CERT, seed: 0 }
    }
}

#[derive(Serialize)]
struct WithConfig<'a, T> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A yes/no question was answered "no".
    False,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::False => 3,
        }
    }

    fn of(answer: bool) -> Status {
        if answer {
            Status::Ok
        } else {
            Status::False
        }
    }
}

#[derive(Debug)]
pub enum Emit {
    /// Written to `--out` if given, otherwise to standard output.
    Text(String),
    /// Files written into the `--out` directory.
    Files(Vec<(&'static str, String)>),
}

#[derive(Debug)]
pub struct Outcome {
    pub emit: Emit,
    pub status: Status,
}

fn json<T: Serialize>(cfg: &RunConfig, body: T) -> String {
    let mut s = serde_json::to_string_pretty(&WithConfig { config: cfg, body }).expect("serializable");
    s.push('\n');
    s
}

fn require(format: Option<Format>, allowed: &[Format], default: Format, command: &str) -> Result<Format> {
    let f = format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::Usage(format!("`{command}` does not support --format {f:?}").to_lowercase()))
    }
}

fn parse_range(what: &str, text: &str) -> Result<(f64, f64)> {
    match io::parse_list(what, text)?[..] {
        [lo, hi] if lo <= hi => Ok((lo, hi)),
        _ => Err(CliError::Usage(format!("{what}: expected `lo,hi` with lo <= hi"))),
    }
}

fn read_overrides(a: &Option<PathBuf>, zeta: &Option<PathBuf>, eta: &Option<PathBuf>) -> Result<Overrides> {
    let text = |p: &Path| io::read_text(p).map(|t| (p.display().to_string(), t));
    Ok(Overrides {
        a: a.as_deref().map(text).transpose()?.map(|(n, t)| io::parse_matrix(&n, &t)).transpose()?,
        zeta: zeta.as_deref().map(text).transpose()?.map(|(n, t)| io::parse_vector(&n, &t)).transpose()?,
        eta: eta.as_deref().map(text).transpose()?.map(|(n, t)| io::parse_eta(&n, &t)).transpose()?,
    })
}

#[derive(Serialize)]
struct SingleOrder<'a> {
    order: usize,
    is_pe: bool,
    report: &'a peu_core::numkit::RankReport,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = RunConfig { rtol: cli.rtol, tol_cert: cli.tol_cert, seed: cli.seed };
    for (name, v) in [("--rtol", cfg.rtol), ("--tol-cert", cfg.tol_cert)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage(format!("{name} must be positive and finite")));
        }
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let cert_opts = |overrides| CertificateOptions {
        rtol: cfg.rtol,
        tol_cert: cfg.tol_cert,
        seed: cfg.seed,
        overrides,
        ..CertificateOptions::default()
    };

    match &cli.command {
        Command::Pe { input, order } => {
            let u = io::read_signal(input)?;
            match order {
                Some(k) => {
                    require(cli.format, &[Format::Json], Format::Json, "pe --order")?;
                    let (is_pe, report) = signals::is_pe(&u, *k, cfg.rtol)?;
                    let body = SingleOrder { order: *k, is_pe, report: &report };
                    Ok(Outcome { emit: Emit::Text(json(&cfg, body)), status: Status::of(is_pe) })
                }
                None => {
                    let report = signals::pe_order_with(&u, cfg.rtol, exec)?;
                    let text = match require(cli.format, &[Format::Json, Format::Csv], Format::Json, "pe")? {
                        Format::Json => json(&cfg, &report),
                        Format::Csv => io::pe_csv(&report),
                    };
                    Ok(Outcome { emit: Emit::Text(text), status: Status::Ok })
                }
            }
        }
        Command::Simulate { system, input, x0 } => {
            let sys: StateSpaceSystem = io::read_json(system)?;
            let u = io::read_signal(input)?;
            let x0 = match x0 {
                Some(s) => DVector::from_vec(io::parse_list("--x0", s)?),
                None => DVector::zeros(sys.n()),
            };
            let tr = lti::simulate(&sys, &x0, &u)?;
            let text = match require(cli.format, &[Format::Json, Format::Csv], Format::Csv, "simulate")? {
                Format::Csv => io::trajectory_csv(&tr),
                Format::Json => json(&cfg, &tr),
            };
            Ok(Outcome { emit: Emit::Text(text), status: Status::Ok })
        }
        Command::Check { system, data, depth } => {
            require(cli.format, &[Format::Json], Format::Json, "check")?;
            let sys: StateSpaceSystem = io::read_json(system)?;
            let (u, y) = io::parse_io_data(&data.display().to_string(), &io::read_text(data)?)?;
            let check = lemma::check_behavior_equality(&sys, &u, &y, *depth, cfg.rtol)?;
            Ok(Outcome { emit: Emit::Text(json(&cfg, &check)), status: Status::of(check.behavior_equal) })
        }
        Command::Universal { input, n, depth, outputs } => {
            require(cli.format, &[Format::Json], Format::Json, "universal")?;
            let u = io::read_signal(input)?;
            let opts = VerdictOptions { certificate: cert_opts(Overrides::default()), outputs: Some(*outputs) };
            let verdict = lemma::universality_verdict(&u, *n, *depth, &opts)?;
            Ok(Outcome { emit: Emit::Text(json(&cfg, &verdict)), status: Status::of(verdict.universal) })
        }
        Command::Counterexample { input, n, depth, l0, outputs, override_a, override_zeta, override_eta } => {
            require(cli.format, &[Format::Json], Format::Json, "counterexample")?;
            let u = io::read_signal(input)?;
            let opts = cert_opts(read_overrides(override_a, override_zeta, override_eta)?);
            let (cert, trajectory, system) = if *l0 {
                let cert = adversary::construct_certificate_l0(&u, *n, &opts)?;
                let u_main = u.window(0, u.len() - 1)?;
                let mut c = DMatrix::zeros(*outputs, *n);
                c.set_row(0, &cert.w.transpose());
                let system =
                    StateSpaceSystem::new(cert.a.clone(), cert.b.clone(), c, DMatrix::zeros(*outputs, u.dim()))?;
                let tr = lti::simulate(&system, &cert.x0, &u_main)?;
                (cert, tr, system)
            } else {
                let depth = depth.expect("clap requires --L without --l0");
                let cert = adversary::construct_certificate(&u, *n, depth, &opts)?;
                let out = adversary::extend_to_output(&cert, &u, *outputs, cfg.rtol)?;
                let tr = Trajectory { u: u.clone(), x: cert.states.clone(), y: out.y.clone() };
                (cert, tr, out.system)
            };
            let emit = match cli.out {
                Some(_) => Emit::Files(vec![
                    ("certificate.json", json(&cfg, &cert)),
                    ("system.json", format!("{}\n", serde_json::to_string_pretty(&system).expect("serializable"))),
                    ("trajectory.csv", io::trajectory_csv(&trajectory)),
                ]),
                None => Emit::Text(json(&cfg, &cert)),
            };
            Ok(Outcome { emit, status: Status::Ok })
        }
        Command::Cloud { input, depth, samples, a_range, zeta_range } => {
            let u = io::read_signal(input)?;
            let opts = CloudOptions {
                samples: *samples,
                a_range: parse_range("--a-range", a_range)?,
                zeta_range: parse_range("--zeta-range", zeta_range)?,
                rtol: cfg.rtol,
                seed: cfg.seed,
                exec,
                ..CloudOptions::default()
            };
            let report = adversary::sample_system_cloud(&u, *depth, &opts)?;
            let text = match require(cli.format, &[Format::Json, Format::Csv], Format::Csv, "cloud")? {
                Format::Csv => io::cloud_csv(&report, u.dim()),
                Format::Json => json(&cfg, &report),
            };
            Ok(Outcome { emit: Emit::Text(text), status: Status::Ok })
        }
        Command::Repro { example } => {
            require(cli.format, &[Format::Json], Format::Json, "repro")?;
            let report = match example {
                Example::Ex1 => repro::ex1(&cfg)?,
                Example::Ex2 => repro::ex2(&cfg)?,
                Example::Ex3 => repro::ex3(&cfg, exec)?,
            };
            let status = Status::of(report.passed);
            // Timing varies between runs; keep the artifact deterministic.
            let report = repro::ReproReport { seconds: 0.0, ..report };
            Ok(Outcome { emit: Emit::Text(json(&cfg, &report)), status })
        }
    }
}

/// Writes an outcome to `--out` or standard output.
pub fn emit(outcome: &Outcome, out: Option<&Path>) -> Result<()> {
    use std::io::Write as _;
    match (&outcome.emit, out) {
        (Emit::Text(text), Some(path)) => io::write_text(path, text),
        (Emit::Text(text), None) => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
        (Emit::Files(files), Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
            for (name, text) in files {
                io::write_text(&dir.join(name), text)?;
            }
            Ok(())
        }
        (Emit::Files(_), None) => Err(CliError::Usage("this output needs --out".into())),
    }
}
