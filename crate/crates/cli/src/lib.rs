//! Command-line front end: configuration layering, execution and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result, EXIT_PASS, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "hardy-lab", version, about = "Hardy-space experiments on balls and strongly pseudoconvex domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Boundary norm sup_k I_k^{1/p} of --f at one --p, with its scan.
    Norm(Opts),
    /// Classified scans of --f at each exponent in --p (comma-separated).
    Scan(Opts),
    /// Complement bound off a cap around the Cauchy pole (--n, --zeta, --center, --radius).
    Local(Opts),
    /// Lower bound on Re Q over sampled pairs (--domain, --beta, --eta, --pairs).
    LeviCheck(Opts),
    /// One lemma check: --id 2.2, 2.2-rate, 2.5, 3.1, 4.2, 4.3 or 5.1.
    Lemma(Opts),
    /// Points near each target where |f| exceeds --bound.
    Witness(Opts),
    /// Perturbation of --g by power kernels, within --delta in the metric.
    DensityDemo(Opts),
    /// Metric on the intersection of Hardy spaces between --f and --g.
    Metric(Opts),
    /// Acceptance criteria (--criteria, --seeds), one CSV per criterion in --out.
    Reproduce(Opts),
}

impl Command {
    fn split(self) -> (&'static str, Opts) {
        match self {
            Self::Norm(o) => ("norm", o),
            Self::Scan(o) => ("scan", o),
            Self::Local(o) => ("local", o),
            Self::LeviCheck(o) => ("levi-check", o),
            Self::Lemma(o) => ("lemma", o),
            Self::Witness(o) => ("witness", o),
            Self::DensityDemo(o) => ("density-demo", o),
            Self::Metric(o) => ("metric", o),
            Self::Reproduce(o) => ("reproduce", o),
        }
    }
}

/// Settings shared by all subcommands; flags override `--config`.
#[derive(Debug, Args)]
struct Opts {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `ball:n=2`, `ellipsoid:a=1,2`, `rescaled:base=..;c=2`, `warped:base=..;u=x1`.
    #[arg(long)]
    domain: Option<String>,
    /// `cauchy:zeta=1,0`, `log:..`, `power:q=1.5;zeta=1,0`, `levi:domain=..;zeta=..`,
    /// `levipower:..`, `harmonic:n=3;y=1,0,0`, `const:2`, `poly:z1^2+3`.
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    id: Option<String>,
    /// `radial:2..29` or `level:0.2:0..12`.
    #[arg(long)]
    grid: Option<String>,
    /// Monte Carlo samples per integral.
    #[arg(long)]
    count: Option<String>,
    /// Defaults to $HARDY_LAB_SEED, then 7.
    #[arg(long)]
    seed: Option<String>,
    /// CSV path (a directory for `reproduce`); stdout otherwise.
    #[arg(long)]
    out: Option<String>,
    /// Plot data path.
    #[arg(long)]
    plot: Option<String>,
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// Integrate over the complement of the cap.
    #[arg(long)]
    complement: bool,
    /// Level sampler: `parametrized` or `thin-shell`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    bound: Option<String>,
    #[arg(long)]
    terms: Option<String>,
    #[arg(long)]
    criteria: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
}

impl Opts {
    fn into_config(self, command: &str) -> Result<(Option<PathBuf>, ExperimentConfig)> {
        let mut cfg = ExperimentConfig::new(command);
        let pairs = [
            ("domain", self.domain),
            ("f", self.f),
            ("g", self.g),
            ("p", self.p),
            ("q", self.q),
            ("n", self.n),
            ("zeta", self.zeta),
            ("y", self.y),
            ("id", self.id),
            ("grid", self.grid),
            ("count", self.count),
            ("seed", self.seed),
            ("out", self.out),
            ("plot", self.plot),
            ("center", self.center),
            ("radius", self.radius),
            ("complement", self.complement.then(|| "true".to_string())),
            ("method", self.method),
            ("beta", self.beta),
            ("eta", self.eta),
            ("pairs", self.pairs),
            ("delta", self.delta),
            ("targets", self.targets),
            ("bound", self.bound),
            ("terms", self.terms),
            ("criteria", self.criteria),
            ("seeds", self.seeds),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        Ok((self.config, cfg))
    }
}

/// Layers defaults, `HARDY_LAB_SEED`, the config file and flags, in that order.
fn resolve(command: &str, file: Option<PathBuf>, flags: &ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(command);
    cfg.merge(&ExperimentConfig::from_env()?);
    if let Some(path) = file {
        let from_file = ExperimentConfig::from_file(&path)?;
        if !from_file.command.is_empty() && from_file.command != command {
            return Err(CliError::usage(format!(
                "config {} is for '{}', not '{command}'",
                path.display(),
                from_file.command
            )));
        }
        cfg.merge(&from_file);
    }
    cfg.merge(flags);
    Ok(cfg)
}

fn execute(command: Command) -> Result<i32> {
    let (name, opts) = command.split();
    let (file, flags) = opts.into_config(name)?;
    let cfg = resolve(name, file, &flags)?;
    let outcome = commands::execute(&cfg)?;
    if outcome.emit_csv {
        match cfg.raw("out") {
            Some(path) => report::write_rows_to(&outcome.rows, path.as_ref())?,
            None => report::write_rows(&outcome.rows, std::io::stdout().lock())
                .map_err(|e| CliError::unwritable("<stdout>", e))?,
        }
    }
    if let Some(path) = cfg.raw("plot") {
        plot::emit_plot_data(&outcome.plots, path.as_ref())?;
    }
    let mut err = std::io::stderr().lock();
    for line in &outcome.summary {
        let _ = writeln!(err, "{line}");
    }
    Ok(outcome.exit_code())
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
