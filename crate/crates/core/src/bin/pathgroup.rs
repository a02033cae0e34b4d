use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pathgroup::harness::{
    concentration_table, invariance_table, jacobian_table, run_concentration, run_invariance,
    run_jacobian, run_verify, ExperimentConfig, ExperimentKind, Format, Provenance, Table,
    VerifyHooks,
};

#[derive(Parser, Debug)]
#[command(
    name = "pathgroup",
    version,
    about = "Experiments on step paths in so(d) and their group law"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (flat `key = value`); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; stdout when neither this nor the config sets one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Scale the exp argument inside the Lipschitz check (fault injection).
    #[arg(long, global = true, hide = true)]
    fault_exp_scale: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run the property checks; exits nonzero if any fails.
    Verify,
    /// Right-invariance table: transport distances per N.
    Invariance,
    /// Angle concentration table per N.
    Concentration,
    /// Jacobian determinants of the inverse map and of phi.
    Jacobian,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Self::Verify => ExperimentKind::Verify,
            Self::Invariance => ExperimentKind::Invariance,
            Self::Concentration => ExperimentKind::Concentration,
            Self::Jacobian => ExperimentKind::Jacobian,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::JsonLines,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_path(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            if cfg.experiment != kind {
                return Err(format!(
                    "{}: config is for `{}`, not `{}`",
                    path.display(),
                    cfg.experiment.as_str(),
                    kind.as_str()
                ));
            }
            cfg
        }
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(table: &Table, cfg: &ExperimentConfig, format: Format) -> Result<(), String> {
    let result = match &cfg.output {
        Some(path) => File::create(path)
            .map_err(pathgroup::Error::from)
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                table.write(format, &mut w)?;
                w.flush().map_err(Into::into)
            }),
        None => table.write(format, io::stdout().lock()),
    };
    result.map_err(|e| format!("writing output: {e}"))
}

fn run(cli: &Cli) -> Result<bool, String> {
    let cfg = load_config(cli)?;
    let provenance = Provenance::new(cfg.hash());
    let format = cli.format.into();
    let fail = |e: pathgroup::Error| e.to_string();
    match cli.command {
        Command::Verify => {
            let hooks = VerifyHooks {
                exp_argument_scale: cli.fault_exp_scale.unwrap_or(1.0),
            };
            let report = run_verify(&cfg, hooks).map_err(fail)?;
            emit(&report.to_table(provenance, cfg.seed), &cfg, format)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!(
                    "FAIL {}: max deviation {:e} exceeds {:e}",
                    c.name, c.max_deviation, c.threshold
                );
            }
            Ok(report.passed())
        }
        Command::Invariance => {
            let rows = run_invariance(&cfg).map_err(fail)?;
            emit(&invariance_table(&rows, provenance), &cfg, format)?;
            Ok(true)
        }
        Command::Concentration => {
            let rows = run_concentration(&cfg).map_err(fail)?;
            emit(&concentration_table(&rows, provenance), &cfg, format)?;
            Ok(true)
        }
        Command::Jacobian => {
            let rows = run_jacobian(&cfg).map_err(fail)?;
            emit(&jacobian_table(&rows, provenance), &cfg, format)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
