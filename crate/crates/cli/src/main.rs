mod config;
mod run;

use clap::Parser;
use config::*;
use qpc_core::ErrorClass;
use run::{Output, RunError};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const VERSION: &str = env!("QPC_VERSION");

/// Quasiperiodic cocycle laboratory.
///
/// Either name a subcommand with flags, or pass `--config run.json` holding a
/// full RunConfig. Reports go to stdout, or to `--out DIR` as report.json plus
/// any CSV or binary files the subcommand emits.
#[derive(Parser)]
#[command(name = "qpc", version = VERSION)]
struct Cli {
    /// Full RunConfig as JSON; excludes the subcommand and run flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report.json and data files (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON list of V_0..V_d, each a number or [re, im].
    #[arg(long, global = true)]
    potential: Option<String>,
    /// Decimal string, or surd:a,b,c[,den] for (a + b√c)/den.
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true, conflicts_with = "energy_grid")]
    energy: Option<f64>,
    /// a:b:n
    #[arg(long, global = true, allow_hyphen_values = true)]
    energy_grid: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    task: Option<Task>,
}

enum Failure {
    Config(String),
    Io(String),
    Core(qpc_core::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn build_config(cli: Cli) -> Result<RunConfig, Failure> {
    if let Some(path) = &cli.config {
        if cli.task.is_some() || cli.potential.is_some() || cli.alpha.is_some() || cli.energy.is_some() || cli.energy_grid.is_some() || cli.seed.is_some() {
            return Err(Failure::Config("--config cannot be combined with a subcommand or run flags".into()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if cli.out.is_some() {
            cfg.out = cli.out;
        }
        return Ok(cfg);
    }
    let task = cli.task.ok_or_else(|| Failure::Config("no subcommand given (see --help)".into()))?;
    let alpha = cli.alpha.ok_or_else(|| Failure::Config("--alpha is required".into()))?;
    let energy = match (cli.energy, cli.energy_grid) {
        (Some(e), _) => Some(Energies::Value(e)),
        (None, Some(g)) => Some(parse_energy_grid(&g)?),
        (None, None) => None,
    };
    Ok(RunConfig {
        potential: cli.potential.as_deref().map(parse_potential_flag).transpose()?.unwrap_or_default(),
        alpha: parse_alpha_flag(&alpha)?,
        energy,
        seed: cli.seed.unwrap_or(0),
        out: cli.out,
        task,
    })
}

fn write_outputs(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    // The output location is not part of the result.
    let embedded = RunConfig { out: None, ..cfg.clone() };
    let report = json!({
        "version": VERSION,
        "command": cfg.task.name(),
        "config": embedded,
        "units": out.units,
        "result": out.result,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let Some(dir) = &cfg.out else {
        print!("{text}");
        return Ok(());
    };
    let io = |p: &Path, e: std::io::Error| Failure::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files: Vec<(PathBuf, &[u8])> = vec![(dir.join("report.json"), text.as_bytes())];
    for (name, body) in &out.tables {
        files.push((dir.join(name), body.as_bytes()));
    }
    for (name, body) in &out.blobs {
        files.push((dir.join(name), body));
    }
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

fn main_inner() -> Result<(), Failure> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    let cfg = build_config(cli)?;
    let out = run::run(&cfg).map_err(|e| match e {
        RunError::Config(c) => Failure::Config(c.0),
        RunError::Core(e) => Failure::Core(e),
    })?;
    write_outputs(&cfg, &out)
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("ConfigError: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("IoError: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            let code = match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::Hypothesis => 4,
            };
            eprintln!("{:?}: {e}", e.class());
            ExitCode::from(code)
        }
    }
}
