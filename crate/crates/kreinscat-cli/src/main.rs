use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kreinscat_cli::{run, CliError, RunConfig, SCHEMA};

#[derive(Parser, Debug)]
#[command(name = "kreinscat", version, about = "Scattering matrices for singularly perturbed Laplacians")]
struct Args {
    /// Run configuration (flat `key = value`); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `mode`.
    #[arg(long)]
    mode: Option<String>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `numerics.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    schema: bool,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io(p.display().to_string(), e))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(m) = &args.mode {
        cfg = cfg.with("mode", m)?;
    }
    if let Some(o) = &args.out {
        cfg = cfg.with("output.dir", &o.display().to_string())?;
    }
    if let Some(s) = args.seed {
        cfg = cfg.with("numerics.seed", &s.to_string())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.schema {
        for (k, d, doc) in SCHEMA {
            println!("{k} = {d}    # {doc}");
        }
        return ExitCode::SUCCESS;
    }
    match load(&args).and_then(|cfg| run(&cfg)) {
        Ok(r) if r.passed => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("checks failed; see summary.json");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
