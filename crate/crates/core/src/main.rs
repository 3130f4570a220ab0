use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spiralspec::cli::{self, load_config, preset, RunConfig, EXIT_CONFIG, PRESETS};

/// Weighted spectra of spiral waves: runs the task pipeline of a config.
#[derive(Parser, Debug)]
#[command(name = "spiralspec", version)]
struct Args {
    /// Run config (JSON); an earlier manifest.json also works.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped config to run instead of a file.
    #[arg(long, value_parser = PRESETS)]
    preset: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent factorizations in the pseudospectrum and condition tasks.
    #[arg(long)]
    workers: Option<usize>,
    /// Run only this task and what it depends on; may be repeated.
    #[arg(long = "task")]
    tasks: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> spiralspec::Result<RunConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(spiralspec::Error::Config("pass --config <path> or --preset <name>".into())),
    };
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let cfg = cfg.filtered(&args.tasks)?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let cfg = match resolve(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    match cli::run(&cfg) {
        Ok(outcome) => {
            for t in &outcome.manifest.tasks {
                let msg = t.message.as_deref().unwrap_or("");
                println!("{:<14} {:?} {msg}", t.task, t.status);
            }
            println!("{} files in {}", outcome.manifest.files.len(), cfg.output.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
