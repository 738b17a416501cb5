//! `hyperperc`: experiment runner.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 a deterministic audit
//! failed, 3 a statistical expectation failed.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{CommandError, Context, Format, Output, Status};

#[derive(Parser, Debug)]
#[command(name = "hyperperc", version, about = "Bernoulli hyperplane percolation experiments")]
struct Cli {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decay curve of the boundary connection, both fits and model selection.
    Decay,
    /// Connection frequency and regime tags over a parameter grid.
    Phase,
    /// Deterministic audits of every construction.
    Verify,
    /// Lifts planar crossings to a path in the box.
    Lift {
        /// JSON file with `lo`, `hi` and `crossings`; a built-in example otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Wall event frequencies and per-sample audits.
    Renorm,
    /// Integer inclined basis with its certificates.
    Basis {
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Decay => "decay",
            Command::Phase => "phase",
            Command::Verify => "verify",
            Command::Lift { .. } => "lift",
            Command::Renorm => "renorm",
            Command::Basis { .. } => "basis",
        }
    }
}

const USAGE: u8 = 1;
const AUDIT: u8 = 2;
const STATISTICAL: u8 = 3;

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write_outputs(
    dir: &Path,
    command: &str,
    out: &Output,
    cx: &Context<'_>,
    elapsed: f64,
    started: u64,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut listed = Vec::new();
    for (name, bytes) in &out.artifacts {
        std::fs::write(dir.join(name), bytes)?;
        listed.push(json!({ "file": name, "sha256": sha256_hex(bytes) }));
    }
    let status = match &out.status {
        Status::Success => json!({ "code": 0, "message": "ok" }),
        Status::AuditFailed(m) => json!({ "code": AUDIT, "message": m }),
        Status::StatisticalFailed(m) => json!({ "code": STATISTICAL, "message": m }),
    };
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": cx.config_hash,
        "seed": cx.seed,
        "workers": cx.workers,
        "started_unix": started,
        "wall_clock_seconds": elapsed,
        "artifacts": listed,
        "audits": out.audits,
        "status": status,
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    std::fs::write(dir.join(format!("{command}.manifest.json")), bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let loaded = match config::load(cli.config.as_deref()) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let seed = cli.seed.unwrap_or(loaded.seed);
    let config_hash = loaded.config.hash();
    let cx = Context {
        config: &loaded.config,
        config_hash: &config_hash,
        seed,
        workers: cli.workers,
        format: cli.format,
    };

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let result = match &cli.command {
        Command::Decay => commands::decay(&cx),
        Command::Phase => commands::phase(&cx),
        Command::Verify => commands::verify(&cx),
        Command::Lift { input } => commands::lift(&cx, input.as_deref()),
        Command::Renorm => commands::renorm(&cx),
        Command::Basis { n } => commands::basis(&cx, *n),
    };
    let out = match result {
        Ok(o) => o,
        Err(CommandError::Usage(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(USAGE);
        }
        Err(CommandError::Audit(m)) => {
            eprintln!("audit failed: {m}");
            return ExitCode::from(AUDIT);
        }
    };
    let elapsed = clock.elapsed().as_secs_f64();
    let command = cli.command.name();
    if let Err(e) = write_outputs(&cli.out_dir, command, &out, &cx, elapsed, started) {
        eprintln!("error: cannot write to {}: {e}", cli.out_dir.display());
        return ExitCode::from(USAGE);
    }

    println!("{}", out.summary);
    for a in out.audits.iter().filter(|a| !a.passed) {
        println!("  FAILED {}: {}", a.name, a.detail);
    }
    match out.status {
        Status::Success => ExitCode::SUCCESS,
        Status::AuditFailed(m) => {
            eprintln!("audit failed: {m}");
            ExitCode::from(AUDIT)
        }
        Status::StatisticalFailed(m) => {
            eprintln!("statistical check failed: {m}");
            ExitCode::from(STATISTICAL)
        }
    }
}
