//! Command-line driver: selects a check suite from the registry, runs it
//! over the configured q values, and emits machine-readable reports.

mod commands;
mod config;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

use suq2::report::{sort_rows, summarize, to_csv, ResidualReport, Summary};

use config::{Format, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "suq2", version, about = "numerical checks for the quantum SU_q(2) cocycle intertwiners")]
struct Cli {
    /// check suite to run (see --list)
    #[arg(long)]
    cmd: Option<String>,

    /// list the registered commands and exit
    #[arg(long, default_value_t = false)]
    list: bool,

    /// deformation parameter, repeatable; defaults depend on the command
    #[arg(long = "q")]
    q: Vec<f64>,

    /// retained levels per tensor leg
    #[arg(long, default_value_t = 10)]
    kmax: usize,

    /// retained windings per tensor leg (symmetric)
    #[arg(long, default_value_t = 10)]
    mmax: usize,

    /// tolerance of the functional-calculus steps
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// cap on spectral-projection powers
    #[arg(long = "power-budget", default_value_t = 4096)]
    power_budget: usize,

    /// cap on series terms
    #[arg(long = "series-budget", default_value_t = 4096)]
    series_budget: usize,

    /// interior columns sampled per residual check
    #[arg(long, default_value_t = 100)]
    samples: usize,

    /// report file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,

    /// report format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,

    /// directory for operator dumps (entry-per-line text format)
    #[arg(long = "dump-ops")]
    dump_ops: Option<PathBuf>,

    /// seed for the deterministic probe sampling
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a RunConfig,
    rows: &'a [ResidualReport],
    summary: Summary,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        for c in commands::registry() {
            println!("{:<18} {}", c.name(), c.describe());
        }
        return ExitCode::SUCCESS;
    }
    let Some(name) = cli.cmd.as_deref() else {
        eprintln!("error: --cmd is required (try --list)");
        return ExitCode::from(2);
    };
    let Some(command) = commands::lookup(name) else {
        eprintln!("error: unknown command {name:?} (try --list)");
        return ExitCode::from(2);
    };
    let cfg = RunConfig {
        command: name.to_string(),
        q: if cli.q.is_empty() { command.default_q() } else { cli.q.clone() },
        k_max: cli.kmax,
        m_max: cli.mmax,
        tol: cli.tol,
        power_budget: cli.power_budget,
        series_budget: cli.series_budget,
        samples: cli.samples,
        format: match cli.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        },
        out: cli.out.clone(),
        dump_ops: cli.dump_ops.clone(),
        seed: cli.seed,
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let mut rows = match command.run(&cfg) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    sort_rows(&mut rows);
    let summary = summarize(&rows);
    let body = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&Report {
            config: &cfg,
            rows: &rows,
            summary: summary.clone(),
        })
        .expect("report serializes"),
        Format::Csv => to_csv(&rows),
    };
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{body}"),
    }
    eprintln!(
        "{}: {} pass, {} fail, {} measured",
        cfg.command, summary.pass, summary.fail, summary.measured
    );
    if summary.fail == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
