//! Command-line front end: corpus/trend generation, experiment runs, sweep
//! grids and cross-run overhead reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 sweep finished with some
//! failed rows, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vialab::corpus::{default_stopwords, ingest_directory, synth_corpus};
use vialab::harness::report::{
    report_overheads, scan_reports, write_aggregate_csv, write_overheads_csv, write_report_json,
    write_results_csv, ExperimentReport, OverheadReport,
};
use vialab::harness::{run_experiment, run_sweep, ExperimentConfig, SweepGrid};
use vialab::trends::{synth_trends, TrendMode};
use vialab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vialab",
    version,
    about = "A leakage-level laboratory for volumetric injection attacks on searchable encryption"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TrendKind {
    Uniform,
    Zipf,
    Drifting,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and write it as JSON.
    GenCorpus {
        #[arg(long)]
        docs: u32,
        #[arg(long)]
        universe: u32,
        #[arg(long, default_value_t = 1.0)]
        zipf_s: f64,
        #[arg(long, default_value_t = 60)]
        mean_doc_len: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a plaintext directory into a corpus JSON.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        universe: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a windows x keywords query-trend CSV.
    GenTrends {
        #[arg(long)]
        windows: u32,
        #[arg(long)]
        universe: u32,
        #[arg(long, value_enum, default_value_t = TrendKind::Zipf)]
        mode: TrendKind,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.1)]
        jitter: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment config into an output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a sweep grid and run every experiment in it.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair defended runs under a directory with their undefended
    /// references and write overhead tables.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::TrendParse { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenCorpus {
            docs,
            universe,
            zipf_s,
            mean_doc_len,
            seed,
            out,
        } => {
            let corpus = synth_corpus(docs as usize, universe, zipf_s, mean_doc_len, seed)?;
            write_text(&out, &corpus.to_json()?)?;
            println!(
                "wrote {} docs over {} keywords to {} (fingerprint {:016x})",
                corpus.documents.len(),
                corpus.universe.len(),
                out.display(),
                corpus.fingerprint()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest { dir, universe, out } => {
            let corpus = ingest_directory(&dir, universe as usize, &default_stopwords())?;
            write_text(&out, &corpus.to_json()?)?;
            println!(
                "ingested {} docs over {} keywords to {} (fingerprint {:016x})",
                corpus.documents.len(),
                corpus.universe.len(),
                out.display(),
                corpus.fingerprint()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::GenTrends {
            windows,
            universe,
            mode,
            s,
            jitter,
            seed,
            out,
        } => {
            let mode = match mode {
                TrendKind::Uniform => TrendMode::Zipf { s: 0.0 },
                TrendKind::Zipf => TrendMode::Zipf { s },
                TrendKind::Drifting => TrendMode::Drifting { s, jitter },
            };
            let trend = synth_trends(windows as usize, universe as usize, mode, seed)?;
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record((0..universe).map(|i| format!("kw{i}")))?;
            for window in 0..trend.windows() {
                w.write_record(trend.row(window).iter().map(|p| format!("{p:.9}")))?;
            }
            w.flush()
                .map_err(|e| Error::Io {
                    path: out.display().to_string(),
                    source: e,
                })?;
            println!(
                "wrote {windows} x {universe} trend matrix to {}",
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            let report = run_experiment(&config)?;
            let reports = std::slice::from_ref(&report);
            write_results_csv(&out.join("results.csv"), reports)?;
            write_aggregate_csv(&out.join("aggregate.csv"), reports, &[])?;
            write_report_json(&out.join("report.json"), &report)?;
            print_summary(&report);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { grid, out } => {
            let grid = SweepGrid::load(&grid)?;
            let outcome = run_sweep(&grid)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            write_results_csv(&out.join("results.csv"), &outcome.reports)?;
            write_aggregate_csv(&out.join("aggregate.csv"), &outcome.reports, &outcome.failures)?;
            for report in &outcome.reports {
                let dir = out.join(sanitize(&report.name));
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?;
                write_report_json(&dir.join("report.json"), report)?;
                print_summary(report);
            }
            for (name, error) in &outcome.failures {
                eprintln!("failed: {name}: {error}");
            }
            Ok(if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Report { dir } => {
            let reports = scan_reports(&dir)?;
            let rows = pair_overheads(&reports);
            write_overheads_csv(&dir.join("overheads.csv"), &rows)?;
            let json = serde_json::to_string_pretty(&rows)?;
            write_text(&dir.join("overheads.json"), &json)?;
            println!(
                "paired {} of {} reports into {}",
                rows.len(),
                reports.len(),
                dir.join("overheads.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Match every defended run to an undefended run of the same experiment
/// (fingerprint, seed, attack, universe) and diff their counters.
fn pair_overheads(reports: &[(PathBuf, ExperimentReport)]) -> Vec<OverheadReport> {
    let mut rows = Vec::new();
    for (path, defended) in reports {
        if defended.defense == "none" {
            continue;
        }
        let reference = reports.iter().find(|(_, r)| {
            r.defense == "none"
                && r.corpus_fingerprint == defended.corpus_fingerprint
                && r.seed == defended.seed
                && r.attack == defended.attack
                && r.universe == defended.universe
        });
        match reference {
            Some((_, reference)) => match report_overheads(defended, reference) {
                Ok(row) => rows.push(row),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            },
            None => log::warn!(
                "no undefended reference for {} ({})",
                defended.name,
                path.display()
            ),
        }
    }
    rows
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn print_summary(report: &ExperimentReport) {
    let a = &report.aggregate;
    println!(
        "{}: attack {} vs defense {} | #W {} known {} | Rer mean {:.4} [{:.4}, {:.4}] | \
         mean ILen {:.1} ISize {:.1} | {}/{} trials completed",
        report.name,
        report.attack,
        report.defense,
        report.universe,
        report.known,
        a.mean_rer,
        a.min_rer,
        a.max_rer,
        a.mean_ilen,
        a.mean_isize,
        a.completed,
        a.trials,
    );
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
