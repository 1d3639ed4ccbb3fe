//! Report types and serialization. The CSV outputs are fully deterministic
//! (fixed column order, fixed float formatting, no wall-clock data); timing
//! lives only in the JSON report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackOutcome;
use crate::harness::config::ExperimentConfig;
use crate::sse::{Phase, PhaseCounter, PhaseCounters};
use crate::{Error, Result};

/// One trial's result: either a scored attack run or a typed refusal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Completed {
        #[serde(flatten)]
        outcome: AttackOutcome,
    },
    Blocked {
        attack: String,
        defense: String,
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u32,
    /// Recovery-phase queries scored.
    pub targets: u64,
    pub correct: u64,
    pub abstained: u64,
    pub outcome: TrialOutcome,
    pub counters: PhaseCounters,
    /// Wall-clock spent in plan construction + recovery (JSON only).
    pub recovery_seconds: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: u32,
    pub completed: u32,
    pub blocked: u32,
    /// Means over completed trials; zero when every trial was blocked.
    pub mean_rer: f64,
    pub min_rer: f64,
    pub max_rer: f64,
    pub mean_ilen: f64,
    pub mean_isize: f64,
    pub mean_rounds: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub mean_recovery_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub attack: String,
    pub defense: String,
    pub universe: u32,
    /// Keywords the adversary knows.
    pub known: u32,
    pub corpus_fingerprint: u64,
    pub seed: u64,
    pub aggregate: Aggregate,
    pub counters_total: PhaseCounters,
    pub timing: Timing,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
}

pub fn aggregate(trials: &[TrialResult]) -> Aggregate {
    let mut agg = Aggregate {
        trials: trials.len() as u32,
        ..Aggregate::default()
    };
    let mut rers = Vec::new();
    let (mut ilen, mut isize, mut rounds) = (0u64, 0u64, 0u64);
    for t in trials {
        match &t.outcome {
            TrialOutcome::Completed { outcome } => {
                agg.completed += 1;
                rers.push(outcome.rer);
                ilen += outcome.ilen;
                isize += outcome.isize;
                rounds += outcome.rounds;
            }
            TrialOutcome::Blocked { .. } => agg.blocked += 1,
        }
    }
    if !rers.is_empty() {
        let n = rers.len() as f64;
        agg.mean_rer = rers.iter().sum::<f64>() / n;
        agg.min_rer = rers.iter().copied().fold(f64::INFINITY, f64::min);
        agg.max_rer = rers.iter().copied().fold(0.0, f64::max);
        agg.mean_ilen = ilen as f64 / n;
        agg.mean_isize = isize as f64 / n;
        agg.mean_rounds = rounds as f64 / n;
    }
    agg
}

pub fn total_counters(trials: &[TrialResult]) -> PhaseCounters {
    let mut total = PhaseCounters::new();
    for t in trials {
        for (phase, c) in &t.counters {
            let e = total.entry(*phase).or_default();
            e.real_files += c.real_files;
            e.dummy_files += c.dummy_files;
            e.dummy_words += c.dummy_words;
            e.dropped_files += c.dropped_files;
            e.deletes += c.deletes;
            e.queries += c.queries;
            e.rlp_sum += c.rlp_sum;
            e.rsp_sum += c.rsp_sum;
        }
    }
    total
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn phase(counters: &PhaseCounters, p: Phase) -> PhaseCounter {
    counters.get(&p).copied().unwrap_or_default()
}

const RESULTS_HEADER: [&str; 25] = [
    "config",
    "trial",
    "status",
    "attack",
    "defense",
    "universe",
    "known",
    "targets",
    "correct",
    "abstained",
    "rer",
    "ilen",
    "isize",
    "rounds",
    "setup_real_files",
    "setup_dummy_files",
    "setup_dummy_words",
    "setup_dropped_files",
    "baseline_queries",
    "injection_dropped_files",
    "injection_dummy_files",
    "updates_adds",
    "updates_deletes",
    "target_queries",
    "target_rlp_sum",
];

/// Per-trial rows, one file across every experiment in the batch.
pub fn write_results_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in reports {
        for t in &r.trials {
            let (status, rer, ilen, isize, rounds) = match &t.outcome {
                TrialOutcome::Completed { outcome } => (
                    "completed",
                    f(outcome.rer),
                    outcome.ilen.to_string(),
                    outcome.isize.to_string(),
                    outcome.rounds.to_string(),
                ),
                TrialOutcome::Blocked { .. } => {
                    ("blocked", f(0.0), "0".into(), "0".into(), "0".into())
                }
            };
            let setup = phase(&t.counters, Phase::Setup);
            let base = phase(&t.counters, Phase::Baseline);
            let inj = phase(&t.counters, Phase::Injection);
            let upd = phase(&t.counters, Phase::Updates);
            let tgt = phase(&t.counters, Phase::Target);
            w.write_record([
                r.name.as_str(),
                &t.trial.to_string(),
                status,
                &r.attack,
                &r.defense,
                &r.universe.to_string(),
                &r.known.to_string(),
                &t.targets.to_string(),
                &t.correct.to_string(),
                &t.abstained.to_string(),
                &rer,
                &ilen,
                &isize,
                &rounds,
                &setup.real_files.to_string(),
                &setup.dummy_files.to_string(),
                &setup.dummy_words.to_string(),
                &setup.dropped_files.to_string(),
                &base.queries.to_string(),
                &inj.dropped_files.to_string(),
                &inj.dummy_files.to_string(),
                &upd.real_files.to_string(),
                &upd.deletes.to_string(),
                &tgt.queries.to_string(),
                &tgt.rlp_sum.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

const AGGREGATE_HEADER: [&str; 15] = [
    "config",
    "attack",
    "defense",
    "universe",
    "known",
    "trials",
    "completed",
    "blocked",
    "mean_rer",
    "min_rer",
    "max_rer",
    "mean_ilen",
    "mean_isize",
    "mean_rounds",
    "error",
];

/// One row per experiment, plus one row per failed sweep entry.
pub fn write_aggregate_csv(
    path: &Path,
    reports: &[ExperimentReport],
    failures: &[(String, String)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in reports {
        let a = &r.aggregate;
        w.write_record([
            r.name.as_str(),
            &r.attack,
            &r.defense,
            &r.universe.to_string(),
            &r.known.to_string(),
            &a.trials.to_string(),
            &a.completed.to_string(),
            &a.blocked.to_string(),
            &f(a.mean_rer),
            &f(a.min_rer),
            &f(a.max_rer),
            &f(a.mean_ilen),
            &f(a.mean_isize),
            &f(a.mean_rounds),
            "",
        ])?;
    }
    for (name, error) in failures {
        let mut row = vec![name.as_str()];
        row.extend(std::iter::repeat_n("", AGGREGATE_HEADER.len() - 2));
        w.write_record(row.iter().copied().chain(std::iter::once(error.as_str())))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn write_report_json(path: &Path, report: &ExperimentReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let json =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&json)?)
}

/// Every `report.json` under `dir`, in sorted path order.
pub fn scan_reports(dir: &Path) -> Result<Vec<(PathBuf, ExperimentReport)>> {
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| dir.display().to_string());
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.file_name() == "report.json" {
            paths.push(entry.into_path());
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| load_report(&p).map(|r| (p, r)))
        .collect()
}

/// One storage or bandwidth dimension of the defended/undefended diff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadRatio {
    pub defended: u64,
    pub reference: u64,
    /// defended/reference − 1, "{:.6}" or "inf".
    pub overhead: String,
}

fn ratio(defended: u64, reference: u64) -> OverheadRatio {
    let overhead = if reference == 0 {
        if defended == 0 {
            f(0.0)
        } else {
            "inf".into()
        }
    } else {
        f(defended as f64 / reference as f64 - 1.0)
    };
    OverheadRatio {
        defended,
        reference,
        overhead,
    }
}

/// Defense cost relative to an undefended run of the same experiment:
/// index build size, baseline query bandwidth, injection-phase storage and
/// recovery query bandwidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub defended: String,
    pub reference: String,
    pub attack: String,
    pub defense: String,
    pub setup_fill: OverheadRatio,
    pub s_query: OverheadRatio,
    pub inj_fill: OverheadRatio,
    pub i_query: OverheadRatio,
}

pub fn report_overheads(
    defended: &ExperimentReport,
    reference: &ExperimentReport,
) -> Result<OverheadReport> {
    if reference.defense != "none" {
        return Err(Error::ReportMismatch(format!(
            "reference run '{}' carries defense '{}'",
            reference.name, reference.defense
        )));
    }
    for (what, a, b) in [
        (
            "corpus fingerprint",
            defended.corpus_fingerprint,
            reference.corpus_fingerprint,
        ),
        ("seed", defended.seed, reference.seed),
        ("universe", defended.universe as u64, reference.universe as u64),
    ] {
        if a != b {
            return Err(Error::ReportMismatch(format!(
                "{what} differs: {a} vs {b} ('{}' vs '{}')",
                defended.name, reference.name
            )));
        }
    }
    if defended.attack != reference.attack {
        return Err(Error::ReportMismatch(format!(
            "attack differs: {} vs {}",
            defended.attack, reference.attack
        )));
    }
    let d_setup = phase(&defended.counters_total, Phase::Setup);
    let r_setup = phase(&reference.counters_total, Phase::Setup);
    let d_base = phase(&defended.counters_total, Phase::Baseline);
    let r_base = phase(&reference.counters_total, Phase::Baseline);
    let d_inj = phase(&defended.counters_total, Phase::Injection);
    let r_inj = phase(&reference.counters_total, Phase::Injection);
    let d_tgt = phase(&defended.counters_total, Phase::Target);
    let r_tgt = phase(&reference.counters_total, Phase::Target);
    Ok(OverheadReport {
        defended: defended.name.clone(),
        reference: reference.name.clone(),
        attack: defended.attack.clone(),
        defense: defended.defense.clone(),
        setup_fill: ratio(
            d_setup.real_files + d_setup.dummy_files,
            r_setup.real_files + r_setup.dummy_files,
        ),
        s_query: ratio(d_base.rlp_sum, r_base.rlp_sum),
        inj_fill: ratio(
            d_inj.real_files + d_inj.dummy_files,
            r_inj.real_files + r_inj.dummy_files,
        ),
        i_query: ratio(d_tgt.rlp_sum, r_tgt.rlp_sum),
    })
}

const OVERHEADS_HEADER: [&str; 16] = [
    "defended",
    "reference",
    "attack",
    "defense",
    "setup_fill_defended",
    "setup_fill_reference",
    "setup_fill_overhead",
    "s_query_defended",
    "s_query_reference",
    "s_query_overhead",
    "inj_fill_defended",
    "inj_fill_reference",
    "inj_fill_overhead",
    "i_query_defended",
    "i_query_reference",
    "i_query_overhead",
];

pub fn write_overheads_csv(path: &Path, rows: &[OverheadReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(OVERHEADS_HEADER)?;
    for r in rows {
        w.write_record([
            r.defended.as_str(),
            &r.reference,
            &r.attack,
            &r.defense,
            &r.setup_fill.defended.to_string(),
            &r.setup_fill.reference.to_string(),
            &r.setup_fill.overhead,
            &r.s_query.defended.to_string(),
            &r.s_query.reference.to_string(),
            &r.s_query.overhead,
            &r.inj_fill.defended.to_string(),
            &r.inj_fill.reference.to_string(),
            &r.inj_fill.overhead,
            &r.i_query.defended.to_string(),
            &r.i_query.reference.to_string(),
            &r.i_query.overhead,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
