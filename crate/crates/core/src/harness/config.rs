//! Experiment configuration: a JSON document describing one corpus, query
//! distribution, attack, defense stack and update regime, plus the trial
//! and seeding structure that makes every run reproducible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::CodeBase;
use crate::defense::DefenseStack;
use crate::sse::UpdatePolicy;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub corpus: CorpusSpec,
    /// Fraction of the keyword universe the adversary knows.
    #[serde(default = "default_leak")]
    pub leak_fraction: f64,
    #[serde(default)]
    pub trend: TrendSpec,
    #[serde(default)]
    pub windows: WindowSpec,
    #[serde(default)]
    pub baseline_mode: BaselineMode,
    pub attack: AttackSpec,
    #[serde(default)]
    pub defense: DefenseStack,
    #[serde(default)]
    pub updates: Option<UpdateSpec>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    pub seed: u64,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_leak() -> f64 {
    1.0
}

fn default_trials() -> u32 {
    30
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&json)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.leak_fraction > 0.0 && self.leak_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "leak fraction {} outside (0, 1]",
                self.leak_fraction
            )));
        }
        if self.windows.per_window == 0 || self.windows.target == 0 {
            return Err(Error::Config(
                "per-window query count and target windows must be positive".into(),
            ));
        }
        self.corpus.validate()?;
        self.defense.validate()?;
        self.attack.validate(&self.defense, self.leak_fraction)?;
        if let Some(u) = &self.updates {
            u.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSpec {
    /// Synthesize a fresh corpus per trial.
    Synth {
        docs: u32,
        universe: u32,
        #[serde(default = "default_zipf_s")]
        zipf_s: f64,
        #[serde(default = "default_doc_len")]
        mean_doc_len: u64,
    },
    /// Load a corpus JSON written by `gen-corpus` or `ingest`.
    File { path: PathBuf },
    /// Ingest a plaintext directory at run time.
    Ingest { dir: PathBuf, universe: u32 },
}

fn default_zipf_s() -> f64 {
    1.0
}

fn default_doc_len() -> u64 {
    60
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        match self {
            CorpusSpec::Synth { docs, universe, zipf_s, mean_doc_len } => {
                if *docs == 0 || *universe == 0 || *mean_doc_len == 0 {
                    return Err(Error::Config(
                        "synthetic corpus needs positive docs, universe and length".into(),
                    ));
                }
                if !zipf_s.is_finite() || *zipf_s < 0.0 {
                    return Err(Error::Config("zipf exponent must be finite and ≥ 0".into()));
                }
            }
            CorpusSpec::Ingest { universe, .. } => {
                if *universe == 0 {
                    return Err(Error::Config("ingest universe must be positive".into()));
                }
            }
            CorpusSpec::File { .. } => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrendSpec {
    #[default]
    Uniform,
    Zipf {
        s: f64,
    },
    Drifting {
        s: f64,
        jitter: f64,
    },
    /// Windows × keywords probability matrix from `gen-trends` or external
    /// trend exports.
    Csv {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default = "default_baseline_windows")]
    pub baseline: u32,
    #[serde(default = "default_target_windows")]
    pub target: u32,
    #[serde(default = "default_per_window")]
    pub per_window: u32,
}

fn default_baseline_windows() -> u32 {
    8
}

fn default_target_windows() -> u32 {
    10
}

fn default_per_window() -> u32 {
    1000
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            baseline: default_baseline_windows(),
            target: default_target_windows(),
            per_window: default_per_window(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Baseline queries drawn from the trend distribution.
    #[default]
    Sampled,
    /// Every keyword queried once per baseline window.
    FullCoverage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    Fixed {
        value: u64,
    },
    /// The admissibility floor ⌈#W/2⌉.
    Min,
    /// One more than the largest baseline response size.
    #[default]
    Offset,
    /// A fraction of the offset value.
    OffsetOver {
        divisor: u64,
    },
    /// Large enough to absorb every planned client addition: offset plus
    /// the update session's total added size.
    UpdateSafe,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierSpec {
    Fixed {
        value: u64,
    },
    /// One more than the largest baseline response length.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKnowledge {
    /// Clustering and per-cluster baselines granted, as from similar data.
    #[default]
    Known,
    /// Clustering learned by per-keyword probe injections before baseline.
    Probe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Bva {
        #[serde(default)]
        gamma: GammaSpec,
        #[serde(default)]
        code_base: CodeBase,
        #[serde(default)]
        tc_shard: bool,
    },
    Bvma {
        #[serde(default = "default_true")]
        use_sp: bool,
        #[serde(default)]
        code_base: CodeBase,
        #[serde(default)]
        tc_shard: bool,
    },
    ModifiedBva {
        #[serde(default)]
        gamma: GammaSpec,
        #[serde(default)]
        code_base: CodeBase,
        #[serde(default)]
        tc_shard: bool,
    },
    Decoding {
        #[serde(default)]
        offset: GammaSpec,
        #[serde(default)]
        code_base: CodeBase,
        #[serde(default)]
        tc_shard: bool,
    },
    SingleRound {
        #[serde(default)]
        multiplier: MultiplierSpec,
        #[serde(default)]
        code_base: CodeBase,
    },
    MultipleRound {
        k: u32,
        #[serde(default = "default_true")]
        replay: bool,
    },
    Search {
        #[serde(default = "default_true")]
        replay: bool,
    },
    Zkp {
        #[serde(default)]
        code_base: CodeBase,
    },
    ShielddbOpt {
        t_groups: u32,
        #[serde(default)]
        knowledge: ClusterKnowledge,
    },
}

fn default_true() -> bool {
    true
}

impl AttackSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AttackSpec::Bva { .. } => "bva",
            AttackSpec::Bvma { .. } => "bvma",
            AttackSpec::ModifiedBva { .. } => "modified_bva",
            AttackSpec::Decoding { .. } => "decoding",
            AttackSpec::SingleRound { .. } => "single_round",
            AttackSpec::MultipleRound { .. } => "multiple_round",
            AttackSpec::Search { .. } => "search",
            AttackSpec::Zkp { .. } => "zkp",
            AttackSpec::ShielddbOpt { .. } => "shielddb_opt",
        }
    }

    fn validate(&self, defense: &DefenseStack, leak_fraction: f64) -> Result<()> {
        match self {
            AttackSpec::Bva { gamma, .. } | AttackSpec::ModifiedBva { gamma, .. } => {
                if let GammaSpec::OffsetOver { divisor: 0 } = gamma {
                    return Err(Error::Config("gamma divisor must be positive".into()));
                }
                if let GammaSpec::Fixed { value: 0 } = gamma {
                    return Err(Error::Config("gamma must be positive".into()));
                }
            }
            AttackSpec::Decoding { offset, .. } => {
                if matches!(offset, GammaSpec::UpdateSafe) {
                    return Err(Error::Config(
                        "update_safe sizing applies to the binary attacks only".into(),
                    ));
                }
            }
            AttackSpec::SingleRound {
                multiplier: MultiplierSpec::Fixed { value: 0 },
                ..
            } => {
                return Err(Error::Config("multiplier must be positive".into()));
            }
            AttackSpec::MultipleRound { k, .. } => {
                if *k < 2 {
                    return Err(Error::Config("partition count k must be at least 2".into()));
                }
            }
            AttackSpec::ShielddbOpt { t_groups, .. } => {
                let Some(sd) = defense.shielddb else {
                    return Err(Error::Config(
                        "shielddb_opt targets a shielddb defense stack".into(),
                    ));
                };
                if *t_groups == 0 || *t_groups > sd.alpha {
                    return Err(Error::Config(format!(
                        "t_groups {t_groups} outside 1..={}",
                        sd.alpha
                    )));
                }
                if leak_fraction < 1.0 {
                    return Err(Error::Config(
                        "shielddb_opt probes the whole universe and needs full keyword knowledge"
                            .into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateCount {
    Absolute(u64),
    /// Relative to the number of initially indexed documents.
    Fraction(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSpec {
    pub policy: UpdatePolicy,
    pub count: UpdateCount,
    /// Share of the corpus held out of the initial index to feed additions.
    #[serde(default = "default_pool_fraction")]
    pub pool_fraction: f64,
}

fn default_pool_fraction() -> f64 {
    0.2
}

impl UpdateSpec {
    fn validate(&self) -> Result<()> {
        match self.count {
            UpdateCount::Absolute(_) => {}
            UpdateCount::Fraction(f) => {
                if !(f.is_finite() && f >= 0.0) {
                    return Err(Error::Config("update fraction must be ≥ 0".into()));
                }
            }
        }
        if !(0.0..1.0).contains(&self.pool_fraction) {
            return Err(Error::Config("pool fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(attack: &str) -> String {
        format!(
            r#"{{
                "corpus": {{"kind": "synth", "docs": 50, "universe": 16}},
                "attack": {attack},
                "seed": 1
            }}"#
        )
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(&minimal(r#"{"kind": "bva"}"#)).unwrap();
        assert_eq!(cfg.trials, 30);
        assert_eq!(cfg.leak_fraction, 1.0);
        assert_eq!(cfg.windows.baseline, 8);
        assert_eq!(cfg.windows.target, 10);
        assert_eq!(cfg.windows.per_window, 1000);
        assert_eq!(cfg.trend, TrendSpec::Uniform);
        assert_eq!(cfg.baseline_mode, BaselineMode::Sampled);
        assert!(matches!(
            cfg.attack,
            AttackSpec::Bva {
                gamma: GammaSpec::Offset,
                code_base: CodeBase::Zero,
                tc_shard: false,
            }
        ));
        assert_eq!(cfg.defense, DefenseStack::none());
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{
            "corpus": {"kind": "synth", "docs": 50, "universe": 16},
            "attack": {"kind": "bva"},
            "seed": 1,
            "extra": true
        }"#;
        assert!(matches!(
            ExperimentConfig::from_json(json),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn semantic_validation() {
        let mut cfg = ExperimentConfig::from_json(&minimal(r#"{"kind": "bva"}"#)).unwrap();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::from_json(&minimal(r#"{"kind": "bva"}"#)).unwrap();
        cfg.leak_fraction = 0.0;
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::from_json(&minimal(
            r#"{"kind": "multiple_round", "k": 1}"#
        ))
        .is_err());

        // shielddb_opt without the matching defense is rejected.
        assert!(ExperimentConfig::from_json(&minimal(
            r#"{"kind": "shielddb_opt", "t_groups": 2}"#
        ))
        .is_err());

        let json = r#"{
            "corpus": {"kind": "synth", "docs": 50, "universe": 16},
            "attack": {"kind": "shielddb_opt", "t_groups": 2},
            "defense": {"shielddb": {"alpha": 4, "t_threshold": 2, "c_threshold": 100}},
            "seed": 1
        }"#;
        assert!(ExperimentConfig::from_json(json).is_ok());
    }

    #[test]
    fn attack_specs_round_trip() {
        let specs = [
            r#"{"kind": "bvma", "use_sp": false}"#,
            r#"{"kind": "decoding", "offset": {"mode": "fixed", "value": 100}}"#,
            r#"{"kind": "single_round", "multiplier": {"mode": "auto"}}"#,
            r#"{"kind": "search"}"#,
            r#"{"kind": "zkp", "code_base": "one"}"#,
            r#"{"kind": "modified_bva", "gamma": {"mode": "update_safe"}}"#,
        ];
        for spec in specs {
            let cfg = ExperimentConfig::from_json(&minimal(spec)).unwrap();
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::from_json(&json).unwrap(), cfg);
        }
    }
}
