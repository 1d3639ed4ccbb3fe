//! Sweep grids: either an explicit experiment list, or one base config plus
//! axes of JSON-pointer substitutions expanded as a cartesian product.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::harness::config::ExperimentConfig;
use crate::harness::report::ExperimentReport;
use crate::harness::runner::run_experiment;
use crate::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// JSON pointer into the base config, e.g. "/attack/gamma/value".
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub experiments: Vec<Value>,
    #[serde(default)]
    pub base: Option<Value>,
    #[serde(default)]
    pub axes: Vec<Axis>,
}

impl SweepGrid {
    pub fn from_json(json: &str) -> Result<Self> {
        let grid: SweepGrid =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        match (grid.experiments.is_empty(), grid.base.is_some()) {
            (false, false) => Ok(grid),
            (true, true) => Ok(grid),
            (true, false) => Err(Error::Config(
                "sweep grid needs either \"experiments\" or \"base\"".into(),
            )),
            (false, true) => Err(Error::Config(
                "sweep grid takes \"experiments\" or \"base\"+\"axes\", not both".into(),
            )),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&json)
    }
}

/// Write `value` at `pointer` (RFC 6901), creating missing intermediate
/// objects along the way.
fn set_pointer(root: &mut Value, pointer: &str, value: Value) -> Result<()> {
    if pointer.is_empty() {
        return Err(Error::Config("empty sweep axis path".into()));
    }
    let Some(rest) = pointer.strip_prefix('/') else {
        return Err(Error::Config(format!(
            "axis path {pointer:?} must start with '/'"
        )));
    };
    let tokens: Vec<String> = rest
        .split('/')
        .map(|t| t.replace("~1", "/").replace("~0", "~"))
        .collect();
    let mut cur = root;
    for (i, token) in tokens.iter().enumerate() {
        let last = i + 1 == tokens.len();
        // Arrays are only indexed, never grown; everything else becomes an
        // object so new keys can be introduced.
        if let Value::Array(arr) = cur {
            let idx: usize = token.parse().map_err(|_| {
                Error::Config(format!("axis path {pointer:?}: {token:?} is not an index"))
            })?;
            let slot = arr.get_mut(idx).ok_or_else(|| {
                Error::Config(format!("axis path {pointer:?}: index {idx} out of range"))
            })?;
            if last {
                *slot = value;
                return Ok(());
            }
            cur = slot;
            continue;
        }
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let map = cur.as_object_mut().expect("just coerced to object");
        if last {
            map.insert(token.clone(), value);
            return Ok(());
        }
        cur = map
            .entry(token.clone())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last token")
}

fn config_from_value(value: Value) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Expand the grid into concrete configs. Combination names get a
/// zero-padded running suffix; explicit lists keep their own names.
pub fn expand_grid(grid: &SweepGrid) -> Result<Vec<ExperimentConfig>> {
    let mut configs = Vec::new();
    if !grid.experiments.is_empty() {
        for value in &grid.experiments {
            configs.push(config_from_value(value.clone())?);
        }
    } else {
        let base = grid.base.clone().expect("validated at parse");
        let total: usize = grid.axes.iter().map(|a| a.values.len().max(1)).product();
        let width = total.to_string().len();
        let mut combo = vec![0usize; grid.axes.len()];
        for i in 0..total {
            let mut value = base.clone();
            for (axis, &pick) in grid.axes.iter().zip(&combo) {
                if axis.values.is_empty() {
                    return Err(Error::Config(format!("axis {:?} has no values", axis.path)));
                }
                set_pointer(&mut value, &axis.path, axis.values[pick].clone())?;
            }
            let mut config = config_from_value(value)?;
            if !grid.axes.is_empty() {
                config.name = format!("{}-{:0width$}", config.name, i);
            }
            configs.push(config);
            // Odometer increment, last axis fastest.
            for a in (0..combo.len()).rev() {
                combo[a] += 1;
                if combo[a] < grid.axes[a].values.len() {
                    break;
                }
                combo[a] = 0;
            }
        }
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!(
            "duplicate experiment name {:?} in sweep",
            w[0]
        )));
    }
    Ok(configs)
}

pub struct SweepOutcome {
    pub reports: Vec<ExperimentReport>,
    /// (experiment name, error) for rows that failed to run.
    pub failures: Vec<(String, String)>,
}

/// Run every expanded config, pressing on past per-row failures.
pub fn run_sweep(grid: &SweepGrid) -> Result<SweepOutcome> {
    let configs = expand_grid(grid)?;
    let mut outcome = SweepOutcome {
        reports: Vec::new(),
        failures: Vec::new(),
    };
    for config in &configs {
        log::info!("running experiment {}", config.name);
        match run_experiment(config) {
            Ok(report) => outcome.reports.push(report),
            Err(e) => {
                log::warn!("experiment {} failed: {e}", config.name);
                outcome.failures.push((config.name.clone(), e.to_string()));
            }
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_base() -> Value {
        serde_json::json!({
            "name": "grid",
            "corpus": {"kind": "synth", "docs": 20, "universe": 8},
            "windows": {"baseline": 1, "target": 1, "per_window": 10},
            "attack": {"kind": "bva"},
            "trials": 1,
            "seed": 7
        })
    }

    #[test]
    fn axes_expand_as_cartesian_product() {
        let grid = SweepGrid {
            experiments: Vec::new(),
            base: Some(minimal_base()),
            axes: vec![
                Axis {
                    path: "/seed".into(),
                    values: vec![1.into(), 2.into()],
                },
                Axis {
                    path: "/corpus/universe".into(),
                    values: vec![8.into(), 16.into(), 32.into()],
                },
            ],
        };
        let configs = expand_grid(&grid).unwrap();
        assert_eq!(configs.len(), 6);
        assert_eq!(configs[0].name, "grid-0");
        assert_eq!(configs[5].name, "grid-5");
        assert_eq!(configs[0].seed, 1);
        // Last axis fastest.
        let universes: Vec<u32> = configs
            .iter()
            .map(|c| match c.corpus {
                crate::harness::config::CorpusSpec::Synth { universe, .. } => universe,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(universes, [8, 16, 32, 8, 16, 32]);
        assert_eq!(configs[3].seed, 2);
    }

    #[test]
    fn pointer_creates_missing_segments() {
        let grid = SweepGrid {
            experiments: Vec::new(),
            base: Some(minimal_base()),
            axes: vec![Axis {
                path: "/defense/tc/threshold".into(),
                values: vec![50.into()],
            }],
        };
        let configs = expand_grid(&grid).unwrap();
        assert_eq!(configs[0].defense.tc.unwrap().threshold, 50);
    }

    #[test]
    fn explicit_lists_keep_names_and_reject_duplicates() {
        let mut a = minimal_base();
        set_pointer(&mut a, "/name", "one".into()).unwrap();
        let mut b = minimal_base();
        set_pointer(&mut b, "/name", "two".into()).unwrap();
        let grid = SweepGrid {
            experiments: vec![a.clone(), b],
            base: None,
            axes: Vec::new(),
        };
        let configs = expand_grid(&grid).unwrap();
        assert_eq!(configs[0].name, "one");
        assert_eq!(configs[1].name, "two");

        let grid = SweepGrid {
            experiments: vec![a.clone(), a],
            base: None,
            axes: Vec::new(),
        };
        assert!(matches!(expand_grid(&grid), Err(Error::Config(_))));
    }

    #[test]
    fn grid_parse_validation() {
        assert!(SweepGrid::from_json("{}").is_err());
        assert!(SweepGrid::from_json(r#"{"base": {}, "experiments": [{}]}"#).is_err());
        assert!(SweepGrid::from_json(r#"{"experiments": [{}], "unknown": 1}"#).is_err());
    }

    #[test]
    fn sweep_records_per_row_failures() {
        let mut bad = minimal_base();
        // Interactive attack with replay disabled fails at run time.
        set_pointer(&mut bad, "/name", "bad".into()).unwrap();
        set_pointer(
            &mut bad,
            "/attack",
            serde_json::json!({"kind": "search", "replay": false}),
        )
        .unwrap();
        let grid = SweepGrid {
            experiments: vec![minimal_base(), bad],
            base: None,
            axes: Vec::new(),
        };
        let outcome = run_sweep(&grid).unwrap();
        assert_eq!(outcome.reports.len(), 1);
        assert_eq!(outcome.failures.len(), 1);
        assert_eq!(outcome.failures[0].0, "bad");
    }
}
