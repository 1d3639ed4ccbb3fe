//! Adversary-side machinery. Every attack here consumes only what the
//! leakage oracle hands out — observations, optional access leaks — plus
//! whatever the adversary can inject; ground truth never crosses into this
//! module.

pub mod bva;
pub mod bvma;
pub mod decoding;
pub mod multiple_round;
pub mod search;
pub mod shielddb_opt;
pub mod single_round;
pub mod tc;
pub mod zkp;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::sse::{AccessLeak, Observation};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedFile {
    pub keywords: BTreeSet<u32>,
    /// Padded word count; the file carries filler tokens outside the
    /// keyword universe up to this size.
    pub size: u64,
}

impl InjectedFile {
    pub fn new(keywords: BTreeSet<u32>, size: u64) -> Result<Self> {
        if size == 0 || size < keywords.len() as u64 {
            return Err(Error::InvalidArgument(format!(
                "injected file of size {size} cannot hold {} keywords",
                keywords.len()
            )));
        }
        Ok(InjectedFile { keywords, size })
    }
}

/// Contiguous run of plan files sharing one size unit (per-group attacks).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub gamma: u64,
    pub files: Range<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub files: Vec<InjectedFile>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<Vec<GroupInfo>>,
}

impl InjectionPlan {
    pub fn new() -> Self {
        InjectionPlan::default()
    }

    pub fn push_file(&mut self, file: InjectedFile) {
        self.files.push(file);
    }

    /// ILen: number of injected files.
    pub fn ilen(&self) -> u64 {
        self.files.len() as u64
    }

    /// ISize: total injected word count.
    pub fn isize(&self) -> u64 {
        self.files.iter().map(|f| f.size).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let plan: InjectionPlan = serde_json::from_str(json)?;
        for f in &plan.files {
            if f.size == 0 || f.size < f.keywords.len() as u64 {
                return Err(Error::InvalidArgument(
                    "plan file smaller than its keyword set".into(),
                ));
            }
        }
        Ok(plan)
    }
}

/// Whether keyword u carries code u or u+1. The zero code receives no
/// injected volume, so the choice decides if one keyword stays uninjected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeBase {
    #[default]
    Zero,
    One,
}

impl CodeBase {
    pub fn offset(self) -> u64 {
        match self {
            CodeBase::Zero => 0,
            CodeBase::One => 1,
        }
    }

    pub fn code(self, kw: u32) -> u64 {
        kw as u64 + self.offset()
    }

    pub fn keyword(self, code: u64, n_kw: u32) -> Option<u32> {
        let idx = code.checked_sub(self.offset())?;
        (idx < n_kw as u64).then_some(idx as u32)
    }

    pub fn max_code(self, n_kw: u32) -> u64 {
        debug_assert!(n_kw >= 1);
        n_kw as u64 - 1 + self.offset()
    }

    /// Bits needed to write every code, ⌈log₂#W⌉ for the zero base.
    pub fn bits(self, n_kw: u32) -> u32 {
        let max = self.max_code(n_kw);
        64 - max.leading_zeros()
    }

    /// All codes in ascending order.
    pub fn codes(self, n_kw: u32) -> impl Iterator<Item = u64> {
        self.offset()..self.offset() + n_kw as u64
    }
}

/// One query tag's reference volumes from the pre-injection phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagBaseline {
    pub rlp: u64,
    pub rsp: u64,
    pub count: u64,
}

/// The adversary's digest of the baseline phase: one record per distinct
/// query tag plus the derived response-size reference set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BaselineView {
    tags: BTreeMap<u64, TagBaseline>,
    total: u64,
    rsp_values: BTreeSet<u64>,
}

impl BaselineView {
    pub fn from_observations(observations: &[Observation]) -> Self {
        let mut view = BaselineView::default();
        for obs in observations {
            let entry = view.tags.entry(obs.query_tag).or_insert(TagBaseline {
                rlp: obs.rlp,
                rsp: obs.rsp,
                count: 0,
            });
            entry.rlp = obs.rlp;
            entry.rsp = obs.rsp;
            entry.count += 1;
            view.total += 1;
        }
        view.rsp_values = view.tags.values().map(|t| t.rsp).collect();
        view
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn contains_rsp(&self, rsp: u64) -> bool {
        self.rsp_values.contains(&rsp)
    }

    pub fn rsp_values(&self) -> &BTreeSet<u64> {
        &self.rsp_values
    }

    pub fn max_rsp(&self) -> u64 {
        self.rsp_values.iter().next_back().copied().unwrap_or(0)
    }

    pub fn max_rlp(&self) -> u64 {
        self.tags.values().map(|t| t.rlp).max().unwrap_or(0)
    }

    pub fn tag(&self, tag: u64) -> Option<&TagBaseline> {
        self.tags.get(&tag)
    }

    /// Observed frequency of one tag within the baseline stream.
    pub fn freq(&self, tag: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.tags.get(&tag).map_or(0.0, |t| t.count as f64) / self.total as f64
    }

    pub fn rows(&self) -> impl Iterator<Item = (&u64, &TagBaseline)> {
        self.tags.iter()
    }
}

/// One recovery-phase query as the adversary sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetRecord {
    pub obs: Observation,
    pub leak: Option<AccessLeak>,
    /// Tag frequency over the recovery phase, when enough queries exist to
    /// estimate one.
    pub freq: Option<f64>,
}

impl TargetRecord {
    pub fn from_observation(obs: Observation) -> Self {
        TargetRecord {
            obs,
            leak: None,
            freq: None,
        }
    }
}

/// Scored result of one attack run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    /// Per target-query position: predicted keyword index, or None for an
    /// abstention.
    pub predictions: Vec<Option<u32>>,
    pub rer: f64,
    pub ilen: u64,
    pub isize: u64,
    pub rounds: u64,
}

impl AttackOutcome {
    pub fn score(
        predictions: Vec<Option<u32>>,
        truths: &[u32],
        ilen: u64,
        isize: u64,
        rounds: u64,
    ) -> Self {
        assert_eq!(predictions.len(), truths.len());
        let rer = recovery_rate(&predictions, truths);
        AttackOutcome {
            predictions,
            rer,
            ilen,
            isize,
            rounds,
        }
    }
}

/// Fraction of targets predicted exactly; abstentions count as wrong.
pub fn recovery_rate(predictions: &[Option<u32>], truths: &[u32]) -> f64 {
    if truths.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| **p == Some(**t))
        .count();
    correct as f64 / truths.len() as f64
}

/// Adversary access for the interactive attacks: inject a batch, then force
/// the single target query to be replayed.
pub trait ReplayOracle {
    fn inject(&mut self, plan: &InjectionPlan) -> Result<()>;
    fn replay(&mut self) -> Result<Observation>;
}

/// Result of one interactive (per-target) attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteractiveOutcome {
    pub prediction: Option<u32>,
    pub rounds: u64,
    pub ilen: u64,
    pub isize: u64,
}

/// Smallest code whose volume shift lands back on a baseline response
/// size: min {c : rs − c·unit ∈ baseline rsp set}.
pub(crate) fn smallest_shift_code(
    baseline: &BaselineView,
    rs: u64,
    unit: u64,
    codes: impl Iterator<Item = u64>,
) -> Option<u64> {
    let mut codes = codes;
    codes.find(|&c| {
        c.checked_mul(unit)
            .and_then(|v| rs.checked_sub(v))
            .is_some_and(|rem| baseline.contains_rsp(rem))
    })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::{InjectionPlan, ReplayOracle};
    use crate::sse::Observation;
    use crate::{Error, Result};

    /// In-memory volume oracle for interactive-attack tests: tracks one
    /// (rlp, rsp) pair per keyword, applies injections additively, and
    /// replays a single fixed target.
    pub struct VolumeOracle {
        pub rlp: Vec<u64>,
        pub rsp: Vec<u64>,
        pub target: u32,
        pub replayable: bool,
        /// Volume corruption applied to replays once any injection landed.
        pub noise_rlp: u64,
        pub noise_rsp: u64,
        injected: bool,
    }

    impl VolumeOracle {
        pub fn uniform(n_kw: u32, rlp: u64, rsp: u64, target: u32) -> Self {
            VolumeOracle {
                rlp: vec![rlp; n_kw as usize],
                rsp: vec![rsp; n_kw as usize],
                target,
                replayable: true,
                noise_rlp: 0,
                noise_rsp: 0,
                injected: false,
            }
        }
    }

    impl ReplayOracle for VolumeOracle {
        fn inject(&mut self, plan: &InjectionPlan) -> Result<()> {
            for file in &plan.files {
                for &kw in &file.keywords {
                    self.rlp[kw as usize] += 1;
                    self.rsp[kw as usize] += file.size;
                }
            }
            self.injected = true;
            Ok(())
        }

        fn replay(&mut self) -> Result<Observation> {
            if !self.replayable {
                return Err(Error::ReplayUnsupported);
            }
            let (mut rlp, mut rsp) = (
                self.rlp[self.target as usize],
                self.rsp[self.target as usize],
            );
            if self.injected {
                rlp += self.noise_rlp;
                rsp += self.noise_rsp;
            }
            Ok(Observation {
                query_tag: self.target as u64,
                rlp,
                rsp,
                window: 0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(tag: u64, rlp: u64, rsp: u64) -> Observation {
        Observation {
            query_tag: tag,
            rlp,
            rsp,
            window: 0,
        }
    }

    #[test]
    fn injected_file_validation() {
        assert!(InjectedFile::new([0, 1].into_iter().collect(), 1).is_err());
        assert!(InjectedFile::new(BTreeSet::new(), 0).is_err());
        let f = InjectedFile::new([0, 1].into_iter().collect(), 2).unwrap();
        assert_eq!(f.size, 2);
    }

    #[test]
    fn plan_accounting_and_json_round_trip() {
        let mut plan = InjectionPlan::new();
        plan.push_file(InjectedFile::new([0].into_iter().collect(), 4).unwrap());
        plan.push_file(InjectedFile::new([1, 2].into_iter().collect(), 8).unwrap());
        plan.gamma = Some(4);
        plan.groups = Some(vec![GroupInfo {
            gamma: 4,
            files: 0..2,
        }]);
        assert_eq!(plan.ilen(), 2);
        assert_eq!(plan.isize(), 12);
        let json = plan.to_json().unwrap();
        assert_eq!(InjectionPlan::from_json(&json).unwrap(), plan);

        let bad = r#"{"files":[{"keywords":[0,1,2],"size":2}]}"#;
        assert!(InjectionPlan::from_json(bad).is_err());
    }

    #[test]
    fn code_bases() {
        assert_eq!(CodeBase::Zero.code(5), 5);
        assert_eq!(CodeBase::One.code(5), 6);
        assert_eq!(CodeBase::Zero.bits(8), 3);
        assert_eq!(CodeBase::Zero.bits(9), 4);
        assert_eq!(CodeBase::One.bits(8), 4);
        assert_eq!(CodeBase::Zero.bits(1), 0);
        assert_eq!(CodeBase::Zero.keyword(7, 8), Some(7));
        assert_eq!(CodeBase::Zero.keyword(8, 8), None);
        assert_eq!(CodeBase::One.keyword(0, 8), None);
        assert_eq!(CodeBase::One.keyword(8, 8), Some(7));
        assert_eq!(CodeBase::Zero.codes(4).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(CodeBase::One.codes(4).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn baseline_view_digest() {
        let view = BaselineView::from_observations(&[
            obs(0, 2, 30),
            obs(1, 1, 12),
            obs(0, 2, 30),
            obs(2, 0, 0),
        ]);
        assert_eq!(view.len(), 3);
        assert_eq!(view.tag(0).unwrap().count, 2);
        assert_eq!(view.freq(0), 0.5);
        assert_eq!(view.freq(9), 0.0);
        assert!(view.contains_rsp(12));
        assert!(!view.contains_rsp(13));
        assert_eq!(view.max_rsp(), 30);
        assert_eq!(view.max_rlp(), 2);

        let empty = BaselineView::from_observations(&[]);
        assert!(empty.is_empty());
        assert_eq!(empty.max_rsp(), 0);
        assert!(!empty.contains_rsp(0));
    }

    #[test]
    fn recovery_rate_counts_abstentions_as_wrong() {
        let preds = vec![Some(1), Some(2), None, Some(0)];
        let truths = vec![1, 3, 2, 0];
        assert_eq!(recovery_rate(&preds, &truths), 0.5);
        assert_eq!(recovery_rate(&[], &[]), 0.0);
    }

    #[test]
    fn shift_code_picks_smallest_match() {
        let view = BaselineView::from_observations(&[obs(0, 1, 10), obs(1, 2, 25)]);
        // rs = 25: code 0 hits 25 directly; code 3 would hit 10 at unit 5.
        assert_eq!(smallest_shift_code(&view, 25, 5, 0..8), Some(0));
        assert_eq!(smallest_shift_code(&view, 25, 5, 1..8), Some(3));
        assert_eq!(smallest_shift_code(&view, 24, 5, 0..8), None);
    }
}
