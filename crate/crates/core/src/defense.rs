//! Padding and size-capping defenses layered over the simulated index:
//! a file word-count cap (TC), static power-of-x padding with an abstract
//! ORAM block model plus its dynamic re-padding extension (SEAL), and
//! clustered batch padding of update lengths (ShieldDB, high mode).

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{GroupInfo, InjectionPlan};
use crate::corpus::{Corpus, DocId};
use crate::sse::{DocKind, SimulatedIndex};
use crate::{Error, Result};

/// Threshold countermeasure: the client refuses to index any file whose
/// word count exceeds the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcConfig {
    pub threshold: u64,
}

/// SEAL-style defense: response lengths are padded up to the next power of
/// `x`. With `oram` set, volumes are measured in storage blocks of
/// `block_size` words and the access pattern is suppressed. With
/// `dynamic_extension` set, padding is re-applied after every update batch
/// instead of only at setup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealConfig {
    pub block_size: u64,
    pub x: u64,
    #[serde(default)]
    pub oram: bool,
    #[serde(default)]
    pub dynamic_extension: bool,
}

/// ShieldDB-style defense: keywords are grouped into clusters of `alpha`;
/// update pairs are cached client-side and a cluster is uploaded as one
/// padded batch in which every member receives the cluster's maximum
/// pending update length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShieldDbConfig {
    pub alpha: u32,
    /// Upload when this many observation windows pass since the cluster's
    /// last upload while pairs are pending.
    pub t_threshold: u64,
    /// Upload when a cluster's pending pair count exceeds this.
    pub c_threshold: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefenseStack {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tc: Option<TcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seal: Option<SealConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shielddb: Option<ShieldDbConfig>,
}

impl DefenseStack {
    pub fn none() -> Self {
        DefenseStack::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seal.is_some() && self.shielddb.is_some() {
            return Err(Error::Config(
                "seal and shielddb are mutually exclusive in one stack".into(),
            ));
        }
        if let Some(tc) = self.tc {
            if tc.threshold == 0 {
                return Err(Error::Config("tc threshold must be positive".into()));
            }
        }
        if let Some(seal) = self.seal {
            if seal.block_size == 0 {
                return Err(Error::Config("seal block size must be positive".into()));
            }
            if seal.x < 2 {
                return Err(Error::Config("seal padding base x must be at least 2".into()));
            }
        }
        if let Some(sd) = self.shielddb {
            if sd.alpha == 0 {
                return Err(Error::Config("shielddb alpha must be positive".into()));
            }
        }
        Ok(())
    }

    /// True when the stack suppresses the access pattern.
    pub fn hides_access(&self) -> bool {
        self.seal.map(|s| s.oram).unwrap_or(false)
    }

    /// Short label for report rows, e.g. "tc500+seal(x=2,oram)".
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(tc) = self.tc {
            parts.push(format!("tc{}", tc.threshold));
        }
        if let Some(seal) = self.seal {
            let mut s = format!("seal(x={},b={}", seal.x, seal.block_size);
            if seal.oram {
                s.push_str(",oram");
            }
            if seal.dynamic_extension {
                s.push_str(",dyn");
            }
            s.push(')');
            parts.push(s);
        }
        if let Some(sd) = self.shielddb {
            parts.push(format!("shielddb(a={},t={},c={})", sd.alpha, sd.t_threshold, sd.c_threshold));
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// Padded response length: the least power of `x` strictly greater than
/// `len`. `x^0 = 1` covers empty responses.
pub fn seal_pad_query(len: u64, x: u64) -> u64 {
    debug_assert!(x >= 2);
    let mut p: u64 = 1;
    while p <= len {
        p = p.saturating_mul(x);
    }
    p
}

/// Number of `block_size`-word storage blocks a file occupies.
pub fn blocks(word_count: u64, block_size: u64) -> u64 {
    debug_assert!(block_size >= 1);
    word_count.div_ceil(block_size)
}

/// Server-side enforcement of the word-count cap on an injection plan:
/// files over the threshold are dropped (never indexed), the rest pass
/// unchanged. Group metadata is remapped onto the surviving files.
pub fn tc_filter(plan: &InjectionPlan, threshold: u64) -> InjectionPlan {
    let kept_mask: Vec<bool> = plan.files.iter().map(|f| f.size <= threshold).collect();
    let files = plan
        .files
        .iter()
        .zip(&kept_mask)
        .filter(|(_, &keep)| keep)
        .map(|(f, _)| f.clone())
        .collect();
    InjectionPlan {
        files,
        gamma: plan.gamma,
        groups: remap_groups(plan.groups.as_deref(), &kept_mask),
    }
}

/// Remap contiguous group file ranges after files were kept/expanded:
/// `expansion[i]` is the number of output files the i-th input produced.
pub(crate) fn remap_groups_expanded(
    groups: Option<&[GroupInfo]>,
    expansion: &[usize],
) -> Option<Vec<GroupInfo>> {
    let groups = groups?;
    let mut starts = Vec::with_capacity(expansion.len() + 1);
    let mut acc = 0usize;
    for &e in expansion {
        starts.push(acc);
        acc += e;
    }
    starts.push(acc);
    Some(
        groups
            .iter()
            .map(|g| GroupInfo {
                gamma: g.gamma,
                files: starts[g.files.start]..starts[g.files.end],
            })
            .collect(),
    )
}

fn remap_groups(groups: Option<&[GroupInfo]>, kept: &[bool]) -> Option<Vec<GroupInfo>> {
    let expansion: Vec<usize> = kept.iter().map(|&k| usize::from(k)).collect();
    remap_groups_expanded(groups, &expansion)
}

/// ShieldDB's keyword clustering stand-in: keywords ordered by descending
/// document frequency in the training corpus (ties by ascending index),
/// then cut into consecutive clusters of `alpha`.
pub fn shielddb_clusters(training: &Corpus, alpha: u32) -> Vec<Vec<u32>> {
    let n = training.universe.len() as usize;
    let mut df = vec![0u64; n];
    for d in &training.documents {
        for &k in &d.keywords {
            df[k as usize] += 1;
        }
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| df[b as usize].cmp(&df[a as usize]).then(a.cmp(&b)));
    order
        .chunks(alpha.max(1) as usize)
        .map(|c| c.to_vec())
        .collect()
}

/// Counters for padding activity caused by one defense action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PadStats {
    pub dummy_files: u64,
    pub dummy_words: u64,
    pub uploaded_pairs: u64,
}

impl PadStats {
    pub fn absorb(&mut self, other: PadStats) {
        self.dummy_files += other.dummy_files;
        self.dummy_words += other.dummy_words;
        self.uploaded_pairs += other.uploaded_pairs;
    }
}

/// Runtime state of the SEAL padding module.
#[derive(Clone, Debug)]
pub struct SealState {
    cfg: SealConfig,
    /// Response length (in the stack's volume unit) each keyword was last
    /// padded to. Re-padding is touch-driven: a keyword is only reconsidered
    /// when its posting list changed since the previous padding pass.
    padded_to: HashMap<u32, u64>,
}

impl SealState {
    pub fn new(cfg: SealConfig) -> Self {
        SealState {
            cfg,
            padded_to: HashMap::new(),
        }
    }

    pub fn cfg(&self) -> SealConfig {
        self.cfg
    }

    fn units(&self, index: &SimulatedIndex, kw: u32) -> u64 {
        if self.cfg.oram {
            index
                .posting(kw)
                .iter()
                .map(|id| blocks(index.doc(*id).expect("posting doc exists").word_count, self.cfg.block_size))
                .sum()
        } else {
            index.posting(kw).len() as u64
        }
    }

    fn dummy_size(&self, rng: &mut ChaCha12Rng, size_range: (u64, u64)) -> u64 {
        if self.cfg.oram {
            // Uniform block-sized fillers; one dummy = one block.
            self.cfg.block_size
        } else {
            rng.gen_range(size_range.0..=size_range.1.max(size_range.0))
        }
    }

    fn pad_keyword(
        &mut self,
        index: &mut SimulatedIndex,
        kw: u32,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let cur = self.units(index, kw);
        if self.padded_to.get(&kw) == Some(&cur) {
            return PadStats::default();
        }
        let target = seal_pad_query(cur, self.cfg.x);
        let mut stats = PadStats::default();
        let mut have = cur;
        while have < target {
            let size = self.dummy_size(rng, size_range);
            index.add_dummy(kw, size);
            stats.dummy_files += 1;
            stats.dummy_words += size;
            have += if self.cfg.oram {
                blocks(size, self.cfg.block_size)
            } else {
                1
            };
        }
        self.padded_to.insert(kw, target);
        stats
    }

    /// Static setup padding over the whole universe.
    pub fn pad_all(
        &mut self,
        index: &mut SimulatedIndex,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let mut stats = PadStats::default();
        for kw in 0..index.universe_size() {
            stats.absorb(self.pad_keyword(index, kw, rng, size_range));
        }
        stats
    }

    /// Dynamic-extension pass over the keywords touched by the last batch.
    pub fn repad(
        &mut self,
        index: &mut SimulatedIndex,
        touched: &BTreeSet<u32>,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let mut stats = PadStats::default();
        for &kw in touched {
            stats.absorb(self.pad_keyword(index, kw, rng, size_range));
        }
        stats
    }
}

/// Runtime state of the ShieldDB padding module: the client-side cache of
/// pending (keyword, doc) pairs plus per-cluster upload bookkeeping.
#[derive(Clone, Debug)]
pub struct ShieldDbState {
    cfg: ShieldDbConfig,
    clusters: Vec<Vec<u32>>,
    cluster_of: Vec<usize>,
    /// Pending (doc_id, word_count, injected) pairs per keyword.
    pending: Vec<Vec<(DocId, u64, bool)>>,
    uploaded: Vec<bool>,
    last_upload: Vec<u64>,
}

impl ShieldDbState {
    pub fn new(cfg: ShieldDbConfig, clusters: Vec<Vec<u32>>, universe_size: u32) -> Self {
        let mut cluster_of = vec![usize::MAX; universe_size as usize];
        for (v, members) in clusters.iter().enumerate() {
            for &kw in members {
                cluster_of[kw as usize] = v;
            }
        }
        let n_clusters = clusters.len();
        ShieldDbState {
            cfg,
            clusters,
            cluster_of,
            pending: vec![Vec::new(); universe_size as usize],
            uploaded: vec![false; n_clusters],
            last_upload: vec![0; n_clusters],
        }
    }

    pub fn clusters(&self) -> &[Vec<u32>] {
        &self.clusters
    }

    pub fn pending_pairs(&self, kw: u32) -> usize {
        self.pending[kw as usize].len()
    }

    fn cluster_pending(&self, v: usize) -> u64 {
        self.clusters[v]
            .iter()
            .map(|&kw| self.pending[kw as usize].len() as u64)
            .sum()
    }

    /// Cache the pairs of a newly added file and fire any Case-1 (first
    /// upload requires full member coverage) or pair-count triggers.
    #[allow(clippy::too_many_arguments)]
    pub fn cache_add(
        &mut self,
        index: &mut SimulatedIndex,
        doc_id: DocId,
        word_count: u64,
        keywords: &BTreeSet<u32>,
        injected: bool,
        slot: u64,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let mut affected: BTreeSet<usize> = BTreeSet::new();
        for &kw in keywords {
            self.pending[kw as usize].push((doc_id, word_count, injected));
            affected.insert(self.cluster_of[kw as usize]);
        }
        let mut stats = PadStats::default();
        for v in affected {
            let ready = if self.uploaded[v] {
                self.cluster_pending(v) > self.cfg.c_threshold
            } else {
                self.clusters[v]
                    .iter()
                    .all(|&kw| !self.pending[kw as usize].is_empty())
            };
            if ready {
                stats.absorb(self.flush_cluster(index, v, slot, rng, size_range));
            }
        }
        stats
    }

    /// Retract still-cached pairs of a deleted document.
    pub fn retract(&mut self, doc_id: DocId) {
        for pending in &mut self.pending {
            pending.retain(|&(id, _, _)| id != doc_id);
        }
    }

    /// Time trigger: flush clusters whose last upload is more than
    /// t_threshold slots old and that have pending pairs.
    pub fn on_slot(
        &mut self,
        index: &mut SimulatedIndex,
        slot: u64,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let mut stats = PadStats::default();
        for v in 0..self.clusters.len() {
            if self.uploaded[v]
                && slot.saturating_sub(self.last_upload[v]) > self.cfg.t_threshold
                && self.cluster_pending(v) > 0
            {
                stats.absorb(self.flush_cluster(index, v, slot, rng, size_range));
            }
        }
        stats
    }

    /// End-of-setup settling: flush every cluster that already uploaded or
    /// currently meets the Case-1 gate, so baseline observation starts from
    /// a settled index. Clusters missing member coverage stay cached.
    pub fn settle(
        &mut self,
        index: &mut SimulatedIndex,
        slot: u64,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let mut stats = PadStats::default();
        for v in 0..self.clusters.len() {
            let case1_ready = !self.uploaded[v]
                && self.clusters[v]
                    .iter()
                    .all(|&kw| !self.pending[kw as usize].is_empty());
            if (self.uploaded[v] || case1_ready) && self.cluster_pending(v) > 0 {
                stats.absorb(self.flush_cluster(index, v, slot, rng, size_range));
            }
        }
        stats
    }

    fn flush_cluster(
        &mut self,
        index: &mut SimulatedIndex,
        v: usize,
        slot: u64,
        rng: &mut ChaCha12Rng,
        size_range: (u64, u64),
    ) -> PadStats {
        let max_len = self.clusters[v]
            .iter()
            .map(|&kw| self.pending[kw as usize].len() as u64)
            .max()
            .unwrap_or(0);
        let mut stats = PadStats::default();
        if max_len == 0 {
            return stats;
        }
        for i in 0..self.clusters[v].len() {
            let kw = self.clusters[v][i];
            let pairs = std::mem::take(&mut self.pending[kw as usize]);
            let have = pairs.len() as u64;
            for (doc_id, word_count, injected) in pairs {
                let kind = if injected {
                    DocKind::Injected
                } else {
                    DocKind::Real
                };
                index.add_pair(kw, doc_id, word_count, kind);
                stats.uploaded_pairs += 1;
            }
            for _ in have..max_len {
                let size = rng.gen_range(size_range.0..=size_range.1.max(size_range.0));
                index.add_dummy(kw, size);
                stats.dummy_files += 1;
                stats.dummy_words += size;
            }
        }
        self.uploaded[v] = true;
        self.last_upload[v] = slot;
        stats
    }
}
