//! Leakage-level simulation of a dynamic SSE deployment: an encrypted index
//! reduced to posting lists plus document sizes, and a deployment wrapper
//! that answers queries with exactly the patterns a persistent adversary on
//! the server can record (search, response-length, response-size and access
//! patterns), routes updates through the configured defense stack, and keeps
//! per-phase overhead counters.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::attack::InjectionPlan;
use crate::corpus::{Corpus, DocId, Document};
use crate::defense::{blocks, DefenseStack, PadStats, SealState, ShieldDbState};
use crate::{Error, Result};

/// Ids at or above this base are allocated by the simulation (injected
/// files and server-side dummies); client documents must stay below it.
const SYNTHETIC_ID_BASE: DocId = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Real,
    Injected,
    Dummy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub word_count: u64,
    pub keywords: BTreeSet<u32>,
    pub kind: DocKind,
}

/// What one query leaks to the server, beyond the repeated-query structure
/// carried by `query_tag`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    /// Opaque identifier, stable per distinct underlying keyword, assigned
    /// in first-seen order.
    pub query_tag: u64,
    /// Response length: matching files, or storage blocks under ORAM.
    pub rlp: u64,
    /// Response size: total matched words, or blocks * block_size under ORAM.
    pub rsp: u64,
    /// Observation window the query fell into.
    pub window: u32,
}

impl Observation {
    /// The joint volume pattern.
    pub fn vp(&self) -> (u64, u64) {
        (self.rlp, self.rsp)
    }
}

/// Access-pattern leakage for one query; absent when the stack hides it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessLeak {
    pub ids: BTreeSet<DocId>,
    /// The subset of `ids` that are adversary-injected files.
    pub injected: BTreeSet<DocId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOp {
    Add,
    Delete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSource {
    Client,
    Adversary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub op: UpdateOp,
    pub document: Document,
    pub source: UpdateSource,
}

/// The encrypted database as the leakage model sees it: per-keyword posting
/// lists over documents that only carry sizes.
#[derive(Clone, Debug)]
pub struct SimulatedIndex {
    universe_size: u32,
    postings: Vec<BTreeSet<DocId>>,
    docs: BTreeMap<DocId, IndexedDoc>,
    injected: BTreeSet<DocId>,
    epoch: u64,
    next_synthetic: DocId,
}

impl SimulatedIndex {
    pub fn new(universe_size: u32) -> Self {
        SimulatedIndex {
            universe_size,
            postings: vec![BTreeSet::new(); universe_size as usize],
            docs: BTreeMap::new(),
            injected: BTreeSet::new(),
            epoch: 0,
            next_synthetic: SYNTHETIC_ID_BASE,
        }
    }

    pub fn universe_size(&self) -> u32 {
        self.universe_size
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn contains(&self, id: DocId) -> bool {
        self.docs.contains_key(&id)
    }

    pub fn doc(&self, id: DocId) -> Option<&IndexedDoc> {
        self.docs.get(&id)
    }

    pub fn docs(&self) -> impl Iterator<Item = (&DocId, &IndexedDoc)> {
        self.docs.iter()
    }

    pub fn posting(&self, kw: u32) -> &BTreeSet<DocId> {
        &self.postings[kw as usize]
    }

    pub fn is_injected(&self, id: DocId) -> bool {
        self.injected.contains(&id)
    }

    pub fn alloc_synthetic_id(&mut self) -> DocId {
        let id = self.next_synthetic;
        self.next_synthetic += 1;
        id
    }

    fn check_keywords(&self, id: DocId, keywords: &BTreeSet<u32>) -> Result<()> {
        if let Some(&kw) = keywords.iter().find(|&&k| k >= self.universe_size) {
            return Err(Error::InvalidArgument(format!(
                "document {id} references keyword {kw} outside the {}-word universe",
                self.universe_size
            )));
        }
        Ok(())
    }

    pub fn add_doc(
        &mut self,
        id: DocId,
        word_count: u64,
        keywords: BTreeSet<u32>,
        kind: DocKind,
    ) -> Result<()> {
        if self.docs.contains_key(&id) {
            return Err(Error::DuplicateDoc(id));
        }
        self.check_keywords(id, &keywords)?;
        for &kw in &keywords {
            self.postings[kw as usize].insert(id);
        }
        if kind == DocKind::Injected {
            self.injected.insert(id);
        }
        self.docs.insert(
            id,
            IndexedDoc {
                word_count,
                keywords,
                kind,
            },
        );
        self.epoch += 1;
        Ok(())
    }

    /// Insert a single (keyword, doc) pair, creating the document record on
    /// first contact. Used by defenses that upload at pair granularity.
    pub fn add_pair(&mut self, kw: u32, id: DocId, word_count: u64, kind: DocKind) {
        debug_assert!(kw < self.universe_size);
        let entry = self.docs.entry(id).or_insert_with(|| IndexedDoc {
            word_count,
            keywords: BTreeSet::new(),
            kind,
        });
        entry.keywords.insert(kw);
        self.postings[kw as usize].insert(id);
        if kind == DocKind::Injected {
            self.injected.insert(id);
        }
        self.epoch += 1;
    }

    /// Append a server-side dummy posting: a fresh synthetic document of the
    /// given size attached to exactly one keyword, so it can never perturb
    /// another keyword's true posting set.
    pub fn add_dummy(&mut self, kw: u32, word_count: u64) -> DocId {
        debug_assert!(kw < self.universe_size);
        let id = self.alloc_synthetic_id();
        self.postings[kw as usize].insert(id);
        self.docs.insert(
            id,
            IndexedDoc {
                word_count,
                keywords: [kw].into_iter().collect(),
                kind: DocKind::Dummy,
            },
        );
        self.epoch += 1;
        id
    }

    pub fn delete_doc(&mut self, id: DocId) -> Result<IndexedDoc> {
        let doc = self.docs.remove(&id).ok_or(Error::UnknownDoc(id))?;
        for &kw in &doc.keywords {
            self.postings[kw as usize].remove(&id);
        }
        self.injected.remove(&id);
        self.epoch += 1;
        Ok(doc)
    }

    /// Non-injected, non-dummy document ids in ascending order.
    pub fn client_doc_ids(&self) -> Vec<DocId> {
        self.docs
            .iter()
            .filter(|(_, d)| d.kind == DocKind::Real)
            .map(|(&id, _)| id)
            .collect()
    }

    /// Plain (file, word) volume of one keyword: (#files, total words).
    pub fn volume(&self, kw: u32) -> (u64, u64) {
        let posting = &self.postings[kw as usize];
        let words = posting
            .iter()
            .map(|id| self.docs[id].word_count)
            .sum::<u64>();
        (posting.len() as u64, words)
    }
}

/// Which experiment phase counters should attribute activity to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Baseline,
    Injection,
    Updates,
    Target,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounter {
    /// Client/adversary files actually indexed (or cached for upload).
    pub real_files: u64,
    /// Server-side dummy files or blocks created by padding.
    pub dummy_files: u64,
    pub dummy_words: u64,
    /// Files rejected by the word-count cap.
    pub dropped_files: u64,
    pub deletes: u64,
    pub queries: u64,
    pub rlp_sum: u64,
    pub rsp_sum: u64,
}

pub type PhaseCounters = BTreeMap<Phase, PhaseCounter>;

/// Outcome of submitting one injection plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InjectionReceipt {
    /// Per plan file: the doc id it got, or None if the cap dropped it.
    pub doc_ids: Vec<Option<DocId>>,
    pub dropped: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatePolicy {
    AddOnly,
    DeleteOnly,
    UniformMix,
}

/// Result of a seeded client-update session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateRun {
    pub events: Vec<UpdateEvent>,
    /// Requested operations skipped because no document (or pool file) was
    /// available; recorded no-ops rather than errors.
    pub skipped: u64,
    /// Total word count of the added files.
    pub added_words: u64,
}

/// A full deployment: index + defense state + query bookkeeping. One
/// deployment serves one experiment trial; concurrency across trials is by
/// value (the whole deployment is Clone).
#[derive(Clone, Debug)]
pub struct Deployment {
    index: SimulatedIndex,
    stack: DefenseStack,
    seal: Option<SealState>,
    shielddb: Option<ShieldDbState>,
    tags: HashMap<u32, u64>,
    next_tag: u64,
    queries_seen: u64,
    window_size: u64,
    window_base: u64,
    last_slot: u64,
    rng: ChaCha12Rng,
    size_range: (u64, u64),
    counters: PhaseCounters,
    phase: Phase,
    /// Adversarial-stress switch: lets explicitly constructed client events
    /// delete injected files. Off by default.
    pub allow_delete_injected: bool,
}

impl Deployment {
    /// Build the deployment: index the corpus through the defense stack and
    /// apply setup-time padding. `clusters` must be provided when ShieldDB
    /// is configured (normally `defense::shielddb_clusters` on the training
    /// corpus).
    pub fn setup(
        corpus: &Corpus,
        stack: DefenseStack,
        clusters: Option<Vec<Vec<u32>>>,
        window_size: u64,
        seed: u64,
    ) -> Result<Self> {
        stack.validate()?;
        if window_size == 0 {
            return Err(Error::Config("window size must be positive".into()));
        }
        let universe_size = corpus.universe.len();
        let shielddb = match (stack.shielddb, clusters) {
            (Some(cfg), Some(clusters)) => Some(ShieldDbState::new(cfg, clusters, universe_size)),
            (Some(_), None) => {
                return Err(Error::Config(
                    "shielddb defense requires a keyword clustering".into(),
                ))
            }
            (None, _) => None,
        };
        let seal = stack.seal.map(SealState::new);

        let retained: Vec<&Document> = corpus
            .documents
            .iter()
            .filter(|d| stack.tc.map(|tc| d.word_count <= tc.threshold).unwrap_or(true))
            .collect();
        let dropped = corpus.documents.len() - retained.len();
        let size_range = retained
            .iter()
            .map(|d| d.word_count)
            .fold(None, |acc, wc| {
                Some(match acc {
                    None => (wc, wc),
                    Some((lo, hi)) => (wc.min(lo), wc.max(hi)),
                })
            })
            .unwrap_or((1, 1));

        let mut dep = Deployment {
            index: SimulatedIndex::new(universe_size),
            stack,
            seal,
            shielddb,
            tags: HashMap::new(),
            next_tag: 0,
            queries_seen: 0,
            window_size,
            window_base: 0,
            last_slot: 0,
            rng: ChaCha12Rng::seed_from_u64(seed),
            size_range,
            counters: PhaseCounters::new(),
            phase: Phase::Setup,
            allow_delete_injected: false,
        };

        for doc in &corpus.documents {
            if doc.doc_id >= SYNTHETIC_ID_BASE {
                return Err(Error::InvalidArgument(format!(
                    "corpus doc id {} collides with the synthetic id space",
                    doc.doc_id
                )));
            }
        }
        let docs: Vec<Document> = retained.into_iter().cloned().collect();
        dep.counter_mut(Phase::Setup).dropped_files += dropped as u64;
        for doc in docs {
            dep.index_add(doc, DocKind::Real)?;
        }
        // Settle ShieldDB so baseline observation starts from an uploaded
        // state, then apply SEAL's static padding.
        if let Some(sd) = dep.shielddb.as_mut() {
            let stats = sd.settle(&mut dep.index, 0, &mut dep.rng, dep.size_range);
            record_pad(dep.counters.entry(Phase::Setup).or_default(), stats);
        }
        if let Some(seal) = dep.seal.as_mut() {
            let stats = seal.pad_all(&mut dep.index, &mut dep.rng, dep.size_range);
            record_pad(dep.counters.entry(Phase::Setup).or_default(), stats);
        }
        Ok(dep)
    }

    pub fn index(&self) -> &SimulatedIndex {
        &self.index
    }

    pub fn stack(&self) -> &DefenseStack {
        &self.stack
    }

    pub fn shielddb(&self) -> Option<&ShieldDbState> {
        self.shielddb.as_ref()
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn counters(&self) -> &PhaseCounters {
        &self.counters
    }

    pub fn current_window(&self) -> u64 {
        self.window_base + self.queries_seen / self.window_size
    }

    fn counter_mut(&mut self, phase: Phase) -> &mut PhaseCounter {
        self.counters.entry(phase).or_default()
    }

    /// Advance idle time by `n` observation windows (triggers time-based
    /// defense flushes).
    pub fn skip_windows(&mut self, n: u64) {
        self.window_base += n;
        self.run_slot_triggers();
    }

    fn run_slot_triggers(&mut self) {
        let slot = self.current_window();
        if slot == self.last_slot {
            return;
        }
        self.last_slot = slot;
        if let Some(sd) = self.shielddb.as_mut() {
            let stats = sd.on_slot(&mut self.index, slot, &mut self.rng, self.size_range);
            record_pad(self.counters.entry(self.phase).or_default(), stats);
        }
    }

    /// Answer one client query and return what the server-side adversary
    /// observes. Access-pattern leakage is withheld under ORAM.
    pub fn query_leak(&mut self, kw: u32) -> (Observation, Option<AccessLeak>) {
        assert!(
            kw < self.index.universe_size(),
            "query keyword {kw} outside universe"
        );
        self.run_slot_triggers();
        let window = self.current_window() as u32;
        self.queries_seen += 1;

        let tag = match self.tags.get(&kw) {
            Some(&t) => t,
            None => {
                let t = self.next_tag;
                self.tags.insert(kw, t);
                self.next_tag += 1;
                t
            }
        };

        let (rlp, rsp) = self.measure(kw);
        let c = self.counter_mut(self.phase);
        c.queries += 1;
        c.rlp_sum += rlp;
        c.rsp_sum += rsp;

        let leak = if self.stack.hides_access() {
            None
        } else {
            let ids = self.index.posting(kw).clone();
            let injected = ids
                .iter()
                .copied()
                .filter(|id| self.index.is_injected(*id))
                .collect();
            Some(AccessLeak { ids, injected })
        };
        (
            Observation {
                query_tag: tag,
                rlp,
                rsp,
                window,
            },
            leak,
        )
    }

    fn measure(&self, kw: u32) -> (u64, u64) {
        match self.stack.seal {
            Some(seal) if seal.oram => {
                let rlp: u64 = self
                    .index
                    .posting(kw)
                    .iter()
                    .map(|id| blocks(self.index.doc(*id).unwrap().word_count, seal.block_size))
                    .sum();
                (rlp, rlp * seal.block_size)
            }
            _ => self.index.volume(kw),
        }
    }

    fn index_add(&mut self, doc: Document, kind: DocKind) -> Result<bool> {
        if let Some(tc) = self.stack.tc {
            if doc.word_count > tc.threshold {
                self.counter_mut(self.phase).dropped_files += 1;
                return Ok(false);
            }
        }
        if self.index.contains(doc.doc_id) {
            return Err(Error::DuplicateDoc(doc.doc_id));
        }
        self.counter_mut(self.phase).real_files += 1;
        let slot = self.current_window();
        if let Some(sd) = self.shielddb.as_mut() {
            if doc.keywords.is_empty() {
                self.index
                    .add_doc(doc.doc_id, doc.word_count, doc.keywords, kind)?;
            } else {
                let stats = sd.cache_add(
                    &mut self.index,
                    doc.doc_id,
                    doc.word_count,
                    &doc.keywords,
                    kind == DocKind::Injected,
                    slot,
                    &mut self.rng,
                    self.size_range,
                );
                record_pad(self.counters.entry(self.phase).or_default(), stats);
            }
            return Ok(true);
        }
        self.index
            .add_doc(doc.doc_id, doc.word_count, doc.keywords, kind)?;
        Ok(true)
    }

    /// Apply one update event. Returns whether an add survived the cap.
    /// Dynamic re-padding happens at batch granularity, not here.
    pub fn update(&mut self, event: &UpdateEvent) -> Result<bool> {
        match event.op {
            UpdateOp::Add => {
                let kind = match event.source {
                    UpdateSource::Adversary => DocKind::Injected,
                    UpdateSource::Client => DocKind::Real,
                };
                self.index_add(event.document.clone(), kind)
            }
            UpdateOp::Delete => {
                let id = event.document.doc_id;
                if event.source == UpdateSource::Client
                    && !self.allow_delete_injected
                    && self.index.is_injected(id)
                {
                    return Err(Error::DeleteInjected(id));
                }
                if let Some(sd) = self.shielddb.as_mut() {
                    sd.retract(id);
                    if !self.index.contains(id) {
                        // The doc only ever existed in the cache.
                        self.counter_mut(self.phase).deletes += 1;
                        return Ok(true);
                    }
                }
                self.index.delete_doc(id)?;
                self.counter_mut(self.phase).deletes += 1;
                Ok(true)
            }
        }
    }

    /// Apply a batch of updates, then run batch-granular defense passes
    /// (the dynamic SEAL extension re-pads every keyword the batch touched).
    pub fn update_batch(&mut self, events: &[UpdateEvent]) -> Result<()> {
        let mut touched: BTreeSet<u32> = BTreeSet::new();
        for event in events {
            self.update(event)?;
            touched.extend(event.document.keywords.iter().copied());
        }
        self.finish_batch(&touched);
        Ok(())
    }

    fn finish_batch(&mut self, touched: &BTreeSet<u32>) {
        let dynamic = self
            .stack
            .seal
            .map(|s| s.dynamic_extension)
            .unwrap_or(false);
        if dynamic {
            if let Some(seal) = self.seal.as_mut() {
                let stats = seal.repad(&mut self.index, touched, &mut self.rng, self.size_range);
                record_pad(self.counters.entry(self.phase).or_default(), stats);
            }
        }
    }

    /// Submit an injection plan as one adversary batch. Plan keyword
    /// indices are remapped through `kw_map` (adversary index -> universe
    /// index), which is the identity when the adversary knows the whole
    /// universe.
    pub fn inject(&mut self, plan: &InjectionPlan, kw_map: &[u32]) -> Result<InjectionReceipt> {
        let mut doc_ids = Vec::with_capacity(plan.files.len());
        let mut events = Vec::with_capacity(plan.files.len());
        for file in &plan.files {
            let keywords: BTreeSet<u32> = file
                .keywords
                .iter()
                .map(|&k| {
                    kw_map.get(k as usize).copied().ok_or_else(|| {
                        Error::InvalidArgument(format!("plan keyword {k} outside known universe"))
                    })
                })
                .collect::<Result<_>>()?;
            let id = self.index.alloc_synthetic_id();
            doc_ids.push(id);
            events.push(UpdateEvent {
                op: UpdateOp::Add,
                document: Document {
                    doc_id: id,
                    word_count: file.size,
                    keywords,
                },
                source: UpdateSource::Adversary,
            });
        }
        let mut receipt = InjectionReceipt {
            doc_ids: Vec::with_capacity(events.len()),
            dropped: 0,
        };
        let mut touched: BTreeSet<u32> = BTreeSet::new();
        for (event, id) in events.iter().zip(doc_ids) {
            if self.update(event)? {
                receipt.doc_ids.push(Some(id));
                touched.extend(event.document.keywords.iter().copied());
            } else {
                receipt.doc_ids.push(None);
                receipt.dropped += 1;
            }
        }
        self.finish_batch(&touched);
        Ok(receipt)
    }

    /// Run a seeded session of client updates: adds draw files from the
    /// pool (without replacement), deletes pick uniformly among currently
    /// indexed client documents. Applied as one batch.
    pub fn run_client_updates(
        &mut self,
        n: u64,
        pool: &mut Vec<Document>,
        policy: UpdatePolicy,
        seed: u64,
    ) -> Result<UpdateRun> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut run = UpdateRun {
            events: Vec::new(),
            skipped: 0,
            added_words: 0,
        };
        let mut touched: BTreeSet<u32> = BTreeSet::new();
        for _ in 0..n {
            let op = match policy {
                UpdatePolicy::AddOnly => UpdateOp::Add,
                UpdatePolicy::DeleteOnly => UpdateOp::Delete,
                UpdatePolicy::UniformMix => {
                    if rng.gen_bool(0.5) {
                        UpdateOp::Add
                    } else {
                        UpdateOp::Delete
                    }
                }
            };
            match op {
                UpdateOp::Add => {
                    if pool.is_empty() {
                        run.skipped += 1;
                        continue;
                    }
                    let i = rng.gen_range(0..pool.len());
                    let doc = pool.swap_remove(i);
                    run.added_words += doc.word_count;
                    let event = UpdateEvent {
                        op: UpdateOp::Add,
                        document: doc,
                        source: UpdateSource::Client,
                    };
                    self.update(&event)?;
                    touched.extend(event.document.keywords.iter().copied());
                    run.events.push(event);
                }
                UpdateOp::Delete => {
                    let ids = self.index.client_doc_ids();
                    if ids.is_empty() {
                        run.skipped += 1;
                        continue;
                    }
                    let id = ids[rng.gen_range(0..ids.len())];
                    let doc = self.index.doc(id).expect("picked id exists");
                    let event = UpdateEvent {
                        op: UpdateOp::Delete,
                        document: Document {
                            doc_id: id,
                            word_count: doc.word_count,
                            keywords: doc.keywords.clone(),
                        },
                        source: UpdateSource::Client,
                    };
                    self.update(&event)?;
                    touched.extend(event.document.keywords.iter().copied());
                    run.events.push(event);
                }
            }
        }
        self.finish_batch(&touched);
        Ok(run)
    }
}

fn record_pad(counter: &mut PhaseCounter, stats: PadStats) {
    counter.dummy_files += stats.dummy_files;
    counter.dummy_words += stats.dummy_words;
}
