//! Client database model: documents reduced to (size, keyword set), the
//! keyword universe the adversary targets, plaintext ingestion and synthetic
//! corpus generation.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type DocId = u64;

/// A document as the simulation sees it: an opaque id, its total word count
/// (the volume a search response reveals) and the set of universe keywords
/// it contains, as dense indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: DocId,
    pub word_count: u64,
    pub keywords: BTreeSet<u32>,
}

impl Document {
    pub fn new(doc_id: DocId, word_count: u64, keywords: BTreeSet<u32>) -> Result<Self> {
        if (keywords.len() as u64) > word_count {
            return Err(Error::InvalidArgument(format!(
                "document {doc_id}: {} keywords exceed word count {word_count}",
                keywords.len()
            )));
        }
        Ok(Document {
            doc_id,
            word_count,
            keywords,
        })
    }
}

/// Dense keyword universe: index i <-> words[i]. Attacks identify keywords
/// with their indices; the strings only matter at ingest boundaries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordUniverse {
    words: Vec<String>,
}

impl KeywordUniverse {
    pub fn new(words: Vec<String>) -> Self {
        KeywordUniverse { words }
    }

    pub fn len(&self) -> u32 {
        self.words.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: u32) -> &str {
        &self.words[index as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_map(&self) -> HashMap<&str, u32> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub universe: KeywordUniverse,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let corpus: Corpus = serde_json::from_str(s)?;
        let n = corpus.universe.len();
        for doc in &corpus.documents {
            if doc.keywords.iter().any(|&k| k >= n) {
                return Err(Error::InvalidArgument(format!(
                    "document {} references a keyword outside the {}-word universe",
                    doc.doc_id, n
                )));
            }
            if (doc.keywords.len() as u64) > doc.word_count {
                return Err(Error::InvalidArgument(format!(
                    "document {}: keyword count exceeds word count",
                    doc.doc_id
                )));
            }
        }
        Ok(corpus)
    }

    /// Stable fingerprint over universe and documents, for report pairing.
    pub fn fingerprint(&self) -> u64 {
        let mut buf = Vec::new();
        for w in &self.universe.words {
            buf.extend_from_slice(w.as_bytes());
            buf.push(0);
        }
        for d in &self.documents {
            buf.extend_from_slice(&d.doc_id.to_le_bytes());
            buf.extend_from_slice(&d.word_count.to_le_bytes());
            for &k in &d.keywords {
                buf.extend_from_slice(&k.to_le_bytes());
            }
            buf.push(1);
        }
        crate::fnv1a(&buf)
    }
}

/// A small English function-word list for plaintext ingestion.
pub fn default_stopwords() -> BTreeSet<String> {
    [
        "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
        "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have",
        "he", "her", "his", "if", "in", "into", "is", "it", "its", "may", "more", "my", "no",
        "not", "of", "on", "one", "or", "our", "out", "she", "so", "some", "such", "than",
        "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "was",
        "we", "were", "what", "when", "which", "who", "will", "with", "would", "you", "your",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// Lowercase, split on non-alphabetic characters, drop tokens shorter than
/// two characters and stopwords.
pub fn tokenize(text: &str, stopwords: &BTreeSet<String>) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.len() >= 2)
        .map(|t| t.to_lowercase())
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Ingest every regular file under `dir` (recursively, in sorted path order)
/// into a corpus whose universe is the `universe_size` most frequent
/// surviving tokens, ties broken lexicographically. Documents with an empty
/// token stream are dropped with a warning.
pub fn ingest_directory(
    dir: &Path,
    universe_size: usize,
    stopwords: &BTreeSet<String>,
) -> Result<Corpus> {
    if universe_size == 0 {
        return Err(Error::InvalidArgument(
            "universe size must be positive".into(),
        ));
    }
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| dir.display().to_string());
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            paths.push(entry.into_path());
        }
    }
    paths.sort();

    let mut token_lists = Vec::new();
    let mut freq: HashMap<String, u64> = HashMap::new();
    for path in &paths {
        let raw = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let text = String::from_utf8_lossy(&raw);
        let tokens = tokenize(&text, stopwords);
        if tokens.is_empty() {
            log::warn!("dropping {}: empty after tokenization", path.display());
            continue;
        }
        for t in &tokens {
            *freq.entry(t.clone()).or_insert(0) += 1;
        }
        token_lists.push(tokens);
    }
    if token_lists.is_empty() {
        return Err(Error::EmptyCorpus(dir.display().to_string()));
    }
    if freq.len() < universe_size {
        return Err(Error::UniverseTooSmall {
            requested: universe_size,
            available: freq.len(),
        });
    }

    let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(universe_size);
    let universe = KeywordUniverse::new(ranked.into_iter().map(|(w, _)| w).collect());
    let index = universe.index_map();

    let documents = token_lists
        .into_iter()
        .enumerate()
        .map(|(i, tokens)| {
            let keywords: BTreeSet<u32> = tokens
                .iter()
                .filter_map(|t| index.get(t.as_str()).copied())
                .collect();
            Document {
                doc_id: i as DocId,
                word_count: tokens.len() as u64,
                keywords,
            }
        })
        .collect();

    Ok(Corpus {
        universe,
        documents,
    })
}

/// Zipf weight table: weight of keyword i is 1/(i+1)^s. s = 0 is uniform.
pub(crate) fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(s)).collect()
}

/// Draw one index from the cumulative weight table by inverse transform.
pub(crate) fn sample_cumulative(rng: &mut ChaCha12Rng, cum: &[f64]) -> usize {
    let total = *cum.last().expect("non-empty weight table");
    let x = rng.gen_range(0.0..total);
    match cum.binary_search_by(|v| v.partial_cmp(&x).expect("finite weights")) {
        Ok(i) => i + 1,
        Err(i) => i,
    }
    .min(cum.len() - 1)
}

pub(crate) fn cumulate(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Generate a synthetic corpus of `n_docs` documents over `universe_size`
/// keywords whose document frequencies follow Zipf(`zipf_s`). Word counts
/// are uniform in [mean/2, 3*mean/2]; each document holds a set of distinct
/// keywords no larger than a third of its words. Deterministic per seed.
pub fn synth_corpus(
    n_docs: usize,
    universe_size: u32,
    zipf_s: f64,
    mean_doc_len: u64,
    seed: u64,
) -> Result<Corpus> {
    if n_docs == 0 || universe_size == 0 || mean_doc_len == 0 {
        return Err(Error::InvalidArgument(
            "synthetic corpus needs positive document count, universe size and mean length".into(),
        ));
    }
    if !(zipf_s.is_finite() && zipf_s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zipf exponent must be finite and non-negative, got {zipf_s}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let width = (universe_size.max(2) as f64).log10().ceil() as usize;
    let words = (0..universe_size)
        .map(|i| format!("kw{i:0width$}"))
        .collect();
    let cum = cumulate(&zipf_weights(universe_size as usize, zipf_s));

    let lo = (mean_doc_len / 2).max(1);
    let hi = mean_doc_len + mean_doc_len / 2;
    let mut documents = Vec::with_capacity(n_docs);
    for doc_id in 0..n_docs as DocId {
        let word_count = rng.gen_range(lo..=hi);
        let cap = (word_count / 3)
            .max(1)
            .min(universe_size as u64)
            .min(word_count);
        let k = rng.gen_range(1..=cap) as usize;
        let mut keywords = BTreeSet::new();
        let mut attempts = 0usize;
        while keywords.len() < k && attempts < 64 * k {
            keywords.insert(sample_cumulative(&mut rng, &cum) as u32);
            attempts += 1;
        }
        documents.push(Document {
            doc_id,
            word_count,
            keywords,
        });
    }
    Ok(Corpus {
        universe: KeywordUniverse::new(words),
        documents,
    })
}

/// Adversary keyword knowledge: sample ceil(fraction * #W) universe keywords
/// uniformly without replacement and re-index them densely, preserving the
/// original relative order. Deterministic per seed.
pub fn leak_keywords(
    universe: &KeywordUniverse,
    fraction: f64,
    seed: u64,
) -> Result<KeywordUniverse> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "leak fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let n = universe.len() as usize;
    let take = (fraction * n as f64).ceil() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first `take` slots are the sample.
    for i in 0..take.min(n.saturating_sub(1)) {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut chosen: Vec<usize> = indices.into_iter().take(take).collect();
    chosen.sort_unstable();
    Ok(KeywordUniverse::new(
        chosen
            .into_iter()
            .map(|i| universe.words[i].clone())
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_stopwords() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn tokenizer_drops_short_tokens_and_stopwords() {
        let stop: BTreeSet<String> = ["the".to_string()].into_iter().collect();
        assert_eq!(tokenize("a a a", &stop), Vec::<String>::new());
        assert_eq!(
            tokenize("The cat, the CAT; x!", &stop),
            vec!["cat".to_string(), "cat".to_string()]
        );
        assert_eq!(tokenize("don't stop", &stop), vec!["don", "stop"]);
    }

    #[test]
    fn ingest_two_files_frequency_and_tiebreak() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d0.txt"), "alpha beta").unwrap();
        std::fs::write(dir.path().join("d1.txt"), "alpha gamma").unwrap();
        let corpus = ingest_directory(dir.path(), 2, &no_stopwords()).unwrap();
        // alpha has frequency 2; beta and gamma tie at 1, lexicographic picks beta.
        assert_eq!(corpus.universe.words(), &["alpha", "beta"]);
        assert_eq!(corpus.documents.len(), 2);
        assert_eq!(corpus.documents[0].word_count, 2);
        assert_eq!(
            corpus.documents[0].keywords,
            [0u32, 1].into_iter().collect()
        );
        assert_eq!(corpus.documents[1].keywords, [0u32].into_iter().collect());
    }

    #[test]
    fn ingest_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.txt"), "red green blue red").unwrap();
        std::fs::write(dir.path().join("y.txt"), "green blue blue").unwrap();
        let a = ingest_directory(dir.path(), 3, &no_stopwords()).unwrap();
        let b = ingest_directory(dir.path(), 3, &no_stopwords()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ingest_rejects_oversized_universe_and_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.txt"), "solo word").unwrap();
        match ingest_directory(dir.path(), 10, &no_stopwords()) {
            Err(Error::UniverseTooSmall {
                requested: 10,
                available: 2,
            }) => {}
            other => panic!("expected UniverseTooSmall, got {other:?}"),
        }
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_directory(empty.path(), 1, &no_stopwords()),
            Err(Error::EmptyCorpus(_))
        ));
    }

    #[test]
    fn ingest_drops_empty_documents() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "a 1 2 3").unwrap();
        std::fs::write(dir.path().join("b.txt"), "hello world").unwrap();
        let corpus = ingest_directory(dir.path(), 2, &no_stopwords()).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.documents[0].doc_id, 0);
    }

    #[test]
    fn synth_is_deterministic_and_well_formed() {
        let a = synth_corpus(200, 32, 1.0, 60, 7).unwrap();
        let b = synth_corpus(200, 32, 1.0, 60, 7).unwrap();
        assert_eq!(a, b);
        for d in &a.documents {
            assert!(d.word_count >= 30 && d.word_count <= 90);
            assert!(d.keywords.len() as u64 <= d.word_count);
            assert!(d.keywords.iter().all(|&k| k < 32));
            assert!(!d.keywords.is_empty());
        }
        let c = synth_corpus(200, 32, 1.0, 60, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_zipf_skews_document_frequency() {
        let corpus = synth_corpus(2000, 16, 1.2, 40, 3).unwrap();
        let mut df = [0u64; 16];
        for d in &corpus.documents {
            for &k in &d.keywords {
                df[k as usize] += 1;
            }
        }
        assert!(df[0] > 3 * df[15], "df head {} tail {}", df[0], df[15]);
    }

    // Frozen oracle: chi-square critical value at p = 0.01 for 63 degrees of
    // freedom is 92.010 (keyword draws with s = 0 must look uniform).
    #[test]
    fn synth_uniform_draws_pass_chi_square() {
        const CHI2_CRIT_DF63_P01: f64 = 92.010;
        let n = 64usize;
        let draws = 10_000usize;
        let cum = cumulate(&zipf_weights(n, 0.0));
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let mut counts = vec![0u64; n];
        for _ in 0..draws {
            counts[sample_cumulative(&mut rng, &cum)] += 1;
        }
        let expect = draws as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        assert!(chi2 < CHI2_CRIT_DF63_P01, "chi2 = {chi2}");
    }

    #[test]
    fn leak_fraction_bounds_and_determinism() {
        let corpus = synth_corpus(50, 64, 1.0, 40, 1).unwrap();
        let full = leak_keywords(&corpus.universe, 1.0, 5).unwrap();
        assert_eq!(full, corpus.universe);

        let quarter = leak_keywords(&corpus.universe, 0.25, 5).unwrap();
        assert_eq!(quarter.len(), 16);
        let set: BTreeSet<&str> = corpus.universe.words().iter().map(|s| s.as_str()).collect();
        assert!(quarter.words().iter().all(|w| set.contains(w.as_str())));
        assert_eq!(quarter, leak_keywords(&corpus.universe, 0.25, 5).unwrap());
        assert_ne!(quarter, leak_keywords(&corpus.universe, 0.25, 6).unwrap());

        let tiny = KeywordUniverse::new(vec!["x".into(), "y".into(), "z".into()]);
        assert_eq!(leak_keywords(&tiny, 0.1, 0).unwrap().len(), 1);
        assert!(leak_keywords(&tiny, 1.5, 0).is_err());
    }

    #[test]
    fn corpus_json_round_trip() {
        let corpus = synth_corpus(20, 8, 0.5, 30, 2).unwrap();
        let json = corpus.to_json().unwrap();
        assert_eq!(Corpus::from_json(&json).unwrap(), corpus);
        assert!(json.contains("\"universe\""));
        assert!(json.contains("\"word_count\""));
    }

    #[test]
    fn corpus_json_rejects_out_of_universe_keywords() {
        let bad = r#"{"universe":["aa","bb"],"documents":[{"id":0,"word_count":3,"keywords":[5]}]}"#;
        assert!(Corpus::from_json(bad).is_err());
    }
}
