// vialab: a desk-scale laboratory for volumetric injection attacks against
// dynamic searchable encryption.
//
// The crate simulates an SSE deployment at the leakage level (no real
// cryptography): a client database of keyword/size-indexed documents, a
// query oracle that exposes the access, volume and search patterns an
// honest-but-curious server would see, pluggable padding defenses, and the
// injection attacks plus the harness that measures recovery rate and
// injection cost under configurable query distributions and update noise.

pub mod attack;
pub mod corpus;
pub mod defense;
pub mod harness;
pub mod sse;
pub mod trends;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("no ingestable documents found under {0}")]
    EmptyCorpus(String),

    #[error("universe size {requested} exceeds the {available} distinct words available")]
    UniverseTooSmall { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed trend data at {path}: {detail}")]
    TrendParse { path: String, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("document {0} already present in the index")]
    DuplicateDoc(u64),

    #[error("document {0} not present in the index")]
    UnknownDoc(u64),

    #[error("client updates may not delete injected document {0}")]
    DeleteInjected(u64),

    #[error("attack {attack} is blocked by defense {defense}: {detail}")]
    DefenseBlocked {
        attack: String,
        defense: String,
        detail: String,
    },

    #[error("oracle does not support query replay")]
    ReplayUnsupported,

    #[error("reports compare different experiments: {0}")]
    ReportMismatch(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Stable 64-bit FNV-1a, used to fingerprint corpora inside reports so the
/// overhead comparison can refuse to diff unrelated runs. Not for security.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive an independent RNG seed from a base seed and a purpose tag, so the
/// corpus, query streams, updates and defenses draw from disjoint streams.
pub(crate) fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut z = base ^ fnv1a(tag.as_bytes());
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
