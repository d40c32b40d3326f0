//! Input parsing and normalization.
//!
//! Posts and comments arrive as JSON lines, embeddings as JSON lines or a
//! packed little-endian binary file, audio as 16-bit PCM WAV. Every parser
//! is streaming and keeps going past bad lines, collecting them in a
//! [`Ledger`] instead of failing the whole file.

mod audio;
mod embeddings;
mod posts;
mod text;

use serde::{Deserialize, Serialize};

pub use audio::{read_wav, read_wav_file, write_wav, Audio};
pub use embeddings::{
    parse_embeddings, read_packed_embeddings, write_embeddings_jsonl, write_packed_embeddings,
    EmbeddingKind, EmbeddingRecord, PACKED_MAGIC,
};
pub use posts::{
    parse_comments, parse_posts, write_comments_jsonl, write_posts_jsonl, CommentRecord,
    ParseOptions, PostRecord,
};
pub use text::{
    assign_time_bin, default_stopwords, extract_hashtag_sequence, hashtags_from_description,
    normalize_domain, normalize_domain_with, normalize_hashtag, normalize_transcript,
    DomainOptions, HASHTAG_SEPARATOR,
};

/// Why a line of input was rejected or flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    /// The line is not valid JSON or lacks required fields.
    Malformed,
    /// The record repeats an id seen on an earlier line; it was dropped.
    Duplicate,
    /// The record parsed but failed a data-model invariant; it was dropped.
    Invalid,
    /// A comment references a post that is not in the dataset; it was kept.
    Dangling,
}

/// One ledger line. `line` is 1-based (record index for binary inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub line: usize,
    pub kind: IssueKind,
    pub message: String,
}

/// Per-line issues collected while parsing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub issues: Vec<Issue>,
}

impl Ledger {
    pub fn push(&mut self, line: usize, kind: IssueKind, message: impl Into<String>) {
        self.issues.push(Issue {
            line,
            kind,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn lines(&self) -> Vec<usize> {
        self.issues.iter().map(|i| i.line).collect()
    }

    /// Number of issues that caused a record to be dropped.
    pub fn rejected(&self) -> usize {
        self.issues
            .iter()
            .filter(|i| i.kind != IssueKind::Dangling)
            .count()
    }
}

/// Records recovered from a stream together with the issues met on the way.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub ledger: Ledger,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            ledger: Ledger::default(),
        }
    }
}
