//! Behavioral trace extraction.
//!
//! Seven traces are bipartite: each post (or comment) links its author to
//! an entity such as a hashtag sequence, a time bin, a domain or another
//! user. The two embedding traces instead pair up users who published
//! near-identical content at the same moment, repeatedly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    assign_time_bin, default_stopwords, extract_hashtag_sequence, normalize_domain_with,
    normalize_transcript, CommentRecord, DomainOptions, EmbeddingKind, EmbeddingRecord, PostRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    #[serde(alias = "hashtag", alias = "hashtags")]
    HashtagSequence,
    #[serde(alias = "sync", alias = "synchronized")]
    SynchronizedPosting,
    #[serde(alias = "co_domain", alias = "domain")]
    CoDomainDescription,
    CoDomainComment,
    CoDuet,
    CoStitch,
    CoReply,
    #[serde(alias = "speech")]
    SpeechSimilarity,
    #[serde(alias = "video")]
    VideoSimilarity,
}

impl TraceKind {
    pub const ALL: [TraceKind; 9] = [
        TraceKind::HashtagSequence,
        TraceKind::SynchronizedPosting,
        TraceKind::CoDomainDescription,
        TraceKind::CoDomainComment,
        TraceKind::CoDuet,
        TraceKind::CoStitch,
        TraceKind::CoReply,
        TraceKind::SpeechSimilarity,
        TraceKind::VideoSimilarity,
    ];

    pub fn is_bipartite(self) -> bool {
        !matches!(self, TraceKind::SpeechSimilarity | TraceKind::VideoSimilarity)
    }

    pub fn embedding_kind(self) -> Option<EmbeddingKind> {
        match self {
            TraceKind::SpeechSimilarity => Some(EmbeddingKind::Speech),
            TraceKind::VideoSimilarity => Some(EmbeddingKind::Video),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::HashtagSequence => "hashtag_sequence",
            TraceKind::SynchronizedPosting => "synchronized_posting",
            TraceKind::CoDomainDescription => "co_domain_description",
            TraceKind::CoDomainComment => "co_domain_comment",
            TraceKind::CoDuet => "co_duet",
            TraceKind::CoStitch => "co_stitch",
            TraceKind::CoReply => "co_reply",
            TraceKind::SpeechSimilarity => "speech_similarity",
            TraceKind::VideoSimilarity => "video_similarity",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match norm.as_str() {
            "hashtag" | "hashtags" => "hashtag_sequence",
            "sync" | "synchronized" => "synchronized_posting",
            "co_domain" | "domain" => "co_domain_description",
            "speech" => "speech_similarity",
            "video" => "video_similarity",
            other => other,
        };
        TraceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == alias)
            .ok_or_else(|| Error::config(format!("unknown trace {s:?}")))
    }
}

/// A user's aggregated engagement with one entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EngagementPair {
    pub user_id: String,
    pub entity: String,
    pub count: u64,
}

/// One pair of matching posts backing a [`MatchPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Post by `user_a`.
    pub post_a: String,
    /// Post by `user_b`.
    pub post_b: String,
    pub similarity: f64,
    pub gap_seconds: i64,
}

/// Two users who repeatedly published matching content. `user_a < user_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub user_a: String,
    pub user_b: String,
    pub occurrences: usize,
    pub evidence: Vec<Evidence>,
}

/// Qualifying rule for an embedding-match trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRule {
    pub threshold: f64,
    /// `similarity > threshold` when set, `>=` otherwise.
    pub strict: bool,
    pub max_gap_seconds: i64,
    pub min_occurrences: usize,
}

impl MatchRule {
    /// Cosine 1 with zero time gap, at least twice. "Equal to 1" is read
    /// as within 1e-6 of 1.
    pub fn speech() -> Self {
        MatchRule {
            threshold: 1.0 - 1e-6,
            strict: false,
            max_gap_seconds: 0,
            min_occurrences: 2,
        }
    }

    /// Cosine above 0.9 with zero time gap, at least twice.
    pub fn video() -> Self {
        MatchRule {
            threshold: 0.9,
            strict: true,
            max_gap_seconds: 0,
            min_occurrences: 2,
        }
    }

    pub fn accepts(&self, similarity: f64) -> bool {
        if self.strict {
            similarity > self.threshold
        } else {
            similarity >= self.threshold
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() || self.max_gap_seconds < 0 || self.min_occurrences == 0 {
            return Err(Error::config(format!("invalid match rule {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    pub bin_width: i64,
    pub min_hashtags: usize,
    pub registrable_domains: bool,
    pub speech: MatchRule,
    pub video: MatchRule,
    pub min_transcript_tokens: usize,
    #[serde(skip)]
    pub stopwords: HashSet<String>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            bin_width: 300,
            min_hashtags: 2,
            registrable_domains: false,
            speech: MatchRule::speech(),
            video: MatchRule::video(),
            min_transcript_tokens: 4,
            stopwords: default_stopwords(),
        }
    }
}

impl TraceConfig {
    pub fn rule_for(&self, kind: TraceKind) -> Option<MatchRule> {
        match kind {
            TraceKind::SpeechSimilarity => Some(self.speech),
            TraceKind::VideoSimilarity => Some(self.video),
            _ => None,
        }
    }

    fn domain_options(&self) -> DomainOptions {
        DomainOptions {
            registrable_only: self.registrable_domains,
        }
    }
}

/// Entities a single post engages under a bipartite trace, deduplicated.
pub fn post_entities(post: &PostRecord, kind: TraceKind, config: &TraceConfig) -> Result<Vec<String>> {
    let entities = match kind {
        TraceKind::HashtagSequence => extract_hashtag_sequence(post, config.min_hashtags)
            .into_iter()
            .collect(),
        TraceKind::SynchronizedPosting => {
            vec![assign_time_bin(post.timestamp, config.bin_width)?.to_string()]
        }
        TraceKind::CoDomainDescription => domains(&post.urls, config.domain_options()),
        TraceKind::CoDuet => post.duet_target.iter().cloned().collect(),
        TraceKind::CoStitch => post.stitch_target.iter().cloned().collect(),
        TraceKind::CoReply => post.reply_target.iter().cloned().collect(),
        TraceKind::CoDomainComment => Vec::new(),
        TraceKind::SpeechSimilarity | TraceKind::VideoSimilarity => {
            return Err(Error::contract(format!("{kind} is not a bipartite trace")))
        }
    };
    Ok(entities)
}

fn domains(urls: &[String], opts: DomainOptions) -> Vec<String> {
    let mut out: Vec<String> = urls
        .iter()
        .filter_map(|u| normalize_domain_with(u, opts))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Aggregate (user, entity) engagements for a bipartite trace.
///
/// Output is sorted by user then entity, so it does not depend on the
/// order of the inputs or on how work was split across threads.
pub fn extract_bipartite_pairs(
    posts: &[PostRecord],
    comments: &[CommentRecord],
    kind: TraceKind,
    config: &TraceConfig,
) -> Result<Vec<EngagementPair>> {
    if !kind.is_bipartite() {
        return Err(Error::contract(format!("{kind} is not a bipartite trace")));
    }
    if config.bin_width <= 0 {
        return Err(Error::config(format!(
            "bin width must be positive, got {}",
            config.bin_width
        )));
    }
    let counts: HashMap<(String, String), u64> = if kind == TraceKind::CoDomainComment {
        let opts = config.domain_options();
        comments
            .par_iter()
            .fold(HashMap::new, |mut acc, c| {
                for d in domains(&c.urls, opts) {
                    *acc.entry((c.user_id.clone(), d)).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, merge_counts)
    } else {
        posts
            .par_iter()
            .try_fold(HashMap::new, |mut acc, p| {
                for e in post_entities(p, kind, config)? {
                    *acc.entry((p.user_id.clone(), e)).or_insert(0) += 1;
                }
                Ok::<_, Error>(acc)
            })
            .try_reduce(HashMap::new, |a, b| Ok(merge_counts(a, b)))?
    };
    let mut pairs: Vec<EngagementPair> = counts
        .into_iter()
        .map(|((user_id, entity), count)| EngagementPair {
            user_id,
            entity,
            count,
        })
        .collect();
    pairs.sort();
    Ok(pairs)
}

fn merge_counts(
    mut a: HashMap<(String, String), u64>,
    b: HashMap<(String, String), u64>,
) -> HashMap<(String, String), u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// A post eligible for embedding matching.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub post_id: &'a str,
    pub user_id: &'a str,
    pub timestamp: i64,
    pub vector: &'a [f32],
    pub norm: f64,
}

/// Proposes index pairs `(i, j)`, `i < j`, of candidates worth scoring.
///
/// The exact time-window generator is the reference. An approximate index
/// may return a subset; it must never invent pairs outside the gap rule,
/// because every proposal is re-checked against the full rule anyway.
pub trait CandidateGenerator: Sync {
    fn propose(&self, candidates: &[Candidate<'_>], max_gap_seconds: i64) -> Vec<(usize, usize)>;
}

/// Enumerates every pair of posts at most `max_gap_seconds` apart.
/// Candidates must be sorted by timestamp.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactTimeWindow;

impl CandidateGenerator for ExactTimeWindow {
    fn propose(&self, candidates: &[Candidate<'_>], max_gap_seconds: i64) -> Vec<(usize, usize)> {
        (0..candidates.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let t = candidates[i].timestamp;
                candidates[i + 1..]
                    .iter()
                    .take_while(move |c| c.timestamp - t <= max_gap_seconds)
                    .enumerate()
                    .map(move |(k, _)| (i, i + 1 + k))
            })
            .collect()
    }
}

/// Pairs of users with repeated co-timed, near-identical content.
pub fn extract_embedding_matches(
    posts: &[PostRecord],
    embeddings: &[EmbeddingRecord],
    kind: TraceKind,
    rule: MatchRule,
    config: &TraceConfig,
) -> Result<Vec<MatchPair>> {
    extract_embedding_matches_with(posts, embeddings, kind, rule, config, &ExactTimeWindow)
}

pub fn extract_embedding_matches_with(
    posts: &[PostRecord],
    embeddings: &[EmbeddingRecord],
    kind: TraceKind,
    rule: MatchRule,
    config: &TraceConfig,
    generator: &dyn CandidateGenerator,
) -> Result<Vec<MatchPair>> {
    let emb_kind = kind
        .embedding_kind()
        .ok_or_else(|| Error::contract(format!("{kind} is not an embedding trace")))?;
    rule.validate()?;

    let mut vectors: HashMap<&str, &[f32]> = HashMap::new();
    let mut dim = None;
    for rec in embeddings.iter().filter(|r| r.kind == emb_kind) {
        let d = *dim.get_or_insert(rec.vector.len());
        if rec.vector.len() != d {
            return Err(Error::data(format!(
                "post {:?}: {} embedding has dimension {}, expected {d}",
                rec.post_id,
                emb_kind.as_str(),
                rec.vector.len()
            )));
        }
        vectors.insert(rec.post_id.as_str(), rec.vector.as_slice());
    }

    let mut candidates = Vec::new();
    for post in posts {
        let Some(vector) = vectors.get(post.post_id.as_str()) else {
            continue;
        };
        if emb_kind == EmbeddingKind::Speech {
            if let Some(text) = &post.transcript {
                if normalize_transcript(text, &config.stopwords).len() < config.min_transcript_tokens
                {
                    continue;
                }
            }
        }
        let norm = vector.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::data(format!(
                "post {:?}: {} embedding is zero or not finite",
                post.post_id,
                emb_kind.as_str()
            )));
        }
        candidates.push(Candidate {
            post_id: &post.post_id,
            user_id: &post.user_id,
            timestamp: post.timestamp,
            vector,
            norm,
        });
    }
    candidates.sort_by(|a, b| (a.timestamp, a.post_id).cmp(&(b.timestamp, b.post_id)));

    let proposals = generator.propose(&candidates, rule.max_gap_seconds);
    let hits: Vec<(&str, &str, Evidence)> = proposals
        .into_par_iter()
        .filter_map(|(i, j)| {
            let (a, b) = (&candidates[i], &candidates[j]);
            if a.user_id == b.user_id {
                return None;
            }
            let gap = (a.timestamp - b.timestamp).abs();
            if gap > rule.max_gap_seconds {
                return None;
            }
            let sim = cosine_f32(a.vector, b.vector, a.norm, b.norm);
            if !rule.accepts(sim) {
                return None;
            }
            let (a, b) = if a.user_id < b.user_id { (a, b) } else { (b, a) };
            Some((
                a.user_id,
                b.user_id,
                Evidence {
                    post_a: a.post_id.to_string(),
                    post_b: b.post_id.to_string(),
                    similarity: sim,
                    gap_seconds: gap,
                },
            ))
        })
        .collect();

    let mut grouped: BTreeMap<(&str, &str), Vec<Evidence>> = BTreeMap::new();
    for (ua, ub, ev) in hits {
        grouped.entry((ua, ub)).or_default().push(ev);
    }
    Ok(grouped
        .into_iter()
        .filter(|(_, ev)| ev.len() >= rule.min_occurrences)
        .map(|((ua, ub), mut evidence)| {
            evidence.sort_by(|x, y| (&x.post_a, &x.post_b).cmp(&(&y.post_a, &y.post_b)));
            MatchPair {
                user_a: ua.to_string(),
                user_b: ub.to_string(),
                occurrences: evidence.len(),
                evidence,
            }
        })
        .collect())
}

pub(crate) fn cosine_f32(a: &[f32], b: &[f32], na: f64, nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Audit export: `user,entity,count`.
pub fn write_engagement_csv<W: Write>(writer: W, pairs: &[EngagementPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user", "entity", "count"])?;
    for p in pairs {
        w.write_record([p.user_id.as_str(), p.entity.as_str(), &p.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Audit export: `user_a,user_b,occurrences`.
pub fn write_match_csv<W: Write>(writer: W, pairs: &[MatchPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_a", "user_b", "occurrences"])?;
    for p in pairs {
        w.write_record([p.user_a.as_str(), p.user_b.as_str(), &p.occurrences.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
