//! Synthetic corpora with planted campaigns, detection scoring and the
//! data-loss robustness protocol.

mod generate;
pub mod voice;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, EmbeddingRecord, PostRecord};
use crate::traces::TraceKind;

pub use generate::{generate, generate_dataset};

/// 2024-08-01T00:00:00Z.
pub const AUGUST_2024: i64 = 1_722_470_400;

/// How the members of a campaign space their posts within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// One after another, `cadence_seconds` apart, in a shuffled order.
    #[default]
    Staggered,
    /// Everyone in the same second.
    Simultaneous,
    /// Everyone somewhere inside the same synchronized-posting bin.
    SameBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsernameTemplate {
    /// Shared prefix; ignored when `autogen` is set.
    #[serde(default)]
    pub prefix: String,
    /// Platform-default names: "user" followed by 13 digits.
    #[serde(default)]
    pub autogen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTemplate {
    /// Per-campaign base vector. Drawn from the campaign seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f32>>,
    /// Standard deviation of per-component Gaussian noise added per post
    /// (video only; speech copies are exact).
    #[serde(default)]
    pub sigma: f64,
}

impl Default for EmbeddingTemplate {
    fn default() -> Self {
        EmbeddingTemplate { base: None, sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub name: String,
    pub size: usize,
    pub traces: Vec<TraceKind>,
    /// Daily UTC hours `[start, end)` the campaign is active in.
    #[serde(default = "default_window")]
    pub posting_window: (u32, u32),
    #[serde(default = "default_cadence")]
    pub cadence_seconds: u32,
    #[serde(default)]
    pub timing: Timing,
    /// Number of posting sessions spread over the scenario period.
    #[serde(default = "default_sessions")]
    pub sessions: usize,
    /// Fraction of members taking part in each session.
    #[serde(default = "default_participation")]
    pub participation: f64,
    #[serde(default)]
    pub hashtag_pool: Vec<String>,
    #[serde(default = "default_sequence_length")]
    pub sequence_length: usize,
    /// Distinct hashtag sequences, used in rotation by session.
    #[serde(default = "default_one")]
    pub sequences: usize,
    #[serde(default)]
    pub domain_pool: Vec<String>,
    /// Accounts targeted by duets, stitches and replies.
    #[serde(default)]
    pub target_pool: Vec<String>,
    #[serde(default)]
    pub embedding: EmbeddingTemplate,
    pub username: UsernameTemplate,
    /// Probability that a video post reuses the base vector without noise.
    #[serde(default)]
    pub duplication_rate: f64,
}

fn default_window() -> (u32, u32) {
    (0, 24)
}
fn default_cadence() -> u32 {
    120
}
fn default_sessions() -> usize {
    10
}
fn default_participation() -> f64 {
    1.0
}
fn default_sequence_length() -> usize {
    4
}
fn default_one() -> usize {
    1
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(format!("campaign {:?}: {msg}", self.name)));
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return bad("name must be non-empty [A-Za-z0-9_-]".into());
        }
        if self.size < 2 {
            return bad(format!("size must be at least 2, got {}", self.size));
        }
        if self.cadence_seconds == 0 {
            return bad("cadence must be positive".into());
        }
        let (a, b) = self.posting_window;
        if a >= b || b > 24 {
            return bad(format!("posting window ({a}, {b}) is not a valid hour range"));
        }
        if !(self.embedding.sigma >= 0.0 && self.embedding.sigma.is_finite()) {
            return bad(format!("noise sigma must be >= 0, got {}", self.embedding.sigma));
        }
        if !(0.0..=1.0).contains(&self.duplication_rate) {
            return bad(format!("duplication rate {} outside [0, 1]", self.duplication_rate));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return bad(format!("participation {} outside (0, 1]", self.participation));
        }
        if self.sessions == 0 || self.sequences == 0 {
            return bad("sessions and sequences must be positive".into());
        }
        if self.traces.is_empty() {
            return bad("no traces".into());
        }
        for t in &self.traces {
            match t {
                TraceKind::HashtagSequence => {
                    if self.sequence_length < 2 || self.hashtag_pool.len() < self.sequence_length {
                        return bad("hashtag pool smaller than the sequence length (min 2)".into());
                    }
                }
                TraceKind::CoDomainDescription | TraceKind::CoDomainComment => {
                    if self.domain_pool.is_empty() {
                        return bad("empty domain pool".into());
                    }
                }
                TraceKind::CoDuet | TraceKind::CoStitch | TraceKind::CoReply => {
                    if self.target_pool.is_empty() {
                        return bad("empty target pool".into());
                    }
                }
                _ => {}
            }
        }
        if let Some(base) = &self.embedding.base {
            if base.is_empty() || base.iter().any(|v| !v.is_finite()) || base.iter().all(|&v| v == 0.0) {
                return bad("embedding base must be a finite nonzero vector".into());
            }
        }
        if !self.username.autogen && self.username.prefix.is_empty() {
            return bad("username template needs a prefix or autogen".into());
        }
        Ok(())
    }

    /// User id of member `k`.
    pub fn member_id(&self, k: usize) -> String {
        format!("{}-{k:03}", self.name)
    }
}

/// Background population parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrganicConfig {
    pub users: usize,
    pub start: i64,
    pub days: u32,
    pub min_posts: usize,
    pub max_posts: usize,
    /// Log-normal parameters of the extra posts beyond `min_posts`.
    pub posts_mu: f64,
    pub posts_sigma: f64,
    /// Users who never write hashtag sequences.
    pub hashtag_free_fraction: f64,
    pub hashtag_rate: f64,
    pub hashtag_vocab: usize,
    pub hashtag_zipf: f64,
    pub linker_fraction: f64,
    pub popular_domains: usize,
    pub tail_domains: usize,
    pub commenter_fraction: f64,
    pub duet_fraction: f64,
    pub stitch_fraction: f64,
    pub reply_fraction: f64,
    pub creators: usize,
    pub creator_zipf: f64,
    /// Share of users in small friend circles with niche shared interests.
    pub circle_fraction: f64,
    /// Probability a circle member's hashtag or link post uses the circle's.
    pub circle_share: f64,
    /// Linker probability inside circles; `linker_fraction` applies elsewhere.
    pub circle_linker_fraction: f64,
    pub speech_fraction: f64,
    pub short_transcript_fraction: f64,
    pub embedding_dim: usize,
    pub autogen_fraction: f64,
}

impl Default for OrganicConfig {
    fn default() -> Self {
        OrganicConfig {
            users: 3400,
            start: AUGUST_2024,
            days: 31,
            min_posts: 3,
            max_posts: 200,
            posts_mu: 1.6,
            posts_sigma: 0.9,
            hashtag_free_fraction: 0.1,
            hashtag_rate: 0.8,
            hashtag_vocab: 5000,
            hashtag_zipf: 1.0,
            linker_fraction: 0.1,
            popular_domains: 40,
            tail_domains: 20000,
            commenter_fraction: 0.15,
            duet_fraction: 0.08,
            stitch_fraction: 0.06,
            reply_fraction: 0.06,
            creators: 100_000,
            creator_zipf: 0.4,
            circle_fraction: 0.3,
            circle_share: 0.4,
            circle_linker_fraction: 0.45,
            speech_fraction: 0.7,
            short_transcript_fraction: 0.05,
            embedding_dim: 32,
            autogen_fraction: 0.1,
        }
    }
}

impl OrganicConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = [
            ("hashtag_free_fraction", self.hashtag_free_fraction),
            ("hashtag_rate", self.hashtag_rate),
            ("linker_fraction", self.linker_fraction),
            ("commenter_fraction", self.commenter_fraction),
            ("duet_fraction", self.duet_fraction),
            ("stitch_fraction", self.stitch_fraction),
            ("reply_fraction", self.reply_fraction),
            ("speech_fraction", self.speech_fraction),
            ("circle_fraction", self.circle_fraction),
            ("circle_share", self.circle_share),
            ("circle_linker_fraction", self.circle_linker_fraction),
            ("short_transcript_fraction", self.short_transcript_fraction),
            ("autogen_fraction", self.autogen_fraction),
        ];
        for (name, v) in frac {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("organic {name} = {v} outside [0, 1]")));
            }
        }
        if self.days == 0 {
            return Err(Error::config("organic period must span at least one day"));
        }
        if self.min_posts == 0 || self.max_posts < self.min_posts {
            return Err(Error::config("need 1 <= min_posts <= max_posts"));
        }
        if !(self.posts_sigma >= 0.0 && self.posts_mu.is_finite()) {
            return Err(Error::config("bad log-normal post-count parameters"));
        }
        if self.hashtag_vocab < 10 || self.popular_domains == 0 || self.tail_domains == 0 || self.creators == 0 {
            return Err(Error::config("vocabulary and pool sizes must be positive"));
        }
        if !(self.hashtag_zipf > 0.0 && self.creator_zipf > 0.0) {
            return Err(Error::config("Zipf exponents must be positive"));
        }
        if self.embedding_dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(())
    }
}

/// A complete scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub organic: OrganicConfig,
    #[serde(default)]
    pub campaigns: Vec<CampaignSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.organic.validate()?;
        for c in &self.campaigns {
            c.validate()?;
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Result<Scenario> {
        match name {
            "paper-august" => Ok(paper_august()),
            "organic-only" => Ok(organic_only(10_000)),
            _ => Err(Error::config(format!(
                "unknown preset {name:?} (expected paper-august or organic-only)"
            ))),
        }
    }
}

fn campaign(name: &str, size: usize, trace: TraceKind, username: UsernameTemplate) -> CampaignSpec {
    CampaignSpec {
        name: name.into(),
        size,
        traces: vec![trace],
        posting_window: default_window(),
        cadence_seconds: default_cadence(),
        timing: Timing::Staggered,
        sessions: default_sessions(),
        participation: 1.0,
        hashtag_pool: Vec::new(),
        sequence_length: default_sequence_length(),
        sequences: 1,
        domain_pool: Vec::new(),
        target_pool: Vec::new(),
        embedding: EmbeddingTemplate::default(),
        username,
        duplication_rate: 0.0,
    }
}

fn prefixed(prefix: &str) -> UsernameTemplate {
    UsernameTemplate { prefix: prefix.into(), autogen: false }
}

fn autogen() -> UsernameTemplate {
    UsernameTemplate { prefix: String::new(), autogen: true }
}

/// One month of background activity with the five planted operations.
pub fn paper_august() -> Scenario {
    let mut hashtag = campaign("tagwave", 68, TraceKind::HashtagSequence, prefixed("votewave"));
    hashtag.posting_window = (18, 20);
    hashtag.cadence_seconds = 120;
    hashtag.sessions = 9;
    hashtag.hashtag_pool = ["election2024", "vote", "truthmatters", "wakeup", "standtogether", "news"]
        .map(String::from)
        .to_vec();
    hashtag.sequence_length = 4;

    let mut domain = campaign("linkring", 16, TraceKind::CoDomainDescription, prefixed("dailyfacts"));
    domain.cadence_seconds = 900;
    domain.sessions = 8;
    domain.posting_window = (12, 22);
    domain.domain_pool = vec!["civicpulse-report.com".into()];

    let mut speech = campaign("echovoice", 42, TraceKind::SpeechSimilarity, autogen());
    speech.timing = Timing::Simultaneous;
    speech.sessions = 20;
    speech.participation = 0.6;

    let mut video = campaign("reframe", 67, TraceKind::VideoSimilarity, autogen());
    video.timing = Timing::Simultaneous;
    video.sessions = 20;
    video.participation = 0.6;
    video.embedding.sigma = 0.03;
    video.duplication_rate = 0.3;

    let mut campaigns = vec![hashtag, domain, speech, video];
    for g in 0..4 {
        let mut sync = campaign(
            &format!("syncgroup{g}"),
            20,
            TraceKind::SynchronizedPosting,
            prefixed(["morningbrief", "factcheck", "realtalk", "citizen"][g]),
        );
        sync.timing = Timing::SameBin;
        sync.sessions = 12;
        campaigns.push(sync);
    }
    Scenario { name: "paper-august".into(), organic: OrganicConfig::default(), campaigns }
}

/// Background activity only.
pub fn organic_only(users: usize) -> Scenario {
    Scenario {
        name: "organic-only".into(),
        organic: OrganicConfig { users, ..OrganicConfig::default() },
        campaigns: Vec::new(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub campaigns: BTreeMap<String, BTreeSet<String>>,
    pub organic: BTreeSet<String>,
}

impl GroundTruth {
    pub fn coordinated(&self) -> BTreeSet<String> {
        self.campaigns.values().flatten().cloned().collect()
    }

    pub fn campaign_of(&self, user: &str) -> Option<&str> {
        self.campaigns.iter().find(|(_, m)| m.contains(user)).map(|(n, _)| n.as_str())
    }
}

/// A generated corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub posts: Vec<PostRecord>,
    pub comments: Vec<CommentRecord>,
    pub embeddings: Vec<EmbeddingRecord>,
    pub truth: GroundTruth,
}

impl Dataset {
    /// Drop posts and everything attached to them.
    pub fn degrade(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        let posts = drop_posts(&self.posts, fraction, seed)?;
        let kept: std::collections::HashSet<&str> = posts.iter().map(|p| p.post_id.as_str()).collect();
        let comments = self.comments.iter().filter(|c| kept.contains(c.post_id.as_str())).cloned().collect();
        let embeddings =
            self.embeddings.iter().filter(|e| kept.contains(e.post_id.as_str())).cloned().collect();
        Ok(Dataset { posts, comments, embeddings, truth: self.truth.clone() })
    }
}

/// Keep a uniformly random subset of exactly `round((1 - fraction) n)`
/// posts, in their original order.
pub fn drop_posts(posts: &[PostRecord], fraction: f64, seed: u64) -> Result<Vec<PostRecord>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::config(format!("drop fraction must be in [0, 1), got {fraction}")));
    }
    let n = posts.len();
    let keep = ((1.0 - fraction) * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, keep.min(n)).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| posts[i].clone()).collect())
}

pub fn retention(full: &BTreeSet<String>, degraded: &BTreeSet<String>) -> Result<f64> {
    if full.is_empty() {
        return Err(Error::data("retention is undefined for an empty detection set"));
    }
    Ok(full.intersection(degraded).count() as f64 / full.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_campaign_recall: BTreeMap<String, f64>,
    pub detected: usize,
    pub true_positives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention: Option<f64>,
}

/// Account-level scoring. An empty detection set has precision 0.
pub fn evaluate(detected: &BTreeSet<String>, truth: &GroundTruth) -> EvalResult {
    let coordinated = truth.coordinated();
    let tp = detected.intersection(&coordinated).count();
    let precision = if detected.is_empty() { 0.0 } else { tp as f64 / detected.len() as f64 };
    let recall = if coordinated.is_empty() { 0.0 } else { tp as f64 / coordinated.len() as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let per_campaign_recall = truth
        .campaigns
        .iter()
        .map(|(name, members)| {
            let hit = members.intersection(detected).count();
            (name.clone(), hit as f64 / members.len().max(1) as f64)
        })
        .collect();
    EvalResult {
        precision,
        recall,
        f1,
        per_campaign_recall,
        detected: detected.len(),
        true_positives: tp,
        retention: None,
    }
}
