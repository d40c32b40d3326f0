//! End-to-end detection: trace extraction, network construction, pruning
//! and cluster extraction per (window, trace).

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, EmbeddingRecord, PostRecord};
use crate::prune::{connected_components, prune, Cluster, PruneConfig};
use crate::simnet::{build_match_network, similarity_network, SimilarityNetwork, TfidfOptions};
use crate::synthbench::{retention, Dataset};
use crate::traces::{extract_bipartite_pairs, extract_embedding_matches, TraceConfig, TraceKind};

/// A half-open time range `[start, end)` in Unix seconds. Unbounded ends
/// are `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub label: String,
    #[serde(default)]
    pub start: Option<i64>,
    #[serde(default)]
    pub end: Option<i64>,
}

impl Window {
    pub fn all() -> Window {
        Window { label: "all".into(), start: None, end: None }
    }

    /// Calendar month in UTC.
    pub fn month(year: i32, month: u32) -> Result<Window> {
        let first = NaiveDate::from_ymd_opt(year, month, 1)
            .ok_or_else(|| Error::config(format!("no such month {year}-{month:02}")))?;
        let next = if month == 12 {
            NaiveDate::from_ymd_opt(year + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(year, month + 1, 1)
        }
        .expect("valid date");
        let ts = |d: NaiveDate| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
        Ok(Window {
            label: format!("{:04}-{:02}", first.year(), first.month()),
            start: Some(ts(first)),
            end: Some(ts(next)),
        })
    }

    /// `all` or `YYYY-MM`.
    pub fn parse(label: &str) -> Result<Window> {
        if label == "all" {
            return Ok(Window::all());
        }
        let bad = || Error::config(format!("window {label:?} is neither \"all\" nor YYYY-MM"));
        let (y, m) = label.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        Window::month(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start.is_none_or(|s| t >= s) && self.end.is_none_or(|e| t < e)
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s >= e {
                return Err(Error::config(format!("window {:?} is empty", self.label)));
            }
        }
        Ok(())
    }

    fn overlaps(&self, other: &Window) -> bool {
        let lo = self.start.unwrap_or(i64::MIN).max(other.start.unwrap_or(i64::MIN));
        let hi = self.end.unwrap_or(i64::MAX).min(other.end.unwrap_or(i64::MAX));
        lo < hi
    }
}

/// Reject overlapping windows unless `allow_overlap`, and duplicate labels always.
pub fn check_windows(windows: &[Window], allow_overlap: bool) -> Result<()> {
    for (i, a) in windows.iter().enumerate() {
        a.validate()?;
        for b in &windows[i + 1..] {
            if a.label == b.label {
                return Err(Error::config(format!("duplicate window label {:?}", a.label)));
            }
            if !allow_overlap && a.overlaps(b) {
                return Err(Error::config(format!("windows {:?} and {:?} overlap", a.label, b.label)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub trace: TraceConfig,
    pub tfidf: TfidfOptions,
    /// Per-trace overrides of [`PruneConfig::for_trace`].
    pub prune: BTreeMap<TraceKind, PruneConfig>,
}

impl DetectConfig {
    pub fn prune_for(&self, kind: TraceKind) -> PruneConfig {
        self.prune.get(&kind).copied().unwrap_or_else(|| PruneConfig::for_trace(kind))
    }

    pub fn validate(&self) -> Result<()> {
        for cfg in self.prune.values() {
            cfg.validate()?;
        }
        if self.trace.bin_width <= 0 {
            return Err(Error::config("bin width must be positive"));
        }
        Ok(())
    }
}

/// Borrowed view of the three input streams.
#[derive(Debug, Clone, Copy)]
pub struct Corpus<'a> {
    pub posts: &'a [PostRecord],
    pub comments: &'a [CommentRecord],
    pub embeddings: &'a [EmbeddingRecord],
}

impl<'a> From<&'a Dataset> for Corpus<'a> {
    fn from(d: &'a Dataset) -> Self {
        Corpus { posts: &d.posts, comments: &d.comments, embeddings: &d.embeddings }
    }
}

/// Posts and comments timestamped inside `window`.
pub fn restrict(corpus: Corpus<'_>, window: &Window) -> (Vec<PostRecord>, Vec<CommentRecord>) {
    let posts = corpus.posts.iter().filter(|p| window.contains(p.timestamp)).cloned().collect();
    let comments = corpus.comments.iter().filter(|c| window.contains(c.timestamp)).cloned().collect();
    (posts, comments)
}

pub fn build_network(kind: TraceKind, corpus: Corpus<'_>, cfg: &DetectConfig) -> Result<SimilarityNetwork> {
    match cfg.trace.rule_for(kind) {
        Some(rule) => {
            let pairs = extract_embedding_matches(corpus.posts, corpus.embeddings, kind, rule, &cfg.trace)?;
            build_match_network(&pairs, kind)
        }
        None => {
            let pairs = extract_bipartite_pairs(corpus.posts, corpus.comments, kind, &cfg.trace)?;
            similarity_network(&pairs, kind, cfg.tfidf)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub network_ms: f64,
    pub prune_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TraceRun {
    pub kind: TraceKind,
    pub window: String,
    pub network: SimilarityNetwork,
    pub pruned: SimilarityNetwork,
    pub clusters: Vec<Cluster>,
    pub timings: StageTimings,
}

impl TraceRun {
    pub fn accounts(&self) -> BTreeSet<String> {
        detected_accounts(&self.clusters)
    }
}

pub fn detected_accounts(clusters: &[Cluster]) -> BTreeSet<String> {
    clusters.iter().flat_map(|c| c.members.iter().cloned()).collect()
}

/// Run one trace over a corpus that is already restricted to `window`.
pub fn detect_trace(kind: TraceKind, window: &str, corpus: Corpus<'_>, cfg: &DetectConfig) -> Result<TraceRun> {
    let t0 = Instant::now();
    let network = build_network(kind, corpus, cfg)?;
    let t1 = Instant::now();
    let pruned = prune(&network, &cfg.prune_for(kind))?;
    let clusters = connected_components(&pruned, window);
    let t2 = Instant::now();
    Ok(TraceRun {
        kind,
        window: window.to_string(),
        network,
        pruned,
        clusters,
        timings: StageTimings {
            network_ms: (t1 - t0).as_secs_f64() * 1e3,
            prune_ms: (t2 - t1).as_secs_f64() * 1e3,
        },
    })
}

/// Every (window, trace) pair, in window-major then trace order. A failing
/// trace does not stop the others.
pub fn detect_all(
    traces: &[TraceKind],
    windows: &[Window],
    corpus: Corpus<'_>,
    cfg: &DetectConfig,
) -> Vec<(String, TraceKind, Result<TraceRun>)> {
    let mut out = Vec::new();
    for w in windows {
        let (posts, comments) = restrict(corpus, w);
        let sub = Corpus { posts: &posts, comments: &comments, embeddings: corpus.embeddings };
        let runs: Vec<Result<TraceRun>> =
            traces.par_iter().map(|&k| detect_trace(k, &w.label, sub, cfg)).collect();
        out.extend(traces.iter().zip(runs).map(|(&k, r)| (w.label.clone(), k, r)));
    }
    out
}

/// Mean retention per trace and loss fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub trace: TraceKind,
    pub detected: usize,
    /// `None` where the full run detected nothing.
    pub retention: Vec<Option<f64>>,
}

/// Drop `fraction` of posts under each seed, rerun detection, and average
/// the retention of accounts detected on the full data.
pub fn robustness(
    data: &Dataset,
    traces: &[TraceKind],
    fractions: &[f64],
    seeds: &[u64],
    cfg: &DetectConfig,
) -> Result<Vec<RobustnessRow>> {
    for &f in fractions {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::config(format!("loss fraction must be in [0, 1), got {f}")));
        }
    }
    if seeds.is_empty() {
        return Err(Error::config("robustness needs at least one seed"));
    }
    let full: Vec<BTreeSet<String>> = traces
        .par_iter()
        .map(|&k| detect_trace(k, "all", data.into(), cfg).map(|r| r.accounts()))
        .collect::<Result<_>>()?;

    let mut sums = vec![vec![0.0f64; fractions.len()]; traces.len()];
    for (fi, &f) in fractions.iter().enumerate() {
        for &seed in seeds {
            let degraded = data.degrade(f, seed)?;
            let found: Vec<BTreeSet<String>> = traces
                .par_iter()
                .map(|&k| detect_trace(k, "all", (&degraded).into(), cfg).map(|r| r.accounts()))
                .collect::<Result<_>>()?;
            for (ti, acc) in found.iter().enumerate() {
                if !full[ti].is_empty() {
                    sums[ti][fi] += retention(&full[ti], acc)?;
                }
            }
        }
    }
    Ok(traces
        .iter()
        .enumerate()
        .map(|(ti, &trace)| RobustnessRow {
            trace,
            detected: full[ti].len(),
            retention: sums[ti]
                .iter()
                .map(|s| (!full[ti].is_empty()).then(|| s / seeds.len() as f64))
                .collect(),
        })
        .collect())
}

pub fn format_robustness_table(rows: &[RobustnessRow], fractions: &[f64]) -> String {
    let mut out = String::from("trace");
    for f in fractions {
        out.push_str(&format!("\tloss={}%", f * 100.0));
    }
    out.push('\n');
    for r in rows {
        out.push_str(r.trace.as_str());
        for v in &r.retention {
            match v {
                Some(v) => out.push_str(&format!("\t{:.1}%", v * 100.0)),
                None => out.push_str("\tn/a"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows() {
        let w = Window::parse("2024-08").unwrap();
        assert_eq!(w.start, Some(1_722_470_400));
        assert_eq!(w.end, Some(1_722_470_400 + 31 * 86_400));
        assert!(w.contains(1_722_470_400) && !w.contains(w.end.unwrap()));
        assert_eq!(Window::parse("2024-12").unwrap().end, Some(1_735_689_600));
        assert!(Window::parse("2024-13").is_err());
        assert!(Window::parse("august").is_err());
        let j = Window::parse("2024-07").unwrap();
        assert!(check_windows(&[j.clone(), w.clone()], false).is_ok());
        assert!(check_windows(&[Window::all(), w.clone()], false).is_err());
        assert!(check_windows(&[Window::all(), w], true).is_ok());
        assert!(check_windows(&[j.clone(), j], true).is_err());
    }

    #[test]
    fn table_layout() {
        let rows = vec![RobustnessRow {
            trace: TraceKind::HashtagSequence,
            detected: 68,
            retention: vec![Some(1.0), Some(67.0 / 68.0)],
        }];
        let t = format_robustness_table(&rows, &[0.05, 0.1]);
        assert_eq!(t, "trace\tloss=5%\tloss=10%\nhashtag_sequence\t100.0%\t98.5%\n");
    }
}
