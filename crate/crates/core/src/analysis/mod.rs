//! Forensic evidence for detected clusters and cross-trace comparisons.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, PostRecord};
use crate::prune::{percentile_threshold, Cluster};
use crate::traces::{post_entities, TraceConfig, TraceKind};

/// `2m / (n(n-1))`.
pub fn density(n: usize, m: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::contract(format!("density needs at least 2 nodes, got {n}")));
    }
    Ok(2.0 * m as f64 / (n as f64 * (n - 1) as f64))
}

pub fn cluster_density(cluster: &Cluster) -> Result<f64> {
    density(cluster.members.len(), cluster.induced_edges.len())
}

/// `user` followed by 12 to 14 ASCII digits, case-insensitive.
pub fn autogen_username(name: &str) -> bool {
    let b = name.as_bytes();
    b.len() >= 4
        && b[..4].eq_ignore_ascii_case(b"user")
        && (12..=14).contains(&(b.len() - 4))
        && b[4..].iter().all(u8::is_ascii_digit)
}

pub const MIN_PREFIX_LEN: usize = 4;

/// The prefix (at least four characters, compared case-insensitively)
/// shared by the largest group of names, extended as far as that whole
/// group agrees, with the group's share of all names. `None` unless at
/// least two names share such a prefix.
pub fn shared_prefix_stats<S: AsRef<str>>(usernames: &[S]) -> Option<(String, f64)> {
    let lower: Vec<Vec<char>> = usernames
        .iter()
        .map(|s| s.as_ref().to_lowercase().chars().collect())
        .collect();
    let mut groups: BTreeMap<&[char], Vec<usize>> = BTreeMap::new();
    for (i, chars) in lower.iter().enumerate() {
        if chars.len() >= MIN_PREFIX_LEN {
            groups.entry(&chars[..MIN_PREFIX_LEN]).or_default().push(i);
        }
    }
    // Largest group; BTreeMap order makes ties go to the smallest prefix.
    let (_, best) = groups
        .iter()
        .fold(None::<(&[char], &Vec<usize>)>, |acc, (k, v)| match acc {
            Some((_, bv)) if bv.len() >= v.len() => acc,
            _ => Some((k, v)),
        })?;
    if best.len() < 2 {
        return None;
    }
    let first = &lower[best[0]];
    let mut len = first.len();
    for &i in &best[1..] {
        len = len.min(
            first
                .iter()
                .zip(&lower[i])
                .take_while(|(a, b)| a == b)
                .count(),
        );
    }
    let prefix: String = first[..len].iter().collect();
    Some((prefix, best.len() as f64 / usernames.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub median: f64,
    pub p90: f64,
    pub fraction_below_300s: f64,
    pub intervals: usize,
}

/// Gaps between consecutive posts on the pooled timeline.
pub fn consecutive_gaps(timestamps: &[i64]) -> Vec<i64> {
    let mut ts = timestamps.to_vec();
    ts.sort_unstable();
    ts.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Median, nearest-rank 90th percentile and share below five minutes of
/// consecutive gaps. `None` with fewer than two posts.
pub fn inter_post_intervals(timestamps: &[i64]) -> Option<IntervalStats> {
    let gaps = consecutive_gaps(timestamps);
    if gaps.is_empty() {
        return None;
    }
    let mut g: Vec<f64> = gaps.iter().map(|&x| x as f64).collect();
    g.sort_by(f64::total_cmp);
    let n = g.len();
    let median = if n % 2 == 1 {
        g[n / 2]
    } else {
        (g[n / 2 - 1] + g[n / 2]) / 2.0
    };
    let p90 = percentile_threshold(&g, 90.0).expect("nonempty");
    let below = gaps.iter().filter(|&&x| x < 300).count();
    Some(IntervalStats {
        median,
        p90,
        fraction_below_300s: below as f64 / n as f64,
        intervals: n,
    })
}

/// Gap densities for a cluster and a baseline on shared bins, plus
/// hour-of-day activity shares (UTC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDensity {
    pub bin_width: i64,
    /// Probability density per bin; `sum * bin_width == 1`.
    pub cluster: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Share of posts in each UTC hour; sums to 1.
    pub cluster_hours: Vec<f64>,
    pub baseline_hours: Vec<f64>,
}

pub fn time_gap_density(cluster: &[i64], baseline: &[i64], bin_width: i64) -> Result<GapDensity> {
    if bin_width <= 0 {
        return Err(Error::config(format!("bin width must be positive, got {bin_width}")));
    }
    if cluster.len() < 2 || baseline.len() < 2 {
        return Err(Error::contract("gap density needs at least 2 posts on each side"));
    }
    let ga = consecutive_gaps(cluster);
    let gb = consecutive_gaps(baseline);
    let max = ga.iter().chain(&gb).copied().max().unwrap_or(0);
    let bins = (max / bin_width + 1) as usize;
    let hist = |gaps: &[i64]| {
        let mut h = vec![0.0; bins];
        for &g in gaps {
            h[(g / bin_width) as usize] += 1.0;
        }
        let scale = gaps.len() as f64 * bin_width as f64;
        h.iter_mut().for_each(|v| *v /= scale);
        h
    };
    Ok(GapDensity {
        bin_width,
        cluster: hist(&ga),
        baseline: hist(&gb),
        cluster_hours: hour_histogram(cluster),
        baseline_hours: hour_histogram(baseline),
    })
}

pub fn hour_histogram(timestamps: &[i64]) -> Vec<f64> {
    let mut h = vec![0.0; 24];
    for &t in timestamps {
        h[(t.rem_euclid(86_400) / 3600) as usize] += 1.0;
    }
    let n = timestamps.len().max(1) as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Rows of `series,bin_start,cluster,baseline`: the gap bins, then the
/// 24 hours.
pub fn write_gap_density_csv<W: Write>(writer: W, d: &GapDensity) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "bin_start", "cluster", "baseline"])?;
    for (i, (a, b)) in d.cluster.iter().zip(&d.baseline).enumerate() {
        let start = (i as i64 * d.bin_width).to_string();
        w.write_record(["gap", &start, &a.to_string(), &b.to_string()])?;
    }
    for (h, (a, b)) in d.cluster_hours.iter().zip(&d.baseline_hours).enumerate() {
        w.write_record(["hour", &h.to_string(), &a.to_string(), &b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNorm {
    /// `I / sqrt(H(A) H(B))`.
    #[default]
    Geometric,
    /// `2I / (H(A) + H(B))`.
    Arithmetic,
}

/// NMI between two labelings of the same items.
pub fn nmi_labels<T: Ord>(a: &[T], b: &[T], norm: NmiNorm) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract("labelings differ in length"));
    }
    if a.is_empty() {
        return Err(Error::contract("NMI of empty labelings"));
    }
    let n = a.len() as f64;
    let mut ca: BTreeMap<&T, f64> = BTreeMap::new();
    let mut cb: BTreeMap<&T, f64> = BTreeMap::new();
    let mut joint: BTreeMap<(&T, &T), f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
        *joint.entry((x, y)).or_default() += 1.0;
    }
    let entropy = |c: &mut dyn Iterator<Item = f64>| -> f64 {
        c.map(|k| {
            let p = k / n;
            -p * p.ln()
        })
        .sum()
    };
    let ha = entropy(&mut ca.values().copied());
    let hb = entropy(&mut cb.values().copied());
    if ha == 0.0 || hb == 0.0 {
        // Constant on at least one side: only a pair of identical
        // constant labelings carries full information.
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    if joint.len() == ca.len() && joint.len() == cb.len() {
        // One-to-one label correspondence: I = H(A) = H(B) exactly.
        return Ok(1.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|((x, y), &k)| {
            let pxy = k / n;
            pxy * (pxy * n * n / (ca[x] * cb[y])).ln()
        })
        .sum();
    let denom = match norm {
        NmiNorm::Geometric => (ha * hb).sqrt(),
        NmiNorm::Arithmetic => (ha + hb) / 2.0,
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// NMI of binary membership in `a` versus `b` over their union.
pub fn nmi_sets(a: &BTreeSet<String>, b: &BTreeSet<String>, norm: NmiNorm) -> Result<f64> {
    let union: Vec<&String> = a.union(b).collect();
    if union.is_empty() {
        return Err(Error::contract("NMI over an empty union"));
    }
    let la: Vec<bool> = union.iter().map(|u| a.contains(*u)).collect();
    let lb: Vec<bool> = union.iter().map(|u| b.contains(*u)).collect();
    nmi_labels(&la, &lb, norm)
}

/// NMI of two partitions (account to cluster id) over the union of
/// their accounts. Accounts missing from one side get their own
/// "unassigned" label on that side.
pub fn nmi_partitions(
    a: &HashMap<String, usize>,
    b: &HashMap<String, usize>,
    norm: NmiNorm,
) -> Result<f64> {
    let union: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    if union.is_empty() {
        return Err(Error::contract("NMI over an empty union"));
    }
    let la: Vec<Option<usize>> = union.iter().map(|u| a.get(*u).copied()).collect();
    let lb: Vec<Option<usize>> = union.iter().map(|u| b.get(*u).copied()).collect();
    nmi_labels(&la, &lb, norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub fisher_ratio: f64,
    pub size_a: usize,
    pub size_b: usize,
    /// Euclidean distance between the class means.
    pub mean_gap: f64,
}

pub const FISHER_EPS: f64 = 1e-12;

/// Fisher's ratio after projecting both classes onto the direction
/// joining their means: `(m_a - m_b)^2 / (s_a^2 + s_b^2 + eps)` with
/// unbiased variances of the projections.
pub fn fisher_ratio(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<SeparationReport> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::contract("each class needs at least 2 vectors"));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(Error::data("class vectors differ in dimension"));
    }
    let mean = |xs: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; dim];
        for v in xs {
            for (mi, vi) in m.iter_mut().zip(v) {
                *mi += vi;
            }
        }
        m.iter_mut().for_each(|x| *x /= xs.len() as f64);
        m
    };
    let (ma, mb) = (mean(a), mean(b));
    let diff: Vec<f64> = ma.iter().zip(&mb).map(|(x, y)| x - y).collect();
    let gap = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let report = |fisher_ratio| SeparationReport {
        fisher_ratio,
        size_a: a.len(),
        size_b: b.len(),
        mean_gap: gap,
    };
    if gap == 0.0 {
        return Ok(report(0.0));
    }
    let dir: Vec<f64> = diff.iter().map(|d| d / gap).collect();
    let project = |xs: &[Vec<f64>]| -> (f64, f64) {
        let p: Vec<f64> = xs
            .iter()
            .map(|v| v.iter().zip(&dir).map(|(x, d)| x * d).sum())
            .collect();
        let m = p.iter().sum::<f64>() / p.len() as f64;
        let var = p.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (p.len() - 1) as f64;
        (m, var)
    };
    let (pa, va) = project(a);
    let (pb, vb) = project(b);
    Ok(report((pa - pb).powi(2) / (va + vb + FISHER_EPS)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsernameFlags {
    pub autogen_count: usize,
    pub shared_prefix: Option<String>,
    pub prefix_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub user_id: String,
    pub username: String,
    pub post_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub id: usize,
    pub trace: TraceKind,
    pub window: String,
    pub size: usize,
    pub density: f64,
    pub top_entities: Vec<(String, u64)>,
    pub inter_post_intervals: Option<IntervalStats>,
    pub username_flags: UsernameFlags,
    pub members: Vec<MemberSummary>,
}

pub const TOP_ENTITIES: usize = 10;

/// Density, most-shared entities, posting cadence, username patterns and
/// roster for one cluster. `posts` and `comments` should cover the
/// cluster's analysis window.
pub fn cluster_report(
    id: usize,
    cluster: &Cluster,
    posts: &[PostRecord],
    comments: &[CommentRecord],
    config: &TraceConfig,
) -> Result<ClusterReport> {
    let members: HashSet<&str> = cluster.members.iter().map(String::as_str).collect();
    let mut post_counts: HashMap<&str, usize> = HashMap::new();
    let mut names: HashMap<&str, &str> = HashMap::new();
    let mut times = Vec::new();
    let mut entities: HashMap<String, u64> = HashMap::new();
    for p in posts.iter().filter(|p| members.contains(p.user_id.as_str())) {
        *post_counts.entry(&p.user_id).or_default() += 1;
        names.entry(&p.user_id).or_insert(&p.username);
        times.push(p.timestamp);
        if cluster.trace.is_bipartite() && cluster.trace != TraceKind::CoDomainComment {
            for e in post_entities(p, cluster.trace, config)? {
                *entities.entry(e).or_default() += 1;
            }
        }
    }
    if cluster.trace == TraceKind::CoDomainComment {
        for c in comments.iter().filter(|c| members.contains(c.user_id.as_str())) {
            let mut ds: Vec<String> = c
                .urls
                .iter()
                .filter_map(|u| {
                    crate::ingest::normalize_domain_with(
                        u,
                        crate::ingest::DomainOptions {
                            registrable_only: config.registrable_domains,
                        },
                    )
                })
                .collect();
            ds.sort();
            ds.dedup();
            for d in ds {
                *entities.entry(d).or_default() += 1;
            }
        }
    }
    let mut top: Vec<(String, u64)> = entities.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(TOP_ENTITIES);

    let roster: Vec<MemberSummary> = cluster
        .members
        .iter()
        .map(|u| MemberSummary {
            user_id: u.clone(),
            username: names.get(u.as_str()).map_or_else(String::new, |s| s.to_string()),
            post_count: post_counts.get(u.as_str()).copied().unwrap_or(0),
        })
        .collect();
    let usernames: Vec<&str> = roster
        .iter()
        .map(|m| if m.username.is_empty() { m.user_id.as_str() } else { m.username.as_str() })
        .collect();
    let (shared_prefix, prefix_coverage) = match shared_prefix_stats(&usernames) {
        Some((p, c)) => (Some(p), c),
        None => (None, 0.0),
    };
    Ok(ClusterReport {
        id,
        trace: cluster.trace,
        window: cluster.window.clone(),
        size: cluster.members.len(),
        density: cluster_density(cluster)?,
        top_entities: top,
        inter_post_intervals: inter_post_intervals(&times),
        username_flags: UsernameFlags {
            autogen_count: usernames.iter().filter(|n| autogen_username(n)).count(),
            shared_prefix,
            prefix_coverage,
        },
        members: roster,
    })
}

/// Plain-text cluster table.
pub fn format_report_table(reports: &[ClusterReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4}  {:<22} {:<10} {:>5} {:>7} {:>8} {:>7}  top entity",
        "id", "trace", "window", "size", "density", "<5min", "autogen"
    );
    for r in reports {
        let below = r
            .inter_post_intervals
            .map_or("-".to_string(), |i| format!("{:.2}", i.fraction_below_300s));
        let top = r
            .top_entities
            .first()
            .map_or("-".to_string(), |(e, c)| format!("{e} ({c})"));
        let _ = writeln!(
            s,
            "{:>4}  {:<22} {:<10} {:>5} {:>7.3} {:>8} {:>7}  {}",
            r.id,
            r.trace.as_str(),
            r.window,
            r.size,
            r.density,
            below,
            r.username_flags.autogen_count,
            top
        );
    }
    s
}
