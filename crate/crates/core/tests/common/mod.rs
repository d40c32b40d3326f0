#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use cibnet::analysis::{fisher_ratio, nmi_labels, nmi_partitions, NmiNorm};
use cibnet::audiofp::{cluster_voiceprints, dbscan, ClusterParams, Metric, NOISE};
use cibnet::ingest::{EmbeddingKind, EmbeddingRecord, PostRecord};
use cibnet::pipeline::{build_network, detect_all, detect_trace, robustness, DetectConfig, Window};
use cibnet::prune::{eigenvector_centrality, percentile_threshold, Cluster};
use cibnet::simnet::{similarity_network, write_edge_csv, write_graphml, SimilarityNetwork, TfidfOptions};
use cibnet::synthbench::voice::planted_voiceprints;
use cibnet::synthbench::{evaluate, generate_dataset, Dataset, Scenario};
use cibnet::traces::{extract_embedding_matches, EngagementPair, MatchRule, TraceConfig, TraceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Check {
        Check { pass, detail: detail.into() }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn post(id: &str, user: &str, timestamp: i64) -> PostRecord {
    PostRecord {
        post_id: id.into(),
        user_id: user.into(),
        username: user.into(),
        timestamp,
        description: String::new(),
        hashtags: Vec::new(),
        urls: Vec::new(),
        duet_target: None,
        stitch_target: None,
        reply_target: None,
        transcript: None,
    }
}

pub fn random_engagements(rng: &mut ChaCha8Rng, max_users: usize, max_entities: usize) -> Vec<EngagementPair> {
    let users = rng.random_range(2..=max_users);
    let entities = rng.random_range(1..=max_entities);
    let density = rng.random_range(0.01..0.2);
    let mut pairs = Vec::new();
    for u in 0..users {
        let mut any = false;
        for e in 0..entities {
            if rng.random_bool(density) {
                pairs.push(EngagementPair { user_id: format!("u{u:03}"), entity: format!("e{e:03}"), count: rng.random_range(1..=5) });
                any = true;
            }
        }
        if !any {
            let e = rng.random_range(0..entities);
            pairs.push(EngagementPair { user_id: format!("u{u:03}"), entity: format!("e{e:03}"), count: 1 });
        }
    }
    pairs
}

/// All-pairs cosine over dense TF-IDF rows (raw counts, `ln(N/df)`).
pub fn dense_projection(pairs: &[EngagementPair]) -> (BTreeSet<String>, BTreeMap<(String, String), f64>) {
    let users: BTreeSet<String> = pairs.iter().map(|p| p.user_id.clone()).collect();
    let entities: BTreeSet<String> = pairs.iter().map(|p| p.entity.clone()).collect();
    let ui: HashMap<&String, usize> = users.iter().enumerate().map(|(i, u)| (u, i)).collect();
    let ei: HashMap<&String, usize> = entities.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut m = vec![vec![0.0f64; entities.len()]; users.len()];
    for p in pairs {
        m[ui[&p.user_id]][ei[&p.entity]] += p.count as f64;
    }
    let n = users.len() as f64;
    for e in 0..entities.len() {
        let df = m.iter().filter(|row| row[e] > 0.0).count() as f64;
        let idf = (n / df).ln();
        for row in m.iter_mut() {
            row[e] *= idf;
        }
    }
    let names: Vec<&String> = users.iter().collect();
    let mut out = BTreeMap::new();
    for a in 0..m.len() {
        for b in a + 1..m.len() {
            let dot: f64 = m[a].iter().zip(&m[b]).map(|(x, y)| x * y).sum();
            if dot == 0.0 {
                continue;
            }
            let na = m[a].iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = m[b].iter().map(|x| x * x).sum::<f64>().sqrt();
            out.insert((names[a].clone(), names[b].clone()), dot / (na * nb));
        }
    }
    (users, out)
}

pub fn ac1_projection(instances: usize, seed: u64) -> Check {
    let t = Instant::now();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let pairs = random_engagements(&mut r, 100, 200);
        let net = similarity_network(&pairs, TraceKind::HashtagSequence, TfidfOptions::default()).unwrap();
        let (users, oracle) = dense_projection(&pairs);
        if net.nodes.iter().cloned().collect::<BTreeSet<_>>() != users {
            return Check::new(false, format!("instance {i}: node sets differ"));
        }
        let got: BTreeMap<(String, String), f64> =
            net.named_edges().map(|(a, b, w)| ((a.to_string(), b.to_string()), w)).collect();
        if got.keys().ne(oracle.keys()) {
            return Check::new(false, format!("instance {i}: edge sets differ ({} vs {})", got.len(), oracle.len()));
        }
        for (k, w) in &got {
            worst = worst.max((w - oracle[k]).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Check::new(
        worst <= 1e-9 && secs < 10.0,
        format!("{instances} instances, max |diff| {worst:.1e}, {secs:.2} s"),
    )
}

pub fn random_connected_graph(r: &mut ChaCha8Rng, max_nodes: usize) -> SimilarityNetwork {
    let n = r.random_range(2..=max_nodes);
    let extra = r.random_range(0.0..0.5);
    let mut edges = BTreeMap::new();
    for v in 1..n {
        let u = r.random_range(0..v);
        edges.insert((u, v), r.random_range(0.01..1.0));
    }
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(extra) {
                edges.entry((u, v)).or_insert_with(|| r.random_range(0.01..1.0));
            }
        }
    }
    let named: Vec<(String, String, f64)> =
        edges.into_iter().map(|((u, v), w)| (format!("n{u:02}"), format!("n{v:02}"), w)).collect();
    SimilarityNetwork::from_named_edges(TraceKind::CoReply, std::iter::empty(), &named).unwrap()
}

/// Plain power iteration on `A + cI`, `c` half the largest weighted degree,
/// for a fixed number of steps. Assumes a connected graph.
pub fn reference_centrality(net: &SimilarityNetwork, iterations: usize) -> Vec<f64> {
    let n = net.node_count();
    let adj = net.adjacency();
    let c = 0.5 * adj.iter().map(|row| row.iter().map(|&(_, w)| w).sum::<f64>()).fold(0.0, f64::max);
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..iterations {
        let mut y: Vec<f64> = x.iter().map(|v| c * v).collect();
        for (i, row) in adj.iter().enumerate() {
            for &(j, w) in row {
                y[i] += w * x[j];
            }
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    x
}

/// Pairs ordered strictly by the reference (gap above `tie`) must be
/// ordered the same way by `ours`.
pub fn discordant_pairs(ours: &[f64], reference: &[f64], tie: f64) -> usize {
    let mut bad = 0;
    for i in 0..ours.len() {
        for j in i + 1..ours.len() {
            let d = reference[i] - reference[j];
            if d.abs() > tie && (ours[i] - ours[j]).signum() != d.signum() {
                bad += 1;
            }
        }
    }
    bad
}

pub fn ac2_centrality(graphs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut discordant = 0;
    let mut worst = 0.0f64;
    for g in 0..graphs {
        let net = random_connected_graph(&mut r, 30);
        let ours = match eigenvector_centrality(&net, 1e-8, 1000) {
            Ok(s) => s,
            Err(e) => return Check::new(false, format!("graph {g}: {e}")),
        };
        let reference = reference_centrality(&net, 100_000);
        discordant += discordant_pairs(&ours, &reference, 1e-8);
        for (a, b) in ours.iter().zip(&reference) {
            worst = worst.max((a - b).abs());
        }
    }
    Check::new(
        discordant == 0,
        format!("{graphs} graphs, {discordant} discordant pairs, max |score diff| {worst:.1e}"),
    )
}

/// Posts drawn from few timestamps, with vectors that are exact copies,
/// tiny or moderate perturbations of a few bases, or unrelated.
pub fn embedding_fixture(r: &mut ChaCha8Rng, kind: EmbeddingKind) -> (Vec<PostRecord>, Vec<EmbeddingRecord>) {
    let n_posts = r.random_range(2..=500);
    let n_users = r.random_range(2..=40);
    let n_times = r.random_range(1..=40);
    let dim = r.random_range(2..=16);
    let bases: Vec<Vec<f32>> =
        (0..4).map(|_| (0..dim).map(|_| r.sample::<f32, _>(StandardNormal)).collect()).collect();
    let mut posts = Vec::new();
    let mut embs = Vec::new();
    for i in 0..n_posts {
        let id = format!("p{i:03}");
        posts.push(post(&id, &format!("u{:02}", r.random_range(0..n_users)), 1_722_470_400 + r.random_range(0..n_times)));
        let base = &bases[r.random_range(0..bases.len())];
        let noise = match r.random_range(0..4) {
            0 => 0.0,
            1 => 1e-5,
            2 => r.random_range(0.2..0.6),
            _ => 10.0,
        };
        let vector = base.iter().map(|&b| b + noise * r.sample::<f32, _>(StandardNormal)).collect();
        if r.random_bool(0.95) {
            embs.push(EmbeddingRecord { post_id: id, kind, vector });
        }
    }
    (posts, embs)
}

/// Every pair of posts, scored directly.
pub fn brute_force_matches(
    posts: &[PostRecord],
    embs: &[EmbeddingRecord],
    kind: EmbeddingKind,
    rule: MatchRule,
) -> BTreeMap<(String, String), BTreeSet<(String, String)>> {
    let vec_of: HashMap<&str, &Vec<f32>> =
        embs.iter().filter(|e| e.kind == kind).map(|e| (e.post_id.as_str(), &e.vector)).collect();
    let cos = |a: &[f32], b: &[f32]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
        let na: f64 = a.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut found: BTreeMap<(String, String), BTreeSet<(String, String)>> = BTreeMap::new();
    for (i, a) in posts.iter().enumerate() {
        for b in &posts[i + 1..] {
            let (Some(va), Some(vb)) = (vec_of.get(a.post_id.as_str()), vec_of.get(b.post_id.as_str())) else {
                continue;
            };
            if a.user_id == b.user_id || (a.timestamp - b.timestamp).abs() > rule.max_gap_seconds {
                continue;
            }
            let s = cos(va, vb).min(1.0);
            let ok = if rule.strict { s > rule.threshold } else { s >= rule.threshold };
            if ok {
                let (a, b) = if a.user_id < b.user_id { (a, b) } else { (b, a) };
                found
                    .entry((a.user_id.clone(), b.user_id.clone()))
                    .or_default()
                    .insert((a.post_id.clone(), b.post_id.clone()));
            }
        }
    }
    found.retain(|_, ev| ev.len() >= rule.min_occurrences);
    found
}

pub fn ac4_embedding_matches(fixtures: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let cfg = TraceConfig::default();
    let mut pairs = 0;
    for f in 0..fixtures {
        for (trace, kind, rule) in [
            (TraceKind::SpeechSimilarity, EmbeddingKind::Speech, MatchRule::speech()),
            (TraceKind::VideoSimilarity, EmbeddingKind::Video, MatchRule::video()),
        ] {
            let (posts, embs) = embedding_fixture(&mut r, kind);
            let oracle = brute_force_matches(&posts, &embs, kind, rule);
            let got = extract_embedding_matches(&posts, &embs, trace, rule, &cfg).unwrap();
            let got: BTreeMap<(String, String), BTreeSet<(String, String)>> = got
                .into_iter()
                .map(|m| {
                    let ev = m.evidence.into_iter().map(|e| (e.post_a, e.post_b)).collect();
                    ((m.user_a, m.user_b), ev)
                })
                .collect();
            if got != oracle {
                return Check::new(false, format!("fixture {f} ({trace}): {} pairs vs oracle {}", got.len(), oracle.len()));
            }
            pairs += got.len();
        }
    }
    Check::new(true, format!("{fixtures} fixtures per trace, {pairs} matching user pairs, all identical"))
}

/// Textbook DBSCAN with a depth-first seed stack.
pub fn reference_dbscan(v: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i32> {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let region = |i: usize| -> Vec<usize> { (0..v.len()).filter(|&j| dist(&v[i], &v[j]) <= eps).collect() };
    let mut labels: Vec<Option<i32>> = vec![None; v.len()];
    let mut cluster = -1;
    for i in 0..v.len() {
        if labels[i].is_some() {
            continue;
        }
        let nb = region(i);
        if nb.len() < min_pts {
            labels[i] = Some(NOISE);
            continue;
        }
        cluster += 1;
        labels[i] = Some(cluster);
        let mut stack = nb;
        while let Some(q) = stack.pop() {
            match labels[q] {
                Some(NOISE) => labels[q] = Some(cluster),
                None => {
                    labels[q] = Some(cluster);
                    let nq = region(q);
                    if nq.len() >= min_pts {
                        stack.extend(nq);
                    }
                }
                _ => {}
            }
        }
    }
    labels.into_iter().map(|l| l.unwrap()).collect()
}

pub fn blobs(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..r.random_range(1..6)).map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
    (0..n)
        .map(|_| {
            if r.random_bool(0.1) {
                (0..dim).map(|_| r.random_range(-8.0..8.0)).collect()
            } else {
                let c = &centers[r.random_range(0..centers.len())];
                c.iter().map(|x| x + 0.5 * r.sample::<f64, _>(StandardNormal)).collect()
            }
        })
        .collect()
}

/// Nine planted groups among unrelated background voices.
pub fn planted_with_background(seed: u64, background: usize) -> (Vec<Vec<f64>>, Vec<Option<usize>>) {
    let (mut vectors, groups) = planted_voiceprints(9, 20, 256, 0.05, seed);
    let mut labels: Vec<Option<usize>> = groups.into_iter().map(Some).collect();
    let mut r = rng(seed ^ 0xb6);
    for _ in 0..background {
        vectors.push((0..256).map(|_| r.random_range(-10.0..10.0)).collect());
        labels.push(None);
    }
    (vectors, labels)
}

/// Points mislabeled against planted groups: background points must be
/// noise and each group must map to its own single cluster.
pub fn mislabeled(truth: &[Option<usize>], labels: &[i32]) -> usize {
    let mut by_group: BTreeMap<usize, BTreeMap<i32, usize>> = BTreeMap::new();
    let mut bad = 0;
    for (t, &l) in truth.iter().zip(labels) {
        match t {
            None => bad += usize::from(l != NOISE),
            Some(g) => *by_group.entry(*g).or_default().entry(l).or_default() += 1,
        }
    }
    let mut used = BTreeSet::new();
    for counts in by_group.values() {
        let (&label, &n) = counts.iter().max_by_key(|(_, &n)| n).unwrap();
        let total: usize = counts.values().sum();
        if label == NOISE || !used.insert(label) {
            bad += total;
        } else {
            bad += total - n;
        }
    }
    bad
}

pub fn ac7_dbscan(seed: u64) -> Check {
    let mut exact = 0;
    let mut worst = String::new();
    let mut plain = 0;
    for s in seed..seed + 10 {
        let (vectors, truth) = planted_with_background(s, 30);
        let vc = cluster_voiceprints(&vectors, &ClusterParams::default()).unwrap();
        let bad = mislabeled(&truth, &vc.labels);
        if vc.n_clusters == 9 && bad == 0 {
            exact += 1;
        } else if worst.is_empty() {
            worst = format!(" (seed {s}: {} clusters, {bad} mislabeled)", vc.n_clusters);
        }
        let (v, g) = planted_voiceprints(9, 20, 256, 0.05, s);
        let vc = cluster_voiceprints(&v, &ClusterParams::default()).unwrap();
        let truth: Vec<Option<usize>> = g.into_iter().map(Some).collect();
        plain += usize::from(vc.n_clusters == 9 && mislabeled(&truth, &vc.labels) == 0);
    }

    let mut r = rng(seed ^ 0x5eed);
    let mut fixtures = 0;
    let mut mismatch = None;
    for f in 0..30 {
        let (n, dim) = (r.random_range(1..400), r.random_range(1..6));
        let pts = blobs(&mut r, n, dim);
        for (eps, min_pts) in [(0.3, 3), (0.8, 5), (1.5, 4), (0.0, 1), (4.0, 10)] {
            fixtures += 1;
            if dbscan(&pts, eps, min_pts, Metric::Euclidean).unwrap() != reference_dbscan(&pts, eps, min_pts) {
                mismatch.get_or_insert(format!("fixture {f} eps {eps} min_pts {min_pts}"));
            }
        }
    }
    let (vectors, _) = planted_with_background(seed, 30);
    let eps = cluster_voiceprints(&vectors, &ClusterParams::default()).unwrap().eps;
    fixtures += 1;
    if dbscan(&vectors, eps, 5, Metric::Euclidean).unwrap() != reference_dbscan(&vectors, eps, 5) {
        mismatch.get_or_insert("planted voiceprints".into());
    }
    Check::new(
        exact == 10 && mismatch.is_none(),
        format!(
            "9 groups + 30 background voices: {exact}/10 seeds exact{worst}; without background {plain}/10; reference {}",
            mismatch.map_or(format!("agrees on {fixtures} fixtures"), |m| format!("differs on {m}"))
        ),
    )
}

pub fn ac8_statistics(seed: u64) -> Check {
    let mut r = rng(seed);
    let part: HashMap<String, usize> = (0..1000).map(|i| (format!("a{i}"), r.random_range(0..7))).collect();
    let same = nmi_partitions(&part, &part.clone(), NmiNorm::Geometric).unwrap();

    let accounts: Vec<String> = (0..10_000).map(|i| format!("a{i:05}")).collect();
    let a: Vec<bool> = accounts.iter().map(|_| r.random_bool(0.5)).collect();
    let b: Vec<bool> = accounts.iter().map(|_| r.random_bool(0.5)).collect();
    let pa: HashMap<String, usize> = accounts.iter().map(|u| (u.clone(), r.random_range(0..5))).collect();
    let pb: HashMap<String, usize> = accounts.iter().map(|u| (u.clone(), r.random_range(0..5))).collect();
    let indep = nmi_labels(&a, &b, NmiNorm::Geometric).unwrap().max(nmi_partitions(&pa, &pb, NmiNorm::Geometric).unwrap());

    let xa: Vec<Vec<f64>> = (0..10_000).map(|_| vec![r.sample::<f64, _>(StandardNormal)]).collect();
    let xb: Vec<Vec<f64>> = (0..10_000).map(|_| vec![2.0 + r.sample::<f64, _>(StandardNormal)]).collect();
    let fr = fisher_ratio(&xa, &xb).unwrap().fisher_ratio;
    Check::new(
        same == 1.0 && indep < 0.01 && (fr - 2.0).abs() <= 0.1,
        format!("nmi(identical) {same}, nmi(independent) {indep:.2e}, fisher {fr:.4}"),
    )
}

pub fn paper_august(seed: u64) -> Dataset {
    generate_dataset(&Scenario::preset("paper-august").unwrap(), seed).unwrap()
}

pub fn is_clique(c: &Cluster) -> bool {
    let n = c.members.len();
    c.induced_edges.len() == n * (n - 1) / 2
}

pub fn ac3_hashtag(seeds: u64) -> Check {
    let cfg = DetectConfig::default();
    let mut slowest = 0.0f64;
    for seed in 0..seeds {
        let t = Instant::now();
        let data = paper_august(seed);
        let organic = data.truth.organic.len();
        let run = match detect_trace(TraceKind::HashtagSequence, "all", (&data).into(), &cfg) {
            Ok(r) => r,
            Err(e) => return Check::new(false, format!("seed {seed}: {e}")),
        };
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let planted = &data.truth.campaigns["tagwave"];
        let ok = organic >= 3400
            && run.clusters.len() == 1
            && run.clusters[0].members.iter().cloned().collect::<BTreeSet<_>>() == *planted
            && is_clique(&run.clusters[0])
            && run.clusters[0].induced_edges.iter().all(|e| (e.2 - 1.0).abs() <= 1e-12);
        if !ok {
            let sizes: Vec<usize> = run.clusters.iter().map(Cluster::size).collect();
            return Check::new(false, format!("seed {seed}: clusters {sizes:?}, organic {organic}"));
        }
    }
    Check::new(
        slowest < 60.0,
        format!("{seeds} seeds: one 68-account clique with unit weights each, slowest seed {slowest:.1} s"),
    )
}

pub fn ac5_sync(seeds: u64) -> Check {
    let cfg = DetectConfig::default();
    for seed in 0..seeds {
        let data = paper_august(seed);
        let run = match detect_trace(TraceKind::SynchronizedPosting, "all", (&data).into(), &cfg) {
            Ok(r) => r,
            Err(e) => return Check::new(false, format!("seed {seed}: {e}")),
        };
        let sizes: Vec<usize> = run.clusters.iter().map(Cluster::size).collect();
        if run.clusters.len() != 4 {
            return Check::new(false, format!("seed {seed}: {} components {sizes:?}", run.clusters.len()));
        }
        let mut matched = BTreeSet::new();
        for c in &run.clusters {
            let members: BTreeSet<String> = c.members.iter().cloned().collect();
            let best = data
                .truth
                .campaigns
                .iter()
                .filter(|(n, _)| n.starts_with("syncgroup"))
                .max_by_key(|(_, m)| m.intersection(&members).count())
                .unwrap();
            let hit = best.1.intersection(&members).count() as f64;
            let (recall, precision) = (hit / best.1.len() as f64, hit / members.len() as f64);
            if recall < 1.0 || precision < 0.9 {
                return Check::new(false, format!("seed {seed}: {} recall {recall:.3} precision {precision:.3}", best.0));
            }
            matched.insert(best.0.clone());
        }
        if matched.len() != 4 {
            return Check::new(false, format!("seed {seed}: components map to {matched:?}"));
        }
    }
    Check::new(true, format!("{seeds} seeds: 4 components, each one planted group with recall 1 and precision 1"))
}

pub const PLANTED_TRACES: [TraceKind; 5] = [
    TraceKind::HashtagSequence,
    TraceKind::SynchronizedPosting,
    TraceKind::CoDomainDescription,
    TraceKind::SpeechSimilarity,
    TraceKind::VideoSimilarity,
];

pub fn ac6_robustness(seeds: u64) -> Check {
    let data = paper_august(0);
    let seeds: Vec<u64> = (0..seeds).collect();
    let rows = match robustness(&data, &TraceKind::ALL, &[0.05, 0.10], &seeds, &DetectConfig::default()) {
        Ok(r) => r,
        Err(e) => return Check::new(false, e.to_string()),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    let mut noise = Vec::new();
    for row in &rows {
        let [r5, r10] = [row.retention[0].unwrap_or(f64::NAN), row.retention[1].unwrap_or(f64::NAN)];
        let text = format!("{} {:.1}/{:.1}", short(row.trace), 100.0 * r5, 100.0 * r10);
        if PLANTED_TRACES.contains(&row.trace) {
            pass &= r5 >= 0.95 && r10 >= 0.90;
            parts.push(text);
        } else {
            noise.push(text);
        }
    }
    Check::new(pass, format!("retention % at 5/10 loss: {}; unplanted traces: {}", parts.join(", "), noise.join(", ")))
}

fn short(k: TraceKind) -> &'static str {
    match k {
        TraceKind::HashtagSequence => "hashtag",
        TraceKind::SynchronizedPosting => "sync",
        TraceKind::CoDomainDescription => "domain",
        TraceKind::CoDomainComment => "comment-domain",
        TraceKind::CoDuet => "duet",
        TraceKind::CoStitch => "stitch",
        TraceKind::CoReply => "reply",
        TraceKind::SpeechSimilarity => "speech",
        TraceKind::VideoSimilarity => "video",
    }
}

pub fn ac9_false_positives(seeds: u64) -> Check {
    let scenario = Scenario::preset("organic-only").unwrap();
    let cfg = DetectConfig::default();
    let mut dense = Vec::new();
    let mut failed = Vec::new();
    let mut runs = 0;
    for seed in 0..seeds {
        let data = generate_dataset(&scenario, seed).unwrap();
        for (_, kind, result) in detect_all(&TraceKind::ALL, &[Window::all()], (&data).into(), &cfg) {
            runs += 1;
            match result {
                Ok(run) => {
                    for c in &run.clusters {
                        let n = c.size();
                        let d = 2.0 * c.induced_edges.len() as f64 / (n * (n - 1)) as f64;
                        if n >= 10 && d >= 0.9 {
                            dense.push(format!("seed {seed} {}: size {n} density {d:.2}", short(kind)));
                        }
                    }
                }
                Err(e) => failed.push(format!("seed {seed} {}: {e}", short(kind))),
            }
        }
    }
    let detail = format!(
        "{runs} runs, {} dense clusters{}, {} runs without a result{}",
        dense.len(),
        if dense.is_empty() { String::new() } else { format!(" [{}]", dense.join("; ")) },
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" [{}]", failed.join("; ")) },
    );
    Check::new(dense.is_empty() && failed.is_empty(), detail)
}

fn serialize_runs(data: &Dataset) -> Vec<u8> {
    let windows = [Window::all(), Window::parse("2024-08").unwrap()];
    let mut out = Vec::new();
    for (w, kind, result) in detect_all(&TraceKind::ALL, &windows, data.into(), &DetectConfig::default()) {
        out.extend(format!("== {w} {kind}\n").bytes());
        match result {
            Ok(run) => {
                write_graphml(&mut out, &run.pruned).unwrap();
                write_edge_csv(&mut out, &run.pruned).unwrap();
                out.extend(serde_json::to_vec(&run.clusters).unwrap());
            }
            Err(e) => out.extend(e.to_string().bytes()),
        }
    }
    out
}

pub fn ac10_determinism(seed: u64) -> Check {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let runs: Vec<(Dataset, Vec<u8>)> = [1, 1, 4, 8]
        .into_iter()
        .map(|n| {
            pool(n).install(|| {
                let data = paper_august(seed);
                let bytes = serialize_runs(&data);
                (data, bytes)
            })
        })
        .collect();
    let same = runs.windows(2).all(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1);
    Check::new(
        same,
        format!("generation plus detection at 1, 1, 4 and 8 threads: {} output bytes, {}", runs[0].1.len(), if same { "identical" } else { "differ" }),
    )
}

/// Campaigns whose weakest within-campaign tie beats the organic 99.9th
/// percentile of their trace network must be recovered in full.
pub fn planted_recovery(seeds: u64) -> Check {
    let scenario = Scenario::preset("paper-august").unwrap();
    let cfg = DetectConfig::default();
    let outcomes: Vec<(u64, String, Option<String>)> = (0..seeds)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let data = generate_dataset(&scenario, seed).unwrap();
            let mut out = Vec::new();
            for spec in &scenario.campaigns {
                let kind = spec.traces[0];
                let net = build_network(kind, (&data).into(), &cfg).unwrap();
                let organic: Vec<f64> = net
                    .named_edges()
                    .filter(|(a, b, _)| data.truth.organic.contains(*a) && data.truth.organic.contains(*b))
                    .map(|(_, _, w)| w)
                    .collect();
                let background = if organic.is_empty() { 0.0 } else { percentile_threshold(&organic, 99.9).unwrap() };
                let members: Vec<&String> = data.truth.campaigns[&spec.name].iter().collect();
                let mut weakest = f64::INFINITY;
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i + 1..] {
                        weakest = weakest.min(net.weight(a, b).unwrap_or(0.0));
                    }
                }
                if weakest <= background {
                    continue;
                }
                let verdict = match detect_trace(kind, "all", (&data).into(), &cfg) {
                    Ok(run) => {
                        let recall = evaluate(&run.accounts(), &data.truth).per_campaign_recall[&spec.name];
                        (recall < 1.0).then(|| format!("recall {recall:.3}"))
                    }
                    Err(e) => Some(e.to_string()),
                };
                out.push((seed, spec.name.clone(), verdict));
            }
            out
        })
        .collect();
    let failures: Vec<String> = outcomes
        .iter()
        .filter_map(|(s, n, v)| v.as_ref().map(|v| format!("seed {s} {n}: {v}")))
        .collect();
    let campaigns: BTreeSet<&String> = outcomes.iter().map(|(_, n, _)| n).collect();
    Check::new(
        failures.is_empty() && outcomes.len() >= seeds as usize,
        format!(
            "{} separable (seed, campaign) cases across {} campaigns, {} not fully recovered{}",
            outcomes.len(),
            campaigns.len(),
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(" [{}]", failures.join("; ")) }
        ),
    )
}
