//! Centrality-based pruning and cluster extraction.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simnet::SimilarityNetwork;
use crate::traces::TraceKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Keep nodes at or above the node percentile of centrality.
    NodeOnly,
    /// Drop low-weight edges, recompute centrality, then prune nodes.
    EdgeThenNode,
    /// No pruning; report the connected components as they are.
    None,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "node" | "node_only" | "node-only" => Ok(Strategy::NodeOnly),
            "edge+node" | "edge_then_node" | "edge-then-node" | "combined" => {
                Ok(Strategy::EdgeThenNode)
            }
            "none" | "components" => Ok(Strategy::None),
            _ => Err(Error::config(format!("unknown pruning strategy {s:?}"))),
        }
    }
}

/// How power iteration treats disconnected graphs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityScope {
    /// Separate iteration per connected component.
    #[default]
    PerComponent,
    /// One iteration over the whole adjacency matrix. Mass concentrates on
    /// the component with the largest eigenvalue; the rest decay towards 0.
    WholeGraph,
}

/// How per-component scores are made comparable before thresholding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentScaling {
    /// Unit-norm eigenvector per component, compared as is.
    Unit,
    /// Each component's unit eigenvector times its leading eigenvalue. A
    /// node's score is then the weighted sum of its neighbors' unit-norm
    /// scores, so a large dense component is not outranked by a pair.
    #[default]
    SpectralRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    pub node_percentile: f64,
    pub edge_percentile: f64,
    pub node_percentile_combined: f64,
    pub strategy: Strategy,
    pub power_iteration_tol: f64,
    pub max_iterations: usize,
    pub scope: CentralityScope,
    pub scaling: ComponentScaling,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            node_percentile: 98.0,
            edge_percentile: 99.5,
            node_percentile_combined: 95.0,
            strategy: Strategy::NodeOnly,
            power_iteration_tol: 1e-8,
            max_iterations: 1000,
            scope: CentralityScope::PerComponent,
            scaling: ComponentScaling::SpectralRadius,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("node_percentile", self.node_percentile),
            ("edge_percentile", self.edge_percentile),
            ("node_percentile_combined", self.node_percentile_combined),
        ] {
            check_percentile(p).map_err(|_| Error::config(format!("{name} = {p} is outside [0, 100]")))?;
        }
        if !(self.power_iteration_tol > 0.0 && self.power_iteration_tol.is_finite()) {
            return Err(Error::config(format!(
                "power_iteration_tol must be positive, got {}",
                self.power_iteration_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }

    /// Defaults per trace: hashtag, domain and interaction traces prune
    /// nodes only, synchronized posting filters edges first, and the
    /// embedding match networks are reported without pruning.
    pub fn for_trace(kind: TraceKind) -> Self {
        let strategy = match kind {
            TraceKind::SynchronizedPosting => Strategy::EdgeThenNode,
            TraceKind::SpeechSimilarity | TraceKind::VideoSimilarity => Strategy::None,
            _ => Strategy::NodeOnly,
        };
        PruneConfig {
            strategy,
            ..PruneConfig::default()
        }
    }
}

fn check_percentile(p: f64) -> Result<()> {
    if (0.0..=100.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("percentile {p} is outside [0, 100]")))
    }
}

/// Connected component label per node, numbered in order of each
/// component's smallest node index.
pub fn component_labels(net: &SimilarityNetwork) -> Vec<usize> {
    let n = net.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &net.edges {
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    out
}

/// Per-node centrality with the leading eigenvalue of each node's
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct Centrality {
    /// Unit L2 norm within each component; isolated nodes score 0.
    pub scores: Vec<f64>,
    pub component: Vec<usize>,
    /// Rayleigh quotient of the converged vector, per component.
    pub eigenvalues: Vec<f64>,
    /// Largest iteration count over all components.
    pub iterations: usize,
}

impl Centrality {
    pub fn scaled(&self, scaling: ComponentScaling) -> Vec<f64> {
        match scaling {
            ComponentScaling::Unit => self.scores.clone(),
            ComponentScaling::SpectralRadius => self
                .scores
                .iter()
                .zip(&self.component)
                .map(|(&s, &c)| s * self.eigenvalues[c])
                .collect(),
        }
    }
}

/// Eigenvector centrality by power iteration, one component at a time.
///
/// Each component starts from the normalized all-ones vector and stops
/// when no entry moves by `tol` or more. Iteration runs on `A + sI` with
/// `s` a tenth of the largest row norm, a lower bound on the leading
/// eigenvalue: the shift leaves the eigenvectors alone but stops bipartite
/// components from oscillating.
pub fn eigenvector_centrality(net: &SimilarityNetwork, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    Ok(centrality(net, tol, max_iter, CentralityScope::PerComponent)?.scores)
}

pub fn centrality(
    net: &SimilarityNetwork,
    tol: f64,
    max_iter: usize,
    scope: CentralityScope,
) -> Result<Centrality> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::config("tolerance must be positive and max_iter at least 1"));
    }
    let n = net.node_count();
    let adj = net.adjacency();
    let labels = match scope {
        CentralityScope::PerComponent => component_labels(net),
        CentralityScope::WholeGraph => vec![0; n],
    };
    let n_comp = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (i, &c) in labels.iter().enumerate() {
        if !adj[i].is_empty() {
            members[c].push(i);
        }
    }
    let solved: Vec<(Vec<f64>, f64, usize)> = members
        .par_iter()
        .map(|nodes| power_iterate(nodes, &adj, tol, max_iter))
        .collect::<Result<_>>()?;

    let mut scores = vec![0.0; n];
    let mut eigenvalues = vec![0.0; n_comp];
    let mut iterations = 0;
    for (c, (nodes, (x, lambda, it))) in members.iter().zip(solved).enumerate() {
        for (&i, &v) in nodes.iter().zip(&x) {
            scores[i] = v;
        }
        eigenvalues[c] = lambda;
        iterations = iterations.max(it);
    }
    Ok(Centrality {
        scores,
        component: labels,
        eigenvalues,
        iterations,
    })
}

const SHIFT: f64 = 0.1;

fn power_iterate(
    nodes: &[usize],
    adj: &[Vec<(usize, f64)>],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let k = nodes.len();
    if k == 0 {
        return Ok((Vec::new(), 0.0, 0));
    }
    let mut local = std::collections::HashMap::with_capacity(k);
    for (li, &g) in nodes.iter().enumerate() {
        local.insert(g, li);
    }
    let ladj: Vec<Vec<(usize, f64)>> = nodes
        .iter()
        .map(|&g| adj[g].iter().map(|&(h, w)| (local[&h], w)).collect())
        .collect();
    let shift = SHIFT
        * ladj
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);

    let mut x = vec![1.0 / (k as f64).sqrt(); k];
    let mut y = vec![0.0; k];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        for (i, row) in ladj.iter().enumerate() {
            y[i] = shift * x[i] + row.iter().map(|&(j, w)| w * x[j]).sum::<f64>();
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::data("edge weights overflow during power iteration"));
        }
        residual = 0.0;
        for i in 0..k {
            let v = y[i] / norm;
            residual = residual.max((v - x[i]).abs());
            x[i] = v;
        }
        if residual < tol {
            let lambda = rayleigh(&ladj, &x);
            return Ok((x, lambda, it));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

fn rayleigh(adj: &[Vec<(usize, f64)>], x: &[f64]) -> f64 {
    adj.iter()
        .enumerate()
        .map(|(i, row)| x[i] * row.iter().map(|&(j, w)| w * x[j]).sum::<f64>())
        .sum()
}

/// Nearest-rank percentile: the value at index `ceil(p/100 * n) - 1` of
/// the ascending sort, or the minimum for `p = 0`.
pub fn percentile_threshold(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::contract("percentile of an empty list"));
    }
    check_percentile(p)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = p * n as f64 / 100.0;
    // Guard against products like 0.98 * 100 landing a hair above 98.
    let rank = if (rank - rank.round()).abs() < 1e-9 {
        rank.round()
    } else {
        rank.ceil()
    };
    let idx = (rank as usize).saturating_sub(1).min(n - 1);
    Ok(sorted[idx])
}

/// Keep nodes scoring at least the `p`-th percentile of all scores.
pub fn node_prune(net: &SimilarityNetwork, scores: &[f64], p: f64) -> Result<SimilarityNetwork> {
    if scores.len() != net.node_count() {
        return Err(Error::contract(format!(
            "{} scores for {} nodes",
            scores.len(),
            net.node_count()
        )));
    }
    if net.node_count() == 0 {
        check_percentile(p)?;
        return Ok(net.clone());
    }
    let t = percentile_threshold(scores, p)?;
    let keep: Vec<bool> = scores.iter().map(|&s| s >= t).collect();
    Ok(net.induced(&keep))
}

/// Drop edges lighter than the `p`-th percentile of edge weights, then
/// drop nodes left without edges.
pub fn edge_filter(net: &SimilarityNetwork, p: f64) -> Result<SimilarityNetwork> {
    if net.edges.is_empty() {
        return Err(Error::contract("edge filter on an edgeless network"));
    }
    let weights: Vec<f64> = net.edges.iter().map(|e| e.w).collect();
    let t = percentile_threshold(&weights, p)?;
    let mut out = net.clone();
    out.edges.retain(|e| e.w >= t);
    Ok(out.without_isolated())
}

/// Edge filter, centrality on what is left, then node pruning.
pub fn combined_prune(net: &SimilarityNetwork, cfg: &PruneConfig) -> Result<SimilarityNetwork> {
    if net.edges.is_empty() {
        return Ok(SimilarityNetwork::empty(net.kind));
    }
    let filtered = edge_filter(net, cfg.edge_percentile)?;
    if filtered.node_count() == 0 {
        return Ok(filtered);
    }
    let scores = scores_for(&filtered, cfg)?;
    node_prune(&filtered, &scores, cfg.node_percentile_combined)
}

/// Scores used for thresholding under `cfg`'s scope and scaling.
pub fn scores_for(net: &SimilarityNetwork, cfg: &PruneConfig) -> Result<Vec<f64>> {
    let c = centrality(net, cfg.power_iteration_tol, cfg.max_iterations, cfg.scope)?;
    Ok(c.scaled(cfg.scaling))
}

/// Apply `cfg.strategy`.
pub fn prune(net: &SimilarityNetwork, cfg: &PruneConfig) -> Result<SimilarityNetwork> {
    cfg.validate()?;
    match cfg.strategy {
        Strategy::None => Ok(net.clone()),
        Strategy::EdgeThenNode => combined_prune(net, cfg),
        Strategy::NodeOnly => {
            if net.node_count() == 0 {
                return Ok(net.clone());
            }
            let scores = scores_for(net, cfg)?;
            node_prune(net, &scores, cfg.node_percentile)
        }
    }
}

/// A connected group of accounts surviving pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<String>,
    pub induced_edges: Vec<(String, String, f64)>,
    pub trace: TraceKind,
    pub window: String,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn as_network(&self) -> SimilarityNetwork {
        SimilarityNetwork::from_named_edges(
            self.trace,
            self.members.iter().map(String::as_str),
            &self.induced_edges,
        )
        .expect("cluster edges come from a valid network")
    }
}

/// Components with at least two members, largest first, ties broken by
/// smallest member name.
pub fn connected_components(net: &SimilarityNetwork, window: &str) -> Vec<Cluster> {
    let labels = component_labels(net);
    let n_comp = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let mut edges: Vec<Vec<(String, String, f64)>> = vec![Vec::new(); n_comp];
    for (a, b, w) in net.named_edges() {
        let c = labels[net.index_of(a).expect("edge endpoint")];
        edges[c].push((a.to_string(), b.to_string(), w));
    }
    let mut clusters: Vec<Cluster> = members
        .into_iter()
        .zip(edges)
        .filter(|(m, _)| m.len() >= 2)
        .map(|(m, induced_edges)| Cluster {
            members: m.into_iter().map(|i| net.nodes[i].clone()).collect(),
            induced_edges,
            trace: net.kind,
            window: window.to_string(),
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    clusters
}

pub fn write_clusters_json<W: Write>(writer: W, clusters: &[Cluster]) -> Result<()> {
    serde_json::to_writer_pretty(writer, clusters)?;
    Ok(())
}
