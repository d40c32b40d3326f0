//! User-user similarity networks.
//!
//! Bipartite traces become a user × entity count matrix, are TF-IDF
//! weighted, and are projected onto users by cosine similarity. Embedding
//! traces skip all of that: each match pair is an edge weighted by its
//! number of occurrences.

mod io;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traces::{EngagementPair, MatchPair, TraceKind};

pub use io::{read_edge_csv, read_graphml, write_edge_csv, write_graphml};

/// Sparse user × entity matrix. Users and entities are sorted, and each
/// row lists `(entity index, weight)` in ascending entity order.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub users: Vec<String>,
    pub entities: Vec<String>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl BipartiteGraph {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Number of distinct users with a nonzero weight on each entity.
    pub fn document_frequency(&self) -> Vec<usize> {
        let mut df = vec![0; self.entities.len()];
        for row in &self.rows {
            for &(e, w) in row {
                if w != 0.0 {
                    df[e] += 1;
                }
            }
        }
        df
    }

    pub fn weight(&self, user: usize, entity: usize) -> f64 {
        self.rows[user]
            .binary_search_by_key(&entity, |&(e, _)| e)
            .map_or(0.0, |i| self.rows[user][i].1)
    }
}

/// Build the raw count matrix. Pairs must already be aggregated: a
/// repeated (user, entity) or a zero count is a contract violation.
pub fn build_bipartite(pairs: &[EngagementPair]) -> Result<BipartiteGraph> {
    let users: Vec<String> = pairs
        .iter()
        .map(|p| p.user_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let entities: Vec<String> = pairs
        .iter()
        .map(|p| p.entity.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let uidx: HashMap<&str, usize> = users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let eidx: HashMap<&str, usize> =
        entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); users.len()];
    for p in pairs {
        if p.count == 0 {
            return Err(Error::contract(format!(
                "zero count for ({}, {})",
                p.user_id, p.entity
            )));
        }
        rows[uidx[p.user_id.as_str()]].push((eidx[p.entity.as_str()], p.count as f64));
    }
    for (u, row) in rows.iter_mut().enumerate() {
        row.sort_by_key(|&(e, _)| e);
        if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::contract(format!(
                "duplicate pair ({}, {}); aggregate engagements first",
                users[u], entities[w[0].0]
            )));
        }
    }
    Ok(BipartiteGraph {
        users,
        entities,
        rows,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfMode {
    /// Raw engagement count.
    #[default]
    Count,
    /// 1 for any engagement.
    Binary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfMode {
    /// `ln(N / df)`; an entity engaged by every user weighs 0.
    #[default]
    Ln,
    /// `ln(1 + N / df)`.
    Ln1p,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfOptions {
    pub tf: TfMode,
    pub idf: IdfMode,
}

/// Reweight counts by TF-IDF. Entries that end up 0 are removed, so a user
/// engaging only ubiquitous entities keeps an empty row.
pub fn tfidf_weight(g: &BipartiteGraph, opts: TfidfOptions) -> BipartiteGraph {
    let n = g.n_users() as f64;
    let idf: Vec<f64> = g
        .document_frequency()
        .into_iter()
        .map(|df| {
            let ratio = n / df.max(1) as f64;
            match opts.idf {
                IdfMode::Ln => ratio.ln(),
                IdfMode::Ln1p => ratio.ln_1p(),
            }
        })
        .collect();
    let rows = g
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .filter_map(|&(e, c)| {
                    let tf = match opts.tf {
                        TfMode::Count => c,
                        TfMode::Binary => (c != 0.0) as u8 as f64,
                    };
                    let w = tf * idf[e];
                    (w != 0.0).then_some((e, w))
                })
                .collect()
        })
        .collect();
    BipartiteGraph {
        users: g.users.clone(),
        entities: g.entities.clone(),
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected weighted user network. Nodes are sorted; every edge has
/// `u < v` and edges are sorted by `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub kind: TraceKind,
}

impl SimilarityNetwork {
    pub fn empty(kind: TraceKind) -> Self {
        SimilarityNetwork {
            nodes: Vec::new(),
            edges: Vec::new(),
            kind,
        }
    }

    /// Build from named edges, adding `extra_nodes` as possibly isolated
    /// nodes. Self-loops, non-positive or non-finite weights and repeated
    /// pairs are data errors.
    pub fn from_named_edges<'a>(
        kind: TraceKind,
        extra_nodes: impl IntoIterator<Item = &'a str>,
        edges: &[(String, String, f64)],
    ) -> Result<Self> {
        let mut names: BTreeSet<&str> = extra_nodes.into_iter().collect();
        for (a, b, _) in edges {
            names.insert(a);
            names.insert(b);
        }
        let nodes: Vec<String> = names.into_iter().map(str::to_string).collect();
        let idx: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut out = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::data(format!("self-loop on {a:?}")));
            }
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::data(format!("edge ({a}, {b}) has weight {w}")));
            }
            let (u, v) = (idx[a.as_str()], idx[b.as_str()]);
            out.push(Edge {
                u: u.min(v),
                v: u.max(v),
                w: *w,
            });
        }
        out.sort_by_key(|e| (e.u, e.v));
        if let Some(p) = out.windows(2).find(|p| (p[0].u, p[0].v) == (p[1].u, p[1].v)) {
            return Err(Error::data(format!(
                "repeated edge ({}, {})",
                nodes[p[0].u], nodes[p[0].v]
            )));
        }
        Ok(SimilarityNetwork {
            nodes,
            edges: out,
            kind,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        let (u, v) = (self.index_of(a)?, self.index_of(b)?);
        let key = (u.min(v), u.max(v));
        self.edges
            .binary_search_by_key(&key, |e| (e.u, e.v))
            .ok()
            .map(|i| self.edges[i].w)
    }

    /// Neighbor lists `(node, weight)`, ascending by node.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(n, _)| n);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    }

    /// Subgraph induced by the nodes with `keep[i]` set.
    pub fn induced(&self, keep: &[bool]) -> SimilarityNetwork {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, name) in self.nodes.iter().enumerate() {
            if keep[i] {
                remap[i] = nodes.len();
                nodes.push(name.clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.u] && keep[e.v])
            .map(|e| Edge {
                u: remap[e.u],
                v: remap[e.v],
                w: e.w,
            })
            .collect();
        SimilarityNetwork {
            nodes,
            edges,
            kind: self.kind,
        }
    }

    /// Same edges with zero-degree nodes removed.
    pub fn without_isolated(&self) -> SimilarityNetwork {
        let keep: Vec<bool> = self.degrees().into_iter().map(|d| d > 0).collect();
        self.induced(&keep)
    }

    /// Named edge triples `(u, v, w)` with `u < v`.
    pub fn named_edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges
            .iter()
            .map(|e| (self.nodes[e.u].as_str(), self.nodes[e.v].as_str(), e.w))
    }
}

/// Cosine projection of a weighted bipartite graph onto its users.
///
/// Dot products are accumulated through an inverted entity index, so only
/// pairs sharing at least one entity are ever touched. Each pair's sum runs
/// in ascending entity order, which makes the result independent of thread
/// count. Users with empty rows stay in the network as isolated nodes.
pub fn project_users(g: &BipartiteGraph, kind: TraceKind) -> SimilarityNetwork {
    let n = g.n_users();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.entities.len()];
    for (u, row) in g.rows.iter().enumerate() {
        for &(e, w) in row {
            columns[e].push((u, w));
        }
    }
    let norms2: Vec<f64> = g
        .rows
        .iter()
        .map(|row| row.iter().map(|&(_, w)| w * w).sum())
        .collect();

    let edges: Vec<Edge> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], Vec::<usize>::new()),
            |(acc, touched), u| {
                for &(e, wu) in &g.rows[u] {
                    let col = &columns[e];
                    let start = col.partition_point(|&(v, _)| v <= u);
                    for &(v, wv) in &col[start..] {
                        if acc[v] == 0.0 {
                            touched.push(v);
                        }
                        acc[v] += wu * wv;
                    }
                }
                touched.sort_unstable();
                let mut out = Vec::with_capacity(touched.len());
                for &v in touched.iter() {
                    let dot = acc[v];
                    acc[v] = 0.0;
                    let denom = (norms2[u] * norms2[v]).sqrt();
                    if dot > 0.0 && denom > 0.0 {
                        out.push(Edge {
                            u,
                            v,
                            w: (dot / denom).min(1.0),
                        });
                    }
                }
                touched.clear();
                out
            },
        )
        .flatten_iter()
        .collect();

    SimilarityNetwork {
        nodes: g.users.clone(),
        edges,
        kind,
    }
}

/// Count matrix, TF-IDF and projection in one step.
pub fn similarity_network(
    pairs: &[EngagementPair],
    kind: TraceKind,
    opts: TfidfOptions,
) -> Result<SimilarityNetwork> {
    let g = build_bipartite(pairs)?;
    Ok(project_users(&tfidf_weight(&g, opts), kind))
}

/// One edge per match pair, weighted by occurrences.
pub fn build_match_network(pairs: &[MatchPair], kind: TraceKind) -> Result<SimilarityNetwork> {
    let edges: Vec<(String, String, f64)> = pairs
        .iter()
        .map(|p| (p.user_a.clone(), p.user_b.clone(), p.occurrences as f64))
        .collect();
    SimilarityNetwork::from_named_edges(kind, std::iter::empty(), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(u: &str, e: &str, c: u64) -> EngagementPair {
        EngagementPair {
            user_id: u.into(),
            entity: e.into(),
            count: c,
        }
    }

    const K: TraceKind = TraceKind::HashtagSequence;

    #[test]
    fn construction() {
        let g = build_bipartite(&[ep("u1", "e1", 2)]).unwrap();
        assert_eq!(g.rows, [vec![(0, 2.0)]]);
        let g = build_bipartite(&[ep("u1", "e1", 1), ep("u2", "e1", 1), ep("u3", "e2", 1)]).unwrap();
        assert_eq!((g.users.len(), g.entities.len()), (3, 2));
        assert_eq!(g.weight(2, 1), 1.0);
        assert_eq!(g.weight(2, 0), 0.0);
        assert!(matches!(
            build_bipartite(&[ep("u1", "e1", 1), ep("u1", "e1", 1)]),
            Err(Error::Contract(_))
        ));
        assert_eq!(build_bipartite(&[]).unwrap().n_users(), 0);
    }

    #[test]
    fn tfidf_examples() {
        let g = build_bipartite(&[ep("u1", "e1", 1), ep("u2", "e1", 1), ep("u3", "e2", 1)]).unwrap();
        let t = tfidf_weight(&g, TfidfOptions::default());
        assert!((t.weight(0, 0) - 1.5f64.ln()).abs() < 1e-15);
        assert!((t.weight(1, 0) - 1.5f64.ln()).abs() < 1e-15);
        assert!((t.weight(2, 1) - 3f64.ln()).abs() < 1e-15);

        let g = build_bipartite(&[ep("a", "x", 1), ep("b", "x", 3), ep("c", "x", 1)]).unwrap();
        let t = tfidf_weight(&g, TfidfOptions::default());
        assert!(t.rows.iter().all(Vec::is_empty));

        let mut pairs = vec![ep("u0", "rare", 5)];
        for i in 1..10 {
            pairs.push(ep(&format!("u{i}"), "other", 1));
        }
        let t = tfidf_weight(&build_bipartite(&pairs).unwrap(), TfidfOptions::default());
        assert!((t.weight(0, 1) - 5.0 * 10f64.ln()).abs() < 1e-12);

        let t = tfidf_weight(
            &build_bipartite(&pairs).unwrap(),
            TfidfOptions {
                tf: TfMode::Binary,
                idf: IdfMode::Ln1p,
            },
        );
        assert!((t.weight(0, 1) - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let pairs = [
            ep("u1", "a", 2),
            ep("u1", "b", 1),
            ep("u2", "a", 2),
            ep("u2", "b", 1),
            ep("u3", "c", 1),
            ep("u4", "d", 1),
        ];
        let net = similarity_network(&pairs, K, TfidfOptions::default()).unwrap();
        assert_eq!(net.weight("u1", "u2"), Some(1.0));
        assert_eq!(net.weight("u3", "u4"), None);
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.edge_count(), 1);

        let g = BipartiteGraph {
            users: vec!["x".into(), "y".into()],
            entities: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![vec![(0, 1.0), (1, 1.0)], vec![(1, 1.0), (2, 1.0)]],
        };
        let net = project_users(&g, K);
        assert!((net.weight("x", "y").unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zeroed_rows_stay_isolated() {
        let pairs = [ep("a", "x", 1), ep("b", "x", 1), ep("b", "y", 1)];
        let net = similarity_network(&pairs, K, TfidfOptions::default()).unwrap();
        assert_eq!(net.nodes, ["a", "b"]);
        assert!(net.edges.is_empty());
        assert_eq!(net.without_isolated().node_count(), 0);
    }

    #[test]
    fn match_networks() {
        let mp = |a: &str, b: &str, n| MatchPair {
            user_a: a.into(),
            user_b: b.into(),
            occurrences: n,
            evidence: vec![],
        };
        let k = TraceKind::VideoSimilarity;
        assert_eq!(build_match_network(&[], k).unwrap().node_count(), 0);
        let net = build_match_network(&[mp("u1", "u2", 2)], k).unwrap();
        assert_eq!(net.weight("u2", "u1"), Some(2.0));
        let tri = build_match_network(&[mp("a", "b", 2), mp("b", "c", 3), mp("a", "c", 2)], k).unwrap();
        assert_eq!((tri.node_count(), tri.edge_count()), (3, 3));
    }
}
