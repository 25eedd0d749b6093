//! Cosine item similarity and the weighted dissimilarity graph built from it.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::ingest::{parse_field, CoocMatrix, ItemCatalog};

/// Popularity-normalized co-occurrence: `cooc / sqrt(occ_a * occ_b)`.
pub fn cosine(cooc: u64, occ_a: u64, occ_b: u64) -> Result<f64> {
    if occ_a == 0 || occ_b == 0 {
        return Err(Error::contract("occurrence counts must be at least 1"));
    }
    if cooc > occ_a.min(occ_b) {
        return Err(Error::contract(format!(
            "co-occurrence {cooc} exceeds min occurrence of ({occ_a}, {occ_b})"
        )));
    }
    let score = cooc as f64 / ((occ_a as f64) * (occ_b as f64)).sqrt();
    Ok(score.min(1.0))
}

/// Undirected graph whose edge weights are `1 - cosine`.
///
/// Adjacency lists are sorted by neighbor index and every edge is stored in
/// both directions with the same weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    node_ids: Vec<String>,
    adjacency: Vec<Vec<(u32, f64)>>,
    edge_count: usize,
    min_cooc: u32,
}

impl SimilarityGraph {
    /// Builds a graph from an undirected edge list over `node_ids`.
    ///
    /// Rejects self-loops, duplicate edges, weights outside `[0, 1)` and
    /// out-of-range endpoints.
    pub fn from_edges(
        node_ids: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        min_cooc: u32,
    ) -> Result<Self> {
        let n = node_ids.len();
        let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut edge_count = 0;
        for (i, j, w) in edges {
            if i == j {
                return Err(Error::contract(format!("self-loop on node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::contract(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if !(0.0..1.0).contains(&w) {
                return Err(Error::contract(format!("edge ({i}, {j}) weight {w} outside [0, 1)")));
            }
            adjacency[i].push((j as u32, w));
            adjacency[j].push((i as u32, w));
            edge_count += 1;
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
            if list.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::contract("duplicate edge"));
            }
        }
        Ok(SimilarityGraph {
            node_ids,
            adjacency,
            edge_count,
            min_cooc,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, idx: usize) -> &str {
        &self.node_ids[idx]
    }

    pub fn neighbors(&self, idx: usize) -> &[(u32, f64)] {
        &self.adjacency[idx]
    }

    /// Co-occurrence threshold the graph was built with (0 when unknown).
    pub fn min_cooc(&self) -> u32 {
        self.min_cooc
    }

    /// Each undirected edge once, as `(i, j, w)` with `i < j`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .filter(move |&&(j, _)| (j as usize) > i)
                .map(move |&(j, w)| (i, j as usize, w))
        })
    }

    /// Connected components, each sorted by node index, in order of their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &(u, _) in &self.adjacency[v] {
                    let u = u as usize;
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && self.components().len() == 1
    }

    /// Subgraph induced by `nodes` (sorted, distinct); indices are re-densified in that order.
    pub fn induced(&self, nodes: &[usize]) -> SimilarityGraph {
        let mut remap = vec![u32::MAX; self.node_count()];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = new as u32;
        }
        let node_ids = nodes.iter().map(|&v| self.node_ids[v].clone()).collect();
        let mut edge_count = 0;
        let adjacency = nodes
            .iter()
            .map(|&v| {
                let list: Vec<(u32, f64)> = self.adjacency[v]
                    .iter()
                    .filter(|&&(u, _)| remap[u as usize] != u32::MAX)
                    .map(|&(u, w)| (remap[u as usize], w))
                    .collect();
                edge_count += list.len();
                list
            })
            .collect();
        SimilarityGraph {
            node_ids,
            adjacency,
            edge_count: edge_count / 2,
            min_cooc: self.min_cooc,
        }
    }

    /// Writes the edge list (`i<TAB>j<TAB>weight`, `i < j`) preceded by a metadata line.
    pub fn write_edges<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "#simmap graph nodes={} edges={} min_cooc={}",
            self.node_count(),
            self.edge_count,
            self.min_cooc
        )?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{i}\t{j}\t{}", fmt_f64(w))?;
        }
        Ok(())
    }

    /// Writes the sidecar node table (`index<TAB>item_id`).
    pub fn write_nodes<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#simmap nodes={}", self.node_count())?;
        for (i, id) in self.node_ids.iter().enumerate() {
            writeln!(out, "{i}\t{id}")?;
        }
        Ok(())
    }

    /// Reads a graph from its node table and edge list.
    pub fn read<N: BufRead, E: BufRead>(nodes: N, edges: E) -> Result<Self> {
        let mut node_ids = Vec::new();
        for (k, line) in nodes.lines().enumerate() {
            let lineno = k + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if let Some((idx, id)) = crate::ingest::split_pair(&line, lineno)? {
                let idx: usize = parse_field(idx, lineno)?;
                if idx != node_ids.len() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("node index {idx} out of sequence"),
                    });
                }
                node_ids.push(id.to_string());
            }
        }
        let mut min_cooc = 0;
        let mut list = Vec::new();
        for (k, line) in edges.lines().enumerate() {
            let lineno = k + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim_end_matches('\r');
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(v) = meta
                    .split_whitespace()
                    .find_map(|kv| kv.strip_prefix("min_cooc="))
                {
                    min_cooc = parse_field(v, lineno)?;
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected i<TAB>j<TAB>weight, got {line:?}"),
                });
            }
            let i: usize = parse_field(f[0], lineno)?;
            let j: usize = parse_field(f[1], lineno)?;
            let w: f64 = parse_field(f[2], lineno)?;
            list.push((i, j, w));
        }
        SimilarityGraph::from_edges(node_ids, list, min_cooc).map_err(|e| match e {
            Error::Contract(m) => Error::Parse {
                line: 0,
                message: m,
            },
            e => e,
        })
    }
}

/// Keeps every pair with `cooc >= min_cooc` as an edge weighted `1 - cosine`.
/// Nodes are the items touched by at least one kept edge, in catalog order.
pub fn build_graph(cooc: &CoocMatrix, catalog: &ItemCatalog, min_cooc: u32) -> Result<SimilarityGraph> {
    if min_cooc == 0 {
        return Err(Error::contract("min_cooc must be at least 1"));
    }
    if cooc.item_count() != catalog.len() {
        return Err(Error::contract(format!(
            "co-occurrence matrix covers {} items, catalog has {}",
            cooc.item_count(),
            catalog.len()
        )));
    }
    let kept: Vec<_> = cooc.entries().iter().filter(|e| e.count >= min_cooc).collect();
    if kept.is_empty() {
        return Err(Error::EmptyGraph { min_cooc });
    }
    let mut remap = vec![u32::MAX; catalog.len()];
    for e in &kept {
        remap[e.a as usize] = 0;
        remap[e.b as usize] = 0;
    }
    let mut node_ids = Vec::new();
    for (old, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = node_ids.len() as u32;
            node_ids.push(catalog.id(old).to_string());
        }
    }
    let mut edges = Vec::with_capacity(kept.len());
    for e in kept {
        let (a, b) = (e.a as usize, e.b as usize);
        let cos = cosine(
            e.count as u64,
            catalog.occurrences(a) as u64,
            catalog.occurrences(b) as u64,
        )?;
        edges.push((remap[a] as usize, remap[b] as usize, 1.0 - cos));
    }
    SimilarityGraph::from_edges(node_ids, edges, min_cooc)
}

/// Induced subgraph on the largest connected component. Ties go to the
/// component containing the lexicographically smallest item id.
pub fn largest_component(graph: &SimilarityGraph) -> Result<SimilarityGraph> {
    if graph.node_count() == 0 {
        return Err(Error::contract("graph has no nodes"));
    }
    let comps = graph.components();
    let min_id = |c: &Vec<usize>| c.iter().map(|&v| graph.node_id(v)).min().unwrap_or("");
    let best = comps
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| min_id(b).cmp(min_id(a))))
        .expect("non-empty graph has a component");
    Ok(graph.induced(best))
}
