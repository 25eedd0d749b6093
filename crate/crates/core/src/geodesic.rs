//! Geodesic (shortest-path) distances over a [`SimilarityGraph`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::similarity::SimilarityGraph;

/// Default ceiling on `n` for dense all-pairs computation.
pub const DEFAULT_N_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // min-heap on distance, then on node index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths (binary-heap Dijkstra).
///
/// Fails with [`Error::Disconnected`] if any node cannot be reached.
pub fn sssp(graph: &SimilarityGraph, source: usize) -> Result<Vec<f64>> {
    let n = graph.node_count();
    if source >= n {
        return Err(Error::contract(format!("source {source} out of range for {n} nodes")));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &(u, w) in graph.neighbors(v) {
            let u = u as usize;
            let cand = d + w;
            if cand < dist[u] {
                dist[u] = cand;
                heap.push(HeapEntry { dist: cand, node: u });
            }
        }
    }
    if let Some(target) = dist.iter().position(|d| d.is_infinite()) {
        return Err(Error::Disconnected { from: source, target });
    }
    Ok(dist)
}

/// Dense row-major matrix of geodesic distances from a set of source nodes
/// to every node of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    source_index: Vec<usize>,
}

impl GeodesicMatrix {
    /// Wraps raw row-major data. `source_index[r]` is the column of row `r`'s source node.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, source_index: Vec<usize>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if source_index.len() != rows || source_index.iter().any(|&s| s >= cols) {
            return Err(Error::contract("source index does not match matrix shape"));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::contract(format!("distance {bad} is not finite and non-negative")));
        }
        Ok(GeodesicMatrix {
            rows,
            cols,
            data,
            source_index,
        })
    }

    /// A square matrix whose row `i` is the source node `i`.
    pub fn square(n: usize, data: Vec<f64>) -> Result<Self> {
        GeodesicMatrix::new(n, n, data, (0..n).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    /// The `rows x rows` block restricted to the source columns.
    pub fn source_block(&self) -> Vec<f64> {
        let l = self.rows;
        let mut out = Vec::with_capacity(l * l);
        for r in 0..l {
            let row = self.row(r);
            out.extend(self.source_index.iter().map(|&c| row[c]));
        }
        out
    }

    /// Replaces the two entries of every source pair by their minimum, so the
    /// source block is exactly symmetric. Dijkstra from either end can differ
    /// in the last bits because path sums are accumulated in opposite order.
    fn symmetrize_sources(&mut self) {
        let l = self.rows;
        for a in 0..l {
            for b in a + 1..l {
                let (ca, cb) = (self.source_index[a], self.source_index[b]);
                let ab = a * self.cols + cb;
                let ba = b * self.cols + ca;
                let m = self.data[ab].min(self.data[ba]);
                self.data[ab] = m;
                self.data[ba] = m;
            }
        }
    }

    /// Little-endian dump: `rows: u32`, `cols: u32`, then row-major `f64`s.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.rows as u32).to_le_bytes())?;
        out.write_all(&(self.cols as u32).to_le_bytes())?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary dump. The dump carries no source mapping, so the caller
    /// supplies it (identity for square matrices, landmark indices otherwise).
    pub fn read_binary<R: Read>(mut input: R, source_index: Option<Vec<usize>>) -> Result<Self> {
        let mut header = [0u8; 8];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::Parse {
                line: 0,
                message: format!("truncated geodesic header (byte offset 0): {e}"),
            })?;
        let rows = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Parse {
                line: 0,
                message: e.to_string(),
            })?;
        if bytes.len() != rows * cols * 8 {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "geodesic dump declares {rows}x{cols} but holds {} bytes of data (byte offset 8)",
                    bytes.len()
                ),
            });
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let source_index = match source_index {
            Some(s) => s,
            None if rows == cols => (0..rows).collect(),
            None => {
                return Err(Error::contract(
                    "non-square geodesic dump needs its landmark indices",
                ))
            }
        };
        GeodesicMatrix::new(rows, cols, data, source_index)
    }
}

fn rows_from(graph: &SimilarityGraph, sources: &[usize]) -> Result<GeodesicMatrix> {
    let n = graph.node_count();
    let rows: Vec<Vec<f64>> = sources
        .par_iter()
        .map(|&s| sssp(graph, s))
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(sources.len() * n);
    for r in rows {
        data.extend(r);
    }
    let mut m = GeodesicMatrix {
        rows: sources.len(),
        cols: n,
        data,
        source_index: sources.to_vec(),
    };
    m.symmetrize_sources();
    Ok(m)
}

/// Full `n x n` geodesic matrix. Refuses graphs with more than `n_cap` nodes.
pub fn all_pairs(graph: &SimilarityGraph, n_cap: usize) -> Result<GeodesicMatrix> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::contract("graph has no nodes"));
    }
    if n > n_cap {
        return Err(Error::Resource(format!(
            "all-pairs geodesics for {n} nodes exceed the cap of {n_cap}; use l-isomap with landmarks"
        )));
    }
    let sources: Vec<usize> = (0..n).collect();
    rows_from(graph, &sources)
}

/// `l x n` geodesic rows from each landmark, in landmark order.
pub fn landmark_rows(graph: &SimilarityGraph, landmarks: &[usize]) -> Result<GeodesicMatrix> {
    if landmarks.is_empty() {
        return Err(Error::contract("no landmarks given"));
    }
    let mut seen = vec![false; graph.node_count()];
    for &l in landmarks {
        if l >= seen.len() {
            return Err(Error::contract(format!("landmark {l} out of range")));
        }
        if std::mem::replace(&mut seen[l], true) {
            return Err(Error::contract(format!("landmark {l} listed twice")));
        }
    }
    rows_from(graph, landmarks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        let ids = (0..n).map(|i| i.to_string()).collect();
        SimilarityGraph::from_edges(ids, edges.iter().copied(), 1).unwrap()
    }

    #[test]
    fn path_graph_distances() {
        let g = graph(3, &[(0, 1, 0.25), (1, 2, 0.5)]);
        let d = sssp(&g, 0).unwrap();
        assert_eq!(d, vec![0.0, 0.25, 0.75]);
        let g = graph(3, &[(0, 1, 0.2), (1, 2, 0.3)]);
        assert!((sssp(&g, 0).unwrap()[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn source_distance_is_zero() {
        let g = graph(3, &[(0, 1, 0.2), (1, 2, 0.3)]);
        for s in 0..3 {
            assert_eq!(sssp(&g, s).unwrap()[s], 0.0);
        }
    }

    #[test]
    fn unreachable_is_an_error() {
        let g = graph(4, &[(0, 1, 0.2), (2, 3, 0.3)]);
        assert!(matches!(sssp(&g, 0), Err(Error::Disconnected { from: 0, target: 2 })));
        assert!(matches!(sssp(&g, 9), Err(Error::Contract(_))));
    }

    #[test]
    fn triangle_all_pairs() {
        let g = graph(3, &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)]);
        let m = all_pairs(&g, DEFAULT_N_CAP).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn single_node() {
        let g = graph(1, &[]);
        let m = all_pairs(&g, DEFAULT_N_CAP).unwrap();
        assert_eq!((m.rows(), m.cols(), m.data()), (1, 1, &[0.0][..]));
    }

    #[test]
    fn cap_refuses() {
        let g = graph(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let err = all_pairs(&g, 2).unwrap_err();
        assert!(matches!(err, Error::Resource(ref m) if m.contains("l-isomap")));
    }

    #[test]
    fn landmark_rows_match_sssp() {
        let g = graph(4, &[(0, 1, 0.1), (1, 2, 0.7), (2, 3, 0.3), (0, 3, 0.9)]);
        let m = landmark_rows(&g, &[2]).unwrap();
        assert_eq!(m.row(0), sssp(&g, 2).unwrap().as_slice());
        let all = landmark_rows(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(all, all_pairs(&g, 10).unwrap());
        assert!(landmark_rows(&g, &[1, 1]).is_err());
        assert!(landmark_rows(&g, &[]).is_err());
    }

    #[test]
    fn binary_dump_round_trip() {
        let g = graph(4, &[(0, 1, 0.1), (1, 2, 0.7), (2, 3, 0.3)]);
        let m = landmark_rows(&g, &[3, 1]).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], &[2, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(buf.len(), 8 + 2 * 4 * 8);
        let back = GeodesicMatrix::read_binary(buf.as_slice(), Some(vec![3, 1])).unwrap();
        assert_eq!(back, m);
        assert!(GeodesicMatrix::read_binary(&buf[..20], Some(vec![3, 1])).is_err());
        assert!(GeodesicMatrix::read_binary(buf.as_slice(), None).is_err());
    }
}
