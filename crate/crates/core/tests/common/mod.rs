//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::Rng;
use simmap::similarity::SimilarityGraph;

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i:04}")).collect()
}

/// Random connected graph: a random spanning tree plus `extra` random edges.
/// Weights are multiples of 1/64 so path sums are exact in floating point.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> SimilarityGraph {
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let w = |rng: &mut R| rng.random_range(1..64) as f64 / 64.0;
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v), w(rng));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.entry((a.min(b), a.max(b))).or_insert_with(|| w(rng));
        }
    }
    SimilarityGraph::from_edges(ids(n), edges.into_iter().map(|((a, b), w)| (a, b, w)), 1).unwrap()
}

/// Random connected graph with continuous weights in (0, 1).
pub fn random_graph_continuous<R: Rng>(rng: &mut R, n: usize, extra: usize) -> SimilarityGraph {
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v), rng.random_range(0.05..0.95));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            let w = rng.random_range(0.05..0.95);
            edges.entry((a.min(b), a.max(b))).or_insert(w);
        }
    }
    SimilarityGraph::from_edges(ids(n), edges.into_iter().map(|((a, b), w)| (a, b, w)), 1).unwrap()
}

pub fn floyd_warshall(g: &SimilarityGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    for (i, j, w) in g.edges() {
        d[i * n + j] = d[i * n + j].min(w);
        d[j * n + i] = d[j * n + i].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    d
}

/// Pair counts by checking every pair of items against every profile.
pub fn brute_cooc(profiles: &[Vec<String>]) -> BTreeMap<(String, String), u32> {
    let sets: Vec<BTreeSet<&String>> = profiles.iter().map(|p| p.iter().collect()).collect();
    let items: BTreeSet<&String> = profiles.iter().flatten().collect();
    let items: Vec<&String> = items.into_iter().collect();
    let mut out = BTreeMap::new();
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let c = sets
                .iter()
                .filter(|s| s.contains(items[a]) && s.contains(items[b]))
                .count() as u32;
            if c > 0 {
                out.insert((items[a].clone(), items[b].clone()), c);
            }
        }
    }
    out
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = euclid(&points[i], &points[j]);
        }
    }
    d
}

/// RMS residual after the best rigid alignment of `a` onto `b` (both `n x d`,
/// row-major), via orthogonal Procrustes on centered coordinates.
pub fn procrustes_rms(a: &[f64], b: &[f64], n: usize, d: usize) -> f64 {
    let center = |x: &[f64]| {
        let mut m = DMatrix::from_row_slice(n, d, x);
        for c in 0..d {
            let mean = m.column(c).mean();
            m.column_mut(c).add_scalar_mut(-mean);
        }
        m
    };
    let (ma, mb) = (center(a), center(b));
    let svd = (ma.transpose() * &mb).svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    let diff = ma * r - mb;
    (diff.norm_squared() / n as f64).sqrt()
}

/// Pearson correlation computed directly from its definition.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile_type7(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    v[lo] + (h - lo as f64) * (v[(lo + 1).min(v.len() - 1)] - v[lo])
}
