//! Landmark selection for L-Isomap: uniform random and greedy MaxMin.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::sssp;
use crate::ingest::parse_field;
use crate::similarity::SimilarityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkStrategy {
    Random,
    MaxMin,
}

impl FromStr for LandmarkStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(LandmarkStrategy::Random),
            "maxmin" => Ok(LandmarkStrategy::MaxMin),
            other => Err(Error::contract(format!(
                "unknown landmark strategy {other:?} (expected random|maxmin)"
            ))),
        }
    }
}

impl fmt::Display for LandmarkStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LandmarkStrategy::Random => "random",
            LandmarkStrategy::MaxMin => "maxmin",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    indices: Vec<usize>,
    strategy: LandmarkStrategy,
    /// Number of random seeds (MaxMin only; equals `l` for random selection).
    seed_count: usize,
    rng_seed: u64,
}

impl LandmarkSet {
    pub fn new(
        indices: Vec<usize>,
        strategy: LandmarkStrategy,
        seed_count: usize,
        rng_seed: u64,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::contract("landmark set is empty"));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("landmark indices are not distinct"));
        }
        if seed_count == 0 || seed_count > indices.len() {
            return Err(Error::contract(format!(
                "seed count {seed_count} must lie in 1..={}",
                indices.len()
            )));
        }
        Ok(LandmarkSet {
            indices,
            strategy,
            seed_count,
            rng_seed,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn strategy(&self) -> LandmarkStrategy {
        self.strategy
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "#strategy={} l={} s={} rng_seed={}",
            self.strategy,
            self.len(),
            self.seed_count,
            self.rng_seed
        )?;
        for i in &self.indices {
            writeln!(out, "{i}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut strategy = None;
        let mut seed_count = None;
        let mut rng_seed = None;
        let mut declared_l = None;
        let mut indices = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let lineno = k + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("strategy", v)) => strategy = Some(v.parse()?),
                        Some(("l", v)) => declared_l = Some(parse_field::<usize>(v, lineno)?),
                        Some(("s", v)) => seed_count = Some(parse_field::<usize>(v, lineno)?),
                        Some(("rng_seed", v)) => rng_seed = Some(parse_field::<u64>(v, lineno)?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            indices.push(parse_field::<usize>(line, lineno)?);
        }
        let missing = |what: &str| Error::Parse {
            line: 1,
            message: format!("landmark file lacks {what} in its header"),
        };
        if declared_l.is_some_and(|l| l != indices.len()) {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "header declares l={} but file lists {} indices",
                    declared_l.unwrap(),
                    indices.len()
                ),
            });
        }
        LandmarkSet::new(
            indices,
            strategy.ok_or_else(|| missing("strategy"))?,
            seed_count.ok_or_else(|| missing("s"))?,
            rng_seed.ok_or_else(|| missing("rng_seed"))?,
        )
    }
}

/// `l` distinct node indices drawn uniformly without replacement.
pub fn select_random(n: usize, l: usize, rng_seed: u64) -> Result<LandmarkSet> {
    if l == 0 || l > n {
        return Err(Error::contract(format!("landmark count {l} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let indices = rand::seq::index::sample(&mut rng, n, l).into_vec();
    LandmarkSet::new(indices, LandmarkStrategy::Random, l, rng_seed)
}

/// `s` random seeds followed by greedy farthest-point picks up to `l` landmarks.
pub fn select_maxmin(graph: &SimilarityGraph, s: usize, l: usize, rng_seed: u64) -> Result<LandmarkSet> {
    let n = graph.node_count();
    if s == 0 || s > l || l > n {
        return Err(Error::contract(format!(
            "maxmin needs 1 <= s <= l <= n, got s={s}, l={l}, n={n}"
        )));
    }
    let seeds = select_random(n, s, rng_seed)?;
    let indices = extend_maxmin(graph, seeds.indices(), l)?;
    LandmarkSet::new(indices, LandmarkStrategy::MaxMin, s, rng_seed)
}

/// Greedily extends `seeds` to `l` landmarks. Each new landmark is the
/// non-landmark node with the largest geodesic distance to its nearest
/// landmark; ties go to the smallest node index.
pub fn extend_maxmin(graph: &SimilarityGraph, seeds: &[usize], l: usize) -> Result<Vec<usize>> {
    let n = graph.node_count();
    if seeds.is_empty() || seeds.len() > l || l > n {
        return Err(Error::contract(format!(
            "maxmin needs 1 <= s <= l <= n, got s={}, l={l}, n={n}",
            seeds.len()
        )));
    }
    let mut chosen = vec![false; n];
    for &s in seeds {
        if s >= n || std::mem::replace(&mut chosen[s], true) {
            return Err(Error::contract(format!("invalid or repeated seed {s}")));
        }
    }
    let rows: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| sssp(graph, s))
        .collect::<Result<_>>()?;
    let mut min_dist = vec![f64::INFINITY; n];
    for row in &rows {
        for (m, &d) in min_dist.iter_mut().zip(row) {
            *m = m.min(d);
        }
    }
    let mut out = seeds.to_vec();
    while out.len() < l {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if chosen[v] {
                continue;
            }
            if best.is_none_or(|b| min_dist[v] > min_dist[b]) {
                best = Some(v);
            }
        }
        let next = best.expect("l <= n leaves a candidate");
        chosen[next] = true;
        out.push(next);
        if out.len() < l {
            let row = sssp(graph, next)?;
            for (m, d) in min_dist.iter_mut().zip(row) {
                *m = m.min(d);
            }
        }
    }
    Ok(out)
}
