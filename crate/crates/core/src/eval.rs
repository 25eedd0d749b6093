//! Map-quality metrics.
//!
//! * residual variance `1 - r²` between reference (geodesic) distances and
//!   embedded Euclidean distances, per number of dimensions;
//! * nearest-neighbor queries;
//! * label similarity: cosine between labels over the items carrying them,
//!   and the mean label cosine between two items' label sets;
//! * neighborhood reports (label similarity between sampled items and their
//!   `m` nearest neighbors) and smoothness of label transitions along lines.

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::geodesic::GeodesicMatrix;
use crate::ingest::{LabelTable, ProfileStore};
use crate::mds::Embedding;

/// Above this many candidate pairs, residual variance is estimated on a sample.
/// Equals the exact pair count of a 5,000-item square matrix.
pub const MAX_EXACT_PAIRS: usize = 5000 * 4999 / 2;
pub const SAMPLED_PAIRS: usize = 2_000_000;

const CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, Copy)]
pub struct ResidualOptions {
    pub max_exact_pairs: usize,
    pub sample_pairs: usize,
    pub rng_seed: u64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions {
            max_exact_pairs: MAX_EXACT_PAIRS,
            sample_pairs: SAMPLED_PAIRS,
            rng_seed: 0,
        }
    }
}

/// Residual variance for `k = 1..=k_max` and how it was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCurve {
    pub values: Vec<f64>,
    pub pairs: usize,
    pub sampled: bool,
    /// `"n x n"` or `"l x n"`.
    pub reference: &'static str,
}

impl ResidualCurve {
    pub fn write_tsv<W: Write>(&self, mut out: W, meta: &str) -> std::io::Result<()> {
        writeln!(
            out,
            "#{meta} reference={} pairs={} sampled={}",
            self.reference.replace(' ', ""),
            self.pairs,
            self.sampled
        )?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{}\t{}", k + 1, fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// Reference distances, their (row a, row b) embedding pairs, and whether they were sampled.
type PairSample = (Vec<f64>, Vec<(u32, u32)>, bool);

fn reference_pairs(
    dref: &GeodesicMatrix,
    emb: &Embedding,
    opts: &ResidualOptions,
) -> Result<PairSample> {
    let n = emb.len();
    if dref.cols() != n {
        return Err(Error::contract(format!(
            "reference matrix has {} columns, embedding has {n} items",
            dref.cols()
        )));
    }
    let rows = dref.rows();
    let src = dref.source_index();
    let square = dref.is_square();
    let total = if square {
        n * (n - 1) / 2
    } else {
        rows * (n - 1)
    };
    if total == 0 {
        return Err(Error::Degenerate("no item pairs to correlate".into()));
    }
    let mut dist = Vec::new();
    let mut pairs = Vec::new();
    let sampled = total > opts.max_exact_pairs;
    if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        dist.reserve(opts.sample_pairs);
        pairs.reserve(opts.sample_pairs);
        while pairs.len() < opts.sample_pairs {
            let r = rng.random_range(0..rows);
            let c = rng.random_range(0..n);
            if c == src[r] {
                continue;
            }
            dist.push(dref.get(r, c));
            pairs.push((src[r] as u32, c as u32));
        }
    } else {
        dist.reserve(total);
        pairs.reserve(total);
        for (r, &s) in src.iter().enumerate() {
            let start = if square { r + 1 } else { 0 };
            for c in start..n {
                if c == s {
                    continue;
                }
                dist.push(dref.get(r, c));
                pairs.push((s as u32, c as u32));
            }
        }
    }
    Ok((dist, pairs, sampled))
}

fn chunked_sum(values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    values
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&v| f(v)).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Residual variance curve for `k = 1..=k_max` embedding dimensions.
///
/// A square reference uses each unordered pair once; an `l x n` reference
/// uses every (landmark, other item) pair.
pub fn residual_variance_curve(
    dref: &GeodesicMatrix,
    emb: &Embedding,
    k_max: usize,
    opts: &ResidualOptions,
) -> Result<ResidualCurve> {
    if k_max == 0 || k_max > emb.dims() {
        return Err(Error::contract(format!(
            "k_max {k_max} must lie in 1..={}",
            emb.dims()
        )));
    }
    let (dist, pairs, sampled) = reference_pairs(dref, emb, opts)?;
    let count = dist.len() as f64;
    let mean_d = chunked_sum(&dist, |v| v) / count;
    let var_d = chunked_sum(&dist, |v| (v - mean_d) * (v - mean_d));
    if var_d == 0.0 {
        return Err(Error::Degenerate("reference distances have zero variance".into()));
    }
    let d = emb.dims();
    let coords = emb.coords();
    let mut acc = vec![0.0f64; pairs.len()];
    let mut values = Vec::with_capacity(k_max);
    let mut emb_dist = vec![0.0f64; pairs.len()];
    for k in 0..k_max {
        acc.par_chunks_mut(CHUNK)
            .zip(pairs.par_chunks(CHUNK))
            .zip(emb_dist.par_chunks_mut(CHUNK))
            .for_each(|((acc, pairs), out)| {
                for ((a, &(i, j)), o) in acc.iter_mut().zip(pairs).zip(out.iter_mut()) {
                    let diff = coords[i as usize * d + k] - coords[j as usize * d + k];
                    *a += diff * diff;
                    *o = a.sqrt();
                }
            });
        let mean_e = chunked_sum(&emb_dist, |v| v) / count;
        let (cov, var_e) = emb_dist
            .par_chunks(CHUNK)
            .zip(dist.par_chunks(CHUNK))
            .map(|(e, r)| {
                e.iter().zip(r).fold((0.0, 0.0), |(c, v), (&e, &r)| {
                    let de = e - mean_e;
                    (c + de * (r - mean_d), v + de * de)
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |(c, v), (c2, v2)| (c + c2, v + v2));
        if var_e == 0.0 {
            return Err(Error::Degenerate(format!(
                "embedded distances over the first {} dimension(s) have zero variance",
                k + 1
            )));
        }
        let r2 = (cov * cov) / (var_d * var_e);
        values.push((1.0 - r2).clamp(0.0, 1.0));
    }
    Ok(ResidualCurve {
        values,
        pairs: pairs.len(),
        sampled,
        reference: if dref.is_square() { "n x n" } else { "l x n" },
    })
}

/// Residual variance using the first `k` embedding dimensions.
pub fn residual_variance(
    dref: &GeodesicMatrix,
    emb: &Embedding,
    k: usize,
    opts: &ResidualOptions,
) -> Result<f64> {
    let curve = residual_variance_curve(dref, emb, k, opts)?;
    Ok(curve.values[k - 1])
}

/// The `k` nearest items to `item` with their distances, using the first
/// `dims` coordinates. Sorted by distance, ties by index; `item` excluded.
pub fn knn_with_distances(emb: &Embedding, item: usize, k: usize, dims: usize) -> Result<Vec<(usize, f64)>> {
    let n = emb.len();
    if item >= n {
        return Err(Error::contract(format!("item {item} out of range for {n} items")));
    }
    if k == 0 || k >= n {
        return Err(Error::contract(format!("k={k} must lie in 1..{n}")));
    }
    if dims == 0 || dims > emb.dims() {
        return Err(Error::contract(format!("dims={dims} must lie in 1..={}", emb.dims())));
    }
    let q = &emb.row(item)[..dims];
    let mut cand: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != item)
        .map(|j| {
            let d2: f64 = q
                .iter()
                .zip(&emb.row(j)[..dims])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, j)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    Ok(cand.into_iter().map(|(d2, j)| (j, d2.sqrt())).collect())
}

/// Indices of the `k` nearest items to `item` (see [`knn_with_distances`]).
pub fn knn(emb: &Embedding, item: usize, k: usize, dims: usize) -> Result<Vec<usize>> {
    Ok(knn_with_distances(emb, item, k, dims)?
        .into_iter()
        .map(|(j, _)| j)
        .collect())
}

/// Symmetric label-by-label cosine table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSimilarityTable {
    labels: usize,
    sim: Vec<f64>,
    /// Items (or, for artists, users) supporting each label.
    support: Vec<u32>,
}

impl LabelSimilarityTable {
    fn from_counts(labels: usize, support: Vec<u32>, cooc: &[u32]) -> Self {
        let mut sim = vec![0.0; labels * labels];
        for a in 0..labels {
            for b in 0..labels {
                let (sa, sb) = (support[a] as f64, support[b] as f64);
                if sa > 0.0 && sb > 0.0 {
                    sim[a * labels + b] = (cooc[a * labels + b] as f64 / (sa * sb).sqrt()).min(1.0);
                }
            }
        }
        LabelSimilarityTable {
            labels,
            sim,
            support,
        }
    }

    pub fn get(&self, a: u32, b: u32) -> f64 {
        self.sim[a as usize * self.labels + b as usize]
    }

    pub fn support(&self, label: u32) -> u32 {
        self.support[label as usize]
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }
}

/// Label cosine over items: items carrying both labels divided by the
/// geometric mean of the items carrying each.
pub fn label_similarity_table(labels: &LabelTable) -> Result<LabelSimilarityTable> {
    if labels.is_empty() {
        return Err(Error::contract("label table is empty"));
    }
    let l = labels.label_count();
    let mut support = vec![0u32; l];
    let mut cooc = vec![0u32; l * l];
    for (_, ls) in labels.items() {
        for &a in ls {
            support[a as usize] += 1;
            for &b in ls {
                cooc[a as usize * l + b as usize] += 1;
            }
        }
    }
    Ok(LabelSimilarityTable::from_counts(l, support, &cooc))
}

/// Artist cosine over users: an artist occurs in a profile when any of its
/// songs does, and two artists co-occur when songs by both share a profile.
/// Same-artist similarity is therefore 1.
pub fn artist_similarity_table(store: &ProfileStore, artists: &LabelTable) -> Result<LabelSimilarityTable> {
    if artists.is_empty() {
        return Err(Error::contract("artist table is empty"));
    }
    let l = artists.label_count();
    let cat = store.catalog();
    let item_artists: Vec<Option<&[u32]>> = (0..cat.len()).map(|i| artists.labels_of(cat.id(i))).collect();
    let mut support = vec![0u32; l];
    let mut cooc = vec![0u32; l * l];
    let mut present = Vec::new();
    let mut seen = vec![false; l];
    for (_, items) in store.users() {
        present.clear();
        for &it in items {
            for &a in item_artists[it as usize].unwrap_or(&[]) {
                if !std::mem::replace(&mut seen[a as usize], true) {
                    present.push(a as usize);
                }
            }
        }
        for &a in &present {
            support[a] += 1;
            for &b in &present {
                cooc[a * l + b] += 1;
            }
        }
        for &a in &present {
            seen[a] = false;
        }
    }
    Ok(LabelSimilarityTable::from_counts(l, support, &cooc))
}

/// Mean pairwise label cosine between two label sets.
pub fn label_set_similarity(a: &[u32], b: &[u32], table: &LabelSimilarityTable) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let total: f64 = a
        .iter()
        .flat_map(|&x| b.iter().map(move |&y| table.get(x, y)))
        .sum();
    total / (a.len() * b.len()) as f64
}

/// Mean label cosine between two items; `None` when either is unlabeled.
pub fn label_based_similarity(
    a: &str,
    b: &str,
    labels: &LabelTable,
    table: &LabelSimilarityTable,
) -> Option<f64> {
    Some(label_set_similarity(labels.labels_of(a)?, labels.labels_of(b)?, table))
}

/// Summary of one neighborhood size across sampled items.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodRow {
    pub size: usize,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Half-width of the normal-approximation 95% interval of the mean.
    pub ci95: f64,
}

impl NeighborhoodRow {
    pub fn from_samples(size: usize, samples: Vec<f64>) -> Self {
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            sorted.iter().sum::<f64>() / n as f64
        };
        let ci95 = if n < 2 {
            0.0
        } else {
            let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        };
        NeighborhoodRow {
            size,
            mean,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
            ci95,
            samples,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodReport {
    pub rows: Vec<NeighborhoodRow>,
    /// Embedding rows of the sampled items, in sampling order.
    pub sampled_items: Vec<usize>,
}

impl NeighborhoodReport {
    pub fn write_tsv<W: Write>(&self, mut out: W, meta: &str) -> std::io::Result<()> {
        writeln!(out, "#{meta} sample={}", self.sampled_items.len())?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.size,
                fmt_f64(r.mean),
                fmt_f64(r.median),
                fmt_f64(r.q1),
                fmt_f64(r.q3),
                fmt_f64(r.ci95)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NeighborhoodParams {
    /// Strictly increasing neighborhood sizes.
    pub sizes: Vec<usize>,
    /// Number of labeled items to sample.
    pub sample: usize,
    /// Leading embedding dimensions to use; `None` for all.
    pub dims: Option<usize>,
    pub rng_seed: u64,
}

impl NeighborhoodParams {
    pub fn new(sizes: Vec<usize>, sample: usize, rng_seed: u64) -> Self {
        NeighborhoodParams {
            sizes,
            sample,
            dims: None,
            rng_seed,
        }
    }
}

/// Default number of sampled items for neighborhood reports.
pub const DEFAULT_SAMPLE: usize = 50;

fn labeled_rows<'a>(emb: &Embedding, labels: &'a LabelTable) -> Vec<Option<&'a [u32]>> {
    emb.item_ids().iter().map(|id| labels.labels_of(id)).collect()
}

fn resolve_dims(emb: &Embedding, dims: Option<usize>) -> Result<usize> {
    let d = dims.unwrap_or(emb.dims());
    if d == 0 || d > emb.dims() {
        return Err(Error::contract(format!("dims={d} must lie in 1..={}", emb.dims())));
    }
    Ok(d)
}

/// For each sampled labeled item and each size `m`: the mean label
/// similarity between the item and its `m` nearest neighbors. Unlabeled
/// neighbors are skipped; a neighborhood with no labeled neighbor yields no
/// sample.
pub fn neighborhood_label_report(
    emb: &Embedding,
    labels: &LabelTable,
    table: &LabelSimilarityTable,
    params: &NeighborhoodParams,
) -> Result<NeighborhoodReport> {
    let sizes = &params.sizes;
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("neighborhood sizes must be positive and strictly increasing"));
    }
    let dims = resolve_dims(emb, params.dims)?;
    let max_size = *sizes.last().unwrap();
    if max_size >= emb.len() {
        return Err(Error::contract(format!(
            "neighborhood size {max_size} needs more than {} items",
            emb.len()
        )));
    }
    let row_labels = labeled_rows(emb, labels);
    let candidates: Vec<usize> = (0..emb.len()).filter(|&i| row_labels[i].is_some()).collect();
    if params.sample == 0 || params.sample > candidates.len() {
        return Err(Error::contract(format!(
            "sample {} must lie in 1..={} labeled items",
            params.sample,
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let sampled: Vec<usize> = sample_indices(&mut rng, candidates.len(), params.sample)
        .into_iter()
        .map(|k| candidates[k])
        .collect();

    let per_item: Vec<Vec<Option<f64>>> = sampled
        .par_iter()
        .map(|&item| {
            let own = row_labels[item].expect("sampled among labeled items");
            let nn = knn(emb, item, max_size, dims)?;
            let mut out = Vec::with_capacity(sizes.len());
            let (mut sum, mut count, mut taken) = (0.0, 0usize, 0usize);
            for &m in sizes {
                for &j in &nn[taken..m] {
                    if let Some(other) = row_labels[j] {
                        sum += label_set_similarity(own, other, table);
                        count += 1;
                    }
                }
                taken = m;
                out.push((count > 0).then(|| sum / count as f64));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let rows = sizes
        .iter()
        .enumerate()
        .map(|(s, &size)| {
            let samples = per_item.iter().filter_map(|v| v[s]).collect();
            NeighborhoodRow::from_samples(size, samples)
        })
        .collect();
    Ok(NeighborhoodReport {
        rows,
        sampled_items: sampled,
    })
}

/// Artist similarity by neighborhood size. `artist_sim` should come from
/// [`artist_similarity_table`].
pub fn artist_similarity_report(
    emb: &Embedding,
    artist_labels: &LabelTable,
    artist_sim: &LabelSimilarityTable,
    params: &NeighborhoodParams,
) -> Result<NeighborhoodReport> {
    neighborhood_label_report(emb, artist_labels, artist_sim, params)
}

/// One line through the map and the label smoothness along it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientLine {
    /// Embedding row the line ends at.
    pub target: usize,
    /// Selected items in traversal order (from the origin end towards the target).
    pub points: Vec<usize>,
    pub smoothness: f64,
}

/// Distance from `x` to the segment `0 -> t`.
fn segment_distance(x: &[f64], t: &[f64]) -> f64 {
    let tt: f64 = t.iter().map(|v| v * v).sum();
    let tau = if tt == 0.0 {
        0.0
    } else {
        (x.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / tt).clamp(0.0, 1.0)
    };
    x.iter()
        .zip(t)
        .map(|(a, b)| (a - tau * b) * (a - tau * b))
        .sum::<f64>()
        .sqrt()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smoothness of label transitions along a segment from the origin to a
/// random labeled item: the `p` labeled items closest to the segment are
/// ordered by decreasing distance to the target and the label similarity of
/// consecutive items is averaged.
pub fn gradient_line_with<R: Rng>(
    emb: &Embedding,
    labels: &LabelTable,
    table: &LabelSimilarityTable,
    p: usize,
    dims: Option<usize>,
    rng: &mut R,
) -> Result<GradientLine> {
    if p < 2 {
        return Err(Error::contract("a line needs at least 2 points"));
    }
    let dims = resolve_dims(emb, dims)?;
    let row_labels = labeled_rows(emb, labels);
    let labeled: Vec<usize> = (0..emb.len()).filter(|&i| row_labels[i].is_some()).collect();
    if labeled.len() < p {
        return Err(Error::contract(format!(
            "{} labeled items, need at least p={p}",
            labeled.len()
        )));
    }
    let target = labeled[rng.random_range(0..labeled.len())];
    let t = &emb.row(target)[..dims];
    let mut near: Vec<(f64, usize)> = labeled
        .iter()
        .map(|&i| (segment_distance(&emb.row(i)[..dims], t), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if p < near.len() {
        near.select_nth_unstable_by(p, cmp);
        near.truncate(p);
    }
    let mut ordered: Vec<(f64, usize)> = near
        .into_iter()
        .map(|(_, i)| (euclid(&emb.row(i)[..dims], t), i))
        .collect();
    ordered.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let points: Vec<usize> = ordered.into_iter().map(|(_, i)| i).collect();
    let smoothness = points
        .windows(2)
        .map(|w| label_set_similarity(row_labels[w[0]].unwrap(), row_labels[w[1]].unwrap(), table))
        .sum::<f64>()
        / (p - 1) as f64;
    Ok(GradientLine {
        target,
        points,
        smoothness,
    })
}

/// [`gradient_line_with`] seeded by `rng_seed`.
pub fn gradient_along_line(
    emb: &Embedding,
    labels: &LabelTable,
    table: &LabelSimilarityTable,
    p: usize,
    dims: Option<usize>,
    rng_seed: u64,
) -> Result<GradientLine> {
    gradient_line_with(emb, labels, table, p, dims, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

/// `lines` independent random lines drawn from one seeded stream.
pub fn gradient_lines(
    emb: &Embedding,
    labels: &LabelTable,
    table: &LabelSimilarityTable,
    p: usize,
    dims: Option<usize>,
    lines: usize,
    rng_seed: u64,
) -> Result<Vec<GradientLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..lines)
        .map(|_| gradient_line_with(emb, labels, table, p, dims, &mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::LabelKind;
    use crate::mds::{Method, Provenance};

    fn emb(points: &[&[f64]]) -> Embedding {
        let d = points[0].len();
        Embedding::new(
            points.iter().flat_map(|p| p.to_vec()).collect(),
            d,
            vec![1.0; d],
            (0..points.len()).map(|i| format!("i{i}")).collect(),
            Provenance {
                method: Method::Mds,
                dims: d,
                min_cooc: 0,
                eigen_seed: 0,
                clamped_dims: 0,
                landmarks: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn knn_line() {
        let e = emb(&[&[0.0], &[1.0], &[3.0]]);
        assert_eq!(knn(&e, 1, 1, 1).unwrap(), vec![0]);
        assert_eq!(knn(&e, 1, 2, 1).unwrap(), vec![0, 2]);
        assert!(knn(&e, 1, 3, 1).is_err());
        assert!(knn(&e, 1, 0, 1).is_err());
    }

    #[test]
    fn knn_ties_by_index() {
        let e = emb(&[&[0.0], &[-1.0], &[1.0]]);
        assert_eq!(knn(&e, 0, 2, 1).unwrap(), vec![1, 2]);
    }

    #[test]
    fn exact_embedding_has_zero_residual() {
        let e = emb(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 2.0], &[3.0, 1.0]]);
        let n = 4;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = e.distance(i, j, 2);
            }
        }
        let g = GeodesicMatrix::square(n, d).unwrap();
        let c = residual_variance_curve(&g, &e, 2, &ResidualOptions::default()).unwrap();
        assert!(c.values[1] < 1e-12);
        assert!(c.values[0] > 0.0);
        assert_eq!(c.pairs, 6);
        assert!(!c.sampled);
    }

    #[test]
    fn sampling_kicks_in_above_limit() {
        let e = emb(&[&[0.0], &[1.0], &[2.5], &[4.0]]);
        let n = 4;
        let d: Vec<f64> = (0..n * n).map(|k| e.distance(k / n, k % n, 1)).collect();
        let g = GeodesicMatrix::square(n, d).unwrap();
        let opts = ResidualOptions {
            max_exact_pairs: 3,
            sample_pairs: 100,
            rng_seed: 5,
        };
        let c = residual_variance_curve(&g, &e, 1, &opts).unwrap();
        assert!(c.sampled);
        assert_eq!(c.pairs, 100);
        assert!(c.values[0] < 1e-12);
    }

    #[test]
    fn degenerate_reference() {
        let e = emb(&[&[0.0], &[1.0], &[2.0]]);
        let g = GeodesicMatrix::square(3, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            residual_variance(&g, &e, 1, &ResidualOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    fn genre_table(recs: &[(&str, &str)]) -> LabelTable {
        LabelTable::from_records(LabelKind::Genre, recs.iter().copied())
    }

    #[test]
    fn label_table_cases() {
        let t = genre_table(&[("a", "g"), ("b", "g")]);
        let s = label_similarity_table(&t).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        let t = genre_table(&[("a", "x"), ("b", "y")]);
        let s = label_similarity_table(&t).unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        assert!(label_similarity_table(&genre_table(&[])).is_err());
    }

    #[test]
    fn hand_computed_label_similarity() {
        // x on {a, b, c}, y on {a, d}: cooc(x,y)=1, sim = 1/sqrt(3*2)
        let t = genre_table(&[("a", "x"), ("a", "y"), ("b", "x"), ("c", "x"), ("d", "y")]);
        let s = label_similarity_table(&t).unwrap();
        let sxy = 1.0 / 6f64.sqrt();
        assert!((s.get(0, 1) - sxy).abs() < 1e-15);
        // G_A = {x, y} (item a), G_B = {y} (item d): (sim(x,y) + 1) / 2
        let v = label_based_similarity("a", "d", &t, &s).unwrap();
        assert!((v - (sxy + 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(label_based_similarity("d", "a", &t, &s), Some(v));
        assert_eq!(label_based_similarity("a", "zzz", &t, &s), None);
    }

    #[test]
    fn shared_single_label_is_one() {
        let t = genre_table(&[("a", "g"), ("b", "g"), ("b", "h")]);
        let s = label_similarity_table(&t).unwrap();
        assert_eq!(label_based_similarity("a", "a", &t, &s), Some(1.0));
    }

    #[test]
    fn row_statistics() {
        let r = NeighborhoodRow::from_samples(3, vec![4.0, 1.0, 3.0, 2.0]);
        assert_eq!(r.mean, 2.5);
        assert_eq!(r.median, 2.5);
        assert_eq!(r.q1, 1.75);
        assert_eq!(r.q3, 3.25);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((r.ci95 - 1.96 * sd / 2.0).abs() < 1e-15);
        let one = NeighborhoodRow::from_samples(1, vec![0.7]);
        assert_eq!((one.median, one.ci95), (0.7, 0.0));
    }

    #[test]
    fn neighborhood_single_sample_nearest() {
        let e = emb(&[&[0.0], &[1.0], &[5.0]]);
        let t = genre_table(&[("i0", "x"), ("i1", "y"), ("i2", "x"), ("i3", "y"), ("i3", "x")]);
        let s = label_similarity_table(&t).unwrap();
        let params = NeighborhoodParams::new(vec![1], 1, 0);
        let r = neighborhood_label_report(&e, &t, &s, &params).unwrap();
        let item = r.sampled_items[0];
        let nn = knn(&e, item, 1, 1).unwrap()[0];
        let want = label_based_similarity(e.item_id(item), e.item_id(nn), &t, &s).unwrap();
        assert_eq!(r.rows[0].samples, vec![want]);
    }

    #[test]
    fn neighborhood_contract() {
        let e = emb(&[&[0.0], &[1.0], &[5.0]]);
        let t = genre_table(&[("i0", "x"), ("i1", "x")]);
        let s = label_similarity_table(&t).unwrap();
        assert!(neighborhood_label_report(&e, &t, &s, &NeighborhoodParams::new(vec![1], 3, 0)).is_err());
        assert!(neighborhood_label_report(&e, &t, &s, &NeighborhoodParams::new(vec![2, 1], 1, 0)).is_err());
        assert!(neighborhood_label_report(&e, &t, &s, &NeighborhoodParams::new(vec![3], 1, 0)).is_err());
    }

    #[test]
    fn gradient_two_points() {
        let e = emb(&[&[1.0, 0.0], &[2.0, 0.0], &[0.0, 9.0]]);
        let t = genre_table(&[("i0", "x"), ("i1", "y"), ("i2", "x"), ("i3", "x"), ("i3", "y")]);
        let s = label_similarity_table(&t).unwrap();
        let line = gradient_along_line(&e, &t, &s, 2, None, 3).unwrap();
        assert_eq!(line.points.len(), 2);
        let (a, b) = (line.points[0], line.points[1]);
        let want = label_based_similarity(e.item_id(a), e.item_id(b), &t, &s).unwrap();
        assert_eq!(line.smoothness, want);
        assert!(gradient_along_line(&e, &t, &s, 1, None, 3).is_err());
        assert!(gradient_along_line(&e, &t, &s, 4, None, 3).is_err());
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        assert_eq!(segment_distance(&[1.0, 1.0], &[2.0, 0.0]), 1.0);
        assert_eq!(segment_distance(&[-3.0, 0.0], &[2.0, 0.0]), 3.0);
        assert_eq!(segment_distance(&[5.0, 0.0], &[2.0, 0.0]), 3.0);
        assert_eq!(segment_distance(&[0.0, 4.0], &[0.0, 0.0]), 4.0);
    }
}
