//! Classical MDS, Landmark MDS with distance-based triangulation, and the
//! Isomap / L-Isomap drivers built on them.
//!
//! Classical MDS double-centers the squared distance matrix,
//! `B = -1/2 J D² J` with `J = I - 11ᵀ/n`, and places item `i` at
//! `(√λ_1 v_1[i], ..., √λ_d v_d[i])` for the top `d` eigenpairs of `B`.
//! Negative eigenvalues (geodesic distances are rarely Euclidean) are clamped
//! to zero and yield zero columns.
//!
//! Landmark MDS runs classical MDS on the `l x l` landmark block only and
//! places every other item from its squared distances `δ` to the landmarks:
//! `x = -1/2 L# (δ - δ̄)`, where row `k` of `L#` is `v_kᵀ / √λ_k` and `δ̄` holds
//! the row means of the squared landmark distances.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{canonical_sign, top_k, EigenOptions, SymMatrix};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::geodesic::{all_pairs, landmark_rows, GeodesicMatrix, DEFAULT_N_CAP};
use crate::ingest::parse_field;
use crate::landmarks::{LandmarkSet, LandmarkStrategy};
use crate::similarity::SimilarityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "isomap")]
    Isomap,
    #[serde(rename = "l-isomap")]
    LIsomap,
    #[serde(rename = "mds")]
    Mds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkProvenance {
    pub strategy: LandmarkStrategy,
    pub l: usize,
    pub s: usize,
    pub rng_seed: u64,
}

/// How an embedding was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: Method,
    pub dims: usize,
    pub min_cooc: u32,
    pub eigen_seed: u64,
    /// Number of requested dimensions whose eigenvalue was clamped to zero.
    pub clamped_dims: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub landmarks: Option<LandmarkProvenance>,
}

#[derive(Debug, Clone, Copy)]
pub struct MdsOptions {
    pub eigen: EigenOptions,
    /// Node ceiling for the all-pairs geodesic matrix used by Isomap.
    pub n_cap: usize,
}

impl Default for MdsOptions {
    fn default() -> Self {
        MdsOptions {
            eigen: EigenOptions::default(),
            n_cap: DEFAULT_N_CAP,
        }
    }
}

/// `n x d` coordinates, one row per item, columns ordered by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n: usize,
    d: usize,
    coords: Vec<f64>,
    eigenvalues: Vec<f64>,
    item_ids: Vec<String>,
    provenance: Provenance,
}

impl Embedding {
    pub fn new(
        coords: Vec<f64>,
        d: usize,
        eigenvalues: Vec<f64>,
        item_ids: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = item_ids.len();
        if coords.len() != n * d || eigenvalues.len() != d {
            return Err(Error::contract(format!(
                "embedding shape mismatch: {} coords, {} eigenvalues for {n} items x {d} dims",
                coords.len(),
                eigenvalues.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Degenerate("embedding has non-finite coordinates".into()));
        }
        Ok(Embedding {
            n,
            d,
            coords,
            eigenvalues,
            item_ids,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_id(&self, i: usize) -> &str {
        &self.item_ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|x| x == id)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Euclidean distance between rows `i` and `j` over the first `dims` coordinates.
    pub fn distance(&self, i: usize, j: usize, dims: usize) -> f64 {
        self.row(i)[..dims]
            .iter()
            .zip(&self.row(j)[..dims])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The first `k` dimensions of this embedding.
    pub fn truncate(&self, k: usize) -> Result<Embedding> {
        if k == 0 || k > self.d {
            return Err(Error::contract(format!("cannot truncate {} dims to {k}", self.d)));
        }
        let coords = (0..self.n).flat_map(|i| self.row(i)[..k].to_vec()).collect();
        let mut provenance = self.provenance.clone();
        provenance.dims = k;
        provenance.clamped_dims = self.eigenvalues[..k].iter().filter(|v| **v == 0.0).count();
        Embedding::new(coords, k, self.eigenvalues[..k].to_vec(), self.item_ids.clone(), provenance)
    }

    pub fn with_item_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::contract("item id count does not match embedding rows"));
        }
        self.item_ids = ids;
        Ok(self)
    }

    /// Writes the embedding file. `extra_meta` lines (without the leading `#`)
    /// are emitted after the eigenvalue line.
    pub fn write<W: Write>(&self, mut out: W, extra_meta: &[String]) -> std::io::Result<()> {
        let prov = serde_json::to_string(&self.provenance).map_err(std::io::Error::other)?;
        writeln!(out, "#items={} dims={} provenance={prov}", self.n, self.d)?;
        let eig: Vec<String> = self.eigenvalues.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "#eigenvalues={}", eig.join(","))?;
        for m in extra_meta {
            writeln!(out, "#{m}")?;
        }
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            line.push_str(&self.item_ids[i]);
            for c in self.row(i) {
                line.push('\t');
                line.push_str(&fmt_f64(*c));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut header: Option<(usize, usize, Provenance)> = None;
        let mut eigenvalues = None;
        let mut ids = Vec::new();
        let mut coords = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let lineno = k + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim_end_matches('\r');
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(rest) = meta.strip_prefix("items=") {
                    header = Some(parse_header(rest, lineno)?);
                } else if let Some(rest) = meta.strip_prefix("eigenvalues=") {
                    let vals: Vec<f64> = rest
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_field(s, lineno))
                        .collect::<Result<_>>()?;
                    eigenvalues = Some(vals);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (_, d, _) = header.as_ref().ok_or_else(|| Error::Parse {
                line: lineno,
                message: "coordinates before the #items header".into(),
            })?;
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default();
            let row: Vec<f64> = fields.map(|f| parse_field(f, lineno)).collect::<Result<_>>()?;
            if row.len() != *d || id.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected an item id and {d} coordinates"),
                });
            }
            ids.push(id.to_string());
            coords.extend(row);
        }
        let (n, d, provenance) = header.ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing #items header".into(),
        })?;
        if ids.len() != n {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {n} items, file holds {}", ids.len()),
            });
        }
        let eigenvalues = eigenvalues.ok_or_else(|| Error::Parse {
            line: 2,
            message: "missing #eigenvalues line".into(),
        })?;
        Embedding::new(coords, d, eigenvalues, ids, provenance)
    }
}

fn parse_header(rest: &str, line: usize) -> Result<(usize, usize, Provenance)> {
    let bad = |m: &str| Error::Parse {
        line,
        message: m.to_string(),
    };
    let (items, rest) = rest.split_once(' ').ok_or_else(|| bad("malformed #items header"))?;
    let rest = rest.strip_prefix("dims=").ok_or_else(|| bad("header lacks dims="))?;
    let (dims, rest) = rest.split_once(' ').ok_or_else(|| bad("header lacks provenance="))?;
    let json = rest.strip_prefix("provenance=").ok_or_else(|| bad("header lacks provenance="))?;
    let prov: Provenance =
        serde_json::from_str(json).map_err(|e| bad(&format!("bad provenance: {e}")))?;
    Ok((parse_field(items, line)?, parse_field(dims, line)?, prov))
}

/// Eigenvalues at or below this fraction of the largest magnitude are clamped.
const CLAMP_RELATIVE: f64 = 1e-12;

struct SpectralResult {
    coords: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Unit eigenvectors (zeroed where clamped).
    vectors: Vec<Vec<f64>>,
    clamped: usize,
}

fn check_distance_matrix(n: usize, data: &[f64]) -> Result<()> {
    let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        if data[i * n + i] != 0.0 {
            return Err(Error::contract(format!("distance matrix has nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            let (a, b) = (data[i * n + j], data[j * n + i]);
            if !a.is_finite() || (a - b).abs() > 1e-12 * scale {
                return Err(Error::contract(format!("distance matrix asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn double_center(n: usize, data: &[f64]) -> SymMatrix {
    let sq: Vec<f64> = data.iter().map(|v| v * v).collect();
    let row_mean: Vec<f64> = sq.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    b.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    });
    // exact symmetry for the solver
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (b[i * n + j] + b[j * n + i]);
            b[i * n + j] = m;
            b[j * n + i] = m;
        }
    }
    SymMatrix::new(n, b).expect("square by construction")
}

fn spectral(n: usize, data: &[f64], d: usize, opts: &EigenOptions) -> Result<SpectralResult> {
    if n < 2 || d == 0 || d > n - 1 {
        return Err(Error::contract(format!(
            "target dimension {d} must lie in 1..={} for {n} points",
            n.saturating_sub(1)
        )));
    }
    check_distance_matrix(n, data)?;
    let b = double_center(n, data);
    let pairs = top_k(&b, d, opts)?;
    let mut coords = vec![0.0; n * d];
    let mut eigenvalues = Vec::with_capacity(d);
    let mut vectors = Vec::with_capacity(d);
    let mut clamped = 0;
    // eigenvalues at rounding level (e.g. the constant vector's) count as zero
    let floor = CLAMP_RELATIVE * pairs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (k, (lambda, mut v)) in pairs.values.into_iter().zip(pairs.vectors).enumerate() {
        if lambda <= floor {
            clamped += 1;
            eigenvalues.push(0.0);
            vectors.push(vec![0.0; n]);
            continue;
        }
        canonical_sign(&mut v);
        let s = lambda.sqrt();
        for i in 0..n {
            coords[i * d + k] = v[i] * s;
        }
        eigenvalues.push(lambda);
        vectors.push(v);
    }
    Ok(SpectralResult {
        coords,
        eigenvalues,
        vectors,
        clamped,
    })
}

/// Classical (Torgerson) MDS of a square distance matrix into `d` dimensions.
///
/// Items are labeled by their row index; callers attach real ids with
/// [`Embedding::with_item_ids`].
pub fn classical_mds(dist: &GeodesicMatrix, d: usize, opts: &MdsOptions) -> Result<Embedding> {
    if !dist.is_square() {
        return Err(Error::contract("classical MDS needs a square distance matrix"));
    }
    let n = dist.rows();
    let res = spectral(n, dist.data(), d, &opts.eigen)?;
    Embedding::new(
        res.coords,
        d,
        res.eigenvalues,
        (0..n).map(|i| i.to_string()).collect(),
        Provenance {
            method: Method::Mds,
            dims: d,
            min_cooc: 0,
            eigen_seed: opts.eigen.seed,
            clamped_dims: res.clamped,
            landmarks: None,
        },
    )
}

/// Landmark MDS model: landmark coordinates plus what triangulation needs.
#[derive(Debug, Clone)]
pub struct LmdsModel {
    l: usize,
    d: usize,
    landmark_coords: Vec<f64>,
    /// `d x l`, row k = `v_k / √λ_k` (zero when clamped).
    pseudo_inverse_t: Vec<f64>,
    mean_sq_dist: Vec<f64>,
    eigenvalues: Vec<f64>,
    clamped: usize,
}

impl LmdsModel {
    pub fn landmark_count(&self) -> usize {
        self.l
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn landmark_coords(&self, k: usize) -> &[f64] {
        &self.landmark_coords[k * self.d..(k + 1) * self.d]
    }

    pub fn pseudo_inverse_t(&self) -> &[f64] {
        &self.pseudo_inverse_t
    }

    pub fn mean_sq_dist(&self) -> &[f64] {
        &self.mean_sq_dist
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn clamped_dims(&self) -> usize {
        self.clamped
    }
}

/// Fits Landmark MDS on the `l x l` landmark distance block.
pub fn landmark_mds(d_ll: &GeodesicMatrix, d: usize, opts: &EigenOptions) -> Result<LmdsModel> {
    if !d_ll.is_square() {
        return Err(Error::contract("landmark distances must form a square block"));
    }
    let l = d_ll.rows();
    if d >= l {
        return Err(Error::contract(format!("dimension {d} must be below the landmark count {l}")));
    }
    let res = spectral(l, d_ll.data(), d, opts)?;
    let mut pinv = vec![0.0; d * l];
    for (k, (v, &lambda)) in res.vectors.iter().zip(&res.eigenvalues).enumerate() {
        if lambda > 0.0 {
            let s = lambda.sqrt();
            for j in 0..l {
                pinv[k * l + j] = v[j] / s;
            }
        }
    }
    let mean_sq_dist = d_ll
        .data()
        .chunks(l)
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() / l as f64)
        .collect();
    Ok(LmdsModel {
        l,
        d,
        landmark_coords: res.coords,
        pseudo_inverse_t: pinv,
        mean_sq_dist,
        eigenvalues: res.eigenvalues,
        clamped: res.clamped,
    })
}

/// Places a point from its squared distances to the landmarks.
pub fn triangulate(model: &LmdsModel, delta_sq: &[f64]) -> Result<Vec<f64>> {
    if delta_sq.len() != model.l {
        return Err(Error::contract(format!(
            "expected {} squared landmark distances, got {}",
            model.l,
            delta_sq.len()
        )));
    }
    Ok(triangulate_unchecked(model, delta_sq))
}

fn triangulate_unchecked(model: &LmdsModel, delta_sq: &[f64]) -> Vec<f64> {
    let l = model.l;
    (0..model.d)
        .map(|k| {
            let row = &model.pseudo_inverse_t[k * l..(k + 1) * l];
            -0.5 * row
                .iter()
                .zip(delta_sq.iter().zip(&model.mean_sq_dist))
                .map(|(p, (x, m))| p * (x - m))
                .sum::<f64>()
        })
        .collect()
}

/// Isomap: all-pairs geodesics followed by classical MDS.
pub fn isomap(graph: &SimilarityGraph, d: usize, opts: &MdsOptions) -> Result<Embedding> {
    isomap_with_geodesics(graph, d, opts).map(|(e, _)| e)
}

/// Like [`isomap`], also returning the geodesic matrix it was built from.
pub fn isomap_with_geodesics(
    graph: &SimilarityGraph,
    d: usize,
    opts: &MdsOptions,
) -> Result<(Embedding, GeodesicMatrix)> {
    let geo = all_pairs(graph, opts.n_cap)?;
    let mut emb = classical_mds(&geo, d, opts)?.with_item_ids(graph.node_ids().to_vec())?;
    emb.provenance.method = Method::Isomap;
    emb.provenance.min_cooc = graph.min_cooc();
    Ok((emb, geo))
}

/// L-Isomap: landmark geodesic rows, Landmark MDS, then triangulation of
/// every non-landmark node. Landmarks keep their LMDS coordinates.
pub fn l_isomap(
    graph: &SimilarityGraph,
    landmarks: &LandmarkSet,
    d: usize,
    opts: &MdsOptions,
) -> Result<Embedding> {
    l_isomap_with_geodesics(graph, landmarks, d, opts).map(|(e, _)| e)
}

/// Like [`l_isomap`], also returning the `l x n` landmark geodesic rows.
pub fn l_isomap_with_geodesics(
    graph: &SimilarityGraph,
    landmarks: &LandmarkSet,
    d: usize,
    opts: &MdsOptions,
) -> Result<(Embedding, GeodesicMatrix)> {
    let l = landmarks.len();
    if d == 0 || d + 1 > l {
        return Err(Error::contract(format!(
            "l-isomap needs 1 <= d <= l - 1, got d={d}, l={l}"
        )));
    }
    let n = graph.node_count();
    let geo = landmark_rows(graph, landmarks.indices())?;
    let block = GeodesicMatrix::square(l, geo.source_block())?;
    let model = landmark_mds(&block, d, &opts.eigen)?;

    let mut landmark_pos = vec![usize::MAX; n];
    for (k, &v) in landmarks.indices().iter().enumerate() {
        landmark_pos[v] = k;
    }
    let mut coords = vec![0.0; n * d];
    coords.par_chunks_mut(d).enumerate().for_each(|(v, out)| {
        if landmark_pos[v] != usize::MAX {
            out.copy_from_slice(model.landmark_coords(landmark_pos[v]));
        } else {
            let delta: Vec<f64> = (0..l).map(|k| geo.get(k, v).powi(2)).collect();
            out.copy_from_slice(&triangulate_unchecked(&model, &delta));
        }
    });
    let emb = Embedding::new(
        coords,
        d,
        model.eigenvalues.clone(),
        graph.node_ids().to_vec(),
        Provenance {
            method: Method::LIsomap,
            dims: d,
            min_cooc: graph.min_cooc(),
            eigen_seed: opts.eigen.seed,
            clamped_dims: model.clamped,
            landmarks: Some(LandmarkProvenance {
                strategy: landmarks.strategy(),
                l,
                s: landmarks.seed_count(),
                rng_seed: landmarks.rng_seed(),
            }),
        },
    )?;
    Ok((emb, geo))
}
