use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use sha2::{Digest, Sha256};

use simmap::eigen::EigenOptions;
use simmap::eval::{self, NeighborhoodParams, ResidualOptions, DEFAULT_SAMPLE};
use simmap::geodesic::{self, GeodesicMatrix, DEFAULT_N_CAP};
use simmap::ingest::{self, CoocMatrix, ItemCatalog, LabelKind, LabelTable};
use simmap::landmarks::{self, LandmarkSet, LandmarkStrategy};
use simmap::mds::{self, Embedding, MdsOptions, Method};
use simmap::similarity::{self, SimilarityGraph};
use simmap::{fmt_f64, Error};

use crate::config::{EmbedMethod, PipelineConfig};
use crate::error::CliError;

pub const DEFAULT_DIMS: usize = 10;
pub const DEFAULT_MIN_COOC: u32 = 5;

pub struct Context {
    pub timestamp: bool,
}

/// Per-stage seed: the first 8 bytes of SHA-256 over `stage:seed`.
pub fn stage_seed(stage: &str, rng_seed: u64) -> u64 {
    let digest = Sha256::digest(format!("{stage}:{rng_seed}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn core<T>(r: simmap::Result<T>, path: &Path) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_core(e, Some(path)))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn timestamp_line() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("created_unix={secs}")
}

/// Renders with `render`, inserts the timestamp after the first line and
/// writes the file in one go.
fn write_output<F>(path: &Path, ctx: &Context, render: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf).map_err(|e| CliError::io(path, e))?;
    if ctx.timestamp {
        let at = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |p| p + 1);
        let line = format!("#{}\n", timestamp_line());
        buf.splice(at..at, line.into_bytes());
    }
    let mut f = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    f.write_all(&buf)
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn read_graph(prefix: &Path) -> Result<SimilarityGraph, CliError> {
    let nodes = with_suffix(prefix, ".nodes.tsv");
    let edges = with_suffix(prefix, ".edges.tsv");
    let g = SimilarityGraph::read(open(&nodes)?, open(&edges)?)
        .map_err(|e| CliError::from_core(e, Some(&edges)))?;
    info!("graph: {} nodes, {} edges", g.node_count(), g.edge_count());
    Ok(g)
}

fn read_embedding(path: &Path) -> Result<Embedding, CliError> {
    core(Embedding::read(open(path)?), path)
}

fn read_landmarks(path: &Path) -> Result<LandmarkSet, CliError> {
    core(LandmarkSet::read(open(path)?), path)
}

fn read_profiles(path: &Path) -> Result<ingest::ProfileStore, CliError> {
    core(ingest::parse_profiles(open(path)?), path)
}

/// Fills `landmarks` from a given landmark file so validation can see it.
pub fn absorb_landmark_file(cfg: &mut PipelineConfig) -> Result<(), CliError> {
    let Some(path) = cfg.path("landmarks_file").map(Path::to_path_buf) else {
        return Ok(());
    };
    let set = read_landmarks(&path)?;
    match cfg.landmarks {
        Some(l) if l != set.len() => Err(CliError::validation(format!(
            "landmarks={l} contradicts {} which lists {}",
            path.display(),
            set.len()
        ))),
        _ => {
            cfg.landmarks = Some(set.len());
            Ok(())
        }
    }
}

pub fn cooc(cfg: &PipelineConfig, ctx: &Context) -> Result<(), CliError> {
    let profiles = cfg.require_path("profiles")?;
    let out = cfg.require_path("out")?;
    let store = read_profiles(profiles)?;
    info!(
        "profiles: {} users, {} items",
        store.user_count(),
        store.item_count()
    );
    let matrix = ingest::count_cooccurrences(&store)?;
    info!("co-occurring pairs: {}", matrix.pair_count());
    write_output(&with_suffix(out, ".occ.tsv"), ctx, |w| store.catalog().write_tsv(w))?;
    write_output(&with_suffix(out, ".cooc.tsv"), ctx, |w| {
        matrix.write_tsv(store.catalog(), w)
    })
}

pub fn graph(cfg: &PipelineConfig, ctx: &Context) -> Result<(), CliError> {
    let occ_path = cfg.require_path("occ")?;
    let cooc_path = cfg.require_path("cooc")?;
    let out = cfg.require_path("out")?;
    let min_cooc = cfg.min_cooc.unwrap_or(DEFAULT_MIN_COOC);
    let catalog = core(ItemCatalog::read_tsv(open(occ_path)?), occ_path)?;
    let matrix = core(CoocMatrix::read_tsv(open(cooc_path)?, &catalog), cooc_path)?;
    let full = similarity::build_graph(&matrix, &catalog, min_cooc)?;
    let mut sizes: Vec<usize> = full.components().iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let largest = similarity::largest_component(&full)?;
    let fraction = largest.node_count() as f64 / catalog.len() as f64;
    info!(
        "min_cooc={min_cooc}: {} of {} items connected, {} components, largest {} ({:.1}% of items)",
        full.node_count(),
        catalog.len(),
        sizes.len(),
        largest.node_count(),
        100.0 * fraction
    );
    write_output(&with_suffix(out, ".components.tsv"), ctx, |w| {
        writeln!(
            w,
            "#simmap components items={} graph_nodes={} components={} largest={} largest_fraction={} min_cooc={min_cooc}",
            catalog.len(),
            full.node_count(),
            sizes.len(),
            largest.node_count(),
            fmt_f64(fraction)
        )?;
        writeln!(w, "rank\tsize")?;
        for (r, s) in sizes.iter().enumerate() {
            writeln!(w, "{}\t{s}", r + 1)?;
        }
        Ok(())
    })?;
    write_output(&with_suffix(out, ".nodes.tsv"), ctx, |w| largest.write_nodes(w))?;
    write_output(&with_suffix(out, ".edges.tsv"), ctx, |w| largest.write_edges(w))
}

fn select_landmarks(cfg: &PipelineConfig, graph: &SimilarityGraph) -> Result<LandmarkSet, CliError> {
    let l = cfg
        .landmarks
        .ok_or_else(|| CliError::validation("landmark selection needs --landmarks"))?;
    let seed = stage_seed("landmarks", cfg.rng_seed());
    let set = match cfg.landmark_strategy.unwrap_or(LandmarkStrategy::Random) {
        LandmarkStrategy::Random => landmarks::select_random(graph.node_count(), l, seed)?,
        LandmarkStrategy::MaxMin => {
            let s = cfg
                .seeds
                .ok_or_else(|| CliError::validation("maxmin selection needs --seeds"))?;
            landmarks::select_maxmin(graph, s, l, seed)?
        }
    };
    info!("selected {} {} landmarks", set.len(), set.strategy());
    Ok(set)
}

pub fn landmarks(cfg: &PipelineConfig, ctx: &Context) -> Result<(), CliError> {
    let graph = read_graph(cfg.require_path("graph")?)?;
    let out = cfg.require_path("out")?;
    let set = select_landmarks(cfg, &graph)?;
    write_output(out, ctx, |w| set.write(w))
}

pub fn embed(
    cfg: &PipelineConfig,
    ctx: &Context,
    landmarks_out: Option<PathBuf>,
    geodesic_out: Option<PathBuf>,
) -> Result<(), CliError> {
    let graph = read_graph(cfg.require_path("graph")?)?;
    let out = cfg.require_path("out")?;
    let d = cfg.dims.unwrap_or(DEFAULT_DIMS);
    let opts = MdsOptions {
        eigen: EigenOptions {
            seed: stage_seed("eigen", cfg.rng_seed()),
            ..EigenOptions::default()
        },
        n_cap: cfg.n_cap.unwrap_or(DEFAULT_N_CAP),
    };
    let (emb, geo) = match cfg.method.unwrap_or(EmbedMethod::Isomap) {
        EmbedMethod::Isomap => mds::isomap_with_geodesics(&graph, d, &opts)?,
        EmbedMethod::LIsomap => {
            let set = match cfg.path("landmarks_file") {
                Some(p) => read_landmarks(p)?,
                None => select_landmarks(cfg, &graph)?,
            };
            let result = mds::l_isomap_with_geodesics(&graph, &set, d, &opts)?;
            let lm_path = landmarks_out.unwrap_or_else(|| with_suffix(out, ".landmarks.tsv"));
            write_output(&lm_path, ctx, |w| set.write(w))?;
            result
        }
    };
    let prov = emb.provenance();
    info!(
        "{:?} embedding: {} items x {} dims, {} clamped",
        prov.method,
        emb.len(),
        emb.dims(),
        prov.clamped_dims
    );
    let meta: Vec<String> = if ctx.timestamp {
        vec![timestamp_line()]
    } else {
        Vec::new()
    };
    let no_ts = Context { timestamp: false };
    write_output(out, &no_ts, |w| emb.write(w, &meta))?;
    if let Some(p) = geodesic_out {
        write_output(&p, &no_ts, |w| geo.write_binary(w))?;
    }
    Ok(())
}

fn check_rows(emb: &Embedding, graph: &SimilarityGraph) -> Result<(), CliError> {
    if emb.item_ids() != graph.node_ids() {
        return Err(CliError::validation(
            "embedding rows do not match the graph's nodes; was it built from this graph?",
        ));
    }
    Ok(())
}

pub fn residual_variance(
    cfg: &PipelineConfig,
    ctx: &Context,
    k_max: Option<usize>,
) -> Result<(), CliError> {
    let emb_path = cfg.require_path("embedding")?;
    let out = cfg.require_path("out")?;
    let emb = read_embedding(emb_path)?;
    let landmark_file = cfg.path("landmarks_file").map(read_landmarks).transpose()?;
    let reference: GeodesicMatrix = if let Some(p) = cfg.path("geodesic") {
        let sources = landmark_file.map(|s| s.indices().to_vec());
        core(GeodesicMatrix::read_binary(open(p)?, sources), p)?
    } else {
        let graph = read_graph(cfg.require_path("graph")?)?;
        check_rows(&emb, &graph)?;
        match emb.provenance().method {
            Method::LIsomap => {
                let set = match landmark_file {
                    Some(s) => s,
                    None => {
                        let lp = emb.provenance().landmarks.clone().ok_or_else(|| {
                            CliError::validation("l-isomap embedding lacks landmark provenance")
                        })?;
                        match lp.strategy {
                            LandmarkStrategy::Random => {
                                landmarks::select_random(graph.node_count(), lp.l, lp.rng_seed)?
                            }
                            LandmarkStrategy::MaxMin => {
                                landmarks::select_maxmin(&graph, lp.s, lp.l, lp.rng_seed)?
                            }
                        }
                    }
                };
                geodesic::landmark_rows(&graph, set.indices())?
            }
            _ => geodesic::all_pairs(&graph, cfg.n_cap.unwrap_or(DEFAULT_N_CAP))?,
        }
    };
    if reference.cols() != emb.len() {
        return Err(CliError::validation(format!(
            "reference covers {} items, embedding has {}",
            reference.cols(),
            emb.len()
        )));
    }
    let k_max = k_max.unwrap_or(emb.dims());
    let opts = ResidualOptions {
        rng_seed: stage_seed("residual", cfg.rng_seed()),
        ..ResidualOptions::default()
    };
    let curve = eval::residual_variance_curve(&reference, &emb, k_max, &opts)?;
    info!(
        "residual variance at k={k_max}: {:.4} ({} pairs{})",
        curve.values[k_max - 1],
        curve.pairs,
        if curve.sampled { ", sampled" } else { "" }
    );
    write_output(out, ctx, |w| {
        curve.write_tsv(w, &format!("simmap residual-variance k_max={k_max}"))
    })
}

struct Labels {
    table: LabelTable,
    sim: eval::LabelSimilarityTable,
}

fn load_labels(cfg: &PipelineConfig, kind: &str) -> Result<Labels, CliError> {
    let kind: LabelKind = kind
        .parse()
        .map_err(|e: Error| CliError::validation(e.to_string()))?;
    let path = cfg.require_path("labels")?;
    let table = core(ingest::parse_labels(open(path)?, kind), path)?;
    let sim = match kind {
        LabelKind::Genre => eval::label_similarity_table(&table)?,
        LabelKind::Artist => {
            let profiles = cfg.path("profiles").ok_or_else(|| {
                CliError::validation("artist similarity needs --profiles")
            })?;
            eval::artist_similarity_table(&read_profiles(profiles)?, &table)?
        }
    };
    Ok(Labels { table, sim })
}

pub fn neighborhood(
    cfg: &PipelineConfig,
    ctx: &Context,
    kind: &str,
    sizes: Vec<usize>,
    sample: Option<usize>,
) -> Result<(), CliError> {
    let emb = read_embedding(cfg.require_path("embedding")?)?;
    let out = cfg.require_path("out")?;
    let labels = load_labels(cfg, kind)?;
    let labeled = emb
        .item_ids()
        .iter()
        .filter(|id| labels.table.labels_of(id).is_some())
        .count();
    let sample = sample.unwrap_or(DEFAULT_SAMPLE.min(labeled));
    let params = NeighborhoodParams {
        dims: cfg.dims,
        ..NeighborhoodParams::new(sizes, sample, stage_seed("neighborhood", cfg.rng_seed()))
    };
    let report = eval::neighborhood_label_report(&emb, &labels.table, &labels.sim, &params)?;
    write_output(out, ctx, |w| {
        report.write_tsv(w, &format!("simmap neighborhood kind={}", labels.table.kind()))?;
        Ok(())
    })
}

pub fn gradient(
    cfg: &PipelineConfig,
    ctx: &Context,
    kind: &str,
    points: usize,
    lines: usize,
) -> Result<(), CliError> {
    let emb = read_embedding(cfg.require_path("embedding")?)?;
    let out = cfg.require_path("out")?;
    let labels = load_labels(cfg, kind)?;
    let result = eval::gradient_lines(
        &emb,
        &labels.table,
        &labels.sim,
        points,
        cfg.dims,
        lines,
        stage_seed("gradient", cfg.rng_seed()),
    )?;
    let mean = result.iter().map(|g| g.smoothness).sum::<f64>() / result.len().max(1) as f64;
    info!("mean smoothness over {lines} lines: {mean:.4}");
    write_output(out, ctx, |w| {
        writeln!(
            w,
            "#simmap gradient kind={} points={points} lines={lines} mean_smoothness={}",
            labels.table.kind(),
            fmt_f64(mean)
        )?;
        for (i, g) in result.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}", i + 1, emb.item_id(g.target), fmt_f64(g.smoothness))?;
        }
        Ok(())
    })
}

pub fn knn(cfg: &PipelineConfig, item: &str, k: usize) -> Result<(), CliError> {
    let emb = read_embedding(cfg.require_path("embedding")?)?;
    let idx = emb
        .index_of(item)
        .ok_or_else(|| CliError::validation(format!("item {item:?} is not in the embedding")))?;
    let dims = cfg.dims.unwrap_or(emb.dims());
    let nn = eval::knn_with_distances(&emb, idx, k, dims)?;
    let mut buf = Vec::new();
    for (rank, (j, dist)) in nn.iter().enumerate() {
        writeln!(buf, "{}\t{}\t{}", rank + 1, emb.item_id(*j), fmt_f64(*dist)).expect("in-memory write");
    }
    match cfg.path("out") {
        Some(p) => write_output(p, &Context { timestamp: false }, |w| w.write_all(&buf)),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ_and_are_stable() {
        let a = stage_seed("landmarks", 7);
        assert_eq!(a, stage_seed("landmarks", 7));
        assert_ne!(a, stage_seed("eigen", 7));
        assert_ne!(a, stage_seed("landmarks", 8));
    }

    #[test]
    fn suffix_keeps_directory() {
        assert_eq!(
            with_suffix(Path::new("/tmp/run/g"), ".nodes.tsv"),
            PathBuf::from("/tmp/run/g.nodes.tsv")
        );
    }
}
