//! `simmap`: build and evaluate item similarity maps from user profiles.
//!
//! Each subcommand reads the checkpoint files written by the previous stage,
//! so any stage can be rerun on its own.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{EmbedMethod, PipelineConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "simmap", version, about = "Item similarity maps from co-occurrence data")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Worker threads for every stage (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat key=value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Omit the creation-time metadata line from outputs.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[arg(long, global = true)]
    min_cooc: Option<u32>,
    #[arg(long, global = true)]
    dims: Option<usize>,
    /// isomap or l-isomap.
    #[arg(long, global = true)]
    method: Option<String>,
    /// random or maxmin.
    #[arg(long, global = true)]
    landmark_strategy: Option<String>,
    /// Number of landmarks l.
    #[arg(long, global = true)]
    landmarks: Option<usize>,
    /// Random seed landmarks s for maxmin selection.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Master seed; each stage derives its own from it.
    #[arg(long = "seed", global = true)]
    rng_seed: Option<u64>,
    /// Largest graph for which all-pairs geodesics are computed.
    #[arg(long, global = true)]
    n_cap: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count item occurrences and pairwise co-occurrences.
    Cooc {
        /// TSV of `user<TAB>item` records.
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Output prefix: writes PREFIX.cooc.tsv and PREFIX.occ.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold co-occurrences into a similarity graph and keep its largest component.
    Graph {
        #[arg(long)]
        cooc: Option<PathBuf>,
        #[arg(long)]
        occ: Option<PathBuf>,
        /// Output prefix: writes PREFIX.nodes.tsv, PREFIX.edges.tsv, PREFIX.components.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select landmark nodes.
    Landmarks {
        /// Graph prefix as passed to `graph --out`.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed the graph with Isomap or L-Isomap.
    Embed {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use these landmarks instead of selecting new ones.
        #[arg(long)]
        landmarks_file: Option<PathBuf>,
        /// Where to write the landmarks (default: OUT.landmarks.tsv).
        #[arg(long)]
        landmarks_out: Option<PathBuf>,
        /// Also dump the geodesic matrix in binary form.
        #[arg(long)]
        geodesic_out: Option<PathBuf>,
    },
    /// Evaluate an embedding.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// genre or artist.
    #[arg(long, default_value = "genre")]
    pub kind: String,
    /// Profiles file, required for artist similarity.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Residual variance against geodesic distances for k = 1..=k_max.
    ResidualVariance {
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Graph prefix; geodesics are recomputed from it.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Binary geodesic dump written by `embed --geodesic-out`.
        #[arg(long)]
        geodesic: Option<PathBuf>,
        #[arg(long)]
        landmarks_file: Option<PathBuf>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label similarity of each item to its nearest neighbors.
    Neighborhood {
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
        /// Comma-separated, strictly increasing neighborhood sizes.
        #[arg(long, default_value = "1,2,4,8,16,32", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Number of sampled items (default: 50, or all labeled items if fewer).
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label smoothness along random lines through the map.
    Gradient {
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 100)]
        lines: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest neighbors of one item.
    Knn {
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long)]
        item: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn flag_config(g: &GlobalArgs) -> Result<PipelineConfig, CliError> {
    let method = g
        .method
        .as_deref()
        .map(|m| m.parse::<EmbedMethod>().map_err(CliError::validation))
        .transpose()?;
    let landmark_strategy = g
        .landmark_strategy
        .as_deref()
        .map(|s| s.parse().map_err(|e: simmap::Error| CliError::validation(e.to_string())))
        .transpose()?;
    Ok(PipelineConfig {
        min_cooc: g.min_cooc,
        dims: g.dims,
        method,
        landmark_strategy,
        landmarks: g.landmarks,
        seeds: g.seeds,
        rng_seed: g.rng_seed,
        n_cap: g.n_cap,
        threads: g.threads,
        paths: Default::default(),
    })
}

fn with_paths(mut cfg: PipelineConfig, paths: &[(&str, &Option<PathBuf>)]) -> PipelineConfig {
    for (k, v) in paths {
        if let Some(p) = v {
            cfg.paths.insert((*k).to_string(), p.clone());
        }
    }
    cfg
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_cfg = match &cli.global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut cfg = file_cfg.overridden_by(flag_config(&cli.global)?);
    let ctx = commands::Context {
        timestamp: !cli.global.no_timestamp,
    };
    use Command as C;
    use EvalCommand as E;
    cfg = match &cli.command {
        C::Cooc { profiles, out } => with_paths(cfg, &[("profiles", profiles), ("out", out)]),
        C::Graph { cooc, occ, out } => with_paths(cfg, &[("cooc", cooc), ("occ", occ), ("out", out)]),
        C::Landmarks { graph, out } => with_paths(cfg, &[("graph", graph), ("out", out)]),
        C::Embed {
            graph,
            out,
            landmarks_file,
            ..
        } => with_paths(
            cfg,
            &[("graph", graph), ("out", out), ("landmarks_file", landmarks_file)],
        ),
        C::Eval(E::ResidualVariance {
            embedding,
            graph,
            geodesic,
            landmarks_file,
            out,
            ..
        }) => with_paths(
            cfg,
            &[
                ("embedding", embedding),
                ("graph", graph),
                ("geodesic", geodesic),
                ("landmarks_file", landmarks_file),
                ("out", out),
            ],
        ),
        C::Eval(E::Neighborhood {
            embedding,
            labels,
            out,
            ..
        })
        | C::Eval(E::Gradient {
            embedding,
            labels,
            out,
            ..
        }) => with_paths(
            cfg,
            &[
                ("embedding", embedding),
                ("labels", &labels.labels),
                ("profiles", &labels.profiles),
                ("out", out),
            ],
        ),
        C::Eval(E::Knn { embedding, out, .. }) => {
            with_paths(cfg, &[("embedding", embedding), ("out", out)])
        }
    };

    if let C::Embed { .. } = &cli.command {
        commands::absorb_landmark_file(&mut cfg)?;
    }
    cfg.validate()?;

    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot start {n} worker threads: {e}")))?;
    }

    match cli.command {
        C::Cooc { .. } => commands::cooc(&cfg, &ctx),
        C::Graph { .. } => commands::graph(&cfg, &ctx),
        C::Landmarks { .. } => commands::landmarks(&cfg, &ctx),
        C::Embed {
            landmarks_out,
            geodesic_out,
            ..
        } => commands::embed(&cfg, &ctx, landmarks_out, geodesic_out),
        C::Eval(E::ResidualVariance { k_max, .. }) => commands::residual_variance(&cfg, &ctx, k_max),
        C::Eval(E::Neighborhood {
            labels,
            sizes,
            sample,
            ..
        }) => commands::neighborhood(&cfg, &ctx, &labels.kind, sizes, sample),
        C::Eval(E::Gradient {
            labels,
            points,
            lines,
            ..
        }) => commands::gradient(&cfg, &ctx, &labels.kind, points, lines),
        C::Eval(E::Knn { item, k, .. }) => commands::knn(&cfg, &item, k),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
