//! Euclidean similarity maps from user→item co-occurrence data.
//!
//! The pipeline turns user profiles into popularity-normalized item
//! similarities ([`similarity::cosine`]), builds a dissimilarity graph,
//! computes geodesic distances over it, and embeds the items with Isomap or
//! Landmark-Isomap. The [`eval`] module scores the resulting maps.
//!
//! ```no_run
//! use simmap::{ingest, similarity, mds};
//!
//! let store = ingest::parse_profiles(std::io::stdin().lock())?;
//! let cooc = ingest::count_cooccurrences(&store)?;
//! let graph = similarity::build_graph(&cooc, store.catalog(), 5)?;
//! let graph = similarity::largest_component(&graph)?;
//! let map = mds::isomap(&graph, 10, &mds::MdsOptions::default())?;
//! # Ok::<(), simmap::Error>(())
//! ```

pub mod eigen;
pub mod error;
pub mod eval;
pub mod geodesic;
pub mod ingest;
pub mod landmarks;
pub mod mds;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.16e}")
}
