//! Pipeline configuration: a flat `key=value` file whose entries can be
//! overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use simmap::landmarks::LandmarkStrategy;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedMethod {
    Isomap,
    LIsomap,
}

impl FromStr for EmbedMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "isomap" => Ok(EmbedMethod::Isomap),
            "l-isomap" => Ok(EmbedMethod::LIsomap),
            other => Err(format!("unknown method {other:?} (expected isomap|l-isomap)")),
        }
    }
}

pub const MAX_DIMS: usize = 100;

const PATH_KEYS: &[&str] = &[
    "profiles",
    "cooc",
    "occ",
    "graph",
    "embedding",
    "labels",
    "landmarks_file",
    "geodesic",
    "out",
];

/// Every field is optional so that a config file and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub min_cooc: Option<u32>,
    pub dims: Option<usize>,
    pub method: Option<EmbedMethod>,
    pub landmark_strategy: Option<LandmarkStrategy>,
    pub landmarks: Option<usize>,
    pub seeds: Option<usize>,
    pub rng_seed: Option<u64>,
    pub n_cap: Option<usize>,
    pub threads: Option<usize>,
    pub paths: BTreeMap<String, PathBuf>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    v.trim()
        .parse()
        .map_err(|e| CliError::validation(format!("config key {key}: {e}")))
}

impl PipelineConfig {
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = PipelineConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::validation(format!("config line {}: expected key=value, got {raw:?}", k + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        PipelineConfig::parse_str(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "min_cooc" => self.min_cooc = Some(parse(key, v)?),
            "dims" => self.dims = Some(parse(key, v)?),
            "method" => self.method = Some(parse(key, v)?),
            "landmark_strategy" => {
                self.landmark_strategy = Some(
                    v.parse()
                        .map_err(|e: simmap::Error| CliError::validation(e.to_string()))?,
                )
            }
            "landmarks" => self.landmarks = Some(parse(key, v)?),
            "seeds" => self.seeds = Some(parse(key, v)?),
            "rng_seed" => self.rng_seed = Some(parse(key, v)?),
            "n_cap" => self.n_cap = Some(parse(key, v)?),
            "threads" => self.threads = Some(parse(key, v)?),
            k if PATH_KEYS.contains(&k) => {
                self.paths.insert(k.to_string(), PathBuf::from(v));
            }
            other => return Err(CliError::validation(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Values set in `over` win.
    pub fn overridden_by(mut self, over: PipelineConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(min_cooc, dims, method, landmark_strategy, landmarks, seeds, rng_seed, n_cap, threads);
        self.paths.extend(over.paths);
        self
    }

    /// Checks every cross-field constraint before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::validation(m));
        if self.min_cooc == Some(0) {
            return err("min_cooc must be at least 1".into());
        }
        if let Some(d) = self.dims {
            if d == 0 || d > MAX_DIMS {
                return err(format!("dims must lie in 1..={MAX_DIMS}, got {d}"));
            }
        }
        if self.threads == Some(0) {
            return err("threads must be at least 1".into());
        }
        if self.n_cap == Some(0) {
            return err("n_cap must be at least 1".into());
        }
        if self.landmarks == Some(0) {
            return err("landmarks must be at least 1".into());
        }
        if let (Some(s), Some(l)) = (self.seeds, self.landmarks) {
            if s == 0 || s > l {
                return err(format!("seeds must lie in 1..=landmarks ({l}), got {s}"));
            }
        }
        if self.method == Some(EmbedMethod::LIsomap) {
            let Some(l) = self.landmarks else {
                return err("method=l-isomap requires landmarks".into());
            };
            if l < 2 {
                return err("l-isomap needs at least 2 landmarks".into());
            }
            if let Some(d) = self.dims {
                if d + 1 > l {
                    return err(format!("l-isomap needs dims <= landmarks - 1 ({}), got {d}", l - 1));
                }
            }
            if self.landmark_strategy == Some(LandmarkStrategy::MaxMin) && self.seeds.is_none() {
                return err("landmark_strategy=maxmin requires seeds".into());
            }
        }
        Ok(())
    }

    pub fn path(&self, key: &str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    pub fn require_path(&self, key: &str) -> Result<&Path, CliError> {
        self.path(key).ok_or_else(|| {
            CliError::validation(format!("missing --{} (or `{key}=` in the config file)", key.replace('_', "-")))
        })
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file() {
        let cfg = PipelineConfig::parse_str(
            "# comment\nmin_cooc = 5\ndims=10\nmethod=l-isomap\nlandmarks=200\nlandmark_strategy=maxmin\nseeds=20\nrng_seed=7\nprofiles=/tmp/p.tsv\n",
        )
        .unwrap();
        assert_eq!(cfg.min_cooc, Some(5));
        assert_eq!(cfg.method, Some(EmbedMethod::LIsomap));
        assert_eq!(cfg.landmark_strategy, Some(LandmarkStrategy::MaxMin));
        assert_eq!(cfg.path("profiles"), Some(Path::new("/tmp/p.tsv")));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(PipelineConfig::parse_str("colour=blue\n").is_err());
        assert!(PipelineConfig::parse_str("dims\n").is_err());
        assert!(PipelineConfig::parse_str("dims=ten\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = PipelineConfig::parse_str("dims=10\nrng_seed=1\n").unwrap();
        let flags = PipelineConfig {
            dims: Some(3),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.dims, Some(3));
        assert_eq!(merged.rng_seed, Some(1));
    }

    #[test]
    fn cross_field_contradictions() {
        let bad = [
            "method=l-isomap\ndims=3\n",
            "method=l-isomap\nlandmarks=3\ndims=3\n",
            "landmarks=5\nseeds=6\n",
            "method=l-isomap\nlandmarks=10\nlandmark_strategy=maxmin\n",
            "dims=101\n",
            "min_cooc=0\n",
            "threads=0\n",
        ];
        for b in bad {
            let cfg = PipelineConfig::parse_str(b).unwrap();
            assert!(cfg.validate().is_err(), "accepted {b:?}");
        }
        let ok = PipelineConfig::parse_str("method=l-isomap\nlandmarks=4\ndims=3\n").unwrap();
        ok.validate().unwrap();
    }
}
