//! Layered configuration: flags > config file > environment > defaults.
//!
//! Every key can come from three places, resolved in that order. A key that
//! no layer provides stays `None`, which lets `check` distinguish "use
//! whatever the index was built with" from an explicit override. Secrets are
//! not keys: the vision and embedding credentials are read from environment
//! variables by the core crate (`VISION_API_KEY` / `EMBED_API_KEY` by
//! default) and are deliberately absent from the flag and file surface.

use std::path::{Path, PathBuf};

use imgplag_core::embed::{EmbedProvider, DEFAULT_EMBED_DIM, DEFAULT_EMBED_SEED};
use imgplag_core::ingest::{OcrBackendKind, OcrConfig};
use imgplag_core::report::{AggregationMode, OutputFormat};
use imgplag_core::wordnet::Measure;
use imgplag_core::{Error, Result};

/// Environment variables are the key name upper-snaked with this prefix,
/// e.g. `lsa-rank` -> `IMGPLAG_LSA_RANK`.
pub const ENV_PREFIX: &str = "IMGPLAG_";

/// Every configuration key, in documentation order.
pub const KEYS: [&str; 15] = [
    "ocr",
    "ocr-endpoint",
    "ocr-key-env",
    "ocr-quota",
    "ocr-workers",
    "embed",
    "embed-endpoint",
    "embed-dim",
    "embed-seed",
    "lexicon",
    "gazetteer",
    "lsa-rank",
    "measure",
    "mode",
    "format",
];

/// One layer of settings; `None` means the layer does not mention the key.
#[derive(Debug, Default, Clone)]
pub struct Layered {
    pub ocr: Option<OcrBackendKind>,
    pub ocr_endpoint: Option<String>,
    pub ocr_key_env: Option<String>,
    pub ocr_quota: Option<u64>,
    pub ocr_workers: Option<usize>,
    pub embed: Option<String>,
    pub embed_endpoint: Option<String>,
    pub embed_dim: Option<usize>,
    pub embed_seed: Option<u64>,
    pub lexicon: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub lsa_rank: Option<usize>,
    pub measure: Option<Measure>,
    pub mode: Option<AggregationMode>,
    pub format: Option<OutputFormat>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, origin: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::InvalidConfig(format!("{origin}: {key} expects a number, got {value:?}"))
    })
}

impl Layered {
    /// Applies one `key = value` pair; used by the file, env and flag layers
    /// so every source validates identically.
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        match key {
            "ocr" => self.ocr = Some(value.parse()?),
            "ocr-endpoint" => self.ocr_endpoint = Some(value.to_string()),
            "ocr-key-env" => self.ocr_key_env = Some(value.to_string()),
            "ocr-quota" => self.ocr_quota = Some(parse_num(key, value, origin)?),
            "ocr-workers" => self.ocr_workers = Some(parse_num(key, value, origin)?),
            "embed" => match value {
                "fallback" | "http" => self.embed = Some(value.to_string()),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{origin}: unknown embed provider {other:?} (expected fallback or http)"
                    )))
                }
            },
            "embed-endpoint" => self.embed_endpoint = Some(value.to_string()),
            "embed-dim" => self.embed_dim = Some(parse_num(key, value, origin)?),
            "embed-seed" => self.embed_seed = Some(parse_num(key, value, origin)?),
            "lexicon" => self.lexicon = Some(PathBuf::from(value)),
            "gazetteer" => self.gazetteer = Some(PathBuf::from(value)),
            "lsa-rank" => self.lsa_rank = Some(parse_num(key, value, origin)?),
            "measure" => {
                self.measure = Some(
                    value
                        .parse()
                        .map_err(|e| Error::InvalidConfig(format!("{origin}: {e}")))?,
                )
            }
            "mode" => self.mode = Some(value.parse()?),
            "format" => self.format = Some(value.parse()?),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{origin}: unknown key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment line.
    pub fn from_file(path: &Path) -> Result<Layered> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut layer = Layered::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = format!("{}:{}", path.display(), i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("{origin}: expected key=value")))?;
            layer.set(key.trim(), value.trim(), &origin)?;
        }
        Ok(layer)
    }

    /// Reads `IMGPLAG_*` variables through `lookup` (injectable for tests).
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Layered> {
        let mut layer = Layered::default();
        for key in KEYS {
            let var = format!("{ENV_PREFIX}{}", key.to_uppercase().replace('-', "_"));
            if let Some(value) = lookup(&var) {
                layer.set(key, &value, &format!("environment variable {var}"))?;
            }
        }
        Ok(layer)
    }

    pub fn from_env() -> Result<Layered> {
        Self::from_lookup(|var| std::env::var(var).ok())
    }

    /// Overlays `self` on `base`: any key this layer sets wins.
    pub fn over(self, base: Layered) -> Layered {
        Layered {
            ocr: self.ocr.or(base.ocr),
            ocr_endpoint: self.ocr_endpoint.or(base.ocr_endpoint),
            ocr_key_env: self.ocr_key_env.or(base.ocr_key_env),
            ocr_quota: self.ocr_quota.or(base.ocr_quota),
            ocr_workers: self.ocr_workers.or(base.ocr_workers),
            embed: self.embed.or(base.embed),
            embed_endpoint: self.embed_endpoint.or(base.embed_endpoint),
            embed_dim: self.embed_dim.or(base.embed_dim),
            embed_seed: self.embed_seed.or(base.embed_seed),
            lexicon: self.lexicon.or(base.lexicon),
            gazetteer: self.gazetteer.or(base.gazetteer),
            lsa_rank: self.lsa_rank.or(base.lsa_rank),
            measure: self.measure.or(base.measure),
            mode: self.mode.or(base.mode),
            format: self.format.or(base.format),
        }
    }

    pub fn ocr_config(&self) -> OcrConfig {
        let mut config = OcrConfig::default();
        if let Some(kind) = self.ocr {
            config.kind = kind;
        }
        if let Some(endpoint) = &self.ocr_endpoint {
            config.endpoint = Some(endpoint.clone());
        }
        if let Some(env) = &self.ocr_key_env {
            config.api_key_env = env.clone();
        }
        if self.ocr_quota.is_some() {
            config.quota = self.ocr_quota;
        }
        if let Some(workers) = self.ocr_workers {
            config.workers = workers;
        }
        config
    }

    /// True when any embedding key was given, i.e. the user asked for a
    /// provider different from whatever the index stored.
    pub fn any_embed_key(&self) -> bool {
        self.embed.is_some()
            || self.embed_endpoint.is_some()
            || self.embed_dim.is_some()
            || self.embed_seed.is_some()
    }

    pub fn embed_provider(&self) -> Result<EmbedProvider> {
        match self.embed.as_deref().unwrap_or("fallback") {
            "fallback" => {
                let dim = self.embed_dim.unwrap_or(DEFAULT_EMBED_DIM);
                if dim < 8 {
                    return Err(Error::InvalidConfig(format!(
                        "embed-dim must be at least 8, got {dim}"
                    )));
                }
                Ok(EmbedProvider::Fallback {
                    dim,
                    seed: self.embed_seed.unwrap_or(DEFAULT_EMBED_SEED),
                })
            }
            "http" => {
                let endpoint = self.embed_endpoint.clone().ok_or_else(|| {
                    Error::InvalidConfig("embed=http requires embed-endpoint".to_string())
                })?;
                Ok(EmbedProvider::Http { endpoint })
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown embed provider {other:?}"
            ))),
        }
    }
}
