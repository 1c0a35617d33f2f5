//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingServiceConfig;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_WINDOW;
use crate::samplers::{ProposalKind, SamplerConfig, SamplerKind};
use crate::tsne::{TsneConfig, TsneDistance};
use crate::vocabulary::TextMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerSelection {
    One(SamplerKind),
    Both,
}

impl SamplerSelection {
    pub fn kinds(self) -> Vec<SamplerKind> {
        match self {
            SamplerSelection::One(k) => vec![k],
            SamplerSelection::Both => vec![SamplerKind::RandomWalk, SamplerKind::MetropolisHastings],
        }
    }
}

impl FromStr for SamplerSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "both" {
            Ok(SamplerSelection::Both)
        } else {
            s.parse().map(SamplerSelection::One)
        }
    }
}

impl std::fmt::Display for SamplerSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplerSelection::One(k) => write!(f, "{k}"),
            SamplerSelection::Both => f.write_str("both"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::validation(format!("unknown report format {other:?} (expected json or csv)"))),
        }
    }
}

impl std::fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

/// Embedding service settings; the API key comes from the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSettings {
    pub endpoint: String,
    pub model: String,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub concurrency: usize,
}

impl ServiceSettings {
    pub fn client_config(&self) -> EmbeddingServiceConfig {
        let mut cfg = EmbeddingServiceConfig::new(self.endpoint.clone(), self.model.clone());
        cfg.batch_size = self.batch_size;
        cfg.timeout = Duration::from_secs(self.timeout_secs);
        cfg.max_concurrency = self.concurrency;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub vocabulary: PathBuf,
    /// Embeddings JSONL: read by simulate/project, written by embed.
    pub embeddings: PathBuf,
    pub service: Option<ServiceSettings>,
    pub cache_dir: PathBuf,
    pub text_mode: TextMode,
    pub sampler: SamplerConfig,
    pub samplers: SamplerSelection,
    pub window: usize,
    pub tsne: TsneConfig,
    pub output: PathBuf,
    pub format: ReportFormat,
    pub export_similarity: bool,
}

/// Per-field command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub temperature: Option<f64>,
    pub steps: Option<usize>,
    pub walks: Option<usize>,
    pub seed: Option<u64>,
    pub sampler: Option<SamplerSelection>,
    pub proposal: Option<ProposalKind>,
    pub lambda: Option<f64>,
    pub window: Option<usize>,
}

pub const KEYS: &[&str] = &[
    "vocabulary",
    "embeddings",
    "endpoint",
    "model",
    "batch_size",
    "timeout_secs",
    "concurrency",
    "cache_dir",
    "text_mode",
    "temperature",
    "steps",
    "walks",
    "seed",
    "sampler",
    "proposal",
    "lambda",
    "epsilon",
    "window",
    "tsne_perplexity",
    "tsne_iterations",
    "tsne_learning_rate",
    "tsne_seed",
    "tsne_distance",
    "output",
    "format",
    "export_similarity",
];

/// Parses `key = value` lines; `#` starts a comment and values may be quoted.
pub fn parse_key_values(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(origin, idx + 1, format!("expected `key = value`, got {line:?}")));
        };
        let key = key.trim();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if !KEYS.contains(&key) {
            return Err(Error::parse(origin, idx + 1, format!("unknown key {key:?}")));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::parse(origin, idx + 1, format!("key {key:?} given twice")));
        }
    }
    Ok(out)
}

fn field<T: FromStr>(map: &BTreeMap<String, String>, key: &str, origin: &Path) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| Error::validation(format!("{}: invalid value {v:?} for {key}: {e}", origin.display())))
        })
        .transpose()
}

impl RunConfig {
    /// Builds a config from parsed keys; relative paths resolve against `base`.
    pub fn from_map(map: &BTreeMap<String, String>, base: &Path, origin: &Path) -> Result<Self> {
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let vocabulary = map
            .get("vocabulary")
            .map(|v| resolve(v))
            .ok_or_else(|| Error::validation(format!("{}: `vocabulary` is required", origin.display())))?;
        let output = resolve(map.get("output").map_or("run", String::as_str));
        let embeddings = map
            .get("embeddings")
            .map(|v| resolve(v))
            .unwrap_or_else(|| output.join("embeddings.jsonl"));
        let cache_dir = map
            .get("cache_dir")
            .map(|v| resolve(v))
            .unwrap_or_else(|| output.join("cache"));
        let service = match map.get("endpoint") {
            Some(endpoint) => Some(ServiceSettings {
                endpoint: endpoint.clone(),
                model: map
                    .get("model")
                    .cloned()
                    .ok_or_else(|| Error::validation("`model` is required when `endpoint` is set"))?,
                batch_size: field(map, "batch_size", origin)?.unwrap_or(64),
                timeout_secs: field(map, "timeout_secs", origin)?.unwrap_or(60),
                concurrency: field(map, "concurrency", origin)?.unwrap_or(4),
            }),
            None => None,
        };
        let defaults = SamplerConfig::default();
        let samplers: SamplerSelection = field(map, "sampler", origin)?.unwrap_or(SamplerSelection::One(defaults.sampler));
        let sampler = SamplerConfig {
            temperature: field(map, "temperature", origin)?.unwrap_or(defaults.temperature),
            steps: field(map, "steps", origin)?.unwrap_or(defaults.steps),
            walks: field(map, "walks", origin)?.unwrap_or(defaults.walks),
            seed: field(map, "seed", origin)?.unwrap_or(defaults.seed),
            sampler: samplers.kinds()[0],
            proposal: field(map, "proposal", origin)?.unwrap_or(defaults.proposal),
            lambda: field(map, "lambda", origin)?.unwrap_or(defaults.lambda),
            epsilon: field(map, "epsilon", origin)?.unwrap_or(defaults.epsilon),
        };
        let td = TsneConfig::default();
        let tsne = TsneConfig {
            perplexity: field(map, "tsne_perplexity", origin)?.unwrap_or(td.perplexity),
            iterations: field(map, "tsne_iterations", origin)?.unwrap_or(td.iterations),
            learning_rate: field(map, "tsne_learning_rate", origin)?.unwrap_or(td.learning_rate),
            seed: field(map, "tsne_seed", origin)?.unwrap_or(sampler.seed),
            distance: field::<TsneDistance>(map, "tsne_distance", origin)?.unwrap_or(td.distance),
            ..td
        };
        Ok(RunConfig {
            vocabulary,
            embeddings,
            service,
            cache_dir,
            text_mode: field(map, "text_mode", origin)?.unwrap_or(TextMode::NamePlusDescription),
            sampler,
            samplers,
            window: field(map, "window", origin)?.unwrap_or(DEFAULT_WINDOW),
            tsne,
            output,
            format: field(map, "format", origin)?.unwrap_or(ReportFormat::Json),
            export_similarity: field(map, "export_similarity", origin)?.unwrap_or(false),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map = parse_key_values(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_map(&map, base, path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.temperature {
            self.sampler.temperature = v;
        }
        if let Some(v) = o.steps {
            self.sampler.steps = v;
        }
        if let Some(v) = o.walks {
            self.sampler.walks = v;
        }
        if let Some(v) = o.seed {
            self.sampler.seed = v;
        }
        if let Some(v) = o.sampler {
            self.samplers = v;
            self.sampler.sampler = v.kinds()[0];
        }
        if let Some(v) = o.proposal {
            self.sampler.proposal = v;
        }
        if let Some(v) = o.lambda {
            self.sampler.lambda = v;
        }
        if let Some(v) = o.window {
            self.window = v;
        }
    }

    /// Checks numeric bounds and that the vocabulary exists.
    pub fn validate(&self) -> Result<()> {
        if !self.vocabulary.is_file() {
            return Err(Error::validation(format!(
                "vocabulary file {} does not exist",
                self.vocabulary.display()
            )));
        }
        self.sampler.validate()?;
        if self.window == 0 {
            return Err(Error::validation("window must be at least 1"));
        }
        if let Some(s) = &self.service {
            s.client_config().validate()?;
        }
        Ok(())
    }

    /// Settings that determine artifact contents, as `key → value`.
    /// Output location and transport tuning are left out.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("vocabulary", self.vocabulary.display().to_string());
        put("embeddings", self.embeddings.display().to_string());
        if let Some(s) = &self.service {
            put("endpoint", s.endpoint.clone());
            put("model", s.model.clone());
        }
        put("text_mode", self.text_mode.to_string());
        put("temperature", format!("{:?}", self.sampler.temperature));
        put("steps", self.sampler.steps.to_string());
        put("walks", self.sampler.walks.to_string());
        put("seed", self.sampler.seed.to_string());
        put("sampler", self.samplers.to_string());
        put("proposal", self.sampler.proposal.to_string());
        put("lambda", format!("{:?}", self.sampler.lambda));
        put("epsilon", format!("{:?}", self.sampler.epsilon));
        put("window", self.window.to_string());
        put("tsne_perplexity", format!("{:?}", self.tsne.perplexity));
        put("tsne_iterations", self.tsne.iterations.to_string());
        put("tsne_learning_rate", format!("{:?}", self.tsne.learning_rate));
        put("tsne_seed", self.tsne.seed.to_string());
        put(
            "tsne_distance",
            match self.tsne.distance {
                TsneDistance::SquaredEuclidean => "squared_euclidean",
                TsneDistance::Cosine => "cosine",
            }
            .to_string(),
        );
        put("format", self.format.to_string());
        m
    }

    /// SHA-256 over the echoed settings, one `key=value` line each.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.echo() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
