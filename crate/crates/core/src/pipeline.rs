//! Subcommand implementations writing artifacts into the run directory.
//!
//! Every artifact `<file>` gets a `<file>.meta.json` sidecar naming the config
//! hash that produced it. Wall-clock timings go to `timings.json`, kept apart
//! so that everything else in a run directory is reproducible byte for byte.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ReportFormat, RunConfig};
use crate::embedding::{load_embeddings, EmbeddingClient, Transport};
use crate::error::{Error, Result};
use crate::metrics::{
    deviation_points, patch_leaving_stat, switch_profile, AnnotatedTrace, DeviationSet, PatchLeaving, SwitchProfile,
};
use crate::samplers::{read_traces, simulate, write_traces, SamplerConfig, SamplerKind};
use crate::similarity::{cosine_similarity_matrix, export_matrix_csv};
use crate::stats::{ols_regression, round4, round_p, RegressionResult};
use crate::tsne::{tsne, write_projection};
use crate::vocabulary::{load_vocabulary, Vocabulary};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TIMINGS_FILE: &str = "timings.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const DEVIATION_AGGREGATION: &str = "mean_over_patches";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub producer: String,
    pub version: String,
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::io(path, e.into()))?;
    writeln!(f).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

fn write_meta(artifact: &Path, hash: &str, producer: &str) -> Result<()> {
    write_json(
        &meta_path(artifact),
        &ArtifactMeta {
            config_hash: hash.to_string(),
            producer: producer.to_string(),
            version: VERSION.to_string(),
        },
    )
}

/// Fails unless `artifact` carries a sidecar naming `hash`.
pub fn check_provenance(artifact: &Path, hash: &str) -> Result<()> {
    let meta = meta_path(artifact);
    if !meta.is_file() {
        return Err(Error::validation(format!(
            "{} has no provenance sidecar {}",
            artifact.display(),
            meta.display()
        )));
    }
    let m: ArtifactMeta = read_json(&meta)?;
    if m.config_hash != hash {
        return Err(Error::validation(format!(
            "{} was produced by config {} but the current config hashes to {hash}; re-run `{}` with this config",
            artifact.display(),
            m.config_hash,
            m.producer
        )));
    }
    Ok(())
}

fn record_timing(cfg: &RunConfig, step: &str, started: Instant) -> Result<()> {
    let path = cfg.output.join(TIMINGS_FILE);
    let mut all: BTreeMap<String, f64> = if path.is_file() { read_json(&path)? } else { BTreeMap::new() };
    all.insert(format!("{step}_secs"), started.elapsed().as_secs_f64());
    write_json(&path, &all)
}

fn ensure_output(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))
}

pub fn traces_file(kind: SamplerKind) -> String {
    format!("traces_{kind}.jsonl")
}

pub fn profile_file(kind: SamplerKind) -> String {
    format!("profile_{kind}.csv")
}

pub fn deviation_file(kind: SamplerKind) -> String {
    format!("deviation_{kind}.csv")
}

pub fn patch_file(kind: SamplerKind) -> String {
    format!("patch_leaving_{kind}.json")
}

fn load_vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    cfg.validate()?;
    load_vocabulary(&cfg.vocabulary)
}

/// Fetches embeddings for the configured text mode through `client`.
pub fn embed_with<T: Transport>(cfg: &RunConfig, client: &EmbeddingClient<T>) -> Result<PathBuf> {
    let started = Instant::now();
    let vocab = load_vocab(cfg)?;
    let texts = vocab.compose_texts(cfg.text_mode)?;
    ensure_output(cfg)?;
    let e = client.fetch(&texts, &cfg.cache_dir)?;
    if let Some(parent) = cfg.embeddings.parent() {
        fs::create_dir_all(parent).map_err(|err| Error::io(parent, err))?;
    }
    e.write_jsonl(&cfg.embeddings)?;
    write_meta(&cfg.embeddings, &cfg.hash(), "embed")?;
    log::info!("wrote {} embeddings of dimension {} to {}", e.len(), e.dimension(), cfg.embeddings.display());
    record_timing(cfg, "embed", started)?;
    Ok(cfg.embeddings.clone())
}

pub fn cmd_embed(cfg: &RunConfig) -> Result<PathBuf> {
    let service = cfg
        .service
        .as_ref()
        .ok_or_else(|| Error::validation("`embed` needs `endpoint` and `model` in the config"))?;
    let client = EmbeddingClient::http(service.client_config())?;
    embed_with(cfg, &client)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let vocab = load_vocab(cfg)?;
    let e = load_embeddings(&cfg.embeddings, &vocab)?;
    let s = cosine_similarity_matrix(&e)?;
    let (within, across) = s.mean_within_and_across(vocab.scheme());
    log::info!("mean similarity within categories {within:.4}, across {across:.4}");
    ensure_output(cfg)?;
    let hash = cfg.hash();
    if cfg.export_similarity {
        let path = cfg.output.join("similarity.csv");
        export_matrix_csv(s.matrix(), &vocab, &path)?;
        write_meta(&path, &hash, "simulate")?;
    }
    let mut written = Vec::new();
    for kind in cfg.samplers.kinds() {
        let scfg = SamplerConfig {
            sampler: kind,
            ..cfg.sampler.clone()
        };
        let traces = simulate(&s, vocab.scheme(), &scfg)?;
        let path = cfg.output.join(traces_file(kind));
        write_traces(&traces, &path)?;
        write_meta(&path, &hash, "simulate")?;
        log::info!("wrote {} {kind} traces to {}", traces.len(), path.display());
        written.push(path);
    }
    record_timing(cfg, "simulate", started)?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub aggregation: String,
    pub points: usize,
    pub skipped_walks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub sampler: SamplerKind,
    pub walks: usize,
    pub steps: usize,
    /// Deviation regression `y = |last IRT − mean IRT|` on `x = unique items`.
    pub regression: Option<RegressionResult>,
    pub regression_note: Option<String>,
    pub deviation: DeviationSummary,
    pub switch_profile: SwitchProfile,
    pub profile_argmax: Option<i64>,
    pub patch_leaving: PatchLeaving,
    /// Input and output artifacts, relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub samplers: Vec<SamplerReport>,
    /// Wall-clock timings, kept out of this file for reproducibility.
    pub timings: String,
}

/// Statistics for one set of walks; shared by `analyze` and the tests.
pub struct Analysis {
    pub profile: SwitchProfile,
    pub patch: PatchLeaving,
    pub deviation: DeviationSet,
    pub regression: Result<RegressionResult>,
}

pub fn analyze_traces(annotated: &[AnnotatedTrace], window: usize) -> Result<Analysis> {
    let profile = switch_profile(annotated, window)?;
    let patch = patch_leaving_stat(annotated)?;
    let deviation = deviation_points(annotated);
    let regression = ols_regression(&deviation.xy());
    Ok(Analysis {
        profile,
        patch,
        deviation,
        regression,
    })
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    let vocab = load_vocab(cfg)?;
    let hash = cfg.hash();
    let mut samplers = Vec::new();
    for kind in cfg.samplers.kinds() {
        let traces_path = cfg.output.join(traces_file(kind));
        check_provenance(&traces_path, &hash)?;
        let traces = read_traces(&traces_path, vocab.len())?;
        let annotated: Vec<AnnotatedTrace> = traces
            .iter()
            .map(|t| AnnotatedTrace::new(t.walk, &t.steps, vocab.scheme()))
            .collect();
        let a = analyze_traces(&annotated, cfg.window)?;
        let (regression, regression_note) = match a.regression {
            Ok(r) => (Some(r), None),
            Err(e) => {
                log::warn!("{kind}: deviation regression unavailable: {e}");
                (None, Some(e.to_string()))
            }
        };
        let mut artifacts = BTreeMap::new();
        artifacts.insert("traces".to_string(), traces_file(kind));
        for (key, name) in [
            ("profile", profile_file(kind)),
            ("deviation", deviation_file(kind)),
            ("patch_leaving", patch_file(kind)),
        ] {
            let path = cfg.output.join(&name);
            match key {
                "profile" => a.profile.write_csv(&path)?,
                "deviation" => a.deviation.write_csv(&path)?,
                _ => write_json(&path, &a.patch)?,
            }
            write_meta(&path, &hash, "analyze")?;
            artifacts.insert(key.to_string(), name);
        }
        samplers.push(SamplerReport {
            sampler: kind,
            walks: traces.len(),
            steps: cfg.sampler.steps,
            regression,
            regression_note,
            deviation: DeviationSummary {
                aggregation: DEVIATION_AGGREGATION.to_string(),
                points: a.deviation.points.len(),
                skipped_walks: a.deviation.skipped,
            },
            profile_argmax: a.profile.argmax(),
            switch_profile: a.profile,
            patch_leaving: a.patch,
            artifacts,
        });
    }
    let report = RunReport {
        version: VERSION.to_string(),
        config_hash: hash.clone(),
        config: cfg.echo(),
        samplers,
        timings: TIMINGS_FILE.to_string(),
    };
    let json = cfg.output.join(REPORT_JSON);
    write_json(&json, &report)?;
    write_meta(&json, &hash, "analyze")?;
    if cfg.format == ReportFormat::Csv {
        let csv_path = cfg.output.join(REPORT_CSV);
        write_report_csv(&report, &csv_path)?;
        write_meta(&csv_path, &hash, "analyze")?;
    }
    record_timing(cfg, "analyze", started)?;
    Ok(report)
}

const CSV_COLUMNS: [&str; 14] = [
    "sampler",
    "walks",
    "steps",
    "slope",
    "intercept",
    "slope_se",
    "t",
    "p_value",
    "r_squared",
    "n",
    "patch_leaving_ratio",
    "patch_paired_mean_difference",
    "profile_argmax",
    "config_hash",
];

fn write_report_csv(report: &RunReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for s in &report.samplers {
        let reg = |f: fn(&RegressionResult) -> String| s.regression.as_ref().map(f).unwrap_or_default();
        w.write_record([
            s.sampler.to_string(),
            s.walks.to_string(),
            s.steps.to_string(),
            reg(|r| format!("{:?}", r.slope)),
            reg(|r| format!("{:?}", r.intercept)),
            reg(|r| format!("{:?}", r.slope_se)),
            reg(|r| format!("{:?}", r.t)),
            reg(|r| format!("{:?}", r.p_value)),
            reg(|r| format!("{:?}", r.r_squared)),
            reg(|r| r.n.to_string()),
            format!("{:?}", s.patch_leaving.ratio),
            format!("{:?}", s.patch_leaving.paired_mean_difference),
            s.profile_argmax.map(|r| r.to_string()).unwrap_or_default(),
            report.config_hash.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_project(cfg: &RunConfig) -> Result<PathBuf> {
    let started = Instant::now();
    let vocab = load_vocab(cfg)?;
    let e = load_embeddings(&cfg.embeddings, &vocab)?;
    let out = tsne(&e, &cfg.tsne)?;
    ensure_output(cfg)?;
    let path = cfg.output.join("tsne.csv");
    write_projection(&out, &vocab, &cfg.tsne, &path)?;
    let hash = cfg.hash();
    write_meta(&path, &hash, "project")?;
    write_meta(&path.with_extension("json"), &hash, "project")?;
    log::info!("t-SNE final KL {:.6}", out.kl);
    record_timing(cfg, "project", started)?;
    Ok(path)
}

/// Renders the analysis with 4-decimal rounding after checking that every
/// artifact it references was produced under the current config.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let hash = cfg.hash();
    let json = cfg.output.join(REPORT_JSON);
    check_provenance(&json, &hash)?;
    let report: RunReport = read_json(&json)?;
    if report.config_hash != hash {
        return Err(Error::validation(format!(
            "{} records config {} but the current config hashes to {hash}",
            json.display(),
            report.config_hash
        )));
    }
    for s in &report.samplers {
        for name in s.artifacts.values() {
            check_provenance(&cfg.output.join(name), &hash)?;
        }
    }
    Ok(render_report(&report))
}

pub fn render_report(report: &RunReport) -> String {
    let mut out = format!("config {}  (forage {})\n", report.config_hash, report.version);
    out.push_str(&format!(
        "{:<22}{:>12}{:>12}{:>14}{:>10}{:>8}{:>10}{:>8}\n",
        "sampler", "slope", "intercept", "p-value", "t", "n", "patch", "peak r"
    ));
    for s in &report.samplers {
        let (slope, intercept, p, t, n) = match &s.regression {
            Some(r) => (round4(r.slope), round4(r.intercept), round_p(r.p_value), round4(r.t), r.n.to_string()),
            None => Default::default(),
        };
        out.push_str(&format!(
            "{:<22}{:>12}{:>12}{:>14}{:>10}{:>8}{:>10}{:>8}\n",
            s.sampler.to_string(),
            slope,
            intercept,
            p,
            t,
            n,
            round4(s.patch_leaving.ratio),
            s.profile_argmax.map(|r| format!("{r:+}")).unwrap_or_default()
        ));
    }
    for s in &report.samplers {
        out.push_str(&format!("\nswitch profile ({})\n", s.sampler));
        for row in &s.switch_profile.rows {
            out.push_str(&format!(
                "{:>4}  {:>8}  n={}\n",
                format!("{:+}", row.relative_position),
                row.mean_irt_ratio.map(round4).unwrap_or_else(|| "-".into()),
                row.n
            ));
        }
    }
    out
}
