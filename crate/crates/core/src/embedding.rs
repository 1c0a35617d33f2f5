//! Embedding vectors per vocabulary item: JSON Lines files and a cached
//! HTTP client for remote embedding services.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::vocabulary::Vocabulary;

pub const API_KEY_ENV: &str = "EMBED_API_KEY";
const ZERO_NORM: f64 = 1e-12;

/// N×D embedding vectors, row i for item i.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vectors: DenseMatrix,
}

impl EmbeddingMatrix {
    pub fn new(vectors: DenseMatrix) -> Result<Self> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(Error::validation("embedding matrix must be non-empty"));
        }
        for (i, row) in vectors.row_iter().enumerate() {
            if let Some(k) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "embedding {i} has a non-finite entry at dimension {k}"
                )));
            }
            if dot(row, row).sqrt() <= ZERO_NORM {
                return Err(Error::validation(format!("embedding {i} is the zero vector")));
            }
        }
        Ok(EmbeddingMatrix { vectors })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if let Some(first) = rows.first() {
            let d = first.as_ref().len();
            if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != d) {
                return Err(Error::validation(format!(
                    "embedding {bad} has dimension {} but expected {d}",
                    rows[bad].as_ref().len()
                )));
            }
        }
        Self::new(DenseMatrix::from_rows(rows))
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.vectors.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    /// Writes one `{"id","vector"}` object per line, shortest round-trip decimals.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, vector) in self.vectors.row_iter().enumerate() {
            let line = serde_json::to_string(&EmbeddingRecord {
                id,
                vector: vector.to_vec(),
            })
            .expect("finite floats serialize");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord {
    id: usize,
    vector: Vec<f64>,
}

/// Load a JSON Lines embeddings file; rows are reordered by item id.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let n = vocab.len();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut dim = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno, format!("invalid embedding record: {e}")))?;
        if rec.id >= n {
            return Err(Error::parse(
                path,
                lineno,
                format!("id {} outside vocabulary of {n} items", rec.id),
            ));
        }
        if let Some(k) = rec.vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(
                path,
                lineno,
                format!("id {}: non-finite entry at dimension {k}", rec.id),
            ));
        }
        let d = *dim.get_or_insert(rec.vector.len());
        if rec.vector.len() != d {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "id {}: dimension mismatch ({} but expected {d})",
                    rec.id,
                    rec.vector.len()
                ),
            ));
        }
        if rows[rec.id].replace(rec.vector).is_some() {
            return Err(Error::parse(path, lineno, format!("id {} appears twice", rec.id)));
        }
    }
    let mut out = Vec::with_capacity(n);
    for (id, row) in rows.into_iter().enumerate() {
        out.push(row.ok_or_else(|| {
            Error::parse(path, 0, format!("missing embedding for id {id}"))
        })?);
    }
    EmbeddingMatrix::from_rows(&out).map_err(|e| match e {
        Error::Validation(m) => Error::parse(path, 0, m),
        other => other,
    })
}

#[derive(Debug, Clone)]
pub struct EmbeddingServiceConfig {
    pub endpoint: String,
    pub model: String,
    pub batch_size: usize,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_concurrency: usize,
    /// Delay before the second attempt; doubles on each further retry.
    pub backoff: Duration,
    /// Request body field carrying the model name.
    pub model_field: String,
    /// Request body field carrying the list of texts.
    pub input_field: String,
    /// Response field holding the list of result objects.
    pub data_field: String,
    /// Field of each result object holding the vector.
    pub embedding_field: String,
}

pub const MAX_ATTEMPTS: usize = 3;

impl EmbeddingServiceConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        EmbeddingServiceConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            batch_size: 64,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
            max_concurrency: 4,
            backoff: Duration::from_millis(500),
            model_field: "model".into(),
            input_field: "input".into(),
            data_field: "data".into(),
            embedding_field: "embedding".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if self.timeout.is_zero() {
            return Err(Error::validation("timeout must be positive"));
        }
        if self.max_concurrency == 0 {
            return Err(Error::validation("concurrency must be at least 1"));
        }
        if self.endpoint.trim().is_empty() {
            return Err(Error::validation("embedding endpoint is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// One JSON POST. Implementations return `Err` only for connection-level failures.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<TransportResponse, String>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<TransportResponse, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(TransportResponse { status, body })
    }
}

/// Client that batches texts, retries transient failures, and caches every
/// vector on disk keyed by `sha256(model ␟ text)`.
pub struct EmbeddingClient<T: Transport = HttpTransport> {
    cfg: EmbeddingServiceConfig,
    transport: T,
    requests: AtomicUsize,
}

impl EmbeddingClient<HttpTransport> {
    pub fn http(cfg: EmbeddingServiceConfig) -> Result<Self> {
        Self::with_transport(cfg, HttpTransport)
    }
}

impl<T: Transport> EmbeddingClient<T> {
    pub fn with_transport(cfg: EmbeddingServiceConfig, transport: T) -> Result<Self> {
        cfg.validate()?;
        Ok(EmbeddingClient {
            cfg,
            transport,
            requests: AtomicUsize::new(0),
        })
    }

    /// HTTP requests issued so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> &EmbeddingServiceConfig {
        &self.cfg
    }

    pub fn fetch(&self, texts: &[String], cache: &Path) -> Result<EmbeddingMatrix> {
        fs::create_dir_all(cache).map_err(|e| Error::io(cache, e))?;
        let mut vectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let path = cache_path(cache, &self.cfg.model, text);
            let cached = read_cached(&path)?;
            if cached.is_none() {
                missing.push(i);
            }
            vectors.push(cached);
        }

        let batches: Vec<&[usize]> = missing.chunks(self.cfg.batch_size).collect();
        let results: Mutex<Vec<(usize, Vec<f64>)>> = Mutex::new(Vec::new());
        let first_error: Mutex<Option<(usize, Error)>> = Mutex::new(None);
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_concurrency.min(batches.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let b = next.fetch_add(1, Ordering::SeqCst);
                    if b >= batches.len() || first_error.lock().unwrap().is_some() {
                        break;
                    }
                    let idx = batches[b];
                    let batch_texts: Vec<&str> = idx.iter().map(|&i| texts[i].as_str()).collect();
                    match self.request_batch(&batch_texts) {
                        Ok(vs) => results.lock().unwrap().extend(idx.iter().copied().zip(vs)),
                        Err(e) => {
                            let mut slot = first_error.lock().unwrap();
                            if slot.as_ref().is_none_or(|(prev, _)| b < *prev) {
                                *slot = Some((b, e));
                            }
                        }
                    }
                });
            }
        });
        if let Some((_, e)) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        for (i, v) in results.into_inner().unwrap() {
            write_cached(&cache_path(cache, &self.cfg.model, &texts[i]), &v)?;
            vectors[i] = Some(v);
        }

        let rows: Vec<Vec<f64>> = vectors
            .into_iter()
            .map(|v| v.expect("every text either cached or fetched"))
            .collect();
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().position(|r| r.len() != first.len()) {
                return Err(Error::Service(format!(
                    "dimension inconsistency: text {bad} has {} dims, text 0 has {}",
                    rows[bad].len(),
                    first.len()
                )));
            }
        }
        EmbeddingMatrix::from_rows(&rows)
    }

    fn request_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut body = serde_json::Map::new();
        body.insert(self.cfg.model_field.clone(), Value::from(self.cfg.model.clone()));
        body.insert(
            self.cfg.input_field.clone(),
            Value::from(texts.iter().map(|t| Value::from(*t)).collect::<Vec<_>>()),
        );
        let body = Value::Object(body);

        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.transport.post_json(
                &self.cfg.endpoint,
                self.cfg.api_key.as_deref(),
                &body,
                self.cfg.timeout,
            ) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return self.parse_response(&resp.body, texts.len());
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last = format!("HTTP {}: {}", resp.status, truncate(&resp.body));
                }
                Ok(resp) => {
                    return Err(Error::Service(format!(
                        "HTTP {}: {}",
                        resp.status,
                        truncate(&resp.body)
                    )));
                }
                Err(e) => last = e,
            }
            if attempt < MAX_ATTEMPTS {
                log::warn!("embedding request attempt {attempt} failed ({last}); retrying");
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(Error::RetriesExhausted {
            attempts: MAX_ATTEMPTS,
            last,
        })
    }

    fn parse_response(&self, body: &str, expected: usize) -> Result<Vec<Vec<f64>>> {
        let value: Value = serde_json::from_str(body)
            .map_err(|e| Error::Service(format!("response is not JSON: {e}")))?;
        let data = value
            .get(&self.cfg.data_field)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Service(format!("response has no `{}` array", self.cfg.data_field)))?;
        if data.len() != expected {
            return Err(Error::Service(format!(
                "response carries {} vectors for {expected} inputs",
                data.len()
            )));
        }
        let mut out: Vec<Option<Vec<f64>>> = vec![None; expected];
        for (k, entry) in data.iter().enumerate() {
            let slot = match entry.get("index").and_then(Value::as_u64) {
                Some(i) if (i as usize) < expected => i as usize,
                Some(i) => return Err(Error::Service(format!("response index {i} out of range"))),
                None => k,
            };
            let vector = entry
                .get(&self.cfg.embedding_field)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Service(format!("response entry {k} is missing a vector")))?
                .iter()
                .map(|x| x.as_f64().filter(|f| f.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::Service(format!("response entry {k} has a non-numeric value")))?;
            out[slot] = Some(vector);
        }
        out.into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| Error::Service(format!("response is missing a vector for input {k}"))))
            .collect()
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Hex SHA-256 of `model`, a unit separator, and the exact text.
pub fn cache_key(model: &str, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0x1f]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, model: &str, text: &str) -> PathBuf {
    dir.join(format!("{}.json", cache_key(model, text)))
}

fn read_cached(path: &Path) -> Result<Option<Vec<f64>>> {
    match fs::read_to_string(path) {
        Ok(s) => serde_json::from_str(&s)
            .map(Some)
            .map_err(|e| Error::parse(path, 1, format!("corrupt cache entry: {e}"))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn write_cached(path: &Path, vector: &[f64]) -> Result<()> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::SeqCst)
    ));
    let json = serde_json::to_string(vector).expect("finite floats serialize");
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Convenience wrapper over [`EmbeddingClient::fetch`] using HTTP.
pub fn fetch_embeddings(
    cfg: &EmbeddingServiceConfig,
    texts: &[String],
    cache: &Path,
) -> Result<EmbeddingMatrix> {
    EmbeddingClient::http(cfg.clone())?.fetch(texts, cache)
}
