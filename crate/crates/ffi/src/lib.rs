//! C ABI over `forage-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`ForageStatus`]; on failure a description is available from
//! [`forage_last_error`] on the same thread until the next failing call.
//!
//! Variable-length results are written into caller buffers: pass the buffer
//! and its capacity, and the required length is always stored in `out_len`.
//! A short buffer yields `FORAGE_STATUS_BUFFER_TOO_SMALL` with nothing written.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use forage::embedding::{load_embeddings, EmbeddingMatrix};
use forage::matrix::DenseMatrix;
use forage::metrics::fluency_trace;
use forage::samplers::{
    random_walk, rng_from_seed, softmax_transition_matrix, stationary_distribution, MetropolisHastings, ProposalKind,
    SamplerConfig, SamplerKind, TransitionMatrix,
};
use forage::similarity::{cosine_similarity_matrix, SimilarityMatrix};
use forage::stats::{ols_regression, student_t_two_sided_p};
use forage::tsne::{tsne, TsneConfig};
use forage::vocabulary::{load_vocabulary, Vocabulary};
use forage::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForageStatus {
    Ok = 0,
    /// Invalid input, configuration or file contents.
    Validation = 1,
    /// Numerical failure, including non-convergence and empty statistics.
    Numeric = 2,
    /// File system or embedding-service failure.
    Io = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// The output buffer is smaller than `out_len`.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Proposal distribution for Metropolis-Hastings walks.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForageProposal {
    Uniform = 0,
    Softmax = 1,
}

/// Ordinary least squares fit of `y` on `x`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ForageRegression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub t: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub struct ForageVocabulary(Vocabulary);
pub struct ForageEmbeddings(EmbeddingMatrix);
pub struct ForageSimilarity(SimilarityMatrix);
pub struct ForageTransition(TransitionMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Core(Error),
    Null(&'static str),
    TooSmall { needed: usize, capacity: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> ForageStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ForageStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            let status = match e.exit_code() {
                1 => ForageStatus::Validation,
                2 => ForageStatus::Numeric,
                _ => ForageStatus::Io,
            };
            set_error(e.to_string());
            status
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed for `{name}`"));
            ForageStatus::NullPointer
        }
        Ok(Err(Failure::TooSmall { needed, capacity })) => {
            set_error(format!("output buffer holds {capacity} elements but {needed} are needed"));
            ForageStatus::BufferTooSmall
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ForageStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path(p: *const c_char, name: &'static str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::validation(format!("`{name}` is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut T, value: T, name: &'static str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

/// Stores `values.len()` in `out_len`, then copies into `out` if it fits.
unsafe fn fill<T: Copy>(values: &[T], out: *mut T, capacity: usize, out_len: *mut usize) -> FfiResult<()> {
    put(out_len, values.len(), "out_len")?;
    if values.len() > capacity {
        return Err(Failure::TooSmall {
            needed: values.len(),
            capacity,
        });
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn forage_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn forage_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a vocabulary CSV (`name,description,categories`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_vocabulary_load(path_: *const c_char, out: *mut *mut ForageVocabulary) -> ForageStatus {
    guard(|| {
        let v = load_vocabulary(&path(path_, "path")?)?;
        put(out, boxed(ForageVocabulary(v)), "out")
    })
}

/// # Safety
/// `v` must be null or a handle from `forage_vocabulary_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn forage_vocabulary_free(v: *mut ForageVocabulary) {
    free(v)
}

/// Number of items, or 0 for a null handle.
///
/// # Safety
/// `v` must be null or a live vocabulary handle.
#[no_mangle]
pub unsafe extern "C" fn forage_vocabulary_len(v: *const ForageVocabulary) -> usize {
    v.as_ref().map_or(0, |v| v.0.len())
}

/// Copies a row-major `n × dimension` buffer into an embedding matrix.
///
/// # Safety
/// `data` must point to `n * dimension` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_embeddings_new(
    data: *const f64,
    n: usize,
    dimension: usize,
    out: *mut *mut ForageEmbeddings,
) -> ForageStatus {
    guard(|| {
        let flat = slice(data, n.checked_mul(dimension).ok_or(Error::validation("n × dimension overflows"))?, "data")?;
        let rows: Vec<&[f64]> = if dimension == 0 { Vec::new() } else { flat.chunks(dimension).collect() };
        put(out, boxed(ForageEmbeddings(EmbeddingMatrix::from_rows(&rows)?)), "out")
    })
}

/// Loads a JSON Lines embeddings file aligned to `vocabulary`.
///
/// # Safety
/// `path` must be a NUL-terminated string, `vocabulary` a live handle and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forage_embeddings_load(
    path_: *const c_char,
    vocabulary: *const ForageVocabulary,
    out: *mut *mut ForageEmbeddings,
) -> ForageStatus {
    guard(|| {
        let e = load_embeddings(&path(path_, "path")?, &get(vocabulary, "vocabulary")?.0)?;
        put(out, boxed(ForageEmbeddings(e)), "out")
    })
}

/// # Safety
/// `e` must be null or a live embeddings handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn forage_embeddings_free(e: *mut ForageEmbeddings) {
    free(e)
}

/// Pairwise cosine similarities.
///
/// # Safety
/// `embeddings` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forage_similarity_cosine(
    embeddings: *const ForageEmbeddings,
    out: *mut *mut ForageSimilarity,
) -> ForageStatus {
    guard(|| {
        let s = cosine_similarity_matrix(&get(embeddings, "embeddings")?.0)?;
        put(out, boxed(ForageSimilarity(s)), "out")
    })
}

/// Wraps a symmetric row-major `n × n` similarity buffer.
///
/// # Safety
/// `data` must point to `n * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_similarity_new(data: *const f64, n: usize, out: *mut *mut ForageSimilarity) -> ForageStatus {
    guard(|| {
        let flat = slice(data, n.checked_mul(n).ok_or(Error::validation("n × n overflows"))?, "data")?;
        let rows: Vec<&[f64]> = if n == 0 { Vec::new() } else { flat.chunks(n).collect() };
        let s = SimilarityMatrix::from_matrix(DenseMatrix::from_rows(&rows))?;
        put(out, boxed(ForageSimilarity(s)), "out")
    })
}

/// # Safety
/// `s` must be null or a live similarity handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn forage_similarity_free(s: *mut ForageSimilarity) {
    free(s)
}

/// Number of items, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live similarity handle.
#[no_mangle]
pub unsafe extern "C" fn forage_similarity_len(s: *const ForageSimilarity) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Similarity of items `i` and `j`.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forage_similarity_get(s: *const ForageSimilarity, i: usize, j: usize, out: *mut f64) -> ForageStatus {
    guard(|| {
        let s = &get(s, "similarity")?.0;
        if i >= s.len() || j >= s.len() {
            return Err(Error::validation(format!("index ({i}, {j}) out of range for {} items", s.len())).into());
        }
        put(out, s.get(i, j), "out")
    })
}

/// Softmax transitions `exp(S_ij / T)` with the diagonal excluded.
///
/// # Safety
/// `similarity` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forage_transition_softmax(
    similarity: *const ForageSimilarity,
    temperature: f64,
    out: *mut *mut ForageTransition,
) -> ForageStatus {
    guard(|| {
        let p = softmax_transition_matrix(&get(similarity, "similarity")?.0, temperature)?;
        put(out, boxed(ForageTransition(p)), "out")
    })
}

/// # Safety
/// `p` must be null or a live transition handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn forage_transition_free(p: *mut ForageTransition) {
    free(p)
}

/// Transition probability from `i` to `j`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forage_transition_prob(p: *const ForageTransition, i: usize, j: usize, out: *mut f64) -> ForageStatus {
    guard(|| {
        let p = &get(p, "transition")?.0;
        if i >= p.len() || j >= p.len() {
            return Err(Error::validation(format!("index ({i}, {j}) out of range for {} states", p.len())).into());
        }
        put(out, p.prob(i, j), "out")
    })
}

/// Stationary distribution by power iteration (fails on periodic chains).
///
/// # Safety
/// `p` must be a live handle; `out` must hold `capacity` doubles and
/// `out_len` be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_stationary_distribution(
    p: *const ForageTransition,
    tolerance: f64,
    max_iterations: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> ForageStatus {
    guard(|| {
        let d = stationary_distribution(&get(p, "transition")?.0, tolerance, max_iterations)?;
        fill(&d.probabilities, out, capacity, out_len)
    })
}

/// A `steps`-long random walk from `start` using a ChaCha8 stream seeded by `seed`.
///
/// # Safety
/// `p` must be a live handle; `out` must hold `capacity` items and
/// `out_len` be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_random_walk(
    p: *const ForageTransition,
    start: usize,
    steps: usize,
    seed: u64,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> ForageStatus {
    guard(|| {
        let p = &get(p, "transition")?.0;
        if start >= p.len() {
            return Err(Error::validation(format!("start {start} out of range for {} states", p.len())).into());
        }
        if steps == 0 {
            return Err(Error::validation("steps must be at least 1").into());
        }
        put(out_len, steps, "out_len")?;
        if steps > capacity {
            return Err(Failure::TooSmall { needed: steps, capacity });
        }
        let cfg = SamplerConfig {
            steps,
            ..SamplerConfig::default()
        };
        let trace = random_walk(p, start, &cfg, &mut rng_from_seed(seed));
        fill(&trace.steps, out, capacity, out_len)
    })
}

/// A Metropolis-Hastings walk whose target profitability decays by `lambda`
/// per retrieved item sharing a category, floored at `epsilon`.
///
/// # Safety
/// `similarity` and `vocabulary` must be live handles describing the same
/// items; `out` must hold `capacity` items and `out_len` be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_mh_walk(
    similarity: *const ForageSimilarity,
    vocabulary: *const ForageVocabulary,
    proposal: ForageProposal,
    temperature: f64,
    lambda: f64,
    epsilon: f64,
    start: usize,
    steps: usize,
    seed: u64,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> ForageStatus {
    guard(|| {
        let s = &get(similarity, "similarity")?.0;
        let vocab = &get(vocabulary, "vocabulary")?.0;
        let cfg = SamplerConfig {
            temperature,
            steps,
            walks: 1,
            seed,
            sampler: SamplerKind::MetropolisHastings,
            proposal: match proposal {
                ForageProposal::Uniform => ProposalKind::Uniform,
                ForageProposal::Softmax => ProposalKind::Softmax,
            },
            lambda,
            epsilon,
        };
        cfg.validate()?;
        if start >= s.len() {
            return Err(Error::validation(format!("start {start} out of range for {} items", s.len())).into());
        }
        put(out_len, steps, "out_len")?;
        if steps > capacity {
            return Err(Failure::TooSmall { needed: steps, capacity });
        }
        let mh = MetropolisHastings::new(s, vocab.scheme(), &cfg)?;
        let trace = mh.walk(start, steps, &mut rng_from_seed(seed));
        fill(&trace.steps, out, capacity, out_len)
    })
}

/// Inter-item retrieval times between consecutive first occurrences in a
/// raw trace: `K − 1` values for `K` unique items.
///
/// # Safety
/// `steps` must point to `len` items; `out` must hold `capacity` values and
/// `out_len` be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_irts(
    steps: *const usize,
    len: usize,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> ForageStatus {
    guard(|| {
        let irts = fluency_trace(slice(steps, len, "steps")?).irts();
        fill(&irts, out, capacity, out_len)
    })
}

/// OLS regression with a two-sided Student-t p-value for the slope.
///
/// # Safety
/// `x` and `y` must point to `n` doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_ols(x: *const f64, y: *const f64, n: usize, out: *mut ForageRegression) -> ForageStatus {
    guard(|| {
        let x = slice(x, n, "x")?;
        let y = slice(y, n, "y")?;
        let points: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        let r = ols_regression(&points)?;
        put(
            out,
            ForageRegression {
                slope: r.slope,
                intercept: r.intercept,
                slope_se: r.slope_se,
                t: r.t,
                p_value: r.p_value,
                r_squared: r.r_squared,
                n: r.n,
            },
            "out",
        )
    })
}

/// Two-sided Student-t p-value `P(|T_df| ≥ |t|)`; NaN for `df = 0` or NaN `t`.
#[no_mangle]
pub extern "C" fn forage_student_t_p(t: f64, df: u64) -> f64 {
    if df == 0 || t.is_nan() {
        return f64::NAN;
    }
    student_t_two_sided_p(t, df)
}

/// Exact t-SNE with default optimizer settings. Writes `2n` interleaved
/// coordinates `x0, y0, x1, y1, …` and the final KL divergence.
///
/// # Safety
/// `embeddings` must be a live handle; `out` must hold `capacity` doubles,
/// `out_len` and `kl` be writable.
#[no_mangle]
pub unsafe extern "C" fn forage_tsne(
    embeddings: *const ForageEmbeddings,
    perplexity: f64,
    iterations: usize,
    seed: u64,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
    kl: *mut f64,
) -> ForageStatus {
    guard(|| {
        let e = &get(embeddings, "embeddings")?.0;
        put(out_len, 2 * e.len(), "out_len")?;
        if 2 * e.len() > capacity {
            return Err(Failure::TooSmall {
                needed: 2 * e.len(),
                capacity,
            });
        }
        let cfg = TsneConfig {
            perplexity,
            iterations,
            seed,
            ..TsneConfig::default()
        };
        let points = tsne(e, &cfg)?;
        let flat: Vec<f64> = points.coordinates.iter().flat_map(|p| p.iter().copied()).collect();
        fill(&flat, out, capacity, out_len)?;
        put(kl, points.kl, "kl")
    })
}
