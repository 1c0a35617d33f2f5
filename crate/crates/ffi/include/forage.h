#ifndef FORAGE_H
#define FORAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ForageStatus {
  FORAGE_STATUS_OK = 0,
  // Invalid input, configuration or file contents.
  FORAGE_STATUS_VALIDATION = 1,
  // Numerical failure, including non-convergence and empty statistics.
  FORAGE_STATUS_NUMERIC = 2,
  // File system or embedding-service failure.
  FORAGE_STATUS_IO = 3,
  // A required pointer argument was null.
  FORAGE_STATUS_NULL_POINTER = 4,
  // The output buffer is smaller than `out_len`.
  FORAGE_STATUS_BUFFER_TOO_SMALL = 5,
  // A Rust panic was caught at the boundary.
  FORAGE_STATUS_PANIC = 6,
} ForageStatus;

// Proposal distribution for Metropolis-Hastings walks.
typedef enum ForageProposal {
  FORAGE_PROPOSAL_UNIFORM = 0,
  FORAGE_PROPOSAL_SOFTMAX = 1,
} ForageProposal;

typedef struct ForageEmbeddings ForageEmbeddings;

typedef struct ForageSimilarity ForageSimilarity;

typedef struct ForageTransition ForageTransition;

typedef struct ForageVocabulary ForageVocabulary;

// Ordinary least squares fit of `y` on `x`.
typedef struct ForageRegression {
  double slope;
  double intercept;
  double slope_se;
  double t;
  double p_value;
  double r_squared;
  size_t n;
} ForageRegression;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on this thread.
const char *forage_last_error(void);

// Library version as a static NUL-terminated string.
const char *forage_version(void);

// Loads a vocabulary CSV (`name,description,categories`).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ForageStatus forage_vocabulary_load(const char *path_, struct ForageVocabulary **out);

// # Safety
// `v` must be null or a handle from `forage_vocabulary_load`, freed once.
void forage_vocabulary_free(struct ForageVocabulary *v);

// Number of items, or 0 for a null handle.
//
// # Safety
// `v` must be null or a live vocabulary handle.
size_t forage_vocabulary_len(const struct ForageVocabulary *v);

// Copies a row-major `n × dimension` buffer into an embedding matrix.
//
// # Safety
// `data` must point to `n * dimension` doubles; `out` must be writable.
enum ForageStatus forage_embeddings_new(const double *data,
                                        size_t n,
                                        size_t dimension,
                                        struct ForageEmbeddings **out);

// Loads a JSON Lines embeddings file aligned to `vocabulary`.
//
// # Safety
// `path` must be a NUL-terminated string, `vocabulary` a live handle and
// `out` writable.
enum ForageStatus forage_embeddings_load(const char *path_,
                                         const struct ForageVocabulary *vocabulary,
                                         struct ForageEmbeddings **out);

// # Safety
// `e` must be null or a live embeddings handle, freed once.
void forage_embeddings_free(struct ForageEmbeddings *e);

// Pairwise cosine similarities.
//
// # Safety
// `embeddings` must be a live handle and `out` writable.
enum ForageStatus forage_similarity_cosine(const struct ForageEmbeddings *embeddings,
                                           struct ForageSimilarity **out);

// Wraps a symmetric row-major `n × n` similarity buffer.
//
// # Safety
// `data` must point to `n * n` doubles; `out` must be writable.
enum ForageStatus forage_similarity_new(const double *data,
                                        size_t n,
                                        struct ForageSimilarity **out);

// # Safety
// `s` must be null or a live similarity handle, freed once.
void forage_similarity_free(struct ForageSimilarity *s);

// Number of items, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live similarity handle.
size_t forage_similarity_len(const struct ForageSimilarity *s);

// Similarity of items `i` and `j`.
//
// # Safety
// `s` must be a live handle and `out` writable.
enum ForageStatus forage_similarity_get(const struct ForageSimilarity *s,
                                        size_t i,
                                        size_t j,
                                        double *out);

// Softmax transitions `exp(S_ij / T)` with the diagonal excluded.
//
// # Safety
// `similarity` must be a live handle and `out` writable.
enum ForageStatus forage_transition_softmax(const struct ForageSimilarity *similarity,
                                            double temperature,
                                            struct ForageTransition **out);

// # Safety
// `p` must be null or a live transition handle, freed once.
void forage_transition_free(struct ForageTransition *p);

// Transition probability from `i` to `j`.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum ForageStatus forage_transition_prob(const struct ForageTransition *p,
                                         size_t i,
                                         size_t j,
                                         double *out);

// Stationary distribution by power iteration (fails on periodic chains).
//
// # Safety
// `p` must be a live handle; `out` must hold `capacity` doubles and
// `out_len` be writable.
enum ForageStatus forage_stationary_distribution(const struct ForageTransition *p,
                                                 double tolerance,
                                                 size_t max_iterations,
                                                 double *out,
                                                 size_t capacity,
                                                 size_t *out_len);

// A `steps`-long random walk from `start` using a ChaCha8 stream seeded by `seed`.
//
// # Safety
// `p` must be a live handle; `out` must hold `capacity` items and
// `out_len` be writable.
enum ForageStatus forage_random_walk(const struct ForageTransition *p,
                                     size_t start,
                                     size_t steps,
                                     uint64_t seed,
                                     size_t *out,
                                     size_t capacity,
                                     size_t *out_len);

// A Metropolis-Hastings walk whose target profitability decays by `lambda`
// per retrieved item sharing a category, floored at `epsilon`.
//
// # Safety
// `similarity` and `vocabulary` must be live handles describing the same
// items; `out` must hold `capacity` items and `out_len` be writable.
enum ForageStatus forage_mh_walk(const struct ForageSimilarity *similarity,
                                 const struct ForageVocabulary *vocabulary,
                                 enum ForageProposal proposal,
                                 double temperature,
                                 double lambda,
                                 double epsilon,
                                 size_t start,
                                 size_t steps,
                                 uint64_t seed,
                                 size_t *out,
                                 size_t capacity,
                                 size_t *out_len);

// Inter-item retrieval times between consecutive first occurrences in a
// raw trace: `K − 1` values for `K` unique items.
//
// # Safety
// `steps` must point to `len` items; `out` must hold `capacity` values and
// `out_len` be writable.
enum ForageStatus forage_irts(const size_t *steps,
                              size_t len,
                              size_t *out,
                              size_t capacity,
                              size_t *out_len);

// OLS regression with a two-sided Student-t p-value for the slope.
//
// # Safety
// `x` and `y` must point to `n` doubles each; `out` must be writable.
enum ForageStatus forage_ols(const double *x,
                             const double *y,
                             size_t n,
                             struct ForageRegression *out);

// Two-sided Student-t p-value `P(|T_df| ≥ |t|)`; NaN for `df = 0` or NaN `t`.
double forage_student_t_p(double t, uint64_t df);

// Exact t-SNE with default optimizer settings. Writes `2n` interleaved
// coordinates `x0, y0, x1, y1, …` and the final KL divergence.
//
// # Safety
// `embeddings` must be a live handle; `out` must hold `capacity` doubles,
// `out_len` and `kl` be writable.
enum ForageStatus forage_tsne(const struct ForageEmbeddings *embeddings,
                              double perplexity,
                              size_t iterations,
                              uint64_t seed,
                              double *out,
                              size_t capacity,
                              size_t *out_len,
                              double *kl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORAGE_H */
