#ifndef XORLAB_H
#define XORLAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum XlStatus {
  XL_STATUS_OK = 0,
  XL_STATUS_NULL_POINTER = 1,
  XL_STATUS_INVALID = 2,
  XL_STATUS_BUDGET = 3,
  XL_STATUS_IO = 4,
  XL_STATUS_DOMAIN = 5,
  XL_STATUS_PANIC = 6,
} XlStatus;

typedef enum XlScheme {
  XL_SCHEME_ALL_ONES = 0,
  XL_SCHEME_SEEDED_NONZERO = 1,
} XlScheme;

// A finite field GF(q).
typedef struct XlField XlField;

// A sparse matrix over a finite field.
typedef struct XlMatrix XlMatrix;

// Nontrivial fixed points of `α ↦ 1 − exp(−d α^{k−1})`; all zero below `d_k*`.
typedef struct XlFixedPoints {
  double alpha_u;
  double alpha_s;
  double alpha_f;
  bool degenerate;
} XlFixedPoints;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *xl_version(void);

// Message of the last failed call on this thread, or an empty string. Valid
// until the next call into the library on the same thread.
const char *xl_last_error(void);

enum XlStatus xl_field_new(uint64_t q, struct XlField **out);

void xl_field_free(struct XlField *field);

// Field order `q`, or 0 for a null handle.
uint32_t xl_field_order(const struct XlField *field);

enum XlStatus xl_field_add(const struct XlField *field, uint32_t a, uint32_t b, uint32_t *out);

enum XlStatus xl_field_sub(const struct XlField *field, uint32_t a, uint32_t b, uint32_t *out);

enum XlStatus xl_field_mul(const struct XlField *field, uint32_t a, uint32_t b, uint32_t *out);

enum XlStatus xl_field_div(const struct XlField *field, uint32_t a, uint32_t b, uint32_t *out);

enum XlStatus xl_field_inv(const struct XlField *field, uint32_t a, uint32_t *out);

// Builds an `n_rows × n_cols` matrix from `nnz` coordinate triplets. A
// repeated `(row, col)` pair is rejected.
enum XlStatus xl_matrix_from_triplets(const struct XlField *field,
                                      size_t n_rows,
                                      size_t n_cols,
                                      const size_t *rows,
                                      const size_t *cols,
                                      const uint32_t *values,
                                      size_t nnz,
                                      struct XlMatrix **out);

// Draws `m` uniform weight-`k` rows on `n` columns from trial `trial` of the
// stream seeded by `seed`; identical to what the CLI generates.
enum XlStatus xl_matrix_generate(size_t n,
                                 size_t k,
                                 size_t m,
                                 uint64_t q,
                                 enum XlScheme scheme,
                                 uint64_t scheme_seed,
                                 uint64_t seed,
                                 uint64_t trial,
                                 struct XlMatrix **out);

// As [`xl_matrix_generate`] followed by pinning rows; the number of pinning
// rows is stored in `pins` when non-null.
enum XlStatus xl_matrix_generate_pinned(size_t n,
                                        size_t k,
                                        size_t m,
                                        uint64_t q,
                                        enum XlScheme scheme,
                                        uint64_t scheme_seed,
                                        uint64_t seed,
                                        uint64_t trial,
                                        struct XlMatrix **out,
                                        size_t *pins);

// Reads the `M N q` text format.
enum XlStatus xl_matrix_load(const char *path, struct XlMatrix **out);

enum XlStatus xl_matrix_save(const struct XlMatrix *matrix, const char *path);

void xl_matrix_free(struct XlMatrix *matrix);

// Row count, or 0 for a null handle.
size_t xl_matrix_rows(const struct XlMatrix *matrix);

// Column count, or 0 for a null handle.
size_t xl_matrix_cols(const struct XlMatrix *matrix);

// Number of nonzero entries, or 0 for a null handle.
size_t xl_matrix_nnz(const struct XlMatrix *matrix);

enum XlStatus xl_matrix_rank(const struct XlMatrix *matrix, size_t *out);

enum XlStatus xl_matrix_nullity(const struct XlMatrix *matrix, size_t *out);

// Columns that vanish on the whole kernel, ascending. `len` always receives
// the set size; the indices are written only when `capacity` suffices, else
// the call fails with `Invalid`. Pass `capacity = 0` to query the size.
enum XlStatus xl_matrix_frozen_set(const struct XlMatrix *matrix,
                                   size_t *buf,
                                   size_t capacity,
                                   size_t *len);

// Writes one uniform kernel vector (`n_cols` values) into `buf`.
enum XlStatus xl_matrix_sample_kernel(const struct XlMatrix *matrix,
                                      uint64_t seed,
                                      uint32_t *buf,
                                      size_t capacity);

// Peels to the 2-core. Core dimensions go to `core_rows` / `core_cols`; the
// core itself is returned through `core` when that pointer is non-null.
enum XlStatus xl_matrix_two_core(const struct XlMatrix *matrix,
                                 size_t *core_rows,
                                 size_t *core_cols,
                                 struct XlMatrix **core);

// Fraction of variable-to-check `𝚏` messages at the WP fixed point reached
// from all-`𝚏`.
enum XlStatus xl_wp_frozen_fraction(const struct XlMatrix *matrix,
                                    size_t max_iter,
                                    double *out,
                                    bool *converged);

enum XlStatus xl_threshold_dk(uint32_t k, double *out);

enum XlStatus xl_threshold_dk_star(uint32_t k, double *out);

enum XlStatus xl_fixed_points(double d, uint32_t k, struct XlFixedPoints *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XORLAB_H */
