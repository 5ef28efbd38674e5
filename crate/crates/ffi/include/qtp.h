#ifndef QTP_H
#define QTP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum QtpStatus {
  QTP_STATUS_OK = 0,
  QTP_STATUS_NULL_POINTER = 1,
  QTP_STATUS_PARSE = 2,
  QTP_STATUS_INVALID_STATE = 3,
  QTP_STATUS_DIMENSION_MISMATCH = 4,
  QTP_STATUS_UNSOLVABLE = 5,
  QTP_STATUS_IO = 6,
  QTP_STATUS_BUFFER_TOO_SMALL = 7,
  QTP_STATUS_PANIC = 8,
} QtpStatus;

/**
 * Opaque density operator.
 */
typedef struct QtpDensity QtpDensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qtp_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be NULL or writable for `len` bytes.
 */
size_t qtp_last_error_message(char *buf, size_t len);

/**
 * Parses a resource descriptor such as `isotropic:n=2,F=0.8`.
 *
 * # Safety
 * `descriptor` must be a NUL-terminated string; `out` must be writable.
 */
enum QtpStatus qtp_resource_parse(const char *descriptor, struct QtpDensity **out);

/**
 * Parses an input descriptor such as `haar:n=2,seed=1` into a density operator.
 *
 * # Safety
 * `descriptor` must be a NUL-terminated string; `out` must be writable.
 */
enum QtpStatus qtp_input_parse(const char *descriptor, struct QtpDensity **out);

/**
 * Builds a density operator from row-major real and imaginary parts of a
 * `side × side` matrix. `dims` lists subsystem dimensions whose product is
 * `side`; pass `ndims = 0` for a single system.
 *
 * # Safety
 * `re` and `im` must be readable for `side * side` doubles, `dims` for
 * `ndims` entries, and `out` must be writable.
 */
enum QtpStatus qtp_density_from_parts(const double *re,
                                      const double *im,
                                      size_t side,
                                      const size_t *dims,
                                      size_t ndims,
                                      struct QtpDensity **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `rho` must be NULL or a handle from this library not yet freed.
 */
void qtp_density_free(struct QtpDensity *rho);

/**
 * Matrix side of the operator, or 0 for NULL.
 *
 * # Safety
 * `rho` must be NULL or a live handle.
 */
size_t qtp_density_side(const struct QtpDensity *rho);

/**
 * Copies the entries row-major into `re` and `im`, each of length `len`,
 * which must be at least `side * side`.
 *
 * # Safety
 * `rho` must be a live handle; `re` and `im` writable for `len` doubles.
 */
enum QtpStatus qtp_density_entries(const struct QtpDensity *rho,
                                   double *re,
                                   double *im,
                                   size_t len);

/**
 * Writes `⟨Φ|χ|Φ⟩` to `out`.
 *
 * # Safety
 * `chi` must be a live handle; `out` writable.
 */
enum QtpStatus qtp_singlet_fraction(const struct QtpDensity *chi, double *out);

/**
 * Writes the standard-protocol fidelity to `out`.
 *
 * # Safety
 * `chi` must be a live handle; `out` writable.
 */
enum QtpStatus qtp_fidelity_standard(const struct QtpDensity *chi, double *out);

/**
 * Writes the fully entangled fraction to `out`, optimizing with `restarts`
 * restarts on `seed`; other optimizer settings take their defaults.
 *
 * # Safety
 * `chi` must be a live handle; `out` writable.
 */
enum QtpStatus qtp_fully_entangled_fraction(const struct QtpDensity *chi,
                                            size_t restarts,
                                            uint64_t seed,
                                            double *out);

/**
 * Output of the standard teleportation channel over `chi` for input `rho`.
 * With `oracle` nonzero the brute-force protocol simulation is used instead
 * of the closed form.
 *
 * # Safety
 * `chi` and `rho` must be live handles; `out` writable.
 */
enum QtpStatus qtp_teleport_standard(const struct QtpDensity *chi,
                                     const struct QtpDensity *rho,
                                     int32_t oracle,
                                     struct QtpDensity **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QTP_H */
