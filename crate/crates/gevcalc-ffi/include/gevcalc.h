#ifndef GEVCALC_H
#define GEVCALC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which inverse [`gc_symbol_parametrix`] constructs.
typedef enum GcSide {
  GC_SIDE_LEFT = 0,
  GC_SIDE_RIGHT = 1,
  // Build both, check they agree, return the shared value.
  GC_SIDE_TWO_SIDED = 2,
} GcSide;

// Result classification every entry point returns. The numeric values
// match the engine's process exit codes where one exists.
typedef enum GcStatus {
  // The call succeeded.
  GC_STATUS_OK = 0,
  // Inputs violated a documented precondition (bad JSON, null pointer,
  // non-elliptic symbol, malformed rational, ...).
  GC_STATUS_VALIDATION = 2,
  // A numerical method gave up: spectrum on the contour or quadrature
  // refusing to converge.
  GC_STATUS_NUMERICAL = 3,
  // The request needs more jet or h orders than the data stores.
  GC_STATUS_EXHAUSTED = 4,
  // An internal panic was caught at the boundary; state is consistent
  // but the operation did not happen.
  GC_STATUS_PANIC = 5,
} GcStatus;

// A spectral projector expansion produced from a family.
typedef struct GcExpansion GcExpansion;

// A finite-dimensional Hermitian operator family.
typedef struct GcFamily GcFamily;

// A formal symbol with exact coefficients.
typedef struct GcSymbol GcSymbol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The engine version as a static string; never freed by the caller.
const char *gc_version(void);

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread; never free it.
const char *gc_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from a `char**` output of this
// library, freed at most once.
void gc_string_free(char *s);

// Parses a symbol document (exact backend) into a fresh handle.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must point to writable
// storage for one pointer.
enum GcStatus gc_symbol_from_json(const char *json, struct GcSymbol **out);

// Serializes a symbol handle back to its JSON document. The caller owns
// the returned string and frees it with [`gc_string_free`].
//
// # Safety
// `sym` must be a live symbol handle; `out` must point to writable storage
// for one pointer.
enum GcStatus gc_symbol_to_json(const struct GcSymbol *sym, char **out);

// Highest h-order the symbol stores.
//
// # Safety
// `sym` must be a live symbol handle; `out` must point to writable storage
// for one u32.
enum GcStatus gc_symbol_h_order(const struct GcSymbol *sym, uint32_t *out);

// Composes `p` then `q` to the requested h-order.
//
// # Safety
// `p` and `q` must be live symbol handles; `out` must point to writable
// storage for one pointer.
enum GcStatus gc_symbol_sharp(const struct GcSymbol *p,
                              const struct GcSymbol *q,
                              uint32_t order,
                              struct GcSymbol **out);

// Inverts an elliptic symbol order by order.
//
// # Safety
// `p` must be a live symbol handle; `out` must point to writable storage
// for one pointer.
enum GcStatus gc_symbol_parametrix(const struct GcSymbol *p,
                                   uint32_t order,
                                   enum GcSide side,
                                   struct GcSymbol **out);

// Evaluates the truncated sum at semiclassical parameter `h` (rational
// string) with growth radius `radius`, at the symbol's base point. Writes
// the exact value as an element string to `value_out` (caller frees) and
// the truncation cutoff actually used to `cutoff_out` (may be null).
//
// # Safety
// `p` must be a live symbol handle; `h` and `radius` must be
// NUL-terminated strings; `value_out` must point to writable storage for
// one pointer; `cutoff_out` must be null or point to one u32.
enum GcStatus gc_symbol_resum(const struct GcSymbol *p,
                              const char *h,
                              const char *radius,
                              char **value_out,
                              uint32_t *cutoff_out);

// Releases a symbol handle.
//
// # Safety
// `sym` must be null or a live symbol handle, freed at most once.
void gc_symbol_free(struct GcSymbol *sym);

// Parses an operator family document into a fresh handle.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must point to writable
// storage for one pointer.
enum GcStatus gc_family_from_json(const char *json, struct GcFamily **out);

// Matrix dimension of the family.
//
// # Safety
// `family` must be a live family handle; `out` must point to one usize.
enum GcStatus gc_family_dim(const struct GcFamily *family, size_t *out);

// Expands the spectral projector of the tracked eigenvalue group to the
// requested h-order. `nodes` is the initial contour node count; pass 0 for
// the default. No spectral filter is applied through this interface.
//
// # Safety
// `family` must be a live family handle; `out` must point to writable
// storage for one pointer.
enum GcStatus gc_family_expand(const struct GcFamily *family,
                               uint32_t order,
                               uint32_t nodes,
                               struct GcExpansion **out);

// Serializes an expansion to its JSON document. The caller owns the
// returned string and frees it with [`gc_string_free`].
//
// # Safety
// `pi` must be a live expansion handle; `out` must point to writable
// storage for one pointer.
enum GcStatus gc_expansion_to_json(const struct GcExpansion *pi, char **out);

// Number of projector corrections the expansion holds (its h-order).
//
// # Safety
// `pi` must be a live expansion handle; `out` must point to one u32.
enum GcStatus gc_expansion_order(const struct GcExpansion *pi, uint32_t *out);

// Worst residual of the order-by-order projector identity, the headline
// consistency diagnostic for an expansion.
//
// # Safety
// `pi` must be a live expansion handle; `out` must point to one double.
enum GcStatus gc_expansion_identity_residual(const struct GcExpansion *pi, double *out);

// Releases a family handle.
//
// # Safety
// `family` must be null or a live family handle, freed at most once.
void gc_family_free(struct GcFamily *family);

// Releases an expansion handle.
//
// # Safety
// `pi` must be null or a live expansion handle, freed at most once.
void gc_expansion_free(struct GcExpansion *pi);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GEVCALC_H */
