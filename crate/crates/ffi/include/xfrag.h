#ifndef XFRAG_H
#define XFRAG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. The non-zero values equal the exit codes
// of the command line tool for the same error family.
typedef enum XfragStatus {
  XFRAG_STATUS_OK = 0,
  // Malformed XML, document layout or workload syntax.
  XFRAG_STATUS_PARSE = 2,
  // Workload does not bind against the warehouse catalog.
  XFRAG_STATUS_BIND = 3,
  // Out-of-range or unknown argument.
  XFRAG_STATUS_PARAMETER = 4,
  XFRAG_STATUS_IO = 5,
  // Referential integrity or result consistency failure.
  XFRAG_STATUS_CONSISTENCY = 6,
  XFRAG_STATUS_NULL_ARGUMENT = 7,
  XFRAG_STATUS_INVALID_UTF8 = 8,
  // A Rust panic was caught at the boundary.
  XFRAG_STATUS_INTERNAL = 9,
} XfragStatus;

// Opaque fragmentation schema handle.
typedef struct XfragSchema XfragSchema;

// Opaque warehouse handle.
typedef struct XfragWarehouse XfragWarehouse;

// Opaque handle to a workload bound against a warehouse catalog.
typedef struct XfragWorkload XfragWorkload;

// Costs of running a workload, in fact entries scanned.
typedef struct XfragCost {
  // Sum over queries of the largest fragment scan.
  uint64_t total_parallel;
  // Sum over queries of all fragment scans.
  uint64_t total_sequential;
  uint64_t fragments_accessed;
  // Same workload on the unfragmented warehouse.
  uint64_t unfragmented;
} XfragCost;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *xfrag_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void xfrag_string_free(char *s);

// Generates the four-dimension benchmark warehouse with `facts` facts.
//
// # Safety
// `out` must be a valid pointer.
enum XfragStatus xfrag_warehouse_generate(uintptr_t facts,
                                          uint64_t seed,
                                          struct XfragWarehouse **out);

// Loads a warehouse from its dw-model.xml and the documents beside it.
//
// # Safety
// `model_path` must be a NUL-terminated string, `out` a valid pointer.
enum XfragStatus xfrag_warehouse_load(const char *model_path, struct XfragWarehouse **out);

// Writes the catalog and all documents into `dir`.
//
// # Safety
// `wh` must be a live handle, `dir` a NUL-terminated string.
enum XfragStatus xfrag_warehouse_save(const struct XfragWarehouse *wh, const char *dir);

// Number of facts over all fact sets; 0 for NULL.
//
// # Safety
// `wh` must be NULL or a live handle.
uintptr_t xfrag_warehouse_fact_count(const struct XfragWarehouse *wh);

// # Safety
// `wh` must be NULL or a handle not yet freed.
void xfrag_warehouse_free(struct XfragWarehouse *wh);

// Parses workload text and binds it against the catalog of `wh`.
//
// # Safety
// `source` must be a NUL-terminated string, `wh` a live handle, `out` a
// valid pointer.
enum XfragStatus xfrag_workload_parse(const char *source,
                                      const struct XfragWarehouse *wh,
                                      struct XfragWorkload **out);

// # Safety
// `w` must be NULL or a live handle.
uintptr_t xfrag_workload_query_count(const struct XfragWorkload *w);

// # Safety
// `w` must be NULL or a live handle.
uintptr_t xfrag_workload_predicate_count(const struct XfragWorkload *w);

// # Safety
// `w` must be NULL or a handle not yet freed.
void xfrag_workload_free(struct XfragWorkload *w);

// Derives a fragmentation schema. `strategy` is "km", "pc" or "ab";
// `k` and `seed` are only read for "km".
//
// # Safety
// `w` must be a live handle, `strategy` a NUL-terminated string, `out` a
// valid pointer.
enum XfragStatus xfrag_schema_derive(const struct XfragWorkload *w,
                                     const char *strategy,
                                     uintptr_t k,
                                     uint64_t seed,
                                     struct XfragSchema **out);

// Fragment count including ELSE; 0 for NULL.
//
// # Safety
// `s` must be NULL or a live handle.
uintptr_t xfrag_schema_fragment_count(const struct XfragSchema *s);

// The schema as frag-schema.xml text, or NULL for a NULL handle. Free with
// [`xfrag_string_free`].
//
// # Safety
// `s` must be NULL or a live handle.
char *xfrag_schema_to_xml(const struct XfragSchema *s);

// # Safety
// `s` must be NULL or a handle not yet freed.
void xfrag_schema_free(struct XfragSchema *s);

// Splits `wh` by `s` and writes the fragment documents and manifest into
// `dir`. The number of fragments written goes to `fragments` if non-NULL.
//
// # Safety
// All handles must be live; `dir` must be a NUL-terminated string.
enum XfragStatus xfrag_fragment(const struct XfragWorkload *w,
                                const struct XfragSchema *s,
                                const struct XfragWarehouse *wh,
                                const char *dir,
                                uintptr_t *fragments);

// Runs the workload on the fragmented and on the whole warehouse and
// fills `cost`. Fails with `Consistency` if any query answers differently.
//
// # Safety
// All handles must be live; `cost` must be a valid pointer.
enum XfragStatus xfrag_evaluate(const struct XfragWorkload *w,
                                const struct XfragSchema *s,
                                const struct XfragWarehouse *wh,
                                uint64_t seed,
                                struct XfragCost *cost);

// Library version, statically allocated.
const char *xfrag_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XFRAG_H */
