#ifndef PHYSIO_H
#define PHYSIO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PhysioStatus {
  PHYSIO_STATUS_OK = 0,
  PHYSIO_STATUS_NULL_ARGUMENT = 1,
  PHYSIO_STATUS_INVALID_UTF8 = 2,
  /**
   * Knowledge base, mock script or cache file could not be loaded.
   */
  PHYSIO_STATUS_LOAD_ERROR = 3,
  /**
   * Empty or over-long query.
   */
  PHYSIO_STATUS_INVALID_INPUT = 4,
  /**
   * The language model failed while writing the answer.
   */
  PHYSIO_STATUS_GENERATION_FAILED = 5,
  PHYSIO_STATUS_INTERNAL = 6,
  PHYSIO_STATUS_PANIC = 7,
} PhysioStatus;

/**
 * Opaque engine handle. Safe to share between threads.
 */
typedef struct PhysioEngine PhysioEngine;

/**
 * Record counts of a loaded knowledge base.
 */
typedef struct PhysioKbCounts {
  size_t conditions;
  size_t webpages;
  size_t exercises;
  size_t medications;
} PhysioKbCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens an engine over the knowledge base in `data_dir` answered by the
 * scripted mock backend. `mock_script` defaults to
 * `<data_dir>/mock_script.jsonl`; a null `cache_file` keeps the response
 * cache in memory. `seed` drives exercise sampling.
 *
 * # Safety
 * String arguments must be null or valid NUL-terminated strings and `out`
 * must be null or point to writable storage for one pointer.
 */
enum PhysioStatus physio_engine_open_mock(const char *data_dir,
                                          const char *mock_script,
                                          const char *cache_file,
                                          uint64_t seed,
                                          struct PhysioEngine **out);

/**
 * Opens an engine backed by an OpenAI-compatible chat-completion endpoint.
 * The bearer token is read from `PHYSIO_LLM_API_KEY`.
 *
 * # Safety
 * As for [`physio_engine_open_mock`].
 */
enum PhysioStatus physio_engine_open_remote(const char *data_dir,
                                            const char *url,
                                            const char *model,
                                            uint64_t timeout_ms,
                                            const char *cache_file,
                                            uint64_t seed,
                                            struct PhysioEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must be null or a handle from an open function not yet freed.
 */
void physio_engine_free(struct PhysioEngine *engine);

/**
 * Answers `query` and stores the response JSON (the same document the
 * HTTP API returns) in `*out_json`.
 *
 * # Safety
 * `engine` must be a live handle, `query` a valid NUL-terminated string
 * and `out_json` writable storage for one pointer.
 */
enum PhysioStatus physio_engine_query(const struct PhysioEngine *engine,
                                      const char *query,
                                      char **out_json);

/**
 * Writes the knowledge-base record counts to `*out`.
 *
 * # Safety
 * `engine` must be a live handle and `out` writable.
 */
enum PhysioStatus physio_engine_counts(const struct PhysioEngine *engine,
                                       struct PhysioKbCounts *out);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void physio_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *physio_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *physio_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHYSIO_H */
