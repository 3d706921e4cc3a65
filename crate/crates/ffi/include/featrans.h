#ifndef FEATRANS_H
#define FEATRANS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every exported call.
 */
typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_ARGUMENT = 1,
  FT_STATUS_INVALID_UTF8 = 2,
  FT_STATUS_INVALID_ARGUMENT = 3,
  FT_STATUS_IO = 4,
  FT_STATUS_FORMAT = 5,
  FT_STATUS_JSON = 6,
  FT_STATUS_PANIC = 7,
} FtStatus;

/**
 * Opaque feature bank handle.
 */
typedef struct FtBank FtBank;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *ft_last_error(void);

/**
 * Crate version as a static string.
 */
const char *ft_version(void);

/**
 * Loads a FEATBANK file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FtStatus ft_bank_read(const char *path, struct FtBank **out);

/**
 * Builds a synthetic bank from a JSON generator spec.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FtStatus ft_bank_synth(const char *spec_json, struct FtBank **out);

/**
 * Writes a bank as a FEATBANK file.
 *
 * # Safety
 * `bank` must come from this library; `path` must be NUL-terminated.
 */
enum FtStatus ft_bank_write(const struct FtBank *bank, const char *path);

/**
 * Feature dimension and class count of a bank.
 *
 * # Safety
 * `bank` must come from this library; the out-pointers must be valid.
 */
enum FtStatus ft_bank_shape(const struct FtBank *bank, size_t *dim, size_t *classes);

/**
 * Releases a bank. NULL is ignored.
 *
 * # Safety
 * `bank` must come from this library and not be used afterwards.
 */
void ft_bank_free(struct FtBank *bank);

/**
 * Runs the incremental protocol with a JSON run configuration and returns
 * the report as canonical JSON. A nonzero `upper` runs the real-feature
 * reference instead.
 *
 * # Safety
 * `bank` must come from this library; `config_json` must be NUL-terminated;
 * `out_json` must be a valid pointer.
 */
enum FtStatus ft_run(const struct FtBank *bank,
                     const char *config_json,
                     int32_t upper,
                     char **out_json);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ft_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEATRANS_H */
