#ifndef QTRANSCODE_H
#define QTRANSCODE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_NULL_POINTER = 1,
  QT_STATUS_INVALID_ARGUMENT = 2,
  QT_STATUS_DIMENSION_MISMATCH = 3,
  QT_STATUS_NOT_PHYSICAL = 4,
  QT_STATUS_SINGULAR = 5,
  QT_STATUS_IO = 6,
  QT_STATUS_PARSE = 7,
  QT_STATUS_INTERNAL = 8,
} QtStatus;

/*
 Opaque trained codec.
 */
typedef struct QtCodec QtCodec;

/*
 Opaque density matrix.
 */
typedef struct QtDensityMatrix QtDensityMatrix;

/*
 Layer sizes of a loaded codec.
 */
typedef struct QtCodecDims {
  size_t height;
  size_t width;
  size_t hidden;
  size_t latent;
  size_t n;
  size_t observables;
  size_t classes;
} QtCodecDims;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len - 1` bytes). Returns the full message length in bytes.

 # Safety
 `buf` must be null or valid for `len` bytes.
 */
size_t qt_last_error_message(char *buf, size_t len);

/*
 Encodes the unit latent vector `y[0..len]` into an n x n density matrix.

 # Safety
 `y` must be valid for `len` reads and `out` for one write.
 */
enum QtStatus qt_encode(const double *y, size_t len, size_t n, struct QtDensityMatrix **out);

/*
 Writes the first `len` latent values recovered from `rho` into `out`.

 # Safety
 `rho` must be a live handle and `out` valid for `len` writes.
 */
enum QtStatus qt_decode(const struct QtDensityMatrix *rho, double *out, size_t len);

/*
 Applies the depolarizing channel with noise `eps` in [0, 1].

 # Safety
 `rho` must be a live handle and `out` valid for one write.
 */
enum QtStatus qt_depolarize(const struct QtDensityMatrix *rho,
                            double eps,
                            struct QtDensityMatrix **out);

/*
 Matrix dimension n, or 0 for a null handle.

 # Safety
 `rho` must be null or a live handle.
 */
size_t qt_density_dim(const struct QtDensityMatrix *rho);

/*
 Copies the row-major entries into `re` and `im`, each of length n*n.

 # Safety
 `rho` must be a live handle; `re` and `im` valid for `len` writes.
 */
enum QtStatus qt_density_entries(const struct QtDensityMatrix *rho,
                                 double *re,
                                 double *im,
                                 size_t len);

/*
 tr(rho^2).

 # Safety
 `rho` must be a live handle and `out` valid for one write.
 */
enum QtStatus qt_purity(const struct QtDensityMatrix *rho, double *out);

/*
 Expectations tr(rho O_i) of `count` observables, each given as n*n raw
 Hermitian parameters (n diagonal values, then re/im of the strict upper
 triangle row by row) and normalized to unit Frobenius norm.

 # Safety
 `params` must be valid for `count * n * n` reads, `out` for `count` writes.
 */
enum QtStatus qt_expectations(const struct QtDensityMatrix *rho,
                              const double *params,
                              size_t count,
                              double *out);

/*
 Releases a density handle; null is ignored.

 # Safety
 `rho` must be null or a handle not yet freed.
 */
void qt_density_free(struct QtDensityMatrix *rho);

/*
 PSNR in dB; +infinity for identical images.

 # Safety
 `a` and `b` must be valid for `len` reads, `out` for one write.
 */
enum QtStatus qt_psnr(const double *a, const double *b, size_t len, double peak, double *out);

/*
 Whole-image SSIM.

 # Safety
 `a` and `b` must be valid for `len` reads, `out` for one write.
 */
enum QtStatus qt_ssim(const double *a, const double *b, size_t len, double peak, double *out);

/*
 Loads a codec checkpoint from a UTF-8 path.

 # Safety
 `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum QtStatus qt_codec_load(const char *path, struct QtCodec **out);

/*
 # Safety
 `codec` must be a live handle and `out` valid for one write.
 */
enum QtStatus qt_codec_dims(const struct QtCodec *codec, struct QtCodecDims *out);

/*
 Runs the codec on one image at noise `eps`. `recon` receives
 height*width pixels clamped to [0, 1]; `logits` receives `classes` values
 and may be null when `classes` is 0.

 # Safety
 Buffers must be valid for the stated lengths.
 */
enum QtStatus qt_codec_reconstruct(const struct QtCodec *codec,
                                   const double *pixels,
                                   size_t len,
                                   double eps,
                                   double *recon,
                                   double *logits,
                                   size_t classes);

/*
 Releases a codec handle; null is ignored.

 # Safety
 `codec` must be null or a handle not yet freed.
 */
void qt_codec_free(struct QtCodec *codec);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* QTRANSCODE_H */
