#ifndef FDSC_H
#define FDSC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum FdscStatus {
  FDSC_STATUS_OK = 0,
  FDSC_STATUS_NULL_ARGUMENT = 1,
  FDSC_STATUS_INVALID_ARGUMENT = 2,
  FDSC_STATUS_IO = 3,
  FDSC_STATUS_CHECKPOINT = 4,
  FDSC_STATUS_NOT_FINALIZED = 5,
  FDSC_STATUS_IMAGE_TOO_LARGE = 6,
  FDSC_STATUS_BAD_MAGIC = 7,
  FDSC_STATUS_UNSUPPORTED_VERSION = 8,
  FDSC_STATUS_HEADER_MISMATCH = 9,
  FDSC_STATUS_TRUNCATED = 10,
  FDSC_STATUS_CHECKSUM = 11,
  FDSC_STATUS_CORRUPT = 12,
  FDSC_STATUS_IMAGE = 13,
  FDSC_STATUS_PANIC = 14,
  FDSC_STATUS_INTERNAL = 15,
} FdscStatus;

/*
 Owned byte buffer holding an encoded container.
 */
typedef struct FdscBuffer FdscBuffer;

/*
 Decoded 8-bit RGB image, rows top to bottom, interleaved `R G B`.
 */
typedef struct FdscImage FdscImage;

/*
 Loaded, finalized model.
 */
typedef struct FdscModel FdscModel;

/*
 Header fields of a container.
 */
typedef struct FdscHeaderInfo {
  uint8_t version;
  uint8_t config_id;
  uint8_t lambda_index;
  uint8_t flags;
  uint32_t width;
  uint32_t height;
  uint32_t padded_width;
  uint32_t padded_height;
} FdscHeaderInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Load a checkpoint file. `*out` receives a handle on success.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FdscStatus fdsc_model_load(const char *path, struct FdscModel **out);

/*
 Load a checkpoint from memory.

 # Safety
 `data` must point to `len` readable bytes; `out` must be writable.
 */
enum FdscStatus fdsc_model_from_bytes(const uint8_t *data, size_t len, struct FdscModel **out);

/*
 Release a model. Null is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void fdsc_model_free(struct FdscModel *model);

/*
 Architecture identifier written into containers; 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
uint8_t fdsc_model_config_id(const struct FdscModel *model);

/*
 Encode an interleaved 8-bit RGB image of `width`×`height` pixels.
 A nonzero `checksum` appends a CRC-32 trailer.

 # Safety
 `rgb` must point to `3·width·height` bytes; `out` must be writable.
 */
enum FdscStatus fdsc_encode_rgb8(const struct FdscModel *model,
                                 const uint8_t *rgb,
                                 uint32_t width,
                                 uint32_t height,
                                 int32_t checksum,
                                 struct FdscBuffer **out);

/*
 Decode a container into an image handle.

 # Safety
 `data` must point to `len` readable bytes; `out` must be writable.
 */
enum FdscStatus fdsc_decode_rgb8(const struct FdscModel *model,
                                 const uint8_t *data,
                                 size_t len,
                                 struct FdscImage **out);

/*
 Parse the container header without a model.

 # Safety
 `data` must point to `len` readable bytes; `out` must be writable.
 */
enum FdscStatus fdsc_inspect(const uint8_t *data, size_t len, struct FdscHeaderInfo *out);

/*
 # Safety
 `buf` must be null or a live handle.
 */
const uint8_t *fdsc_buffer_data(const struct FdscBuffer *buf);

/*
 # Safety
 `buf` must be null or a live handle.
 */
size_t fdsc_buffer_len(const struct FdscBuffer *buf);

/*
 # Safety
 `buf` must come from this library and not be used afterwards.
 */
void fdsc_buffer_free(struct FdscBuffer *buf);

/*
 # Safety
 `img` must be null or a live handle.
 */
uint32_t fdsc_image_width(const struct FdscImage *img);

/*
 # Safety
 `img` must be null or a live handle.
 */
uint32_t fdsc_image_height(const struct FdscImage *img);

/*
 `3·width·height` bytes of interleaved RGB.

 # Safety
 `img` must be null or a live handle.
 */
const uint8_t *fdsc_image_data(const struct FdscImage *img);

/*
 # Safety
 `img` must come from this library and not be used afterwards.
 */
void fdsc_image_free(struct FdscImage *img);

/*
 Message of the last failed call on this thread ("" after a success).
 Valid until the next call on the same thread.
 */
const char *fdsc_last_error(void);

/*
 Static name of a status code ("unknown status" outside the enum).
 */
const char *fdsc_status_name(int32_t status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDSC_H */
