//! C ABI over the `fdsc` codec.
//!
//! Models, encoded buffers and decoded images are opaque handles released
//! with their `*_free` function. Every call returns an [`FdscStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`fdsc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fdsc::codec::{decode_image, encode_image, BitstreamError, Header};
use fdsc::image_io::{from_rgb8, to_rgb8};
use fdsc::model::{decode_checkpoint, load_checkpoint, Model};
use fdsc::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdscStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Checkpoint = 4,
    NotFinalized = 5,
    ImageTooLarge = 6,
    BadMagic = 7,
    UnsupportedVersion = 8,
    HeaderMismatch = 9,
    Truncated = 10,
    Checksum = 11,
    Corrupt = 12,
    Image = 13,
    Panic = 14,
    Internal = 15,
}

/// Loaded, finalized model.
pub struct FdscModel {
    model: Model,
}

/// Owned byte buffer holding an encoded container.
pub struct FdscBuffer {
    bytes: Vec<u8>,
}

/// Decoded 8-bit RGB image, rows top to bottom, interleaved `R G B`.
pub struct FdscImage {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
}

/// Header fields of a container.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FdscHeaderInfo {
    pub version: u8,
    pub config_id: u8,
    pub lambda_index: u8,
    pub flags: u8,
    pub width: u32,
    pub height: u32,
    pub padded_width: u32,
    pub padded_height: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FdscStatus {
    match e {
        Error::Bitstream(b) => match b {
            BitstreamError::BadMagic => FdscStatus::BadMagic,
            BitstreamError::Version(_) => FdscStatus::UnsupportedVersion,
            BitstreamError::HeaderMismatch(_) => FdscStatus::HeaderMismatch,
            BitstreamError::Truncated(_) => FdscStatus::Truncated,
            BitstreamError::Checksum { .. } => FdscStatus::Checksum,
            BitstreamError::Corrupt(_) => FdscStatus::Corrupt,
        },
        Error::Checkpoint(_) => FdscStatus::Checkpoint,
        Error::NotFinalized => FdscStatus::NotFinalized,
        Error::ImageTooLarge { .. } => FdscStatus::ImageTooLarge,
        Error::Io(_) => FdscStatus::Io,
        Error::Image(_) => FdscStatus::Image,
        Error::Shape(_) | Error::Config(_) => FdscStatus::InvalidArgument,
        _ => FdscStatus::Internal,
    }
}

/// Run `f`, recording its failure (or panic) as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (FdscStatus, String)>) -> FdscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FdscStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            FdscStatus::Panic
        }
    }
}

fn lib(e: Error) -> (FdscStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FdscStatus, String) {
    (FdscStatus::NullArgument, format!("{what} is null"))
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Result<&'a [u8], (FdscStatus, String)> {
    if data.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(null("data"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn adopt(mut model: Model) -> *mut FdscModel {
    if !model.is_finalized() {
        model.finalize();
    }
    Box::into_raw(Box::new(FdscModel { model }))
}

/// Load a checkpoint file. `*out` receives a handle on success.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdsc_model_load(path: *const c_char, out: *mut *mut FdscModel) -> FdscStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (FdscStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        *out = adopt(load_checkpoint(Path::new(p)).map_err(lib)?);
        Ok(())
    })
}

/// Load a checkpoint from memory.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdsc_model_from_bytes(data: *const u8, len: usize, out: *mut *mut FdscModel) -> FdscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        *out = adopt(decode_checkpoint(bytes(data, len)?).map_err(lib)?);
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fdsc_model_free(model: *mut FdscModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Architecture identifier written into containers; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fdsc_model_config_id(model: *const FdscModel) -> u8 {
    model.as_ref().map_or(0, |m| m.model.config_id())
}

/// Encode an interleaved 8-bit RGB image of `width`×`height` pixels.
/// A nonzero `checksum` appends a CRC-32 trailer.
///
/// # Safety
/// `rgb` must point to `3·width·height` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdsc_encode_rgb8(
    model: *const FdscModel,
    rgb: *const u8,
    width: u32,
    height: u32,
    checksum: i32,
    out: *mut *mut FdscBuffer,
) -> FdscStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if width == 0 || height == 0 {
            return Err((FdscStatus::InvalidArgument, "image is empty".into()));
        }
        let n = (width as usize)
            .checked_mul(height as usize)
            .and_then(|p| p.checked_mul(3))
            .ok_or_else(|| (FdscStatus::InvalidArgument, "image size overflows".to_string()))?;
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        let raw = std::slice::from_raw_parts(rgb, n).to_vec();
        let img = image::RgbImage::from_raw(width, height, raw).expect("length checked");
        let enc = encode_image(&m.model, &from_rgb8(&img), checksum != 0).map_err(lib)?;
        *out = Box::into_raw(Box::new(FdscBuffer { bytes: enc.to_bytes() }));
        Ok(())
    })
}

/// Decode a container into an image handle.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdsc_decode_rgb8(
    model: *const FdscModel,
    data: *const u8,
    len: usize,
    out: *mut *mut FdscImage,
) -> FdscStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let rec = decode_image(&m.model, bytes(data, len)?).map_err(lib)?;
        let img = to_rgb8(&rec);
        *out = Box::into_raw(Box::new(FdscImage {
            width: img.width(),
            height: img.height(),
            rgb: img.into_raw(),
        }));
        Ok(())
    })
}

/// Parse the container header without a model.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdsc_inspect(data: *const u8, len: usize, out: *mut FdscHeaderInfo) -> FdscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = Header::parse(bytes(data, len)?).map_err(|e| lib(e.into()))?;
        *out = FdscHeaderInfo {
            version: h.version,
            config_id: h.config_id,
            lambda_index: h.lambda_index,
            flags: h.flags,
            width: h.orig_w,
            height: h.orig_h,
            padded_width: h.padded_w,
            padded_height: h.padded_h,
        };
        Ok(())
    })
}

/// # Safety
/// `buf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fdsc_buffer_data(buf: *const FdscBuffer) -> *const u8 {
    buf.as_ref().map_or(ptr::null(), |b| b.bytes.as_ptr())
}

/// # Safety
/// `buf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fdsc_buffer_len(buf: *const FdscBuffer) -> usize {
    buf.as_ref().map_or(0, |b| b.bytes.len())
}

/// # Safety
/// `buf` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fdsc_buffer_free(buf: *mut FdscBuffer) {
    if !buf.is_null() {
        drop(Box::from_raw(buf));
    }
}

/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fdsc_image_width(img: *const FdscImage) -> u32 {
    img.as_ref().map_or(0, |i| i.width)
}

/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fdsc_image_height(img: *const FdscImage) -> u32 {
    img.as_ref().map_or(0, |i| i.height)
}

/// `3·width·height` bytes of interleaved RGB.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fdsc_image_data(img: *const FdscImage) -> *const u8 {
    img.as_ref().map_or(ptr::null(), |i| i.rgb.as_ptr())
}

/// # Safety
/// `img` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fdsc_image_free(img: *mut FdscImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fdsc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code ("unknown status" outside the enum).
#[no_mangle]
pub extern "C" fn fdsc_status_name(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null argument",
        2 => c"invalid argument",
        3 => c"i/o error",
        4 => c"bad checkpoint",
        5 => c"model not finalized",
        6 => c"image too large",
        7 => c"bad magic",
        8 => c"unsupported version",
        9 => c"header mismatch",
        10 => c"truncated stream",
        11 => c"checksum mismatch",
        12 => c"corrupt stream",
        13 => c"image error",
        14 => c"internal panic",
        15 => c"internal error",
        _ => c"unknown status",
    };
    s.as_ptr()
}
