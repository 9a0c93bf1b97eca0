//! C ABI over the supergraph pipeline.
//!
//! Objects are opaque handles created by `sg_*_new`/`sg_*_from_*`/`sg_run`
//! and released with the matching `sg_*_free`. Every fallible call returns an
//! [`SgStatus`]; on failure the message is available from
//! [`sg_last_error_message`] until the next call on the same thread.
//!
//! Array getters copy into a caller buffer. They always store the required
//! length in `*len_out` and return `SG_STATUS_BUFFER_TOO_SMALL` when
//! `capacity` is short, so a first call with `capacity = 0` sizes the buffer.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use supergraph::imageio::{load_ppm, Image};
use supergraph::pipeline::{self, PipelineConfig};
use supergraph::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonFinite = 4,
    Format = 5,
    Disconnected = 6,
    Config = 7,
    Io = 8,
    Utf8 = 9,
    BufferTooSmall = 10,
    OutOfRange = 11,
    NoFusion = 12,
    Panic = 13,
}

impl From<&Error> for SgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => SgStatus::Dimension,
            Error::InvalidArgument(_) => SgStatus::InvalidArgument,
            Error::NonFinite(_) => SgStatus::NonFinite,
            Error::Format(_) => SgStatus::Format,
            Error::Disconnected { .. } => SgStatus::Disconnected,
            Error::Config(_) | Error::Json(_) => SgStatus::Config,
            Error::Io { .. } => SgStatus::Io,
        }
    }
}

/// Decoded RGB or grayscale image.
pub struct SgImage(Image);

/// Pipeline configuration.
pub struct SgConfig(PipelineConfig);

/// Result of a pipeline run: labels, per-scale embeddings and, for two
/// scales, the fused tree states.
pub struct SgRun {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    node_counts: Vec<usize>,
    embedding_dim: usize,
    embeddings: Vec<Vec<f64>>,
    root_state: Option<Vec<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SgStatus, msg: impl Into<String>) -> SgStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), SgStatus>) -> SgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SgStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> SgStatus {
    let s = SgStatus::from(&e);
    fail(s, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SgStatus> {
    if p.is_null() {
        return Err(fail(SgStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SgStatus::Utf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, SgStatus> {
    p.as_ref()
        .ok_or_else(|| fail(SgStatus::NullArgument, format!("{what} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), SgStatus> {
    if out.is_null() {
        return Err(fail(SgStatus::NullArgument, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, capacity: usize, len_out: *mut usize) -> Result<(), SgStatus> {
    if len_out.is_null() {
        return Err(fail(SgStatus::NullArgument, "len_out is null"));
    }
    *len_out = src.len();
    if capacity < src.len() {
        return Err(fail(
            SgStatus::BufferTooSmall,
            format!("buffer holds {capacity}, need {}", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(fail(SgStatus::NullArgument, "buffer is null"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sg_config_new(out: *mut *mut SgConfig) -> SgStatus {
    guard(|| store(out, SgConfig(PipelineConfig::default())))
}

/// Configuration from a JSON document; missing keys take defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_config_from_json(json: *const c_char, out: *mut *mut SgConfig) -> SgStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let cfg = PipelineConfig::from_json(text).map_err(lib_err)?;
        cfg.validate().map_err(lib_err)?;
        store(out, SgConfig(cfg))
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_config_free(cfg: *mut SgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Image from interleaved 8-bit samples, row-major, `channels` 1 or 3.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_image_from_pixels(
    width: usize,
    height: usize,
    channels: usize,
    data: *const u8,
    len: usize,
    out: *mut *mut SgImage,
) -> SgStatus {
    guard(|| {
        if data.is_null() && len > 0 {
            return Err(fail(SgStatus::NullArgument, "data is null"));
        }
        let bytes = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(data, len).to_vec() };
        let img = Image::new(width, height, channels, bytes).map_err(lib_err)?;
        store(out, SgImage(img))
    })
}

/// Image from a binary PPM or PGM file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_image_load(path: *const c_char, out: *mut *mut SgImage) -> SgStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let img = load_ppm(path).map_err(lib_err)?;
        store(out, SgImage(img))
    })
}

/// # Safety
/// `img` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_image_free(img: *mut SgImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Runs segmentation, hierarchy and embedding on `img`; fuses the tree
/// when the configuration yields exactly two scales. The config's input
/// and output paths are ignored.
///
/// # Safety
/// `img` and `cfg` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run(img: *const SgImage, cfg: *const SgConfig, out: *mut *mut SgRun) -> SgStatus {
    guard(|| {
        let img = &ref_arg(img, "image")?.0;
        let cfg = &ref_arg(cfg, "config")?.0;
        cfg.validate().map_err(lib_err)?;
        let run = execute(img, cfg).map_err(lib_err)?;
        store(out, run)
    })
}

fn execute(img: &Image, cfg: &PipelineConfig) -> supergraph::Result<SgRun> {
    let fm = pipeline::features(img, cfg)?;
    let seg = pipeline::segment(&fm, cfg)?;
    let h = pipeline::hierarchy(&seg, cfg)?;
    let emb = pipeline::embed(&fm, &h, cfg)?;
    let root_state = if h.hierarchy.k() == 2 {
        Some(pipeline::fuse(&h, &emb, cfg)?.states.root.h)
    } else {
        None
    };
    Ok(SgRun {
        width: seg.map.width,
        height: seg.map.height,
        labels: seg.map.labels.clone(),
        node_counts: h.hierarchy.scales.iter().map(|g| g.n()).collect(),
        embedding_dim: emb.per_scale.first().map_or(0, |m| m.cols()),
        embeddings: emb.per_scale.into_iter().map(|m| m.into_vec()).collect(),
        root_state,
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_run_free(run: *mut SgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Raster size of the run's label map.
///
/// # Safety
/// `run` must be live; `width` and `height` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_size(run: *const SgRun, width: *mut usize, height: *mut usize) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        if width.is_null() || height.is_null() {
            return Err(fail(SgStatus::NullArgument, "size output is null"));
        }
        *width = run.width;
        *height = run.height;
        Ok(())
    })
}

/// Number of scales, counting the finest.
///
/// # Safety
/// `run` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_scale_count(run: *const SgRun, out: *mut usize) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        copy_scalar(run.node_counts.len(), out)
    })
}

/// Node count of scale `scale`.
///
/// # Safety
/// `run` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_node_count(run: *const SgRun, scale: usize, out: *mut usize) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let n = *run.node_counts.get(scale).ok_or_else(|| scale_err(scale, run))?;
        copy_scalar(n, out)
    })
}

/// Width of every embedding row.
///
/// # Safety
/// `run` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_embedding_dim(run: *const SgRun, out: *mut usize) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        copy_scalar(run.embedding_dim, out)
    })
}

/// Finest-scale region label of every pixel, row-major.
///
/// # Safety
/// `run` must be live, `buf` writable for `capacity` elements, `len_out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_labels(run: *const SgRun, buf: *mut usize, capacity: usize, len_out: *mut usize) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        copy_out(&run.labels, buf, capacity, len_out)
    })
}

/// Node embeddings of scale `scale`, row-major `nodes × dim`.
///
/// # Safety
/// `run` must be live, `buf` writable for `capacity` elements, `len_out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_embeddings(
    run: *const SgRun,
    scale: usize,
    buf: *mut f64,
    capacity: usize,
    len_out: *mut usize,
) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let e = run.embeddings.get(scale).ok_or_else(|| scale_err(scale, run))?;
        copy_out(e, buf, capacity, len_out)
    })
}

/// Hidden state of the fused tree root. `SG_STATUS_NO_FUSION` when the run
/// has other than two scales.
///
/// # Safety
/// `run` must be live, `buf` writable for `capacity` elements, `len_out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run_root_state(run: *const SgRun, buf: *mut f64, capacity: usize, len_out: *mut usize) -> SgStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let root = run.root_state.as_ref().ok_or_else(|| {
            fail(
                SgStatus::NoFusion,
                format!("fusion needs 2 scales, run has {}", run.node_counts.len()),
            )
        })?;
        copy_out(root, buf, capacity, len_out)
    })
}

unsafe fn copy_scalar(v: usize, out: *mut usize) -> Result<(), SgStatus> {
    if out.is_null() {
        return Err(fail(SgStatus::NullArgument, "output pointer is null"));
    }
    *out = v;
    Ok(())
}

fn scale_err(scale: usize, run: &SgRun) -> SgStatus {
    fail(
        SgStatus::OutOfRange,
        format!("scale {scale} out of range (run has {})", run.node_counts.len()),
    )
}
