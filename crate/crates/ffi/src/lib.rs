//! C ABI over `rtr-core`.
//!
//! Every function returns an [`RtrStatus`]; on failure the message is kept in a
//! thread-local slot readable through [`rtr_last_error_message`]. Models are opaque
//! handles created by `rtr_model_new` / `rtr_model_load` and released with
//! `rtr_model_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rtr_core::expressive::{compare, EngineKind, Verdict};
use rtr_core::graph::{ingest_csv, GraphOptions, IngestOptions};
use rtr_core::model::{ModelShape, RtrConfig, RtrModel};
use rtr_core::{Error, Event};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    Parse = 10,
    Validation = 11,
    Config = 12,
    Causality = 13,
    Shape = 14,
    OverBudget = 15,
    Divergence = 16,
    Checkpoint = 17,
    Io = 18,
    Json = 19,
    Panic = 99,
}

impl From<&Error> for RtrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } => RtrStatus::Parse,
            Error::Validation(_) => RtrStatus::Validation,
            Error::Config(_) => RtrStatus::Config,
            Error::Causality(_) => RtrStatus::Causality,
            Error::Shape { .. } => RtrStatus::Shape,
            Error::OverBudget(_) => RtrStatus::OverBudget,
            Error::Divergence(_) => RtrStatus::Divergence,
            Error::Checkpoint(_) => RtrStatus::Checkpoint,
            Error::Io(_) => RtrStatus::Io,
            Error::Json(_) => RtrStatus::Json,
        }
    }
}

/// Verdicts as plain integers.
pub const RTR_ISOMORPHIC: i32 = 0;
pub const RTR_NON_ISOMORPHIC: i32 = 1;

/// Opaque model handle.
pub struct RtrModelHandle {
    model: RtrModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(RtrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(RtrStatus::from(&e), e.to_string())
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RtrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RtrStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RtrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RtrStatus::NullArgument, format!("{what} is NULL"))
}

/// # Safety
/// `p` is NULL or a NUL-terminated string valid for the call.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(RtrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// `h` is NULL or a live handle from this library.
unsafe fn model<'a>(h: *const RtrModelHandle) -> Result<&'a RtrModel, Fail> {
    h.as_ref().map(|h| &h.model).ok_or_else(|| null("model"))
}

/// # Safety
/// `h` is NULL or a live handle from this library, not aliased during the call.
unsafe fn model_mut<'a>(h: *mut RtrModelHandle) -> Result<&'a mut RtrModel, Fail> {
    h.as_mut().map(|h| &mut h.model).ok_or_else(|| null("model"))
}

fn boxed(model: RtrModel) -> *mut RtrModelHandle {
    Box::into_raw(Box::new(RtrModelHandle { model }))
}

/// Copy the last error message of this thread into `buf` (NUL-terminated).
/// Returns the message length without the terminator; 0 if there is none.
/// Truncates when `cap` is too small.
///
/// # Safety
/// `buf` is NULL or points to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rtr_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Create a model from a JSON config (`"{}"` for defaults).
///
/// # Safety
/// `config_json` is a NUL-terminated string; `out` points to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_new(config_json: *const c_char, num_nodes: usize, edge_dim: usize, seed: u64, out: *mut *mut RtrModelHandle) -> RtrStatus {
    guard(|| {
        let cfg: RtrConfig = serde_json::from_str(text(config_json, "config_json")?).map_err(Error::from)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = RtrModel::new(cfg, ModelShape::new(num_nodes, edge_dim), seed)?;
        *out = boxed(m);
        Ok(())
    })
}

/// Load a checkpoint written by `rtr_model_save` or the CLI.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` points to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_load(path: *const c_char, out: *mut *mut RtrModelHandle) -> RtrStatus {
    guard(|| {
        let p = text(path, "path")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = boxed(RtrModel::load(Path::new(p))?);
        Ok(())
    })
}

/// # Safety
/// `h` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_save(h: *const RtrModelHandle, path: *const c_char) -> RtrStatus {
    guard(|| {
        let p = text(path, "path")?;
        model(h)?.save(Path::new(p))?;
        Ok(())
    })
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `h` is NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_free(h: *mut RtrModelHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Width of the vectors written by `rtr_model_embed`.
///
/// # Safety
/// `h` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_embedding_dim(h: *const RtrModelHandle, out: *mut usize) -> RtrStatus {
    guard(|| {
        let d = model(h)?.embedding_dim();
        *out.as_mut().ok_or_else(|| null("out"))? = d;
        Ok(())
    })
}

/// Commit one event. Events must arrive in strictly increasing (time, seq) order.
///
/// # Safety
/// `h` is a live handle; `feats` points to `num_feats` doubles (may be NULL when 0).
#[no_mangle]
pub unsafe extern "C" fn rtr_model_apply_event(
    h: *mut RtrModelHandle,
    src: u32,
    dst: u32,
    time: f64,
    seq: u64,
    feats: *const f64,
    num_feats: usize,
) -> RtrStatus {
    guard(|| {
        let m = model_mut(h)?;
        let mut e = Event::new(src, dst, time, seq);
        if num_feats > 0 {
            if feats.is_null() {
                return Err(null("feats"));
            }
            e.edge_feat = std::slice::from_raw_parts(feats, num_feats).to_vec();
        }
        m.apply_event(&e)?;
        Ok(())
    })
}

/// Write the embedding of `node` at (time, seq) into `out[0..cap]`; `out_len` receives the width.
/// Returns `BufferTooSmall` (with `out_len` set) when `cap` is short.
///
/// # Safety
/// `h` is a live handle; `out` points to `cap` writable doubles; `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_embed(
    h: *const RtrModelHandle,
    node: u32,
    time: f64,
    seq: u64,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> RtrStatus {
    guard(|| {
        let v = model(h)?.embed(node, time, seq)?;
        *out_len.as_mut().ok_or_else(|| null("out_len"))? = v.len();
        if cap < v.len() {
            return Err(Fail(RtrStatus::BufferTooSmall, format!("embedding needs {} doubles, buffer holds {cap}", v.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
        Ok(())
    })
}

/// Link probability for (src, dst) at (time, seq).
///
/// # Safety
/// `h` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rtr_model_score_link(h: *const RtrModelHandle, src: u32, dst: u32, time: f64, seq: u64, out: *mut f64) -> RtrStatus {
    guard(|| {
        let p = model(h)?.score_link(src, dst, time, seq)?;
        *out.as_mut().ok_or_else(|| null("out"))? = p;
        Ok(())
    })
}

/// Decide whether two temporal graphs given as `src,dst,time` CSV text (dense integer ids,
/// undirected) are distinguishable by `engine` (`t1wl`, `rtr`, `rtr-hetero`, `pint-pos`).
/// Writes `RTR_ISOMORPHIC` or `RTR_NON_ISOMORPHIC` to `out`.
///
/// # Safety
/// String arguments are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rtr_isotest_csv(
    engine: *const c_char,
    depth: usize,
    csv_a: *const c_char,
    csv_b: *const c_char,
    num_nodes: usize,
    out: *mut i32,
) -> RtrStatus {
    guard(|| {
        let kind: EngineKind = text(engine, "engine")?.parse()?;
        let opts = IngestOptions { dense_ids: true, num_nodes: Some(num_nodes), graph: GraphOptions::default() };
        let a = ingest_csv(text(csv_a, "csv_a")?.as_bytes(), &opts)?;
        let b = ingest_csv(text(csv_b, "csv_b")?.as_bytes(), &opts)?;
        let v = compare(kind, depth, &a, &b)?;
        *out.as_mut().ok_or_else(|| null("out"))? = if v == Verdict::Isomorphic { RTR_ISOMORPHIC } else { RTR_NON_ISOMORPHIC };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { rtr_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
        assert_eq!(n.min(255), s.len());
        s
    }

    #[test]
    fn null_arguments_are_reported() {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { rtr_model_new(ptr::null(), 4, 0, 0, &mut h) }, RtrStatus::NullArgument);
        assert!(last_error().contains("config_json"));
        assert!(h.is_null());
        unsafe { rtr_model_free(ptr::null_mut()) };
    }

    #[test]
    fn bad_config_maps_to_json_status() {
        let mut h = ptr::null_mut();
        let cfg = c"{\"layerz\": 1}";
        assert_eq!(unsafe { rtr_model_new(cfg.as_ptr(), 4, 0, 0, &mut h) }, RtrStatus::Json);
        assert!(last_error().contains("layerz"));
    }

    #[test]
    fn truncated_error_buffer_is_terminated() {
        let mut h = ptr::null_mut();
        unsafe { rtr_model_new(ptr::null(), 4, 0, 0, &mut h) };
        let mut buf = [1 as c_char; 4];
        let n = unsafe { rtr_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 3);
        assert_eq!(buf[3], 0);
    }
}
