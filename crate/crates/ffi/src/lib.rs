//! C ABI over the discovery engine.
//!
//! Every fallible entry point returns an [`RlcStatus`]; on failure a message is
//! available from [`rlc_last_error_message`] on the same thread. Objects are
//! opaque handles released with their matching `*_free` function, and strings
//! returned through out-parameters are released with [`rlc_string_free`].
//! Panics never cross the boundary; they surface as `RLC_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rlcausal::data::{encode_categoricals, load_csv, standardize, Dataset, VariableTable};
use rlcausal::graph::{AdjacencyMatrix, CausalGraph};
use rlcausal::numeric::Matrix;
use rlcausal::pipeline::GraphDocument;
use rlcausal::policy::{train, TrainerConfig};
use rlcausal::scoring::{BicScorer, RegressionKind};
use rlcausal::strength::{digamma, spacing_entropy};
use rlcausal::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Domain = 4,
    Io = 5,
    Diverged = 6,
    Internal = 7,
}

/// Regression family for BIC scoring.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlcRegression {
    Linear = 0,
    Quadratic = 1,
}

/// Opaque dataset handle.
pub struct RlcDataset(Dataset);

/// Opaque graph handle.
pub struct RlcGraph(CausalGraph);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RlcStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Domain(_) => RlcStatus::Domain,
        Error::Validation(_) | Error::Ingest(_) | Error::Json(_) | Error::Csv(_) => RlcStatus::Validation,
        Error::Usage(_) | Error::Shape { .. } => RlcStatus::InvalidArgument,
        Error::Io(_) => RlcStatus::Io,
        Error::Diverged(_) => RlcStatus::Diverged,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RlcStatus, String)>) -> RlcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RlcStatus::Internal
        }
    }
}

fn lift(e: Error) -> (RlcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (RlcStatus, String) {
    (RlcStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (RlcStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (RlcStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (RlcStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RlcStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, (RlcStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (RlcStatus::Internal, "string contains a nul byte".into()))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rlc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rlc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rlc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV file with a header row; column kinds are inferred.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_dataset_load_csv(path: *const c_char, out: *mut *mut RlcDataset) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = c_str(path, "path")?;
        let ds = load_csv(Path::new(path), None).map_err(lift)?;
        *out = Box::into_raw(Box::new(RlcDataset(ds)));
        Ok(())
    })
}

/// Wraps a row-major `rows×cols` array of samples; columns are named `x0..`.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_dataset_from_rows(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut RlcDataset,
) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or((RlcStatus::InvalidArgument, "rows * cols overflows".to_string()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let m = Matrix::from_vec(rows, cols, values).map_err(lift)?;
        let ds = Dataset::from_matrix(&m, VariableTable::numbered(cols)).map_err(lift)?;
        *out = Box::into_raw(Box::new(RlcDataset(ds)));
        Ok(())
    })
}

/// Integer-encodes categorical columns and z-scores every column into a new
/// dataset.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_dataset_standardize(ds: *const RlcDataset, out: *mut *mut RlcDataset) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = deref(ds, "ds")?;
        let z = standardize(&encode_categoricals(&ds.0)).map_err(lift)?;
        *out = Box::into_raw(Box::new(RlcDataset(z)));
        Ok(())
    })
}

/// Sample count, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rlc_dataset_rows(ds: *const RlcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_samples())
}

/// Variable count, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rlc_dataset_cols(ds: *const RlcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_vars())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlc_dataset_free(ds: *mut RlcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Graph on `d` nodes (named `x0..`) with edges `from[k] → to[k]`.
///
/// # Safety
/// `from` and `to` must each hold `n_edges` readable values (may be null when
/// `n_edges` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_from_edges(
    d: usize,
    from: *const usize,
    to: *const usize,
    n_edges: usize,
    out: *mut *mut RlcGraph,
) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (from, to) = if n_edges == 0 {
            (&[][..], &[][..])
        } else {
            if from.is_null() || to.is_null() {
                return Err(null("from/to"));
            }
            (std::slice::from_raw_parts(from, n_edges), std::slice::from_raw_parts(to, n_edges))
        };
        let a = AdjacencyMatrix::from_edges(d, from.iter().copied().zip(to.iter().copied())).map_err(lift)?;
        let g = CausalGraph::new(a, VariableTable::numbered(d)).map_err(lift)?;
        *out = Box::into_raw(Box::new(RlcGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_node_count(g: *const RlcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.adjacency.d())
}

/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_edge_count(g: *const RlcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.adjacency.edge_count())
}

/// Writes whether the edge `from → to` exists.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_has_edge(g: *const RlcGraph, from: usize, to: usize, out: *mut bool) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = deref(g, "g")?;
        let d = g.0.adjacency.d();
        if from >= d || to >= d {
            return Err((RlcStatus::InvalidArgument, format!("node index out of range for d = {d}")));
        }
        *out = g.0.adjacency.has_edge(from, to);
        Ok(())
    })
}

/// Exact cycle test.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_is_dag(g: *const RlcGraph, out: *mut bool) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = deref(g, "g")?.0.adjacency.is_dag();
        Ok(())
    })
}

/// `trace(e^A) − d` of the graph's adjacency.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_acyclicity_penalty(g: *const RlcGraph, out: *mut f64) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = deref(g, "g")?.0.adjacency.acyclicity_penalty();
        Ok(())
    })
}

/// Graph as a versioned JSON document; free the result with
/// [`rlc_string_free`].
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_to_json(g: *const RlcGraph, out: *mut *mut c_char) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = deref(g, "g")?;
        let text = GraphDocument::new(&g.0, None).to_json().map_err(lift)?;
        *out = to_c_string(text)?;
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlc_graph_free(g: *mut RlcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

fn regression(kind: RlcRegression) -> RegressionKind {
    match kind {
        RlcRegression::Linear => RegressionKind::Linear,
        RlcRegression::Quadratic => RegressionKind::Quadratic,
    }
}

/// BIC of `g` on the numeric dataset `ds`.
///
/// # Safety
/// `ds` and `g` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_bic(ds: *const RlcDataset, g: *const RlcGraph, kind: RlcRegression, out: *mut f64) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (ds, g) = (deref(ds, "ds")?, deref(g, "g")?);
        let scorer = BicScorer::new(&ds.0, regression(kind)).map_err(lift)?;
        *out = scorer.graph_bic(&g.0.adjacency).map_err(lift)?;
        Ok(())
    })
}

/// `ψ(x)` for `x > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_digamma(x: f64, out: *mut f64) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = digamma(x).map_err(lift)?;
        Ok(())
    })
}

/// Spacing estimate of differential entropy in nats.
///
/// # Safety
/// `xs` must hold `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_spacing_entropy(xs: *const f64, n: usize, out: *mut f64) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if xs.is_null() {
            return Err(null("xs"));
        }
        let sample = std::slice::from_raw_parts(xs, n);
        *out = spacing_entropy(sample).map_err(lift)?.value;
        Ok(())
    })
}

/// Runs the search on a numeric dataset and returns the best DAG.
/// `config_json` is a trainer configuration object (null for defaults);
/// missing fields take their defaults.
///
/// # Safety
/// `ds` must be a live handle; `config_json` must be null or nul-terminated;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlc_discover(
    ds: *const RlcDataset,
    config_json: *const c_char,
    kind: RlcRegression,
    out: *mut *mut RlcGraph,
) -> RlcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = deref(ds, "ds")?;
        let cfg: TrainerConfig = if config_json.is_null() {
            TrainerConfig::default()
        } else {
            serde_json::from_str(c_str(config_json, "config_json")?)
                .map_err(|e| (RlcStatus::Validation, format!("trainer config: {e}")))?
        };
        let scorer = BicScorer::new(&ds.0, regression(kind)).map_err(lift)?;
        let (g, _) = train(&cfg, &ds.0, &scorer).map_err(lift)?;
        *out = Box::into_raw(Box::new(RlcGraph(g)));
        Ok(())
    })
}
