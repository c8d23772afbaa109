//! C ABI for `rankstab`.
//!
//! Every fallible function returns an [`RsStatus`]; on failure the message is
//! kept per thread and can be read with [`rs_last_error_message`]. Handles are
//! opaque and owned by the caller, who releases them with the matching
//! `*_free` function. Strings returned through `out` parameters are released
//! with [`rs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rankstab::dataset::{load_interactions, synth_generate, Dataset, Delimiter, LoadOptions, SynthConfig};
use rankstab::harness::{run_control, run_stability, ExperimentConfig};
use rankstab::idag::{build_idag, cascading_scores, select_targets, CascadeScores, Idag};
use rankstab::metrics::{jaccard_top_k, rbo, rbo_normalized, wilcoxon_signed_rank, RankList, RboParams};
use rankstab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Contract = 5,
    Io = 6,
    Runtime = 7,
    Panic = 8,
}

/// An interaction log.
pub struct RsDataset(Dataset);

/// A dependency DAG together with its cascading scores.
pub struct RsIdag {
    graph: Idag,
    scores: CascadeScores,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RsStatus {
    match e {
        Error::Seeded { source, .. } => status_of(source),
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => RsStatus::Parse,
        Error::Validation(_) | Error::Empty(_) => RsStatus::Validation,
        Error::Contract(_) => RsStatus::Contract,
        Error::Io(_) => RsStatus::Io,
        _ => RsStatus::Runtime,
    }
}

struct Fail(RsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> RsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: caller promises `p` is null or points to a live value.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(RsStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(RsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(RsStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and nul-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(RsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(RsStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn rank_list(p: *const u32, len: usize, universe: usize, what: &str) -> Result<RankList, Fail> {
    Ok(RankList::new(slice(p, len, what)?.to_vec(), universe)?)
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(RsStatus::Runtime, "output contains a nul byte".into()))?;
    // SAFETY: `out` checked non-null by the caller of this helper.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a delimited `user,item,timestamp` log (first three columns).
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_dataset_load(
    path: *const c_char,
    has_header: bool,
    tab_separated: bool,
    out: *mut *mut RsDataset,
) -> RsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = c_str(path, "path")?;
        let file = File::open(path).map_err(|e| Fail(RsStatus::Io, format!("cannot open {path}: {e}")))?;
        let opts = LoadOptions {
            delimiter: if tab_separated { Delimiter::Tsv } else { Delimiter::Csv },
            has_header,
            ..LoadOptions::default()
        };
        let ds = load_interactions(BufReader::new(file), &opts)?;
        *out = Box::into_raw(Box::new(RsDataset(ds)));
        Ok(())
    })
}

/// Generates a synthetic log.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_dataset_synth(
    n_users: usize,
    n_items: usize,
    events_per_user: usize,
    concentration: f64,
    seed: u64,
    out: *mut *mut RsDataset,
) -> RsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let cfg = SynthConfig {
            n_users,
            n_items,
            events_per_user,
            concentration,
            ..SynthConfig::default()
        };
        *out = Box::into_raw(Box::new(RsDataset(synth_generate(&cfg, seed)?)));
        Ok(())
    })
}

/// Number of interactions; 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_dataset_len(ds: *const RsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_dataset_n_users(ds: *const RsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_users())
}

/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_dataset_n_items(ds: *const RsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_items())
}

/// # Safety
/// `ds` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rs_dataset_free(ds: *mut RsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Builds the dependency DAG of `ds` and its cascading scores.
/// `max_seq_len` of 0 means no per-user window.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_idag_build(ds: *const RsDataset, max_seq_len: usize, out: *mut *mut RsIdag) -> RsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let ds = non_null(ds, "dataset")?;
        let window = (max_seq_len > 0).then_some(max_seq_len);
        let graph = build_idag(&ds.0, window)?;
        let scores = cascading_scores(&graph);
        *out = Box::into_raw(Box::new(RsIdag { graph, scores }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_idag_node_count(g: *const RsIdag) -> usize {
    g.as_ref().map_or(0, |g| g.graph.node_count())
}

/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_idag_edge_count(g: *const RsIdag) -> usize {
    g.as_ref().map_or(0, |g| g.graph.edge_count())
}

/// Number of nodes with no incoming edge.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_idag_zero_in_degree(g: *const RsIdag) -> usize {
    g.as_ref().map_or(0, |g| g.scores.z())
}

/// Writes the `k` highest-scoring zero in-degree interactions as sequence
/// indices into `seq_out` and their scores into `score_out` (may be null).
/// Fails when `k` exceeds the zero in-degree count.
///
/// # Safety
/// `g` must be a live handle; `seq_out` (and `score_out` if non-null) must
/// hold `k` elements.
#[no_mangle]
pub unsafe extern "C" fn rs_idag_top_targets(
    g: *const RsIdag,
    k: usize,
    seq_out: *mut u64,
    score_out: *mut u64,
) -> RsStatus {
    guard(|| {
        let g = non_null(g, "idag")?;
        out_ptr(seq_out, "seq_out")?;
        let nodes = select_targets(&g.graph, &g.scores, k)?;
        for (i, n) in nodes.into_iter().enumerate() {
            *seq_out.add(i) = g.graph.seq_index(n);
            if !score_out.is_null() {
                *score_out.add(i) = g.scores.score_of(n).unwrap_or(0) as u64;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rs_idag_free(g: *mut RsIdag) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Truncated RBO (or its normalized form) of two rankings of length `len`
/// over `universe` items.
///
/// # Safety
/// `a` and `b` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_rbo(
    a: *const u32,
    b: *const u32,
    len: usize,
    universe: usize,
    p: f64,
    normalized: bool,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let (a, b) = (rank_list(a, len, universe, "a")?, rank_list(b, len, universe, "b")?);
        let params = RboParams::new(p)?;
        *out = if normalized {
            rbo_normalized(&a, &b, params)?
        } else {
            rbo(&a, &b, params)?
        };
        Ok(())
    })
}

/// # Safety
/// `a` and `b` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_jaccard_top_k(
    a: *const u32,
    b: *const u32,
    len: usize,
    universe: usize,
    k: usize,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let (a, b) = (rank_list(a, len, universe, "a")?, rank_list(b, len, universe, "b")?);
        *out = jaccard_top_k(&a, &b, k)?;
        Ok(())
    })
}

/// Two-sided Wilcoxon signed-rank test on `n` pairs.
///
/// # Safety
/// `x` and `y` must hold `n` elements; `statistic` and `p_value` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_wilcoxon(
    x: *const f64,
    y: *const f64,
    n: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> RsStatus {
    guard(|| {
        out_ptr(statistic, "statistic")?;
        out_ptr(p_value, "p_value")?;
        let r = wilcoxon_signed_rank(slice(x, n, "x")?, slice(y, n, "y")?)?;
        *statistic = r.statistic;
        *p_value = r.p_value;
        Ok(())
    })
}

fn run_json(config: *const c_char, out: *mut *mut c_char, control: bool) -> RsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let cfg: ExperimentConfig = serde_json::from_str(c_str(config, "config")?)
            .map_err(|e| Fail(RsStatus::Parse, format!("config: {e}")))?;
        let report = if control { run_control(&cfg)? } else { run_stability(&cfg)? };
        let json = serde_json::to_string(&report).map_err(|e| Fail(RsStatus::Runtime, e.to_string()))?;
        give_string(json, out)
    })
}

/// Runs a stability experiment from a JSON config and returns the report as
/// JSON. Output files are not written.
///
/// # Safety
/// `config` must be nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_run_stability_json(config: *const c_char, out: *mut *mut c_char) -> RsStatus {
    run_json(config, out, false)
}

/// Like [`rs_run_stability_json`] with the edit disabled; fails with
/// `Runtime` if the two trainings disagree.
///
/// # Safety
/// `config` must be nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_run_control_json(config: *const c_char, out: *mut *mut c_char) -> RsStatus {
    run_json(config, out, true)
}
