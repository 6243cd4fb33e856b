//! C interface to xfrag.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released by the matching `*_free`. Every fallible
//! call returns an [`XfragStatus`]; on failure the message is available from
//! [`xfrag_last_error`] on the same thread until the next failing call.
//! Strings returned by the library are owned by the caller and must be
//! released with [`xfrag_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use xfrag_core::engine::{execute_fragmented, execute_whole, route_workload, FragmentSet, Router};
use xfrag_core::fragmenter::{check_partition, materialize, write_fragments};
use xfrag_core::generator::{generate_warehouse, GeneratorSpec};
use xfrag_core::model::Warehouse;
use xfrag_core::store::{load_warehouse, save_warehouse};
use xfrag_core::strategies::{derive_schema, schema_to_xml, DeriveConfig, FragSchema, Strategy};
use xfrag_core::workload::{bind_workload, parse_workload, BoundWorkload};
use xfrag_core::Error;

/// Result of every fallible call. The non-zero values equal the exit codes
/// of the command line tool for the same error family.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XfragStatus {
    Ok = 0,
    /// Malformed XML, document layout or workload syntax.
    Parse = 2,
    /// Workload does not bind against the warehouse catalog.
    Bind = 3,
    /// Out-of-range or unknown argument.
    Parameter = 4,
    Io = 5,
    /// Referential integrity or result consistency failure.
    Consistency = 6,
    NullArgument = 7,
    InvalidUtf8 = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

impl From<&Error> for XfragStatus {
    fn from(e: &Error) -> Self {
        match e.exit_code() {
            2 => XfragStatus::Parse,
            3 => XfragStatus::Bind,
            4 => XfragStatus::Parameter,
            5 => XfragStatus::Io,
            6 => XfragStatus::Consistency,
            _ => XfragStatus::Internal,
        }
    }
}

/// Opaque warehouse handle.
pub struct XfragWarehouse(Warehouse);

/// Opaque handle to a workload bound against a warehouse catalog.
pub struct XfragWorkload(BoundWorkload);

/// Opaque fragmentation schema handle.
pub struct XfragSchema(FragSchema);

/// Costs of running a workload, in fact entries scanned.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XfragCost {
    /// Sum over queries of the largest fragment scan.
    pub total_parallel: u64,
    /// Sum over queries of all fragment scans.
    pub total_sequential: u64,
    pub fragments_accessed: u64,
    /// Same workload on the unfragmented warehouse.
    pub unfragmented: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, records any error or panic, and maps it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> XfragStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => XfragStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            let status = XfragStatus::from(&e);
            set_error(e.to_string());
            status
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            XfragStatus::NullArgument
        }
        Ok(Err(Failure::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            XfragStatus::InvalidUtf8
        }
        Err(panic) => {
            let text = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {text}"));
            XfragStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn xfrag_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn xfrag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates the four-dimension benchmark warehouse with `facts` facts.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xfrag_warehouse_generate(facts: usize, seed: u64, out: *mut *mut XfragWarehouse) -> XfragStatus {
    guard(|| {
        let wh = generate_warehouse(&GeneratorSpec::xweb(seed).with_facts(facts))?;
        put(out, XfragWarehouse(wh))
    })
}

/// Loads a warehouse from its dw-model.xml and the documents beside it.
///
/// # Safety
/// `model_path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xfrag_warehouse_load(model_path: *const c_char, out: *mut *mut XfragWarehouse) -> XfragStatus {
    guard(|| {
        let path = text(model_path, "model_path")?;
        put(out, XfragWarehouse(load_warehouse(path)?))
    })
}

/// Writes the catalog and all documents into `dir`.
///
/// # Safety
/// `wh` must be a live handle, `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn xfrag_warehouse_save(wh: *const XfragWarehouse, dir: *const c_char) -> XfragStatus {
    guard(|| {
        let wh = borrow(wh, "wh")?;
        save_warehouse(&wh.0, text(dir, "dir")?)?;
        Ok(())
    })
}

/// Number of facts over all fact sets; 0 for NULL.
///
/// # Safety
/// `wh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xfrag_warehouse_fact_count(wh: *const XfragWarehouse) -> usize {
    wh.as_ref().map_or(0, |w| w.0.fact_count())
}

/// # Safety
/// `wh` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xfrag_warehouse_free(wh: *mut XfragWarehouse) {
    free(wh)
}

/// Parses workload text and binds it against the catalog of `wh`.
///
/// # Safety
/// `source` must be a NUL-terminated string, `wh` a live handle, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xfrag_workload_parse(
    source: *const c_char,
    wh: *const XfragWarehouse,
    out: *mut *mut XfragWorkload,
) -> XfragStatus {
    guard(|| {
        let source = text(source, "source")?;
        let wh = borrow(wh, "wh")?;
        let bound = bind_workload(&parse_workload(source)?, &wh.0.meta)?;
        put(out, XfragWorkload(bound))
    })
}

/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xfrag_workload_query_count(w: *const XfragWorkload) -> usize {
    w.as_ref().map_or(0, |w| w.0.queries.len())
}

/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xfrag_workload_predicate_count(w: *const XfragWorkload) -> usize {
    w.as_ref().map_or(0, |w| w.0.predicates.len())
}

/// # Safety
/// `w` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xfrag_workload_free(w: *mut XfragWorkload) {
    free(w)
}

/// Derives a fragmentation schema. `strategy` is "km", "pc" or "ab";
/// `k` and `seed` are only read for "km".
///
/// # Safety
/// `w` must be a live handle, `strategy` a NUL-terminated string, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xfrag_schema_derive(
    w: *const XfragWorkload,
    strategy: *const c_char,
    k: usize,
    seed: u64,
    out: *mut *mut XfragSchema,
) -> XfragStatus {
    guard(|| {
        let w = borrow(w, "w")?;
        let strategy: Strategy = text(strategy, "strategy")?.parse()?;
        let schema = derive_schema(&w.0, &DeriveConfig { strategy, k, seed })?;
        put(out, XfragSchema(schema))
    })
}

/// Fragment count including ELSE; 0 for NULL.
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xfrag_schema_fragment_count(s: *const XfragSchema) -> usize {
    s.as_ref().map_or(0, |s| s.0.fragment_count())
}

/// The schema as frag-schema.xml text, or NULL for a NULL handle. Free with
/// [`xfrag_string_free`].
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xfrag_schema_to_xml(s: *const XfragSchema) -> *mut c_char {
    match s.as_ref() {
        Some(s) => CString::new(schema_to_xml(&s.0)).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xfrag_schema_free(s: *mut XfragSchema) {
    free(s)
}

/// Splits `wh` by `s` and writes the fragment documents and manifest into
/// `dir`. The number of fragments written goes to `fragments` if non-NULL.
///
/// # Safety
/// All handles must be live; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn xfrag_fragment(
    w: *const XfragWorkload,
    s: *const XfragSchema,
    wh: *const XfragWarehouse,
    dir: *const c_char,
    fragments: *mut usize,
) -> XfragStatus {
    guard(|| {
        let (w, s, wh) = (borrow(w, "w")?, borrow(s, "s")?, borrow(wh, "wh")?);
        let dir = text(dir, "dir")?;
        let frags = materialize(&s.0, &w.0.predicates, &wh.0)?;
        check_partition(&frags, wh.0.fact_count())?;
        let manifest = write_fragments(&frags, &wh.0, dir)?;
        if !fragments.is_null() {
            *fragments = manifest.fragments.len();
        }
        Ok(())
    })
}

/// Runs the workload on the fragmented and on the whole warehouse and
/// fills `cost`. Fails with `Consistency` if any query answers differently.
///
/// # Safety
/// All handles must be live; `cost` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xfrag_evaluate(
    w: *const XfragWorkload,
    s: *const XfragSchema,
    wh: *const XfragWarehouse,
    seed: u64,
    cost: *mut XfragCost,
) -> XfragStatus {
    guard(|| {
        let (w, s, wh) = (borrow(w, "w")?, borrow(s, "s")?, borrow(wh, "wh")?);
        if cost.is_null() {
            return Err(Failure::Null("cost"));
        }
        let router = Router::new(&s.0, &w.0.predicates)?;
        let plans = route_workload(&router, &w.0)?;
        let set = FragmentSet::build(&materialize(&s.0, &w.0.predicates, &wh.0)?, &wh.0)?;
        let split = execute_fragmented(&w.0, &plans, &set, s.0.strategy.as_str(), None, seed)?;
        let whole = execute_whole(&w.0, &wh.0, seed)?;
        if let Some(i) = (0..whole.results.len()).find(|&i| whole.results[i] != split.results[i]) {
            return Err(Error::Consistency(format!(
                "query {} answers differently on the fragmented warehouse",
                w.0.queries[i].id
            ))
            .into());
        }
        *cost = XfragCost {
            total_parallel: split.report.total_parallel() as u64,
            total_sequential: split.report.total_sequential() as u64,
            fragments_accessed: split.report.total_fragments_accessed() as u64,
            unfragmented: whole.report.total_sequential() as u64,
        };
        Ok(())
    })
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn xfrag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
