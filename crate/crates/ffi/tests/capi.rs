use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use xfrag_core::workload::{BENCHMARK_WORKLOAD, SAMPLE_WORKLOAD};
use xfrag_ffi::*;

fn last_error() -> String {
    let p = xfrag_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Handles {
    wh: *mut XfragWarehouse,
    w: *mut XfragWorkload,
}

impl Handles {
    fn new(facts: usize, workload: &str) -> Self {
        let mut wh = ptr::null_mut();
        let mut w = ptr::null_mut();
        let source = CString::new(workload).unwrap();
        unsafe {
            assert_eq!(xfrag_warehouse_generate(facts, 42, &mut wh), XfragStatus::Ok);
            assert_eq!(xfrag_workload_parse(source.as_ptr(), wh, &mut w), XfragStatus::Ok);
        }
        Handles { wh, w }
    }

    fn schema(&self, strategy: &str, k: usize) -> *mut XfragSchema {
        let mut s = ptr::null_mut();
        let name = CString::new(strategy).unwrap();
        let status = unsafe { xfrag_schema_derive(self.w, name.as_ptr(), k, 42, &mut s) };
        assert_eq!(status, XfragStatus::Ok, "{}", last_error());
        s
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            xfrag_workload_free(self.w);
            xfrag_warehouse_free(self.wh);
        }
    }
}

#[test]
fn sample_schema_has_three_fragments() {
    let h = Handles::new(500, SAMPLE_WORKLOAD);
    unsafe {
        assert_eq!(xfrag_warehouse_fact_count(h.wh), 500);
        assert_eq!(xfrag_workload_query_count(h.w), 10);
        assert_eq!(xfrag_workload_predicate_count(h.w), 4);
        let s = h.schema("km", 2);
        assert_eq!(xfrag_schema_fragment_count(s), 3);
        let xml = xfrag_schema_to_xml(s);
        let text = CStr::from_ptr(xml).to_str().unwrap().to_owned();
        xfrag_string_free(xml);
        assert!(text.contains(r#"<fragment id="f3" else="true"/>"#), "{text}");
        xfrag_schema_free(s);
    }
}

#[test]
fn evaluation_matches_the_unfragmented_warehouse() {
    let h = Handles::new(1000, BENCHMARK_WORKLOAD);
    for (name, k) in [("km", 8), ("pc", 0), ("ab", 0)] {
        let s = h.schema(name, k);
        let mut cost = XfragCost::default();
        unsafe {
            assert_eq!(xfrag_evaluate(h.w, s, h.wh, 1, &mut cost), XfragStatus::Ok, "{}", last_error());
            xfrag_schema_free(s);
        }
        assert!(cost.total_parallel <= cost.total_sequential);
        assert!(cost.total_parallel < cost.unfragmented, "{name}: {cost:?}");
        assert!(cost.fragments_accessed > 0);
    }
}

#[test]
fn fragments_are_written_and_warehouse_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let h = Handles::new(300, SAMPLE_WORKLOAD);
    let s = h.schema("km", 2);
    let frag_dir = CString::new(dir.path().join("frags").to_str().unwrap()).unwrap();
    let wh_dir = CString::new(dir.path().join("wh").to_str().unwrap()).unwrap();
    let mut count = 0usize;
    unsafe {
        assert_eq!(xfrag_fragment(h.w, s, h.wh, frag_dir.as_ptr(), &mut count), XfragStatus::Ok);
        assert_eq!(count, 3);
        assert!(dir.path().join("frags").join("manifest.xml").is_file());

        assert_eq!(xfrag_warehouse_save(h.wh, wh_dir.as_ptr()), XfragStatus::Ok);
        let model = CString::new(dir.path().join("wh").join("dw-model.xml").to_str().unwrap()).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(xfrag_warehouse_load(model.as_ptr(), &mut back), XfragStatus::Ok);
        assert_eq!(xfrag_warehouse_fact_count(back), 300);
        xfrag_warehouse_free(back);
        xfrag_schema_free(s);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let h = Handles::new(100, SAMPLE_WORKLOAD);
    let mut s = ptr::null_mut();
    let mut w = ptr::null_mut();
    let mut wh = ptr::null_mut();
    unsafe {
        let km = CString::new("km").unwrap();
        assert_eq!(xfrag_schema_derive(h.w, km.as_ptr(), 0, 1, &mut s), XfragStatus::Parameter);
        assert!(s.is_null());

        let bogus = CString::new("zz").unwrap();
        assert_eq!(xfrag_schema_derive(h.w, bogus.as_ptr(), 2, 1, &mut s), XfragStatus::Parameter);
        assert!(last_error().contains("zz"));

        let broken = CString::new("for $x in").unwrap();
        assert_eq!(xfrag_workload_parse(broken.as_ptr(), h.wh, &mut w), XfragStatus::Parse);

        assert_eq!(xfrag_workload_parse(ptr::null(), h.wh, &mut w), XfragStatus::NullArgument);
        assert_eq!(last_error(), "source is null");

        let bad = [0xffu8, 0];
        assert_eq!(xfrag_warehouse_load(bad.as_ptr().cast(), &mut wh), XfragStatus::InvalidUtf8);

        let missing = CString::new("/nonexistent/dw-model.xml").unwrap();
        assert_eq!(xfrag_warehouse_load(missing.as_ptr(), &mut wh), XfragStatus::Io);
        assert!(wh.is_null());

        assert_eq!(xfrag_warehouse_generate(0, 1, &mut wh), XfragStatus::Parameter);
        assert_eq!(xfrag_warehouse_generate(10, 1, ptr::null_mut()), XfragStatus::NullArgument);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        xfrag_warehouse_free(ptr::null_mut());
        xfrag_workload_free(ptr::null_mut());
        xfrag_schema_free(ptr::null_mut());
        xfrag_string_free(ptr::null_mut());
        assert_eq!(xfrag_warehouse_fact_count(ptr::null()), 0);
        assert!(xfrag_schema_to_xml(ptr::null()).is_null());
    }
    let v = unsafe { CStr::from_ptr(xfrag_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("xfrag.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["xfrag_warehouse_generate", "xfrag_evaluate", "XFRAG_STATUS_CONSISTENCY = 6", "typedef struct XfragWarehouse XfragWarehouse"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
