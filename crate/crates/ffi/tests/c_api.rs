use std::ffi::{c_char, CStr, CString};
use std::ptr;

use rtr_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { rtr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn new_model(cfg: &str, nodes: usize) -> *mut RtrModelHandle {
    let cfg = CString::new(cfg).unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { rtr_model_new(cfg.as_ptr(), nodes, 0, 7, &mut h) };
    assert_eq!(st, RtrStatus::Ok, "{}", last_error());
    assert!(!h.is_null());
    h
}

fn embed(h: *const RtrModelHandle, node: u32, t: f64, s: u64) -> Vec<f64> {
    let mut d = 0;
    assert_eq!(unsafe { rtr_model_embedding_dim(h, &mut d) }, RtrStatus::Ok);
    let mut out = vec![0.0; d];
    let mut len = 0;
    let st = unsafe { rtr_model_embed(h, node, t, s, out.as_mut_ptr(), out.len(), &mut len) };
    assert_eq!(st, RtrStatus::Ok, "{}", last_error());
    assert_eq!(len, d);
    out
}

const SMALL: &str = r#"{"dim": 8, "time_dim": 4, "seq_dim": 4, "heads": 2, "layers": 2}"#;

#[test]
fn model_lifecycle_and_checkpoint_round_trip() {
    let h = new_model(SMALL, 4);
    for (i, (u, v)) in [(0, 1), (1, 2), (2, 3), (3, 0)].into_iter().enumerate() {
        let st = unsafe { rtr_model_apply_event(h, u, v, i as f64 + 1.0, i as u64, ptr::null(), 0) };
        assert_eq!(st, RtrStatus::Ok, "{}", last_error());
    }
    let z = embed(h, 2, 10.0, 10);
    assert!(z.iter().all(|x| x.is_finite()));
    let mut p = -1.0;
    assert_eq!(unsafe { rtr_model_score_link(h, 0, 2, 10.0, 10, &mut p) }, RtrStatus::Ok);
    assert!((0.0..=1.0).contains(&p));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rtr_model_save(h, path.as_ptr()) }, RtrStatus::Ok, "{}", last_error());
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { rtr_model_load(path.as_ptr(), &mut loaded) }, RtrStatus::Ok, "{}", last_error());
    assert_eq!(embed(loaded, 2, 10.0, 10), z);
    let mut q = -1.0;
    assert_eq!(unsafe { rtr_model_score_link(loaded, 0, 2, 10.0, 10, &mut q) }, RtrStatus::Ok);
    assert_eq!(p.to_bits(), q.to_bits());
    unsafe {
        rtr_model_free(h);
        rtr_model_free(loaded);
    }
}

#[test]
fn out_of_order_event_is_a_causality_error() {
    let h = new_model(SMALL, 3);
    assert_eq!(unsafe { rtr_model_apply_event(h, 0, 1, 5.0, 0, ptr::null(), 0) }, RtrStatus::Ok);
    assert_eq!(unsafe { rtr_model_apply_event(h, 1, 2, 4.0, 1, ptr::null(), 0) }, RtrStatus::Causality);
    assert!(!last_error().is_empty());
    unsafe { rtr_model_free(h) };
}

#[test]
fn short_embedding_buffer_reports_required_length() {
    let h = new_model(SMALL, 2);
    let mut out = [0.0; 1];
    let mut len = 0;
    assert_eq!(unsafe { rtr_model_embed(h, 0, 1.0, 0, out.as_mut_ptr(), out.len(), &mut len) }, RtrStatus::BufferTooSmall);
    let mut d = 0;
    unsafe { rtr_model_embedding_dim(h, &mut d) };
    assert_eq!(len, d);
    unsafe { rtr_model_free(h) };
}

#[test]
fn unknown_node_needs_an_implicit_base() {
    let explicit = new_model(r#"{"dim": 8, "time_dim": 4, "seq_dim": 4, "base_mode": "explicit"}"#, 2);
    let mut p = 0.0;
    assert_eq!(unsafe { rtr_model_score_link(explicit, 0, 9, 1.0, 0, &mut p) }, RtrStatus::Shape);
    let implicit = new_model(SMALL, 2);
    assert_eq!(unsafe { rtr_model_score_link(implicit, 0, 9, 1.0, 0, &mut p) }, RtrStatus::Ok);
    unsafe {
        rtr_model_free(explicit);
        rtr_model_free(implicit);
    }
}

fn csl_csv(n: u32, skip: u32) -> CString {
    let mut s = String::from("src,dst,time\n");
    for i in 0..n {
        s += &format!("{},{},1\n", i, (i + 1) % n);
        s += &format!("{},{},1\n", i, (i + skip) % n);
    }
    CString::new(s).unwrap()
}

#[test]
fn isotest_on_csv_text() {
    let (a, b) = (csl_csv(7, 2), csl_csv(7, 3));
    let run = |engine: &str| {
        let e = CString::new(engine).unwrap();
        let mut v = -1;
        let st = unsafe { rtr_isotest_csv(e.as_ptr(), 4, a.as_ptr(), b.as_ptr(), 7, &mut v) };
        assert_eq!(st, RtrStatus::Ok, "{}", last_error());
        v
    };
    // Both are 4-regular single-snapshot graphs: colour refinement cannot separate them,
    // but the positional features can.
    assert_eq!(run("t1wl"), RTR_ISOMORPHIC);
    assert_eq!(run("rtr-hetero"), RTR_ISOMORPHIC);
    assert_eq!(run("pint-pos"), RTR_NON_ISOMORPHIC);

    let bogus = CString::new("nope").unwrap();
    let mut v = -1;
    let st = unsafe { rtr_isotest_csv(bogus.as_ptr(), 4, a.as_ptr(), b.as_ptr(), 7, &mut v) };
    assert_ne!(st, RtrStatus::Ok);
    assert_eq!(v, -1);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rtr.h")).unwrap();
    for f in [
        "rtr_last_error_message",
        "rtr_model_new",
        "rtr_model_load",
        "rtr_model_save",
        "rtr_model_free",
        "rtr_model_embedding_dim",
        "rtr_model_apply_event",
        "rtr_model_embed",
        "rtr_model_score_link",
        "rtr_isotest_csv",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}
