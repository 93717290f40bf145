use std::ffi::{CStr, CString};
use std::ptr;

use rlcausal_ffi::*;

fn last_error() -> String {
    let p = rlc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn chain_data(n: usize) -> Vec<f64> {
    // x0 uniform-ish, x1 = 2 x0 + noise, x2 independent
    let mut out = Vec::with_capacity(n * 3);
    for i in 0..n {
        let a = ((i as f64) * 0.618_033_988_7).fract() - 0.5;
        let e = ((i as f64) * 0.414_213_562_3).fract() - 0.5;
        let c = ((i as f64) * 0.732_050_807_5).fract() - 0.5;
        out.extend([a, 2.0 * a + 0.3 * e, c]);
    }
    out
}

unsafe fn graph(d: usize, edges: &[(usize, usize)]) -> *mut RlcGraph {
    let from: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let to: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let mut g = ptr::null_mut();
    assert_eq!(rlc_graph_from_edges(d, from.as_ptr(), to.as_ptr(), edges.len(), &mut g), RlcStatus::Ok);
    g
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(rlc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        let mut out = 0.0;
        assert_eq!(rlc_bic(ptr::null(), ptr::null(), RlcRegression::Linear, &mut out), RlcStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(rlc_digamma(1.0, ptr::null_mut()), RlcStatus::NullPointer);
        assert_eq!(rlc_dataset_rows(ptr::null()), 0);
        rlc_dataset_free(ptr::null_mut());
        rlc_graph_free(ptr::null_mut());
        rlc_string_free(ptr::null_mut());
    }
}

#[test]
fn digamma_and_domain_error() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(rlc_digamma(1.0, &mut v), RlcStatus::Ok);
        assert!((v + 0.577_215_664_901_532_9).abs() < 1e-12);
        assert_eq!(rlc_digamma(-1.0, &mut v), RlcStatus::Domain);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn spacing_entropy_matches_core() {
    let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut v = 0.0;
    unsafe {
        assert_eq!(rlc_spacing_entropy(xs.as_ptr(), xs.len(), &mut v), RlcStatus::Ok);
    }
    assert_eq!(v, rlcausal::strength::spacing_entropy(&xs).unwrap().value);
    unsafe {
        assert_eq!(rlc_spacing_entropy(xs.as_ptr(), 1, &mut v), RlcStatus::InvalidArgument);
    }
}

#[test]
fn graph_queries() {
    unsafe {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(rlc_graph_node_count(g), 3);
        assert_eq!(rlc_graph_edge_count(g), 2);
        let mut b = false;
        assert_eq!(rlc_graph_has_edge(g, 0, 1, &mut b), RlcStatus::Ok);
        assert!(b);
        assert_eq!(rlc_graph_has_edge(g, 0, 7, &mut b), RlcStatus::InvalidArgument);
        assert_eq!(rlc_graph_is_dag(g, &mut b), RlcStatus::Ok);
        assert!(b);
        let mut h = 1.0;
        assert_eq!(rlc_graph_acyclicity_penalty(g, &mut h), RlcStatus::Ok);
        assert_eq!(h, 0.0);

        let mut json = ptr::null_mut();
        assert_eq!(rlc_graph_to_json(g, &mut json), RlcStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        rlc_string_free(json);
        let doc = rlcausal::pipeline::GraphDocument::from_json(&text).unwrap();
        assert_eq!(doc.to_graph().unwrap().adjacency.edge_count(), 2);
        rlc_graph_free(g);

        let cyc = graph(2, &[(0, 1), (1, 0)]);
        assert_eq!(rlc_graph_is_dag(cyc, &mut b), RlcStatus::Ok);
        assert!(!b);
        assert_eq!(rlc_graph_acyclicity_penalty(cyc, &mut h), RlcStatus::Ok);
        assert!((h - 1.0862).abs() < 1e-4);
        rlc_graph_free(cyc);

        let mut bad = ptr::null_mut();
        let (f, t) = ([1usize], [1usize]);
        assert_eq!(rlc_graph_from_edges(2, f.as_ptr(), t.as_ptr(), 1, &mut bad), RlcStatus::InvalidArgument);
        assert!(bad.is_null());
    }
}

#[test]
fn dataset_and_bic() {
    let data = chain_data(400);
    unsafe {
        let mut raw = ptr::null_mut();
        assert_eq!(rlc_dataset_from_rows(data.as_ptr(), 400, 3, &mut raw), RlcStatus::Ok);
        assert_eq!((rlc_dataset_rows(raw), rlc_dataset_cols(raw)), (400, 3));
        let mut ds = ptr::null_mut();
        assert_eq!(rlc_dataset_standardize(raw, &mut ds), RlcStatus::Ok);
        rlc_dataset_free(raw);

        let truth = graph(3, &[(0, 1)]);
        let empty = graph(3, &[]);
        let (mut bt, mut be) = (0.0, 0.0);
        assert_eq!(rlc_bic(ds, truth, RlcRegression::Linear, &mut bt), RlcStatus::Ok);
        assert_eq!(rlc_bic(ds, empty, RlcRegression::Linear, &mut be), RlcStatus::Ok);
        assert!(bt < be, "{bt} vs {be}");
        let mut bq = 0.0;
        assert_eq!(rlc_bic(ds, truth, RlcRegression::Quadratic, &mut bq), RlcStatus::Ok);
        assert!(bq.is_finite());

        let wrong = graph(2, &[]);
        assert_ne!(rlc_bic(ds, wrong, RlcRegression::Linear, &mut bt), RlcStatus::Ok);
        for g in [truth, empty, wrong] {
            rlc_graph_free(g);
        }
        rlc_dataset_free(ds);
    }
}

#[test]
fn load_csv_round_trip_and_missing_file() {
    let dir = std::env::temp_dir().join(format!("rlc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("d.csv");
    std::fs::write(&path, "a,b\n1,2\n3,5\n4,4\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(rlc_dataset_load_csv(c.as_ptr(), &mut ds), RlcStatus::Ok);
        assert_eq!((rlc_dataset_rows(ds), rlc_dataset_cols(ds)), (3, 2));
        rlc_dataset_free(ds);
        let missing = CString::new(dir.join("nope.csv").to_str().unwrap()).unwrap();
        let mut ds = ptr::null_mut();
        assert_ne!(rlc_dataset_load_csv(missing.as_ptr(), &mut ds), RlcStatus::Ok);
        assert!(ds.is_null());
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn discover_small_chain() {
    let data = chain_data(300);
    let cfg = CString::new(r#"{"iterations": 60, "batch_size": 32, "graphs_per_iteration": 8, "seed": 3,
        "encoder": {"layers": 1, "heads": 2, "d_model": 16, "d_ff": 32, "positional_encoding": false},
        "decoder_hidden": 16, "critic_hidden": 16}"#)
    .unwrap();
    unsafe {
        let mut raw = ptr::null_mut();
        assert_eq!(rlc_dataset_from_rows(data.as_ptr(), 300, 3, &mut raw), RlcStatus::Ok);
        let mut ds = ptr::null_mut();
        assert_eq!(rlc_dataset_standardize(raw, &mut ds), RlcStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(rlc_discover(ds, cfg.as_ptr(), RlcRegression::Linear, &mut g), RlcStatus::Ok, "{}", last_error());
        let mut dag = false;
        assert_eq!(rlc_graph_is_dag(g, &mut dag), RlcStatus::Ok);
        assert!(dag);
        let (mut a, mut b) = (false, false);
        rlc_graph_has_edge(g, 0, 1, &mut a);
        rlc_graph_has_edge(g, 1, 0, &mut b);
        assert!(a || b);
        rlc_graph_free(g);

        let bad = CString::new("{\"iterations\": \"many\"}").unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(rlc_discover(ds, bad.as_ptr(), RlcRegression::Linear, &mut g), RlcStatus::Validation);
        rlc_dataset_free(ds);
        rlc_dataset_free(raw);
    }
}
