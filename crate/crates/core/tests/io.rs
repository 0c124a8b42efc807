use rank1sense::altmin::{fast_matrix_sensing, SolverConfig};
use rank1sense::diagnostics::{operator_sweep, write_sweep_csv, SweepConfig};
use rank1sense::regression::container::RegressionDump;
use rank1sense::regression::{solve_naive, RegressionProblem};
use rank1sense::{
    load_json, make_ground_truth, sample_ensemble, save_json, DenseMatrix, Ensemble, Error, GroundTruth64,
    SpectrumShape,
};

#[test]
fn ground_truth_and_ensemble_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_ground_truth::<f64>(5, 2, 3.0, SpectrumShape::Linear, 1).unwrap();
    let e = sample_ensemble::<f64>(5, 20, 2).unwrap();
    save_json(&g, dir.path().join("g.json")).unwrap();
    save_json(&e, dir.path().join("e.json")).unwrap();
    assert_eq!(load_json::<GroundTruth64>(dir.path().join("g.json")).unwrap(), g);
    assert_eq!(load_json::<Ensemble>(dir.path().join("e.json")).unwrap(), e);
}

#[test]
fn load_rejects_inconsistent_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"rows":2,"cols":2,"data":[1.0,2.0,3.0]}"#).unwrap();
    assert!(load_json::<DenseMatrix<f64>>(&path).is_err());
    std::fs::write(&path, "not json").unwrap();
    assert!(matches!(load_json::<DenseMatrix<f64>>(&path), Err(Error::Json(_))));
    assert!(matches!(load_json::<DenseMatrix<f64>>(dir.path().join("missing.json")), Err(Error::Io(_))));
}

#[test]
fn regression_dump_round_trip() {
    let g = make_ground_truth::<f64>(4, 2, 2.0, SpectrumShape::Geometric, 3).unwrap();
    let e = sample_ensemble::<f64>(4, 30, 4).unwrap();
    let b = g.measure(&e).unwrap();
    let p = RegressionProblem::from_sensing(&g.u_star, &e, &b).unwrap();
    let dump = RegressionDump { v: solve_naive(&p).unwrap(), design: p.design, b: p.b };
    let mut bytes = Vec::new();
    dump.write_to(&mut bytes).unwrap();
    assert_eq!(RegressionDump::<f64>::read_from(bytes.as_slice()).unwrap(), dump);
    bytes[0] = b'X';
    assert!(RegressionDump::<f64>::read_from(bytes.as_slice()).is_err());
}

#[test]
fn trace_csv_has_one_row_per_iteration() {
    let g = make_ground_truth::<f64>(6, 2, 2.0, SpectrumShape::Geometric, 5).unwrap();
    let run = fast_matrix_sensing(&SolverConfig::new(6, 2, 120, 4, 6), &g).unwrap();
    let mut out = Vec::new();
    run.trace.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,dist_U,dist_V,rel_error,residual,millis");
    assert_eq!(lines.len(), 6);
    // t = 0 has no V distance and no residual.
    assert_eq!(lines[1].split(',').nth(2), Some(""));
    let json = serde_json::to_string(&run.trace).unwrap();
    assert!(json.contains("\"records\""));
}

#[test]
fn sweep_csv_is_reproducible() {
    let cfg = SweepConfig { d: 5, k: 2, kappa: 2.0, ms: vec![200, 400], trials: 3, seed: 7 };
    let render = || {
        let mut out = Vec::new();
        write_sweep_csv(&operator_sweep(&cfg).unwrap(), &mut out).unwrap();
        out
    };
    let a = render();
    assert_eq!(a, render());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("m,d,k,seed,init_error,bx_error,by_error,gx_norm,gy_norm\n"));
    let ms: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ms, ["200", "200", "200", "400", "400", "400"]);
}
