mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use deltaconv::cli::load_operator_set;
use deltaconv::io::{read_field_csv, write_field_csv};
use deltaconv::{deltaconv_forward, input_vector_features, Features, Field, ScalarField};

fn deltaconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltaconv")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn sample(dir: &Path, surface: &str, n: usize) -> String {
    let path = dir.join(format!("{surface}.xyz"));
    let p = path.to_str().unwrap().to_owned();
    let out = deltaconv(&["sample", "--surface", surface, "--n", &n.to_string(), "--seed", "3", "--out", &p]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn build(input: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["build", "--input", input, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    deltaconv(&args)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_writes_operators_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "sphere", 300);
    let out = dir.path().join("ops");
    let res = build(&input, &out, &[]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for name in deltaconv::OperatorSet::NAMES {
        let text = std::fs::read_to_string(out.join(format!("{name}.mtx"))).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n"));
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["k"], 20);
    assert_eq!(meta["lambda"], 0.01);
    assert_eq!(meta["n"], 300);
    assert_eq!(meta["normals"], "estimate");
    assert_eq!(meta["input_sha256"].as_str().unwrap().len(), 64);
    let ops = load_operator_set(&out).unwrap();
    assert!((ops.g_hat.linf_norm() - 1.0).abs() < 1e-12);
    assert_eq!(ops.g_hat.linf_norm(), ops.g.scaled(1.0 / meta["grad_norm"].as_f64().unwrap()).linf_norm());
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "torus", 400);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&build(&input, &a, &["--normals", "file"])), 0);
    assert_eq!(code(&build(&input, &b, &["--normals", "file"])), 0);
    for name in deltaconv::OperatorSet::NAMES.iter().map(|n| format!("{n}.mtx")).chain(["meta.json".into(), "knn.txt".into()]) {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let nan = dir.path().join("nan.xyz");
    std::fs::write(&nan, "0 0 0\n1 0 0\nnan 1 0\n0 1 0\n1 1 0\n").unwrap();
    assert_eq!(code(&build(s(&nan), &dir.path().join("o"), &["--k", "2"])), 2);
    assert_eq!(code(&build(s(&dir.path().join("missing.xyz")), &dir.path().join("o"), &[])), 2);
    let input = sample(dir.path(), "plane", 50);
    assert_eq!(code(&build(&input, &dir.path().join("o"), &["--k", "50"])), 2);
    assert_eq!(code(&build(&input, &dir.path().join("o"), &["--lambda", "-1"])), 2);
    assert_eq!(code(&build(&input, &dir.path().join("o"), &["--normals", "exact"])), 2);
    assert_eq!(code(&deltaconv(&["validate", "--surface", "klein"])), 2);
    assert_eq!(code(&deltaconv(&["frobnicate"])), 2);
}

#[test]
fn collinear_cloud_without_regularization_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let line = dir.path().join("line.xyz");
    let text: String = (0..30).map(|i| format!("{} 0 0 0 0 1\n", i as f64 * 0.1)).collect();
    std::fs::write(&line, text).unwrap();
    let res = build(s(&line), &dir.path().join("o"), &["--normals", "file", "--lambda", "0", "--k", "8"]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn validate_plane_passes() {
    let dir = tempfile::tempdir().unwrap();
    let res = deltaconv(&["validate", "--surface", "plane", "--sizes", "200,400", "--out", s(dir.path())]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("PASS plane"));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn validate_failure_exits_1() {
    // Too few points for the sphere thresholds.
    let res = deltaconv(&["validate", "--surface", "sphere", "--sizes", "60,70", "--k", "20"]);
    assert_eq!(code(&res), 1, "{}", String::from_utf8_lossy(&res.stdout));
    assert!(String::from_utf8_lossy(&res.stderr).contains("FAIL"));
}

#[test]
fn apply_and_diffuse() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "sphere", 300);
    let ops_dir = dir.path().join("ops");
    assert_eq!(code(&build(&input, &ops_dir, &[])), 0);
    let ops = load_operator_set(&ops_dir).unwrap();

    let ones = dir.path().join("ones.csv");
    write_field_csv(&ones, &Field::Scalar(ScalarField(Features::from_fn(300, 2, |_, _| 1.0)))).unwrap();
    let grad = dir.path().join("grad.csv");
    let res = deltaconv(&["apply", "--input", s(&ops_dir), "--op", "G", "--field", s(&ones), "--out", s(&grad)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let Field::Vector(g) = read_field_csv(&grad).unwrap() else { panic!("expected vectors") };
    assert!(g.0.max_abs() < 1e-9);

    let x = random_features(300, 1, 4);
    let field = dir.path().join("x.csv");
    write_field_csv(&field, &Field::Scalar(ScalarField(x.clone()))).unwrap();
    let lb = dir.path().join("lb.csv");
    let res = deltaconv(&["apply", "--input", s(&ops_dir), "--op", "lb", "--field", s(&field), "--out", s(&lb)]);
    assert_eq!(code(&res), 0);
    assert_eq!(read_field_csv(&lb).unwrap().features(), &ops.laplace_beltrami.apply(&x).unwrap());
    let res = deltaconv(&["apply", "--input", s(&ops_dir), "--op", "D", "--field", s(&field), "--out", s(&lb)]);
    assert_eq!(code(&res), 2);
    let res = deltaconv(&["apply", "--input", s(&ops_dir), "--op", "grad", "--field", s(&field), "--out", s(&lb)]);
    assert_eq!(code(&res), 2);

    let heat = dir.path().join("heat.csv");
    let res = deltaconv(&[
        "diffuse", "--input", s(&ops_dir), "--field", s(&field), "--out", s(&heat), "--kappa", "1e9", "--steps", "1",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let dg = ops.d.apply(&ops.g.apply(&x).unwrap()).unwrap();
    let expect: Vec<f64> = x.as_slice().iter().zip(dg.as_slice()).map(|(a, b)| a + 0.05 * b).collect();
    assert!(rel_diff(read_field_csv(&heat).unwrap().features().as_slice(), &expect) < 1e-12);
}

#[test]
fn forward_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "sphere", 200);
    let ops_dir = dir.path().join("ops");
    assert_eq!(code(&build(&input, &ops_dir, &["--k", "12"])), 0);
    let ops = load_operator_set(&ops_dir).unwrap();

    let x = ScalarField(random_features(200, 3, 5));
    let field = dir.path().join("x.csv");
    write_field_csv(&field, &Field::Scalar(x.clone())).unwrap();
    let params = random_params(3, 3, 4, 2, 6);
    let weights = dir.path().join("params.json");
    std::fs::write(&weights, params.to_json()).unwrap();
    let out = dir.path().join("fwd");
    let res = deltaconv(&[
        "forward", "--input", s(&ops_dir), "--field", s(&field), "--weights", s(&weights), "--out", s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let cloud = deltaconv::PointCloud::new(
        deltaconv::io::read_point_cloud(Path::new(&input)).unwrap().positions,
    )
    .unwrap();
    let graph = deltaconv::build_knn_graph(&cloud, 12).unwrap();
    let v = input_vector_features(&x, &ops).unwrap();
    let (xs, vs) = deltaconv_forward(&x, &v, &ops, &graph, &params).unwrap();
    assert_eq!(read_field_csv(&out.join("scalar.csv")).unwrap(), Field::Scalar(xs));
    assert_eq!(read_field_csv(&out.join("vector.csv")).unwrap(), Field::Vector(vs));

    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, random_params(2, 2, 4, 2, 6).to_json()).unwrap();
    let res = deltaconv(&[
        "forward", "--input", s(&ops_dir), "--field", s(&field), "--weights", s(&wrong), "--out", s(&out),
    ]);
    assert_eq!(code(&res), 2);
}
