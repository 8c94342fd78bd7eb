use einshift::io::{to_json, LiftDoc, MatrixDoc};
use einshift::lift::LiftedConformal;
use einshift::samples::{commuting_product, near_defective, sphere_rotation, time_rotation};
use einshift::Tolerances;
use serde_json::Value;
use std::f64::consts::TAU;
use std::io::Write;
use std::process::{Command, Output, Stdio};

fn run(args: &[&str], stdin: &str) -> Output {
    run_env(args, stdin, None)
}

fn run_env(args: &[&str], stdin: &str, config: Option<&std::path::Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_einshift"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    cmd.env_remove("EINSHIFT_CONFIG");
    if let Some(p) = config {
        cmd.env("EINSHIFT_CONFIG", p);
    }
    let mut child = cmd.spawn().expect("binary runs");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).expect("JSON line")).collect()
}

fn lift_json(l: &LiftedConformal) -> String {
    to_json(&LiftDoc::from_lift(l))
}

fn csv_t(out: &Output) -> Vec<f64> {
    String::from_utf8_lossy(&out.stdout).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn classify_examples() {
    let deck = run(&["example", "deck"], "");
    assert!(deck.status.success());
    let out = run(&["classify"], &String::from_utf8_lossy(&deck.stdout));
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out)[0];
    assert_eq!(v["kind"], "FutureEscaping");
    assert_eq!(v["agree"], true);
    assert_eq!(v["essential"], false);
    assert_eq!(v["certificate"]["type"], "escaping");
    assert!(v["budgets"]["j_max"].is_u64());

    let rot = LiftedConformal::lift(&sphere_rotation(2, 0.8), 0).unwrap();
    let v = &json_lines(&run(&["classify"], &lift_json(&rot)))[0];
    assert_eq!(v["kind"], "NonEscapingElliptic");
    assert_eq!(v["essential"], false);

    let ex = run(&["example", "nonsubgroup", "--n", "1"], "");
    let lines = json_lines(&run(&["classify"], &String::from_utf8_lossy(&ex.stdout)));
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["kind"], "NonEscapingFixedPoint");
    assert_eq!(lines[1]["kind"], "NonEscapingFixedPoint");
    assert_eq!(lines[2]["name"], "product");
    assert_eq!(lines[2]["kind"], "FutureEscaping");
}

#[test]
fn every_example_round_trips_through_classify() {
    for name in ["nonsubgroup", "deck", "homothety", "translation"] {
        let ex = run(&["example", name], "");
        assert!(ex.status.success(), "{name}");
        let out = run(&["classify"], &String::from_utf8_lossy(&ex.stdout));
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let h = json_lines(&run(&["classify"], &String::from_utf8_lossy(&run(&["example", "homothety"], "").stdout)));
    assert_eq!(h[0]["base_class"], "hyperbolic");
    assert_eq!(h[0]["kind"], "NonEscapingFixedPoint");
}

#[test]
fn schema_errors_exit_2() {
    assert_eq!(run(&["classify"], "{\"base\": 1}").status.code(), Some(2));
    assert_eq!(run(&["classify"], "not json").status.code(), Some(2));
    assert_eq!(run(&["decompose"], "{\"n\":2,\"matrix\":[[1]]}").status.code(), Some(2));
    assert_eq!(run(&["example", "spiral"], "").status.code(), Some(2));
    assert_eq!(run(&["verify", "everything"], "").status.code(), Some(2));
    assert_eq!(run(&["random", "--count", "0"], "").status.code(), Some(2));
}

#[test]
fn decompose_examples() {
    let id = MatrixDoc::from_element(&einshift::linalg::GroupElement::identity(einshift::linalg::QuadraticSpace::diagonal(2)));
    let v = &json_lines(&run(&["decompose"], &to_json(&id)))[0];
    for f in ["elliptic", "hyperbolic", "parabolic"] {
        let m = &v[f]["matrix"]["matrix"];
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m[i][j].as_f64().unwrap() - want).abs() < 1e-14);
            }
        }
    }

    let c = commuting_product(2, 4).unwrap();
    let out = run(&["decompose"], &to_json(&MatrixDoc::from_element(&c.product)));
    assert!(out.status.success());
    let v = &json_lines(&out)[0];
    assert!(v["reconstruction_residual"].as_f64().unwrap() <= 1e-8 * c.product.mat().norm());
    for (f, want) in [("elliptic", &c.elliptic), ("hyperbolic", &c.hyperbolic), ("parabolic", &c.parabolic)] {
        let rows = v[f]["matrix"]["matrix"].as_array().unwrap();
        let mut err: f64 = 0.0;
        for (i, row) in rows.iter().enumerate() {
            for (j, x) in row.as_array().unwrap().iter().enumerate() {
                err = err.max((x.as_f64().unwrap() - want.mat()[(i, j)]).abs());
            }
        }
        assert!(err < 1e-6, "{f}: {err}");
    }

    let nd = near_defective(2, &Tolerances::default());
    let out = run(&["decompose"], &to_json(&MatrixDoc::from_element(&nd)));
    assert_eq!(out.status.code(), Some(0));
    assert!(!json_lines(&out)[0]["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn orbit_examples() {
    let deck = String::from_utf8_lossy(&run(&["example", "deck"], "").stdout).to_string();
    let out = run(&["orbit", "--k-max", "5"], &deck);
    let ts = csv_t(&out);
    assert_eq!(ts.len(), 6);
    for (k, t) in ts.iter().enumerate() {
        assert!((t - TAU * k as f64).abs() < 1e-9);
    }
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("k,t,z0,z1,z2\n"));

    let rot = LiftedConformal::lift(&time_rotation(2, 0.1), 0).unwrap();
    let ts = csv_t(&run(&["orbit", "--k-max", "100", "--point", "{\"t\":0.0,\"z\":[0.0,0.6,0.8]}"], &lift_json(&rot)));
    assert_eq!(ts.len(), 101);
    for (k, t) in ts.iter().enumerate() {
        assert!((t - 0.1 * k as f64).abs() < 1e-9);
    }

    let h = String::from_utf8_lossy(&run(&["example", "homothety"], "").stdout).to_string();
    let out = run(&["orbit", "--k-max", "20", "--point", "{\"t\":0.0,\"z\":[1.0,0.0,0.0]}"], &h);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    for r in &rows {
        let vals: Vec<f64> = r.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        let first: Vec<f64> = rows[0].split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!(vals.iter().zip(&first).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

#[test]
fn random_examples() {
    let out = run(&["random", "--count", "1", "--scale", "0", "--deck-power", "1", "--summary-only"], "");
    let s = &json_lines(&out)[0]["summary"];
    assert_eq!(s["kinds"]["FutureEscaping"], 1);

    let out = run(&["random", "--count", "50", "--scale", "1e-8", "--deck-power", "0", "--summary-only"], "");
    let s = &json_lines(&out)[0]["summary"];
    let non_escaping = s["kinds"]["NonEscapingElliptic"].as_u64().unwrap_or(0) + s["kinds"]["NonEscapingFixedPoint"].as_u64().unwrap_or(0);
    assert!(non_escaping >= 40, "{s}");

    let out = run(&["random", "--count", "40", "--seed", "7"], "");
    assert!(out.status.success());
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 41);
    let s = &lines[40]["summary"];
    assert_eq!(s["agreement_rate"].as_f64().unwrap(), 1.0);
    assert_eq!(s["mixed_verdicts"], 0);
}

#[test]
fn verify_examples() {
    let out = run(&["verify", "causal"], "");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_lines(&out)[0]["pass"], true);

    let out = run(&["verify", "dichotomy", "--k-max", "4", "--n", "1"], "");
    let v = &json_lines(&out)[0];
    let props = v["properties"].as_array().unwrap();
    let fc = props.iter().find(|p| p["name"] == "no_false_certifications").unwrap();
    assert_eq!(fc["failures"], 0);
    assert!(fc["detail"]["indeterminate"].is_u64());
}

#[test]
fn output_is_deterministic_and_can_go_to_a_file() {
    let a = run(&["random", "--count", "6", "--seed", "3", "--n", "1"], "");
    let b = run(&["random", "--count", "6", "--seed", "3", "--n", "1"], "");
    assert_eq!(a.stdout, b.stdout);
    let path = std::env::temp_dir().join(format!("einshift-out-{}.json", std::process::id()));
    let out = run(&["example", "deck", "--out", path.to_str().unwrap()], "");
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(text.as_bytes(), run(&["example", "deck"], "").stdout.as_slice());
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let path = std::env::temp_dir().join(format!("einshift-cfg-{}.toml", std::process::id()));
    std::fs::write(&path, "n = 1\nj-max = 32\n").unwrap();
    let v = &json_lines(&run_env(&["example", "deck"], "", Some(&path)))[0];
    assert_eq!(v["lift"]["base"]["n"], 1);
    let v = &json_lines(&run_env(&["example", "deck", "--n", "3"], "", Some(&path)))[0];
    assert_eq!(v["lift"]["base"]["n"], 3);
    std::fs::write(&path, "colour = 1\n").unwrap();
    assert_eq!(run_env(&["example", "deck"], "", Some(&path)).status.code(), Some(2));
    std::fs::remove_file(&path).ok();
}
