use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn run(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rigidity"))
        .args(args)
        .env("RIGIDITY_THREADS", "2")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or_default()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn temp(name: &str, bytes: &[u8]) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rigidity-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, bytes).unwrap();
    path
}

#[test]
fn constants_for_one_dimension() {
    let out = run(&["constants", "1", "2"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["b1"], 3.0);
    assert_eq!(v["b2"], 3.0);
}

#[test]
fn grid_covering() {
    for extra in [&[][..], &["--implicit"][..]] {
        let mut args = vec!["gen", "grid", "--n", "2", "--s", "0.2", "--h", "0.02"];
        args.extend_from_slice(extra);
        let grid = run(&args, None);
        assert_eq!(grid.status.code(), Some(0));
        let out = run(&["cover", "--eps", "0.01"], Some(&grid.stdout));
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(json(&out)["covering_number"], 400);
    }
}

#[test]
fn sparse_random_points_have_no_certificate() {
    let pts = run(&["gen", "random", "--n", "2", "--count", "10", "--seed", "11"], None);
    let out = run(&["certify", "--d", "1", "--z0-samples", "4"], Some(&pts.stdout));
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["outcome"], "no_certificate");
    assert_eq!(v["bottleneck"], "zeta_d = 0");
}

#[test]
fn malformed_input_is_a_structured_error() {
    for input in [&b"{not json"[..], b"{\"n\": 2}", b""] {
        let out = run(&["cover", "--eps", "0.01"], Some(input));
        assert_eq!(out.status.code(), Some(1));
        let v = json(&out);
        assert_eq!(v["error"]["kind"], "malformed_input");
        assert!(v["error"]["message"].as_str().unwrap().len() > 0);
    }
    let out = run(&["cover", "--eps", "0.5"], Some(&run(&["gen", "cantor", "--level", "3"], None).stdout));
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"]["kind"].is_string());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["gen", "hdense", "--n", "2", "--s", "0.2", "--h", "0.05", "--perturbation", "0.005", "--seed", "4"],
        &["gen", "random", "--n", "3", "--count", "50", "--seed", "9"],
        &["constants", "2", "3"],
        &["gen", "cantor", "--level", "6"],
    ];
    for args in cases {
        let a = run(args, None);
        let b = run(args, None);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
    let pts = run(&["gen", "random", "--n", "2", "--count", "40", "--seed", "3"], None).stdout;
    for args in [&["zeta", "--d", "1"][..], &["dim"], &["certify", "--seed", "5"], &["remez", "--resolution", "16"]] {
        assert_eq!(run(args, Some(&pts)).stdout, run(args, Some(&pts)).stdout, "{args:?}");
    }
}

#[test]
fn artifacts_round_trip() {
    // Point sets feed every consumer, explicit and implicit.
    let explicit = run(&["gen", "grid", "--n", "2", "--s", "0.2", "--h", "0.02"], None).stdout;
    let path = temp("grid.json", &explicit);
    let path = path.to_str().unwrap();
    let zeta = run(&["zeta", "-i", path, "--ladder", "0.1,0.05,0.02"], None);
    assert_eq!(zeta.status.code(), Some(0));
    assert_eq!(json(&zeta)["entries"].as_array().unwrap().len(), 3);
    assert_eq!(run(&["dim", "-i", path], None).status.code(), Some(0));
    assert_eq!(run(&["remez", "-i", path, "--resolution", "12", "--domain", "cube"], None).status.code(), Some(0));

    // findline output feeds curve, as JSON and as CSV.
    let fl = run(
        &["findline", "-i", path, "--z0", "1,0", "--eps", "0.003", "--target", "5", "--d", "1", "--kappa", "0.05"],
        None,
    );
    assert_eq!(fl.status.code(), Some(0));
    let v = json(&fl);
    assert_eq!(v["search"]["reached"], true);
    let curve = run(&["curve"], Some(&fl.stdout));
    assert_eq!(curve.status.code(), Some(0));
    let c = json(&curve);
    assert!(c["nu_d"].as_f64().unwrap() >= 0.0);
    // The bare certificate is accepted too.
    let bare = serde_json::to_vec(&v["certificate"]).unwrap();
    assert_eq!(run(&["curve"], Some(&bare)).stdout, curve.stdout);
    let csv = run(&["curve", "--csv", "--samples", "11"], Some(&fl.stdout));
    let text = String::from_utf8(csv.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0], "eta,x0,x1,norm_d1,norm_d2");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5 && l.split(',').all(|x| x.parse::<f64>().is_ok())));

    // A certificate replays against the set it was issued for.
    let dense = run(&["gen", "grid", "--n", "2", "--s", "0.2", "--h", "2e-11", "--implicit"], None).stdout;
    let dense_path = temp("dense.json", &dense);
    let cert = run(&["certify", "-i", dense_path.to_str().unwrap(), "--z0-samples", "2"], None);
    assert_eq!(cert.status.code(), Some(0));
    let cv = json(&cert);
    assert_eq!(cv["outcome"], "certificate");
    let cert_path = temp("cert.json", &cert.stdout);
    let verify = run(&["certify", "-i", dense_path.to_str().unwrap(), "--verify", cert_path.to_str().unwrap()], None);
    assert_eq!(verify.status.code(), Some(0));
    let vv = json(&verify);
    assert_eq!(vv["verified"], true);
    assert_eq!(vv["bound"], cv["bound"]);
}

#[test]
fn output_flag_writes_a_file() {
    let dir = std::env::temp_dir().join(format!("rigidity-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("c.json");
    let out = run(&["constants", "2", "1", "--output", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((v["c4"].as_f64().unwrap() - 0.05).abs() < 1e-12);
}
