use std::process::Command;

fn pwaprox(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pwaprox")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn solve_prints_json_for_bundled_example() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/ex51.json");
    let (code, out, _) = pwaprox(&["solve", "--problem", data, "--N", "10", "--xi", "100", "--eps", "1e-8"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "converged");
    let obj = v["objective"].as_f64().unwrap();
    assert!((0.4189..=0.4225).contains(&obj), "{obj}");
}

#[test]
fn exit_codes() {
    assert_eq!(pwaprox(&["solve", "--problem", "/nonexistent.json"]).0, 3);
    assert_eq!(pwaprox(&["solve", "--xi", "0.1"]).0, 3);
    assert_eq!(pwaprox(&["solve", "--eps", "1e-14", "--max-iter", "3"]).0, 2);
    assert_eq!(pwaprox(&["no-such-command"]).0, 3);
}

#[test]
fn infeasible_parameter_exits_with_code_4() {
    // Shrink the second region to x1 <= -1 so that x1 = -0.5 lies in no region.
    let mut v: serde_json::Value = serde_json::from_str(include_str!("../data/ex51.json")).unwrap();
    let region = &mut v["regions"][0][1]["Cf"];
    assert_eq!(region["F"][0], serde_json::json!([1.0, 0.0, 0.0]));
    region["f"][0] = serde_json::json!(-1.0);
    let path = std::env::temp_dir().join(format!("pwaprox-gap-{}.json", std::process::id()));
    std::fs::write(&path, v.to_string()).unwrap();
    let (code, _, err) = pwaprox(&["solve", "--problem", path.to_str().unwrap(), "--N", "3", "--theta", "-0.5,0"]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(code, 4, "{err}");
}

#[test]
fn multistart_writes_files() {
    let dir = std::env::temp_dir().join(format!("pwaprox-ms-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let runs = dir.join("runs.csv");
    let hist = dir.join("hist.csv");
    let (code, out, _) = pwaprox(&[
        "multistart", "--N", "3", "--K", "8", "--xi", "20", "--eps", "1e-6",
        "--out", runs.to_str().unwrap(), "--hist", hist.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(summary["runs"], 8);
    let runs_text = std::fs::read_to_string(&runs).unwrap();
    assert!(runs_text.starts_with("run,status,iterations,objective,stationarity_residual,projection_residual,kkt_pass\n"));
    assert_eq!(runs_text.lines().count(), 9);
    assert!(std::fs::read_to_string(&hist).unwrap().starts_with("objective_lower,objective_upper,count,percent\n"));
    std::fs::remove_dir_all(dir).unwrap();
}
