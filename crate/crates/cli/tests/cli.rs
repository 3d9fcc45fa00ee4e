//! End-to-end checks of the command-line surface: exit codes, error paths,
//! record shapes.

use std::path::PathBuf;
use std::process::Output;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_fgadyn"))
        .args(args)
        .output()
        .expect("spawn fgadyn")
}

fn records(output: &Output) -> Vec<serde_json::Value> {
    String::from_utf8(output.stdout.clone())
        .expect("utf-8")
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect()
}

#[test]
fn check_valid_file_exits_zero() {
    let out = run(&["check", &fixture("tribonacci.auto")]);
    assert!(out.status.success());
    let recs = records(&out);
    assert_eq!(recs[0]["record"], "manifest");
    assert_eq!(recs[1]["record"], "check");
    assert_eq!(recs[1]["ia_mod3"], false);
    assert_eq!(recs[1]["valid"], true);
    assert_eq!(
        recs[1]["abelianization"],
        serde_json::json!([[1, 1, 0], [1, 0, 1], [1, 0, 0]])
    );
}

#[test]
fn check_identity_is_ia_mod3() {
    let dir = std::env::temp_dir().join("fgadyn-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("identity.auto");
    std::fs::write(&path, "rank 3\nlabel id\nimages a b c\ninverses a b c\n").unwrap();
    let out = run(&["check", path.to_str().unwrap()]);
    assert!(out.status.success());
    let recs = records(&out);
    assert_eq!(recs[1]["ia_mod3"], true);
}

#[test]
fn check_wrong_inverse_exits_nonzero() {
    let dir = std::env::temp_dir().join("fgadyn-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.auto");
    std::fs::write(&path, "rank 2\nimages ab b\ninverses a b\n").unwrap();
    let out = run(&["check", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("line 3") && stderr.contains("inverse"),
        "stderr was: {stderr}"
    );
}

#[test]
fn orbit_with_zero_iterations_echoes_seed() {
    let out = run(&[
        "orbit",
        &fixture("tribonacci.auto"),
        "--seed-class",
        "ab",
        "--iters",
        "0",
    ]);
    assert!(out.status.success());
    let recs = records(&out);
    let orbit = &recs[1];
    assert_eq!(orbit["record"], "orbit");
    assert_eq!(orbit["seed"], "ab");
    assert_eq!(orbit["steps"].as_array().unwrap().len(), 1);
    assert_eq!(orbit["steps"][0]["length"], 2);
    assert_eq!(orbit["verdict"]["kind"], "completed");
}

#[test]
fn scan_reports_shear_fixed_class() {
    let out = run(&[
        "scan",
        &fixture("shear.auto"),
        "--max-seed-len",
        "4",
        "--iters",
        "10",
    ]);
    assert!(out.status.success());
    let recs = records(&out);
    assert_eq!(recs[1]["verdict"]["outcome"], "periodic-class-found");
    assert_eq!(recs[1]["verdict"]["periodic_class"], "a");
    assert_eq!(recs[1]["verdict"]["period"], 1);
}

#[test]
fn gns_without_fixed_generator_class_fails() {
    // Tribonacci fixes no generator class, so the default marked generator
    // (the last one) is rejected.
    let out = run(&["gns", &fixture("tribonacci.auto"), "--iters", "4"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not fixed"), "stderr was: {stderr}");
}

#[test]
fn ns_on_non_atoroidal_map_fails() {
    let out = run(&["ns", &fixture("shear.auto"), "--iters", "4"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("not empirically atoroidal"),
        "stderr was: {stderr}"
    );
}

#[test]
fn power_knob_changes_the_map() {
    let out = run(&[
        "orbit",
        &fixture("tribonacci.auto"),
        "--seed-class",
        "a",
        "--iters",
        "1",
        "--power",
        "2",
    ]);
    assert!(out.status.success());
    let recs = records(&out);
    // φ²(a) = abac has length 4.
    assert_eq!(recs[1]["steps"][1]["length"], 4);
}

#[test]
fn strata_accepts_graph_definition_files() {
    let dir = std::env::temp_dir().join("fgadyn-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("wedge.graph");
    std::fs::write(
        &path,
        "rank 2\nvertices 2\nlabel push\n\
         edge a 0 1 tree\nedge b 0 0 mark=a\nedge c 1 1 mark=b\n\
         image a a\nimage b b\nimage c Abac\n\
         induced a a\ninduced b ab\ninverses a a\ninverses b Ab\n",
    )
    .unwrap();
    let out = run(&["strata", "--graph", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = records(&out);
    assert_eq!(recs[1]["record"], "strata");
    assert_eq!(recs[1]["rank"], 2);
}

#[test]
fn budget_env_var_caps_work() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_fgadyn"))
        .args([
            "scan",
            &fixture("tribonacci.auto"),
            "--max-seed-len",
            "5",
            "--iters",
            "20",
        ])
        .env("FGADYN_BUDGET", "10")
        .output()
        .expect("spawn fgadyn");
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("budget"), "stderr was: {stderr}");
}
