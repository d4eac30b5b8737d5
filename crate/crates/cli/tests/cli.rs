use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
function = "exp2"
k_max = 8
seed = 3
ladder = [
  { format = "fp(10,4)", terms = 1 },
  { format = "fp(12,4)", terms = 1 },
]
"#;

fn progpoly(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progpoly")).args(args).current_dir(dir).output().expect("run progpoly")
}

fn generated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), CONFIG).unwrap();
    let o = progpoly(&["gen", "small.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn gen_writes_artifact_and_report() {
    let dir = generated();
    let out = dir.path().join("out");
    let artifact: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("exp2.json")).unwrap()).unwrap();
    assert_eq!(artifact["function"], "exp2");
    assert_eq!(artifact["ladder"].as_array().unwrap().len(), 2);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("exp2.report.json")).unwrap()).unwrap();
    assert!(report["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn gen_is_deterministic() {
    let dir = generated();
    let o = progpoly(&["gen", "small.toml", "--out", "again"], dir.path());
    assert!(o.status.success());
    let a = std::fs::read(dir.path().join("out/exp2.json")).unwrap();
    let b = std::fs::read(dir.path().join("again/exp2.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn check_and_sweep_pass_with_json_reports() {
    let dir = generated();
    let o = progpoly(&["check", "out/exp2.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["pass"], true);

    let o = progpoly(&["check", "out/exp2.json", "--fmt", "fp(10,4)", "--modes", "rn,ra,rz,ru,rd"], dir.path());
    assert!(o.status.success());
    assert_eq!(json(&o)["entries"].as_array().unwrap().len(), 5);

    let o = progpoly(&["sweep", "out/exp2.json", "--json", "sweep.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn export_emits_source() {
    let dir = generated();
    let o = progpoly(&["export", "out/exp2.json", "--out", "src", "--emit-source"], dir.path());
    assert!(o.status.success());
    let c = std::fs::read_to_string(dir.path().join("src/exp2.c")).unwrap();
    assert!(c.contains("FP_CONTRACT OFF"));
    assert!(c.contains("exp2_coeffs"));
}

#[test]
fn eval_reads_hex_encodings() {
    let dir = generated();
    // 1.0 in fp(10,4) is 0x0e0 and exp2(1) = 2 is 0x100
    let o = progpoly(&["eval", "out/exp2.json", "--fmt", "fp(10,4)", "0xe0", "0"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parse = |s: &str| u64::from_str_radix(s.trim_start_matches("0x"), 16).unwrap();
    let pairs: Vec<(u64, u64)> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            (parse(a), parse(b))
        })
        .collect();
    assert_eq!(pairs, [(0xe0, 0x100), (0, 0xe0)]);

    let o = progpoly(&["eval", "out/exp2.json", "--fmt", "fp(10,4)", "0x400"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tampered_artifact_is_an_error() {
    let dir = generated();
    let path = dir.path().join("out/exp2.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"terms\":", "\"terms\":1");
    std::fs::write(&path, text).unwrap();
    let o = progpoly(&["check", "out/exp2.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_convergence_small_spec() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.toml"), "ks = [3]\nns = [1000]\nseeds = 4\n").unwrap();
    let o = progpoly(&["bench-convergence", "spec.toml"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats = json(&o);
    assert_eq!(stats[0]["successes"], 4);
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "function = \"exp2\"\nk_max = 8\nladder = []\nbogus = 1\n").unwrap();
    let o = progpoly(&["gen", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
