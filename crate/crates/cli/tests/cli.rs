use std::path::Path;
use std::process::{Command, Output};

use gasket::address::{apex_vertex, PairIndex};
use gasket::scalar::{Rational, Scalar};
use gasket::traceops::restrict;
use gasket::TentFunction;
use serde_json::{json, Value};

fn gasket(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasket"))
        .args(args)
        .current_dir(dir)
        .env_remove("GASKET_MAX_LEVEL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_line(dir: &Path, name: &str, level: usize, values: &[String]) -> String {
    let doc = json!({ "format": 1, "level": level, "values": values });
    std::fs::write(dir.join(name), doc.to_string()).unwrap();
    name.to_string()
}

fn tent_half_trace(level: usize) -> Vec<String> {
    let u = TentFunction::new(apex_vertex(PairIndex::new(1, 1).unwrap())).on_level::<Rational>(level).unwrap();
    restrict(&u).unwrap().samples().iter().map(|v| v.encode()).collect()
}

#[test]
fn harmonic_trace_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["harmonic", "-a", "1", "-b", "0", "-c", "0", "-m", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = "x,value\n0,0\n1/4,4/25\n1/2,1/5\n3/4,4/25\n1,0\n";
    assert_eq!(stdout(&o), expected);
    assert_eq!(std::fs::read_to_string(dir.path().join("harmonic_trace.csv")).unwrap(), expected);
    let g = read(&dir.path().join("harmonic.json"));
    assert_eq!(g["format"], 1);
    assert_eq!(g["mode"], "exact");
    assert_eq!(g["values"][":0"], "1");
    assert_eq!(g["values"].as_object().unwrap().len(), 15);
}

#[test]
fn constant_harmonic_has_constant_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["harmonic", "-a", "1", "-b", "1", "-c", "1", "-m", "3"], dir.path());
    assert!(o.status.success());
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",1")), "{rows:?}");
}

#[test]
fn float_mode_follows_decimal_entries() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["harmonic", "-a", "1.0", "-b", "0", "-c", "0", "-m", "1"], dir.path());
    assert!(o.status.success());
    assert_eq!(read(&dir.path().join("harmonic.json"))["mode"], "float");
    assert!(stdout(&o).contains("0.5,0.2"), "{}", stdout(&o));
}

#[test]
fn malformed_triple_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["harmonic", "-a", "one", "-b", "0", "-c", "0", "-m", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("one"), "{}", stderr(&o));
    let o = gasket(&["harmonic", "-a", "1/0", "-b", "0", "-c", "0", "-m", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = gasket(&["harmonic", "-a", "1", "-b", "0", "-m", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn level_cap_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["harmonic", "-a", "1", "-b", "0", "-c", "0", "-m", "13"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_gasket"))
        .args(["harmonic", "-a", "1", "-b", "0", "-c", "0", "-m", "3"])
        .current_dir(dir.path())
        .env("GASKET_MAX_LEVEL", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_gasket"))
        .arg("constants")
        .env("GASKET_MAX_LEVEL", "deep")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn harmonic_trace_norm_is_l2_only() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gasket(&["harmonic", "-a", "1", "-b", "0", "-c", "0", "-m", "8"], dir.path()).status.success());
    let o = gasket(&["trace-norm", "harmonic_trace.json", "--space", "t:2", "--svg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let bundle = read(&dir.path().join("norm.json"));
    assert_eq!(bundle["format"], 1);
    let r = &bundle["reports"][0];
    let (value, base) = (r["value"].as_f64().unwrap(), r["base"].as_f64().unwrap());
    assert!(base > 0.0);
    assert!((value * value - base).abs() <= 1e-12 * base, "value {value}, base {base}");
    assert!(r["terms"].as_array().unwrap().iter().all(|t| t.as_f64() == Some(0.0)));
    assert!(dir.path().join("norm_t_2.csv").exists());
    assert!(std::fs::read_to_string(dir.path().join("norm_t_2.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn besov_out_of_range_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_line(dir.path(), "f.json", 1, &["0".into(), "1".into(), "0".into()]);
    let o = gasket(&["trace-norm", &f, "--space", "besov:0.4"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("(1/2, 1)") || stderr(&o).contains("1/2"), "{}", stderr(&o));
    let o = gasket(&["trace-norm", "missing.json", "--space", "ttilde:0.5"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = gasket(&["trace-norm", &f, "--space", "sobolev:1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tinf_on_tent_trace_grows() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_line(dir.path(), "tent.json", 9, &tent_half_trace(9));
    let o = gasket(&["trace-norm", &f, "--space", "tinf"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &read(&dir.path().join("norm.json"))["reports"][0];
    let terms: Vec<f64> = r["terms"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).collect();
    assert!(terms.len() >= 6);
    let tail = &terms[1..];
    assert!(tail.windows(2).all(|w| w[1] > w[0]), "{terms:?}");
}

#[test]
fn bad_line_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_line(dir.path(), "short.json", 2, &["0".into(), "1".into()]);
    assert_eq!(gasket(&["trace-norm", &f, "--space", "tinf"], dir.path()).status.code(), Some(4));
    std::fs::write(dir.path().join("broken.json"), "{\"format\": 1, ").unwrap();
    assert_eq!(gasket(&["trace-norm", "broken.json", "--space", "tinf"], dir.path()).status.code(), Some(2));
    assert_eq!(gasket(&["trace-norm", "missing.json", "--space", "tinf"], dir.path()).status.code(), Some(4));
}

#[test]
fn tilde_extension_of_harmonic_trace_restricts_exactly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gasket(&["harmonic", "-a", "2/3", "-b", "-1", "-c", "5", "-m", "5"], dir.path()).status.success());
    let o = gasket(&["extend", "harmonic_trace.json", "--map", "tilde", "-m", "7"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("exact match"), "{}", stdout(&o));
    let doc = read(&dir.path().join("extension.json"));
    let v = &doc["verification"];
    assert_eq!(v["max_restriction_error"], "0");
    assert_eq!(v["restriction_matches"], true);
    assert_eq!(doc["level"], 7);
    // The extension is the harmonic function itself.
    let h = read(&dir.path().join("harmonic.json"));
    for (k, x) in h["values"].as_object().unwrap() {
        assert_eq!(&doc["values"][k], x, "vertex {k}");
    }
}

#[test]
fn full_extension_of_tent_trace_carries_corrector_layers() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_line(dir.path(), "tent.json", 4, &tent_half_trace(4));
    let o = gasket(&["extend", &f, "--map", "full", "-m", "6"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = &read(&dir.path().join("extension.json"))["verification"];
    assert_eq!(v["restriction_matches"], true);
    assert!(!v["corrector_cells"].as_array().unwrap().is_empty());
    assert!(v["corrected_cells"].as_u64().unwrap() > 0);
    let o = gasket(&["extend", &f, "--map", "partial:2", "-m", "6", "--out", "p"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&dir.path().join("p/extension.json"))["verification"]["map"], "partial:2");
}

#[test]
fn extension_needs_the_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_line(dir.path(), "flat.json", 0, &["0".into(), "1".into()]);
    let o = gasket(&["extend", &f, "--map", "tilde", "-m", "3"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    let g = write_line(dir.path(), "g.json", 2, &tent_half_trace(2));
    assert_eq!(gasket(&["extend", &g, "--map", "sideways", "-m", "3"], dir.path()).status.code(), Some(2));
}

#[test]
fn restrict_round_trips_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gasket(&["harmonic", "-a", "1", "-b", "0", "-c", "0", "-m", "2"], dir.path()).status.success());
    let o = gasket(&["restrict", "harmonic.json", "--out", "r"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&dir.path().join("r/trace.json")), read(&dir.path().join("harmonic_trace.json")));
}

#[test]
fn verify_recursion_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["verify", "recursion", "--out", "bundle"], dir.path());
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let summary = read(&dir.path().join("bundle/summary.json"));
    assert_eq!(summary["format"], 1);
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["experiments"][0]["id"], "recursion");
    let r = read(&dir.path().join("bundle/recursion.json"));
    assert_eq!(r["format"], 1);
    assert_eq!(r["pass"], true);
}

#[test]
fn verify_b2_reproduces_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasket(&["verify", "b2", "--out", "bundle", "--svg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read(&dir.path().join("bundle/b2.json"));
    let b2 = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "b2").unwrap()["measured"].as_f64().unwrap();
    assert!((b2 - 1.09991).abs() <= 1e-4, "{b2}");
    let names: Vec<String> = std::fs::read_dir(dir.path().join("bundle"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with(".csv")), "{names:?}");
    assert!(names.iter().any(|n| n.ends_with(".svg")), "{names:?}");
}

#[test]
fn verify_rejects_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gasket(&["verify", "nonsense"], dir.path()).status.code(), Some(2));
    assert_eq!(gasket(&["verify", "recursion", "--max-level", "40"], dir.path()).status.code(), Some(3));
}

#[test]
fn constants_table() {
    let o = gasket(&["constants"], Path::new("."));
    assert!(o.status.success());
    let out = stdout(&o);
    let row = |name: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("no row {name}: {out}"));
        let v = line.split_whitespace().last().unwrap();
        assert_eq!(v.split('.').nth(1).unwrap().len(), 12, "{line}");
        v.parse().unwrap()
    };
    assert!((row("b1 ") - 3f64.ln() / 5f64.ln()).abs() < 1e-12);
    assert!((row("2 - log3/log5") - 1.317394).abs() < 1e-6);
    assert!((row("lambda+") - (17.0 + 73f64.sqrt()) / 50.0).abs() < 1e-12);
    assert!((row("b2 ") - 1.09991).abs() < 1e-5);
}
