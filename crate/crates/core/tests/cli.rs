use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_nlhom");

const PLANE: &str = "[domain]\ndim = 2\n\n[kernel]\nshape = \"ball\"\nradius = 1.0\n\n[run]\nkind = \"hhom-cell\"\n";

const HOLE: &str = "[domain]\ndim = 2\nholes = [{ shape = \"box\", lo = [0.25, 0.25], hi = [0.75, 0.75] }]\n\n\
                    [kernel]\nshape = \"ball\"\nradius = 0.25\n\n";

fn nlhom(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn plane_cell_value_is_quarter_pi() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "plane.toml", PLANE);
    let out = tmp.path().join("out");
    let o = nlhom(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("hhom.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("xi1,xi2,p,n,value,grad_norm,iters"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3], "64");
    let value: f64 = row[4].parse().unwrap();
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    assert!((value - quarter_pi).abs() < 0.01 * quarter_pi, "{value}");
    assert!(!csv.contains('\r'));
    for name in ["manifest.json", "summary.txt", "corrector_0.nlh1"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for key in ["k = 4", "C_tilde", "k0", "h_hom(xi = [1, 0])", "grad_norm"] {
        assert!(summary.contains(key), "{key} not in summary");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["kind"], "hhom-cell");
    assert_eq!(manifest["config"]["n"], 64);
    assert!(manifest["modules"]["extension"].is_string());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{HOLE}[run]\nkind = \"extension-constants\"\nn = 8\nomega = [12.0, 12.0]\neps = [0.25, 0.125]\nfields = 2\nseed = 5\n");
    let cfg = write(&tmp, "ext.toml", &text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(nlhom(&["run", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(nlhom(&["run", &cfg, "--out", b.to_str().unwrap(), "--threads", "1"]).status.success());
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
    let header = String::from_utf8(fa.iter().find(|f| f.0 == "estimates.csv").unwrap().1.clone()).unwrap();
    assert!(header.starts_with("eps,r,c1_hat,c2_hat,R,k0\n"));
}

#[test]
fn seed_changes_the_corpus() {
    let tmp = TempDir::new().unwrap();
    let run = |seed: u64, dir: &str| {
        let text = format!("{HOLE}[run]\nkind = \"poincare-suite\"\nn = 16\ncases = 6\nseed = {seed}\n");
        let cfg = write(&tmp, &format!("{dir}.toml"), &text);
        let out = tmp.path().join(dir);
        assert!(nlhom(&["run", &cfg, "--out", out.to_str().unwrap()]).status.success());
        fs::read_to_string(out.join("poincare.csv")).unwrap()
    };
    let (a, b) = (run(1, "s1"), run(2, "s2"));
    assert_ne!(a, b);
    assert!(a.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn large_eps_names_the_bound() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "g.toml", &format!("{HOLE}[run]\nkind = \"gamma-sweep\"\nn = 16\nomega = [2.0, 2.0]\n"));
    let o = nlhom(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("eps*k0"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "bad.toml", &PLANE.replace("kind = \"hhom-cell\"", "kind = \"hhom-cell\"\np = 0.5\nwidth = 3"));
    let o = nlhom(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("p must exceed 1") && err.contains("unknown key run.width"), "{err}");

    let dup = write(&tmp, "dup.toml", &format!("{PLANE}[kernel]\nshape = \"ball\"\n"));
    let o = nlhom(&["run", &dup]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duplicate section [kernel]"));

    let ok = write(&tmp, "ok.toml", PLANE);
    let o = nlhom(&["validate", &ok]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("n = 64"));
}

#[test]
fn geometry_errors_exit_three() {
    let tmp = TempDir::new().unwrap();
    let slabs = "[domain]\ndim = 2\nholes = [{ shape = \"box\", lo = [0.0, 0.2], hi = [1.0, 0.4] }, { shape = \"box\", lo = [0.0, 0.6], hi = [1.0, 0.8] }]\n\
                 [kernel]\nshape = \"ball\"\n[run]\nkind = \"hhom-cell\"\nn = 16\n";
    let cfg = write(&tmp, "slabs.toml", slabs);
    let o = nlhom(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("not periodically connected"), "{}", stderr(&o));
}

#[test]
fn io_errors_exit_five() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(nlhom(&["validate", missing.to_str().unwrap()]).status.code(), Some(5));
    let junk = write(&tmp, "junk.nlh1", "not a dump");
    assert_eq!(nlhom(&["dump-field", &junk]).status.code(), Some(5));
}

#[test]
fn dump_field_prints_header_and_stats() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "path.toml", &format!("{HOLE}[run]\nkind = \"path-suite\"\nn = 16\npairs = 20\n"));
    let out = tmp.path().join("o");
    let o = nlhom(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nlhom(&["dump-field", out.join("component.nlh1").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("magic = NLH1"));
    assert!(text.contains("dims = [64, 64]"));
    // 4Q ∩ E at 16 cells per unit: 16 · 192 cells
    assert!(text.contains("masked = 3072"), "{text}");
    assert!(text.contains("nodes = 4096"));
    let paths = fs::read_to_string(out.join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 21);
}
