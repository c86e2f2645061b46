use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qedhf::model::{build_hubbard_holstein, Boundary, LatticeSpec};
use qedhf::scf::{scf_solve, AnsatzKind, ScfOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qedhf"))
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("QEDHF_FIXTURES", fixtures()).output().unwrap()
}

fn rows(text: &str) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|x| x.unwrap()).collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[i].to_string()).collect()
}

fn floats(text: &str, name: &str) -> Vec<f64> {
    column(text, name).iter().map(|s| s.parse().unwrap()).collect()
}

const LATTICE: &str = r#"
version = 1
ansatz = "gss"
seed = 3

[system.lattice]
n_sites = 2
u = 1.0
g = 0.5
boundary = "open"

[sweep]
parameter = "g"
grid = [GRID]

[oracle]
enable = true
n_max = 10
"#;

fn lattice(grid: &str) -> String {
    LATTICE.replace("GRID", grid)
}

#[test]
fn zero_coupling_row_is_hartree_fock_plus_zero_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &lattice("0.0"));
    let out = run(&["run", cfg.to_str().unwrap(), "--output", "-"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(column(&text, "status"), ["ok"]);
    assert_eq!(floats(&text, "s_mf"), [0.0]);
    let spec = LatticeSpec::new(2, 1.0, 1.0, 0.0, 1.0).boundary(Boundary::Open);
    let sys = build_hubbard_holstein(&spec).unwrap();
    let bare = sys.clone().with_modes(vec![]).unwrap();
    let hf = scf_solve(&bare, AnsatzKind::HfBare, &ScfOptions::default()).unwrap();
    let zpe = 0.5 * sys.modes.len() as f64;
    assert!((floats(&text, "e_total")[0] - (hf.energy.total + zpe)).abs() < 1e-9);
    assert!(floats(&text, "s_ed")[0].abs() < 1e-10);
}

#[test]
fn frozen_squeeze_never_beats_free_squeeze() {
    let dir = tempfile::tempdir().unwrap();
    let free = write(dir.path(), "free.toml", &lattice("0.25, 0.5, 1.0"));
    for g in ["0.25", "0.5", "1.0"] {
        let text = lattice("0.0")
            .replace("g = 0.5", &format!("g = {g}"))
            .replace("parameter = \"g\"", "parameter = \"r\"");
        let frozen = write(dir.path(), &format!("frozen-{g}.toml"), &text);
        let out = run(&["run", frozen.to_str().unwrap()]);
        assert!(out.status.success());
        let e_frozen = floats(&String::from_utf8(out.stdout).unwrap(), "e_total")[0];
        let out = run(&["run", free.to_str().unwrap()]);
        let text = String::from_utf8(out.stdout).unwrap();
        let i = column(&text, "value").iter().position(|v| v.parse::<f64>().unwrap() == g.parse::<f64>().unwrap());
        let e_free = floats(&text, "e_total")[i.unwrap()];
        assert!(e_free - e_frozen <= 1e-10, "g={g}: {e_free} vs {e_frozen}");
    }
}

#[test]
fn squeeze_scan_on_molecule_has_interior_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"
version = 1
ansatz = "gss"
reference = "vt"

[system.molecule]
fcidump = "lih_sto3g.fcidump"
dipole = "lih_sto3g.dipole"
modes = [{ omega = 0.05, strength = 0.1 }]

[sweep]
parameter = "r"
grid = [-0.03, -0.02, -0.015, -0.01, -0.005, 0.0, 0.005]
"#,
    );
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let d = floats(&text, "e_minus_reference");
    assert!(d[5].abs() < 1e-8, "r = 0 reproduces the reference: {d:?}");
    let k = (0..d.len()).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
    assert!(k > 0 && k + 1 < d.len() && d[k] < 0.0, "{d:?}");
}

#[test]
fn output_is_byte_stable_and_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &lattice("1.0, 0.0, 0.5, 0.25"));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, jobs) in [(&a, "1"), (&b, "3")] {
        let out = run(&["run", cfg.to_str().unwrap(), "--output", path.to_str().unwrap(), "--jobs", jobs]);
        assert!(out.status.success());
    }
    let (a, b) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(a, b);
    let text = a;
    assert_eq!(column(&text, "value"), ["1.0", "0.0", "0.5", "0.25"]);
    assert_eq!(column(&text, "index"), ["0", "1", "2", "3"]);
    let hashes = column(&text, "config_hash");
    assert!(hashes.iter().all(|h| h == &hashes[0] && h.len() == 16));
    for row in rows(&text) {
        assert!(!row.iter().any(|f| f == "NaN"));
    }
}

#[test]
fn seed_enters_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &lattice("0.5"));
    let hash = |seed: &str| {
        let out = run(&["run", cfg.to_str().unwrap(), "--seed", seed]);
        column(&String::from_utf8(out.stdout).unwrap(), "config_hash")[0].clone()
    };
    assert_eq!(hash("1"), hash("1"));
    assert_ne!(hash("1"), hash("2"));
}

#[test]
fn jsonl_rows_carry_the_same_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &lattice("0.0, 0.5"));
    let out = run(&["run", cfg.to_str().unwrap(), "--format", "jsonl"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for key in ["config_hash", "e_total", "e_electronic", "e_dse_residual", "e_photon", "f", "r", "s_mf", "s_ed", "status"] {
        assert!(lines[1].get(key).is_some(), "missing {key}");
    }
    assert_eq!(lines[1]["status"], "ok");
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        lattice(""),
        lattice("0.5").replace("version = 1", "version = 7"),
        lattice("0.5").replace("seed = 3", "seed = 3\nbogus = 1"),
        lattice("0.5").replace("parameter = \"g\"", "parameter = \"z\""),
        lattice("0.5").replace(
            "[sweep]",
            "[system.molecule]\nfcidump = \"h2_sto3g.fcidump\"\ndipole = \"h2_sto3g.dipole\"\nmodes = [{ omega = 1.0, strength = 0.1 }]\n\n[sweep]",
        ),
        lattice("0.5").replace("n_sites = 2", "n_sites = 0"),
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{i}.toml"), text);
        let out = run(&["run", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let out = run(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn all_points_failing_exits_with_one_and_keeps_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"
version = 1
ansatz = "vt"

[system.molecule]
fcidump = "h2_sto3g.fcidump"
dipole = "h2_sto3g.dipole"
modes = [{ omega = 0.5, strength = 0.1, component = 9 }]

[sweep]
parameter = "lambda"
grid = [0.1, 0.2]
"#,
    );
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(column(&text, "status"), ["error", "error"]);
    assert!(column(&text, "message")[0].contains("component"));
}

#[test]
fn molecule_paths_resolve_through_the_fixture_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"
version = 1
ansatz = "gss"

[system.molecule]
fcidump = "h2_sto3g.fcidump"
dipole = "h2_sto3g.dipole"
modes = [{ omega = 0.5, strength = 0.1 }]

[sweep]
parameter = "lambda"
grid = [0.0, 0.1]
"#,
    );
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(column(&String::from_utf8(out.stdout).unwrap(), "status"), ["ok", "ok"]);
    let out = bin()
        .args(["run", cfg.to_str().unwrap()])
        .env("QEDHF_FIXTURES", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes_by_default_and_catches_injected_faults() {
    let out = run(&["verify"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 8);

    let out = run(&["verify", "--inject-pair-scale", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL spectrum invariance"), "{text}");
    assert!(text.contains("PASS gradients"));

    let out = run(&["verify", "--inject-gradient-offset", "1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL gradients"), "{text}");
    assert!(text.contains("PASS spectrum invariance"));
}

#[test]
fn verify_reads_config_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", "version = 1\nseed = 5\n\n[faults]\npair_scale = 1.5\n");
    let report = dir.path().join("report.txt");
    let out = run(&["verify", cfg.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.contains("FAIL spectrum invariance"));
    assert!(text.trim_end().ends_with("checks pass"));
    let bad = write(dir.path(), "bad.toml", "version = 2\n");
    assert_eq!(run(&["verify", bad.to_str().unwrap()]).status.code(), Some(2));
}
