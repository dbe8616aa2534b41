use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use floquet_cli::config::{from_table, parse_config, parse_document};
use floquet_cli::table::read_csv;
use floquet_core::models::QubitModel;
use floquet_core::numerics::{dense, C64};

fn floquet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floquet")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const STATIC_QUBIT: &str = r#"
units = "gamma"
[model]
kind = "qubit"
flux = 2.0
coupling = 1.0
[[output]]
kind = "reflection"
[[output]]
kind = "fluxes"
"#;

#[test]
fn golden_configs_validate() {
    for k in 2..=7 {
        let p = configs_dir().join(format!("fig{k}.cfg"));
        let o = floquet(&["validate", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "fig{k}: {}", stderr(&o));
    }
}

#[test]
fn unknown_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "bad.cfg", &STATIC_QUBIT.replace("flux = 2.0", "flux = 2.0\nfluxx = 3.0"));
    let o = floquet(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("fluxx"), "{}", stderr(&o));
}

#[test]
fn all_problems_are_reported_together() {
    let text = STATIC_QUBIT.replace("units = \"gamma\"", "units = \"hertz\"").replace("flux = 2.0", "flux = -1.0");
    let err = parse_config(&text).unwrap_err();
    assert!(err.0.len() >= 2, "{err:?}");
}

#[test]
fn correlations_on_kerr_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
units = "gamma"
[model]
kind = "kerr"
flux = 1.0
interaction = -0.5
detuning = -1.0
[solver]
n_max = 8
[[output]]
kind = "g2"
channel = "L"
"#;
    let p = write_config(dir.path(), "kerr.cfg", text);
    let o = floquet(&["solve", p.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unsupported"), "{}", stderr(&o));
    assert!(!dir.path().join("out").join("manifest.toml").exists());
}

#[test]
fn truncation_failure_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
units = "gamma"
[model]
kind = "kerr"
flux = 4000.0
interaction = 0.0
detuning = 0.0
[solver]
n_max = "auto"
[[output]]
kind = "occupation"
"#;
    let p = write_config(dir.path(), "big.cfg", text);
    let o = floquet(&["solve", p.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn static_reflection_matches_linear_solve() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "q.cfg", STATIC_QUBIT);
    let out = dir.path().join("out");
    let o = floquet(&["solve", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let m = QubitModel::constant(1.0, 2.0);
    let gen = m.generator().unwrap();
    let c: Vec<C64> = gen.c_at(0.0).iter().map(|x| -x).collect();
    let x = dense::solve(&gen.a_dense(0.0), &c).unwrap();
    let r = m.channel().reflection(0.0, &x);

    let t = read_csv("reflection.csv", &fs::read_to_string(out.join("reflection.csv")).unwrap()).unwrap();
    for (re, im) in t.column("re_R").unwrap().iter().zip(t.column("im_R").unwrap()) {
        assert!((re - r.re).abs() < 1e-10 && (im - r.im).abs() < 1e-10);
    }
    for (rr, tt) in t.column("abs_R2").unwrap().iter().zip(t.column("abs_T2").unwrap()) {
        let tr = (r + 1.0).norm_sqr();
        assert!((rr - r.norm_sqr()).abs() < 1e-10 && (tt - tr).abs() < 1e-10);
    }
}

#[test]
fn manifest_lists_every_file_and_is_written_last() {
    let dir = tempfile::tempdir().unwrap();
    let p = configs_dir().join("fig4.cfg");
    let out = dir.path().join("out");
    let o = floquet(&["solve", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let manifest: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    for key in ["config", "diagnostics", "timings", "files"] {
        assert!(manifest.contains_key(key), "missing {key}");
    }
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    let mut on_disk: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    on_disk.sort();
    let mut sorted: Vec<String> = listed.iter().map(|s| s.to_string()).collect();
    sorted.sort();
    assert_eq!(sorted, on_disk);

    let modified = |name: &str| fs::metadata(out.join(name)).unwrap().modified().unwrap();
    let last = modified("manifest.toml");
    assert!(on_disk.iter().all(|n| modified(n) <= last));

    for f in manifest["files"].as_array().unwrap() {
        let name = f["name"].as_str().unwrap();
        if name.ends_with(".csv") {
            let text = fs::read_to_string(out.join(name)).unwrap();
            assert!(!text.contains('\r'));
            let t = read_csv(name, &text).unwrap();
            let cols: Vec<&str> = f["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
            assert_eq!(t.columns, cols);
            assert_eq!(t.rows.len() as i64, f["rows"].as_integer().unwrap());
        }
    }
}

#[test]
fn echoed_config_round_trips() {
    for k in 2..=7 {
        let text = fs::read_to_string(configs_dir().join(format!("fig{k}.cfg"))).unwrap();
        let cfg = from_table(&parse_document(&text).unwrap()).unwrap();
        let echo = cfg.to_table();
        let again = from_table(&echo).unwrap_or_else(|e| panic!("fig{k}: {e}"));
        assert_eq!(again.to_table(), echo, "fig{k}");
    }
}

#[test]
fn command_line_sweep_writes_runs_and_combined_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "q.cfg", STATIC_QUBIT);
    let out = dir.path().join("sweep");
    let o = floquet(&["sweep", p.to_str().unwrap(), "--param", "model.flux", "--values", "0.5,1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for k in 0..3 {
        assert!(out.join(format!("run_{k:03}")).join("manifest.toml").exists());
    }
    let t = read_csv("summary.csv", &fs::read_to_string(out.join("summary.csv")).unwrap()).unwrap();
    assert_eq!(t.column("model.flux").unwrap(), vec![0.5, 1.0, 2.0]);

    let o = floquet(&["sweep", p.to_str().unwrap(), "--param", "model.nothing", "--values", "1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = floquet(&["sweep", p.to_str().unwrap(), "--param", "model.flux", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn csv_numbers_use_fixed_scientific_format() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "q.cfg", STATIC_QUBIT);
    let out = dir.path().join("out");
    assert_eq!(code(&floquet(&["solve", p.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let text = fs::read_to_string(out.join("fluxes.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for cell in row.split(',') {
        let (mantissa, exp) = cell.split_once('e').expect("scientific");
        assert_eq!(mantissa.trim_start_matches('-').len(), 18, "{cell}");
        exp.parse::<i32>().unwrap();
    }
}
