use chipgate::cli::{exit_code, main_with_args, run, run_with_threads, Subcommand};
use chipgate::scenario::{load_scenario, parse_scenario, Scenario};
use chipgate::Error;
use std::fs;
use std::path::{Path, PathBuf};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn high_barrier() -> Scenario {
    load_scenario(&scenarios().join("paper_high_barrier.toml")).unwrap()
}

fn minimal(extra: &str) -> String {
    format!(
        "[layout]\ni0_mA = 40.89\nalpha = 0.07025\nbias_x_G = -9.9\nbias_y_G = 50.0\nwidth_um = 0.7\n\
         height_um = 0.2\nquadrupole_depth_um = 0.4\nside_separation_um = 1.6\nside_center_z_um = 0.1\n{extra}"
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_scenarios_load() {
    let s = high_barrier();
    assert_eq!(s.layout.i0_mA, 40.89);
    assert_eq!(s.layout.alpha, 0.07025);
    s.validate().unwrap();
    for name in ["paper_low_barrier.toml", "duration_scan.toml", "duration_scan_optimized.toml"] {
        load_scenario(&scenarios().join(name)).unwrap().validate().unwrap();
    }
    let scan = load_scenario(&scenarios().join("duration_scan.toml")).unwrap();
    assert!(!scan.durations().is_empty());
}

#[test]
fn defaults_fill_missing_sections() {
    let s = parse_scenario(&minimal("")).unwrap();
    s.validate().unwrap();
    assert_eq!(s.numerics.n_modes, 12);
    assert!(s.durations().is_empty());
}

#[test]
fn bad_input_names_the_field() {
    let e = parse_scenario(&minimal("").replace("width_um = 0.7", "width_um = -0.7")).unwrap_err();
    assert!(matches!(e, Error::Invalid { .. }));
    assert!(e.to_string().contains("width"), "{e}");
    assert!(matches!(parse_scenario(""), Err(Error::Parse { .. })));
    assert!(matches!(parse_scenario(&minimal("[layout2]\nx = 1\n")), Err(Error::Parse { .. })));
    assert!(matches!(parse_scenario(&minimal("[numerics]\nn_mode = 3\n")), Err(Error::Parse { .. })));
    let mut s = parse_scenario(&minimal("")).unwrap();
    s.layout.height_um = f64::NAN;
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit_code(&run(Subcommand::Field, &s, dir.path())), 2);
}

#[test]
fn empty_scan_is_a_usage_error() {
    let s = parse_scenario(&minimal("")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = run(Subcommand::Scan, &s, dir.path());
    assert!(matches!(r, Err(Error::Usage(_))));
    assert_eq!(exit_code(&r), 2);
}

#[test]
fn binary_entry_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.toml");
    let args = |sub: &str, path: &Path| {
        vec!["chipgate".into(), sub.into(), path.to_string_lossy().into_owned(), "-o".into(), out.to_string_lossy().into_owned()]
    };
    assert_eq!(main_with_args(args("field", &missing)), 2);
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "").unwrap();
    assert_eq!(main_with_args(args("field", &empty)), 2);
    assert_eq!(main_with_args(args("bogus", &empty)), 2);
    let ok = dir.path().join("ok.toml");
    fs::write(&ok, minimal("[field]\nx_um = [-1.0, 1.0, 3]\nz_um = [1.0, 1.5, 2]\n")).unwrap();
    assert_eq!(main_with_args(args("field", &ok)), 0);
    let text = fs::read_to_string(out.join("field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_m,y_m,z_m,Bx_T,By_T,Bz_T"));
    assert_eq!(lines.count(), 6);
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn outputs_are_reproducible() {
    let s = high_barrier();
    for sub in [Subcommand::Field, Subcommand::Trap, Subcommand::Raman] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let c = tempfile::tempdir().unwrap();
        run_with_threads(sub, &s, a.path(), 1).unwrap();
        run_with_threads(sub, &s, b.path(), 1).unwrap();
        run_with_threads(sub, &s, c.path(), 3).unwrap();
        let (fa, fb, fc) = (files(a.path()), files(b.path()), files(c.path()));
        assert!(fa.len() >= 2);
        assert_eq!(fa, fb, "{}", sub.name());
        assert_eq!(fa, fc, "{}", sub.name());
    }
}

#[test]
fn reports_carry_headers_and_manifest() {
    let s = high_barrier();
    let dir = tempfile::tempdir().unwrap();
    let out = run(Subcommand::Raman, &s, dir.path()).unwrap();
    assert!(out.report.as_deref().unwrap().contains("t_pi_us"));
    let csv = fs::read_to_string(dir.path().join("raman_oracle.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t_s,P0,P1,P_exc"));
    assert_eq!(csv.lines().count(), 1 + 201);
    let manifest: toml::Table = toml::from_str(&fs::read_to_string(dir.path().join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"].as_str(), Some("raman"));
    assert_eq!(manifest["inputs_sha256"].as_str().unwrap().len(), 64);
}
