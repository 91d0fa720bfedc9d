use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use csda_transport_ffi::*;

const SMALL: &str = "experiment = \"iterate\"\n\
    grid.nx = 9\ngrid.ny = 9\ngrid.ne = 5\n\
    angular.Q = 5\n";

fn write_config(dir: &Path, text: &str) -> CString {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = csda_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    let mut s = 0.0;
    assert_eq!(
        csda_bk_stopping(2.147e-3, 1.777, 10.0, &mut s),
        CsdaStatus::Ok
    );
    let want = 10f64.powf(1.0 - 1.777) / (2.147e-3 * 1.777);
    assert!((s - want).abs() <= 1e-14 * want);
    assert_eq!(
        csda_bk_stopping(2.147e-3, 0.5, 10.0, &mut s),
        CsdaStatus::InvalidInput
    );
    assert!(!last_error().is_empty());
    assert_eq!(
        csda_bk_stopping(2.147e-3, 1.777, 10.0, ptr::null_mut()),
        CsdaStatus::InvalidArgument
    );

    let mut p = 0.0;
    assert_eq!(
        csda_hg_phase(0.95, std::f64::consts::FRAC_PI_2, &mut p),
        CsdaStatus::Ok
    );
    let g: f64 = 0.95;
    let want = (1.0 - g * g) / (2.0 * std::f64::consts::PI * (1.0 + g * g));
    assert!((p - want).abs() < 1e-15);
    assert_eq!(csda_hg_phase(1.0, 0.0, &mut p), CsdaStatus::InvalidInput);
    assert!(!csda_version().is_null());
}

#[test]
fn problem_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL);
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(
            csda_config_from_file(path.as_ptr(), &mut cfg),
            CsdaStatus::Ok
        );
        let mut prob = ptr::null_mut();
        assert_eq!(csda_problem_new(cfg, &mut prob), CsdaStatus::Ok);
        let (mut nx, mut ny) = (0usize, 0usize);
        assert_eq!(
            csda_problem_dose_dims(prob, &mut nx, &mut ny),
            CsdaStatus::State
        );
        assert_eq!(csda_problem_solve(prob), CsdaStatus::Ok);
        assert_eq!(
            csda_problem_dose_dims(prob, &mut nx, &mut ny),
            CsdaStatus::Ok
        );
        assert_eq!((nx, ny), (9, 9));
        let mut buf = vec![0.0; nx * ny];
        assert_eq!(
            csda_problem_dose(prob, buf.as_mut_ptr(), 3),
            CsdaStatus::InvalidArgument
        );
        assert_eq!(
            csda_problem_dose(prob, buf.as_mut_ptr(), buf.len()),
            CsdaStatus::Ok
        );
        assert!(buf.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(buf.iter().any(|v| *v > 0.0));
        let (mut it, mut conv) = (0usize, false);
        assert_eq!(
            csda_problem_iterations(prob, &mut it, &mut conv),
            CsdaStatus::Ok
        );
        assert!(conv && it > 0);
        csda_problem_free(prob);
        csda_problem_free(ptr::null_mut());

        let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
        assert_eq!(csda_run(cfg, out.as_ptr(), 1), CsdaStatus::Ok);
        assert!(dir.path().join("out/run_metadata.txt").exists());
        csda_config_free(cfg);
    }
}

#[test]
fn config_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        let bad = write_config(dir.path(), "experiment = \"iterate\"\nangular.Q = 4\n");
        assert_eq!(
            csda_config_from_file(bad.as_ptr(), &mut cfg),
            CsdaStatus::InvalidInput
        );
        assert!(last_error().contains("angular.Q"));
        let missing = CString::new(dir.path().join("none.toml").to_str().unwrap()).unwrap();
        assert_eq!(
            csda_config_from_file(missing.as_ptr(), &mut cfg),
            CsdaStatus::Io
        );
        assert_eq!(
            csda_config_from_file(ptr::null(), &mut cfg),
            CsdaStatus::InvalidArgument
        );

        let carbon = write_config(dir.path(), "experiment = \"carbon\"\n");
        assert_eq!(
            csda_config_from_file(carbon.as_ptr(), &mut cfg),
            CsdaStatus::Ok
        );
        let mut prob = ptr::null_mut();
        assert_eq!(csda_problem_new(cfg, &mut prob), CsdaStatus::InvalidInput);
        assert!(prob.is_null());
        csda_config_free(cfg);
    }
}

fn target_dir() -> PathBuf {
    // tests/../../../target/<profile>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib = target_dir().join("libcsda_transport_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let cfg = write_config(dir.path(), SMALL);
    let out = Command::new(&exe)
        .arg(cfg.to_str().unwrap())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("9 9 "), "{line}");
}
