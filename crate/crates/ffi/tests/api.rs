use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use obsproj_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(obsproj_last_error()) }.to_string_lossy().into_owned()
}

fn preset(name: &str, rho: f64) -> *mut ObsprojScenario {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { obsproj_scenario_from_preset(name.as_ptr(), rho, &mut s) }, ObsprojStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn lyapunov_through_c_abi() {
    let a = [-4.0, 1.0, -4.0, 0.0];
    let mut p = [0.0; 4];
    assert_eq!(unsafe { obsproj_solve_lyapunov(a.as_ptr(), 2, p.as_mut_ptr()) }, ObsprojStatus::Ok);
    let expected = [0.625, -0.5, -0.5, 0.65625];
    for (x, y) in p.iter().zip(expected) {
        assert!((x - y).abs() < 1e-12);
    }

    let unstable = [1.0, 0.0, 0.0, 1.0];
    let status = unsafe { obsproj_solve_lyapunov(unstable.as_ptr(), 2, p.as_mut_ptr()) };
    assert_eq!(status, ObsprojStatus::NotHurwitz);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { obsproj_solve_lyapunov(ptr::null(), 2, p.as_mut_ptr()) }, ObsprojStatus::NullPointer);
}

#[test]
fn simulate_and_read_back() {
    let s = preset("fig2b", 0.0);
    unsafe {
        assert_eq!(obsproj_scenario_set_t_final(s, 0.5), ObsprojStatus::Ok);
        assert_eq!(obsproj_scenario_validate(s), ObsprojStatus::Ok);

        let mut t = ptr::null_mut();
        assert_eq!(obsproj_simulate(s, ObsprojFeedback::Output, &mut t), ObsprojStatus::Ok);
        let rows = obsproj_trajectory_rows(t);
        assert_eq!(rows, 501);
        assert_eq!(obsproj_trajectory_columns(t), 14);
        let name = CStr::from_ptr(obsproj_trajectory_column_name(t, 13)).to_str().unwrap();
        assert_eq!(name, "V");
        assert!(obsproj_trajectory_column_name(t, 14).is_null());
        assert!(obsproj_trajectory_error_name(t).is_null());

        let mut col = vec![0.0; rows];
        assert_eq!(obsproj_trajectory_column(t, 0, col.as_mut_ptr(), rows), ObsprojStatus::Ok);
        assert_eq!(col[0], 0.0);
        assert!((col[rows - 1] - 0.5).abs() < 1e-12);
        assert_eq!(obsproj_trajectory_column(t, 0, col.as_mut_ptr(), rows - 1), ObsprojStatus::InvalidArgument);

        let mut v = 0.0;
        assert_eq!(obsproj_trajectory_value(t, 0, 1, &mut v), ObsprojStatus::Ok);
        assert_eq!(v, 0.01);
        assert_eq!(obsproj_trajectory_value(t, rows, 0, &mut v), ObsprojStatus::OutOfRange);

        let mut reference = ptr::null_mut();
        assert_eq!(obsproj_simulate(s, ObsprojFeedback::State, &mut reference), ObsprojStatus::Ok);
        let mut m = ObsprojMetrics::default();
        assert_eq!(obsproj_trajectory_metrics(t, reference, 1e-2, &mut m), ObsprojStatus::Ok);
        assert!(m.recovery_dev > 0.0 && m.peak_xhat > 0.0);
        assert_eq!(obsproj_trajectory_metrics(t, ptr::null(), 1e-2, &mut m), ObsprojStatus::Ok);
        assert!(m.recovery_dev.is_nan());

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
        assert_eq!(obsproj_trajectory_write_csv(t, path.as_ptr()), ObsprojStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text.lines().count(), 502);

        let missing = CString::new("/nonexistent-dir/x.csv").unwrap();
        assert_eq!(obsproj_trajectory_write_csv(t, missing.as_ptr()), ObsprojStatus::Io);

        obsproj_trajectory_free(reference);
        obsproj_trajectory_free(t);
        obsproj_scenario_free(s);
    }
}

#[test]
fn configuration_and_simulation_errors() {
    let s = preset("fig3", 0.0);
    unsafe {
        assert_eq!(obsproj_scenario_set_dt(s, 1e-2), ObsprojStatus::Ok);
        assert_eq!(obsproj_scenario_validate(s), ObsprojStatus::InvalidConfig);
        let mut t = ptr::null_mut();
        assert_eq!(obsproj_simulate(s, ObsprojFeedback::Output, &mut t), ObsprojStatus::InvalidConfig);
        assert!(t.is_null());
        assert!(last_error().contains("dt"));
        obsproj_scenario_free(s);
    }

    let s = preset("fig2a", 0.0);
    unsafe {
        let xhat0 = [0.0, 1.0];
        assert_eq!(obsproj_scenario_set_projection(s, 0), ObsprojStatus::Ok);
        assert_eq!(obsproj_scenario_set_xhat0(s, xhat0.as_ptr(), 2), ObsprojStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(obsproj_simulate(s, ObsprojFeedback::Output, &mut t), ObsprojStatus::SimulationFailed);
        assert!(!t.is_null());
        let name = CStr::from_ptr(obsproj_trajectory_error_name(t)).to_str().unwrap();
        assert_eq!(name, "ObserverJacobianSingular");
        assert!(last_error().starts_with("ObserverJacobianSingular"));
        obsproj_trajectory_free(t);

        // restoring the set makes the same estimate invalid up front
        assert_eq!(obsproj_scenario_set_projection(s, 1), ObsprojStatus::Ok);
        assert_eq!(obsproj_scenario_validate(s), ObsprojStatus::InvalidConfig);
        obsproj_scenario_free(s);
    }
}

#[test]
fn null_handles_are_rejected() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(obsproj_scenario_from_preset(ptr::null(), 0.0, &mut s), ObsprojStatus::NullPointer);
        let bad = CString::new("fig9").unwrap();
        assert_eq!(obsproj_scenario_from_preset(bad.as_ptr(), 0.0, &mut s), ObsprojStatus::InvalidArgument);
        assert!(s.is_null());
        assert_eq!(obsproj_scenario_set_dt(ptr::null_mut(), 1.0), ObsprojStatus::NullPointer);
        let mut t = ptr::null_mut();
        assert_eq!(obsproj_simulate(ptr::null(), ObsprojFeedback::Output, &mut t), ObsprojStatus::NullPointer);
        assert_eq!(obsproj_trajectory_rows(ptr::null()), 0);
        obsproj_trajectory_free(ptr::null_mut());
        obsproj_scenario_free(ptr::null_mut());
    }
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("obsproj.h")
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for symbol in [
        "typedef struct ObsprojScenario ObsprojScenario;",
        "typedef struct ObsprojTrajectory ObsprojTrajectory;",
        "OBSPROJ_STATUS_SIMULATION_FAILED = 4",
        "obsproj_scenario_from_preset(",
        "obsproj_simulate(",
        "obsproj_trajectory_metrics(",
        "obsproj_solve_lyapunov(",
        "obsproj_last_error(void)",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}

/// Compiles a small C program against the generated header and the static
/// library. Skipped when no C compiler or static archive is available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let archive = [deps.join("libobsproj_ffi.a"), deps.parent().unwrap().join("libobsproj_ffi.a")]
        .into_iter()
        .find(|p| p.exists());
    let Some(archive) = archive else {
        eprintln!("skipping: static library not found next to {}", deps.display());
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let source = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let compiled = Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&source)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output();
    let compiled = match compiled {
        Ok(o) => o,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(compiled.status.success(), "{}", String::from_utf8_lossy(&compiled.stderr));

    let csv = dir.path().join("c.csv");
    let run = Command::new(&bin).arg(&csv).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("t,x1,x2,z1,"));
}
