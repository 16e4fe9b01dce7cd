use std::ffi::{CStr, CString};
use std::ptr;

use schrodingerizer_ffi::*;

fn z(re: f64, im: f64) -> SchroComplex {
    SchroComplex { re, im }
}

fn last_error() -> String {
    let p = schro_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(schro_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn domain_edge() {
    assert_eq!(schro_estimate_domain(1.0, 9.0, -1.0), -10.0);
}

#[test]
fn null_arguments_are_reported() {
    schro_clear_error();
    assert!(schro_last_error_message().is_null());
    let mut out = 0.0;
    let s = unsafe { schro_estimate(ptr::null(), &mut out, ptr::null_mut()) };
    assert_eq!(s, SchroStatus::NullPointer);
    assert!(last_error().contains("query_json"));
    let mut h = ptr::null_mut();
    let s = unsafe { schro_ode_new(2, ptr::null(), ptr::null(), ptr::null(), &mut h) };
    assert_eq!(s, SchroStatus::NullPointer);
    assert!(h.is_null());
    assert_eq!(unsafe { schro_ode_dimension(ptr::null()) }, 0);
    unsafe {
        schro_ode_free(ptr::null_mut());
        schro_experiment_free(ptr::null_mut());
    }
}

#[test]
fn estimate_heat_example() {
    let q = CString::new(r#"{"method":"SchrHeat","d":1,"m":4,"m_p":9,"t_final":1,"dt":0.01}"#).unwrap();
    let (mut leading, mut poly) = (0.0, 0.0);
    let s = unsafe { schro_estimate(q.as_ptr(), &mut leading, &mut poly) };
    assert_eq!(s, SchroStatus::Ok);
    let want = 100.0 * (8.0 + 9.0 * 9f64.log2());
    assert!((leading - want).abs() < 1e-9);
    assert!(poly.is_nan());
}

#[test]
fn estimate_errors_map_to_statuses() {
    let mut leading = 0.0;
    let missing = CString::new(r#"{"method":"SchrHeat","d":1}"#).unwrap();
    let s = unsafe { schro_estimate(missing.as_ptr(), &mut leading, ptr::null_mut()) };
    assert_eq!(s, SchroStatus::InvalidArgument);
    assert!(last_error().contains("missing required field"));
    let unknown = CString::new(r#"{"method":"SchrHeat","colour":1}"#).unwrap();
    let s = unsafe { schro_estimate(unknown.as_ptr(), &mut leading, ptr::null_mut()) };
    assert_eq!(s, SchroStatus::Config);
}

#[test]
fn ode_round_trip_against_scalar_exponential() {
    // du/dt = (−1 + 2i)u
    let a = [z(-1.0, 2.0)];
    let u0 = [z(1.0, 0.0)];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { schro_ode_new(1, a.as_ptr(), ptr::null(), u0.as_ptr(), &mut h) }, SchroStatus::Ok);
    assert_eq!(unsafe { schro_ode_dimension(h) }, 1);
    let mut lmax = 0.0;
    assert_eq!(unsafe { schro_ode_lambda_max(h, &mut lmax) }, SchroStatus::Ok);
    assert!((lmax + 1.0).abs() < 1e-12);
    let t = 0.5;
    let want = (-t) * 1.0f64;
    let (wr, wi) = (want.exp() * (2.0 * t).cos(), want.exp() * (2.0 * t).sin());
    for recovery in [SchroRecovery::IntegrateP, SchroRecovery::PointP] {
        let mut out = [z(0.0, 0.0)];
        let s = unsafe { schro_ode_evolve(h, t, 2048, 10.0, 24.0, recovery, 0.0, out.as_mut_ptr()) };
        assert_eq!(s, SchroStatus::Ok, "{}", last_error());
        let err = ((out[0].re - wr).powi(2) + (out[0].im - wi).powi(2)).sqrt();
        assert!(err < 2e-2, "{recovery:?}: {err}");
    }
    // a p* off the lattice is rejected
    let mut out = [z(0.0, 0.0)];
    let s = unsafe { schro_ode_evolve(h, t, 2048, 10.0, 24.0, SchroRecovery::PointP, 0.123456, out.as_mut_ptr()) };
    assert_eq!(s, SchroStatus::InvalidArgument);
    assert!(last_error().contains("not a node"));
    unsafe { schro_ode_free(h) };
}

#[test]
fn inhomogeneous_system_reports_the_original_size() {
    let a = [z(-1.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(-2.0, 0.0)];
    let b = [z(1.0, 0.0), z(0.0, 0.0)];
    let u0 = [z(0.0, 0.0), z(1.0, 0.0)];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { schro_ode_new(2, a.as_ptr(), b.as_ptr(), u0.as_ptr(), &mut h) }, SchroStatus::Ok);
    assert_eq!(unsafe { schro_ode_dimension(h) }, 2);
    unsafe { schro_ode_free(h) };
}

#[test]
fn dilation_scalar_ladder() {
    let h1 = [z(-1.0, 0.0)];
    let h2 = [z(0.0, 0.0)];
    let psi = [z(1.0, 0.0)];
    let mut top = [z(0.0, 0.0)];
    let mut p = 0.0;
    let s = unsafe {
        schro_dilation_evolve(
            1,
            h1.as_ptr(),
            h2.as_ptr(),
            0.5,
            2,
            psi.as_ptr(),
            SchroDilationVariant::ExactExp,
            top.as_mut_ptr(),
            &mut p,
        )
    };
    assert_eq!(s, SchroStatus::Ok);
    assert!((top[0].re - (-1.0f64).exp()).abs() < 1e-15);
    assert!((p - (-2.0f64).exp()).abs() < 1e-15);
    // the literal arccos form needs ‖A‖₁Δt ≤ 1
    let s = unsafe {
        schro_dilation_evolve(
            1,
            h1.as_ptr(),
            h2.as_ptr(),
            2.0,
            1,
            psi.as_ptr(),
            SchroDilationVariant::TheoremArccos,
            top.as_mut_ptr(),
            &mut p,
        )
    };
    assert_eq!(s, SchroStatus::InvalidArgument);
}

const CONFIG: &str = r#"{
  "model": {
    "kind": "heat",
    "grid": {"a": -1.0, "b": 1.0, "m": 16, "d": 1},
    "pgrid": {"left": -5.0, "right": 5.0, "n": 256, "alpha_neg": 10.0, "l0": -1.0},
    "params": {"u0": "sin(pi*x)", "exact": "exp(-(pi^2)*t)*sin(pi*x)"}
  },
  "engine": {"engine": "exact_diagonal", "dt": 0.05, "t_final": 0.1},
  "outputs": {"snapshots": [0.05]}
}"#;

#[test]
fn experiment_handle_runs_into_a_directory() {
    let json = CString::new(CONFIG).unwrap();
    let mut exp = ptr::null_mut();
    let s = unsafe { schro_experiment_from_json(json.as_ptr(), &mut exp) };
    assert_eq!(s, SchroStatus::Ok, "{}", last_error());
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut n = 0usize;
    assert_eq!(unsafe { schro_experiment_run(exp, path.as_ptr(), &mut n) }, SchroStatus::Ok);
    assert!(n >= 3);
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("diagnostics.csv").exists());
    unsafe { schro_experiment_free(exp) };
}

#[test]
fn experiment_schema_errors() {
    let bad = CString::new(r#"{"model": {"kind": "heat"}, "engine": {}, "bogus": 1}"#).unwrap();
    let mut exp = ptr::null_mut();
    let s = unsafe { schro_experiment_from_json(bad.as_ptr(), &mut exp) };
    assert_eq!(s, SchroStatus::Config);
    assert!(exp.is_null());
    assert!(!last_error().is_empty());
}
