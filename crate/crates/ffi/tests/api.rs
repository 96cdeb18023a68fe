use std::ffi::{c_char, CStr, CString};
use std::ptr;

use chemotaxis_ffi::*;

const CONFIG: &str = r#"
[grid]
nx = 16
ny = 16

[source]
kind = "logistic"
mu = 1.0

[noise]
kind = "linear"
kappas = [0.08]

[integrator]
t_end = 0.05
dt = 0.01
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; ks_last_error_length() + 1];
    assert_eq!(unsafe { ks_last_error_message(buf.as_mut_ptr(), buf.len()) }, KsStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn config(text: &str) -> (KsStatus, *mut KsConfig) {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { ks_config_from_toml(text.as_ptr(), &mut cfg) };
    (status, cfg)
}

#[test]
fn simulate_and_read_series() {
    let (status, cfg) = config(CONFIG);
    assert_eq!(status, KsStatus::Ok);
    let mut rec = ptr::null_mut();
    assert_eq!(unsafe { ks_simulate(cfg, 4, 0, &mut rec) }, KsStatus::Ok);

    let mut run = KsRunStatus::Diverged;
    assert_eq!(unsafe { ks_record_status(rec, &mut run) }, KsStatus::Ok);
    assert_eq!(run, KsRunStatus::Completed);

    let mut len = 0;
    assert_eq!(unsafe { ks_record_series(rec, KsSeries::Times, ptr::null_mut(), 0, &mut len) }, KsStatus::Ok);
    assert_eq!(len, 6);
    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { ks_record_series(rec, KsSeries::Times, small.as_mut_ptr(), 2, &mut len) },
        KsStatus::BufferTooSmall
    );
    let mut times = vec![0.0; len];
    assert_eq!(unsafe { ks_record_series(rec, KsSeries::Times, times.as_mut_ptr(), len, &mut len) }, KsStatus::Ok);
    assert!((times[5] - 0.05).abs() < 1e-12);

    let mut field = ptr::null_mut();
    assert_eq!(unsafe { ks_record_final_field(rec, &mut field) }, KsStatus::Ok);
    let (mut nx, mut ny) = (0, 0);
    assert_eq!(unsafe { ks_field_dims(field, &mut nx, &mut ny) }, KsStatus::Ok);
    assert_eq!((nx, ny), (16, 16));
    unsafe {
        ks_field_free(field);
        ks_record_free(rec);
        ks_config_free(cfg);
    }
}

#[test]
fn config_errors_are_classified() {
    let (status, cfg) = config("[grid]\nnx = 16\nny = 16\nbad = 1\n");
    assert_eq!(status, KsStatus::ConfigError);
    assert!(cfg.is_null());
    assert!(last_error().contains("bad"));

    let (status, _) = config(&CONFIG.replace("kind = \"logistic\"\nmu = 1.0", "kind = \"none\""));
    assert_eq!(status, KsStatus::ValidationError);
    assert!(last_error().contains("mu"));

    assert_eq!(unsafe { ks_config_from_toml(ptr::null(), ptr::null_mut()) }, KsStatus::NullPointer);
}

#[test]
fn field_operators() {
    let n = 16;
    let lx = std::f64::consts::PI;
    let vals: Vec<f64> = (0..n * n).map(|k| ((k % n) as f64 + 0.5) * lx / n as f64).map(f64::cos).collect();
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { ks_field_new(n, n, lx, lx, vals.as_ptr(), &mut u) }, KsStatus::Ok);
    let mut v = ptr::null_mut();
    assert_eq!(unsafe { ks_green_solve(u, &mut v) }, KsStatus::Ok);
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { ks_heat_semigroup(u, 1.0, &mut w) }, KsStatus::Ok);
    let (mut sv, mut sw, mut su) = (0.0, 0.0, 0.0);
    unsafe {
        ks_field_sup_norm(u, &mut su);
        ks_field_sup_norm(v, &mut sv);
        ks_field_sup_norm(w, &mut sw);
    }
    assert!((sv - su / 2.0).abs() < 1e-12);
    assert!((sw - su * (-1.0f64).exp()).abs() < 1e-12);

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { ks_field_new(2, 2, 1.0, 1.0, vals.as_ptr(), &mut bad) }, KsStatus::InvalidArgument);
    assert!(bad.is_null());
    unsafe {
        ks_field_free(u);
        ks_field_free(v);
        ks_field_free(w);
        ks_field_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ks_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
