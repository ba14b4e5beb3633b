use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hotr_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let mut n = 0;
    let s = unsafe { hotr_last_error_message(buf.as_mut_ptr(), buf.len(), &mut n) };
    assert_eq!(s, HotrStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn rb_model() -> *mut HotrModel {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { hotr_model_new(ptr::null(), HotrModelKind::Rb as i32, &mut m) },
        HotrStatus::Ok
    );
    assert!(!m.is_null());
    m
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(hotr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(
            hotr_model_new(ptr::null(), 1, ptr::null_mut()),
            HotrStatus::NullPointer
        );
        let (mut a, mut b, mut c) = (0, 0, 0);
        assert_eq!(
            hotr_model_size(ptr::null(), &mut a, &mut b, &mut c),
            HotrStatus::NullPointer
        );
        assert_eq!(last_error(), "null pointer argument");
        hotr_model_free(ptr::null_mut());
        hotr_identifier_free(ptr::null_mut());
    }
}

#[test]
fn bad_configuration_names_the_key() {
    let json = CString::new(r#"{"rom": {"modes": 6, "kind": "rb", "extra": 1}}"#).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { hotr_model_new(json.as_ptr(), 1, &mut m) };
    assert_eq!(s, HotrStatus::InvalidInput);
    assert!(m.is_null());
    assert!(last_error().contains("rom.extra"));
    assert_eq!(
        unsafe { hotr_model_new(ptr::null(), 7, &mut m) },
        HotrStatus::InvalidInput
    );
}

#[test]
fn rb_model_solves_and_reports_sizes() {
    let m = rb_model();
    unsafe {
        let (mut dofs, mut sensors, mut pairs) = (0, 0, 0);
        assert_eq!(
            hotr_model_size(m, &mut dofs, &mut sensors, &mut pairs),
            HotrStatus::Ok
        );
        assert_eq!((sensors, pairs), (4, 2));
        assert_eq!(dofs, 50);

        let mut f = [0.0; 3];
        let mut n = 0;
        assert_eq!(
            hotr_model_eigenfrequencies(m, 3, f.as_mut_ptr(), 3, &mut n),
            HotrStatus::Ok
        );
        assert!(f[0] > 250.0 && f[0] < 400.0 && f[0] < f[1]);

        let mut small = [0.0; 4];
        assert_eq!(
            hotr_model_solve_hbm(m, 128.0, small.as_mut_ptr(), 4, &mut n),
            HotrStatus::BufferTooSmall
        );
        assert_eq!(n, 4 * 6 * 2);
        let mut out = vec![0.0; n];
        assert_eq!(
            hotr_model_solve_hbm(m, 128.0, out.as_mut_ptr(), out.len(), &mut n),
            HotrStatus::Ok
        );
        // second-harmonic strain is present at every gauge
        for g in 0..4 {
            let (re, im) = (out[g * 12 + 4], out[g * 12 + 5]);
            assert!(re.hypot(im) > 0.0);
        }
        assert_eq!(
            hotr_model_solve_hbm(m, -1.0, out.as_mut_ptr(), out.len(), &mut n),
            HotrStatus::InvalidInput
        );
        hotr_model_free(m);
    }
}

#[test]
fn surrogate_and_nonlinear_transmissibility_agree_roughly() {
    let m = rb_model();
    unsafe {
        let mut a = [0.0; 12];
        let mut b = [0.0; 12];
        let mut n = 0;
        let nl = HotrMethod::Nonlinear as i32;
        let su = HotrMethod::Surrogate as i32;
        assert_eq!(
            hotr_model_transmissibility(m, 128.0, 2, nl, a.as_mut_ptr(), 12, &mut n),
            HotrStatus::Ok
        );
        assert_eq!(
            hotr_model_transmissibility(m, 128.0, 2, su, b.as_mut_ptr(), 12, &mut n),
            HotrStatus::Ok
        );
        assert_eq!(n, 12);
        for k in 0..6 {
            let (x, y) = ((a[2 * k], a[2 * k + 1]), (b[2 * k], b[2 * k + 1]));
            let err = (x.0 - y.0).hypot(x.1 - y.1);
            assert!(err < 0.05 * x.0.hypot(x.1), "pair {k}");
        }
        assert_eq!(
            hotr_model_transmissibility(m, 128.0, 0, nl, a.as_mut_ptr(), 12, &mut n),
            HotrStatus::InvalidInput
        );
        assert_eq!(
            hotr_model_transmissibility(m, 128.0, 2, 5, a.as_mut_ptr(), 12, &mut n),
            HotrStatus::InvalidInput
        );
        hotr_model_free(m);
    }
}

#[test]
fn healthy_beam_has_undefined_second_order_transmissibility() {
    let json = CString::new(r#"{"crack": null}"#).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(hotr_model_new(json.as_ptr(), 1, &mut m), HotrStatus::Ok);
        let mut a = [0.0; 12];
        let mut n = 0;
        let s = hotr_model_transmissibility(
            m,
            128.0,
            2,
            HotrMethod::Nonlinear as i32,
            a.as_mut_ptr(),
            12,
            &mut n,
        );
        assert_eq!(s, HotrStatus::Undefined);
        hotr_model_free(m);
    }
}

#[test]
fn identifier_recovers_a_surrogate_crack() {
    let json = CString::new(r#"{"identification": {"depths": [10], "noise_percent": 0.0}, "ga": {"population": 10, "max_generations": 30}}"#).unwrap();
    let mut id = ptr::null_mut();
    unsafe {
        assert_eq!(hotr_identifier_new(json.as_ptr(), &mut id), HotrStatus::Ok);
        let mut len = 0;
        assert_eq!(
            hotr_identifier_measurement_len(id, &mut len),
            HotrStatus::Ok
        );
        assert_eq!(len, 24);
        let mut meas = vec![0.0; len];
        let mut n = 0;
        assert_eq!(
            hotr_identifier_simulate(id, 40, 10, meas.as_mut_ptr(), len, &mut n),
            HotrStatus::Ok
        );
        let mut r = HotrIdentification::default();
        assert_eq!(
            hotr_identifier_run(id, meas.as_ptr(), len, 3, &mut r),
            HotrStatus::Ok
        );
        assert_eq!((r.location_index, r.depth_percent), (40, 10));
        assert!(r.j < 1e-6 && r.reached_threshold);
        assert_eq!(
            hotr_identifier_run(id, meas.as_ptr(), len - 2, 3, &mut r),
            HotrStatus::InvalidInput
        );
        meas[0] = f64::NAN;
        assert_eq!(
            hotr_identifier_run(id, meas.as_ptr(), len, 3, &mut r),
            HotrStatus::InvalidInput
        );
        hotr_identifier_free(id);
    }
}

#[test]
fn error_message_buffer_reports_its_length() {
    let mut m = ptr::null_mut();
    unsafe {
        hotr_model_new(ptr::null(), 9, &mut m);
        let mut n = 0;
        let mut tiny = [0 as std::ffi::c_char; 2];
        assert_eq!(
            hotr_last_error_message(tiny.as_mut_ptr(), 2, &mut n),
            HotrStatus::BufferTooSmall
        );
        assert_eq!(n, "unknown model kind".len() + 1);
    }
}

/// Compile and run a C program against the generated header and the shared
/// library when a C compiler is available.
#[test]
fn c_program_links_against_the_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let libdir = deps.parent().unwrap().to_path_buf();
    assert!(libdir.join("libhotr_ffi.so").exists() || libdir.join("libhotr_ffi.dylib").exists());
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "hotr.h"
int main(void) {
    HotrModel *m = NULL;
    if (hotr_model_new(NULL, HOTR_MODEL_KIND_RB, &m) != HOTR_STATUS_OK) return 1;
    size_t dofs, sensors, pairs;
    if (hotr_model_size(m, &dofs, &sensors, &pairs) != HOTR_STATUS_OK) return 2;
    double tr[12];
    size_t n = 0;
    if (hotr_model_transmissibility(m, 128.0, 2, HOTR_METHOD_SURROGATE, tr, 12, &n) != HOTR_STATUS_OK) return 3;
    hotr_model_free(m);
    if (hotr_model_size(NULL, &dofs, &sensors, &pairs) != HOTR_STATUS_NULL_POINTER) return 4;
    printf("%zu %zu %zu %s\n", dofs, sensors, n, hotr_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("main");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&libdir)
        .arg("-lhotr_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe)
        .env("LD_LIBRARY_PATH", &libdir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.trim(),
        format!("50 4 12 {}", env!("CARGO_PKG_VERSION"))
    );
}

fn which_cc() -> Result<PathBuf, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .map(PathBuf::from)
        .ok_or(())
}
