use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use shadow_recovery_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sr_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn exact_recovery_round_trip() {
    unsafe {
        let mut ch = ptr::null_mut();
        assert_eq!(sr_channel_reference(&mut ch), SrStatus::Ok);
        assert_eq!(sr_channel_num_qubits(ch), 2);
        let mut zz = 0.0;
        assert_eq!(sr_channel_eigenvalue(ch, c("ZZ").as_ptr(), &mut zz), SrStatus::Ok);
        assert!((zz - 0.384).abs() < 1e-12);

        let mut obs = ptr::null_mut();
        assert_eq!(sr_observable_heisenberg(2, false, &mut obs), SrStatus::Ok);
        assert_eq!(sr_observable_len(obs), 4);
        let mut est = ptr::null_mut();
        assert_eq!(sr_exact_eigenvalues(ch, 2, &mut est), SrStatus::Ok);

        let (mut f, mut ideal, mut raw) = (0.0, 0.0, 0.0);
        assert_eq!(sr_recover_haar_state(ch, obs, est, 0.05, 3, &mut f, &mut ideal, &mut raw), SrStatus::Ok);
        assert!((f - ideal).abs() < 1e-10);
        assert!((raw - ideal).abs() > 1e-4);

        sr_eigenvalues_free(est);
        sr_observable_free(obs);
        sr_channel_free(ch);
    }
}

#[test]
fn learned_estimates_and_supplied_expectations() {
    unsafe {
        let json = c(r#"{"kind":"pauli-product","qubits":[{"pI":0.9,"pX":0.05,"pY":0.03,"pZ":0.02}]}"#);
        let mut ch = ptr::null_mut();
        assert_eq!(sr_channel_from_json(json.as_ptr(), &mut ch), SrStatus::Ok);
        let mut est = ptr::null_mut();
        assert_eq!(sr_learn_eigenvalues(ch, 200_000, 1, 7, &mut est), SrStatus::Ok);
        let mut lz = 0.0;
        assert_eq!(sr_eigenvalues_get(est, c("Z").as_ptr(), &mut lz), SrStatus::Ok);
        assert!((lz - 0.86).abs() < 0.03, "{lz}");

        let mut obs = ptr::null_mut();
        assert_eq!(sr_observable_parse(c("Z 2.0\n").as_ptr(), &mut obs), SrStatus::Ok);
        let labels = [c("Z")];
        let label_ptrs: Vec<*const c_char> = labels.iter().map(|l| l.as_ptr()).collect();
        let values = [0.5 * lz];
        let mut f = 0.0;
        assert_eq!(sr_recover_expectation(obs, est, 0.05, label_ptrs.as_ptr(), values.as_ptr(), 1, &mut f), SrStatus::Ok);
        assert!((f - 1.0).abs() < 1e-12);

        let mut back = ptr::null_mut();
        assert_eq!(sr_backward_observable(obs, est, 0.05, &mut back), SrStatus::Ok);
        let mut label = [0 as c_char; 4];
        let mut coef = 0.0;
        assert_eq!(sr_observable_term(back, 0, label.as_mut_ptr(), label.len(), &mut coef), SrStatus::Ok);
        assert_eq!(CStr::from_ptr(label.as_ptr()).to_str().unwrap(), "Z");
        assert!((coef - 2.0 / lz).abs() < 1e-12);
        assert_eq!(sr_observable_term(back, 0, label.as_mut_ptr(), 1, &mut coef), SrStatus::BufferTooSmall);

        sr_observable_free(back);
        sr_observable_free(obs);
        sr_eigenvalues_free(est);
        sr_channel_free(ch);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut ch = ptr::null_mut();
        assert_eq!(sr_channel_from_json(c("{\"kind\": 3}").as_ptr(), &mut ch), SrStatus::Parse);
        assert!(last_error().contains("line 1"));
        assert!(ch.is_null());
        assert_eq!(sr_channel_from_json(ptr::null(), &mut ch), SrStatus::NullPointer);
        assert_eq!(sr_channel_reference(ptr::null_mut()), SrStatus::NullPointer);

        let flip = c(r#"{"kind":"pauli-product","qubits":[{"pI":0.5,"pX":0.5,"pY":0,"pZ":0}]}"#);
        assert_eq!(sr_channel_from_json(flip.as_ptr(), &mut ch), SrStatus::Ok);
        let mut est = ptr::null_mut();
        assert_eq!(sr_exact_eigenvalues(ch, 1, &mut est), SrStatus::Ok);
        let mut obs = ptr::null_mut();
        assert_eq!(sr_observable_parse(c("Z 1\n").as_ptr(), &mut obs), SrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sr_backward_observable(obs, est, 0.05, &mut back), SrStatus::BelowFloor);
        assert!(last_error().contains("Z"));

        let mut n = 0u64;
        assert_eq!(sr_plan_sample_size(0.1, 0.1, 2, 2, 4, 0.0, &mut n), SrStatus::InvalidArgument);
        assert_eq!(sr_plan_sample_size(0.1, 0.1, 1, 1, 1, 0.9, &mut n), SrStatus::Ok);
        assert!(n > 0);

        sr_observable_free(obs);
        sr_eigenvalues_free(est);
        sr_channel_free(ch);
        sr_channel_free(ptr::null_mut());
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(sr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("shadow_recovery.h")).unwrap();
    for name in ["sr_channel_from_json", "sr_recover_expectation", "SR_STATUS_BELOW_FLOOR", "typedef struct SrChannel"] {
        assert!(header.contains(name), "{name}");
    }
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"shadow_recovery.h\"\n\
         int main(void) { SrChannel *ch = 0; enum SrStatus s = sr_channel_reference(&ch); \
         sr_channel_free(ch); return s == SR_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new(cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(&include).arg(&src).status().unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sr-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
