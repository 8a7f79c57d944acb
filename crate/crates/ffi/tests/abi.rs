use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use penning_ffi::*;

fn last_error() -> String {
    let p = penning_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn solve(p: &PenningTrapParams) -> (PenningStatus, *mut PenningCrystal) {
    let mut c = ptr::null_mut();
    let s = unsafe { penning_crystal_solve(p, 0.0, &mut c) };
    (s, c)
}

#[test]
fn round_trip_through_handle() {
    let p = penning_trap_default(10, 0.04, 0.16);
    let (s, c) = solve(&p);
    assert_eq!(s, PenningStatus::Ok);
    unsafe {
        assert_eq!(penning_crystal_len(c), 10);
        let mut len = 0usize;
        let mut pos = vec![0.0; 20];
        assert_eq!(penning_crystal_positions(c, pos.as_mut_ptr(), 20, &mut len), PenningStatus::Ok);
        assert_eq!(len, 20);
        assert!(pos.iter().any(|v| *v != 0.0));

        let mut ax = vec![0.0; 10];
        assert_eq!(penning_axial_frequencies(c, ax.as_mut_ptr(), 10, ptr::null_mut()), PenningStatus::Ok);
        assert!((ax[9] - 1.0).abs() < 1e-9);

        let mut pl = vec![0.0; 20];
        assert_eq!(penning_planar_frequencies(c, pl.as_mut_ptr(), 20, &mut len), PenningStatus::Ok);
        assert!(pl.windows(2).all(|w| w[0] <= w[1]) && pl[0] > 0.0);

        let mut j = vec![0.0; 100];
        assert_eq!(penning_axial_couplings(c, 1.1, j.as_mut_ptr(), 100, &mut len), PenningStatus::Ok);
        assert_eq!(j[3 * 10 + 7], j[7 * 10 + 3]);

        let mut e = 0.0;
        assert_eq!(penning_crystal_energy(c, &mut e), PenningStatus::Ok);
        assert!(e.is_finite());
        penning_crystal_free(c);
    }
}

#[test]
fn errors_are_reported() {
    let mut p = penning_trap_default(5, 0.3, 0.16);
    let (s, c) = solve(&p);
    assert_eq!(s, PenningStatus::InvalidArgument);
    assert!(c.is_null());
    assert!(last_error().contains("confined"));

    p.n_ions = 0;
    assert_eq!(solve(&p).0, PenningStatus::InvalidArgument);

    unsafe {
        assert_eq!(penning_crystal_solve(ptr::null(), 0.0, &mut ptr::null_mut()), PenningStatus::NullPointer);
        assert_eq!(penning_crystal_len(ptr::null()), 0);
        penning_crystal_free(ptr::null_mut());
        let mut w = 0.0;
        assert_eq!(penning_deconfinement_frequency(9.645, 0.0, &mut w), PenningStatus::Ok);
        assert!((w - 0.0521).abs() < 5e-5);
        assert_eq!(penning_deconfinement_frequency(1.0, 0.0, &mut w), PenningStatus::InvalidArgument);
    }

    let (s, c) = solve(&penning_trap_default(4, 0.04, 0.16));
    assert_eq!(s, PenningStatus::Ok);
    unsafe {
        let mut out = [0.0; 2];
        let mut len = 0;
        assert_eq!(penning_crystal_positions(c, out.as_mut_ptr(), 2, &mut len), PenningStatus::BufferTooSmall);
        assert_eq!(len, 8);
        let mut ax = [0.0; 4];
        assert_eq!(penning_axial_frequencies(c, ax.as_mut_ptr(), 4, &mut len), PenningStatus::Ok);
        let mut j = [0.0; 16];
        assert_eq!(penning_axial_couplings(c, ax[3], j.as_mut_ptr(), 16, &mut len), PenningStatus::Numerical);
        assert!(last_error().contains("resonant"));
        penning_crystal_free(c);
    }
    assert!(!unsafe { CStr::from_ptr(penning_version()) }.to_bytes().is_empty());
}

/// Compile tests/smoke.c against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Test binaries live in <profile>/deps next to the library artifacts.
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = [deps.join("libpenning_ffi.a"), deps.join("../libpenning_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or_else(|| panic!("static library missing under {}", deps.display()));
    let exe = tempfile_path("penning_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run cc");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 7 1.0000000"));
    let _ = std::fs::remove_file(exe);
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}
