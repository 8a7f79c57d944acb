//! C ABI over `penning-core`.
//!
//! Crystals live behind an opaque handle. Every fallible call returns a
//! [`PenningStatus`]; on failure the message is available from
//! [`penning_last_error`] on the same thread. Output arrays are caller-owned
//! and their capacity is passed in elements, not bytes.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use penning_core::analysis::scan::relax;
use penning_core::axial::axial_modes;
use penning_core::couplings::{axial_j_static, DriveConfig};
use penning_core::equilibrium::{Crystal, SolverOptions};
use penning_core::params::{deconfinement_frequency, PhysicalConstants, Rotation, TrapConfig};
use penning_core::planar::planar_modes;
use penning_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenningStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    /// The output buffer is too small; the required length was written where available.
    BufferTooSmall = 4,
    Panic = 5,
}

/// Trap parameters. Frequencies are in units of omega_z except `omega_z_hz`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PenningTrapParams {
    pub n_ions: usize,
    pub omega_z_hz: f64,
    pub omega_c: f64,
    pub omega_wall: f64,
    /// +1 or -1.
    pub wall_sign: f64,
    /// Effective in-plane frequency; used when `omega_rot` <= 0.
    pub omega_eff: f64,
    /// Rotating-wall frequency; takes precedence when > 0.
    pub omega_rot: f64,
}

/// Opaque relaxed crystal together with the trap that produced it.
pub struct PenningCrystal {
    config: TrapConfig,
    crystal: Crystal,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PenningStatus, msg: impl Into<String>) -> PenningStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> PenningStatus {
    let status = if e.is_validation() { PenningStatus::InvalidArgument } else { PenningStatus::Numerical };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into [`PenningStatus::Panic`].
fn guard(f: impl FnOnce() -> PenningStatus) -> PenningStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            fail(PenningStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn to_config(p: &PenningTrapParams) -> TrapConfig {
    let rotation = if p.omega_rot > 0.0 { Rotation::Omega(p.omega_rot) } else { Rotation::EffectiveFrequency(p.omega_eff) };
    TrapConfig {
        n_ions: p.n_ions,
        omega_z: 2.0 * std::f64::consts::PI * p.omega_z_hz,
        omega_c: p.omega_c,
        omega_wall: p.omega_wall,
        wall_sign: p.wall_sign,
        rotation,
        constants: PhysicalConstants::default(),
    }
}

/// Copy `src` into `out[..cap]`, reporting the needed length through `len_out`.
unsafe fn copy_out(src: &[f64], out: *mut f64, cap: usize, len_out: *mut usize) -> PenningStatus {
    if !len_out.is_null() {
        *len_out = src.len();
    }
    if cap < src.len() {
        return fail(PenningStatus::BufferTooSmall, format!("need {} elements, have {cap}", src.len()));
    }
    if out.is_null() {
        return fail(PenningStatus::NullPointer, "output buffer is null");
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    PenningStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn penning_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn penning_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Beryllium defaults (795 kHz axial, omega_c = 9.645 omega_z).
#[no_mangle]
pub extern "C" fn penning_trap_default(n_ions: usize, omega_wall: f64, omega_eff: f64) -> PenningTrapParams {
    let c = TrapConfig::beryllium(n_ions, omega_wall, omega_eff);
    PenningTrapParams {
        n_ions,
        omega_z_hz: c.omega_z / (2.0 * std::f64::consts::PI),
        omega_c: c.omega_c,
        omega_wall,
        wall_sign: 1.0,
        omega_eff,
        omega_rot: 0.0,
    }
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn penning_deconfinement_frequency(omega_c: f64, omega_wall: f64, out: *mut f64) -> PenningStatus {
    guard(|| {
        if out.is_null() {
            return fail(PenningStatus::NullPointer, "out is null");
        }
        match deconfinement_frequency(omega_c, omega_wall) {
            Ok(w) => {
                *out = w;
                PenningStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Seed and relax a crystal. `tol <= 0` selects the default threshold.
/// On success `*out` owns a handle to release with [`penning_crystal_free`].
///
/// # Safety
/// `params` must point to a valid struct and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn penning_crystal_solve(
    params: *const PenningTrapParams,
    tol: f64,
    out: *mut *mut PenningCrystal,
) -> PenningStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return fail(PenningStatus::NullPointer, "params or out is null");
        }
        *out = std::ptr::null_mut();
        let config = to_config(&*params);
        let mut opts = SolverOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        match relax(&config, None, &opts) {
            Ok(crystal) => {
                *out = Box::into_raw(Box::new(PenningCrystal { config, crystal }));
                PenningStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `crystal` must be NULL or a handle from [`penning_crystal_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn penning_crystal_free(crystal: *mut PenningCrystal) {
    if !crystal.is_null() {
        drop(Box::from_raw(crystal));
    }
}

/// Number of ions, 0 for NULL.
///
/// # Safety
/// `crystal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn penning_crystal_len(crystal: *const PenningCrystal) -> usize {
    crystal.as_ref().map_or(0, |c| c.crystal.len())
}

/// Rotating-frame potential energy [m omega_z^2 l0^2].
///
/// # Safety
/// `crystal` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn penning_crystal_energy(crystal: *const PenningCrystal, out: *mut f64) -> PenningStatus {
    guard(|| match (crystal.as_ref(), out.is_null()) {
        (Some(c), false) => {
            *out = c.crystal.energy;
            PenningStatus::Ok
        }
        _ => fail(PenningStatus::NullPointer, "crystal or out is null"),
    })
}

/// Interleaved positions x0, y0, x1, ... in l0; needs 2 N elements.
///
/// # Safety
/// `crystal` must be a live handle; `out` must hold `cap` doubles; `len_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn penning_crystal_positions(
    crystal: *const PenningCrystal,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PenningStatus {
    guard(|| {
        let Some(c) = crystal.as_ref() else { return fail(PenningStatus::NullPointer, "crystal is null") };
        let flat: Vec<f64> = c.crystal.positions.iter().flat_map(|p| [p.x, p.y]).collect();
        copy_out(&flat, out, cap, len_out)
    })
}

/// Axial frequencies [omega_z], ascending by eigenvalue; imaginary modes are
/// written as negative values. Needs N elements.
///
/// # Safety
/// As for [`penning_crystal_positions`].
#[no_mangle]
pub unsafe extern "C" fn penning_axial_frequencies(
    crystal: *const PenningCrystal,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PenningStatus {
    guard(|| {
        let Some(c) = crystal.as_ref() else { return fail(PenningStatus::NullPointer, "crystal is null") };
        match axial_modes(&c.crystal) {
            Ok(m) => {
                let w: Vec<f64> = (0..m.len()).map(|nu| m.signed_frequency(nu)).collect();
                copy_out(&w, out, cap, len_out)
            }
            Err(e) => from_error(e),
        }
    })
}

/// Planar frequencies [omega_z], ascending; the first N form the lower
/// branch. Needs 2 N elements.
///
/// # Safety
/// As for [`penning_crystal_positions`].
#[no_mangle]
pub unsafe extern "C" fn penning_planar_frequencies(
    crystal: *const PenningCrystal,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PenningStatus {
    guard(|| {
        let Some(c) = crystal.as_ref() else { return fail(PenningStatus::NullPointer, "crystal is null") };
        match planar_modes(&c.crystal, &c.config) {
            Ok((_, m)) => copy_out(&m.frequencies, out, cap, len_out),
            Err(e) => from_error(e),
        }
    })
}

/// Axial Ising couplings for beatnote `mu` [omega_z], row-major N x N in
/// units of F^2 / (4 m omega_z^2). Needs N * N elements.
///
/// # Safety
/// As for [`penning_crystal_positions`].
#[no_mangle]
pub unsafe extern "C" fn penning_axial_couplings(
    crystal: *const PenningCrystal,
    mu: f64,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PenningStatus {
    guard(|| {
        let Some(c) = crystal.as_ref() else { return fail(PenningStatus::NullPointer, "crystal is null") };
        let j = axial_modes(&c.crystal).and_then(|m| axial_j_static(&m, &DriveConfig::axial(1.0, mu)));
        match j {
            Ok(j) => {
                let n = j.n();
                let flat: Vec<f64> = (0..n * n).map(|k| j.j[(k / n, k % n)]).collect();
                copy_out(&flat, out, cap, len_out)
            }
            Err(e) => from_error(e),
        }
    })
}
