//! Phonon-mediated Ising couplings for a spin-dependent optical dipole force.
//!
//! Matrices are reported as `J / (F_O^2 / (4 m omega_z^2))` for both branches,
//! with every frequency in omega_z. The Hamiltonian sums ordered pairs, so the
//! energy of a physical pair i != j is `2 J_ij`; diagonal entries are a constant
//! shift and are kept only for sum-rule checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::axial::AxialModes;
use crate::equilibrium::Crystal;
use crate::error::{Error, Result};
use crate::params::TrapConfig;
use crate::planar::{PlanarBasis, PlanarModes};

/// Minimum |mu - omega| accepted [omega_z].
pub const RESONANCE_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveAxis {
    Axial,
    PlanarX,
}

/// Which angle enters cos(phi_j - phi_j') in the planar coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// Laser phase theta_j = delta_k x_j.
    #[default]
    LaserPhase,
    /// The geometric polar angle of each ion.
    PolarAngle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Optical dipole force magnitude [N].
    pub f_o: f64,
    /// Beatnote frequency [omega_z].
    pub mu: f64,
    /// Effective wavevector along x [1/l0]; planar drive only.
    pub delta_k: f64,
    pub axis: DriveAxis,
    #[serde(default)]
    pub phase: PhaseConvention,
}

impl DriveConfig {
    pub fn axial(f_o: f64, mu: f64) -> Self {
        Self { f_o, mu, delta_k: 0.0, axis: DriveAxis::Axial, phase: PhaseConvention::LaserPhase }
    }

    pub fn planar(f_o: f64, mu: f64, delta_k: f64) -> Self {
        Self { f_o, mu, delta_k, axis: DriveAxis::PlanarX, phase: PhaseConvention::LaserPhase }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_o >= 0.0 && self.f_o.is_finite()) {
            return Err(Error::Parameter(format!("f_o must be >= 0, got {}", self.f_o)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Parameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.axis == DriveAxis::PlanarX && !(self.delta_k > 0.0 && self.delta_k.is_finite()) {
            return Err(Error::Parameter(format!(
                "planar drive needs delta_k > 0, got {}",
                self.delta_k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CouplingKind {
    AxialStatic,
    AxialTime { t: f64 },
    PlanarStatic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    /// Symmetric N x N matrix in units of F_O^2 / (4 m omega_z^2).
    pub j: DMatrix<f64>,
    pub drive: DriveConfig,
    pub kind: CouplingKind,
    /// Zero modes left out of the mode sum.
    pub excluded_modes: Vec<usize>,
}

impl CouplingMatrix {
    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    /// F_O^2 / (4 m omega_z^2) in joules.
    pub fn unit(&self, config: &TrapConfig) -> f64 {
        let f = self.drive.f_o;
        f * f / (4.0 * config.constants.mass * config.omega_z * config.omega_z)
    }

    /// Couplings in joules.
    pub fn physical(&self, config: &TrapConfig) -> DMatrix<f64> {
        &self.j * self.unit(config)
    }

    /// (i, j, J_ij) for i < j.
    pub fn off_diagonal(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for k in i + 1..n {
                out.push((i, k, self.j[(i, k)]));
            }
        }
        out
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        self.off_diagonal().iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }
}

fn check_resonance(frequencies: &[f64], mu: f64, skip: &[usize]) -> Result<()> {
    for (mode, &w) in frequencies.iter().enumerate() {
        if !skip.contains(&mode) && (mu - w).abs() < RESONANCE_GUARD {
            return Err(Error::Resonance { mode, frequency: w, mu });
        }
    }
    Ok(())
}

fn stable_axial(modes: &AxialModes) -> Result<()> {
    if let Some(mode) = modes.imaginary.iter().position(|&i| i) {
        return Err(Error::UnstableMode { mode, frequency: modes.frequencies[mode] });
    }
    Ok(())
}

/// sum_nu w_nu b_j^nu b_j'^nu, made exactly symmetric.
fn mode_sum(vectors: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (nu, w) in weights.iter().enumerate() {
        scaled.column_mut(nu).scale_mut(*w);
    }
    let j = scaled * vectors.transpose();
    (&j + j.transpose()) * 0.5
}

/// Time-independent axial coupling sum_nu b_j b_j' / (mu^2 - omega_nu^2).
pub fn axial_j_static(modes: &AxialModes, drive: &DriveConfig) -> Result<CouplingMatrix> {
    drive.validate()?;
    stable_axial(modes)?;
    check_resonance(&modes.frequencies, drive.mu, &[])?;
    let mu2 = drive.mu * drive.mu;
    let weights: Vec<f64> = modes.frequencies.iter().map(|w| 1.0 / (mu2 - w * w)).collect();
    Ok(CouplingMatrix {
        j: mode_sum(&modes.eigenvectors, &weights),
        drive: *drive,
        kind: CouplingKind::AxialStatic,
        excluded_modes: Vec::new(),
    })
}

/// Full axial coupling with the bracket 1 + cos 2 mu t - (2 mu / omega) sin(omega t) sin(mu t).
pub fn axial_j_time(modes: &AxialModes, drive: &DriveConfig, t: f64) -> Result<CouplingMatrix> {
    drive.validate()?;
    stable_axial(modes)?;
    check_resonance(&modes.frequencies, drive.mu, &[])?;
    let mu = drive.mu;
    let weights: Vec<f64> = modes
        .frequencies
        .iter()
        .map(|&w| {
            let bracket = 1.0 + (2.0 * mu * t).cos() - (2.0 * mu / w) * (w * t).sin() * (mu * t).sin();
            bracket / (mu * mu - w * w)
        })
        .collect();
    Ok(CouplingMatrix {
        j: mode_sum(&modes.eigenvectors, &weights),
        drive: *drive,
        kind: CouplingKind::AxialTime { t },
        excluded_modes: Vec::new(),
    })
}

/// Slow-rotation planar coupling
/// `2 sum_lambda omega Re{alpha_jx* alpha_j'x} cos(phi_j - phi_j') / (mu^2 - omega^2)`.
pub fn planar_j_static(
    modes: &PlanarModes,
    basis: &PlanarBasis,
    crystal: &Crystal,
    drive: &DriveConfig,
) -> Result<CouplingMatrix> {
    drive.validate()?;
    let n = crystal.len();
    if basis.dim() != 2 * n || modes.len() != 2 * n {
        return Err(Error::Parameter("planar modes do not match the crystal".into()));
    }
    check_resonance(&modes.frequencies, drive.mu, &modes.zero_modes)?;
    let amps = modes.site_amplitudes(basis);
    let mu2 = drive.mu * drive.mu;
    let phases: Vec<f64> = match drive.phase {
        PhaseConvention::LaserPhase => crystal.positions.iter().map(|p| drive.delta_k * p.x).collect(),
        PhaseConvention::PolarAngle => crystal.polar.iter().map(|p| p.phase).collect(),
    };
    let mut j = DMatrix::zeros(n, n);
    for l in 0..modes.len() {
        if modes.is_zero_mode(l) {
            continue;
        }
        let w = modes.frequencies[l];
        let weight = 2.0 * w / (mu2 - w * w);
        for a in 0..n {
            let xa = amps[(2 * a, l)];
            for b in a..n {
                let xb = amps[(2 * b, l)];
                j[(a, b)] += weight * (xa.conj() * xb).re;
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = j[(a, b)] * (phases[a] - phases[b]).cos();
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(CouplingMatrix {
        j,
        drive: *drive,
        kind: CouplingKind::PlanarStatic,
        excluded_modes: modes.zero_modes.clone(),
    })
}

/// Beatnote halfway between ascending axial modes k and k+1 (1-based).
pub fn midgap_detuning(modes: &AxialModes, k: usize) -> Result<f64> {
    let n = modes.len();
    if k == 0 || k >= n {
        return Err(Error::ModeIndex { index: k, count: n });
    }
    stable_axial(modes)?;
    let (lo, hi) = (modes.frequencies[k - 1], modes.frequencies[k]);
    if hi - lo < 1e-12 {
        log::warn!("modes {k} and {} are degenerate; the midgap beatnote is resonant", k + 1);
    }
    Ok(0.5 * (lo + hi))
}
