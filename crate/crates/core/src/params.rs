//! Trap parameters, unit conventions and the analytic confinement criteria.
//!
//! Internally every length is measured in `l0 = (2 k_e e^2 / (m omega_z^2))^(1/3)`,
//! every angular frequency in `omega_z` and every energy in `m omega_z^2 l0^2`.
//! In these units the Coulomb pair energy is `1 / (2 r)`, the axial trap
//! stiffness is 1 and the in-plane trap stiffness is `omega_eff^2 +/- omega_W^2`.
//! Physical quantities only appear at the I/O boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atomic mass unit [kg].
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of a 9Be+ ion in atomic mass units.
pub const BERYLLIUM_MASS_U: f64 = 9.012182;
/// Elementary charge as used for the beryllium parameter sets [C].
pub const ELEMENTARY_CHARGE: f64 = 1.60217646e-19;
/// Coulomb constant [N m^2 / C^2].
#[allow(clippy::excessive_precision)]
pub const COULOMB_CONSTANT: f64 = 8.987_551_787_368_176_4e9;
/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// Default axial trap frequency, 2 pi x 795 kHz [rad/s].
pub const DEFAULT_OMEGA_Z: f64 = 2.0 * PI * 795.0e3;
/// Cyclotron frequency of 9Be+ at 4.5 T in units of omega_z.
pub const DEFAULT_OMEGA_C: f64 = 9.645;

/// How the crystal rotation frequency is specified, in units of omega_z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    /// Rotating-wall frequency Omega.
    Omega(f64),
    /// Effective in-plane trap frequency; Omega is the lower root.
    EffectiveFrequency(f64),
}

/// Ion species and the Coulomb constant, overridable for non-default setups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Ion mass [kg].
    pub mass: f64,
    /// Ion charge [C].
    pub charge: f64,
    /// Coulomb constant [N m^2 / C^2].
    pub coulomb_k: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mass: BERYLLIUM_MASS_U * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
            coulomb_k: COULOMB_CONSTANT,
        }
    }
}

/// Complete description of a trap and the rotating frame.
///
/// `omega_c`, `omega_wall` and the rotation are stored in units of `omega_z`;
/// `omega_z` itself is kept in rad/s so physical quantities can be recovered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Axial trap frequency [rad/s].
    pub omega_z: f64,
    /// Cyclotron frequency e B_z / m [omega_z].
    pub omega_c: f64,
    /// Rotating-wall scale sqrt(2 e |V_W| / m) [omega_z].
    pub omega_wall: f64,
    /// Sign of V_W; +1 makes x the stiff in-plane axis.
    pub wall_sign: f64,
    pub rotation: Rotation,
    pub constants: PhysicalConstants,
}

impl TrapConfig {
    /// Beryllium defaults (omega_z = 2 pi x 795 kHz, omega_c = 9.645 omega_z)
    /// with the given ion number, wall strength and effective frequency.
    pub fn beryllium(n_ions: usize, omega_wall: f64, omega_eff: f64) -> Self {
        Self {
            n_ions,
            omega_z: DEFAULT_OMEGA_Z,
            omega_c: DEFAULT_OMEGA_C,
            omega_wall,
            wall_sign: 1.0,
            rotation: Rotation::EffectiveFrequency(omega_eff),
            constants: PhysicalConstants::default(),
        }
    }

    pub fn with_rotation(mut self, rotation: Rotation) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_n_ions(mut self, n_ions: usize) -> Self {
        self.n_ions = n_ions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::Parameter("n_ions must be >= 1".into()));
        }
        if !(self.omega_z > 0.0 && self.omega_z.is_finite()) {
            return Err(Error::Parameter(format!("omega_z must be > 0, got {}", self.omega_z)));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::Parameter(format!("omega_c must be > 0, got {}", self.omega_c)));
        }
        if !(self.omega_wall >= 0.0 && self.omega_wall.is_finite()) {
            return Err(Error::Parameter(format!(
                "omega_wall must be >= 0, got {}",
                self.omega_wall
            )));
        }
        if self.wall_sign != 1.0 && self.wall_sign != -1.0 {
            return Err(Error::Parameter(format!(
                "wall_sign must be +1 or -1, got {}",
                self.wall_sign
            )));
        }
        let c = &self.constants;
        if !(c.mass > 0.0 && c.charge > 0.0 && c.coulomb_k > 0.0) {
            return Err(Error::Parameter("mass, charge and coulomb_k must be positive".into()));
        }
        match self.rotation {
            Rotation::Omega(w) if !(w > 0.0 && w.is_finite()) => {
                Err(Error::Parameter(format!("rotation Omega must be > 0, got {w}")))
            }
            Rotation::EffectiveFrequency(w) if !(w >= 0.0 && w.is_finite()) => {
                Err(Error::Parameter(format!("omega_eff must be >= 0, got {w}")))
            }
            _ => Ok(()),
        }
    }

    /// Largest omega_eff any rotation frequency can produce (at Omega = omega_c/2).
    pub fn max_omega_eff(&self) -> f64 {
        (self.omega_c * self.omega_c / 4.0 - 0.5).max(0.0).sqrt()
    }

    pub fn derive(&self) -> Result<Derived> {
        derive(self)
    }
}

/// Characteristic scales of the internal unit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Units {
    /// Characteristic length (2 k_e e^2 / (m omega_z^2))^(1/3) [m].
    pub l0: f64,
    /// Energy scale m omega_z^2 l0^2 [J].
    pub energy0: f64,
    /// Frequency scale omega_z [rad/s].
    pub omega_z: f64,
    /// Force scale m omega_z^2 l0 [N].
    pub force0: f64,
}

impl Units {
    pub fn new(constants: &PhysicalConstants, omega_z: f64) -> Self {
        let PhysicalConstants { mass, charge, coulomb_k } = *constants;
        let l0 = (2.0 * coulomb_k * charge * charge / (mass * omega_z * omega_z)).cbrt();
        Self {
            l0,
            energy0: mass * omega_z * omega_z * l0 * l0,
            omega_z,
            force0: mass * omega_z * omega_z * l0,
        }
    }
}

/// Rotating-frame quantities derived from a [`TrapConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// Rotation frequency Omega [omega_z].
    pub omega_rot: f64,
    /// omega_c Omega - Omega^2 - 1/2 [omega_z^2]; negative below deconfinement.
    pub omega_eff_sq: f64,
    /// Effective cyclotron frequency omega_c - 2 Omega = e B_eff / m [omega_z].
    pub omega_c_eff: f64,
    /// Effective magnetic field in the rotating frame B_z - 2 Omega m / e [T].
    pub b_eff: f64,
    pub units: Units,
}

impl Derived {
    /// Effective planar trap frequency; zero when the radial potential is not confining.
    pub fn omega_eff(&self) -> f64 {
        self.omega_eff_sq.max(0.0).sqrt()
    }
}

/// Resolve the rotation frequency and the derived rotating-frame quantities.
pub fn derive(config: &TrapConfig) -> Result<Derived> {
    config.validate()?;
    let wc = config.omega_c;
    let omega_rot = match config.rotation {
        Rotation::Omega(w) => w,
        Rotation::EffectiveFrequency(weff) => {
            // Omega^2 - wc Omega + (weff^2 + 1/2) = 0, lower root.
            let disc = wc * wc / 4.0 - 0.5 - weff * weff;
            if disc < 0.0 {
                return Err(Error::RotationOutOfRange {
                    requested: weff,
                    max: config.max_omega_eff(),
                });
            }
            let root = disc.sqrt();
            // c / (wc/2 + root) avoids cancellation for small Omega.
            (weff * weff + 0.5) / (wc / 2.0 + root)
        }
    };
    let omega_eff_sq = wc * omega_rot - omega_rot * omega_rot - 0.5;
    let omega_c_eff = wc - 2.0 * omega_rot;
    let c = &config.constants;
    let b_eff = omega_c_eff * config.omega_z * c.mass / c.charge;
    Ok(Derived {
        omega_rot,
        omega_eff_sq,
        omega_c_eff,
        b_eff,
        units: Units::new(c, config.omega_z),
    })
}

/// Values of the three analytic confinement criteria.
///
/// `beta2` and `beta3` are reported in units of `m omega_z^2`; `beta1` is
/// dimensionless.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Deconfinement frequency [omega_z].
    pub omega_dc: f64,
    pub confined: bool,
}

/// Lowest rotation frequency at which beta3 > 0 holds, in units of omega_z.
pub fn deconfinement_frequency(omega_c: f64, omega_wall: f64) -> Result<f64> {
    let disc = omega_c * omega_c / 4.0 - 0.5 - omega_wall * omega_wall;
    if disc < 0.0 {
        return Err(Error::NoConfinementWindow { discriminant: disc });
    }
    Ok(omega_c / 2.0 - disc.sqrt())
}

pub fn stability(config: &TrapConfig) -> Result<StabilityReport> {
    let d = derive(config)?;
    let omega_dc = deconfinement_frequency(config.omega_c, config.omega_wall)?;
    // e B_z Omega - m Omega^2 - e V0 = m omega_eff^2 with e V0 = m omega_z^2 / 2.
    let beta2 = d.omega_eff_sq;
    let beta1 = 1.0 / beta2;
    let beta3 = 0.5 * (d.omega_eff_sq - config.omega_wall * config.omega_wall);
    Ok(StabilityReport { beta1, beta2, beta3, omega_dc, confined: beta3 > 0.0 })
}

/// In-plane stiffnesses (k_x, k_y) of the external potential in internal units.
pub(crate) fn planar_stiffness(config: &TrapConfig, derived: &Derived) -> (f64, f64) {
    let w2 = config.wall_sign * config.omega_wall * config.omega_wall;
    (derived.omega_eff_sq + w2, derived.omega_eff_sq - w2)
}
