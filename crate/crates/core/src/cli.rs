//! `penning` command-line front end.
//!
//! Every subcommand writes CSV data, a JSON sidecar and `manifest.json` into
//! `--out`. CSV numbers use 17 significant digits so values round-trip.
//! Exit status: 0 success, 2 invalid input, 3 numerical failure.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::scan::{self, ScanOptions, ScanResult};
use crate::analysis::stats::{self, RangePolicy};
use crate::axial::{axial_modes, AxialModes};
use crate::couplings::{self, CouplingMatrix, DriveConfig, PhaseConvention};
use crate::equilibrium::{Crystal, SolverOptions};
use crate::error::{Error, Result};
use crate::params::{PhysicalConstants, Rotation, TrapConfig};
use crate::planar::{self, PlanarBasis, PlanarModes};
use crate::seedlat::{default_spacing, generate_seed};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// On-disk trap configuration. Frequencies are in units of omega_z except
/// `omega_z_hz`, which is omega_z / 2 pi.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_ions: usize,
    #[serde(default = "default_omega_z_hz")]
    pub omega_z_hz: f64,
    #[serde(default = "default_omega_c")]
    pub omega_c_over_omega_z: f64,
    #[serde(default)]
    pub omega_wall_over_omega_z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_eff_over_omega_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_rot_over_omega_z: Option<f64>,
    #[serde(default = "default_wall_sign")]
    pub wall_sign: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coulomb_k: Option<f64>,
}

fn default_omega_z_hz() -> f64 {
    crate::params::DEFAULT_OMEGA_Z / (2.0 * PI)
}

fn default_omega_c() -> f64 {
    crate::params::DEFAULT_OMEGA_C
}

fn default_wall_sign() -> f64 {
    1.0
}

impl ConfigFile {
    pub fn to_trap(&self) -> Result<TrapConfig> {
        let rotation = match (self.omega_eff_over_omega_z, self.omega_rot_over_omega_z) {
            (Some(w), None) => Rotation::EffectiveFrequency(w),
            (None, Some(w)) => Rotation::Omega(w),
            _ => {
                return Err(Error::Config(
                    "exactly one of omega_eff_over_omega_z and omega_rot_over_omega_z is required".into(),
                ))
            }
        };
        let d = PhysicalConstants::default();
        let cfg = TrapConfig {
            n_ions: self.n_ions,
            omega_z: 2.0 * PI * self.omega_z_hz,
            omega_c: self.omega_c_over_omega_z,
            omega_wall: self.omega_wall_over_omega_z,
            wall_sign: self.wall_sign,
            rotation,
            constants: PhysicalConstants {
                mass: self.mass_kg.unwrap_or(d.mass),
                charge: self.charge_c.unwrap_or(d.charge),
                coulomb_k: self.coulomb_k.unwrap_or(d.coulomb_k),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Parser, Debug)]
#[command(name = "penning", version, about = "Planar Penning-trap ion crystals: equilibria, modes and Ising couplings")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Trap configuration (JSON).
    #[arg(long, global = true, env = "PENNING_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, env = "PENNING_OUT", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for `scan`; 0 uses every core.
    #[arg(long, global = true, env = "PENNING_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// Equilibrium convergence threshold on max |gradient|.
    #[arg(long, global = true, env = "PENNING_TOL", default_value_t = 1e-10)]
    pub tol: f64,
    /// Seed lattice spacing [l0]; defaults to (omega_z / omega_eff)^(2/3).
    #[arg(long, global = true, env = "PENNING_SEED_SPACING")]
    pub seed_spacing: Option<f64>,
    #[arg(long, global = true, env = "PENNING_MAX_ITERATIONS", default_value_t = 10_000)]
    pub max_iterations: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Branch {
    Axial,
    Planar,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScanType {
    OneToTwo,
    BandOverlap,
    Distortion,
    Powerlaw,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RangeArg {
    Full,
    Symmetric,
    Fixed,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Laser,
    Polar,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-shell hexagonal seed lattice.
    Seed,
    /// Relax the seed to a rotating-frame equilibrium.
    Equilibrium,
    /// Normal modes of an equilibrium crystal.
    Modes {
        #[arg(long, value_enum)]
        branch: Branch,
        /// Use this crystal.json instead of solving the equilibrium.
        #[arg(long)]
        crystal: Option<PathBuf>,
        /// Planar only: write this many displacement frames per mode in --frame-modes.
        #[arg(long, default_value_t = 0)]
        frames: usize,
        /// Planar modes (0-based, ascending frequency) to animate.
        #[arg(long, value_delimiter = ',')]
        frame_modes: Vec<usize>,
        /// Coherent amplitude |phi| of the animated mode.
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
    /// Ising coupling matrix from the modes.
    Jmatrix {
        #[arg(long, value_enum)]
        branch: Branch,
        /// Directory written by `modes`; otherwise solved from --config.
        #[arg(long)]
        modes: Option<PathBuf>,
        /// Beatnote frequency [omega_z].
        #[arg(long, conflicts_with_all = ["delta", "midgap"])]
        mu: Option<f64>,
        /// Axial only: beatnote above the COM mode, mu = omega_COM + delta.
        #[arg(long, conflicts_with = "midgap", allow_hyphen_values = true)]
        delta: Option<f64>,
        /// Axial only: beatnote between ascending modes k and k+1 (1-based).
        #[arg(long)]
        midgap: Option<usize>,
        /// Axial only: evaluate the time-dependent coupling at t [1/omega_z].
        #[arg(long)]
        time: Option<f64>,
        /// Optical dipole force [N]; only scales the physical unit in the metadata.
        #[arg(long, default_value_t = 1.0e-23)]
        force: f64,
        /// Planar only: effective wavevector along x [1/l0].
        #[arg(long, default_value_t = 1.0)]
        delta_k: f64,
        #[arg(long, value_enum, default_value = "laser")]
        phase: PhaseArg,
    },
    /// Parameter scans.
    Scan {
        #[arg(long = "type", value_enum)]
        kind: ScanType,
        /// one-to-two: ion numbers, as a list (7,19,37) or range (20..100 or 20..100:10).
        #[arg(long)]
        n: Option<String>,
        /// distortion: omega_eff values.
        #[arg(long, value_delimiter = ',')]
        omegas: Vec<f64>,
        /// powerlaw: detunings above the COM mode.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        /// Bisection resolution in omega_eff [omega_z].
        #[arg(long, default_value_t = 1e-4)]
        resolution: f64,
        /// First omega_eff of the bracketing grid.
        #[arg(long, default_value_t = 0.1)]
        start: f64,
        #[arg(long, default_value_t = 2.0)]
        upper: f64,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Power-law fit |J| ~ r^-alpha of a coupling matrix.
    Fit {
        /// Directory written by `jmatrix`.
        #[arg(long)]
        jmatrix: PathBuf,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long, default_value_t = stats::DEFAULT_FIT_BINS)]
        bins: usize,
    },
    /// Histogram of the off-diagonal couplings.
    Hist {
        #[arg(long)]
        jmatrix: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, value_enum, default_value = "full")]
        range: RangeArg,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
    },
    /// Couplings to one ion against polar angle, grouped in subshells.
    Corr {
        #[arg(long)]
        jmatrix: PathBuf,
        /// Reference ion; the ion nearest the center by default.
        #[arg(long)]
        reference: Option<usize>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub equilibrium_tol: f64,
    pub max_iterations: usize,
    pub saddle_tolerance: f64,
    pub resonance_guard: f64,
    pub zero_mode_tol: f64,
    pub degeneracy_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub arguments: Vec<String>,
    pub config: Option<ConfigFile>,
    pub config_sha256: Option<String>,
    pub tolerances: Tolerances,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Vec<StageTiming>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Run {
    out: PathBuf,
    subcommand: String,
    arguments: Vec<String>,
    config: Option<ConfigFile>,
    tolerances: Tolerances,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    timings: Vec<StageTiming>,
    clock: Instant,
}

impl Run {
    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: name.into(), seconds: (now - self.clock).as_secs_f64() });
        self.clock = now;
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        self.outputs.push(FileDigest { path: name.into(), sha256: sha256_hex(contents) });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn finish(mut self) -> Result<()> {
        let config_sha256 = match &self.config {
            Some(c) => Some(sha256_hex(serde_json::to_string(c)?.as_bytes())),
            None => None,
        };
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: std::mem::take(&mut self.subcommand),
            arguments: std::mem::take(&mut self.arguments),
            config: self.config.take(),
            config_sha256,
            tolerances: self.tolerances.clone(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            timings: std::mem::take(&mut self.timings),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.out.join("manifest.json"), text)?;
        Ok(())
    }
}

fn solver_options(common: &Common) -> Result<SolverOptions> {
    if !(common.tol > 0.0 && common.tol.is_finite()) {
        return Err(Error::Parameter(format!("--tol must be > 0, got {}", common.tol)));
    }
    if let Some(s) = common.seed_spacing {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("--seed-spacing must be > 0, got {s}")));
        }
    }
    Ok(SolverOptions { tol: common.tol, max_iterations: common.max_iterations, ..Default::default() })
}

fn require_config(run: &mut Run, common: &Common) -> Result<TrapConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this subcommand".into()))?;
    let file: ConfigFile = run.read_json(path)?;
    let trap = file.to_trap()?;
    run.config = Some(file);
    Ok(trap)
}

fn positions_csv(positions: &[crate::Vec2]) -> String {
    let mut s = String::from("index,x_l0,y_l0\n");
    for (i, p) in positions.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", fmt_f64(p.x), fmt_f64(p.y));
    }
    s
}

fn matrix_csv(m: &nalgebra::DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Parse `7,19,37`, `20..100` or `20..100:10`.
pub fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parameter(format!("cannot parse ion list '{text}'"));
    if let Some((a, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (b, s.trim().parse::<usize>().map_err(|_| bad())?),
            None => (rest, 1),
        };
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if step == 0 || a == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).step_by(step).collect());
    }
    text.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect()
}

fn solve_crystal(run: &mut Run, cfg: &TrapConfig, common: &Common) -> Result<Crystal> {
    let opts = solver_options(common)?;
    let spacing = match common.seed_spacing {
        Some(s) => s,
        None => default_spacing(cfg)?,
    };
    let seed = generate_seed(cfg, spacing)?;
    run.stage("seed");
    let crystal = crate::equilibrium::find_equilibrium(&seed, cfg, &opts)?;
    run.stage("equilibrium");
    Ok(crystal)
}

#[derive(Serialize)]
struct AxialSummary<'a> {
    n_ions: usize,
    frequencies: &'a [f64],
    imaginary: &'a [bool],
    stable: bool,
    max_frequency: f64,
    min_eigenvalue: f64,
}

#[derive(Serialize)]
struct PlanarSummary<'a> {
    n_ions: usize,
    lower_branch: &'a [f64],
    upper_branch: &'a [f64],
    zero_modes: &'a [usize],
    identities: planar::IdentityReport,
    omega_c_eff: f64,
}

#[derive(Serialize, Deserialize)]
pub struct PlanarModeFile {
    pub basis: PlanarBasis,
    pub modes: PlanarModes,
}

#[derive(Serialize, Deserialize)]
pub struct JMatrixFile {
    pub coupling: CouplingMatrix,
    /// Value of one internal coupling unit F_O^2 / (4 m omega_z^2) [J].
    pub unit_joules: f64,
    pub units: String,
    pub mu: f64,
    pub branch: String,
}

fn cmd_seed(run: &mut Run, common: &Common) -> Result<()> {
    let cfg = require_config(run, common)?;
    let spacing = match common.seed_spacing {
        Some(s) => s,
        None => default_spacing(&cfg)?,
    };
    let seed = generate_seed(&cfg, spacing)?;
    run.stage("seed");
    run.write("seed.csv", positions_csv(&seed.positions).as_bytes())?;
    run.write_json("seed.json", &seed)
}

fn cmd_equilibrium(run: &mut Run, common: &Common) -> Result<()> {
    let cfg = require_config(run, common)?;
    let crystal = solve_crystal(run, &cfg, common)?;
    let mut csv = String::from("index,x_l0,y_l0,r_l0,phi_rad\n");
    for (i, (p, q)) in crystal.positions.iter().zip(&crystal.polar).enumerate() {
        let _ = writeln!(csv, "{i},{},{},{},{}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(q.radius), fmt_f64(q.phase));
    }
    run.write("positions.csv", csv.as_bytes())?;
    run.write_json("crystal.json", &crystal)?;
    run.write_json("config.json", run.config.clone().as_ref().expect("config loaded"))
}

fn load_or_solve_crystal(run: &mut Run, cfg: &TrapConfig, common: &Common, path: Option<&PathBuf>) -> Result<Crystal> {
    match path {
        Some(p) => {
            let c: Crystal = run.read_json(p)?;
            if c.len() != cfg.n_ions {
                return Err(Error::Config(format!("{} holds {} ions, config has {}", p.display(), c.len(), cfg.n_ions)));
            }
            Ok(c)
        }
        None => solve_crystal(run, cfg, common),
    }
}

fn cmd_modes(
    run: &mut Run,
    common: &Common,
    branch: Branch,
    crystal_path: Option<&PathBuf>,
    frames: usize,
    frame_modes: &[usize],
    amplitude: f64,
) -> Result<()> {
    let cfg = require_config(run, common)?;
    let crystal = load_or_solve_crystal(run, &cfg, common, crystal_path)?;
    run.write_json("crystal.json", &crystal)?;
    run.write_json("config.json", run.config.clone().as_ref().expect("config loaded"))?;
    match branch {
        Branch::Axial => {
            let modes = axial_modes(&crystal)?;
            run.stage("axial modes");
            let mut csv = String::from("mode,frequency,imaginary,eigenvalue\n");
            for nu in 0..modes.len() {
                let _ = writeln!(
                    csv,
                    "{nu},{},{},{}",
                    fmt_f64(modes.frequencies[nu]),
                    modes.imaginary[nu],
                    fmt_f64(modes.eigenvalues[nu])
                );
            }
            run.write("axial_frequencies.csv", csv.as_bytes())?;
            run.write("axial_vectors.csv", matrix_csv(&modes.eigenvectors).as_bytes())?;
            let summary = AxialSummary {
                n_ions: modes.len(),
                frequencies: &modes.frequencies,
                imaginary: &modes.imaginary,
                stable: modes.stable,
                max_frequency: modes.frequencies.iter().copied().fold(0.0, f64::max),
                min_eigenvalue: modes.min_eigenvalue(),
            };
            run.write_json("axial_summary.json", &summary)?;
            run.write_json("axial_modes.json", &modes)
        }
        Branch::Planar => {
            let basis = planar::build_planar_basis(&crystal, &cfg)?;
            let gyro = planar::build_gyro(&basis, &cfg)?;
            let modes = planar::solve_qep(&basis, &gyro)?;
            run.stage("planar modes");
            let identities = planar::verify_identities(&modes, &basis, &gyro);
            let mut csv = String::from("mode,branch,frequency\n");
            for (l, w) in modes.frequencies.iter().enumerate() {
                let b = if l < modes.branch_split { "lower" } else { "upper" };
                let _ = writeln!(csv, "{l},{b},{}", fmt_f64(*w));
            }
            run.write("planar_frequencies.csv", csv.as_bytes())?;
            let amps = modes.site_amplitudes(&basis).map(|c| c.norm());
            run.write("planar_amplitudes.csv", matrix_csv(&amps).as_bytes())?;
            let summary = PlanarSummary {
                n_ions: crystal.len(),
                lower_branch: modes.lower_branch(),
                upper_branch: modes.upper_branch(),
                zero_modes: &modes.zero_modes,
                identities,
                omega_c_eff: gyro.omega_c_eff,
            };
            run.write_json("planar_summary.json", &summary)?;
            if frames > 0 {
                write_frames(run, &modes, &basis, &crystal, frames, frame_modes, amplitude)?;
            }
            run.write_json("planar_modes.json", &PlanarModeFile { basis, modes })
        }
    }
}

/// One period of the coherent displacement, phase -pi/2 so frame 0 is the
/// real part of the amplitude.
fn write_frames(
    run: &mut Run,
    modes: &PlanarModes,
    basis: &PlanarBasis,
    crystal: &Crystal,
    frames: usize,
    which: &[usize],
    amplitude: f64,
) -> Result<()> {
    for &lambda in which {
        if lambda >= modes.len() {
            return Err(Error::ModeIndex { index: lambda, count: modes.len() });
        }
        let w = modes.frequencies[lambda];
        let period = if w > 0.0 { 2.0 * PI / w } else { 0.0 };
        let mut csv = String::from("frame,t,ion,x_l0,y_l0\n");
        for f in 0..frames {
            let t = period * f as f64 / frames as f64;
            let d = planar::coherent_displacement(modes, basis, lambda, amplitude, -PI / 2.0, t)?;
            for (j, (p, dp)) in crystal.positions.iter().zip(&d).enumerate() {
                let _ = writeln!(csv, "{f},{},{j},{},{}", fmt_f64(t), fmt_f64(p.x + dp.x), fmt_f64(p.y + dp.y));
            }
        }
        run.write(&format!("frames_mode{lambda}.csv"), csv.as_bytes())?;
    }
    Ok(())
}

struct JArgs<'a> {
    branch: Branch,
    modes: Option<&'a PathBuf>,
    mu: Option<f64>,
    delta: Option<f64>,
    midgap: Option<usize>,
    time: Option<f64>,
    force: f64,
    delta_k: f64,
    phase: PhaseArg,
}

fn cmd_jmatrix(run: &mut Run, common: &Common, a: JArgs) -> Result<()> {
    let (cfg, crystal) = match a.modes {
        Some(dir) => {
            let file: ConfigFile = run.read_json(&dir.join("config.json"))?;
            let cfg = file.to_trap()?;
            run.config = Some(file);
            let crystal: Crystal = run.read_json(&dir.join("crystal.json"))?;
            (cfg, crystal)
        }
        None => {
            let cfg = require_config(run, common)?;
            let crystal = solve_crystal(run, &cfg, common)?;
            (cfg, crystal)
        }
    };
    if a.branch == Branch::Planar && (a.delta.is_some() || a.midgap.is_some() || a.time.is_some()) {
        return Err(Error::Parameter("--delta, --midgap and --time apply to the axial branch only".into()));
    }
    let matrix = match a.branch {
        Branch::Axial => {
            let modes: AxialModes = match a.modes {
                Some(dir) => run.read_json(&dir.join("axial_modes.json"))?,
                None => axial_modes(&crystal)?,
            };
            let com = modes.frequencies.iter().copied().fold(0.0, f64::max);
            let mu = match (a.mu, a.delta, a.midgap) {
                (Some(mu), None, None) => mu,
                (None, Some(d), None) => com + d,
                (None, None, Some(k)) => couplings::midgap_detuning(&modes, k)?,
                _ => return Err(Error::Parameter("give exactly one of --mu, --delta, --midgap".into())),
            };
            let drive = DriveConfig::axial(a.force, mu);
            match a.time {
                Some(t) => couplings::axial_j_time(&modes, &drive, t)?,
                None => couplings::axial_j_static(&modes, &drive)?,
            }
        }
        Branch::Planar => {
            let mu = a.mu.ok_or_else(|| Error::Parameter("planar couplings need --mu".into()))?;
            let (basis, modes) = match a.modes {
                Some(dir) => {
                    let f: PlanarModeFile = run.read_json(&dir.join("planar_modes.json"))?;
                    (f.basis, f.modes)
                }
                None => planar::planar_modes(&crystal, &cfg)?,
            };
            let mut drive = DriveConfig::planar(a.force, mu, a.delta_k);
            drive.phase = match a.phase {
                PhaseArg::Laser => PhaseConvention::LaserPhase,
                PhaseArg::Polar => PhaseConvention::PolarAngle,
            };
            couplings::planar_j_static(&modes, &basis, &crystal, &drive)?
        }
    };
    run.stage("couplings");
    run.write("jmatrix.csv", matrix_csv(&matrix.j).as_bytes())?;
    let file = JMatrixFile {
        unit_joules: matrix.unit(&cfg),
        units: "F_O^2 / (4 m omega_z^2)".into(),
        mu: matrix.drive.mu,
        branch: format!("{:?}", a.branch).to_lowercase(),
        coupling: matrix,
    };
    run.write_json("jmatrix.json", &file)?;
    run.write_json("crystal.json", &crystal)?;
    run.write_json("config.json", run.config.clone().as_ref().expect("config loaded"))
}

fn load_jmatrix(run: &mut Run, dir: &Path) -> Result<(JMatrixFile, Crystal)> {
    let j: JMatrixFile = run.read_json(&dir.join("jmatrix.json"))?;
    let c: Crystal = run.read_json(&dir.join("crystal.json"))?;
    if let Ok(file) = run.read_json::<ConfigFile>(&dir.join("config.json")) {
        run.config = Some(file);
    }
    if j.coupling.n() != c.len() {
        return Err(Error::Config("jmatrix.json and crystal.json disagree on N".into()));
    }
    Ok((j, c))
}

fn window(r_min: Option<f64>, r_max: Option<f64>) -> Option<(f64, f64)> {
    (r_min.is_some() || r_max.is_some()).then(|| (r_min.unwrap_or(0.0), r_max.unwrap_or(f64::INFINITY)))
}

fn cmd_fit(run: &mut Run, dir: &Path, r_min: Option<f64>, r_max: Option<f64>, bins: usize) -> Result<()> {
    let (j, crystal) = load_jmatrix(run, dir)?;
    let pairs = stats::distance_pairs(&j.coupling, &crystal)?;
    let mut csv = String::from("r_l0,j\n");
    for (r, v) in &pairs {
        let _ = writeln!(csv, "{},{}", fmt_f64(*r), fmt_f64(*v));
    }
    run.write("pairs.csv", csv.as_bytes())?;
    let fit = stats::fit_power_law_pairs(&pairs, window(r_min, r_max), bins)?;
    run.stage("fit");
    run.write_json("fit.json", &fit)
}

fn cmd_hist(run: &mut Run, dir: &Path, bins: usize, range: RangeArg, lo: Option<f64>, hi: Option<f64>) -> Result<()> {
    let (j, _) = load_jmatrix(run, dir)?;
    let policy = match range {
        RangeArg::Full => RangePolicy::Full,
        RangeArg::Symmetric => RangePolicy::Symmetric,
        RangeArg::Fixed => match (lo, hi) {
            (Some(lo), Some(hi)) if hi > lo => RangePolicy::Fixed { lo, hi },
            _ => return Err(Error::Parameter("--range fixed needs --lo < --hi".into())),
        },
    };
    let h = stats::histogram(&j.coupling, bins, policy)?;
    let mut csv = String::from("lo,hi,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{c}", fmt_f64(h.edges[k]), fmt_f64(h.edges[k + 1]));
    }
    run.write("hist.csv", csv.as_bytes())?;
    run.write_json("hist.json", &h)
}

fn cmd_corr(run: &mut Run, dir: &Path, reference: Option<usize>) -> Result<()> {
    let (j, crystal) = load_jmatrix(run, dir)?;
    let reference = match reference {
        Some(r) => r,
        None => (0..crystal.len())
            .min_by(|&a, &b| crystal.polar[a].radius.total_cmp(&crystal.polar[b].radius))
            .ok_or_else(|| Error::Parameter("empty crystal".into()))?,
    };
    let shells = stats::angular_correlation(&j.coupling, &crystal, reference)?;
    let mut csv = String::from("shell,shell_radius_l0,ion,theta_rad,j\n");
    for (s, shell) in shells.iter().enumerate() {
        for p in &shell.points {
            let _ = writeln!(csv, "{s},{},{},{},{}", fmt_f64(shell.radius), p.ion, fmt_f64(p.theta), fmt_f64(p.j));
        }
    }
    run.write("corr.csv", csv.as_bytes())?;
    #[derive(Serialize)]
    struct Corr<'a> {
        reference: usize,
        subshells: &'a [stats::Subshell],
    }
    run.write_json("corr.json", &Corr { reference, subshells: &shells })
}

fn scan_csv(r: &ScanResult) -> String {
    let mut s = format!("{},{},flag\n", r.parameter, r.columns.join(","));
    for p in &r.points {
        let vals: Vec<String> = p.values.iter().map(|v| fmt_f64(*v)).collect();
        let flag = p.flag.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(s, "{},{},{flag}", fmt_f64(p.parameter), vals.join(","));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    run: &mut Run,
    common: &Common,
    kind: ScanType,
    n: Option<&str>,
    omegas: &[f64],
    deltas: &[f64],
    opts: ScanOptions,
    r_window: Option<(f64, f64)>,
) -> Result<()> {
    let cfg = require_config(run, common)?;
    opts.validate()?;
    let result = match kind {
        ScanType::OneToTwo => match n {
            Some(text) => scan::scan_one_to_two(&cfg, &parse_n_list(text)?, &opts, common.workers)?,
            None => scan::one_to_two_at(&cfg, &opts)?,
        },
        ScanType::BandOverlap => scan::scan_band_overlap(&cfg, &opts)?,
        ScanType::Distortion => {
            if omegas.is_empty() {
                return Err(Error::Parameter("distortion scan needs --omegas".into()));
            }
            scan::scan_distortion(&cfg, omegas, &opts, common.workers)?
        }
        ScanType::Powerlaw => {
            if deltas.is_empty() {
                return Err(Error::Parameter("power-law scan needs --deltas".into()));
            }
            let crystal = scan::relax(&cfg, opts.seed_spacing, &opts.solver)?;
            scan::scan_powerlaw(&crystal, &cfg, deltas, r_window, common.workers)?
        }
    };
    run.stage("scan");
    run.write("scan.csv", scan_csv(&result).as_bytes())?;
    run.write_json("scan.json", &result)
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let arguments = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, arguments) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

pub fn execute(cli: Cli, arguments: Vec<String>) -> Result<()> {
    let common = cli.common;
    let solver = solver_options(&common)?;
    if common.workers > 0 && !matches!(cli.command, Command::Scan { .. }) {
        log::info!("--workers only affects scan");
    }
    fs::create_dir_all(&common.out)?;
    let subcommand = format!("{:?}", cli.command).split([' ', '{']).next().unwrap_or("").to_lowercase();
    let mut run = Run {
        out: common.out.clone(),
        subcommand,
        arguments,
        config: None,
        tolerances: Tolerances {
            equilibrium_tol: solver.tol,
            max_iterations: solver.max_iterations,
            saddle_tolerance: solver.saddle_tolerance,
            resonance_guard: couplings::RESONANCE_GUARD,
            zero_mode_tol: planar::ZERO_MODE_TOL,
            degeneracy_tol: crate::axial::DEGENERACY_TOL,
        },
        inputs: Vec::new(),
        outputs: Vec::new(),
        timings: Vec::new(),
        clock: Instant::now(),
    };
    match &cli.command {
        Command::Seed => cmd_seed(&mut run, &common)?,
        Command::Equilibrium => cmd_equilibrium(&mut run, &common)?,
        Command::Modes { branch, crystal, frames, frame_modes, amplitude } => {
            cmd_modes(&mut run, &common, *branch, crystal.as_ref(), *frames, frame_modes, *amplitude)?
        }
        Command::Jmatrix { branch, modes, mu, delta, midgap, time, force, delta_k, phase } => cmd_jmatrix(
            &mut run,
            &common,
            JArgs {
                branch: *branch,
                modes: modes.as_ref(),
                mu: *mu,
                delta: *delta,
                midgap: *midgap,
                time: *time,
                force: *force,
                delta_k: *delta_k,
                phase: *phase,
            },
        )?,
        Command::Scan { kind, n, omegas, deltas, resolution, start, upper, r_min, r_max } => {
            let opts = ScanOptions {
                start: *start,
                upper: *upper,
                resolution: *resolution,
                seed_spacing: common.seed_spacing,
                solver,
                ..Default::default()
            };
            cmd_scan(&mut run, &common, *kind, n.as_deref(), omegas, deltas, opts, window(*r_min, *r_max))?
        }
        Command::Fit { jmatrix, r_min, r_max, bins } => cmd_fit(&mut run, jmatrix, *r_min, *r_max, *bins)?,
        Command::Hist { jmatrix, bins, range, lo, hi } => cmd_hist(&mut run, jmatrix, *bins, *range, *lo, *hi)?,
        Command::Corr { jmatrix, reference } => cmd_corr(&mut run, jmatrix, *reference)?,
    }
    run.finish()
}
