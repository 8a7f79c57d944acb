//! Parameter scans: plane-transition and band-overlap bisection, distortion
//! and power-law exponent sweeps.
//!
//! Every probe re-solves the equilibrium from a fresh seed, so a point depends
//! only on its own parameters and results do not depend on worker scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axial::{axial_modes, min_kzz_eigenvalue};
use crate::couplings::{axial_j_static, DriveConfig};
use crate::equilibrium::{find_equilibrium, Crystal, SolverOptions};
use crate::error::{Error, Result};
use crate::params::{Rotation, TrapConfig};
use crate::planar::planar_modes;
use crate::seedlat::{default_spacing, generate_seed};

use super::shape::distortion_ratio;
use super::stats::fit_power_law;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    OneToTwo,
    BandOverlap,
    PowerlawVsDetuning,
    Distortion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Value of the swept parameter.
    pub parameter: f64,
    /// One entry per [`ScanResult::columns`]; NaN where a flagged point has no value.
    pub values: Vec<f64>,
    /// Set when the pipeline failed at this point.
    pub flag: Option<String>,
}

/// Interval [lo, hi] with f(lo) > 0 >= f(hi).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub kind: ScanKind,
    /// Name of the swept parameter.
    pub parameter: String,
    pub columns: Vec<String>,
    /// Sorted by strictly increasing parameter.
    pub points: Vec<ScanPoint>,
    pub omega_wall: f64,
    /// Ion number, or `None` for scans over N.
    pub n_ions: Option<usize>,
    /// Final bracket of a bisection scan at fixed N.
    pub bracket: Option<Bracket>,
}

impl ScanResult {
    /// Midpoint of the final bracket.
    pub fn crossing(&self) -> Option<f64> {
        self.bracket.map(|b| b.midpoint())
    }

    fn sort(&mut self) {
        self.points.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
        self.points.dedup_by(|a, b| a.parameter == b.parameter);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// First omega_eff probed [omega_z].
    pub start: f64,
    /// Factor between coarse probes.
    pub growth: f64,
    /// Largest omega_eff probed; capped by the attainable maximum.
    pub upper: f64,
    /// Bisection stops once the bracket is narrower than this [omega_z].
    pub resolution: f64,
    /// Explicit seed spacing [l0]; the default scale when `None`.
    pub seed_spacing: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            start: 0.1,
            growth: 1.25,
            upper: 2.0,
            resolution: 1e-4,
            seed_spacing: None,
            solver: SolverOptions::default(),
        }
    }
}

impl ScanOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::Parameter(format!("resolution must be > 0, got {}", self.resolution)));
        }
        if !(self.start > 0.0 && self.growth > 1.0 && self.upper > self.start) {
            return Err(Error::Parameter("need start > 0, growth > 1 and upper > start".into()));
        }
        Ok(())
    }
}

/// Seed and relax one configuration.
pub fn relax(config: &TrapConfig, seed_spacing: Option<f64>, solver: &SolverOptions) -> Result<Crystal> {
    let spacing = match seed_spacing {
        Some(s) => s,
        None => default_spacing(config)?,
    };
    let seed = generate_seed(config, spacing)?;
    find_equilibrium(&seed, config, solver)
}

fn at_omega_eff(base: &TrapConfig, weff: f64) -> TrapConfig {
    base.clone().with_rotation(Rotation::EffectiveFrequency(weff))
}

fn signed_sqrt(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

/// Walk up a geometric grid until `f` turns non-positive, then bisect.
/// Failed probes are flagged and skipped on the grid; a failure during
/// bisection ends the search with the last valid bracket.
fn bracket_and_bisect<F>(
    f: F,
    opts: &ScanOptions,
    upper: f64,
    columns: usize,
) -> (Vec<ScanPoint>, Option<Bracket>)
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let mut probes = Vec::new();
    let mut probe = |w: f64| -> Option<f64> {
        match f(w) {
            Ok(v) => {
                let key = v[0];
                probes.push(ScanPoint { parameter: w, values: v, flag: None });
                Some(key)
            }
            Err(e) => {
                log::warn!("probe at omega_eff = {w} failed: {e}");
                probes.push(ScanPoint { parameter: w, values: vec![f64::NAN; columns], flag: Some(e.to_string()) });
                None
            }
        }
    };
    let mut last_positive: Option<(f64, f64)> = None;
    let mut bracket = None;
    let mut w = opts.start;
    while w <= upper {
        if let Some(v) = probe(w) {
            if v > 0.0 {
                last_positive = Some((w, v));
            } else if let Some((lo, f_lo)) = last_positive {
                bracket = Some(Bracket { lo, hi: w, f_lo, f_hi: v });
                break;
            }
        }
        w *= opts.growth;
    }
    let Some(mut b) = bracket else { return (probes, None) };
    while b.hi - b.lo > opts.resolution {
        let mid = b.midpoint();
        match probe(mid) {
            Some(v) if v > 0.0 => {
                b.lo = mid;
                b.f_lo = v;
            }
            Some(v) => {
                b.hi = mid;
                b.f_hi = v;
            }
            None => break,
        }
    }
    (probes, Some(b))
}

/// Signed square root of the smallest K^zz eigenvalue; negative once an
/// axial mode is imaginary.
pub fn min_axial_signed(config: &TrapConfig, opts: &ScanOptions) -> Result<f64> {
    let crystal = relax(config, opts.seed_spacing, &opts.solver)?;
    Ok(signed_sqrt(min_kzz_eigenvalue(&crystal.positions)?))
}

/// Plane-transition frequency omega_12 at fixed N: the omega_eff at which the
/// smallest axial eigenvalue changes sign. Probes are the returned points.
pub fn one_to_two_at(base: &TrapConfig, opts: &ScanOptions) -> Result<ScanResult> {
    opts.validate()?;
    let upper = opts.upper.min(base.max_omega_eff());
    let (points, bracket) = bracket_and_bisect(
        |w| min_axial_signed(&at_omega_eff(base, w), opts).map(|v| vec![v]),
        opts,
        upper,
        1,
    );
    let mut out = ScanResult {
        kind: ScanKind::OneToTwo,
        parameter: "omega_eff".into(),
        columns: vec!["min_axial_signed".into()],
        points,
        omega_wall: base.omega_wall,
        n_ions: Some(base.n_ions),
        bracket,
    };
    out.sort();
    Ok(out)
}

/// omega_12 for every N in `n_list`, one row per N: (omega_12, bracket lo,
/// bracket hi). N without a crossing below the upper limit is flagged.
pub fn scan_one_to_two(
    base: &TrapConfig,
    n_list: &[usize],
    opts: &ScanOptions,
    workers: usize,
) -> Result<ScanResult> {
    opts.validate()?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let run = || {
        ns.par_iter()
            .map(|&n| {
                let cfg = base.clone().with_n_ions(n);
                let point = |values, flag| ScanPoint { parameter: n as f64, values, flag };
                match one_to_two_at(&cfg, opts) {
                    Ok(ScanResult { bracket: Some(b), .. }) => point(vec![b.midpoint(), b.lo, b.hi], None),
                    Ok(_) => point(vec![f64::NAN; 3], Some("no sign change below the upper limit".into())),
                    Err(e) => point(vec![f64::NAN; 3], Some(e.to_string())),
                }
            })
            .collect::<Vec<_>>()
    };
    let points = with_workers(workers, run)?;
    let mut out = ScanResult {
        kind: ScanKind::OneToTwo,
        parameter: "n_ions".into(),
        columns: vec!["omega_12".into(), "bracket_lo".into(), "bracket_hi".into()],
        points,
        omega_wall: base.omega_wall,
        n_ions: None,
        bracket: None,
    };
    out.sort();
    Ok(out)
}

/// (gap, min axial signed, max lower-branch planar) at one configuration.
pub fn band_gap(config: &TrapConfig, opts: &ScanOptions) -> Result<Vec<f64>> {
    let crystal = relax(config, opts.seed_spacing, &opts.solver)?;
    let axial = signed_sqrt(min_kzz_eigenvalue(&crystal.positions)?);
    let (_, modes) = planar_modes(&crystal, config)?;
    let planar = modes.lower_branch().iter().copied().fold(0.0, f64::max);
    Ok(vec![axial - planar, axial, planar])
}

/// omega_eff at which the lowest axial frequency meets the top of the
/// low-frequency planar branch.
pub fn scan_band_overlap(base: &TrapConfig, opts: &ScanOptions) -> Result<ScanResult> {
    opts.validate()?;
    let upper = opts.upper.min(base.max_omega_eff());
    let (points, bracket) = bracket_and_bisect(|w| band_gap(&at_omega_eff(base, w), opts), opts, upper, 3);
    let mut out = ScanResult {
        kind: ScanKind::BandOverlap,
        parameter: "omega_eff".into(),
        columns: vec!["gap".into(), "min_axial_signed".into(), "max_planar_lower".into()],
        points,
        omega_wall: base.omega_wall,
        n_ions: Some(base.n_ions),
        bracket,
    };
    out.sort();
    Ok(out)
}

/// Boundary aspect ratio over a list of omega_eff values.
pub fn scan_distortion(base: &TrapConfig, omegas: &[f64], opts: &ScanOptions, workers: usize) -> Result<ScanResult> {
    let points = with_workers(workers, || {
        omegas
            .par_iter()
            .map(|&w| {
                let r = relax(&at_omega_eff(base, w), opts.seed_spacing, &opts.solver)
                    .and_then(|c| distortion_ratio(&c));
                match r {
                    Ok(v) => ScanPoint { parameter: w, values: vec![v], flag: None },
                    Err(e) => ScanPoint { parameter: w, values: vec![f64::NAN], flag: Some(e.to_string()) },
                }
            })
            .collect::<Vec<_>>()
    })?;
    let mut out = ScanResult {
        kind: ScanKind::Distortion,
        parameter: "omega_eff".into(),
        columns: vec!["aspect_ratio".into()],
        points,
        omega_wall: base.omega_wall,
        n_ions: Some(base.n_ions),
        bracket: None,
    };
    out.sort();
    Ok(out)
}

/// Axial power-law exponent for beatnotes mu = omega_COM + delta.
/// Frustrated matrices are flagged rather than fitted.
pub fn scan_powerlaw(
    crystal: &Crystal,
    config: &TrapConfig,
    deltas: &[f64],
    r_window: Option<(f64, f64)>,
    workers: usize,
) -> Result<ScanResult> {
    let modes = axial_modes(crystal)?;
    let com = modes.frequencies.iter().copied().fold(0.0, f64::max);
    let points = with_workers(workers, || {
        deltas
            .par_iter()
            .map(|&d| {
                let fit = axial_j_static(&modes, &DriveConfig::axial(1.0, com + d))
                    .and_then(|j| fit_power_law(&j, crystal, r_window));
                match fit {
                    Ok(f) => ScanPoint {
                        parameter: d,
                        values: vec![f.exponent, f.prefactor, f.r_squared, f.fraction_of_pairs],
                        flag: None,
                    },
                    Err(e) => ScanPoint { parameter: d, values: vec![f64::NAN; 4], flag: Some(e.to_string()) },
                }
            })
            .collect::<Vec<_>>()
    })?;
    let mut out = ScanResult {
        kind: ScanKind::PowerlawVsDetuning,
        parameter: "delta".into(),
        columns: vec!["alpha".into(), "prefactor".into(), "r_squared".into(), "fraction_of_pairs".into()],
        points,
        omega_wall: config.omega_wall,
        n_ions: Some(config.n_ions),
        bracket: None,
    };
    out.sort();
    Ok(out)
}

/// Run `f` on a pool of `workers` threads; 0 means rayon's default.
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    F: FnOnce() -> T + Send,
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ion_transition_matches_tilt_closed_form() {
        for ww in [0.0, 0.04] {
            let base = TrapConfig::beryllium(2, ww, 0.3);
            let opts = ScanOptions { resolution: 1e-7, ..Default::default() };
            let r = one_to_two_at(&base, &opts).unwrap();
            let b = r.bracket.unwrap();
            let expected = (1.0 + ww * ww).sqrt();
            assert!(b.lo <= expected + 1e-9 && expected <= b.hi + 1e-9, "{b:?}");
            assert!(b.f_lo > 0.0 && b.f_hi <= 0.0);
            let grid: Vec<f64> = r.points.iter().map(|p| p.parameter).collect();
            assert!(grid.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_ion_never_overlaps() {
        let base = TrapConfig::beryllium(1, 0.0, 0.3);
        let r = scan_band_overlap(&base, &ScanOptions::default()).unwrap();
        assert!(r.bracket.is_none());
        assert!(r.points.iter().all(|p| p.values[0] > 0.0));
        let axial = r.points[0].values[1];
        assert!((axial - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transition_falls_with_n() {
        let base = TrapConfig::beryllium(2, 0.04, 0.3);
        let opts = ScanOptions { resolution: 1e-3, ..Default::default() };
        let r = scan_one_to_two(&base, &[10, 2, 5], &opts, 2).unwrap();
        assert_eq!(r.points.len(), 3);
        let w: Vec<f64> = r.points.iter().map(|p| p.values[0]).collect();
        assert!(r.points.iter().all(|p| p.flag.is_none()));
        assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
    }

    #[test]
    fn bad_resolution_rejected() {
        let base = TrapConfig::beryllium(2, 0.04, 0.3);
        let opts = ScanOptions { resolution: 0.0, ..Default::default() };
        assert!(matches!(one_to_two_at(&base, &opts), Err(Error::Parameter(_))));
    }

    #[test]
    fn distortion_grows_as_rotation_weakens() {
        let base = TrapConfig::beryllium(19, 0.04, 0.3);
        let r = scan_distortion(&base, &[0.08, 0.12, 0.2], &ScanOptions::default(), 1).unwrap();
        let v: Vec<f64> = r.points.iter().map(|p| p.values[0]).collect();
        assert!(v[0] > v[1] && v[1] > v[2] && v[2] >= 1.0, "{v:?}");
    }
}
