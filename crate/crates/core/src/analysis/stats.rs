//! Statistics of coupling matrices: power-law fits, histograms and angular structure.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::couplings::CouplingMatrix;
use crate::equilibrium::Crystal;
use crate::error::{Error, Result};

/// Majority-sign fraction required before a power law is fitted.
pub const MAJORITY_THRESHOLD: f64 = 0.9;
/// Bins with fewer pairs are ignored by the fit.
pub const MIN_PAIRS_PER_BIN: usize = 5;
pub const DEFAULT_FIT_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// alpha in |J| ~ prefactor * r^-alpha.
    pub exponent: f64,
    pub prefactor: f64,
    /// Range of pair distances that entered the fit [l0].
    pub r_range: (f64, f64),
    /// Fitted pairs over all off-diagonal pairs.
    pub fraction_of_pairs: f64,
    /// R^2 of the binned log-log regression.
    pub r_squared: f64,
    pub bins_used: usize,
    /// +1 or -1: the sign shared by the fitted couplings.
    pub majority_sign: f64,
}

/// Fit |J| ~ r^-alpha to (r, J) pairs using log-spaced bins and geometric means.
pub fn fit_power_law_pairs(
    pairs: &[(f64, f64)],
    r_window: Option<(f64, f64)>,
    n_bins: usize,
) -> Result<PowerLawFit> {
    if n_bins < 2 {
        return Err(Error::Parameter("power-law fit needs at least 2 bins".into()));
    }
    let total = pairs.len();
    let positive = pairs.iter().filter(|p| p.1 > 0.0).count();
    let negative = pairs.iter().filter(|p| p.1 < 0.0).count();
    if total == 0 {
        return Err(Error::Parameter("no pairs to fit".into()));
    }
    let majority = positive.max(negative) as f64 / total as f64;
    if majority <= MAJORITY_THRESHOLD {
        return Err(Error::Frustrated { majority_fraction: majority });
    }
    let sign = if positive >= negative { 1.0 } else { -1.0 };
    let (wlo, whi) = r_window.unwrap_or((0.0, f64::INFINITY));
    let used: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.1 * sign > 0.0 && p.0 > 0.0 && p.0 >= wlo && p.0 <= whi)
        .map(|p| (p.0, p.1.abs()))
        .collect();
    if used.len() < 2 * MIN_PAIRS_PER_BIN {
        return Err(Error::Parameter(format!("only {} pairs inside the fit window", used.len())));
    }
    let rmin = used.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let rmax = used.iter().map(|p| p.0).fold(0.0, f64::max);
    let (l0, l1) = (rmin.ln(), rmax.ln());
    let width = ((l1 - l0) / n_bins as f64).max(f64::MIN_POSITIVE);
    let mut sums = vec![(0.0, 0.0, 0usize); n_bins];
    for &(r, j) in &used {
        let b = (((r.ln() - l0) / width) as usize).min(n_bins - 1);
        sums[b].0 += r.ln();
        sums[b].1 += j.ln();
        sums[b].2 += 1;
    }
    let points: Vec<(f64, f64)> = sums
        .iter()
        .filter(|s| s.2 >= MIN_PAIRS_PER_BIN)
        .map(|s| (s.0 / s.2 as f64, s.1 / s.2 as f64))
        .collect();
    if points.len() < 2 {
        return Err(Error::Parameter("fewer than 2 populated bins".into()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all bins at the same distance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(PowerLawFit {
        exponent: -slope,
        prefactor: intercept.exp(),
        r_range: (rmin, rmax),
        fraction_of_pairs: used.len() as f64 / total as f64,
        r_squared,
        bins_used: points.len(),
        majority_sign: sign,
    })
}

/// (distance, J_ij) for every pair i < j.
pub fn distance_pairs(j: &CouplingMatrix, crystal: &Crystal) -> Result<Vec<(f64, f64)>> {
    if j.n() != crystal.len() {
        return Err(Error::Parameter("coupling matrix and crystal sizes differ".into()));
    }
    Ok(j.off_diagonal().into_iter().map(|(a, b, v)| (crystal.distance(a, b), v)).collect())
}

pub fn fit_power_law(
    j: &CouplingMatrix,
    crystal: &Crystal,
    r_window: Option<(f64, f64)>,
) -> Result<PowerLawFit> {
    fit_power_law_pairs(&distance_pairs(j, crystal)?, r_window, DEFAULT_FIT_BINS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum RangePolicy {
    /// [min J, max J] of the off-diagonal entries.
    Full,
    /// [-max |J|, max |J|].
    Symmetric,
    Fixed { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// bins + 1 ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Pairs inside [edges[0], edges[bins]] over all pairs.
    pub fraction_in_range: f64,
    pub mean: f64,
    pub mean_abs: f64,
    /// |mean| / mean(|J|); 0 for a histogram symmetric about zero.
    pub asymmetry: f64,
}

/// Histogram of off-diagonal couplings, diagonal excluded.
pub fn histogram_values(values: &[f64], bins: usize, policy: RangePolicy) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::Parameter("histogram needs at least 2 bins".into()));
    }
    if values.is_empty() {
        return Err(Error::Parameter("no couplings to histogram".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let big = min.abs().max(max.abs());
    let (lo, hi) = match policy {
        RangePolicy::Full => (min, max),
        RangePolicy::Symmetric => (-big, big),
        RangePolicy::Fixed { lo, hi } => (lo, hi),
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0usize; bins];
    let mut inside = 0usize;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        inside += 1;
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / n;
    let asymmetry = if mean_abs > 0.0 { mean.abs() / mean_abs } else { 0.0 };
    Ok(Histogram { edges, counts, fraction_in_range: inside as f64 / n, mean, mean_abs, asymmetry })
}

pub fn histogram(j: &CouplingMatrix, bins: usize, policy: RangePolicy) -> Result<Histogram> {
    let values: Vec<f64> = j.off_diagonal().into_iter().map(|e| e.2).collect();
    histogram_values(&values, bins, policy)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPoint {
    pub ion: usize,
    /// Polar angle around the reference ion in [0, 2 pi).
    pub theta: f64,
    pub j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subshell {
    /// Mean distance from the reference ion [l0].
    pub radius: f64,
    /// Points sorted by theta.
    pub points: Vec<ShellPoint>,
}

/// Median over ions of the distance to the closest other ion.
pub fn median_nearest_neighbor(crystal: &Crystal) -> f64 {
    let n = crystal.len();
    let mut d: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| crystal.distance(i, k))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    if d.is_empty() {
        0.0
    } else if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    }
}

/// Group ions into subshells of similar distance from `reference`, splitting
/// where consecutive distances differ by more than a quarter of the median
/// nearest-neighbor spacing, and list J_{i,ref} against polar angle.
pub fn angular_correlation(j: &CouplingMatrix, crystal: &Crystal, reference: usize) -> Result<Vec<Subshell>> {
    let n = crystal.len();
    if reference >= n {
        return Err(Error::ModeIndex { index: reference, count: n });
    }
    if j.n() != n {
        return Err(Error::Parameter("coupling matrix and crystal sizes differ".into()));
    }
    let gap = 0.25 * median_nearest_neighbor(crystal);
    let origin = crystal.positions[reference];
    let mut others: Vec<(f64, ShellPoint)> = (0..n)
        .filter(|&i| i != reference)
        .map(|i| {
            let d = crystal.positions[i] - origin;
            let theta = d.y.atan2(d.x).rem_euclid(2.0 * PI);
            (d.norm(), ShellPoint { ion: i, theta, j: j.j[(i, reference)] })
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.ion.cmp(&b.1.ion)));
    let mut shells: Vec<(Vec<f64>, Vec<ShellPoint>)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (r, p) in others {
        if shells.is_empty() || r - last > gap {
            shells.push((Vec::new(), Vec::new()));
        }
        let s = shells.last_mut().expect("just pushed");
        s.0.push(r);
        s.1.push(p);
        last = r;
    }
    Ok(shells
        .into_iter()
        .map(|(radii, mut points)| {
            points.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.ion.cmp(&b.ion)));
            Subshell { radius: radii.iter().sum::<f64>() / radii.len() as f64, points }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(alpha: f64) -> Vec<(f64, f64)> {
        (0..400).map(|k| {
            let r = 1.0 + 0.05 * k as f64;
            (r, 3.0 * r.powf(-alpha))
        }).collect()
    }

    #[test]
    fn planted_power_laws() {
        for alpha in [1.0, 2.0, 3.0] {
            let f = fit_power_law_pairs(&planted(alpha), None, DEFAULT_FIT_BINS).unwrap();
            assert!((f.exponent - alpha).abs() < 0.01 * alpha, "{f:?}");
            assert!((f.prefactor - 3.0).abs() < 1e-9);
            assert!(f.r_squared > 0.9999);
            assert_eq!(f.fraction_of_pairs, 1.0);
        }
    }

    #[test]
    fn negative_majority_and_window() {
        let mut pairs: Vec<(f64, f64)> = planted(2.0).into_iter().map(|(r, j)| (r, -j)).collect();
        pairs.push((2.0, 5.0));
        let f = fit_power_law_pairs(&pairs, Some((2.0, 10.0)), 10).unwrap();
        assert_eq!(f.majority_sign, -1.0);
        assert!((f.exponent - 2.0).abs() < 1e-9);
        assert!(f.r_range.0 >= 2.0 && f.r_range.1 <= 10.0);
        assert!(f.fraction_of_pairs < 1.0);
    }

    #[test]
    fn frustrated_refused() {
        let pairs: Vec<(f64, f64)> = (1..100).map(|k| (k as f64, if k % 3 == 0 { -1.0 } else { 1.0 })).collect();
        match fit_power_law_pairs(&pairs, None, 10) {
            Err(Error::Frustrated { majority_fraction }) => assert!(majority_fraction < 0.9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn histogram_symmetry_statistics() {
        let vals: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let h = histogram_values(&vals, 4, RangePolicy::Symmetric).unwrap();
        assert_eq!(h.asymmetry, 0.0);
        assert_eq!(h.counts.iter().sum::<usize>(), 100);
        assert_eq!(h.fraction_in_range, 1.0);

        let pos: Vec<f64> = (1..50).map(|k| k as f64).collect();
        let h = histogram_values(&pos, 10, RangePolicy::Symmetric).unwrap();
        assert_eq!(h.counts[..5].iter().sum::<usize>(), 0);
        assert_eq!(h.asymmetry, 1.0);

        let h = histogram_values(&pos, 5, RangePolicy::Fixed { lo: 0.0, hi: 10.0 }).unwrap();
        assert!((h.fraction_in_range - 10.0 / 49.0).abs() < 1e-15);
        assert!(histogram_values(&pos, 1, RangePolicy::Full).is_err());
    }

    #[test]
    fn hexagon_center_sees_one_subshell() {
        use crate::couplings::{CouplingKind, DriveConfig};
        use crate::equilibrium::Potential;
        use crate::params::TrapConfig;
        use crate::seedlat::hex_ring;

        let p: Vec<crate::Vec2> = (0..=1).flat_map(hex_ring).map(|v| v * 1.7).collect();
        let pot = Potential::new(&TrapConfig::beryllium(7, 0.0, 0.16)).unwrap();
        let crystal = Crystal::from_positions(p, &pot, 0).unwrap();
        let j = CouplingMatrix {
            j: nalgebra::DMatrix::from_fn(7, 7, |a, b| (a + b) as f64),
            drive: DriveConfig::axial(1.0, 1.1),
            kind: CouplingKind::AxialStatic,
            excluded_modes: vec![],
        };
        let shells = angular_correlation(&j, &crystal, 0).unwrap();
        assert_eq!(shells.len(), 1);
        let s = &shells[0];
        assert!((s.radius - 1.7).abs() < 1e-12);
        assert_eq!(s.points.len(), 6);
        for (k, pt) in s.points.iter().enumerate() {
            assert!((pt.theta - k as f64 * PI / 3.0).abs() < 1e-12);
            assert_eq!(pt.j, pt.ion as f64);
        }
        let shells = angular_correlation(&j, &crystal, 1).unwrap();
        assert_eq!(shells.iter().map(|s| s.points.len()).sum::<usize>(), 6);
        assert!(shells.windows(2).all(|w| w[0].radius < w[1].radius));
        assert!(angular_correlation(&j, &crystal, 7).is_err());
    }
}
