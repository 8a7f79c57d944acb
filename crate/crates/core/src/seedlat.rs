//! Closed-hexagonal-shell seed lattices for the equilibrium search.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{planar_stiffness, TrapConfig};
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedLattice {
    /// Positions in units of l0.
    pub positions: Vec<Vec2>,
    pub n_closed_shells: usize,
    /// Nearest-neighbor spacing in units of l0.
    pub spacing: f64,
}

/// Number of closed hexagonal shells S that `n_ions` can fill (1 + 3 S (S+1) <= N).
pub fn shell_count(n_ions: usize) -> usize {
    if n_ions <= 1 {
        return 0;
    }
    let raw = ((9.0 + 12.0 * (n_ions as f64 - 1.0)).sqrt() - 3.0) / 6.0;
    let mut s = raw.floor().max(0.0) as usize;
    // Guard the floor against rounding at exact centered-hexagonal numbers.
    while centered_hexagonal(s + 1) <= n_ions {
        s += 1;
    }
    while s > 0 && centered_hexagonal(s) > n_ions {
        s -= 1;
    }
    s
}

/// Number of lattice sites in a hexagon with `shells` closed shells.
pub fn centered_hexagonal(shells: usize) -> usize {
    1 + 3 * shells * (shells + 1)
}

/// The 6 s sites of hexagonal ring `s` of a unit triangular lattice, in walk order.
/// Ring corners sit at polar angles k pi / 3.
pub fn hex_ring(s: usize) -> Vec<Vec2> {
    if s == 0 {
        return vec![Vec2::zeros()];
    }
    let corner = |k: usize| {
        let a = k as f64 * PI / 3.0;
        Vec2::new(a.cos(), a.sin()) * s as f64
    };
    let mut sites = Vec::with_capacity(6 * s);
    for k in 0..6 {
        let (a, b) = (corner(k), corner(k + 1));
        for t in 0..s {
            sites.push(a + (b - a) * (t as f64 / s as f64));
        }
    }
    sites
}

/// Default seed spacing (omega_z / omega_eff)^(2/3) l0, the two-ion equilibrium scale.
pub fn default_spacing(config: &TrapConfig) -> Result<f64> {
    let d = config.derive()?;
    let weff = d.omega_eff();
    if weff <= 0.0 {
        return Err(Error::Parameter(
            "omega_eff must be positive to choose a default seed spacing".into(),
        ));
    }
    Ok(weff.powf(-2.0 / 3.0))
}

/// Build the seed: S full shells, leftovers on ring S+1 at the sites of lowest
/// external (trap + wall, no Coulomb) potential. Ties break by polar angle in
/// [0, 2 pi), then by walk index.
pub fn generate_seed(config: &TrapConfig, spacing: f64) -> Result<SeedLattice> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Parameter(format!("seed spacing must be > 0, got {spacing}")));
    }
    let derived = config.derive()?;
    let (kx, ky) = planar_stiffness(config, &derived);
    let n = config.n_ions;
    let shells = shell_count(n);
    let mut positions: Vec<Vec2> = (0..=shells)
        .flat_map(hex_ring)
        .map(|p| p * spacing)
        .collect();
    let leftover = n - positions.len();
    if leftover > 0 {
        let external = |p: &Vec2| 0.5 * (kx * p.x * p.x + ky * p.y * p.y);
        let mut candidates: Vec<(usize, Vec2, f64, f64)> = hex_ring(shells + 1)
            .into_iter()
            .map(|p| p * spacing)
            .enumerate()
            .map(|(i, p)| (i, p, external(&p), p.y.atan2(p.x).rem_euclid(2.0 * PI)))
            .collect();
        candidates.sort_by(|a, b| {
            let scale = a.2.abs().max(b.2.abs()).max(f64::MIN_POSITIVE);
            if (a.2 - b.2).abs() <= 1e-12 * scale {
                a.3.partial_cmp(&b.3).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
            } else {
                a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal)
            }
        });
        positions.extend(candidates.into_iter().take(leftover).map(|c| c.1));
    }
    Ok(SeedLattice { positions, n_closed_shells: shells, spacing })
}
