//! Out-of-plane (axial) normal modes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::equilibrium::Crystal;
use crate::error::{Error, Result};
use crate::Vec2;

/// Frequencies closer than this (in omega_z) are treated as one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxialModes {
    /// |omega_nu| in omega_z, ordered by ascending eigenvalue (imaginary modes first).
    pub frequencies: Vec<f64>,
    /// True where the eigenvalue is negative and the frequency is imaginary.
    pub imaginary: Vec<bool>,
    /// Eigenvalues of K^zz (omega^2, signed).
    pub eigenvalues: Vec<f64>,
    /// Column nu is b^{z nu}.
    pub eigenvectors: DMatrix<f64>,
    pub stable: bool,
}

impl AxialModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Signed frequency: negative magnitude for imaginary modes.
    pub fn signed_frequency(&self, nu: usize) -> f64 {
        if self.imaginary[nu] {
            -self.frequencies[nu]
        } else {
            self.frequencies[nu]
        }
    }

    pub fn vector(&self, nu: usize) -> DVector<f64> {
        self.eigenvectors.column(nu).into_owned()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }
}

/// K^zz in units of m omega_z^2: diagonal 1 - sum_l 1/(2 R^3), off-diagonal 1/(2 R^3).
pub fn build_kzz_from_positions(positions: &[Vec2]) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let mut k = DMatrix::identity(n, n);
    for j in 0..n {
        for l in 0..j {
            let r = (positions[j] - positions[l]).norm();
            if r < 1e-12 {
                return Err(Error::SingularConfiguration(l, j));
            }
            let c = 0.5 / (r * r * r);
            k[(j, l)] = c;
            k[(l, j)] = c;
            k[(j, j)] -= c;
            k[(l, l)] -= c;
        }
    }
    Ok(k)
}

pub fn build_kzz(crystal: &Crystal) -> Result<DMatrix<f64>> {
    build_kzz_from_positions(&crystal.positions)
}

/// Smallest eigenvalue of K^zz only; cheaper than a full mode solve.
pub fn min_kzz_eigenvalue(positions: &[Vec2]) -> Result<f64> {
    Ok(build_kzz_from_positions(positions)?.symmetric_eigenvalues().min())
}

/// Eigendecomposition of K^zz. `positions` fixes the sign and, inside
/// degenerate clusters, the basis of the returned eigenvectors.
pub fn axial_modes_at(kzz: &DMatrix<f64>, positions: &[Vec2]) -> Result<AxialModes> {
    let n = kzz.nrows();
    if n == 0 || kzz.ncols() != n || positions.len() != n {
        return Err(Error::Parameter("K^zz must be square and match the crystal".into()));
    }
    let (eigenvalues, eigenvectors) = sorted_eigen(kzz)?;
    let signed: Vec<f64> = eigenvalues.iter().map(|&l| l.signum() * l.abs().sqrt()).collect();
    let probes = probe_vectors(positions);
    let eigenvectors = canonicalize(eigenvectors, &signed, &probes);
    let imaginary: Vec<bool> = eigenvalues.iter().map(|&l| l < 0.0).collect();
    Ok(AxialModes {
        frequencies: signed.iter().map(|w| w.abs()).collect(),
        stable: !imaginary.iter().any(|&i| i),
        imaginary,
        eigenvalues,
        eigenvectors,
    })
}

pub fn axial_modes(crystal: &Crystal) -> Result<AxialModes> {
    axial_modes_at(&build_kzz(crystal)?, &crystal.positions)
}

/// `amplitude * b^{z nu}`, the z displacement pattern of mode `nu`.
pub fn mode_displacement(modes: &AxialModes, nu: usize, amplitude: f64) -> Result<DVector<f64>> {
    if nu >= modes.len() {
        return Err(Error::ModeIndex { index: nu, count: modes.len() });
    }
    if modes.imaginary[nu] {
        return Err(Error::UnstableMode { mode: nu, frequency: modes.frequencies[nu] });
    }
    Ok(modes.vector(nu) * amplitude)
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Uniform vector, then r^m cos/sin(m theta) for m = 1..6, then r^2, then unit
/// vectors. Used to fix eigenvector signs and degenerate bases reproducibly.
pub(crate) fn probe_vectors(positions: &[Vec2]) -> Vec<DVector<f64>> {
    let n = positions.len();
    let rmax = positions.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let mut probes = vec![DVector::from_element(n, 1.0)];
    for m in 1..=6 {
        let harmonic = |f: fn(f64) -> f64| {
            DVector::from_iterator(
                n,
                positions.iter().map(|p| {
                    let r = p.norm() / rmax;
                    r.powi(m) * f(m as f64 * p.y.atan2(p.x))
                }),
            )
        };
        probes.push(harmonic(f64::cos));
        probes.push(harmonic(f64::sin));
    }
    probes.push(DVector::from_iterator(n, positions.iter().map(|p| (p.norm() / rmax).powi(2))));
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        probes.push(e);
    }
    probes
}

/// Make eigenvectors reproducible: a fixed basis inside every degenerate
/// cluster and a sign set by the first probe with a non-negligible overlap.
pub(crate) fn canonicalize(
    mut vectors: DMatrix<f64>,
    frequencies: &[f64],
    probes: &[DVector<f64>],
) -> DMatrix<f64> {
    let n = frequencies.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (frequencies[end] - frequencies[end - 1]).abs() < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            let block = vectors.columns(start, end - start).into_owned();
            let basis = cluster_basis(&block, probes);
            for (i, v) in basis.iter().enumerate() {
                vectors.set_column(start + i, v);
            }
        }
        start = end;
    }
    for nu in 0..vectors.ncols() {
        let v = vectors.column(nu).into_owned();
        if let Some(overlap) = probes
            .iter()
            .map(|p| p.dot(&v) / p.norm())
            .find(|o| o.abs() > 1e-8)
        {
            if overlap < 0.0 {
                vectors.column_mut(nu).neg_mut();
            }
        }
    }
    vectors
}

/// Gram-Schmidt of the projected probes within the span of `block`.
fn cluster_basis(block: &DMatrix<f64>, probes: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let k = block.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for p in probes {
        if basis.len() == k {
            break;
        }
        let mut v = block * (block.transpose() * p);
        for u in &basis {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
        // Second pass for numerical orthogonality.
        for u in &basis {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-6 * p.norm() {
            basis.push(v / norm);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{find_equilibrium, SolverOptions};
    use crate::params::TrapConfig;
    use crate::seedlat::{default_spacing, generate_seed};

    fn crystal(n: usize, ww: f64, weff: f64) -> Crystal {
        let c = TrapConfig::beryllium(n, ww, weff);
        let seed = generate_seed(&c, default_spacing(&c).unwrap()).unwrap();
        find_equilibrium(&seed, &c, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn single_ion() {
        let m = axial_modes(&crystal(1, 0.0, 0.16)).unwrap();
        assert_eq!(m.frequencies, vec![1.0]);
        assert!(m.stable);
    }

    #[test]
    fn two_ions_closed_form() {
        let (ww, weff) = (0.04f64, 0.16f64);
        let c = crystal(2, ww, weff);
        let soft2 = weff * weff - ww * ww;
        let k = build_kzz(&c).unwrap();
        assert!((k[(0, 0)] - (1.0 - soft2 / 2.0)).abs() < 1e-10);
        assert!((k[(0, 1)] - soft2 / 2.0).abs() < 1e-10);
        let m = axial_modes(&c).unwrap();
        assert!((m.frequencies[0] - (1.0 - soft2).sqrt()).abs() < 1e-10);
        assert!((m.frequencies[1] - 1.0).abs() < 1e-12);
        let tilt = mode_displacement(&m, 0, 1.0).unwrap();
        assert!((tilt[0] + tilt[1]).abs() < 1e-12);
        let com = mode_displacement(&m, 1, 2.0).unwrap();
        assert!((com[0] - com[1]).abs() < 1e-12 && com[0] > 0.0);
    }

    #[test]
    fn com_row_sums_and_orthogonality() {
        let c = crystal(19, 0.04, 0.16);
        let k = build_kzz(&c).unwrap();
        let ones = DVector::from_element(19, 1.0);
        assert!((&k * &ones - &ones).amax() < 1e-13);
        let m = axial_modes(&c).unwrap();
        assert!((m.frequencies[18] - 1.0).abs() < 1e-12);
        let gram = m.eigenvectors.transpose() * &m.eigenvectors;
        assert!((gram - DMatrix::identity(19, 19)).amax() < 1e-10);
        for nu in 0..18 {
            assert!(m.frequencies[nu] < 1.0);
            let d = mode_displacement(&m, nu, 1.0).unwrap_or_else(|e| panic!("{e} {:?}", m.frequencies));
            assert!(d.sum().abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_hexagon_is_reproducible() {
        let c = crystal(7, 0.0, 0.2);
        let a = axial_modes(&c).unwrap();
        // Rebuild from a permuted-and-restored matrix: same canonical vectors.
        let k = build_kzz(&c).unwrap();
        let b = axial_modes_at(&(k.transpose()), &c.positions).unwrap();
        assert!((a.eigenvectors.clone() - b.eigenvectors).amax() < 1e-9);
        let doublets = a.frequencies.windows(2).filter(|w| (w[1] - w[0]).abs() < 1e-9).count();
        assert!(doublets >= 2, "{:?}", a.frequencies);
    }

    #[test]
    fn imaginary_modes_flagged() {
        let pos = [Vec2::new(0.0, 0.3), Vec2::new(0.0, -0.3)];
        let m = axial_modes_at(&build_kzz_from_positions(&pos).unwrap(), &pos).unwrap();
        assert!(!m.stable);
        assert!(m.imaginary[0]);
        assert!(mode_displacement(&m, 0, 1.0).is_err());
        assert!(mode_displacement(&m, 5, 1.0).is_err());
    }
}
