//! In-plane normal modes: a gyroscopic quadratic eigenvalue problem.
//!
//! The Lorentz force in the rotating frame couples x and y, so the modes solve
//! `(omega^2 + i omega T - Omega0^2) alpha = 0` in the basis that diagonalizes
//! the stiffness matrix. With `hbar m -> 1` the eigenvectors are normalized as
//! `sum_nu (omega^2 + omega0_nu^2) |alpha^nu|^2 = omega`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::axial::sorted_eigen;
use crate::equilibrium::{Crystal, Potential};
use crate::error::{Error, Result};
use crate::params::TrapConfig;
use crate::Vec2;

pub type C64 = Complex<f64>;

/// Stiffness eigenvalues above this negative bound are accepted (Goldstone direction).
pub const GOLDSTONE_TOL: f64 = 1e-8;
/// Modes slower than this are zero modes and carry no coupling.
pub const ZERO_MODE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarBasis {
    /// 2N x 2N stiffness in m omega_z^2, index 2 j + alpha.
    pub k_matrix: DMatrix<f64>,
    /// Eigenvalues of `k_matrix`, ascending.
    pub eigenvalues: Vec<f64>,
    /// omega0_nu = sqrt(max(lambda_nu, 0)).
    pub omega0: Vec<f64>,
    /// Column nu is b^{alpha nu}.
    pub b_vectors: DMatrix<f64>,
}

impl PlanarBasis {
    pub fn dim(&self) -> usize {
        self.omega0.len()
    }
}

pub fn build_planar_basis(crystal: &Crystal, config: &TrapConfig) -> Result<PlanarBasis> {
    let k = Potential::new(config)?.hessian(&crystal.positions)?;
    planar_basis_from_stiffness(k, &crystal.positions)
}

pub fn planar_basis_from_stiffness(k_matrix: DMatrix<f64>, positions: &[Vec2]) -> Result<PlanarBasis> {
    let (eigenvalues, vectors) = sorted_eigen(&k_matrix)?;
    if let Some(&low) = eigenvalues.first() {
        if low < -GOLDSTONE_TOL {
            return Err(Error::UnstableEquilibrium { eigenvalue: low });
        }
    }
    let omega0: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let probes = planar_probes(positions);
    let b_vectors = crate::axial::canonicalize(vectors, &omega0, &probes);
    Ok(PlanarBasis { k_matrix, eigenvalues, omega0, b_vectors })
}

/// Rigid translations and rotation, then the unit vectors.
fn planar_probes(positions: &[Vec2]) -> Vec<DVector<f64>> {
    let n = 2 * positions.len();
    let mut probes = vec![
        DVector::from_iterator(n, positions.iter().flat_map(|_| [1.0, 0.0])),
        DVector::from_iterator(n, positions.iter().flat_map(|_| [0.0, 1.0])),
        DVector::from_iterator(n, positions.iter().flat_map(|p| [-p.y, p.x])),
        DVector::from_iterator(n, positions.iter().flat_map(|p| [p.x, p.y])),
    ];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        probes.push(e);
    }
    probes
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GyroMatrix {
    /// Site representation: T^{xy} = -omega_c_eff, T^{yx} = +omega_c_eff on every ion.
    pub site: DMatrix<f64>,
    /// b^T T b in the stiffness eigenbasis.
    pub t_matrix: DMatrix<f64>,
    /// e B_eff / m [omega_z].
    pub omega_c_eff: f64,
}

pub fn build_gyro(basis: &PlanarBasis, config: &TrapConfig) -> Result<GyroMatrix> {
    let wc = config.derive()?.omega_c_eff;
    Ok(gyro_from_cyclotron(basis, wc))
}

pub fn gyro_from_cyclotron(basis: &PlanarBasis, omega_c_eff: f64) -> GyroMatrix {
    let dim = basis.dim();
    let mut site = DMatrix::zeros(dim, dim);
    for j in 0..dim / 2 {
        site[(2 * j, 2 * j + 1)] = -omega_c_eff;
        site[(2 * j + 1, 2 * j)] = omega_c_eff;
    }
    let b = &basis.b_vectors;
    let mut t_matrix = b.transpose() * &site * b;
    // Restore exact antisymmetry lost to rounding.
    let t_anti = (&t_matrix - t_matrix.transpose()) * 0.5;
    t_matrix = t_anti;
    GyroMatrix { site, t_matrix, omega_c_eff }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarModes {
    /// 2N non-negative omega_lambda, ascending [omega_z].
    pub frequencies: Vec<f64>,
    /// Column lambda is alpha_lambda in the stiffness eigenbasis.
    pub alphas: DMatrix<C64>,
    /// Number of magnetron-like (lower-branch) modes.
    pub branch_split: usize,
    /// Indices with omega_lambda below [`ZERO_MODE_TOL`].
    pub zero_modes: Vec<usize>,
    /// Largest |e_i + e_{4N-1-i}| of the linearized spectrum.
    pub pairing_residual: f64,
}

impl PlanarModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn is_zero_mode(&self, lambda: usize) -> bool {
        self.zero_modes.contains(&lambda)
    }

    pub fn lower_branch(&self) -> &[f64] {
        &self.frequencies[..self.branch_split]
    }

    pub fn upper_branch(&self) -> &[f64] {
        &self.frequencies[self.branch_split..]
    }

    /// Site amplitudes alpha_j^{beta lambda} = sum_nu alpha^nu b_j^{beta nu}; row 2 j + beta.
    pub fn site_amplitudes(&self, basis: &PlanarBasis) -> DMatrix<C64> {
        basis.b_vectors.map(|v| C64::new(v, 0.0)) * &self.alphas
    }

    /// beta_lambda = i omega0^2 alpha / omega_lambda, the conjugate momenta amplitudes.
    pub fn betas(&self, basis: &PlanarBasis) -> DMatrix<C64> {
        let mut out = self.alphas.clone();
        for (l, &w) in self.frequencies.iter().enumerate() {
            for (nu, &w0) in basis.omega0.iter().enumerate() {
                out[(nu, l)] = if w > 0.0 {
                    self.alphas[(nu, l)] * C64::new(0.0, w0 * w0 / w)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
        }
        out
    }
}

/// Solve the QEP through the 4N x 4N Hermitian linearization
/// `[[-i T, Omega0], [Omega0, 0]] (omega alpha; Omega0 alpha) = omega (...)`.
pub fn solve_qep(basis: &PlanarBasis, gyro: &GyroMatrix) -> Result<PlanarModes> {
    let dim = basis.dim();
    if gyro.t_matrix.nrows() != dim {
        return Err(Error::Parameter("gyroscopic matrix does not match the basis".into()));
    }
    let mut m = DMatrix::<C64>::zeros(2 * dim, 2 * dim);
    for a in 0..dim {
        for b in 0..dim {
            m[(a, b)] = C64::new(0.0, -gyro.t_matrix[(a, b)]);
        }
        m[(a, dim + a)] = C64::new(basis.omega0[a], 0.0);
        m[(dim + a, a)] = C64::new(basis.omega0[a], 0.0);
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..2 * dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = sorted.iter().fold(1.0f64, |s, e| s.max(e.abs()));
    let pairing_residual = (0..dim)
        .map(|i| (sorted[i] + sorted[2 * dim - 1 - i]).abs())
        .fold(0.0, f64::max)
        / scale;

    let mut frequencies = Vec::with_capacity(dim);
    let mut alphas = DMatrix::<C64>::zeros(dim, dim);
    let mut zero_modes = Vec::new();
    for (l, &src) in order[dim..].iter().enumerate() {
        let w = eig.eigenvalues[src];
        if w < -ZERO_MODE_TOL {
            return Err(Error::Numeric(format!("linearized spectrum not paired: mode {l} at {w}")));
        }
        let w = w.max(0.0);
        let col = eig.eigenvectors.column(src);
        let mut alpha: DVector<C64> = if w < ZERO_MODE_TOL {
            zero_modes.push(l);
            // Direction of the zero mode; no normalization is meaningful.
            col.rows(dim, dim).into_owned()
        } else {
            col.rows(0, dim).into_owned() / C64::new(w.sqrt(), 0.0)
        };
        fix_phase(&mut alpha);
        alphas.set_column(l, &alpha);
        frequencies.push(w);
    }
    if !zero_modes.is_empty() {
        log::info!("{} planar zero mode(s) excluded from couplings", zero_modes.len());
    }
    let n = dim / 2;
    if n > 0 && n < dim {
        let gap_split = (1..dim)
            .max_by(|&a, &b| {
                let ga = frequencies[a] - frequencies[a - 1];
                let gb = frequencies[b] - frequencies[b - 1];
                ga.total_cmp(&gb)
            })
            .unwrap_or(n);
        if gap_split != n {
            log::warn!("largest planar gap sits at index {gap_split}, not at N = {n}");
        }
    }
    Ok(PlanarModes { frequencies, alphas, branch_split: n, zero_modes, pairing_residual })
}

/// Rotate so the largest component is real and positive (first one on ties).
fn fix_phase(v: &mut DVector<C64>) {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(c) = v.iter().find(|c| c.norm() >= max * (1.0 - 1e-9)) {
        let phase = c.conj() / c.norm();
        *v *= phase;
    }
}

/// Everything from crystal to modes in one call.
pub fn planar_modes(crystal: &Crystal, config: &TrapConfig) -> Result<(PlanarBasis, PlanarModes)> {
    let basis = build_planar_basis(crystal, config)?;
    let gyro = build_gyro(&basis, config)?;
    let modes = solve_qep(&basis, &gyro)?;
    Ok((basis, modes))
}

/// Maximum absolute residuals of the normalization and completeness identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// sum_nu (omega omega' + omega0^2) alpha* alpha' - omega delta.
    pub orthogonality: f64,
    /// sum_nu (omega0^2 / omega + omega') alpha* alpha' - delta.
    pub commutator: f64,
    /// sum_lambda omega (alpha* alpha' + alpha alpha'*) - delta.
    pub completeness_position: f64,
    /// sum_lambda (alpha* alpha' - alpha alpha'*).
    pub completeness_antisymmetric: f64,
    /// omega0 omega0' sum_lambda (alpha* alpha' + alpha alpha'*) / omega - delta.
    pub completeness_momentum: f64,
    /// The same without the omega0 omega0' factor; grows like 1/omega0^2 for soft modes.
    pub completeness_momentum_raw: f64,
    /// max_lambda |(omega^2 + i omega T - Omega0^2) alpha|.
    pub qep: f64,
    pub pairing: f64,
    /// Whether zero modes were left out of the sums.
    pub excluded_zero_modes: usize,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [
            self.orthogonality,
            self.commutator,
            self.completeness_position,
            self.completeness_antisymmetric,
            self.completeness_momentum,
            self.qep,
            self.pairing,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn verify_identities(modes: &PlanarModes, basis: &PlanarBasis, gyro: &GyroMatrix) -> IdentityReport {
    let dim = basis.dim();
    let keep: Vec<usize> = (0..modes.len()).filter(|l| !modes.is_zero_mode(*l)).collect();
    let a = DMatrix::from_fn(dim, keep.len(), |nu, k| modes.alphas[(nu, keep[k])]);
    let w: Vec<f64> = keep.iter().map(|&l| modes.frequencies[l]).collect();
    let w02 = DVector::from_iterator(dim, basis.omega0.iter().map(|x| C64::new(x * x, 0.0)));

    let gram = a.adjoint() * &a;
    let weighted = DMatrix::from_fn(dim, keep.len(), |nu, k| a[(nu, k)] * w02[nu]);
    let potential = a.adjoint() * &weighted;
    let mut orthogonality = 0.0f64;
    let mut commutator = 0.0f64;
    for p in 0..keep.len() {
        for q in 0..keep.len() {
            let d = if p == q { 1.0 } else { 0.0 };
            let r4 = gram[(p, q)] * (w[p] * w[q]) + potential[(p, q)] - d * w[p];
            orthogonality = orthogonality.max(r4.norm());
            let r35 = potential[(p, q)] / w[p] + gram[(p, q)] * w[q] - d;
            commutator = commutator.max(r35.norm());
        }
    }

    let scaled = |f: &dyn Fn(f64) -> f64| {
        DMatrix::from_fn(dim, keep.len(), |nu, k| a[(nu, k)] * f(w[k]))
    };
    let conj_a = a.map(|c| c.conj());
    let s_pos = &conj_a * scaled(&|x| x).transpose();
    let s_plain = &conj_a * a.transpose();
    let s_inv = &conj_a * scaled(&|x| 1.0 / x).transpose();
    let mut completeness_position = 0.0f64;
    let mut completeness_antisymmetric = 0.0f64;
    let mut completeness_momentum = 0.0f64;
    let mut completeness_momentum_raw = 0.0f64;
    for nu in 0..dim {
        for mu in 0..dim {
            let d = if nu == mu { 1.0 } else { 0.0 };
            let p5 = s_pos[(nu, mu)] + s_pos[(mu, nu)] - d;
            completeness_position = completeness_position.max(p5.norm());
            let p6 = s_plain[(nu, mu)] - s_plain[(mu, nu)];
            completeness_antisymmetric = completeness_antisymmetric.max(p6.norm());
            let w00 = basis.omega0[nu] * basis.omega0[mu];
            if w00 > 0.0 {
                let p7 = s_inv[(nu, mu)] + s_inv[(mu, nu)] - d / w00;
                completeness_momentum_raw = completeness_momentum_raw.max(p7.norm());
                completeness_momentum = completeness_momentum.max(p7.norm() * w00);
            }
        }
    }

    let t = gyro.t_matrix.map(|x| C64::new(x, 0.0));
    let mut qep = 0.0f64;
    for (k, &wl) in w.iter().enumerate() {
        let alpha = a.column(k);
        let mut r = &t * alpha * C64::new(0.0, wl);
        for nu in 0..dim {
            r[nu] += alpha[nu] * (wl * wl) - alpha[nu] * w02[nu];
        }
        qep = qep.max(r.norm());
    }

    IdentityReport {
        orthogonality,
        commutator,
        completeness_position,
        completeness_antisymmetric,
        completeness_momentum,
        completeness_momentum_raw,
        qep,
        pairing: modes.pairing_residual,
        excluded_zero_modes: modes.zero_modes.len(),
    }
}

/// Planar displacement of every ion for a coherent state of mode `lambda`:
/// `2 |phi| Im{ alpha_j^{beta lambda} e^{-i (omega t + delta)} }`.
/// For a real amplitude this is `-2 |phi| alpha sin(omega t + delta)`.
pub fn coherent_displacement(
    modes: &PlanarModes,
    basis: &PlanarBasis,
    lambda: usize,
    occupation: f64,
    phase: f64,
    t: f64,
) -> Result<Vec<Vec2>> {
    if lambda >= modes.len() {
        return Err(Error::ModeIndex { index: lambda, count: modes.len() });
    }
    let b = &basis.b_vectors;
    let alpha = modes.alphas.column(lambda);
    let rotor = C64::from_polar(1.0, -(modes.frequencies[lambda] * t + phase));
    let n = basis.dim() / 2;
    Ok((0..n)
        .map(|j| {
            let mut amp = [C64::new(0.0, 0.0); 2];
            for (beta, slot) in amp.iter_mut().enumerate() {
                for nu in 0..basis.dim() {
                    *slot += alpha[nu] * b[(2 * j + beta, nu)];
                }
            }
            let d = |c: C64| 2.0 * occupation * (c * rotor).im;
            Vec2::new(d(amp[0]), d(amp[1]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{find_equilibrium, SolverOptions};
    use crate::params::Rotation;
    use crate::seedlat::{default_spacing, generate_seed};

    fn crystal(c: &TrapConfig) -> Crystal {
        let seed = generate_seed(c, default_spacing(c).unwrap()).unwrap();
        find_equilibrium(&seed, c, &SolverOptions::default()).unwrap()
    }

    /// Roots of the single-ion characteristic polynomial
    /// (kx - w^2)(ky - w^2) - (w wc)^2 = 0, by bisection in w.
    fn single_ion_roots(kx: f64, ky: f64, wc: f64) -> Vec<f64> {
        let f = |w: f64| (kx - w * w) * (ky - w * w) - (w * wc).powi(2);
        let hi = (kx.max(ky) + wc * wc).sqrt() + 1.0;
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut prev = (1e-9, f(1e-9));
        for i in 1..=steps {
            let w = 1e-9 + hi * i as f64 / steps as f64;
            let fw = f(w);
            if fw.signum() != prev.1.signum() {
                let (mut lo, mut up) = (prev.0, w);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + up);
                    if f(mid).signum() == f(lo).signum() {
                        lo = mid;
                    } else {
                        up = mid;
                    }
                }
                roots.push(0.5 * (lo + up));
            }
            prev = (w, fw);
        }
        roots
    }

    #[test]
    fn single_ion_basis() {
        let c = TrapConfig::beryllium(1, 0.0, 0.16);
        let b = build_planar_basis(&crystal(&c), &c).unwrap();
        assert!((b.omega0[0] - 0.16).abs() < 1e-12 && (b.omega0[1] - 0.16).abs() < 1e-12);
        let c = TrapConfig::beryllium(1, 0.04, 0.16);
        let b = build_planar_basis(&crystal(&c), &c).unwrap();
        assert!((b.omega0[0] - (0.16f64.powi(2) - 0.0016).sqrt()).abs() < 1e-12);
        assert!((b.omega0[1] - (0.16f64.powi(2) + 0.0016).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_ion_doublet() {
        let c = TrapConfig::beryllium(1, 0.0, 0.16);
        let wc = c.derive().unwrap().omega_c_eff;
        let (basis, modes) = planar_modes(&crystal(&c), &c).unwrap();
        let root = (0.16f64.powi(2) + wc * wc / 4.0).sqrt();
        assert!((modes.frequencies[0] - (root - wc / 2.0)).abs() < 1e-10);
        assert!((modes.frequencies[1] - (root + wc / 2.0)).abs() < 1e-10);
        let gyro = build_gyro(&basis, &c).unwrap();
        let report = verify_identities(&modes, &basis, &gyro);
        assert!(report.max() < 1e-10, "{report:?}");
    }

    #[test]
    fn anisotropic_single_ion_matches_polynomial_roots() {
        let c = TrapConfig::beryllium(1, 0.07, 0.16);
        let d = c.derive().unwrap();
        let (_, modes) = planar_modes(&crystal(&c), &c).unwrap();
        let roots = single_ion_roots(d.omega_eff_sq + 0.0049, d.omega_eff_sq - 0.0049, d.omega_c_eff);
        assert_eq!(roots.len(), 2);
        for (w, r) in modes.frequencies.iter().zip(&roots) {
            assert!((w - r).abs() < 1e-10, "{w} vs {r}");
        }
    }

    #[test]
    fn zero_field_reduces_to_basis() {
        let c = TrapConfig::beryllium(10, 0.03, 0.0).with_rotation(Rotation::Omega(9.645 / 2.0));
        let cr = crystal(&c);
        let (basis, modes) = planar_modes(&cr, &c).unwrap();
        for (w, w0) in modes.frequencies.iter().zip(&basis.omega0) {
            assert!((w - w0).abs() < 1e-10);
        }
        let gyro = build_gyro(&basis, &c).unwrap();
        assert_eq!(gyro.t_matrix.amax(), 0.0);
        let r = verify_identities(&modes, &basis, &gyro);
        assert!(r.max() < 1e-8, "{r:?}");
    }

    #[test]
    fn hessian_identity_and_antisymmetry() {
        let c = TrapConfig::beryllium(19, 0.04, 0.16);
        let cr = crystal(&c);
        let basis = build_planar_basis(&cr, &c).unwrap();
        let h = crate::equilibrium::hessian(&cr.positions, &c).unwrap();
        assert!((&basis.k_matrix - h).amax() < 1e-10);
        assert!((&basis.k_matrix - basis.k_matrix.transpose()).amax() < 1e-12);
        let gyro = build_gyro(&basis, &c).unwrap();
        assert_eq!(gyro.t_matrix.clone(), -gyro.t_matrix.transpose());
        let gram = basis.b_vectors.transpose() * &basis.b_vectors;
        assert!((gram - DMatrix::identity(38, 38)).amax() < 1e-10);
    }

    #[test]
    fn seven_ion_goldstone() {
        let c = TrapConfig::beryllium(7, 0.0, 0.16);
        let cr = crystal(&c);
        let basis = build_planar_basis(&cr, &c).unwrap();
        assert!(basis.eigenvalues[0].abs() < 1e-8, "{}", basis.eigenvalues[0]);
        let gyro = build_gyro(&basis, &c).unwrap();
        let modes = solve_qep(&basis, &gyro).unwrap();
        assert!(modes.frequencies[0] < 1e-6);
    }

    #[test]
    fn cyclotron_orbit_is_clockwise() {
        let c = TrapConfig::beryllium(1, 0.02, 0.16);
        assert!(c.derive().unwrap().b_eff > 0.0);
        let (basis, modes) = planar_modes(&crystal(&c), &c).unwrap();
        let period = 2.0 * std::f64::consts::PI / modes.frequencies[1];
        let samples: Vec<Vec2> = (0..64)
            .map(|k| coherent_displacement(&modes, &basis, 1, 1.0, 0.0, period * k as f64 / 64.0).unwrap()[0])
            .collect();
        // Shoelace: negative signed area means clockwise.
        let area: f64 = (0..64)
            .map(|k| {
                let (p, q) = (samples[k], samples[(k + 1) % 64]);
                p.x * q.y - q.x * p.y
            })
            .sum();
        assert!(area < 0.0, "area {area}");
    }

    #[test]
    fn real_amplitudes_vanish_at_zero_phase() {
        let c = TrapConfig::beryllium(5, 0.03, 0.0).with_rotation(Rotation::Omega(9.645 / 2.0));
        let (basis, modes) = planar_modes(&crystal(&c), &c).unwrap();
        for l in 0..modes.len() {
            let w = modes.frequencies[l];
            let zero = coherent_displacement(&modes, &basis, l, 1.0, 0.3, -0.3 / w).unwrap();
            assert!(zero.iter().all(|d| d.norm() < 1e-12));
            let peak = coherent_displacement(&modes, &basis, l, 1.0, 0.3, (0.5 * std::f64::consts::PI - 0.3) / w).unwrap();
            assert!(peak.iter().any(|d| d.norm() > 1e-3));
        }
    }

    #[test]
    fn lowest_mode_is_rigid_rotation() {
        let c = TrapConfig::beryllium(7, 0.04, 0.16);
        let cr = crystal(&c);
        let (basis, modes) = planar_modes(&cr, &c).unwrap();
        let d = coherent_displacement(&modes, &basis, 0, 1.0, -std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let field = DVector::from_iterator(14, d.iter().flat_map(|v| [v.x, v.y]));
        let rot = crate::equilibrium::rotation_generator(&cr.positions).unwrap();
        let overlap = field.dot(&rot).abs() / field.norm();
        assert!(overlap > 0.99, "overlap {overlap}");
    }
}
