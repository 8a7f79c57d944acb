//! Rotating-frame potential energy and its minimization.
//!
//! Coordinates are flattened as `[x_0, y_0, x_1, y_1, ...]`, so the Hessian
//! index of ion `j`, direction `a` (0 = x, 1 = y) is `2 j + a`. The Hessian at an
//! equilibrium is exactly the planar stiffness matrix used by [`crate::planar`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{planar_stiffness, TrapConfig};
use crate::seedlat::SeedLattice;
use crate::Vec2;

/// Distances below this are treated as coincident ions.
const COINCIDENCE: f64 = 1e-12;
/// Relative energy change treated as rounding noise in the line search.
const ROUNDOFF: f64 = 1e-12;
/// Negative-curvature steps attempted before a saddle point is reported.
const MAX_SADDLE_ESCAPES: usize = 50;

/// Trap + wall + Coulomb potential in internal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    /// Stiffness along x (omega_eff^2 + s omega_W^2).
    pub kx: f64,
    /// Stiffness along y (omega_eff^2 - s omega_W^2).
    pub ky: f64,
    /// Prefactor of 1/r; 1/2 in units of l0.
    pub coulomb: f64,
}

impl Potential {
    pub fn new(config: &TrapConfig) -> Result<Self> {
        let derived = config.derive()?;
        let (kx, ky) = planar_stiffness(config, &derived);
        Ok(Self { kx, ky, coulomb: 0.5 })
    }

    pub fn without_coulomb(self) -> Self {
        Self { coulomb: 0.0, ..self }
    }

    /// Whether the external potential is symmetric under rotations about z.
    pub fn is_isotropic(&self) -> bool {
        self.kx == self.ky
    }

    fn pair(&self, positions: &[Vec2], j: usize, k: usize) -> Result<(Vec2, f64)> {
        let d = positions[j] - positions[k];
        let r = d.norm();
        if self.coulomb != 0.0 && r < COINCIDENCE {
            return Err(Error::SingularConfiguration(k, j));
        }
        Ok((d, r))
    }

    pub fn energy(&self, positions: &[Vec2]) -> Result<f64> {
        let mut trap = 0.0;
        for p in positions {
            trap += 0.5 * (self.kx * p.x * p.x + self.ky * p.y * p.y);
        }
        let mut coulomb = 0.0;
        if self.coulomb != 0.0 {
            for j in 0..positions.len() {
                for k in 0..j {
                    let (_, r) = self.pair(positions, j, k)?;
                    coulomb += 1.0 / r;
                }
            }
        }
        Ok(trap + self.coulomb * coulomb)
    }

    pub fn gradient(&self, positions: &[Vec2]) -> Result<DVector<f64>> {
        let n = positions.len();
        let mut g = DVector::zeros(2 * n);
        for (j, p) in positions.iter().enumerate() {
            g[2 * j] = self.kx * p.x;
            g[2 * j + 1] = self.ky * p.y;
        }
        if self.coulomb != 0.0 {
            for j in 0..n {
                for k in 0..j {
                    let (d, r) = self.pair(positions, j, k)?;
                    // d/d r_j of c / |r_j - r_k| = -c d / r^3
                    let f = d * (self.coulomb / (r * r * r));
                    g[2 * j] -= f.x;
                    g[2 * j + 1] -= f.y;
                    g[2 * k] += f.x;
                    g[2 * k + 1] += f.y;
                }
            }
        }
        Ok(g)
    }

    pub fn hessian(&self, positions: &[Vec2]) -> Result<DMatrix<f64>> {
        let n = positions.len();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            h[(2 * j, 2 * j)] = self.kx;
            h[(2 * j + 1, 2 * j + 1)] = self.ky;
        }
        if self.coulomb != 0.0 {
            for j in 0..n {
                for k in 0..j {
                    let (d, r) = self.pair(positions, j, k)?;
                    let r2 = r * r;
                    let s = self.coulomb / (r2 * r2 * r);
                    // c (3 d d^T - r^2 I) / r^5
                    let block = [
                        [s * (3.0 * d.x * d.x - r2), s * 3.0 * d.x * d.y],
                        [s * 3.0 * d.x * d.y, s * (3.0 * d.y * d.y - r2)],
                    ];
                    for a in 0..2 {
                        for b in 0..2 {
                            h[(2 * j + a, 2 * j + b)] += block[a][b];
                            h[(2 * k + a, 2 * k + b)] += block[a][b];
                            h[(2 * j + a, 2 * k + b)] -= block[a][b];
                            h[(2 * k + a, 2 * j + b)] -= block[a][b];
                        }
                    }
                }
            }
        }
        Ok(h)
    }
}

pub fn potential_energy(positions: &[Vec2], config: &TrapConfig) -> Result<f64> {
    Potential::new(config)?.energy(positions)
}

pub fn gradient(positions: &[Vec2], config: &TrapConfig) -> Result<DVector<f64>> {
    Potential::new(config)?.gradient(positions)
}

pub fn hessian(positions: &[Vec2], config: &TrapConfig) -> Result<DMatrix<f64>> {
    Potential::new(config)?.hessian(positions)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on max |gradient| (internal units).
    pub tol: f64,
    pub max_iterations: usize,
    /// Smallest Hessian eigenvalue accepted at the solution.
    pub saddle_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 10_000, saddle_tolerance: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    pub radius: f64,
    pub phase: f64,
}

/// An equilibrium configuration in the rotating frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crystal {
    /// Positions (x_j, y_j) in units of l0.
    pub positions: Vec<Vec2>,
    /// Polar form (R_j, phi_j) of the same positions.
    pub polar: Vec<Polar>,
    /// Rotating-frame potential energy [m omega_z^2 l0^2].
    pub energy: f64,
    /// Max-norm of the gradient at the solution.
    pub grad_norm: f64,
    pub iterations: usize,
}

impl Crystal {
    /// Wrap already-relaxed positions; energy and gradient are re-evaluated.
    pub fn from_positions(positions: Vec<Vec2>, potential: &Potential, iterations: usize) -> Result<Self> {
        let energy = potential.energy(&positions)?;
        let grad_norm = potential.gradient(&positions)?.amax();
        let polar = positions
            .iter()
            .map(|p| Polar { radius: p.norm(), phase: p.y.atan2(p.x) })
            .collect();
        Ok(Self { positions, polar, energy, grad_norm, iterations })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distance(&self, j: usize, k: usize) -> f64 {
        (self.positions[j] - self.positions[k]).norm()
    }
}

/// Minimization history: energies of every accepted iterate, starting with the seed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub energies: Vec<f64>,
    pub steepest_descent_steps: usize,
}

pub fn find_equilibrium(seed: &SeedLattice, config: &TrapConfig, options: &SolverOptions) -> Result<Crystal> {
    find_equilibrium_traced(seed, config, options).map(|(c, _)| c)
}

pub fn find_equilibrium_traced(
    seed: &SeedLattice,
    config: &TrapConfig,
    options: &SolverOptions,
) -> Result<(Crystal, SolveTrace)> {
    let stability = crate::params::stability(config)?;
    if !stability.confined {
        return Err(Error::Parameter(format!(
            "configuration is not confined in the plane (beta3 = {:e})",
            stability.beta3
        )));
    }
    if seed.positions.len() != config.n_ions {
        return Err(Error::Parameter(format!(
            "seed has {} ions but config asks for {}",
            seed.positions.len(),
            config.n_ions
        )));
    }
    let potential = Potential::new(config)?;
    minimize(&potential, &seed.positions, options)
}

fn flatten(positions: &[Vec2]) -> DVector<f64> {
    DVector::from_iterator(2 * positions.len(), positions.iter().flat_map(|p| [p.x, p.y]))
}

fn unflatten(x: &DVector<f64>) -> Vec<Vec2> {
    x.as_slice().chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Unit generator of a rigid rotation about the origin, or `None` at the origin.
pub(crate) fn rotation_generator(positions: &[Vec2]) -> Option<DVector<f64>> {
    let u = DVector::from_iterator(2 * positions.len(), positions.iter().flat_map(|p| [-p.y, p.x]));
    let norm = u.norm();
    (norm > 1e-12).then(|| u / norm)
}

fn min_pair_distance(positions: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..positions.len() {
        for k in 0..j {
            best = best.min((positions[j] - positions[k]).norm());
        }
    }
    best
}

/// Newton direction on `h + eta I`, raising `eta` until the Cholesky factor exists.
fn shifted_newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = h.diagonal().amax().max(1e-12);
    let mut eta = 0.0;
    let n = h.nrows();
    for _ in 0..60 {
        let mut shifted = h.clone();
        for i in 0..n {
            shifted[(i, i)] += eta;
        }
        if let Some(chol) = shifted.cholesky() {
            return Ok(-chol.solve(g));
        }
        eta = if eta == 0.0 { 1e-8 * scale } else { eta * 10.0 };
    }
    Err(Error::Numeric("could not regularize Hessian".into()))
}

/// Minimize `potential` from `start`.
///
/// With an isotropic potential the global rotation is a zero mode; it is
/// projected out of both the gradient and the Hessian so the orientation of
/// the starting configuration is kept. A stationary point with negative
/// curvature is left along its softest eigenvector and the descent resumes.
pub fn minimize(
    potential: &Potential,
    start: &[Vec2],
    options: &SolverOptions,
) -> Result<(Crystal, SolveTrace)> {
    let n = start.len();
    if n == 0 {
        return Err(Error::Parameter("no ions to minimize".into()));
    }
    let pin_rotation = potential.is_isotropic() && potential.coulomb != 0.0 && n > 1;
    let mut x = flatten(start);
    let mut positions = start.to_vec();
    let mut energy = potential.energy(&positions)?;
    let mut trace = SolveTrace { energies: vec![energy], steepest_descent_steps: 0 };
    let mut grad = potential.gradient(&positions)?;
    let mut iterations = 0;

    let mut escapes = 0;
    loop {
        let mut g = grad.clone();
        let generator = if pin_rotation { rotation_generator(&positions) } else { None };
        if let Some(u) = &generator {
            let c = u.dot(&g);
            g.axpy(-c, u, 1.0);
        }
        let grad_norm = g.amax();
        if grad_norm < options.tol {
            // Symmetric seeds can stall on a saddle of the full problem.
            let h = potential.hessian(&positions)?;
            let (values, vectors) = crate::axial::sorted_eigen(&h)?;
            if values[0] >= -options.saddle_tolerance {
                break;
            }
            if escapes >= MAX_SADDLE_ESCAPES {
                return Err(Error::SaddlePoint { min_eigenvalue: values[0] });
            }
            escapes += 1;
            let v = vectors.column(0).into_owned();
            // Higher-order terms dominate a large step along a very soft direction.
            let mut size = 0.05 * min_pair_distance(&positions).min(1.0) / v.amax();
            let mut best: Option<(DVector<f64>, f64)> = None;
            while best.is_none() && size > 1e-8 {
                for sign in [1.0, -1.0] {
                    let xt = &x + &v * (sign * size);
                    let et = potential.energy(&unflatten(&xt))?;
                    if et < energy && best.as_ref().is_none_or(|b| et < b.1) {
                        best = Some((xt, et));
                    }
                }
                size *= 0.25;
            }
            let Some((xt, et)) = best else {
                return Err(Error::SaddlePoint { min_eigenvalue: values[0] });
            };
            log::debug!("escaping saddle (min eigenvalue {:e})", values[0]);
            x = xt;
            energy = et;
            positions = unflatten(&x);
            grad = potential.gradient(&positions)?;
            trace.energies.push(energy);
            continue;
        }
        if iterations >= options.max_iterations {
            return Err(Error::NotConverged { iterations, grad_norm });
        }
        iterations += 1;

        let mut h = potential.hessian(&positions)?;
        if let Some(u) = &generator {
            // P H P + u u^T with P = I - u u^T
            let hu = &h * u;
            let uhu = u.dot(&hu);
            h -= &hu * u.transpose() + u * hu.transpose();
            h += u * u.transpose() * (uhu + 1.0);
        }
        let mut step = shifted_newton_direction(&h, &g)?;
        if let Some(u) = &generator {
            let c = u.dot(&step);
            step.axpy(-c, u, 1.0);
        }

        let max_move = if potential.coulomb != 0.0 && n > 1 {
            0.25 * min_pair_distance(&positions)
        } else {
            f64::INFINITY
        };
        let u = generator.as_ref();
        let accepted = line_search(potential, &x, energy, &g, &step, max_move, grad_norm, u)?
            .or_else(|| {
                trace.steepest_descent_steps += 1;
                let sd = -&g;
                line_search(potential, &x, energy, &g, &sd, max_move, grad_norm, u).ok().flatten()
            });
        match accepted {
            Some((xt, et, gt)) => {
                x = xt;
                energy = et;
                grad = gt;
                positions = unflatten(&x);
                trace.energies.push(energy);
            }
            None => return Err(Error::NotConverged { iterations, grad_norm }),
        }
    }

    let crystal = Crystal::from_positions(positions, potential, iterations)?;
    Ok((crystal, trace))
}

type Accepted = (DVector<f64>, f64, DVector<f64>);

/// Backtracking on energy with an Armijo condition. Once the energy change is
/// at the rounding level, a full step that lowers the gradient is accepted.
#[allow(clippy::too_many_arguments)]
fn line_search(
    potential: &Potential,
    x: &DVector<f64>,
    energy: f64,
    g: &DVector<f64>,
    step: &DVector<f64>,
    max_move: f64,
    grad_norm: f64,
    generator: Option<&DVector<f64>>,
) -> Result<Option<Accepted>> {
    let slope = g.dot(step);
    // Also rejects a NaN slope.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(slope < 0.0) {
        return Ok(None);
    }
    let mut alpha = 1.0;
    let biggest = step.amax();
    if biggest > max_move {
        alpha = max_move / biggest;
    }
    let roundoff = ROUNDOFF * energy.abs().max(1.0);
    let first_alpha = alpha;
    while alpha > 1e-12 {
        let xt = x + step * alpha;
        let pt = unflatten(&xt);
        if let Ok(et) = potential.energy(&pt) {
            if et <= energy + 1e-4 * alpha * slope {
                let gt = potential.gradient(&pt)?;
                return Ok(Some((xt, et, gt)));
            }
            if alpha == first_alpha && (et - energy).abs() <= roundoff {
                let gt = potential.gradient(&pt)?;
                let mut projected = gt.clone();
                if let Some(u) = generator {
                    let c = u.dot(&projected);
                    projected.axpy(-c, u, 1.0);
                }
                if projected.amax() < grad_norm {
                    return Ok(Some((xt, et, gt)));
                }
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seedlat::{default_spacing, generate_seed};

    fn cfg(n: usize, ww: f64, weff: f64) -> TrapConfig {
        TrapConfig::beryllium(n, ww, weff)
    }

    #[test]
    fn single_ion_energies() {
        let c = cfg(1, 0.0, 0.16);
        assert_eq!(potential_energy(&[Vec2::zeros()], &c).unwrap(), 0.0);
        let e = potential_energy(&[Vec2::new(1.0, 0.0)], &c).unwrap();
        assert!((e - 0.5 * 0.16f64.powi(2)).abs() < 1e-14);
        assert_eq!(gradient(&[Vec2::zeros()], &c).unwrap().amax(), 0.0);
    }

    #[test]
    fn two_ion_stationary_on_soft_axis() {
        let c = cfg(2, 0.04, 0.16);
        let wsoft2 = 0.16f64.powi(2) - 0.04f64.powi(2);
        let d = wsoft2.powf(-1.0 / 3.0);
        let pos = [Vec2::new(0.0, d / 2.0), Vec2::new(0.0, -d / 2.0)];
        assert!(gradient(&pos, &c).unwrap().amax() < 1e-14);
    }

    #[test]
    fn coincident_ions_error() {
        let c = cfg(2, 0.0, 0.16);
        let pos = [Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)];
        assert!(matches!(potential_energy(&pos, &c), Err(Error::SingularConfiguration(..))));
        assert!(gradient(&pos, &c).is_err());
        assert!(hessian(&pos, &c).is_err());
    }

    #[test]
    fn two_ion_minimum() {
        let c = cfg(2, 0.04, 0.16);
        let seed = generate_seed(&c, default_spacing(&c).unwrap()).unwrap();
        let crystal = find_equilibrium(&seed, &c, &SolverOptions::default()).unwrap();
        let wsoft2 = 0.16f64.powi(2) - 0.04f64.powi(2);
        let d = wsoft2.powf(-1.0 / 3.0);
        assert!((crystal.distance(0, 1) - d).abs() < 1e-9);
        let axis = crystal.positions[0] - crystal.positions[1];
        assert!(axis.x.abs() < 1e-9, "not on soft axis: {axis:?}");
        assert!(crystal.grad_norm < 1e-10);
    }

    #[test]
    fn seven_ion_hexagon_rotation_invariant() {
        let c = cfg(7, 0.0, 0.2);
        let seed = generate_seed(&c, default_spacing(&c).unwrap()).unwrap();
        let (crystal, trace) = find_equilibrium_traced(&seed, &c, &SolverOptions::default()).unwrap();
        assert!(crystal.polar[0].radius < 1e-9);
        let r1 = crystal.polar[1].radius;
        for p in &crystal.polar[1..] {
            assert!((p.radius - r1).abs() < 1e-9);
        }
        let pot = Potential::new(&c).unwrap();
        for angle in [0.1, 0.7, 2.0] {
            let rot = nalgebra::Rotation2::new(angle);
            let turned: Vec<Vec2> = crystal.positions.iter().map(|p| rot * p).collect();
            let e = pot.energy(&turned).unwrap();
            assert!((e - crystal.energy).abs() < 1e-10 * crystal.energy.abs());
        }
        assert_monotone(&trace.energies);
    }

    #[test]
    fn without_coulomb_ions_fall_to_origin() {
        let c = cfg(5, 0.03, 0.2);
        let pot = Potential::new(&c).unwrap().without_coulomb();
        let start: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64 - 2.0, 0.5 * i as f64)).collect();
        let (crystal, _) = minimize(&pot, &start, &SolverOptions::default()).unwrap();
        for p in &crystal.positions {
            assert!(p.norm() < 1e-9);
        }
    }

    #[test]
    fn unconfined_config_rejected() {
        let c = cfg(3, 0.2, 0.1);
        let seed = generate_seed(&c, 3.0).unwrap();
        assert!(find_equilibrium(&seed, &c, &SolverOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_reports_gradient() {
        let c = cfg(19, 0.04, 0.16);
        let seed = generate_seed(&c, 1.0).unwrap();
        let opts = SolverOptions { max_iterations: 1, ..Default::default() };
        match find_equilibrium(&seed, &c, &opts) {
            Err(Error::NotConverged { iterations: 1, grad_norm }) => assert!(grad_norm > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    pub(crate) fn assert_monotone(energies: &[f64]) {
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + ROUNDOFF * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }
}
