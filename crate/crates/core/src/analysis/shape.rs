//! Crystal outline: convex hull, boundary ellipse and nearest-neighbor spacing.

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::delaunay::{delaunay, has_area};
use crate::equilibrium::Crystal;
use crate::error::{Error, Result};
use crate::Vec2;

/// Hull vertex indices in counter-clockwise order. Points lying on hull
/// edges are kept so the boundary is sampled densely.
pub fn convex_hull(points: &[Vec2]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a].x.total_cmp(&points[b].x).then(points[a].y.total_cmp(&points[b].y))
    });
    if idx.len() < 3 {
        return idx;
    }
    let scale = idx
        .iter()
        .map(|&i| (points[i] - points[idx[0]]).norm())
        .fold(0.0, f64::max);
    let tol = 1e-9 * scale * scale;
    let cross = |o: usize, a: usize, b: usize| (points[a] - points[o]).perp(&(points[b] - points[o]));
    let chain = |order: &mut dyn Iterator<Item = usize>| {
        let mut h: Vec<usize> = Vec::new();
        for i in order {
            while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], i) <= tol {
                h.pop();
            }
            h.push(i);
        }
        h
    };
    let mut corners = chain(&mut idx.iter().copied());
    let mut upper = chain(&mut idx.iter().rev().copied());
    corners.pop();
    upper.pop();
    corners.extend(upper);
    // Re-insert points lying on each edge, ordered along it.
    let m = corners.len();
    let mut hull = Vec::with_capacity(points.len());
    for k in 0..m {
        let (a, b) = (corners[k], corners[(k + 1) % m]);
        let edge = points[b] - points[a];
        let len2 = edge.norm_squared();
        let mut on_edge: Vec<(f64, usize)> = (0..points.len())
            .filter(|&i| i != a && i != b && cross(a, b, i).abs() <= tol)
            .map(|i| ((points[i] - points[a]).dot(&edge) / len2, i))
            .filter(|&(t, _)| t > 0.0 && t < 1.0)
            .collect();
        on_edge.sort_by(|x, y| x.0.total_cmp(&y.0));
        hull.push(a);
        hull.extend(on_edge.into_iter().map(|e| e.1));
    }
    hull
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Vec2,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from x [rad].
    pub angle: f64,
}

impl Ellipse {
    pub fn aspect_ratio(&self) -> f64 {
        self.semi_major / self.semi_minor
    }
}

/// Least-squares conic `A x^2 + B x y + C y^2 + D x + E y = 1` through the
/// points (shifted to their centroid), reduced to center and semi-axes.
pub fn fit_ellipse(points: &[Vec2]) -> Result<Ellipse> {
    if points.len() < 5 {
        return Err(Error::Degenerate(format!("{} points cannot fix an ellipse", points.len())));
    }
    let centroid = points.iter().fold(Vec2::zeros(), |a, p| a + p) / points.len() as f64;
    let scale = points.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Degenerate("all boundary points coincide".into()));
    }
    let rows: Vec<[f64; 5]> = points
        .iter()
        .map(|p| {
            let q = (p - centroid) / scale;
            [q.x * q.x, q.x * q.y, q.y * q.y, q.x, q.y]
        })
        .collect();
    let a = nalgebra::DMatrix::from_fn(rows.len(), 5, |i, k| rows[i][k]);
    let b = nalgebra::DVector::from_element(rows.len(), 1.0);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Numeric(format!("ellipse fit failed: {e}")))?;
    let m = Matrix2::new(coef[0], coef[1] / 2.0, coef[1] / 2.0, coef[2]);
    let g = nalgebra::Vector2::new(coef[3], coef[4]);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("boundary conic has no center".into()))?;
    let c = -(inv * g) * 0.5;
    let s = 1.0 + c.dot(&(m * c));
    let eig = SymmetricEigen::new(m);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if !(l0 > 0.0 && l1 > 0.0 && s > 0.0) {
        return Err(Error::Degenerate("boundary is not elliptical".into()));
    }
    let (small, large, k) = if l0 <= l1 { (l0, l1, 0) } else { (l1, l0, 1) };
    let axis = eig.eigenvectors.column(k);
    Ok(Ellipse {
        center: centroid + c * scale,
        semi_major: (s / small).sqrt() * scale,
        semi_minor: (s / large).sqrt() * scale,
        angle: axis[1].atan2(axis[0]),
    })
}

/// Major/minor aspect ratio from the second moments of all positions.
pub fn moment_aspect_ratio(points: &[Vec2]) -> Result<f64> {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let cov = points.iter().fold(Matrix2::zeros(), |a, p| {
        let d = p - c;
        a + d * d.transpose()
    }) / n;
    let e = cov.symmetric_eigenvalues();
    let (lo, hi) = (e.min(), e.max());
    if lo <= 0.0 {
        return Err(Error::Degenerate("positions are collinear".into()));
    }
    Ok((hi / lo).sqrt())
}

/// Aspect ratio (>= 1) of the ellipse through the hull ions. Falls back to
/// second moments when the hull has fewer than five points.
pub fn distortion_ratio(crystal: &Crystal) -> Result<f64> {
    let p = &crystal.positions;
    if p.len() < 3 {
        return Err(Error::Parameter("distortion needs at least 3 ions".into()));
    }
    if !has_area(p) {
        return Err(Error::Degenerate("ions are collinear".into()));
    }
    let hull: Vec<Vec2> = convex_hull(p).into_iter().map(|i| p[i]).collect();
    if hull.len() < 5 {
        return moment_aspect_ratio(p);
    }
    Ok(fit_ellipse(&hull)?.aspect_ratio())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    /// Mean distance from each ion to its Delaunay neighbors [l0].
    pub per_ion: Vec<f64>,
    /// Distance of each ion from the crystal center [l0].
    pub radius: Vec<f64>,
}

pub fn nn_spacing(crystal: &Crystal) -> Result<Spacing> {
    let p = &crystal.positions;
    let nb = delaunay(p)?.neighbors();
    let per_ion = nb
        .iter()
        .enumerate()
        .map(|(i, list)| list.iter().map(|&k| (p[i] - p[k]).norm()).sum::<f64>() / list.len().max(1) as f64)
        .collect();
    Ok(Spacing { per_ion, radius: crystal.polar.iter().map(|q| q.radius).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::Potential;
    use crate::params::TrapConfig;
    use crate::seedlat::hex_ring;

    fn crystal_from(points: Vec<Vec2>) -> Crystal {
        let pot = Potential::new(&TrapConfig::beryllium(points.len(), 0.0, 0.16)).unwrap();
        Crystal::from_positions(points, &pot, 0).unwrap()
    }

    #[test]
    fn recovers_planted_ellipse() {
        let pts: Vec<Vec2> = (0..40)
            .map(|k| {
                let t = k as f64 * 0.157;
                let (a, b, phi) = (5.0, 2.0, 0.3f64);
                let local = Vec2::new(a * t.cos(), b * t.sin());
                Vec2::new(1.0, -2.0) + nalgebra::Rotation2::new(phi) * local
            })
            .collect();
        let e = fit_ellipse(&pts).unwrap();
        assert!((e.semi_major - 5.0).abs() < 1e-9 && (e.semi_minor - 2.0).abs() < 1e-9);
        assert!((e.center - Vec2::new(1.0, -2.0)).norm() < 1e-9);
        assert!((e.angle.rem_euclid(std::f64::consts::PI) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn hull_keeps_edge_points() {
        let p: Vec<Vec2> = (0..=2).flat_map(hex_ring).collect();
        let hull = convex_hull(&p);
        assert_eq!(hull.len(), 12);
        assert!(hull.iter().all(|&i| (p[i].norm() - 2.0).abs() < 0.3));
    }

    #[test]
    fn perfect_patch_spacing_and_round_ratio() {
        let p: Vec<Vec2> = (0..=4).flat_map(hex_ring).map(|v| v * 2.0).collect();
        let c = crystal_from(p);
        let s = nn_spacing(&c).unwrap();
        for d in &s.per_ion[..37] {
            assert!((d - 2.0).abs() < 1e-12);
        }
        let r = distortion_ratio(&c).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn few_hull_points_use_moments() {
        let c = crystal_from(vec![Vec2::new(-2.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)]);
        let r = distortion_ratio(&c).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let c = crystal_from(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0)]);
        assert!(distortion_ratio(&c).is_err());
        assert!(nn_spacing(&c).is_err());
        let c = crystal_from(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]);
        assert!(distortion_ratio(&c).is_err());
    }
}
