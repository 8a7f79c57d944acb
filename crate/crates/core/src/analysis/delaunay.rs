//! Bowyer-Watson Delaunay triangulation for modest point counts.

use crate::error::{Error, Result};
use crate::Vec2;

/// Relative tolerance of the in-circumcircle predicate.
const INCIRCLE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    n_points: usize,
}

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    center: Vec2,
    radius2: f64,
}

fn circumcircle(p: &[Vec2], v: [usize; 3]) -> Option<(Vec2, f64)> {
    let (a, b, c) = (p[v[0]], p[v[1]], p[v[2]]);
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d == 0.0 {
        return None;
    }
    let (a2, b2, c2) = (a.norm_squared(), b.norm_squared(), c.norm_squared());
    let center = Vec2::new(
        (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
        (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d,
    );
    Some((center, (a - center).norm_squared()))
}

fn orient(p: &[Vec2], v: [usize; 3]) -> f64 {
    let (a, b, c) = (p[v[0]], p[v[1]], p[v[2]]);
    (b - a).perp(&(c - a))
}

fn make_tri(p: &[Vec2], mut v: [usize; 3]) -> Option<Tri> {
    if orient(p, v) < 0.0 {
        v.swap(1, 2);
    }
    circumcircle(p, v).map(|(center, radius2)| Tri { v, center, radius2 })
}

/// True unless every point lies on one line (within a relative tolerance).
pub fn has_area(points: &[Vec2]) -> bool {
    if points.len() < 3 {
        return false;
    }
    let o = points[0];
    let far = points.iter().max_by(|a, b| (*a - o).norm().total_cmp(&(*b - o).norm())).copied();
    let Some(far) = far else { return false };
    let axis = far - o;
    let len = axis.norm();
    if len == 0.0 {
        return false;
    }
    points.iter().any(|p| (axis.perp(&(p - o)) / len).abs() > 1e-9 * len)
}

/// Triangulate `points`, inserting them in index order.
pub fn delaunay(points: &[Vec2]) -> Result<Triangulation> {
    let n = points.len();
    if !has_area(points) {
        return Err(Error::Degenerate(format!("{n} points do not span a plane")));
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mid = (lo + hi) * 0.5;
    let span = (hi - lo).amax().max(1e-12);
    let mut p = points.to_vec();
    p.push(mid + Vec2::new(-100.0, -100.0) * span);
    p.push(mid + Vec2::new(100.0, -100.0) * span);
    p.push(mid + Vec2::new(0.0, 100.0) * span);

    let mut tris = vec![make_tri(&p, [n, n + 1, n + 2]).expect("super triangle")];
    for i in 0..n {
        let q = p[i];
        let (bad, keep): (Vec<Tri>, Vec<Tri>) = tris
            .into_iter()
            .partition(|t| (q - t.center).norm_squared() < t.radius2 * (1.0 - INCIRCLE_EPS));
        tris = keep;
        // Boundary of the cavity: edges used by exactly one bad triangle.
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(bad.len() * 3);
        for t in &bad {
            for k in 0..3 {
                edges.push((t.v[k], t.v[(k + 1) % 3]));
            }
        }
        for &(a, b) in &edges {
            let shared = edges.iter().any(|&(c, d)| c == b && d == a);
            if !shared {
                match make_tri(&p, [a, b, i]) {
                    Some(t) => tris.push(t),
                    None => return Err(Error::Degenerate(format!("point {i} is collinear with a cavity edge"))),
                }
            }
        }
    }
    let triangles: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.v.iter().all(|&v| v < n))
        .map(|t| t.v)
        .collect();
    if triangles.is_empty() {
        return Err(Error::Degenerate("triangulation is empty".into()));
    }
    Ok(Triangulation { triangles, n_points: n })
}

impl Triangulation {
    /// Sorted neighbor lists; the relation is symmetric.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_points];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                out[a].push(b);
                out[b].push(a);
            }
        }
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        out
    }
}
