//! Minimum-area triangle enclosing a convex polygon.
//!
//! A minimal triangle always has at least one side flush with a polygon edge
//! and touches the polygon at the midpoint of every side. Up to sliding
//! moves that keep the area fixed, that leaves two families: three flush
//! sides, or two flush sides plus a third side tangent at a vertex that is
//! its midpoint. Both are enumerated exhaustively.

use crate::error::{Error, Result};
use crate::geometry::hull::convex_hull;
use crate::geometry::polygon::{orient, Point, Polygon};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    /// Counterclockwise.
    pub vertices: [Point; 3],
}

impl Triangle {
    pub fn new(a: Point, b: Point, c: Point) -> Self {
        if orient(a, b, c) < 0.0 {
            Triangle { vertices: [a, c, b] }
        } else {
            Triangle { vertices: [a, b, c] }
        }
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        orient(a, b, c).abs() / 2.0
    }

    /// Inside or within `tol` px of the boundary.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let v = self.vertices;
        (0..3).all(|i| {
            let (a, b) = (v[i], v[(i + 1) % 3]);
            orient(a, b, p) / a.dist(b) >= -tol
        })
    }

    pub fn side_midpoints(&self) -> [Point; 3] {
        let v = self.vertices;
        [
            v[0].midpoint(v[1]),
            v[1].midpoint(v[2]),
            v[2].midpoint(v[0]),
        ]
    }
}

fn intersect(p: Point, d: Point, q: Point, e: Point) -> Point {
    let s = (q - p).cross(e) / d.cross(e);
    p + d * s
}

/// Smallest triangle containing every point. Collinear or too few points is
/// a measurement error.
pub fn min_enclosing_triangle(points: &[Point]) -> Result<Triangle> {
    let hull = convex_hull(points)?;
    min_triangle_of_hull(&hull)
}

/// As [`min_enclosing_triangle`], for a polygon that is already a
/// counterclockwise convex hull without collinear vertices.
pub fn min_triangle_of_hull(hull: &Polygon) -> Result<Triangle> {
    let p = &hull.points;
    let n = p.len();
    if n < 3 {
        return Err(Error::measurement("enclosing triangle needs a 2-D hull"));
    }
    if n == 3 {
        return Ok(Triangle::new(p[0], p[1], p[2]));
    }
    let dir: Vec<Point> = (0..n).map(|i| p[(i + 1) % n] - p[i]).collect();
    let extent = p
        .iter()
        .map(|q| q.dist(p[0]))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let par_tol = 1e-12;
    let tol = 1e-9 * extent;

    let mut best: Option<Triangle> = None;
    let mut consider = |t: Triangle| {
        if best.is_none_or(|b| t.area() < b.area()) {
            best = Some(t);
        }
    };

    // three flush sides: bounded iff each consecutive turn is below π
    for i in 0..n {
        for j in i + 1..n {
            if dir[i].cross(dir[j]) <= par_tol * dir[i].norm() * dir[j].norm() {
                continue;
            }
            for k in j + 1..n {
                let ok = [(j, k), (k, i)]
                    .iter()
                    .all(|&(a, b)| dir[a].cross(dir[b]) > par_tol * dir[a].norm() * dir[b].norm());
                if ok {
                    consider(Triangle::new(
                        intersect(p[i], dir[i], p[j], dir[j]),
                        intersect(p[j], dir[j], p[k], dir[k]),
                        intersect(p[k], dir[k], p[i], dir[i]),
                    ));
                }
            }
        }
    }

    // two flush sides meeting at x, third side tangent at its midpoint
    for i in 0..n {
        for j in i + 1..n {
            let c = dir[i].cross(dir[j]);
            if c.abs() <= par_tol * dir[i].norm() * dir[j].norm() {
                continue;
            }
            let x = intersect(p[i], dir[i], p[j], dir[j]);
            // rays from x bounding the wedge that holds the polygon
            let wi = dir[i] * -c.signum();
            let wj = dir[j] * c.signum();
            let den = wi.cross(wj);
            for m in 0..n {
                let r = (p[m] - x) * 2.0;
                let s = r.cross(wj) / den;
                let t = wi.cross(r) / den;
                if s <= tol || t <= tol {
                    continue;
                }
                let (y, z) = (x + wi * s, x + wj * t);
                let side = orient(y, z, x).signum();
                let supports = [p[(m + n - 1) % n], p[(m + 1) % n]]
                    .iter()
                    .all(|&q| side * orient(y, z, q) / y.dist(z) >= -tol);
                if supports {
                    consider(Triangle::new(x, y, z));
                }
            }
        }
    }
    best.ok_or_else(|| Error::measurement("no enclosing triangle found"))
}
