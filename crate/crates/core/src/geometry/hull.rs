//! Andrew's monotone chain.

use crate::error::{Error, Result};
use crate::geometry::polygon::{orient, Point, Polygon};

/// Convex hull with collinear points removed, counterclockwise, starting at
/// the lexicographically smallest point.
///
/// Fewer than three non-collinear points is a measurement error.
pub fn convex_hull(points: &[Point]) -> Result<Polygon> {
    let mut pts: Vec<Point> = points.to_vec();
    if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::measurement("hull input contains non-finite points"));
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::measurement(format!(
            "hull needs 3 distinct points, got {}",
            pts.len()
        )));
    }

    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(Error::measurement("hull input points are collinear"));
    }
    Ok(Polygon::new(hull))
}

/// True when `p` lies inside or on the convex counterclockwise polygon,
/// within `tol` (distance-like, scaled by edge length).
pub fn contains_point(hull: &Polygon, p: Point, tol: f64) -> bool {
    hull.edges()
        .all(|(a, b)| orient(a, b, p) >= -tol * a.dist(b).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A point is a hull vertex iff it is not inside or on any triangle of
    /// other points and not between two others on a segment.
    fn brute_force_vertices(pts: &[Point]) -> Vec<Point> {
        let mut out = Vec::new();
        'outer: for (i, &p) in pts.iter().enumerate() {
            for a in 0..pts.len() {
                for b in 0..pts.len() {
                    if a == i || b == i || a == b {
                        continue;
                    }
                    let (pa, pb) = (pts[a], pts[b]);
                    if orient(pa, pb, p) == 0.0 && (p - pa).dot(p - pb) < 0.0 {
                        continue 'outer;
                    }
                    for c in 0..pts.len() {
                        if c == i || c == a || c == b {
                            continue;
                        }
                        let pc = pts[c];
                        let o = orient(pa, pb, pc);
                        if o <= 0.0 {
                            continue;
                        }
                        if orient(pa, pb, p) >= 0.0 && orient(pb, pc, p) >= 0.0 && orient(pc, pa, p) >= 0.0 {
                            continue 'outer;
                        }
                    }
                }
            }
            out.push(p);
        }
        out.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        out
    }

    #[test]
    fn square_with_interior_and_edge_points() {
        let pts: Vec<Point> = [(0., 0.), (2., 0.), (2., 2.), (0., 2.), (1., 1.), (1., 0.), (2., 1.)]
            .into_iter()
            .map(Point::from)
            .collect();
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.area(), 4.0);
        assert!(h.signed_area() > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(convex_hull(&line), Err(Error::Measurement(_))));
        assert!(convex_hull(&[Point::new(1.0, 1.0); 4]).is_err());
        assert!(convex_hull(&[]).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let pts: Vec<Point> = (0..50)
                .map(|_| Point::new(rng.random_range(0..40) as f64, rng.random_range(0..40) as f64))
                .collect();
            let mut uniq = pts.clone();
            uniq.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
            uniq.dedup();
            let mut got = convex_hull(&pts).unwrap().points;
            got.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
            assert_eq!(got, brute_force_vertices(&uniq));
        }
    }
}
