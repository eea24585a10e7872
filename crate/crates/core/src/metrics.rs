//! Segmentation agreement: Dice, Jaccard, Hausdorff and mean absolute distance.

use crate::data::image::Mask;
use crate::error::{ensure, Result};
use crate::geometry::polygon::Point;

fn overlap(a: &Mask, b: &Mask) -> Result<(usize, usize, usize)> {
    ensure!(
        a.same_shape(b),
        "masks differ in shape: {}×{} vs {}×{}",
        a.width,
        a.height,
        b.width,
        b.height
    );
    let inter = a.data.iter().zip(&b.data).filter(|(&x, &y)| x != 0 && y != 0).count();
    Ok((a.count(), b.count(), inter))
}

/// `2|A∩B| / (|A| + |B|)`; two empty masks agree perfectly (1).
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    let (na, nb, i) = overlap(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * i as f64 / (na + nb) as f64)
}

/// `|A∩B| / |A∪B|`; two empty masks give 1.
pub fn jaccard(a: &Mask, b: &Mask) -> Result<f64> {
    let (na, nb, i) = overlap(a, b)?;
    let union = na + nb - i;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(i as f64 / union as f64)
}

/// Directed Hausdorff distance, squared, with the early-break scan: once a
/// point of `b` is closer than the running maximum, `p` cannot raise it.
fn directed_sq(a: &[Point], b: &[Point]) -> f64 {
    let mut cmax = 0.0f64;
    for &p in a {
        let mut cmin = f64::INFINITY;
        for &q in b {
            let d = p.dist2(q);
            if d < cmax {
                cmin = d;
                break;
            }
            cmin = cmin.min(d);
        }
        cmax = cmax.max(cmin);
    }
    cmax
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    ensure!(!a.is_empty() && !b.is_empty(), "Hausdorff distance of an empty point set");
    Ok(directed_sq(a, b).max(directed_sq(b, a)).sqrt())
}

/// Nearest-neighbour distances from each query point to `set`, using an
/// x-sorted copy of `set` and a window that widens until `|dx|` exceeds the
/// best distance found.
pub fn nearest_distances(query: &[Point], set: &[Point]) -> Vec<f64> {
    let mut sorted = set.to_vec();
    sorted.sort_by(|p, q| p.x.total_cmp(&q.x));
    query
        .iter()
        .map(|&p| {
            let start = sorted.partition_point(|q| q.x < p.x);
            let mut best = f64::INFINITY;
            for q in &sorted[start..] {
                if (q.x - p.x).powi(2) >= best {
                    break;
                }
                best = best.min(p.dist2(*q));
            }
            for q in sorted[..start].iter().rev() {
                if (q.x - p.x).powi(2) >= best {
                    break;
                }
                best = best.min(p.dist2(*q));
            }
            best.sqrt()
        })
        .collect()
}

/// Mean over the automatic contour `auto` of the distance to the nearest
/// manual contour point.
pub fn mad(auto: &[Point], manual: &[Point]) -> Result<f64> {
    ensure!(!auto.is_empty() && !manual.is_empty(), "mean absolute distance of an empty point set");
    let d = nearest_distances(auto, manual);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(bits: &[u8]) -> Mask {
        Mask::new(bits.len(), 1, bits.to_vec()).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let a = mask(&[1, 1, 1, 1, 0, 0]);
        let b = mask(&[0, 0, 1, 1, 1, 1]);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert!((jaccard(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &mask(&[0, 0, 0, 0, 1, 1])).unwrap(), 0.0);
        let e = mask(&[0; 6]);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
        assert!(dice(&a, &mask(&[1])).is_err());
    }

    #[test]
    fn distance_examples() {
        let p = |x: f64, y: f64| Point::new(x, y);
        assert_eq!(hausdorff(&[p(0., 0.)], &[p(3., 4.)]).unwrap(), 5.0);
        assert_eq!(mad(&[p(0., 0.), p(0., 2.)], &[p(0., 1.)]).unwrap(), 1.0);
        assert!(hausdorff(&[], &[p(0., 0.)]).is_err());
        assert!(mad(&[p(0., 0.)], &[]).is_err());
    }
}
