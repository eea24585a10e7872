//! Global Niblack thresholding used to build the second input channel.

use crate::data::image::GrayImage;

/// Default bias `k`.
pub const DEFAULT_K: f64 = 2.0;

/// Threshold `T = m + k·δ` from the mean and population standard deviation
/// of the whole image.
pub fn global_threshold(img: &GrayImage, k: f64) -> f64 {
    let n = img.data.len() as f64;
    let mean = img.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = img
        .data
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    mean + k * var.sqrt()
}

/// 255 where the pixel is strictly above the global threshold, 0 elsewhere.
pub fn niblack_threshold(img: &GrayImage, k: f64) -> GrayImage {
    let t = global_threshold(img, k);
    GrayImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&v| if v as f64 > t { 255 } else { 0 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(v: &[u8]) -> GrayImage {
        GrayImage::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn constant_image_is_all_zero() {
        assert!(niblack_threshold(&img(&[77; 9]), 2.0).data.iter().all(|&v| v == 0));
    }

    #[test]
    fn small_outlier_stays_below_threshold() {
        let i = img(&[0, 0, 0, 8]);
        let t = global_threshold(&i, 2.0);
        assert!((t - (2.0 + 2.0 * 12f64.sqrt())).abs() < 1e-12);
        assert!((t - 8.93).abs() < 0.01);
        assert_eq!(niblack_threshold(&i, 2.0).data, vec![0; 4]);
    }

    #[test]
    fn k_sensitivity() {
        let i = img(&[0, 0, 0, 200]);
        let t2 = global_threshold(&i, 2.0);
        assert!((t2 - 223.2).abs() < 0.05);
        assert_eq!(niblack_threshold(&i, 2.0).data, vec![0; 4]);
        let t1 = global_threshold(&i, 1.0);
        assert!((t1 - 136.6).abs() < 0.05);
        assert_eq!(niblack_threshold(&i, 1.0).data, vec![0, 0, 0, 255]);
    }

    proptest! {
        #[test]
        fn permutation_equivariant(values in proptest::collection::vec(any::<u8>(), 2..64), rot in 0usize..64) {
            let n = values.len();
            let r = rot % n;
            let mut permuted = values.clone();
            permuted.rotate_left(r);
            let a = niblack_threshold(&img(&values), 2.0);
            let mut a_perm = a.data.clone();
            a_perm.rotate_left(r);
            let b = niblack_threshold(&img(&permuted), 2.0);
            prop_assert_eq!(a_perm, b.data);
        }
    }
}
