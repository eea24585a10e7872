//! Agreement statistics, one-way ANOVA and box-plot summaries.

pub mod agreement;
pub mod anova;
pub mod boxplot;
pub mod special;

pub use agreement::{
    bland_altman, paired_t_test, pearson_fit, BlandAltman, CvDenominator, LinearFit, PairedSeries,
    PairedTTest,
};
pub use anova::{anova_oneway, AnovaTable};
pub use boxplot::BoxSummary;
pub use special::{f_sf, t_sf_two_sided};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample (n − 1) standard deviation.
pub fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}
