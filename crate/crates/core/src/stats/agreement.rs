//! Paired automatic/manual comparisons: Bland–Altman, linear fit, paired t.

use crate::error::{ensure, Error, Result};
use crate::stats::special::t_sf_two_sided;
use crate::stats::{mean, sample_sd};

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSeries {
    pub name: String,
    pub units: String,
    pub auto: Vec<f64>,
    pub man: Vec<f64>,
}

impl PairedSeries {
    pub fn new(name: &str, units: &str, auto: Vec<f64>, man: Vec<f64>) -> Result<Self> {
        ensure!(
            auto.len() == man.len(),
            "{name}: {} automatic vs {} manual values",
            auto.len(),
            man.len()
        );
        ensure!(auto.len() >= 2, "{name}: need at least 2 pairs, got {}", auto.len());
        Ok(PairedSeries {
            name: name.to_string(),
            units: units.to_string(),
            auto,
            man,
        })
    }

    pub fn len(&self) -> usize {
        self.auto.len()
    }

    pub fn is_empty(&self) -> bool {
        self.auto.is_empty()
    }

    pub fn differences(&self) -> Vec<f64> {
        self.auto.iter().zip(&self.man).map(|(a, m)| a - m).collect()
    }
}

/// Denominator of the coefficient of variation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CvDenominator {
    /// `mean(auto) + mean(man)`.
    #[default]
    Sum,
    /// `(mean(auto) + mean(man)) / 2`.
    Average,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlandAltman {
    pub n: usize,
    pub bias: f64,
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    /// Reproducibility coefficient, 1.96 SD.
    pub rpc: f64,
    /// Percent; `None` when the denominator is zero.
    pub cv: Option<f64>,
}

pub fn bland_altman(series: &PairedSeries, cv: CvDenominator) -> BlandAltman {
    let d = series.differences();
    let bias = mean(&d);
    let sd = sample_sd(&d);
    let rpc = 1.96 * sd;
    let mut denom = mean(&series.auto) + mean(&series.man);
    if cv == CvDenominator::Average {
        denom /= 2.0;
    }
    BlandAltman {
        n: d.len(),
        bias,
        sd,
        loa_low: bias - rpc,
        loa_high: bias + rpc,
        rpc,
        cv: (denom != 0.0).then(|| 100.0 * sd / denom),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; NaN when `auto` is constant.
    pub r: f64,
}

/// Least squares `auto = slope·man + intercept`.
pub fn pearson_fit(series: &PairedSeries) -> Result<LinearFit> {
    let (x, y) = (&series.man, &series.auto);
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::contract(format!("{}: manual values are constant", series.name)));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r: sxy / (sxx * syy).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Two-sided paired t-test on `auto − man`.
pub fn paired_t_test(series: &PairedSeries) -> PairedTTest {
    let d = series.differences();
    let n = d.len() as f64;
    let (m, sd) = (mean(&d), sample_sd(&d));
    let t = if sd == 0.0 {
        if m == 0.0 { 0.0 } else { f64::INFINITY.copysign(m) }
    } else {
        m / (sd / n.sqrt())
    };
    PairedTTest {
        t,
        df: n - 1.0,
        p: t_sf_two_sided(t, n - 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series() {
        let s = PairedSeries::new("v", "mL", vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 4.0]).unwrap();
        let ba = bland_altman(&s, CvDenominator::Sum);
        assert_eq!((ba.bias, ba.sd, ba.rpc), (0.0, 0.0, 0.0));
        let fit = pearson_fit(&s).unwrap();
        assert_eq!((fit.slope, fit.intercept, fit.r), (1.0, 0.0, 1.0));
        assert_eq!(paired_t_test(&s).p, 1.0);
    }

    #[test]
    fn exact_linear_fit() {
        let s = PairedSeries::new("v", "", vec![5.0, 7.0, 9.0], vec![1.0, 2.0, 3.0]).unwrap();
        let fit = pearson_fit(&s).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.r - 1.0).abs() < 1e-12);
        let neg = PairedSeries::new("v", "", vec![-1.0, -2.0, -3.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!((pearson_fit(&neg).unwrap().r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contract_violations() {
        assert!(PairedSeries::new("v", "", vec![1.0], vec![1.0]).is_err());
        assert!(PairedSeries::new("v", "", vec![1.0, 2.0], vec![1.0]).is_err());
        let flat = PairedSeries::new("v", "", vec![1.0, 2.0], vec![3.0, 3.0]).unwrap();
        assert!(pearson_fit(&flat).is_err());
    }

    #[test]
    fn cv_conventions_and_undefined() {
        let s = PairedSeries::new("v", "", vec![1.0, 3.0], vec![2.0, 2.0]).unwrap();
        let lit = bland_altman(&s, CvDenominator::Sum).cv.unwrap();
        let avg = bland_altman(&s, CvDenominator::Average).cv.unwrap();
        assert!((avg - 2.0 * lit).abs() < 1e-12);
        let z = PairedSeries::new("v", "", vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(bland_altman(&z, CvDenominator::Sum).cv, None);
    }
}
