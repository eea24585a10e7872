//! One-way analysis of variance.

use std::fmt::Write;

use crate::error::{ensure, Result};
use crate::stats::mean;
use crate::stats::special::f_sf;

#[derive(Clone, Debug, PartialEq)]
pub struct AnovaTable {
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub df_total: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    pub f: f64,
    pub p: f64,
}

impl AnovaTable {
    /// From precomputed sums of squares and degrees of freedom.
    pub fn from_sums(ss_between: f64, df_between: f64, ss_within: f64, df_within: f64) -> Result<Self> {
        ensure!(df_between >= 1.0, "between-groups df must be at least 1, got {df_between}");
        ensure!(df_within >= 1.0, "within-groups df must be at least 1, got {df_within}");
        ensure!(
            ss_between >= 0.0 && ss_within >= 0.0,
            "sums of squares must be non-negative"
        );
        let ms_between = ss_between / df_between;
        let ms_within = ss_within / df_within;
        let f = if ss_between == 0.0 {
            0.0
        } else if ms_within == 0.0 {
            f64::INFINITY
        } else {
            ms_between / ms_within
        };
        Ok(AnovaTable {
            ss_between,
            ss_within,
            ss_total: ss_between + ss_within,
            df_between,
            df_within,
            df_total: df_between + df_within,
            ms_between,
            ms_within,
            f,
            p: f_sf(f, df_between, df_within),
        })
    }

    /// Plain-text table with columns Source, SS, df, MS, F, p-value.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>12}{:>6}{:>12}{:>10}{:>10}", "Source", "SS", "df", "MS", "F", "p-value");
        let _ = writeln!(
            s,
            "{:<16}{:>12.4}{:>6}{:>12.4}{:>10.3}{:>10.4}",
            "Between groups", self.ss_between, self.df_between, self.ms_between, self.f, self.p
        );
        let _ = writeln!(
            s,
            "{:<16}{:>12.4}{:>6}{:>12.4}",
            "Within groups", self.ss_within, self.df_within, self.ms_within
        );
        let _ = writeln!(s, "{:<16}{:>12.4}{:>6}", "Total", self.ss_total, self.df_total);
        s
    }
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaTable> {
    ensure!(groups.len() >= 2, "ANOVA needs at least 2 groups, got {}", groups.len());
    ensure!(groups.iter().all(|g| !g.is_empty()), "ANOVA groups must be non-empty");
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let ss_between: f64 = groups
        .iter()
        .map(|g| g.len() as f64 * (mean(g) - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    AnovaTable::from_sums(
        ss_between,
        (groups.len() - 1) as f64,
        ss_within,
        (all.len() - groups.len()) as f64,
    )
}
