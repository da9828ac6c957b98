use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::IngestError;
use crate::stats;

/// Maps a series affinely onto `[0, 1]`: `(x - min) / (max - min)`.
pub fn unit_normalize(series: &[f64]) -> Result<Vec<f64>, IngestError> {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if !(hi > lo) {
        return Err(IngestError::ZeroRange);
    }
    let range = hi - lo;
    Ok(series.iter().map(|v| (v - lo) / range).collect())
}

/// One entry of a correlation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub r: f64,
    /// Two-sided p-value of `H0: r = 0` from the t-statistic with `n - 2` degrees of freedom.
    pub p_value: f64,
    /// `***` for p < 0.001, `**` for p < 0.01, `*` for p < 0.05.
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub labels: Vec<String>,
    /// Symmetric, row-major `labels.len()^2` cells.
    pub cells: Vec<CorrelationCell>,
}

impl CorrelationTable {
    pub fn get(&self, i: usize, j: usize) -> &CorrelationCell {
        &self.cells[i * self.labels.len() + j]
    }
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Pairwise Pearson correlations with significance stars.
pub fn correlation_table(
    series: &[Vec<f64>],
    labels: &[String],
) -> Result<CorrelationTable, IngestError> {
    if series.len() != labels.len() {
        return Err(IngestError::Length(format!(
            "{} series, {} labels",
            series.len(),
            labels.len()
        )));
    }
    let n = series.first().map_or(0, Vec::len);
    if n < 3 || series.iter().any(|s| s.len() != n) {
        return Err(IngestError::Length(format!(
            "lengths {:?}",
            series.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    for (s, l) in series.iter().zip(labels) {
        if stats::variance(s) == 0.0 {
            return Err(IngestError::ZeroVariance(l.clone()));
        }
    }
    let m = series.len();
    let mut cells = Vec::with_capacity(m * m);
    for a in series {
        for b in series {
            let r = stats::pearson(a, b).expect("variances checked above");
            let p = p_value(r, n);
            cells.push(CorrelationCell {
                r,
                p_value: p,
                stars: stars(p).to_string(),
            });
        }
    }
    Ok(CorrelationTable {
        labels: labels.to_vec(),
        cells,
    })
}

/// Arithmetic mean of the observations within one calendar month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthlyValue {
    pub year: i32,
    pub month: u32,
    pub value: f64,
}

impl MonthlyValue {
    /// Mid-month reference date used for nearest-date matching.
    pub fn anchor(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 15).unwrap()
    }
}

/// Aggregates a dated series to calendar months by the arithmetic mean, in month order.
pub fn monthly_means(dates: &[NaiveDate], values: &[f64]) -> Vec<MonthlyValue> {
    let mut acc: std::collections::BTreeMap<(i32, u32), (f64, usize)> = Default::default();
    for (d, v) in dates.iter().zip(values) {
        let e = acc.entry((d.year(), d.month())).or_default();
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((year, month), (s, c))| MonthlyValue {
            year,
            month,
            value: s / c as f64,
        })
        .collect()
}

/// For each target date, the monthly value whose mid-month anchor is closest
/// (earlier month on ties).
pub fn nearest_match(monthly: &[MonthlyValue], targets: &[NaiveDate]) -> Vec<f64> {
    targets
        .iter()
        .map(|d| {
            monthly
                .iter()
                .min_by_key(|m| (m.anchor() - *d).num_days().abs())
                .map_or(f64::NAN, |m| m.value)
        })
        .collect()
}
