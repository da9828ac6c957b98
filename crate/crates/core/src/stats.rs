//! Small descriptive-statistics helpers.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (Hyndman & Fan type 7) of unsorted data.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior median with a central credible band.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Band {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    /// Median and the central `mass` interval (e.g. `0.99` for 0.5% / 99.5%).
    pub fn from_sample(x: &[f64], mass: f64) -> Self {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        let tail = (1.0 - mass) / 2.0;
        Band {
            median: quantile_sorted(&v, 0.5),
            lower: quantile_sorted(&v, tail),
            upper: quantile_sorted(&v, 1.0 - tail),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Monte Carlo standard error of the mean of a correlated chain by non-overlapping
/// batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    assert!(size >= 2, "too few draws for {batches} batches");
    let means: Vec<f64> = x.chunks_exact(size).take(batches).map(mean).collect();
    (variance(&means) / batches as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_type7() {
        let x = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(quantile(&x, 0.5), 2.5);
        assert!((quantile(&x, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn single_point_band_collapses() {
        let b = Band::from_sample(&[1.25], 0.99);
        assert_eq!((b.lower, b.median, b.upper), (1.25, 1.25, 1.25));
    }

    #[test]
    fn pearson_extremes() {
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[2.0; 10]).is_none());
    }
}
