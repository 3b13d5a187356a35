use serde::Serialize;

use crate::error::{Error, Result};

/// `log sum exp` of the terms; `-inf` for an empty slice or all `-inf` terms.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// A per-k statistic, given either directly or by its logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Statistic {
    Value(f64),
    Log(f64),
}

impl Statistic {
    fn log(self) -> Result<f64> {
        match self {
            Statistic::Value(v) if v > 0.0 && v.is_finite() => Ok(v.ln()),
            Statistic::Value(v) => Err(Error::NonpositiveStatistic(v)),
            Statistic::Log(l) if l.is_finite() => Ok(l),
            Statistic::Log(l) => Err(Error::NonpositiveStatistic(l.exp())),
        }
    }
}

/// `k^-2 log(statistic)` for each matched pair.
pub fn normalized_log_entropy(values: &[Statistic], k_grid: &[usize]) -> Result<Vec<f64>> {
    if values.len() != k_grid.len() {
        return Err(Error::ShapeMismatch(format!("{} statistics for {} sizes", values.len(), k_grid.len())));
    }
    values
        .iter()
        .zip(k_grid)
        .map(|(v, &k)| {
            if k == 0 {
                return Err(Error::InvalidArgument("k must be positive".into()));
            }
            Ok(v.log()? / (k * k) as f64)
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct LineFit {
    slope: f64,
    intercept: f64,
    stderr: f64,
}

fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(&a, &b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit { slope, intercept, stderr }
}

/// Regression of one series against `|log eps|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub residuals: Vec<f64>,
    /// Slopes between neighbouring scales.
    pub local_slopes: Vec<f64>,
    /// Geometric midpoints of the neighbouring scales.
    pub local_eps: Vec<f64>,
    /// Local slopes extrapolated linearly in `eps` to `eps = 0`.
    pub small_scale_exponent: f64,
}

impl ScaleFit {
    fn new(eps_grid: &[f64], values: &[f64]) -> Self {
        let x: Vec<f64> = eps_grid.iter().map(|e| e.ln().abs()).collect();
        let f = line_fit(&x, values);
        let residuals = x.iter().zip(values).map(|(&a, &b)| b - f.intercept - f.slope * a).collect();
        let n = eps_grid.len();
        let local_slopes: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / (x[i + 1] - x[i])).collect();
        let local_eps: Vec<f64> = (0..n - 1).map(|i| (eps_grid[i] * eps_grid[i + 1]).sqrt()).collect();
        let small_scale_exponent = line_fit(&local_eps, &local_slopes).intercept;
        ScaleFit { slope: f.slope, intercept: f.intercept, stderr: f.stderr, residuals, local_slopes, local_eps, small_scale_exponent }
    }
}

/// Linear trend of a per-k quantity in `1/k`; the intercept is the `k -> inf` value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KTrend {
    pub k_grid: Vec<usize>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

impl KTrend {
    pub fn fit(k_grid: &[usize], values: &[f64]) -> Result<Self> {
        if k_grid.len() != values.len() || k_grid.len() < 2 {
            return Err(Error::DegenerateGrid("trend needs at least two sizes".into()));
        }
        let x: Vec<f64> = k_grid.iter().map(|&k| 1.0 / k as f64).collect();
        let f = line_fit(&x, values);
        if !f.slope.is_finite() {
            return Err(Error::DegenerateGrid("sizes must be distinct".into()));
        }
        Ok(KTrend { k_grid: k_grid.to_vec(), values: values.to_vec(), slope: f.slope, intercept: f.intercept })
    }
}

/// Scaling regression of `k^-2 log` statistics over a grid of scales and sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub eps_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    /// `log_counts[i][j]` is the value at `k_grid[i]`, `eps_grid[j]`.
    pub log_counts: Vec<Vec<f64>>,
    /// Common slope of all rows, each row with its own intercept.
    pub slope: f64,
    pub stderr: f64,
    pub per_k: Vec<ScaleFit>,
    /// Trend of the per-k small-scale exponents, when there are at least two sizes.
    pub trend: Option<KTrend>,
}

impl DimensionEstimate {
    pub fn small_scale_exponents(&self) -> Vec<f64> {
        self.per_k.iter().map(|f| f.small_scale_exponent).collect()
    }
}

fn check_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.len() < 3 {
        return Err(Error::DegenerateGrid(format!("{} scales, need at least 3", eps_grid.len())));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateGrid("scales must be positive".into()));
    }
    let dec = eps_grid.windows(2).all(|w| w[1] < w[0]);
    let inc = eps_grid.windows(2).all(|w| w[1] > w[0]);
    if !(dec || inc) {
        return Err(Error::DegenerateGrid("scales must be strictly monotone".into()));
    }
    let (lo, hi) = (eps_grid[0].min(eps_grid[eps_grid.len() - 1]), eps_grid[0].max(eps_grid[eps_grid.len() - 1]));
    if hi / lo < 4.0 {
        return Err(Error::DegenerateGrid(format!("scales span {:.3}x, need at least 4x", hi / lo)));
    }
    Ok(())
}

/// Slope of `log_counts` against `|log eps|`, per row and pooled.
pub fn scaling_exponent(eps_grid: &[f64], k_grid: &[usize], log_counts: &[Vec<f64>]) -> Result<DimensionEstimate> {
    check_grid(eps_grid)?;
    if k_grid.is_empty() || log_counts.len() != k_grid.len() {
        return Err(Error::DegenerateGrid("one row per size required".into()));
    }
    if log_counts.iter().any(|r| r.len() != eps_grid.len() || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::DegenerateGrid("table has missing or non-finite cells".into()));
    }
    let per_k: Vec<ScaleFit> = log_counts.iter().map(|row| ScaleFit::new(eps_grid, row)).collect();

    let x: Vec<f64> = eps_grid.iter().map(|e| e.ln().abs()).collect();
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let mut sxy = 0.0;
    for row in log_counts {
        let my = row.iter().sum::<f64>() / row.len() as f64;
        sxy += x.iter().zip(row).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>();
    }
    let rows = log_counts.len() as f64;
    let slope = sxy / (rows * sxx);
    let mut rss = 0.0;
    for row in log_counts {
        let my = row.iter().sum::<f64>() / row.len() as f64;
        rss += x.iter().zip(row).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum::<f64>();
    }
    let dof = rows * x.len() as f64 - rows - 1.0;
    let stderr = if dof > 0.0 { (rss / dof / (rows * sxx)).sqrt() } else { 0.0 };

    let trend = if k_grid.len() >= 2 {
        let sse: Vec<f64> = per_k.iter().map(|f| f.small_scale_exponent).collect();
        Some(KTrend::fit(k_grid, &sse)?)
    } else {
        None
    };
    Ok(DimensionEstimate {
        eps_grid: eps_grid.to_vec(),
        k_grid: k_grid.to_vec(),
        log_counts: log_counts.to_vec(),
        slope,
        stderr,
        per_k,
        trend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        let v = normalized_log_entropy(&[Statistic::Log(100.0)], &[10]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        let d: f64 = 0.3;
        let r = 1.5;
        let k = 6usize;
        let s = r * (k * k) as f64;
        let single = normalized_log_entropy(&[Statistic::Log(s * d.ln())], &[k]).unwrap()[0];
        assert!((single - r * d.ln()).abs() < 1e-14);
        let two = log_sum_exp(&[4.0 * d.ln(), 4.0 * d.ln()]);
        let v = normalized_log_entropy(&[Statistic::Log(two)], &[2]).unwrap()[0];
        assert!((v - (2f64.ln() + 4.0 * d.ln()) / 4.0).abs() < 1e-15);
        assert!(matches!(normalized_log_entropy(&[Statistic::Value(0.0)], &[3]), Err(Error::NonpositiveStatistic(_))));
        assert!(matches!(normalized_log_entropy(&[Statistic::Log(f64::NEG_INFINITY)], &[3]), Err(Error::NonpositiveStatistic(_))));
    }

    #[test]
    fn exact_power_law() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let rows = vec![eps.iter().map(|e: &f64| 3.0 - 1.7 * e.ln()).collect::<Vec<_>>()];
        let est = scaling_exponent(&eps, &[1], &rows).unwrap();
        assert!((est.slope - 1.7).abs() < 1e-12);
        assert!((est.per_k[0].small_scale_exponent - 1.7).abs() < 1e-12);
        assert!(est.stderr < 1e-12);
        assert!(est.trend.is_none());
        let flat = scaling_exponent(&eps, &[1], &[vec![0.0; 4]]).unwrap();
        assert_eq!(flat.slope, 0.0);
    }

    #[test]
    fn degenerate_grids() {
        assert!(scaling_exponent(&[0.2, 0.1], &[1], &[vec![0.0, 1.0]]).is_err());
        assert!(scaling_exponent(&[0.2, 0.1, 0.15], &[1], &[vec![0.0; 3]]).is_err());
        assert!(scaling_exponent(&[0.2, 0.15, 0.1], &[1], &[vec![0.0; 3]]).is_err());
        assert!(scaling_exponent(&[0.2, 0.1, 0.05], &[1, 2], &[vec![0.0; 3]]).is_err());
        assert!(scaling_exponent(&[0.2, 0.1, 0.05], &[1], &[vec![0.0, f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn trend_intercept() {
        let t = KTrend::fit(&[8, 16, 32], &[1.0 - 1.0 / 8.0, 1.0 - 1.0 / 16.0, 1.0 - 1.0 / 32.0]).unwrap();
        assert!((t.intercept - 1.0).abs() < 1e-12);
        assert!((t.slope + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn log_sum_exp_matches_direct(v in proptest::collection::vec(-30.0f64..30.0, 1..20)) {
            let direct = v.iter().map(|x| x.exp()).sum::<f64>().ln();
            prop_assert!((log_sum_exp(&v) - direct).abs() < 1e-12);
        }
    }
}
