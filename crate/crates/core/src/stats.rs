//! Small statistics helpers shared by the analysis modules.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};

/// Ordinary least-squares slope of `ys` against their index `1..=n`.
pub fn ols_slope(ys: &[f64]) -> Result<f64> {
    let n = ys.len();
    if n < 2 {
        return Err(Error::Domain(format!("slope needs at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mean_x = (nf + 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &y) in ys.iter().enumerate() {
        let dx = (k + 1) as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Kolmogorov–Smirnov statistic of `samples` against Uniform(lo, hi).
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Pearson χ² statistic and its upper-tail p-value (`bins − 1 − fitted` dof).
pub fn chi_square(observed: &[f64], expected: &[f64], fitted: usize) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() < 2 + fitted {
        return Err(Error::Domain("chi-square needs matching bins and positive dof".into()));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = (observed.len() - 1 - fitted) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// `P(X <= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_half_lower_tail(k: u64, n: u64) -> Result<f64> {
    let b = Binomial::new(0.5, n).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(b.cdf(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        let ys: Vec<f64> = (1..=50).map(|k| 3.0 - 0.5 * k as f64).collect();
        assert!((ols_slope(&ys).unwrap() + 0.5).abs() < 1e-12);
        assert!(ols_slope(&[1.0]).is_err());
    }

    #[test]
    fn ks_on_grid() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&xs, 0.0, 1.0) <= 0.0005 + 1e-12);
        let skewed: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skewed, 0.0, 1.0) > ks_critical_1pct(1000));
    }

    #[test]
    fn chi_square_exact_match() {
        let (s, p) = chi_square(&[10.0, 20.0, 30.0], &[10.0, 20.0, 30.0], 0).unwrap();
        assert_eq!(s, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_tail() {
        assert!((binomial_half_lower_tail(0, 1).unwrap() - 0.5).abs() < 1e-12);
        assert!(binomial_half_lower_tail(400, 1000).unwrap() < 1e-9);
    }
}
