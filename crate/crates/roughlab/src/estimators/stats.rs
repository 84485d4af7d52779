//! Distributional test statistics: Kolmogorov–Smirnov (one- and two-sample),
//! χ² uniformity, Wasserstein-1 on equal-size samples.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::{Error, Result};

/// Outcome of a KS test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the asymptotic p-value.
    pub n_eff: f64,
}

/// CDF of N(mean, sd²).
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("sd > 0").cdf(x)
}

/// Asymptotic Kolmogorov tail `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}` with the
/// Stephens small-sample correction.
fn kolmogorov_p(d: f64, n_eff: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sided one-sample KS test of `samples` against N(0, sigma_sq).
pub fn ks_test_normal(samples: &[f64], sigma_sq: f64) -> Result<KsResult> {
    if !(sigma_sq > 0.0) {
        return Err(Error::ZeroVariance);
    }
    if samples.len() < 8 {
        return Err(Error::SampleSize { min: 8 });
    }
    let sd = sigma_sq.sqrt();
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let cdf = normal_cdf(*x, 0.0, sd);
        let above = (i + 1) as f64 / n - cdf;
        let below = cdf - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_p(d, n),
        n_eff: n,
    })
}

/// Two-sided two-sample KS test.
pub fn ks_test_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::SampleSize { min: 8 });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_unstable_by(|u, v| u.partial_cmp(v).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let (x, y) = (xs[i], ys[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / na - j as f64 / nb).abs();
        d = d.max(diff);
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_p(d, n_eff),
        n_eff,
    })
}

/// χ² test of uniformity on [0,1] with equiprobable bins; returns the
/// statistic and its asymptotic p-value.
pub fn chi_square_uniform(samples: &[f64], bins: usize) -> Result<(f64, f64)> {
    if bins < 2 || samples.len() < 5 * bins {
        return Err(Error::SampleSize { min: 5 * bins });
    }
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let k = ((x * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((bins - 1) as f64).expect("bins >= 2");
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Wasserstein-1 distance between equal-size empirical distributions
/// (mean absolute difference of order statistics).
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::SampleSize { min: 1 });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_unstable_by(|u, v| u.partial_cmp(v).unwrap());
    Ok(xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / xs.len() as f64)
}

/// Ordinary least squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// `|a - b| <= k sqrt(se_a² + se_b²)`.
pub fn within_combined_se(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * (se_a * se_a + se_b * se_b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{SeedSplitter, StreamPurpose};
    use rand_distr::Distribution;

    #[test]
    fn ks_normal_null_calibration() {
        // N(0, σ²) samples: p should exceed 0.001 in almost every run
        let sp = SeedSplitter::new(2024);
        let sigma_sq = 0.25;
        let mut failures = 0;
        let runs = 400;
        for r in 0..runs {
            let mut rng = sp.stream(StreamPurpose::Scratch, r);
            let xs: Vec<f64> = (0..600)
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    0.5 * z
                })
                .collect();
            if ks_test_normal(&xs, sigma_sq).unwrap().p_value <= 0.001 {
                failures += 1;
            }
        }
        // expected failures ~ 0.4; allow a generous margin
        assert!(failures <= 3, "{failures} of {runs} null runs rejected");
    }

    #[test]
    fn ks_normal_detects_wrong_variance() {
        let sp = SeedSplitter::new(7);
        let mut rng = sp.stream(StreamPurpose::Scratch, 0);
        let xs: Vec<f64> = (0..4000)
            .map(|_| {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                1.3 * z
            })
            .collect();
        assert!(ks_test_normal(&xs, 1.0).unwrap().p_value < 1e-6);
        assert!(matches!(ks_test_normal(&xs, 0.0), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ks_two_sample_null_and_alternative() {
        let sp = SeedSplitter::new(8);
        let mut rng = sp.stream(StreamPurpose::Scratch, 0);
        let mut draw = |shift: f64| -> Vec<f64> {
            (0..3000)
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    z + shift
                })
                .collect()
        };
        let a = draw(0.0);
        let b = draw(0.0);
        let c = draw(0.25);
        let same = ks_test_two_sample(&a, &b).unwrap();
        assert!(same.p_value > 0.001);
        let diff = ks_test_two_sample(&a, &c).unwrap();
        assert!(diff.p_value < 1e-6);
        // identical samples: statistic 0
        let id = ks_test_two_sample(&a, &a).unwrap();
        assert_eq!(id.statistic, 0.0);
        assert_eq!(id.p_value, 1.0);
    }

    #[test]
    fn chi_square_uniform_sane() {
        let sp = SeedSplitter::new(3);
        let mut rng = sp.stream(StreamPurpose::Scratch, 0);
        let xs: Vec<f64> = (0..50_000)
            .map(|_| rand::Rng::random::<f64>(&mut rng))
            .collect();
        let (_, p) = chi_square_uniform(&xs, 100).unwrap();
        assert!(p > 0.001);
        let biased: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (_, p_bad) = chi_square_uniform(&biased, 100).unwrap();
        assert!(p_bad < 1e-10);
    }

    #[test]
    fn wasserstein_zero_on_identical() {
        let xs = vec![0.4, -1.0, 2.0, 0.0];
        assert_eq!(wasserstein1(&xs, &xs).unwrap(), 0.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert!((wasserstein1(&xs, &shifted).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ols_slope_exact_on_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert!((ols_slope(&x, &y) - 2.0).abs() < 1e-14);
    }
}
