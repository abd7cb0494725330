//! Centering and scaling for the logarithmic laws, and goodness-of-fit tools.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perpendiculars::girko_offset;
use crate::special::normal_cdf;

/// Constants of the correlation log-determinant law at dimensions `(p, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawConstants {
    pub p: usize,
    pub n: usize,
    pub gamma_hat: f64,
    pub mu_n: f64,
    pub sigma2_n: f64,
    pub c_n: f64,
}

fn check_dims(p: usize, n: usize) -> Result<()> {
    if p == 0 || p >= n {
        return Err(Error::ParameterDomain(format!("need 0 < p < n, got p = {p}, n = {n}")));
    }
    Ok(())
}

impl LawConstants {
    pub fn new(p: usize, n: usize) -> Result<Self> {
        check_dims(p, n)?;
        let (pf, nf) = (p as f64, n as f64);
        let gamma_hat = pf / nf;
        let log1m = (-gamma_hat).ln_1p();
        Ok(LawConstants {
            p,
            n,
            gamma_hat,
            mu_n: (pf - nf + 0.5) * log1m - pf + gamma_hat,
            sigma2_n: -2.0 * log1m - 2.0 * gamma_hat,
            c_n: girko_offset(p, n),
        })
    }

    pub fn standardize(&self, log_det: f64) -> f64 {
        (log_det - self.mu_n) / self.sigma2_n.sqrt()
    }
}

/// `(log det R - μ_n) / σ_n` for a `p x p` sample correlation matrix.
pub fn standardize_corr(log_det_r: f64, p: usize, n: usize) -> Result<f64> {
    Ok(LawConstants::new(p, n)?.standardize(log_det_r))
}

/// Centering and variance of the covariance log-determinant law for
/// unit-variance entries with fourth moment `fourth_moment`.
pub fn cov_constants(p: usize, n: usize, fourth_moment: f64) -> Result<(f64, f64)> {
    check_dims(p, n)?;
    if !(fourth_moment >= 1.0) {
        return Err(Error::ParameterDomain(format!("fourth moment {fourth_moment} is below 1")));
    }
    let (pf, nf) = (p as f64, n as f64);
    let g = pf / nf;
    let log1m = (-g).ln_1p();
    let center = (pf - nf + 0.5) * log1m - pf + 0.5 * (fourth_moment - 3.0) * g;
    let variance = -2.0 * log1m + (fourth_moment - 3.0) * g;
    if !(variance > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "variance {variance} is not positive for p = {p}, n = {n}, fourth moment {fourth_moment}"
        )));
    }
    Ok((center, variance))
}

/// Standardized `log det S` for the sample covariance of unit-variance entries.
pub fn standardize_cov(log_det_s: f64, p: usize, n: usize, fourth_moment: f64) -> Result<f64> {
    let (center, variance) = cov_constants(p, n, fourth_moment)?;
    Ok((log_det_s - center) / variance.sqrt())
}

/// `(p - n - 1/2) log(1 - p/n) - p - Σ_{i=1}^{p-1} log(1 - i/n)`, which is `O(1/n)`.
pub fn stirling_gap(p: usize, n: usize) -> Result<f64> {
    check_dims(p, n)?;
    let (pf, nf) = (p as f64, n as f64);
    let sum: f64 = (1..p).map(|i| (-(i as f64) / nf).ln_1p()).sum();
    Ok((pf - nf - 0.5) * (-pf / nf).ln_1p() - pf - sum)
}

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub const MIN_SAMPLES: usize = 8;

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("samples contain non-finite values".into()));
    }
    Ok(())
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    const TOL: f64 = 1e-10;
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series, fast for small λ.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for j in 1.. {
            let odd = (2 * j - 1) as f64;
            let term = (c * odd * odd).exp();
            sum += term;
            if term <= TOL * sum || j > 100 {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1.. {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term <= TOL * sum.abs() || j > 100 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sided one-sample test against the standard normal, asymptotic p-value.
pub fn ks_test(samples: &[f64]) -> Result<KsResult> {
    check_samples(samples)?;
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let m = x.len() as f64;
    let statistic = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    Ok(KsResult { statistic, p_value: kolmogorov_sf(m.sqrt() * statistic) })
}

/// Two-sided two-sample test, asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    check_samples(a)?;
    check_samples(b)?;
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_sf(ne * d) })
}

/// Sample moments with batch-means standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryMoments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_excess_kurtosis: f64,
}

fn raw_summary(x: &[f64]) -> [f64; 4] {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / m, m3 / m, m4 / m);
    let variance = m2 * m / (m - 1.0);
    if m2 == 0.0 {
        return [mean, 0.0, 0.0, 0.0];
    }
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let skew = (m * (m - 1.0)).sqrt() / (m - 2.0) * g1;
    let kurt = (m - 1.0) / ((m - 2.0) * (m - 3.0)) * ((m + 1.0) * g2 + 6.0);
    [mean, variance, skew, kurt]
}

/// Mean, unbiased variance, adjusted skewness `G_1` and excess kurtosis `G_2`.
pub fn summary_moments(samples: &[f64]) -> Result<SummaryMoments> {
    check_samples(samples)?;
    let full = raw_summary(samples);
    let batches = (samples.len() / 4).clamp(2, 20);
    let per: Vec<[f64; 4]> = (0..batches)
        .map(|b| {
            let lo = b * samples.len() / batches;
            let hi = (b + 1) * samples.len() / batches;
            raw_summary(&samples[lo..hi])
        })
        .collect();
    let se = |j: usize| {
        let bf = batches as f64;
        let mean = per.iter().map(|s| s[j]).sum::<f64>() / bf;
        let var = per.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (bf - 1.0);
        (var / bf).sqrt()
    };
    Ok(SummaryMoments {
        count: samples.len(),
        mean: full[0],
        variance: full[1],
        skewness: full[2],
        excess_kurtosis: full[3],
        se_mean: se(0),
        se_variance: se(1),
        se_skewness: se(2),
        se_excess_kurtosis: se(3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn normal_quantile(u: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn normals(m: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        (0..m).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sd * z }).collect()
    }

    #[test]
    fn constants_at_half() {
        let c = LawConstants::new(500, 1000).unwrap();
        assert!((c.mu_n - -153.272_98).abs() < 1e-4, "{}", c.mu_n);
        assert!((c.sigma2_n - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
        assert!(c.c_n <= 0.0);
        assert_eq!(standardize_corr(c.mu_n, 500, 1000).unwrap(), 0.0);
        assert!(standardize_corr(0.0, 10, 10).is_err());
    }

    #[test]
    fn cov_law_gaussian_structure() {
        let (center, var) = cov_constants(100, 400, 3.0).unwrap();
        let l = (-0.25f64).ln_1p();
        assert!((center - ((100.0 - 400.0 + 0.5) * l - 100.0)).abs() < 1e-12);
        assert!((var + 2.0 * l).abs() < 1e-15);
        assert_eq!(standardize_cov(center, 100, 400, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn cov_law_variance_guard() {
        // At the smallest admissible fourth moment the variance is
        // -2 log(1 - g) - 2g, small but positive.
        let (_, var) = cov_constants(1, 1000, 1.0).unwrap();
        assert!(var > 0.0 && var < 1e-5);
        assert!(cov_constants(10, 20, 0.5).is_err());
        assert!(cov_constants(10, 20, f64::NAN).is_err());
    }

    #[test]
    fn stirling_gap_decays() {
        let g1 = stirling_gap(500, 1000).unwrap();
        let g2 = stirling_gap(1000, 2000).unwrap();
        assert!(g1.abs() < 5e-3);
        assert!(g2.abs() < g1.abs());
        for n in 2..50 {
            assert!(stirling_gap(1, n).unwrap().abs() < 0.51);
        }
        for n in (200..=4000).step_by(200) {
            assert!((stirling_gap(n / 2, n).unwrap() * n as f64).abs() < 1.0);
        }
    }

    #[test]
    fn ks_quantile_grid() {
        let m = 1000;
        let x: Vec<f64> = (1..=m).map(|i| normal_quantile((i as f64 - 0.5) / m as f64)).collect();
        let r = ks_test(&x).unwrap();
        assert!(r.statistic <= 0.5 / m as f64 + 1e-6, "{}", r.statistic);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn ks_size_and_power() {
        let mut rejections = 0;
        for seed in 0..100 {
            if ks_test(&normals(2000, 1.0, seed)).unwrap().p_value <= 1e-3 {
                rejections += 1;
            }
        }
        assert!(rejections <= 1, "{rejections}");
        assert!(ks_test(&normals(2000, 1.5, 7)).unwrap().p_value < 1e-3);
        assert!(ks_test(&[0.0; 7]).is_err());
    }

    #[test]
    fn kolmogorov_series_branches_meet() {
        let a = kolmogorov_sf(1.0 - 1e-12);
        let b = kolmogorov_sf(1.0);
        assert!((a - b).abs() < 1e-9);
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn two_sample() {
        let a = normals(1000, 1.0, 1);
        let b = normals(1000, 1.0, 2);
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.001);
        let c = normals(1000, 2.0, 3);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 0.001);
    }

    #[test]
    fn summaries() {
        let s = summary_moments(&[2.5; 10]).unwrap();
        assert_eq!(s.variance, 0.0);
        let x = normals(100_000, 1.0, 11);
        let s = summary_moments(&x).unwrap();
        assert!((s.variance - 1.0).abs() < 5.0 * s.se_variance);
        assert!(s.mean.abs() < 5.0 * s.se_mean);
    }
}
