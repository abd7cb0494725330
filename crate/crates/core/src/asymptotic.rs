//! Limits of scaled sphere moments for regularly varying entries with tail
//! index `alpha` in `(2, 4)`, and Monte Carlo checks of the approach.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::mc::{row_power_sums, InjectiveExpansion};
use crate::sampling::{RngStream, TailLaw};
use crate::special::gamma;

pub const MOM_BLOCKS: usize = 16;

/// A mixed moment `β_{2k_1,..,2k_r}` together with the tail index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentLimitQuery {
    alpha: f64,
    exponents: Vec<u32>,
}

impl MomentLimitQuery {
    pub fn new(alpha: f64, exponents: Vec<u32>) -> Result<Self> {
        if !(alpha > 2.0 && alpha < 4.0) {
            return Err(Error::ParameterDomain(format!("tail index {alpha} is outside (2, 4)")));
        }
        if exponents.is_empty() || exponents.contains(&0) {
            return Err(Error::ParameterDomain("exponents must be a non-empty list of k >= 1".into()));
        }
        Ok(MomentLimitQuery { alpha, exponents })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Number of `k_i` equal to one.
    pub fn n1(&self) -> usize {
        self.exponents.iter().filter(|&&k| k == 1).count()
    }

    pub fn r(&self) -> usize {
        self.exponents.len()
    }

    /// Power of `n` that makes the moment converge: `N_1(1 - α/2) + rα/2`,
    /// evaluated as `N_1 + (r - N_1)α/2` so integer cases stay exact.
    pub fn scaling_exponent(&self) -> f64 {
        self.n1() as f64 + self.tail_factor_power() as f64 * self.alpha / 2.0
    }

    /// Power of the slowly varying factor: one per `k_i >= 2`.
    pub fn tail_factor_power(&self) -> i32 {
        (self.r() - self.n1()) as i32
    }
}

/// `(α/2)^{r-N_1} Γ(N_1(1-α/2) + rα/2) Π_{k_i>=2} Γ(k_i - α/2) / Γ(Σ k_i)`.
pub fn moment_limit(q: &MomentLimitQuery) -> f64 {
    let h = q.alpha / 2.0;
    let heavy: f64 = q
        .exponents
        .iter()
        .filter(|&&k| k >= 2)
        .map(|&k| gamma(k as f64 - h))
        .product();
    let total: u32 = q.exponents.iter().sum();
    h.powi(q.tail_factor_power()) * gamma(q.scaling_exponent()) * heavy / gamma(total as f64)
}

/// Single-index limit `αΓ(α/2)Γ(k-α/2) / (2Γ(k))`.
pub fn single_moment_limit(alpha: f64, k: u32) -> Result<f64> {
    let q = MomentLimitQuery::new(alpha, vec![k])?;
    if k == 1 {
        return Ok(1.0);
    }
    let h = q.alpha / 2.0;
    Ok(alpha * gamma(h) * gamma(k as f64 - h) / (2.0 * gamma(k as f64)))
}

/// One grid point of a convergence diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub n: usize,
    pub estimate: f64,
    pub limit: f64,
    pub ratio: f64,
    pub mom_blocks: usize,
}

/// Median-of-means estimates of the scaled moment `n^e β / L^{r-N_1}` over a
/// grid of `n`, where `L` is the tail constant of the standardized entry.
pub fn convergence_diagnostic(
    law: &TailLaw,
    exponents: &[u32],
    n_grid: &[usize],
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<DiagnosticRow>> {
    law.validate()?;
    let tail = law.unit_variance_tail_constant().ok_or_else(|| {
        Error::ParameterDomain(format!("{law:?} has no regularly varying tail"))
    })?;
    let q = MomentLimitQuery::new(law.tail_index(), exponents.to_vec())?;
    if reps < MOM_BLOCKS {
        return Err(Error::Precondition(format!("need at least {MOM_BLOCKS} replications")));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < q.r()) {
        return Err(Error::Precondition(format!("n = {n} is smaller than the number of indices")));
    }
    let limit = moment_limit(&q);
    let expansion = InjectiveExpansion::new(exponents);
    let max_power = expansion.max_power();

    n_grid
        .iter()
        .map(|&n| {
            let grid_stream = rng.split(n as u64);
            let block_means = (0..MOM_BLOCKS)
                .into_par_iter()
                .map(|b| {
                    let (lo, hi) = (b * reps / MOM_BLOCKS, (b + 1) * reps / MOM_BLOCKS);
                    let mut x = vec![0.0; n];
                    let mut powers = vec![0.0; max_power + 1];
                    let mut acc = 0.0;
                    for r in lo..hi {
                        let mut g = grid_stream.cell(r as u64, 0);
                        x.iter_mut().for_each(|v| *v = law.sample(&mut g));
                        if !row_power_sums(&x, &mut powers) {
                            return Err(Error::DegenerateInput { row: r });
                        }
                        acc += expansion.injective_sum(&powers);
                    }
                    Ok(acc / (hi - lo) as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let falling: f64 = (0..q.r()).map(|j| (n - j) as f64).product();
            let scale = (n as f64).powf(q.scaling_exponent()) / falling;
            let estimate = median(block_means) * scale / tail.powi(q.tail_factor_power());
            Ok(DiagnosticRow { n, estimate, limit, ratio: estimate / limit, mom_blocks: MOM_BLOCKS })
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// CSV with header `n,estimate,limit,ratio,mom_blocks`.
pub fn write_diagnostic_csv<W: Write>(rows: &[DiagnosticRow], mut w: W) -> Result<()> {
    writeln!(w, "n,estimate,limit,ratio,mom_blocks")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.n, r.estimate, r.limit, r.ratio, r.mom_blocks)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn three_pi_over_four() {
        let q = MomentLimitQuery::new(3.0, vec![2]).unwrap();
        assert!((moment_limit(&q) - 3.0 * PI / 4.0).abs() < 1e-13);
        assert_eq!(q.scaling_exponent(), 1.5);
    }

    #[test]
    fn light_index_limits_are_one() {
        for alpha in [2.1, 3.0, 3.5, 3.99] {
            let pair = MomentLimitQuery::new(alpha, vec![1, 1]).unwrap();
            assert!((moment_limit(&pair) - 1.0).abs() < 1e-14);
            assert!((pair.scaling_exponent() - 2.0).abs() < 1e-15);
            let single = MomentLimitQuery::new(alpha, vec![1]).unwrap();
            assert!((moment_limit(&single) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_index_paths_agree() {
        for alpha in [2.2, 2.9, 3.5, 3.8] {
            for k in 1..7 {
                let q = MomentLimitQuery::new(alpha, vec![k]).unwrap();
                let a = moment_limit(&q);
                let b = single_moment_limit(alpha, k).unwrap();
                assert!((a - b).abs() <= 1e-12 * b.abs(), "alpha={alpha} k={k}");
                assert!(a.is_finite() && a > 0.0);
            }
        }
    }

    #[test]
    fn domain() {
        assert!(MomentLimitQuery::new(4.0, vec![2]).is_err());
        assert!(MomentLimitQuery::new(2.0, vec![2]).is_err());
        assert!(MomentLimitQuery::new(3.0, vec![]).is_err());
        let rng = RngStream::new(1, 1);
        assert!(matches!(
            convergence_diagnostic(&TailLaw::Gaussian, &[2], &[100], 100, &rng),
            Err(Error::ParameterDomain(_))
        ));
    }

    #[test]
    fn unit_index_ratio_is_exactly_one() {
        let rng = RngStream::new(9, 0);
        for law in [TailLaw::SymmetricPareto { alpha: 3.5 }, TailLaw::StudentT { df: 3.0 }] {
            let rows = convergence_diagnostic(&law, &[1], &[7, 49, 300], 64, &rng).unwrap();
            for r in rows {
                assert_eq!(r.estimate, 1.0, "n = {}", r.n);
                assert_eq!(r.ratio, 1.0);
            }
        }
    }

    #[test]
    fn csv_header() {
        let rows = vec![DiagnosticRow { n: 10, estimate: 1.0, limit: 1.0, ratio: 1.0, mom_blocks: 16 }];
        let mut out = Vec::new();
        write_diagnostic_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "n,estimate,limit,ratio,mom_blocks\n10,1,1,1,16\n");
    }
}
