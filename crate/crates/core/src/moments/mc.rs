//! Monte Carlo moment tables for self-normalized i.i.d. rows.

use rayon::prelude::*;

use super::table::{MomentKey, MomentTable};
use crate::error::{Error, Result};
use crate::sampling::{RngStream, TailLaw};

pub const MIN_REPS: usize = 1000;
const BATCHES: usize = 100;

/// Expansion of an injective (distinct-index) sum into products of power sums.
#[derive(Clone, Debug)]
pub(crate) struct InjectiveExpansion {
    arity: usize,
    terms: Vec<(f64, Vec<usize>)>,
}

impl InjectiveExpansion {
    /// For half-exponents `k_1..k_r`, `Σ_{distinct i_1..i_r} Π y_{i_j}^{2k_j}`
    /// equals `Σ_π μ(π) Π_{B ∈ π} P_{Σ_{j∈B} k_j}` over set partitions `π` of
    /// `{1..r}`, with `P_m = Σ_i y_i^{2m}` and `μ(π) = Π (-1)^{|B|-1} (|B|-1)!`.
    pub(crate) fn new(halves: &[u32]) -> Self {
        let r = halves.len();
        let mut terms = Vec::new();
        let mut labels = vec![0usize; r];
        set_partitions(0, 0, &mut labels, &mut |labels| {
            let blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
            let mut sizes = vec![0usize; blocks];
            let mut degrees = vec![0usize; blocks];
            for (j, &b) in labels.iter().enumerate() {
                sizes[b] += 1;
                degrees[b] += halves[j] as usize;
            }
            let coef = sizes.iter().fold(1.0, |acc, &s| {
                let fact: f64 = (1..s).map(|v| v as f64).product();
                acc * if s % 2 == 0 { -fact } else { fact }
            });
            terms.push((coef, degrees));
        });
        InjectiveExpansion { arity: r, terms }
    }

    pub(crate) fn max_power(&self) -> usize {
        self.terms.iter().flat_map(|(_, d)| d.iter().copied()).max().unwrap_or(0)
    }

    /// Injective sum from `powers[m] = P_m`.
    pub(crate) fn injective_sum(&self, powers: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, degs)| c * degs.iter().map(|&m| powers[m]).product::<f64>())
            .sum()
    }

    /// Symmetrized estimate of the mixed moment from one vector of length `n`.
    pub(crate) fn symmetric_mean(&self, powers: &[f64], n: usize) -> f64 {
        let falling: f64 = (0..self.arity).map(|j| (n - j) as f64).product();
        self.injective_sum(powers) / falling
    }
}

/// Fills `powers[m] = Σ x_i^{2m} / (Σ x_i^2)^m`, so `powers[1]` is exactly 1.
/// Returns false when the squared norm is zero or not finite.
pub(crate) fn row_power_sums(x: &[f64], powers: &mut [f64]) -> bool {
    let s: f64 = x.iter().map(|v| v * v).sum();
    if !(s > 0.0 && s.is_finite()) {
        return false;
    }
    powers[0] = x.len() as f64;
    for m in 1..powers.len() {
        let raw: f64 = x.iter().map(|v| (v * v).powi(m as i32)).sum();
        powers[m] = raw / s.powi(m as i32);
    }
    powers.iter().all(|p| p.is_finite())
}

fn set_partitions(pos: usize, used: usize, labels: &mut [usize], emit: &mut dyn FnMut(&[usize])) {
    if pos == labels.len() {
        emit(labels);
        return;
    }
    for b in 0..=used {
        labels[pos] = b;
        set_partitions(pos + 1, used.max(b + 1), labels, emit);
    }
}

/// Monte Carlo table with standard errors from batch means.
#[derive(Clone, Debug)]
pub struct McMomentTable {
    n: usize,
    reps: usize,
    keys: Vec<MomentKey>,
    means: Vec<f64>,
    batch_means: Vec<Vec<f64>>,
}

impl McMomentTable {
    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn table(&self) -> MomentTable<f64> {
        let mut t = MomentTable::new(self.n);
        for (k, v) in self.keys.iter().zip(&self.means) {
            t.insert(k.clone(), *v);
        }
        t
    }

    pub fn standard_errors(&self) -> MomentTable<f64> {
        let mut t = MomentTable::new(self.n);
        for j in 0..self.keys.len() {
            t.insert(self.keys[j].clone(), self.batch_se(|b| b[j]));
        }
        t
    }

    fn batch_se(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let vals: Vec<f64> = self.batch_means.iter().map(|b| f(b)).collect();
        let b = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / b;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
        (var / b).sqrt()
    }

    /// Estimate and standard error of `constant + Σ c_j β_{key_j}`.
    pub fn linear_combination(&self, constant: f64, terms: &[(MomentKey, f64)]) -> Result<(f64, f64)> {
        let idx = terms
            .iter()
            .map(|(k, c)| {
                self.keys
                    .iter()
                    .position(|x| x == k)
                    .map(|j| (j, *c))
                    .ok_or_else(|| Error::IncompleteTable(format!("no estimate for beta_{{{k}}}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let combine = |v: &[f64]| constant + idx.iter().map(|&(j, c)| c * v[j]).sum::<f64>();
        Ok((combine(&self.means), self.batch_se(combine)))
    }

    pub fn to_json(&self) -> Result<String> {
        self.table().to_json(Some(&self.standard_errors()))
    }
}

/// Estimates every `β` with `Σ k_i <= 4` (and at most `n` indices) for
/// `Y = X/|X|`, `X` with i.i.d. coordinates from `law`.
///
/// Each row contributes the average over all ordered index tuples, which is
/// unbiased by exchangeability. Row `r` draws coordinate `k` from `rng.cell(r, k)`.
pub fn mc_moment_table(law: &TailLaw, n: usize, reps: usize, rng: &RngStream) -> Result<McMomentTable> {
    law.validate()?;
    if reps < MIN_REPS {
        return Err(Error::Precondition(format!("need at least {MIN_REPS} replications, got {reps}")));
    }
    if n == 0 {
        return Err(Error::ParameterDomain("n must be positive".into()));
    }
    let keys: Vec<MomentKey> = MomentKey::all_up_to(4).into_iter().filter(|k| k.arity() <= n).collect();
    let expansions: Vec<InjectiveExpansion> = keys.iter().map(|k| InjectiveExpansion::new(&k.halves())).collect();
    let max_power = expansions.iter().map(|e| e.max_power()).max().unwrap_or(1);

    let batch_sums = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = (b * reps / BATCHES, (b + 1) * reps / BATCHES);
            let mut sums = vec![0.0; keys.len()];
            let mut x = vec![0.0; n];
            let mut powers = vec![0.0; max_power + 1];
            for r in lo..hi {
                for (k, slot) in x.iter_mut().enumerate() {
                    *slot = law.sample(&mut rng.cell(r as u64, k as u64));
                }
                if !row_power_sums(&x, &mut powers) {
                    return Err(Error::DegenerateInput { row: r });
                }
                for (sum, e) in sums.iter_mut().zip(&expansions) {
                    *sum += e.symmetric_mean(&powers, n);
                }
            }
            Ok((hi - lo, sums))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut totals = vec![0.0; keys.len()];
    let mut batch_means = Vec::with_capacity(BATCHES);
    for (count, sums) in &batch_sums {
        for (t, s) in totals.iter_mut().zip(sums) {
            *t += s;
        }
        batch_means.push(sums.iter().map(|s| s / *count as f64).collect());
    }
    let means = totals.iter().map(|t| t / reps as f64).collect();
    Ok(McMomentTable { n, reps, keys, means, batch_means })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_matches_brute_force() {
        let y = [0.3, -1.2, 0.7, 2.0, 0.1];
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        let powers: Vec<f64> = (0..=6).map(|m| sq.iter().map(|v| v.powi(m)).sum()).collect();
        for halves in [vec![1], vec![2, 1], vec![1, 1, 1], vec![2, 1, 1], vec![1, 1, 1, 1], vec![3, 2, 1]] {
            let e = InjectiveExpansion::new(&halves);
            let mut brute = 0.0;
            let r = halves.len();
            let mut idx = vec![0usize; r];
            loop {
                let distinct = (0..r).all(|a| (0..a).all(|b| idx[a] != idx[b]));
                if distinct {
                    brute += idx.iter().zip(&halves).map(|(&i, &k)| sq[i].powi(k as i32)).product::<f64>();
                }
                let mut pos = 0;
                while pos < r {
                    idx[pos] += 1;
                    if idx[pos] < y.len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == r {
                    break;
                }
            }
            let got = e.injective_sum(&powers);
            assert!((got - brute).abs() < 1e-10 * brute.abs().max(1.0), "{halves:?}: {got} vs {brute}");
        }
    }

    #[test]
    fn gaussian_beta4() {
        let n = 10;
        let est = mc_moment_table(&TailLaw::Gaussian, n, 20_000, &RngStream::new(5, 0)).unwrap();
        let t = est.table();
        let se = est.standard_errors();
        let b2 = t.require(&[2]).unwrap();
        assert!((b2 - 0.1).abs() < 1e-12);
        let b4 = t.require(&[4]).unwrap();
        let s4 = se.require(&[4]).unwrap();
        assert!((b4 - 0.025).abs() < 5.0 * s4, "{b4} +- {s4}");
    }

    #[test]
    fn rejects_few_reps() {
        assert!(matches!(
            mc_moment_table(&TailLaw::Gaussian, 4, 999, &RngStream::new(1, 1)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn json_has_se() {
        let est = mc_moment_table(&TailLaw::Gaussian, 3, 1000, &RngStream::new(1, 2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&est.to_json().unwrap()).unwrap();
        assert_eq!(v["n"], 3);
        assert!(v["moments"]["2,2,2"].is_number());
        assert!(v["moments"].get("2,2,2,2").is_none());
        assert!(v["se"]["4"].as_f64().unwrap() > 0.0);
    }
}
