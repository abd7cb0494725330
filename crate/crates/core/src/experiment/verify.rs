//! Self-checks behind the `verify-*` and `asymptotics` subcommands.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use crate::asymptotic::{convergence_diagnostic, DiagnosticRow};
use crate::error::{Error, Result};
use crate::matrix::{correlation_from_normalized, log_det_spd, self_normalize};
use crate::moments::oracle::{expect_over_permutations, random_rational_unit_vector, random_rational_weights};
use crate::moments::{
    complete_table, fourth_moment_centered, fourth_moment_centered_closed, fourth_moment_sphere,
    k_coefficients, permutation_oracle, sphere_residuals, MomentTable, Rational, Scalar, WeightVector,
};
use crate::perpendiculars::girko_log_det_observed;
use crate::sampling::{fill_matrix, RngStream, TailLaw};

/// Aggregate of one named check over many cases.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub max_abs_residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Default)]
struct Tally(BTreeMap<String, CheckResult>);

impl Tally {
    /// Records `residual`; the case fails when it exceeds `tolerance` (or is NaN).
    fn record(&mut self, name: &str, residual: f64, tolerance: f64) {
        let c = self.0.entry(name.to_string()).or_insert_with(|| CheckResult {
            name: name.to_string(),
            cases: 0,
            failures: 0,
            max_abs_residual: 0.0,
            tolerance,
        });
        c.cases += 1;
        let r = residual.abs();
        if !(r <= tolerance) {
            c.failures += 1;
        }
        c.max_abs_residual = if r.is_nan() { f64::NAN } else { c.max_abs_residual.max(r) };
    }

    /// Exact check: the failure is decided on the rational value itself.
    fn record_exact(&mut self, name: &str, residual: &Rational) {
        let shown = if residual.negligible(0.0) { 0.0 } else { residual.to_f64().abs().max(f64::MIN_POSITIVE) };
        self.record(name, shown, 0.0);
    }

    fn finish(self) -> VerificationReport {
        VerificationReport { checks: self.0.into_values().collect() }
    }
}

fn partial_of<T: Scalar>(t: &MomentTable<T>) -> Result<MomentTable<T>> {
    let mut out = MomentTable::new(t.n());
    for key in [&[2, 2][..], &[2, 2, 2], &[2, 2, 2, 2], &[4, 4]] {
        out = out.with(key, t.require(key)?);
    }
    Ok(out)
}

/// Certifies the sphere identities and the fourth-moment formulas in exact
/// arithmetic against the permutation oracle, `trials` random rational unit
/// vectors per `n`, plus the floating-point zero-sum of the K coefficients.
pub fn verify_moments(n_list: &[usize], trials: usize, seed: u64) -> Result<VerificationReport> {
    if let Some(&n) = n_list.iter().find(|&&n| !(2..=8).contains(&n)) {
        return Err(Error::Precondition(format!("n = {n} is outside the supported range 2..=8")));
    }
    let mut tally = Tally::default();
    let stream = RngStream::new(seed, 0);
    for &n in n_list {
        let mut rng = stream.split(n as u64).sequential();
        for _ in 0..trials {
            let z: Vec<Rational> = random_rational_unit_vector(n, &mut rng);
            let table = permutation_oracle(&z, true, 4)?;
            for r in sphere_residuals(&table) {
                tally.record_exact(&format!("identity_{}", r.name), &r.residual);
            }
            let completed = complete_table(&partial_of(&table)?, n)?;
            for (key, v) in table.iter() {
                let c = completed.get(key).cloned().unwrap_or_else(Rational::zero);
                tally.record_exact("completion", &(c - v.clone()));
            }

            let a = WeightVector::new(random_rational_weights::<Rational, _>(n, &mut rng))?;
            let binomial = fourth_moment_centered(&a, &table)?;
            let closed = fourth_moment_centered_closed(&a, &table)?;
            tally.record_exact("centered_closed_vs_binomial", &(closed - binomial.clone()));
            let sphere = fourth_moment_sphere(&a, &table, n)?;
            let nt = Rational::from_int(n as i64);
            tally.record_exact("sphere_vs_centered", &(sphere.clone() - binomial * nt.powi(4)));
            let brute = expect_over_permutations(&z, false, |v| {
                let s = a
                    .weights()
                    .iter()
                    .zip(v)
                    .fold(Rational::zero(), |acc, (ak, zk)| {
                        acc + ak.clone() * (nt.clone() * zk.clone() * zk.clone() - Rational::from_int(1))
                    });
                s.powi(4)
            })?;
            tally.record_exact("sphere_vs_enumeration", &(sphere - brute));
            tally.record_exact("k_zero_sum", &k_coefficients(a.power_sums(), n).sum());
        }
    }
    let mut rng = stream.split(u64::MAX).sequential();
    for t in 0..1000 {
        let n = n_list.get(t % n_list.len().max(1)).copied().unwrap_or(4);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let a = WeightVector::new(raw.iter().map(|v| v / total).collect())?;
        tally.record("k_zero_sum_float", k_coefficients(a.power_sums(), n).sum(), 1e-10);
    }
    Ok(tally.finish())
}

pub const GIRKO_LAWS: [TailLaw; 3] = [
    TailLaw::Gaussian,
    TailLaw::StudentT { df: 3.5 },
    TailLaw::SymmetricPareto { alpha: 3.5 },
];

/// Random `(law, p, n)` cases with `p <= max_p` and `p/n` in `[0.1, 0.9]`:
/// Girko and Cholesky log-determinants agree to `1e-8` relative, and every
/// intermediate `Q_i` satisfies the diagonal, trace and off-diagonal bounds.
pub fn verify_girko(cases: usize, max_p: usize, seed: u64) -> Result<VerificationReport> {
    if max_p < 2 {
        return Err(Error::Precondition("max_p must be at least 2".into()));
    }
    let mut tally = Tally::default();
    for case in 0..cases {
        let stream = RngStream::new(seed, case as u64);
        let mut rng = stream.sequential();
        let law = GIRKO_LAWS[case % GIRKO_LAWS.len()];
        let p = rng.random_range(2..=max_p);
        let ratio: f64 = rng.random_range(0.1..=0.9);
        let n = ((p as f64 / ratio).round() as usize).max(p + 1);
        let x = fill_matrix(&law, p, n, &stream.split(1))?;
        let y = self_normalize(&x)?;
        let chol = log_det_spd(correlation_from_normalized(&y).as_symmetric())?;

        let mut diag_violation = 0.0f64;
        let mut trace_error = 0.0f64;
        let mut offdiag_violation = 0.0f64;
        let mut orth_error = 0.0f64;
        let trace = girko_log_det_observed(&y, |state, _| {
            let i = state.step();
            let cap = state.scale();
            let mut tr = 0.0;
            for k in 0..n {
                let q = state.q_diag(k);
                tr += q;
                diag_violation = diag_violation.max(-q).max(q - cap);
            }
            trace_error = trace_error.max((tr - 1.0).abs());
            if i == p - 1 {
                offdiag_violation = (state.max_offdiag() - 0.5 * cap).max(0.0);
                orth_error = state.orthonormality_error();
            }
        })?;
        let girko = trace.log_det();
        tally.record("girko_vs_cholesky", (girko - chol) / chol.abs().max(1.0), 1e-8);
        tally.record("q_diagonal_bounds", diag_violation.max(0.0), 1e-12);
        tally.record("q_unit_trace", trace_error, 1e-10);
        tally.record("q_offdiagonal_bound", offdiag_violation, 1e-12);
        tally.record("basis_orthonormality", orth_error, 1e-10);
    }
    Ok(tally.finish())
}

/// Convergence diagnostic for symmetric Pareto entries with tail index `alpha`.
pub fn run_asymptotics(
    alpha: f64,
    exponents: &[u32],
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<DiagnosticRow>> {
    let law = TailLaw::SymmetricPareto { alpha };
    convergence_diagnostic(&law, exponents, n_grid, reps, &RngStream::new(seed, 0))
}
