//! Method of perpendiculars for `log det R`.
//!
//! With `Y` the row-normalised data matrix and `P_i` the orthogonal projector
//! onto the complement of the span of the first `i` rows,
//!
//! ```text
//! log det R = c_n + sum_i log(1 + z_{i+1}),
//! z_{i+1}   = (n y^T P_i y - (n - i)) / (n - i),   y = row i+1 of Y,
//! c_n       = -p log n + sum_{j<p} log(n - j).
//! ```
//!
//! `P_i` is never formed. The state keeps an orthonormal basis of the row
//! span (classical Gram-Schmidt with re-orthogonalisation) together with the
//! diagonal `1 - sum_j u_{j,k}^2`, which is all the step statistics need.
//! `Q_i = P_i / (n - i)` has unit trace.

use std::io::Write;

use crate::error::{Error, Result};
use crate::matrix::{dot, SelfNormalizedMatrix};

/// Mandatory Gram-Schmidt passes.
const MIN_PASSES: usize = 2;
/// Hard cap on passes when the correction does not settle.
const MAX_PASSES: usize = 6;
/// Relative size of the last correction below which the residual is accepted.
const REORTH_TOL: f64 = 1e-10;

/// `c_n = -p log n + sum_{j=0}^{p-1} log(n - j)`, summed term by term as
/// `sum log(1 - j/n)`.
pub fn girko_offset(p: usize, n: usize) -> f64 {
    let nf = n as f64;
    (1..p).map(|j| (-(j as f64) / nf).ln_1p()).sum()
}

/// Projection state after `i` rows have been absorbed.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    n: usize,
    /// `i x n` orthonormal basis, row-major.
    basis: Vec<f64>,
    /// `1 - sum_j u_{j,k}^2`, i.e. the diagonal of `P_i`.
    diag: Vec<f64>,
}

/// Result of projecting a vector onto the complement of the current span.
#[derive(Debug, Clone)]
pub struct Projection {
    /// `P_i y`.
    pub residual: Vec<f64>,
    /// `sum_j (u_j^T y)^2`.
    pub captured: f64,
    pub passes: usize,
}

impl ProjectionState {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            basis: Vec::new(),
            diag: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of absorbed rows `i`.
    pub fn step(&self) -> usize {
        self.basis.len() / self.n
    }

    /// `1 / (n - i)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.n - self.step()) as f64
    }

    pub fn basis_vector(&self, j: usize) -> &[f64] {
        &self.basis[j * self.n..(j + 1) * self.n]
    }

    fn basis_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.basis.chunks_exact(self.n)
    }

    /// `q_{i,kk}`.
    pub fn q_diag(&self, k: usize) -> f64 {
        self.diag[k] * self.scale()
    }

    /// `q_{i,kl}`, evaluated in `O(i)`.
    pub fn q_entry(&self, k: usize, l: usize) -> f64 {
        if k == l {
            return self.q_diag(k);
        }
        let s: f64 = self.basis_rows().map(|u| u[k] * u[l]).sum();
        -s * self.scale()
    }

    /// `Q_i v`.
    pub fn apply_q(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for u in self.basis_rows() {
            let c = dot(u, v);
            out.iter_mut().zip(u).for_each(|(o, uk)| *o -= c * uk);
        }
        let s = self.scale();
        out.iter_mut().for_each(|o| *o *= s);
        out
    }

    /// Dense `Q_i`, row-major `n x n`. Debug use only.
    pub fn materialize_q(&self) -> Vec<f64> {
        let n = self.n;
        let s = self.scale();
        let mut q = vec![0.0; n * n];
        for k in 0..n {
            q[k * n + k] = 1.0;
        }
        for u in self.basis_rows() {
            for k in 0..n {
                let uk = u[k];
                if uk == 0.0 {
                    continue;
                }
                for l in 0..n {
                    q[k * n + l] -= uk * u[l];
                }
            }
        }
        q.iter_mut().for_each(|v| *v *= s);
        q
    }

    /// `P_i y` by classical Gram-Schmidt, repeated until the correction is
    /// below `1e-10 |r|` (at least two passes).
    pub fn project(&self, y: &[f64]) -> Projection {
        let i = self.step();
        let mut residual = y.to_vec();
        let mut coeffs = vec![0.0; i];
        let mut passes = 0;
        if i == 0 {
            return Projection {
                residual,
                captured: 0.0,
                passes,
            };
        }
        let mut c = vec![0.0; i];
        while passes < MAX_PASSES {
            for (cj, u) in c.iter_mut().zip(self.basis_rows()) {
                *cj = dot(u, &residual);
            }
            for (cj, u) in c.iter().zip(self.basis_rows()) {
                residual.iter_mut().zip(u).for_each(|(r, uk)| *r -= cj * uk);
            }
            coeffs.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
            passes += 1;
            if passes >= MIN_PASSES {
                let correction = dot(&c, &c).sqrt();
                let norm = dot(&residual, &residual).sqrt();
                if correction <= REORTH_TOL * norm {
                    break;
                }
            }
        }
        Projection {
            residual,
            captured: dot(&coeffs, &coeffs),
            passes,
        }
    }

    /// `y^T Q_i y`.
    pub fn quad_form(&self, y: &[f64]) -> f64 {
        let r = self.project(y).residual;
        dot(&r, &r) * self.scale()
    }

    /// Diagonal / off-diagonal split of `n y^T Q_i y - 1` for a unit row:
    /// `U = sum_k q_kk (n y_k^2 - 1)` and `V = sum_{k != l} q_kl n y_k y_l`.
    pub fn split_uv(&self, y: &[f64]) -> (f64, f64) {
        let captured: f64 = self.basis_rows().map(|u| dot(u, y).powi(2)).sum();
        self.split_with_captured(y, captured)
    }

    fn split_with_captured(&self, y: &[f64], captured: f64) -> (f64, f64) {
        let nf = self.n as f64;
        let s = self.scale();
        let mut u_part = 0.0;
        let mut diag_captured = 0.0;
        for (&yk, &dk) in y.iter().zip(&self.diag) {
            let y2 = yk * yk;
            u_part += dk * (nf * y2 - 1.0);
            diag_captured += y2 * (1.0 - dk);
        }
        // Off-diagonal of I is zero, so only -sum_j u_j u_j^T contributes.
        let v_part = -nf * (captured - diag_captured);
        (u_part * s, v_part * s)
    }

    /// Power sums `S_j = sum_k q_kk^j` for `j = 1..=max_j`.
    pub fn diag_power_sums(&self, max_j: usize) -> Result<Vec<f64>> {
        if !(1..=4).contains(&max_j) {
            return Err(Error::Precondition(format!("max_j must be in 1..=4, got {max_j}")));
        }
        let s = self.scale();
        let mut sums = vec![0.0; max_j];
        for &d in &self.diag {
            let q = d * s;
            let mut pw = q;
            for sj in sums.iter_mut() {
                *sj += pw;
                pw *= q;
            }
        }
        Ok(sums)
    }

    /// Append the normalised residual as a new basis vector.
    fn push(&mut self, residual: &[f64], norm: f64) {
        let inv = 1.0 / norm;
        self.basis.extend(residual.iter().map(|r| r * inv));
        let start = self.basis.len() - self.n;
        for (d, u) in self.diag.iter_mut().zip(&self.basis[start..]) {
            *d -= u * u;
        }
    }

    /// `max |u_j^T u_k - delta_jk|` over the basis.
    pub fn orthonormality_error(&self) -> f64 {
        let rows: Vec<&[f64]> = self.basis_rows().collect();
        let mut worst = 0.0f64;
        for (j, a) in rows.iter().enumerate() {
            for (k, b) in rows.iter().enumerate().skip(j) {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    /// `max_{k != l} |q_kl|` over all pairs; `O(n^2 i)`.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.n;
        let i = self.step();
        if i == 0 {
            return 0.0;
        }
        // Columns of the basis as contiguous rows.
        let mut cols = vec![0.0; n * i];
        for (j, u) in self.basis_rows().enumerate() {
            for k in 0..n {
                cols[k * i + j] = u[k];
            }
        }
        let mut worst = 0.0f64;
        for k in 0..n {
            let ck = &cols[k * i..(k + 1) * i];
            for l in k + 1..n {
                worst = worst.max(dot(ck, &cols[l * i..(l + 1) * i]).abs());
            }
        }
        worst * self.scale()
    }
}

/// Full record of the recursion.
#[derive(Debug, Clone)]
pub struct GirkoTrace {
    pub p: usize,
    pub n: usize,
    pub c_n: f64,
    pub z_tilde: Vec<f64>,
    pub u_part: Vec<f64>,
    pub v_part: Vec<f64>,
    /// `(S_1, .., S_4)` of the diagonal of `Q_i` at each step.
    pub power_sums: Vec<[f64; 4]>,
}

impl GirkoTrace {
    /// `c_n + sum log(1 + z)`.
    pub fn log_det(&self) -> f64 {
        self.c_n + self.z_tilde.iter().map(|z| z.ln_1p()).sum::<f64>()
    }

    /// Diagnostic dump: `step,z_tilde,u,v,s2,s3,s4`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,z_tilde,u,v,s2,s3,s4")?;
        for i in 0..self.p {
            let s = &self.power_sums[i];
            writeln!(
                w,
                "{i},{},{},{},{},{},{}",
                self.z_tilde[i], self.u_part[i], self.v_part[i], s[1], s[2], s[3]
            )?;
        }
        Ok(())
    }
}

/// Run the recursion over the rows of `y`.
pub fn girko_log_det(y: &SelfNormalizedMatrix) -> Result<GirkoTrace> {
    girko_log_det_observed(y, |_, _| {})
}

/// As [`girko_log_det`], calling `observe(state, row)` before each row is
/// absorbed.
pub fn girko_log_det_observed(
    y: &SelfNormalizedMatrix,
    mut observe: impl FnMut(&ProjectionState, &[f64]),
) -> Result<GirkoTrace> {
    let (p, n) = (y.p(), y.n());
    if p > n {
        return Err(Error::ParameterDomain(format!("need p <= n, got p={p}, n={n}")));
    }
    let mut state = ProjectionState::new(n);
    let mut trace = GirkoTrace {
        p,
        n,
        c_n: girko_offset(p, n),
        z_tilde: Vec::with_capacity(p),
        u_part: Vec::with_capacity(p),
        v_part: Vec::with_capacity(p),
        power_sums: Vec::with_capacity(p),
    };
    let nf = n as f64;
    for (i, row) in y.rows().enumerate() {
        observe(&state, row);
        let remaining = (n - i) as f64;
        let proj = state.project(row);
        let norm2 = dot(&proj.residual, &proj.residual);
        let z = (nf * norm2 - remaining) / remaining;
        if !(1.0 + z > 0.0) || norm2 == 0.0 {
            return Err(Error::Singular {
                step: i,
                value: 1.0 + z,
            });
        }
        let (u, v) = state.split_with_captured(row, proj.captured);
        let sums = state.diag_power_sums(4)?;
        trace.z_tilde.push(z);
        trace.u_part.push(u);
        trace.v_part.push(v);
        trace.power_sums.push([sums[0], sums[1], sums[2], sums[3]]);
        state.push(&proj.residual, norm2.sqrt());
    }
    Ok(trace)
}
