//! Brute-force moments of a vector whose law is uniform over the (signed)
//! coordinate permutations of a fixed vector.

use itertools::Itertools;
use rand::Rng;

use super::scalar::{sum, Scalar};
use super::table::{MomentKey, MomentTable};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;
pub const MAX_HALF_DEGREE: u32 = 6;

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("oracle vector is empty".into()));
    }
    if n > MAX_DIM {
        return Err(Error::Resource(format!("enumeration over n = {n} exceeds the cap of {MAX_DIM}")));
    }
    Ok(())
}

/// Every moment with `Σ k_i <= degree` for `Z` uniform over the coordinate
/// permutations of `z`, with independent uniform signs when `signed`.
///
/// Even moments do not see the signs, so `signed` only documents the law.
/// Moments with more distinct indices than coordinates are recorded as zero.
pub fn permutation_oracle<T: Scalar>(z: &[T], signed: bool, degree: u32) -> Result<MomentTable<T>> {
    let _ = signed;
    let n = z.len();
    check_dim(n)?;
    if degree > MAX_HALF_DEGREE {
        return Err(Error::Resource(format!("degree {degree} exceeds the cap of {MAX_HALF_DEGREE}")));
    }
    let sq: Vec<T> = z.iter().map(|v| v.clone() * v.clone()).collect();
    let mut table = MomentTable::new(n);
    for key in MomentKey::all_up_to(degree) {
        let halves = key.halves();
        let value = if halves.len() > n {
            T::zero()
        } else {
            let mut count = 0i64;
            let total = sum((0..n).permutations(halves.len()).map(|idx| {
                count += 1;
                idx.iter()
                    .zip(&halves)
                    .fold(T::one(), |acc, (&i, &k)| acc * sq[i].powi(k))
            }));
            total / T::from_int(count)
        };
        table.insert(key, value);
    }
    Ok(table)
}

/// `E f(Z)` for `Z` uniform over the (signed) coordinate permutations of `z`,
/// by visiting all `n!` (times `2^n`) outcomes.
pub fn expect_over_permutations<T: Scalar>(
    z: &[T],
    signed: bool,
    mut f: impl FnMut(&[T]) -> T,
) -> Result<T> {
    let n = z.len();
    check_dim(n)?;
    let sign_patterns: u32 = if signed { 1 << n } else { 1 };
    let mut total = T::zero();
    let mut count = 0i64;
    let mut buf = vec![T::zero(); n];
    for perm in (0..n).permutations(n) {
        for mask in 0..sign_patterns {
            for (slot, &src) in perm.iter().enumerate() {
                let v = z[src].clone();
                buf[slot] = if mask >> slot & 1 == 1 { -v } else { v };
            }
            total = total + f(&buf);
            count += 1;
        }
    }
    Ok(total / T::from_int(count))
}

/// A rational point on the unit sphere in `R^n` by inverse stereographic
/// projection of a random rational point of `R^{n-1}`.
pub fn random_rational_unit_vector<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    assert!(n >= 1, "dimension must be positive");
    let t: Vec<T> = (0..n - 1)
        .map(|_| T::ratio(rng.random_range(-6..=6), rng.random_range(1..=5)))
        .collect();
    let s = sum(t.iter().map(|v| v.clone() * v.clone()));
    let denom = T::one() + s.clone();
    let mut out: Vec<T> = t.iter().map(|v| T::from_int(2) * v.clone() / denom.clone()).collect();
    out.push((s - T::one()) / denom);
    out
}

/// Random rational weights summing to one.
pub fn random_rational_weights<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    assert!(n >= 1, "dimension must be positive");
    let mut w: Vec<T> = (0..n - 1)
        .map(|_| T::ratio(rng.random_range(-9..=9), rng.random_range(1..=7)))
        .collect();
    let rest = T::one() - sum(w.iter().cloned());
    w.push(rest);
    w
}
