use super::scalar::{sum, Scalar};
use super::table::{sphere_residuals, MomentTable};
use crate::error::{Error, Result};

/// Power sums `S_j = Σ a_k^j` for `j = 2, 3, 4`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSums<T> {
    pub s2: T,
    pub s3: T,
    pub s4: T,
}

/// Weights summing to one, with cached power sums.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T> {
    weights: Vec<T>,
    sums: PowerSums<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Precondition("weight vector is empty".into()));
        }
        let s1 = sum(weights.iter().cloned());
        if !(s1.clone() - T::one()).negligible(1e-14) {
            return Err(Error::Precondition(format!("weights sum to {:e}, not 1", s1.to_f64())));
        }
        let sums = PowerSums {
            s2: sum(weights.iter().map(|a| a.powi(2))),
            s3: sum(weights.iter().map(|a| a.powi(3))),
            s4: sum(weights.iter().map(|a| a.powi(4))),
        };
        Ok(WeightVector { weights, sums })
    }

    /// `a_k = 1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![T::ratio(1, n as i64); n])
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn power_sums(&self) -> &PowerSums<T> {
        &self.sums
    }
}

/// `E[(Σ a_k Z_k^2)^2]`.
pub fn second_moment<T: Scalar>(a: &WeightVector<T>, t: &MomentTable<T>) -> Result<T> {
    let s = a.power_sums();
    let b4 = t.require(&[4])?;
    let b22 = t.require(&[2, 2])?;
    Ok(b4 * s.s2.clone() + b22 * (T::one() - s.s2.clone()))
}

/// `E[(Σ a_k Z_k^2)^3]`.
pub fn third_moment_raw<T: Scalar>(a: &WeightVector<T>, t: &MomentTable<T>) -> Result<T> {
    let PowerSums { s2, s3, .. } = a.power_sums().clone();
    let b6 = t.require(&[6])?;
    let b42 = t.require(&[4, 2])?;
    let b222 = t.require(&[2, 2, 2])?;
    let c = T::from_int;
    Ok(b222.clone() * (T::one() + c(6) * s2.clone() + c(8) * s3.clone())
        + (b6 - c(15) * b42.clone() + c(30) * b222.clone()) * s3.clone()
        + (b42 - c(3) * b222) * (c(3) * s2 + c(12) * s3))
}

/// `E[(Σ a_k Z_k^2)^4]`.
pub fn fourth_moment_raw<T: Scalar>(a: &WeightVector<T>, t: &MomentTable<T>) -> Result<T> {
    let PowerSums { s2, s3, s4 } = a.power_sums().clone();
    let b8 = t.require(&[8])?;
    let b62 = t.require(&[6, 2])?;
    let b44 = t.require(&[4, 4])?;
    let b422 = t.require(&[4, 2, 2])?;
    let b2222 = t.require(&[2, 2, 2, 2])?;
    let c = T::from_int;
    let s2sq = s2.clone() * s2.clone();
    Ok(s4.clone() * b8
        + c(4) * (s3.clone() - s4.clone()) * b62
        + c(6) * (s2.clone() - s2sq.clone() - c(2) * s3.clone() + c(2) * s4.clone()) * b422
        + c(3) * (s2sq.clone() - s4.clone()) * b44
        + (T::one() - c(6) * s2 + c(3) * s2sq + c(8) * s3 - c(6) * s4) * b2222)
}

/// `E[(Σ a_k (Z_k^2 - β_2))^4]` by binomial expansion over the raw moments.
pub fn fourth_moment_centered<T: Scalar>(a: &WeightVector<T>, t: &MomentTable<T>) -> Result<T> {
    let b2 = t.require(&[2])?;
    let raw = [
        T::one(),
        b2.clone(),
        second_moment(a, t)?,
        third_moment_raw(a, t)?,
        fourth_moment_raw(a, t)?,
    ];
    let binom = [1, 4, 6, 4, 1];
    let neg = -b2;
    Ok(sum((0..5).map(|j| T::from_int(binom[j]) * raw[j].clone() * neg.powi(4 - j as u32))))
}

/// The same centered fourth moment from its closed expansion in `S_2, S_3, S_4`.
pub fn fourth_moment_centered_closed<T: Scalar>(a: &WeightVector<T>, t: &MomentTable<T>) -> Result<T> {
    let PowerSums { s2, s3, s4 } = a.power_sums().clone();
    let b2 = t.require(&[2])?;
    let b4 = t.require(&[4])?;
    let b6 = t.require(&[6])?;
    let b8 = t.require(&[8])?;
    let b22 = t.require(&[2, 2])?;
    let b42 = t.require(&[4, 2])?;
    let b62 = t.require(&[6, 2])?;
    let b44 = t.require(&[4, 4])?;
    let b222 = t.require(&[2, 2, 2])?;
    let b422 = t.require(&[4, 2, 2])?;
    let b2222 = t.require(&[2, 2, 2, 2])?;
    let c = T::from_int;
    let s2sq = s2.clone() * s2.clone();
    let b2sq = b2.clone() * b2.clone();
    Ok(s4.clone() * b8
        + c(4) * (s3.clone() - s4.clone()) * b62
        - c(4) * s3.clone() * b2.clone() * b6
        + c(3) * (s2sq.clone() - s4.clone()) * b44
        + c(6) * (s2.clone() - s2sq.clone() - c(2) * s3.clone() + c(2) * s4.clone()) * b422
        + c(12) * (s3.clone() - s2.clone()) * b2.clone() * b42
        + c(4) * (c(3) * s2.clone() - c(2) * s3.clone() - T::one()) * b2.clone() * b222
        + (T::one() - c(6) * s2.clone() + c(3) * s2sq + c(8) * s3 - c(6) * s4) * b2222
        + c(6) * (T::one() - s2.clone()) * b2sq.clone() * b22
        + c(6) * s2 * b2sq.clone() * b4
        - c(3) * b2sq.clone() * b2sq)
}

/// Coefficients of the sphere fourth-moment expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct KCoefficients<T> {
    pub k: T,
    pub k44: T,
    pub k22: T,
    pub k222: T,
    pub k2222: T,
}

impl<T: Scalar> KCoefficients<T> {
    pub fn sum(&self) -> T {
        self.k.clone() + self.k44.clone() + self.k22.clone() + self.k222.clone() + self.k2222.clone()
    }
}

pub fn k_coefficients<T: Scalar>(s: &PowerSums<T>, n: usize) -> KCoefficients<T> {
    let c = T::from_int;
    let ni = n as i64;
    let nt = c(ni);
    let PowerSums { s2, s3, s4 } = s.clone();
    let s2sq = s2.clone() * s2.clone();
    KCoefficients {
        k44: c(3) * s2sq.clone() - c(4) * s3.clone() + nt.clone() * s4.clone(),
        k: c(6 * ni) * s2.clone() - c(4 * ni * ni) * s3.clone() + c(ni * ni * ni) * s4.clone() - c(3),
        k22: c(-12 * ni) * s2.clone() + c(8 * ni * ni) * s3.clone() - c(2 * ni * ni * ni) * s4.clone() + c(6),
        k222: c(8 * ni) * s2.clone() - c(2 * ni) * s2sq.clone()
            + T::ratio(8 * ni * (1 - 2 * ni), 3) * s3.clone()
            + T::ratio(2 * ni * ni * (2 * ni - 1), 3) * s4.clone()
            - c(4),
        k2222: c(-2 * ni) * s2 + c(2 * ni - 3) * s2sq
            + T::ratio(4 * (ni * ni - 2 * ni + 3), 3) * s3
            - T::ratio(ni * (ni * ni - 2 * ni + 3), 3) * s4
            + T::one(),
    }
}

/// `E[(Σ a_k (n Z_k^2 - 1))^4]` for a vector on the unit sphere in `R^n`.
pub fn fourth_moment_sphere<T: Scalar>(a: &WeightVector<T>, t: &MomentTable<T>, n: usize) -> Result<T> {
    if a.len() != n {
        return Err(Error::Precondition(format!("{} weights for n = {n}", a.len())));
    }
    if t.n() != n {
        return Err(Error::Precondition(format!("table built for n = {}, asked for n = {n}", t.n())));
    }
    if let Some(worst) = sphere_residuals(t)
        .into_iter()
        .filter(|r| !r.residual.negligible(1e-8))
        .max_by(|x, y| x.residual.to_f64().abs().total_cmp(&y.residual.to_f64().abs()))
    {
        return Err(Error::InconsistentTable { residual: worst.residual.to_f64() });
    }
    let b22 = t.require(&[2, 2])?;
    let b222 = t.require(&[2, 2, 2])?;
    let b2222 = t.require(&[2, 2, 2, 2])?;
    let b44 = t.require(&[4, 4])?;
    let kc = k_coefficients(a.power_sums(), n);
    let nt = T::from_int(n as i64);
    Ok(kc.k44 * nt.powi(4) * b44
        + kc.k22 * nt.powi(2) * b22
        + kc.k222 * nt.powi(3) * b222
        + kc.k2222 * nt.powi(4) * b2222
        + kc.k)
}
