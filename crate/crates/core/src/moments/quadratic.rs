use super::scalar::{sum, Scalar};
use super::table::MomentTable;
use crate::error::{Error, Result};

/// Dense square matrix over a [`Scalar`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn from_row_major(dim: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Precondition(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Ok(SquareMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![T::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = T::one();
        }
        SquareMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.entries[i * self.dim + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn trace(&self) -> T {
        sum((0..self.dim).map(|i| self.get(i, i).clone()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(sum((0..d).map(|k| self.get(i, k).clone() * other.get(k, j).clone())));
            }
        }
        SquareMatrix { dim: d, entries }
    }

    /// `Σ_k self_kk * other_kk`, the trace of the Hadamard product.
    pub fn diag_dot(&self, other: &Self) -> T {
        sum((0..self.dim).map(|k| self.get(k, k).clone() * other.get(k, k).clone()))
    }

    /// `zᵀ self z`.
    pub fn quadratic_form(&self, z: &[T]) -> T {
        sum((0..self.dim).flat_map(|i| {
            (0..self.dim).map(move |j| z[i].clone() * self.get(i, j).clone() * z[j].clone())
        }))
    }
}

/// Moments of quadratic forms in a sign-symmetric exchangeable vector.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFormMoments<T> {
    /// `E[(zᵀAz - E zᵀAz)^3]`
    pub third_central: T,
    /// `E[(zᵀAz)^3]`
    pub third_raw: T,
    /// `E[zᵀAz · zᵀBz]`, with `B = A` when no second matrix is given.
    pub cross_second: T,
}

/// Evaluates the quadratic-form moments from traces and Hadamard products of
/// `A` (and `B`), given `β_2, β_4, β_6, β_{2,2}, β_{4,2}, β_{2,2,2}`.
pub fn quadratic_form_moments<T: Scalar>(
    a: &SquareMatrix<T>,
    b: Option<&SquareMatrix<T>>,
    t: &MomentTable<T>,
) -> Result<QuadraticFormMoments<T>> {
    if !a.is_symmetric() {
        return Err(Error::Precondition("A is not symmetric".into()));
    }
    let b = b.unwrap_or(a);
    if !b.is_symmetric() {
        return Err(Error::Precondition("B is not symmetric".into()));
    }
    if b.dim() != a.dim() {
        return Err(Error::Precondition("A and B differ in dimension".into()));
    }
    let b2 = t.require(&[2])?;
    let b4 = t.require(&[4])?;
    let b6 = t.require(&[6])?;
    let b22 = t.require(&[2, 2])?;
    let b42 = t.require(&[4, 2])?;
    let b222 = t.require(&[2, 2, 2])?;
    let c = T::from_int;

    let a2 = a.matmul(a);
    let a3 = a2.matmul(a);
    let tr = a.trace();
    let tr2 = a2.trace();
    let tr3 = a3.trace();
    let had_aa = a.diag_dot(a);
    let had_aa2 = a.diag_dot(&a2);
    let had_aaa = sum((0..a.dim()).map(|k| a.get(k, k).powi(3)));

    let six_fold = b6 - c(15) * b42.clone() + c(30) * b222.clone();
    let four_two = b42.clone() - c(3) * b222.clone();

    let third_raw = b222.clone() * (tr.powi(3) + c(6) * tr.clone() * tr2.clone() + c(8) * tr3.clone())
        + six_fold.clone() * had_aaa.clone()
        + four_two.clone() * (c(3) * tr.clone() * had_aa.clone() + c(12) * had_aa2.clone());

    let third_central = c(8) * b222.clone() * tr3
        + (b222.clone() + c(2) * b2.powi(3) - c(3) * b2.clone() * b22.clone()) * tr.powi(3)
        + c(6) * (b222.clone() - b2.clone() * b22.clone()) * tr.clone() * tr2
        + c(3)
            * (b42 - b4.clone() * b2.clone() + c(3) * b22.clone() * b2 - c(3) * b222)
            * tr
            * had_aa
        + c(12) * four_two * had_aa2
        + six_fold * had_aaa;

    let cross_second = b22.clone() * (a.trace() * b.trace() + c(2) * a.matmul(b).trace())
        + (b4 - c(3) * b22) * a.diag_dot(b);

    Ok(QuadraticFormMoments { third_central, third_raw, cross_second })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{permutation_oracle, Rational};

    fn q(a: i64, b: i64) -> Rational {
        Rational::ratio(a, b)
    }

    #[test]
    fn identity_on_sphere_gives_one() {
        let z = vec![q(1, 3), q(2, 3), q(2, 3)];
        let t = permutation_oracle(&z, true, 3).unwrap();
        let i = SquareMatrix::identity(3);
        let m = quadratic_form_moments(&i, Some(&i), &t).unwrap();
        assert_eq!(m.cross_second, q(1, 1));
        assert_eq!(m.third_raw, q(1, 1));
        assert_eq!(m.third_central, q(0, 1));
    }

    #[test]
    fn diagonal_reduces_to_weighted_third_moment() {
        let z = vec![q(1, 3), q(2, 3), q(0, 1), q(2, 3)];
        let t = permutation_oracle(&z, true, 4).unwrap();
        let w = vec![q(1, 2), q(1, 4), q(-1, 8), q(3, 8)];
        let mut entries = vec![q(0, 1); 16];
        for k in 0..4 {
            entries[k * 5] = w[k].clone();
        }
        let a = SquareMatrix::from_row_major(4, entries).unwrap();
        let m = quadratic_form_moments(&a, None, &t).unwrap();
        let wv = crate::moments::WeightVector::new(w).unwrap();
        assert_eq!(m.third_raw, crate::moments::third_moment_raw(&wv, &t).unwrap());
        assert_eq!(m.cross_second, crate::moments::second_moment(&wv, &t).unwrap());
    }

    #[test]
    fn rejects_asymmetric() {
        let t = permutation_oracle(&[0.6, 0.8], true, 3).unwrap();
        let a = SquareMatrix::from_row_major(2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(quadratic_form_moments(&a, None, &t), Err(Error::Precondition(_))));
    }
}
