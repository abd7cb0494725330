//! Seeded generation of heavy-tailed matrix entries.
//!
//! Every entry of a generated matrix owns a private generator whose seed is a
//! hash of `(master_seed, stream_id, row, column)`. Submatrices are therefore
//! reproducible independently of traversal order or thread scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::special::gamma;

/// Largest number of entries `fill_matrix` will allocate (8 GiB of `f64`).
pub const MAX_ENTRIES: usize = 1 << 30;

/// Distribution family of the i.i.d. data entries.
///
/// Serialised with an internal `family` tag, e.g.
/// `{"family":"student_t","df":3.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TailLaw {
    Gaussian,
    StudentT {
        df: f64,
    },
    /// `S * P` with a fair sign `S` and `P(P > x) = x^-alpha` on `[1, inf)`.
    SymmetricPareto {
        alpha: f64,
    },
    /// `scale / G` with `G ~ Gamma(shape, 1)`; when `centered` and
    /// `shape > 1`, the mean `scale / (shape - 1)` is subtracted.
    InverseGamma {
        shape: f64,
        scale: f64,
        #[serde(default = "default_centered")]
        centered: bool,
    },
}

fn default_centered() -> bool {
    true
}

impl TailLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            TailLaw::Gaussian => Ok(()),
            TailLaw::StudentT { df } if ok(df) => Ok(()),
            TailLaw::SymmetricPareto { alpha } if ok(alpha) => Ok(()),
            TailLaw::InverseGamma { shape, scale, .. } if ok(shape) && ok(scale) => Ok(()),
            _ => Err(Error::ParameterDomain(format!("{self:?}"))),
        }
    }

    /// Tail index `alpha` of `|X|`; infinite for the Gaussian.
    pub fn tail_index(&self) -> f64 {
        match *self {
            TailLaw::Gaussian => f64::INFINITY,
            TailLaw::StudentT { df } => df,
            TailLaw::SymmetricPareto { alpha } => alpha,
            TailLaw::InverseGamma { shape, .. } => shape,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, TailLaw::InverseGamma { .. })
    }

    /// Limit of `x^alpha * P(|X| > x)` for the raw (unstandardised) draw.
    ///
    /// For the t law this is `2 c_df df^((df-1)/2)` with `c_df` the density
    /// normalising constant; for the inverse gamma it is
    /// `scale^shape / (shape Γ(shape))`. Centering does not change it.
    pub fn sv_constant(&self) -> Option<f64> {
        match *self {
            TailLaw::Gaussian => None,
            TailLaw::SymmetricPareto { .. } => Some(1.0),
            TailLaw::StudentT { df } => {
                let c = gamma((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * gamma(df / 2.0));
                Some(2.0 * c * df.powf((df - 1.0) / 2.0))
            }
            TailLaw::InverseGamma { shape, scale, .. } => {
                Some(scale.powf(shape) / (shape * gamma(shape)))
            }
        }
    }

    /// Variance of one entry, `None` when infinite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            TailLaw::Gaussian => Some(1.0),
            TailLaw::StudentT { df } if df > 2.0 => Some(df / (df - 2.0)),
            TailLaw::SymmetricPareto { alpha } if alpha > 2.0 => Some(alpha / (alpha - 2.0)),
            TailLaw::InverseGamma { shape, scale, .. } if shape > 2.0 => {
                Some(scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0)))
            }
            _ => None,
        }
    }

    /// `E[X^4] / Var(X)^2`, `None` when the fourth moment is infinite.
    pub fn standardized_fourth_moment(&self) -> Option<f64> {
        match *self {
            TailLaw::Gaussian => Some(3.0),
            TailLaw::StudentT { df } if df > 4.0 => Some(3.0 * (df - 2.0) / (df - 4.0)),
            TailLaw::SymmetricPareto { alpha } if alpha > 4.0 => {
                // E P^4 = a/(a-4), E P^2 = a/(a-2)
                let m4 = alpha / (alpha - 4.0);
                let m2 = alpha / (alpha - 2.0);
                Some(m4 / (m2 * m2))
            }
            _ => None,
        }
    }

    /// Tail constant of the unit-variance entry `X / sd(X)`, i.e. the constant
    /// value of the slowly varying function in the regular-variation
    /// condition once the entries are standardised.
    pub fn unit_variance_tail_constant(&self) -> Option<f64> {
        let c = self.sv_constant()?;
        let var = self.variance()?;
        Some(c * var.powf(-self.tail_index() / 2.0))
    }

    /// One draw from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TailLaw::Gaussian => StandardNormal.sample(rng),
            TailLaw::StudentT { df } => StudentT::new(df)
                .expect("validated degrees of freedom")
                .sample(rng),
            TailLaw::SymmetricPareto { alpha } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let magnitude = u.powf(-1.0 / alpha);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            TailLaw::InverseGamma {
                shape,
                scale,
                centered,
            } => {
                let g: f64 = Gamma::new(shape, 1.0)
                    .expect("validated shape")
                    .sample(rng);
                let x = scale / g;
                if centered && shape > 1.0 {
                    x - scale / (shape - 1.0)
                } else {
                    x
                }
            }
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A splittable random stream identified by `(master_seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    fn key(&self) -> u64 {
        splitmix64(splitmix64(self.master_seed) ^ self.stream_id)
    }

    fn row_key(&self, i: u64) -> u64 {
        splitmix64(self.key() ^ splitmix64(i))
    }

    /// Generator owned by cell `(i, j)` of this stream.
    pub fn cell(&self, i: u64, j: u64) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(splitmix64(self.row_key(i) ^ j))
    }

    /// A sequential generator for this stream, for consumers that do not
    /// need cell addressing.
    pub fn sequential(&self) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(self.key())
    }

    /// Child stream; distinct `child` values give independent streams.
    pub fn split(&self, child: u64) -> RngStream {
        RngStream::new(self.key(), child)
    }
}

/// One draw from `law` using the stream's sequential generator.
pub fn sample_entry(law: &TailLaw, rng: &RngStream) -> Result<f64> {
    law.validate()?;
    Ok(law.sample(&mut rng.sequential()))
}

/// `p x n` matrix of i.i.d. draws; entry `(i, j)` is drawn from `rng.cell(i, j)`.
pub fn fill_matrix(law: &TailLaw, p: usize, n: usize, rng: &RngStream) -> Result<DataMatrix> {
    law.validate()?;
    if p == 0 || n == 0 {
        return Err(Error::Precondition(format!("dimensions must be positive, got {p}x{n}")));
    }
    let len = p
        .checked_mul(n)
        .filter(|&len| len <= MAX_ENTRIES)
        .ok_or_else(|| Error::Resource(format!("{p}x{n} matrix is too large")))?;
    let mut entries = Vec::new();
    entries
        .try_reserve_exact(len)
        .map_err(|e| Error::Resource(e.to_string()))?;
    for i in 0..p {
        let row = rng.row_key(i as u64);
        entries.extend((0..n).map(|j| {
            let mut cell = Xoshiro256PlusPlus::seed_from_u64(splitmix64(row ^ j as u64));
            law.sample(&mut cell)
        }));
    }
    DataMatrix::from_row_major(p, n, entries)
}
