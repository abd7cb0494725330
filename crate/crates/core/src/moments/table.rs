use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Canonical key of a mixed even moment: exponents sorted descending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MomentKey(Vec<u32>);

impl MomentKey {
    /// Builds a key from even positive exponents in any order.
    pub fn new(exponents: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut parts: Vec<u32> = exponents.into_iter().collect();
        if parts.is_empty() {
            return Err(Error::Format("moment key needs at least one exponent".into()));
        }
        if let Some(&bad) = parts.iter().find(|&&e| e == 0 || e % 2 == 1) {
            return Err(Error::Format(format!("moment exponent {bad} is not a positive even integer")));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(MomentKey(parts))
    }

    /// Panicking constructor for literal keys.
    pub fn of(exponents: &[u32]) -> Self {
        Self::new(exponents.iter().copied()).expect("literal moment key")
    }

    /// Key with half-exponents `k_i`, i.e. exponents `2k_i`.
    pub fn from_halves(halves: &[u32]) -> Result<Self> {
        Self::new(halves.iter().map(|k| 2 * k))
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn halves(&self) -> Vec<u32> {
        self.0.iter().map(|e| e / 2).collect()
    }

    /// Number of distinct indices `r`.
    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// `Σ k_i`.
    pub fn half_degree(&self) -> u32 {
        self.0.iter().sum::<u32>() / 2
    }

    /// Every key with `Σ k_i <= max_half_degree`, ordered by degree.
    pub fn all_up_to(max_half_degree: u32) -> Vec<MomentKey> {
        let mut out = Vec::new();
        for total in 1..=max_half_degree {
            let mut parts = Vec::new();
            partitions(total, total, &mut parts, &mut |p| {
                out.push(MomentKey(p.iter().map(|k| 2 * k).collect()));
            });
        }
        out
    }
}

fn partitions(rest: u32, max_part: u32, cur: &mut Vec<u32>, emit: &mut dyn FnMut(&[u32])) {
    if rest == 0 {
        emit(cur);
        return;
    }
    for part in (1..=max_part.min(rest)).rev() {
        cur.push(part);
        partitions(rest - part, part, cur, emit);
        cur.pop();
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for MomentKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Format(format!("bad moment key `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        MomentKey::new(parts)
    }
}

/// Mixed even moments of an exchangeable vector of length `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable<T> {
    n: usize,
    values: BTreeMap<MomentKey, T>,
}

impl<T: Scalar> MomentTable<T> {
    pub fn new(n: usize) -> Self {
        MomentTable { n, values: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, key: MomentKey, value: T) -> Option<T> {
        self.values.insert(key, value)
    }

    pub fn with(mut self, exponents: &[u32], value: T) -> Self {
        self.insert(MomentKey::of(exponents), value);
        self
    }

    pub fn get(&self, key: &MomentKey) -> Option<&T> {
        self.values.get(key)
    }

    pub fn contains(&self, exponents: &[u32]) -> bool {
        self.values.contains_key(&MomentKey::of(exponents))
    }

    /// Value for a literal key, or an incomplete-table error naming it.
    pub fn require(&self, exponents: &[u32]) -> Result<T> {
        let key = MomentKey::of(exponents);
        self.values
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::IncompleteTable(format!("missing beta_{{{key}}}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MomentKey, &T)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> MomentTable<f64> {
        MomentTable {
            n: self.n,
            values: self.values.iter().map(|(k, v)| (k.clone(), v.to_f64())).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    n: usize,
    moments: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    se: Option<BTreeMap<String, f64>>,
}

fn keyed(t: &MomentTable<f64>) -> BTreeMap<String, f64> {
    t.values.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn unkeyed(n: usize, m: BTreeMap<String, f64>) -> Result<MomentTable<f64>> {
    let mut t = MomentTable::new(n);
    for (k, v) in m {
        t.insert(k.parse()?, v);
    }
    Ok(t)
}

impl MomentTable<f64> {
    /// JSON document `{"n", "moments", "se"}`; `se` is omitted when absent.
    pub fn to_json(&self, se: Option<&MomentTable<f64>>) -> Result<String> {
        let doc = TableJson { n: self.n, moments: keyed(self), se: se.map(keyed) };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<(MomentTable<f64>, Option<MomentTable<f64>>)> {
        let doc: TableJson = serde_json::from_str(s)?;
        let table = unkeyed(doc.n, doc.moments)?;
        let se = doc.se.map(|m| unkeyed(doc.n, m)).transpose()?;
        Ok((table, se))
    }
}

/// Fills the moments determined by `beta_{2,2}`, `beta_{2,2,2}`,
/// `beta_{2,2,2,2}` and `beta_{4,4}` for a vector on the unit sphere.
pub fn complete_table<T: Scalar>(partial: &MomentTable<T>, n: usize) -> Result<MomentTable<T>> {
    let b22 = partial.require(&[2, 2])?;
    let b222 = partial.require(&[2, 2, 2])?;
    let b2222 = partial.require(&[2, 2, 2, 2])?;
    let b44 = partial.require(&[4, 4])?;
    if n == 0 {
        return Err(Error::ParameterDomain("n must be positive".into()));
    }
    let c = |v: i64| T::from_int(v);
    let nn = n as i64;
    let inv_n = T::ratio(1, nn);

    let b4 = inv_n.clone() - c(nn - 1) * b22.clone();
    let b42 = b22.clone() / c(2) - T::ratio(nn - 2, 2) * b222.clone();
    let b6 = inv_n.clone() - T::ratio(3 * (nn - 1), 2) * b22.clone()
        + T::ratio((nn - 1) * (nn - 2), 2) * b222.clone();
    let b62 = b22.clone() / c(2) - T::ratio(5 * (nn - 2), 6) * b222.clone()
        + T::ratio((nn - 2) * (nn - 3), 3) * b2222.clone()
        - b44.clone();
    let b422 = b222.clone() / c(3) + T::ratio(3 - nn, 3) * b2222.clone();
    // 4n^2/3 - 4n + 8/3 and -n^3/3 + 2n^2 - 11n/3 + 2 over a common denominator.
    let c222 = T::ratio(4 * nn * nn - 12 * nn + 8, 3);
    let c2222 = T::ratio(-nn * nn * nn + 6 * nn * nn - 11 * nn + 6, 3);
    let b8 = inv_n.clone() + c(2 * (1 - nn)) * b22.clone() + c222 * b222.clone() + c2222 * b2222.clone()
        + c(nn - 1) * b44.clone();

    let mut out = MomentTable::new(n);
    for (k, v) in partial.iter() {
        out.insert(k.clone(), v.clone());
    }
    out.insert(MomentKey::of(&[2]), inv_n);
    out.insert(MomentKey::of(&[4]), b4);
    out.insert(MomentKey::of(&[4, 2]), b42);
    out.insert(MomentKey::of(&[6]), b6);
    out.insert(MomentKey::of(&[6, 2]), b62);
    out.insert(MomentKey::of(&[4, 2, 2]), b422);
    out.insert(MomentKey::of(&[8]), b8);
    Ok(out)
}

/// One sphere identity written as `residual = lhs - rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereResidual<T> {
    pub name: &'static str,
    pub residual: T,
}

/// Residuals of every sphere identity whose moments are present in `t`.
///
/// All residuals vanish for an exchangeable vector with `Σ Z_k^2 = 1`.
pub fn sphere_residuals<T: Scalar>(t: &MomentTable<T>) -> Vec<SphereResidual<T>> {
    let nn = t.n() as i64;
    let c = |v: i64| T::from_int(v);
    let g = |e: &[u32]| t.get(&MomentKey::of(e)).cloned();
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Option<T>| {
        if let Some(residual) = r {
            out.push(SphereResidual { name, residual });
        }
    };

    push("beta2", g(&[2]).map(|b2| b2 - T::ratio(1, nn)));
    push(
        "beta4",
        (|| Some(g(&[4])? - T::ratio(1, nn) + c(nn - 1) * g(&[2, 2])?))(),
    );
    push(
        "beta42",
        (|| Some(g(&[4, 2])? - g(&[2, 2])? / c(2) + T::ratio(nn - 2, 2) * g(&[2, 2, 2])?))(),
    );
    push(
        "beta6",
        (|| {
            Some(
                g(&[6])? - T::ratio(1, nn) + T::ratio(3 * (nn - 1), 2) * g(&[2, 2])?
                    - T::ratio((nn - 1) * (nn - 2), 2) * g(&[2, 2, 2])?,
            )
        })(),
    );
    push(
        "beta62",
        (|| {
            Some(
                g(&[6, 2])? - g(&[2, 2])? / c(2) + T::ratio(5 * (nn - 2), 6) * g(&[2, 2, 2])?
                    - T::ratio((nn - 2) * (nn - 3), 3) * g(&[2, 2, 2, 2])?
                    + g(&[4, 4])?,
            )
        })(),
    );
    push(
        "beta422",
        (|| {
            Some(g(&[4, 2, 2])? - g(&[2, 2, 2])? / c(3) - T::ratio(3 - nn, 3) * g(&[2, 2, 2, 2])?)
        })(),
    );
    push(
        "beta8",
        (|| {
            Some(
                g(&[8])? - T::ratio(1, nn) - c(2 * (1 - nn)) * g(&[2, 2])?
                    - T::ratio(4 * nn * nn - 12 * nn + 8, 3) * g(&[2, 2, 2])?
                    - T::ratio(-nn * nn * nn + 6 * nn * nn - 11 * nn + 6, 3) * g(&[2, 2, 2, 2])?
                    - c(nn - 1) * g(&[4, 4])?,
            )
        })(),
    );
    push(
        "multinomial_degree4",
        (|| Some(T::one() - c(nn) * g(&[4])? - c(nn * (nn - 1)) * g(&[2, 2])?))(),
    );
    push(
        "multinomial_degree6",
        (|| {
            Some(
                T::one() - c(nn) * g(&[6])? - c(3 * nn * (nn - 1)) * g(&[4, 2])?
                    - c(nn * (nn - 1) * (nn - 2)) * g(&[2, 2, 2])?,
            )
        })(),
    );
    push(
        "multinomial_degree8",
        (|| {
            Some(
                T::one() - c(nn) * g(&[8])? - c(4 * nn * (nn - 1)) * g(&[6, 2])?
                    - c(3 * nn * (nn - 1)) * g(&[4, 4])?
                    - c(6 * nn * (nn - 1) * (nn - 2)) * g(&[4, 2, 2])?
                    - c(nn * (nn - 1) * (nn - 2) * (nn - 3)) * g(&[2, 2, 2, 2])?,
            )
        })(),
    );
    push("peel_single_2", (|| Some(g(&[2])? - g(&[4])? - c(nn - 1) * g(&[2, 2])?))());
    push("peel_single_4", (|| Some(g(&[4])? - g(&[6])? - c(nn - 1) * g(&[4, 2])?))());
    push("peel_single_6", (|| Some(g(&[6])? - g(&[8])? - c(nn - 1) * g(&[6, 2])?))());
    push(
        "peel_pair_2",
        (|| Some(g(&[2, 2])? - c(2) * g(&[4, 2])? - c(nn - 2) * g(&[2, 2, 2])?))(),
    );
    push(
        "peel_pair_4",
        (|| Some(g(&[4, 2])? - g(&[6, 2])? - g(&[4, 4])? - c(nn - 2) * g(&[4, 2, 2])?))(),
    );
    push(
        "peel_triple",
        (|| Some(g(&[2, 2, 2])? - c(3) * g(&[4, 2, 2])? - c(nn - 3) * g(&[2, 2, 2, 2])?))(),
    );
    out
}
