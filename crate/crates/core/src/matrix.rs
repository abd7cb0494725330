//! Dense sample covariance / correlation matrices and their log-determinants.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

/// Dot product with four independent accumulators.
///
/// The summation order is fixed, so results are bit-reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `p x n` data matrix, rows are variables and columns observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    p: usize,
    n: usize,
    entries: Vec<f64>,
}

impl DataMatrix {
    pub fn from_row_major(p: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::Precondition(format!("dimensions must be positive, got {p}x{n}")));
        }
        if entries.len() != p * n {
            return Err(Error::Precondition(format!(
                "expected {} entries for a {p}x{n} matrix, got {}",
                p * n,
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "entry ({}, {}) is not finite",
                k / n,
                k % n
            )));
        }
        Ok(Self { p, n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), n, rows.concat())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n)
    }

    /// Multiply row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.p {
            return Err(Error::Precondition("one factor per row required".into()));
        }
        let entries = self
            .entries
            .chunks_exact(self.n)
            .zip(factors)
            .flat_map(|(row, &f)| row.iter().map(move |v| v * f))
            .collect();
        Self::from_row_major(self.p, self.n, entries)
    }

    /// Apply `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_row_major(self.p, self.n, self.entries.iter().map(|&v| f(v)).collect())
    }

    /// CSV layout: a `p,n` header line, then one line of `n` values per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{}", self.p, self.n)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("missing header".into()))??;
        let dims: Vec<usize> = header
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("bad header {header:?}: {e}")))?;
        let [p, n] = dims[..] else {
            return Err(Error::Format(format!("bad header {header:?}")));
        };
        let mut entries = Vec::with_capacity(p * n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for field in line.split(',') {
                entries.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad value {field:?}: {e}")))?,
                );
            }
        }
        Self::from_row_major(p, n, entries)
    }

    /// Binary layout: `p` and `n` as little-endian `u64`, then the entries as
    /// little-endian `f64` in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.p as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.entries {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let p = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let len = p
            .checked_mul(n)
            .filter(|&l| l <= crate::sampling::MAX_ENTRIES)
            .ok_or_else(|| Error::Format(format!("implausible dimensions {p}x{n}")))?;
        let mut entries = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            entries.push(f64::from_le_bytes(word));
        }
        Self::from_row_major(p, n, entries)
    }
}

/// Dense symmetric matrix stored in full row-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Build from the upper triangle of `f(i, j)`, `i <= j`, mirrored.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    /// Checks exact symmetry of a row-major square array.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Precondition("not a square array".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::Precondition(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_upper(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Sample correlation matrix; unit diagonal and exact symmetry by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(SymmetricMatrix);

impl CorrelationMatrix {
    pub fn p(&self) -> usize {
        self.0.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.0
    }
}

/// Data matrix with every row scaled to unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfNormalizedMatrix(DataMatrix);

impl SelfNormalizedMatrix {
    pub fn p(&self) -> usize {
        self.0.p
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.0.rows()
    }

    pub fn as_data(&self) -> &DataMatrix {
        &self.0
    }

    /// Wrap rows that are already unit vectors (checked to 1e-12).
    pub fn from_unit_rows(x: DataMatrix) -> Result<Self> {
        for (i, row) in x.rows().enumerate() {
            let norm2 = dot(row, row);
            if (norm2 - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!("row {i} has squared norm {norm2}")));
            }
        }
        Ok(Self(x))
    }
}

/// `S = X X^T / n`, upper triangle computed and mirrored.
pub fn sample_covariance(x: &DataMatrix) -> SymmetricMatrix {
    let n = x.n as f64;
    SymmetricMatrix::from_upper(x.p, |i, j| dot(x.row(i), x.row(j)) / n)
}

/// Divide every row by its Euclidean norm.
pub fn self_normalize(x: &DataMatrix) -> Result<SelfNormalizedMatrix> {
    let mut entries = Vec::with_capacity(x.entries.len());
    for (i, row) in x.rows().enumerate() {
        let norm = dot(row, row).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateInput { row: i });
        }
        entries.extend(row.iter().map(|v| v / norm));
    }
    Ok(SelfNormalizedMatrix(DataMatrix {
        p: x.p,
        n: x.n,
        entries,
    }))
}

/// `R = Y Y^T` with the diagonal pinned to exactly one.
pub fn correlation_from_normalized(y: &SelfNormalizedMatrix) -> CorrelationMatrix {
    CorrelationMatrix(SymmetricMatrix::from_upper(y.p(), |i, j| {
        if i == j {
            1.0
        } else {
            dot(y.row(i), y.row(j))
        }
    }))
}

pub fn sample_correlation(x: &DataMatrix) -> Result<CorrelationMatrix> {
    Ok(correlation_from_normalized(&self_normalize(x)?))
}

/// Lower Cholesky factor in row-major order.
pub fn cholesky(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    let d = m.dim;
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let (done, rest) = l.split_at_mut(j * d);
        let row_j = &mut rest[..d];
        for i in 0..j {
            let row_i = &done[i * d..i * d + d];
            let s = m.get(j, i) - dot(&row_j[..i], &row_i[..i]);
            row_j[i] = s / row_i[i];
        }
        let pivot = m.get(j, j) - dot(&row_j[..j], &row_j[..j]);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: pivot,
            });
        }
        row_j[j] = pivot.sqrt();
    }
    Ok(l)
}

/// `log det M = 2 * sum(log diag(L))` for the Cholesky factor `L`.
pub fn log_det_spd(m: &SymmetricMatrix) -> Result<f64> {
    let d = m.dim;
    let l = cholesky(m)?;
    Ok(2.0 * (0..d).map(|k| l[k * d + k].ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{fill_matrix, RngStream, TailLaw};

    fn gaussian(p: usize, n: usize, seed: u64) -> DataMatrix {
        fill_matrix(&TailLaw::Gaussian, p, n, &RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn covariance_small_cases() {
        let x = DataMatrix::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(sample_covariance(&x).entries(), &[9.0]);
        let x = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(sample_covariance(&x).entries(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn covariance_matches_triple_loop() {
        let x = gaussian(5, 10, 1);
        let s = sample_covariance(&x);
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..10 {
                    acc += x.row(i)[k] * x.row(j)[k];
                }
                assert!((s.get(i, j) - acc / 10.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let y = self_normalize(&DataMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap()).unwrap();
        assert!((y.row(0)[0] - 0.6).abs() < 1e-15 && (y.row(0)[1] - 0.8).abs() < 1e-15);
        let y = self_normalize(&DataMatrix::from_rows(&[vec![2.5; 7]]).unwrap()).unwrap();
        for v in y.row(0) {
            assert!((v - 1.0 / 7f64.sqrt()).abs() < 1e-15);
        }
        let x = fill_matrix(&TailLaw::StudentT { df: 2.5 }, 4, 300, &RngStream::new(2, 0)).unwrap();
        for row in self_normalize(&x).unwrap().rows() {
            assert!((dot(row, row) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_row_is_degenerate() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(self_normalize(&x), Err(Error::DegenerateInput { row: 1 })));
        assert!(matches!(sample_correlation(&x), Err(Error::DegenerateInput { row: 1 })));
    }

    #[test]
    fn correlation_examples() {
        let x = DataMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 5.0]])
            .unwrap();
        assert_eq!(sample_correlation(&x).unwrap().as_symmetric(), &SymmetricMatrix::identity(3));
        let r = vec![0.3, -1.2, 2.0, 0.7];
        let x = DataMatrix::from_rows(&[r.clone(), r.iter().map(|v| 2.0 * v).collect()]).unwrap();
        let c = sample_correlation(&x).unwrap();
        for v in c.as_symmetric().entries() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn correlation_agrees_with_covariance_route() {
        let x = gaussian(6, 15, 3);
        let s = sample_covariance(&x);
        let r = sample_correlation(&x).unwrap();
        for i in 0..6 {
            assert_eq!(r.get(i, i), 1.0);
            for j in 0..6 {
                let via_s = s.get(i, j) / (s.get(i, i) * s.get(j, j)).sqrt();
                assert!((r.get(i, j) - via_s).abs() < 1e-12);
                assert_eq!(r.get(i, j), r.get(j, i));
            }
        }
    }

    #[test]
    fn log_det_examples() {
        for p in [1, 4, 9] {
            assert_eq!(log_det_spd(&SymmetricMatrix::identity(p)).unwrap(), 0.0);
        }
        let d = log_det_spd(&SymmetricMatrix::diagonal(&[2.0, 8.0])).unwrap();
        assert!((d - 16f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn non_pd_reports_pivot() {
        let m = SymmetricMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(log_det_spd(&m), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        // p > n: R is singular.
        let r = sample_correlation(&gaussian(6, 4, 8)).unwrap();
        assert!(log_det_spd(r.as_symmetric()).is_err());
    }

    #[test]
    fn csv_and_binary_layouts() {
        let x = fill_matrix(&TailLaw::StudentT { df: 3.5 }, 3, 5, &RngStream::new(4, 0)).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"3,5\n"));
        assert_eq!(DataMatrix::read_csv(&buf[..]).unwrap(), x);
        let mut bin = Vec::new();
        x.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 16 + 15 * 8);
        assert_eq!(DataMatrix::read_binary(&bin[..]).unwrap(), x);
        assert!(DataMatrix::read_csv(&b"2,2\n1,2\n3\n"[..]).is_err());
    }
}
