use nalgebra::DMatrix;

use super::{ExtendedGraph, NetworkError, RATIO_SUM_TOLERANCE};

/// Above this many vertices the matrix is stored as sparse rows.
pub const DENSE_LIMIT: usize = 512;

/// Row-stochastic transition matrix **P** over the extended link set.
///
/// Row `i` holds the turning ratios out of link `i`; the last row is the
/// absorbing supersink. This type is the single home of matrix-power math:
/// everything else goes through `mul_vec`/`tmul_vec` or [`Self::power`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    storage: Storage,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(DMatrix<f64>),
    Sparse { n: usize, rows: Vec<Vec<(usize, f64)>> },
}

impl TransitionMatrix {
    pub(super) fn from_graph(g: &ExtendedGraph) -> Self {
        let n = g.len();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> =
                    g.successors[i].iter().map(|&(j, p)| (j.0, p)).collect();
                r.sort_by_key(|&(j, _)| j);
                r
            })
            .collect();
        Self::from_sparse_rows(n, rows)
    }

    fn from_sparse_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        if n <= DENSE_LIMIT {
            let mut m = DMatrix::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                for &(j, p) in row {
                    m[(i, j)] += p;
                }
            }
            Self { storage: Storage::Dense(m) }
        } else {
            Self { storage: Storage::Sparse { n, rows } }
        }
    }

    /// Wraps an arbitrary square matrix after checking that it is
    /// row-stochastic, nonnegative, and absorbing in its last index.
    pub fn try_from_dense(m: DMatrix<f64>) -> Result<Self, NetworkError> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(NetworkError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        for i in 0..n {
            let row = m.row(i);
            if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(NetworkError::NotStochastic { row: i, sum: row.sum() });
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > RATIO_SUM_TOLERANCE {
                return Err(NetworkError::NotStochastic { row: i, sum });
            }
        }
        if m[(n - 1, n - 1)] != 1.0 {
            return Err(NetworkError::NotAbsorbing);
        }
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Ok(Self::from_sparse_rows(n, rows))
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.nrows(),
            Storage::Sparse { n, .. } => *n,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse { rows, .. } => {
                rows[i].iter().find(|&&(k, _)| k == j).map_or(0.0, |&(_, p)| p)
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(m) => m.row_iter().map(|r| r.sum()).collect(),
            Storage::Sparse { rows, .. } => {
                rows.iter().map(|r| r.iter().map(|&(_, p)| p).sum()).collect()
            }
        }
    }

    /// **P** x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        match &self.storage {
            Storage::Dense(m) => m.row_iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect(),
            Storage::Sparse { rows, .. } => {
                rows.iter().map(|r| r.iter().map(|&(j, p)| p * x[j]).sum()).collect()
            }
        }
    }

    /// **P**ᵀ x.
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        let mut out = vec![0.0; n];
        match &self.storage {
            Storage::Dense(m) => {
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += m[(i, j)] * xi;
                    }
                }
            }
            Storage::Sparse { rows, .. } => {
                for (i, row) in rows.iter().enumerate() {
                    for &(j, p) in row {
                        out[j] += p * x[i];
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse { n, rows } => {
                let mut m = DMatrix::zeros(*n, *n);
                for (i, row) in rows.iter().enumerate() {
                    for &(j, p) in row {
                        m[(i, j)] = p;
                    }
                }
                m
            }
        }
    }

    /// Dense **P**ʰ by repeated multiplication; **P**⁰ is the identity.
    pub fn power(&self, h: usize) -> DMatrix<f64> {
        let p = self.to_dense();
        let mut acc = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..h {
            acc = &acc * &p;
        }
        acc
    }

    /// Writes **P** as CSV with a header row of link names.
    pub fn write_csv<W: std::io::Write>(&self, names: &[String], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::from("from")];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (i, name) in names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend((0..self.dim()).map(|j| format!("{}", self.get(i, j))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
