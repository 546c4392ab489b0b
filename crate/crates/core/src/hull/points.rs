use ndarray::Array2;
use rayon::prelude::*;

use super::HullError;
use crate::fingerprint::Fingerprinter;

/// Row count above which single-query scans fan out over the thread pool.
const PARALLEL_ROWS: usize = 1 << 16;
const CHUNK_ROWS: usize = 1 << 14;
/// Matrices at or below this fraction of nonzeros get a compressed row copy.
const SPARSE_DENSITY: f64 = 0.3;

#[derive(Clone, Debug)]
struct SparseRows {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

/// An immutable `n × d` set of points: the vertices whose convex hull is tested.
///
/// One-hot encoded tables are mostly zeros, so a compressed row copy is kept
/// alongside the dense matrix when that makes row scans cheaper.
#[derive(Clone, Debug)]
pub struct PointSet {
    matrix: Array2<f64>,
    sparse: Option<SparseRows>,
    sq_norms: Vec<f64>,
}

#[inline]
pub(crate) fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// (value, row) ordering with ties resolved toward the lower row.
#[inline]
fn lower(a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}

impl PointSet {
    pub fn new(matrix: Array2<f64>) -> Result<Self, HullError> {
        let (n, d) = matrix.dim();
        if n == 0 || d == 0 {
            return Err(HullError::EmptyPointSet);
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(HullError::NonFiniteInput);
        }
        let matrix = if matrix.is_standard_layout() {
            matrix
        } else {
            matrix.as_standard_layout().into_owned()
        };
        let nnz = matrix.iter().filter(|&&x| x != 0.0).count();
        let sparse = ((nnz as f64) <= SPARSE_DENSITY * (n * d) as f64).then(|| {
            let mut indptr = Vec::with_capacity(n + 1);
            let mut indices = Vec::with_capacity(nnz);
            let mut values = Vec::with_capacity(nnz);
            indptr.push(0);
            for row in matrix.rows() {
                for (j, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        indices.push(j as u32);
                        values.push(x);
                    }
                }
                indptr.push(indices.len());
            }
            SparseRows {
                indptr,
                indices,
                values,
            }
        });
        let sq_norms = matrix.rows().into_iter().map(|r| r.dot(&r)).collect();
        Ok(Self {
            matrix,
            sparse,
            sq_norms,
        })
    }

    /// Builds a point set from row vectors of equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, HullError> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(n * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(HullError::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        let matrix = Array2::from_shape_vec((n, d), flat).map_err(|_| HullError::EmptyPointSet)?;
        Self::new(matrix)
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.dense_row(i).to_vec()
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse.is_some()
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Fingerprinter::new("point-set");
        h.u64(self.len() as u64);
        h.u64(self.dim() as u64);
        for &x in self.matrix.iter() {
            h.f64(x);
        }
        h.finish()
    }

    #[inline]
    fn dense_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.matrix.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    /// `⟨a_i, v⟩`.
    #[inline]
    pub fn dot(&self, i: usize, v: &[f64]) -> f64 {
        match &self.sparse {
            Some(s) => {
                let (lo, hi) = (s.indptr[i], s.indptr[i + 1]);
                s.indices[lo..hi]
                    .iter()
                    .zip(&s.values[lo..hi])
                    .map(|(&j, &x)| x * v[j as usize])
                    .sum()
            }
            None => dense_dot(self.dense_row(i), v),
        }
    }

    /// `Σ_j |a_ij · v_j|`, the magnitude that bounds rounding in [`Self::dot`].
    #[inline]
    fn abs_dot(&self, i: usize, v: &[f64]) -> f64 {
        match &self.sparse {
            Some(s) => {
                let (lo, hi) = (s.indptr[i], s.indptr[i + 1]);
                s.indices[lo..hi]
                    .iter()
                    .zip(&s.values[lo..hi])
                    .map(|(&j, &x)| (x * v[j as usize]).abs())
                    .sum()
            }
            None => self
                .dense_row(i)
                .iter()
                .zip(v)
                .map(|(x, y)| (x * y).abs())
                .sum(),
        }
    }

    /// `out += alpha · a_i`.
    #[inline]
    pub fn add_scaled_row(&self, i: usize, alpha: f64, out: &mut [f64]) {
        match &self.sparse {
            Some(s) => {
                let (lo, hi) = (s.indptr[i], s.indptr[i + 1]);
                for (&j, &x) in s.indices[lo..hi].iter().zip(&s.values[lo..hi]) {
                    out[j as usize] += alpha * x;
                }
            }
            None => {
                for (o, x) in out.iter_mut().zip(self.dense_row(i)) {
                    *o += alpha * x;
                }
            }
        }
    }

    fn scan_min<F>(&self, key: F) -> (usize, f64)
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let n = self.len();
        let seq = |range: std::ops::Range<usize>| {
            range.fold((usize::MAX, f64::INFINITY), |best, i| lower(best, (i, key(i))))
        };
        if n < PARALLEL_ROWS {
            return seq(0..n);
        }
        (0..n.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|c| seq(c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(n)))
            .reduce(|| (usize::MAX, f64::INFINITY), lower)
    }

    /// Row minimizing `⟨a_i, v⟩`; ties go to the lowest index.
    pub fn argmin_dot(&self, v: &[f64]) -> (usize, f64) {
        self.scan_min(|i| self.dot(i, v))
    }

    /// Row maximizing `⟨a_i, v⟩` with ties to the lowest index, plus the
    /// largest `Σ_j |a_ij v_j|` over all rows.
    pub fn argmax_dot_with_magnitude(&self, v: &[f64]) -> (usize, f64, f64) {
        let (i, neg) = self.argmin_dot(&v.iter().map(|x| -x).collect::<Vec<_>>());
        let (_, neg_mag) = self.scan_min(|i| -self.abs_dot(i, v));
        (i, -neg, -neg_mag)
    }

    /// Row nearest to `q` in Euclidean distance; ties go to the lowest index.
    pub fn nearest(&self, q: &[f64]) -> usize {
        self.scan_min(|i| self.sq_norms[i] - 2.0 * self.dot(i, q)).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_dot_handles_tails() {
        for len in 0..11 {
            let a: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let b: Vec<f64> = (0..len).map(|i| 1.0 + i as f64).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert_eq!(dense_dot(&a, &b), naive);
        }
    }

    #[test]
    fn sparse_and_dense_agree() {
        let m = array![[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0], [0.0, 3.0, 0.0, 0.0]];
        let p = PointSet::new(m.clone()).unwrap();
        assert!(p.is_sparse());
        let v = [1.0, -1.0, 0.5, 2.0];
        for i in 0..3 {
            assert_eq!(p.dot(i, &v), dense_dot(m.row(i).as_slice().unwrap(), &v));
        }
        assert_eq!(p.argmin_dot(&v), (2, -3.0));
        let (i, max, mag) = p.argmax_dot_with_magnitude(&v);
        assert_eq!((i, max, mag), (0, 1.0, 3.0));
        let mut out = vec![0.0; 4];
        p.add_scaled_row(1, 2.0, &mut out);
        assert_eq!(out, vec![0.0, 0.0, 4.0, 0.0]);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let p = PointSet::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(p.argmin_dot(&[1.0, 1.0]).0, 1);
        assert_eq!(p.nearest(&[0.1, 0.0]), 1);
    }

    #[test]
    fn parallel_scan_matches_sequential_ties() {
        let n = PARALLEL_ROWS + 100;
        let mut m = Array2::zeros((n, 2));
        m[[n - 1, 0]] = -1.0;
        m[[60_000, 0]] = -1.0;
        let p = PointSet::new(m).unwrap();
        assert_eq!(p.argmin_dot(&[1.0, 0.0]), (60_000, -1.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            PointSet::new(Array2::zeros((0, 3))),
            Err(HullError::EmptyPointSet)
        ));
        assert!(matches!(
            PointSet::new(array![[f64::NAN]]),
            Err(HullError::NonFiniteInput)
        ));
        assert!(matches!(
            PointSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]),
            Err(HullError::DimensionMismatch { .. })
        ));
    }
}
