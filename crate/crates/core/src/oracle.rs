//! Exact hull distance for tiny instances by enumerating faces.
//!
//! Every subset of at most `d + 1` points is projected onto its affine hull
//! with a Gram–Schmidt least-squares solve. Subsets whose barycentric
//! coordinates are all nonnegative yield points of the hull; the smallest
//! such distance is the distance to the hull (Carathéodory). Nothing here is
//! shared with the iterative solver in [`crate::hull`].

pub const MAX_POINTS: usize = 12;
pub const MAX_DIM: usize = 4;

const BARYCENTRIC_SLACK: f64 = -1e-12;
const INSIDE_DISTANCE: f64 = 1e-12;
/// Relative norm below which a new direction is treated as dependent.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("instance with {n} points in {d} dimensions exceeds the oracle limit ({MAX_POINTS} points, {MAX_DIM} dimensions)")]
    InstanceTooLarge { n: usize, d: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no points")]
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub inside: bool,
    pub exact_distance: f64,
    /// Row indices of the face attaining the minimum, at most `d + 1` of them.
    pub support: Vec<usize>,
    /// Barycentric coordinates of the nearest point over `support`.
    pub barycentric: Vec<f64>,
}

struct Candidate {
    distance: f64,
    support: Vec<usize>,
    barycentric: Vec<f64>,
}

/// Projects `q` onto the affine hull of `face`. `None` for affinely dependent
/// faces and for projections that fall outside the face.
fn project_affine(points: &[Vec<f64>], face: &[usize], q: &[f64]) -> Option<Candidate> {
    let base = &points[face[0]];
    let d = q.len();
    let k = face.len() - 1;
    // Orthonormal basis of span{a_j − a_0} by modified Gram–Schmidt, with R
    // such that [a_1 − a_0, …] = Q R.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for (j, &idx) in face[1..].iter().enumerate() {
        let mut v: Vec<f64> = (0..d).map(|t| points[idx][t] - base[t]).collect();
        let original: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (i, e) in basis.iter().enumerate() {
            let c: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
            r[i][j] = c;
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if original == 0.0 || norm <= RANK_TOLERANCE * original {
            return None;
        }
        r[j][j] = norm;
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let target: Vec<f64> = (0..d).map(|t| q[t] - base[t]).collect();
    let rhs: Vec<f64> = basis
        .iter()
        .map(|e| e.iter().zip(&target).map(|(a, b)| a * b).sum())
        .collect();
    // Back substitution R μ = Qᵀ (q − a_0).
    let mut mu = vec![0.0; k];
    for i in (0..k).rev() {
        let tail: f64 = (i + 1..k).map(|j| r[i][j] * mu[j]).sum();
        mu[i] = (rhs[i] - tail) / r[i][i];
    }
    let mut barycentric = Vec::with_capacity(k + 1);
    barycentric.push(1.0 - mu.iter().sum::<f64>());
    barycentric.extend_from_slice(&mu);
    if barycentric.iter().any(|&l| l < BARYCENTRIC_SLACK) {
        return None;
    }
    let mut nearest = vec![0.0; d];
    for (&idx, &l) in face.iter().zip(&barycentric) {
        nearest
            .iter_mut()
            .zip(&points[idx])
            .for_each(|(p, a)| *p += l * a);
    }
    let distance = nearest
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Some(Candidate {
        distance,
        support: face.to_vec(),
        barycentric,
    })
}

fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact membership and distance of `q` to the hull of `points`
/// (at most [`MAX_POINTS`] points in at most [`MAX_DIM`] dimensions).
pub fn exact_membership(points: &[Vec<f64>], q: &[f64]) -> Result<OracleResult, OracleError> {
    let n = points.len();
    if n == 0 {
        return Err(OracleError::Empty);
    }
    let d = q.len();
    if n > MAX_POINTS || d > MAX_DIM {
        return Err(OracleError::InstanceTooLarge { n, d });
    }
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(OracleError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let mut best = Candidate {
        distance: f64::INFINITY,
        support: Vec::new(),
        barycentric: Vec::new(),
    };
    for k in 1..=(d + 1).min(n) {
        for_each_subset(n, k, |face| {
            if let Some(c) = project_affine(points, face, q) {
                if c.distance < best.distance {
                    best = c;
                }
            }
        });
    }
    Ok(OracleResult {
        inside: best.distance <= INSIDE_DISTANCE,
        exact_distance: best.distance,
        support: best.support,
        barycentric: best.barycentric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_midpoint() {
        let r = exact_membership(&[vec![0.0], vec![1.0]], &[0.5]).unwrap();
        assert!(r.inside);
        assert_eq!(r.exact_distance, 0.0);
        assert_eq!(r.support, vec![0, 1]);
        assert_eq!(r.barycentric, vec![0.5, 0.5]);
    }

    #[test]
    fn triangle_facet() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = exact_membership(&pts, &[2.0, 2.0]).unwrap();
        assert!(!r.inside);
        assert!((r.exact_distance - 1.5 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.support, vec![1, 2]);
    }

    #[test]
    fn vertex_is_nearest() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = exact_membership(&pts, &[-1.0, -1.0]).unwrap();
        assert_eq!(r.support, vec![0]);
        assert!((r.exact_distance - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inside_reconstructs_query() {
        let pts = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let q = [0.1, 0.2, 0.3];
        let r = exact_membership(&pts, &q).unwrap();
        assert!(r.inside);
        let total: f64 = r.barycentric.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.barycentric.iter().all(|&l| l >= -1e-12));
        for t in 0..3 {
            let x: f64 = r
                .support
                .iter()
                .zip(&r.barycentric)
                .map(|(&i, l)| l * pts[i][t])
                .sum();
            assert!((x - q[t]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_subsets_are_skipped() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 1.0]];
        let r = exact_membership(&pts, &[1.0, 0.0]).unwrap();
        assert!(!r.inside);
        assert!((r.exact_distance - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn size_limits_enforced() {
        let pts = vec![vec![0.0; 2]; 13];
        assert!(matches!(
            exact_membership(&pts, &[0.0, 0.0]),
            Err(OracleError::InstanceTooLarge { .. })
        ));
        let pts = vec![vec![0.0; 5]];
        assert!(matches!(
            exact_membership(&pts, &[0.0; 5]),
            Err(OracleError::InstanceTooLarge { .. })
        ));
        assert!(matches!(
            exact_membership(&[vec![0.0]], &[0.0, 1.0]),
            Err(OracleError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn subset_enumeration_counts() {
        let mut count = 0;
        for_each_subset(12, 5, |_| count += 1);
        assert_eq!(count, 792);
        let mut seen = Vec::new();
        for_each_subset(3, 3, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1, 2]]);
    }
}
