//! Finite pseudometric spaces.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SquareMatrix};

/// Entries `d[i][j]` and `d[j][i]` may differ by at most this much before
/// the matrix is rejected as asymmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Absolute slack allowed in the strict triangle-inequality check.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// A finite pseudometric space `(X, d_X)` stored as a dense distance matrix.
///
/// Distances are symmetric, nonnegative and zero on the diagonal. Distinct
/// points may be at distance zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudometricSpace {
    d: SquareMatrix,
    labels: Option<Vec<String>>,
}

impl PseudometricSpace {
    /// Validates `raw` and symmetrizes it as `(d + dᵀ) / 2`.
    ///
    /// With `strict` the triangle inequality is also checked, up to
    /// [`TRIANGLE_SLACK`].
    pub fn from_matrix(raw: &SquareMatrix, strict: bool) -> Result<Self> {
        let n = raw.n();
        for i in 0..n {
            for j in 0..n {
                let v = raw[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidEntry { i, j, value: v });
                }
            }
            if raw[(i, i)] != 0.0 {
                return Err(Error::NonzeroDiagonal { i, value: raw[(i, i)] });
            }
        }
        for (i, j, dij) in raw.upper_pairs() {
            let dji = raw[(j, i)];
            if (dij - dji).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::Asymmetric { i, j, dij, dji });
            }
        }
        let d = SquareMatrix::from_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                0.5 * (raw[(i, j)] + raw[(j, i)])
            }
        });
        let space = PseudometricSpace { d, labels: None };
        if strict {
            space.check_triangle(TRIANGLE_SLACK)?;
        }
        Ok(space)
    }

    /// Convenience wrapper over [`Self::from_matrix`] taking nested rows.
    pub fn from_rows(rows: &[Vec<f64>], strict: bool) -> Result<Self> {
        let raw = SquareMatrix::from_rows(rows).ok_or_else(|| {
            let (row, len) = rows
                .iter()
                .enumerate()
                .find(|(_, r)| r.len() != rows.len())
                .map(|(i, r)| (i, r.len()))
                .unwrap_or((0, 0));
            Error::NotSquare {
                rows: rows.len(),
                row,
                len,
            }
        })?;
        Self::from_matrix(&raw, strict)
    }

    /// Euclidean distances between the rows of `points`.
    pub fn from_points_euclidean(points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Shape("at least one point is required".into()));
        }
        let dim = points[0].len();
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::Shape(format!(
                "point {i} has {} coordinates, expected {dim}",
                p.len()
            )));
        }
        if let Some(v) = points.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point coordinate {v}")));
        }
        let n = points.len();
        let d = SquareMatrix::from_fn(n, |i, j| euclidean(&points[i], &points[j]));
        if let Some((i, j, _)) = d.upper_pairs().find(|(_, _, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("distance between points {i} and {j} overflows")));
        }
        Ok(PseudometricSpace { d, labels: None })
    }

    /// Hamming distances between equal-length sequences.
    pub fn from_sequences_hamming<S: AsRef<[u8]>>(seqs: &[S]) -> Result<Self> {
        if let Some(first) = seqs.first() {
            let len = first.as_ref().len();
            if let Some((i, s)) = seqs
                .iter()
                .enumerate()
                .find(|(_, s)| s.as_ref().len() != len)
            {
                return Err(Error::Shape(format!(
                    "sequence {i} has length {}, expected {len}",
                    s.as_ref().len()
                )));
            }
        }
        let n = seqs.len();
        let mut d = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let h = hamming(seqs[i].as_ref(), seqs[j].as_ref()) as f64;
                d[(i, j)] = h;
                d[(j, i)] = h;
            }
        }
        Ok(PseudometricSpace { d, labels: None })
    }

    /// Wraps a matrix that is already known to be a valid pseudometric.
    pub(crate) fn from_trusted(d: SquareMatrix) -> Self {
        PseudometricSpace { d, labels: None }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::SizeMismatch {
                left: labels.len(),
                right: self.n(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.d.n()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.d
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Largest pairwise distance (0 for spaces with fewer than two points).
    pub fn diameter(&self) -> f64 {
        self.d.max_finite_off_diagonal().unwrap_or(0.0)
    }

    /// Sorted, deduplicated off-diagonal distances.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.d.upper_pairs().map(|(_, _, x)| x).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Same space with `eps` added to every off-diagonal distance.
    pub fn shifted(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("shift {eps} must be finite and >= 0")));
        }
        let n = self.n();
        let d = SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { self.d[(i, j)] + eps });
        Ok(PseudometricSpace {
            d,
            labels: self.labels.clone(),
        })
    }

    /// Reorders points: point `i` of the result is point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        PseudometricSpace {
            d: self.d.permuted(perm),
            labels: self
                .labels
                .as_ref()
                .map(|l| perm.iter().map(|&p| l[p].clone()).collect()),
        }
    }

    /// Checks `d[i][k] <= d[i][j] + d[j][k] + slack` for all triples.
    pub fn check_triangle(&self, slack: f64) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            for k in 0..n {
                let dik = self.d[(i, k)];
                for j in 0..n {
                    let via = self.d[(i, j)] + self.d[(j, k)];
                    if dik > via + slack {
                        return Err(Error::Triangle { i, j, k, dik, via });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Least `ε` such that both identity maps between index-aligned spaces are
/// non-expansive into the other space with `ε` added to its distances, i.e.
/// the largest entrywise distance difference.
pub fn isometry_epsilon(x: &PseudometricSpace, y: &PseudometricSpace) -> Result<f64> {
    if x.n() != y.n() {
        return Err(Error::SizeMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    Ok(x.d
        .upper_pairs()
        .map(|(i, j, v)| (v - y.d[(i, j)]).abs())
        .fold(0.0, f64::max))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_point_matrix() {
        let x = PseudometricSpace::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], true).unwrap();
        assert_eq!(x.n(), 2);
        assert_eq!(x.distance(0, 1), 1.0);
    }

    #[test]
    fn asymmetric_rejected() {
        let err = PseudometricSpace::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]], false).unwrap_err();
        assert!(matches!(err, Error::Asymmetric { i: 0, j: 1, .. }));
    }

    #[test]
    fn tiny_asymmetry_is_absorbed() {
        let x = PseudometricSpace::from_rows(&[vec![0.0, 1.0], vec![1.0 + 5e-13, 0.0]], false).unwrap();
        assert_eq!(x.distance(0, 1), x.distance(1, 0));
    }

    #[test]
    fn negative_and_diagonal_rejected() {
        let err = PseudometricSpace::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]], false).unwrap_err();
        assert!(matches!(err, Error::InvalidEntry { .. }));
        let err = PseudometricSpace::from_rows(&[vec![0.5, 1.0], vec![1.0, 0.0]], false).unwrap_err();
        assert!(matches!(err, Error::NonzeroDiagonal { i: 0, .. }));
        let err = PseudometricSpace::from_rows(&[vec![0.0, 1.0], vec![1.0]], false).unwrap_err();
        assert!(matches!(err, Error::NotSquare { .. }));
    }

    #[test]
    fn strict_triangle_violation_names_indices() {
        let rows = [vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        let err = PseudometricSpace::from_rows(&rows, true).unwrap_err();
        assert_eq!(
            err,
            Error::Triangle { i: 0, j: 1, k: 2, dik: 5.0, via: 2.0 }
        );
        assert!(alloc::string::ToString::to_string(&err).contains("(0,2,1)"));
        // non-strict accepts it
        assert!(PseudometricSpace::from_rows(&rows, false).is_ok());
    }

    #[test]
    fn euclidean_examples() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![3.0]]).unwrap();
        assert_eq!(x.distance(0, 1), 3.0);
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(x.distance(0, 1), 5.0);
        let x = PseudometricSpace::from_points_euclidean(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(x.distance(0, 1), 0.0);
        assert!(PseudometricSpace::from_points_euclidean(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn hamming_examples() {
        let x = PseudometricSpace::from_sequences_hamming(&["AA", "AA"]).unwrap();
        assert_eq!(x.distance(0, 1), 0.0);
        let x = PseudometricSpace::from_sequences_hamming(&["ACGT", "AGGA"]).unwrap();
        assert_eq!(x.distance(0, 1), 2.0);
        let x = PseudometricSpace::from_sequences_hamming(&["A", "C"]).unwrap();
        assert_eq!(x.distance(0, 1), 1.0);
        assert!(PseudometricSpace::from_sequences_hamming(&["A", "CC"]).is_err());
    }

    #[test]
    fn isometry_examples() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(isometry_epsilon(&x, &x).unwrap(), 0.0);
        let y = x.shifted(0.3).unwrap();
        assert!((isometry_epsilon(&x, &y).unwrap() - 0.3).abs() < 1e-15);
        let a = PseudometricSpace::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], true).unwrap();
        let b = PseudometricSpace::from_rows(&[vec![0.0, 2.5], vec![2.5, 0.0]], true).unwrap();
        assert_eq!(isometry_epsilon(&a, &b).unwrap(), 1.5);
        assert!(isometry_epsilon(&a, &x).is_err());
    }
}
