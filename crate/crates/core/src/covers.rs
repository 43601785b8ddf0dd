//! Non-nested flag covers, hierarchical (fuzzy) covers indexed by distance
//! scale, and the membership matrices extracted from them.
//!
//! A hierarchical cover is a right-continuous step function from a scale
//! `δ >= 0` to a [`Cover`]; in strength coordinates `a = e^{-δ}` it is a
//! fuzzy cover over `(0, 1]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{is_subset, Graph};
use crate::{Error, Result, SquareMatrix};

/// A non-nested flag cover of `{0, .., n-1}`.
///
/// Blocks are sorted index lists in lexicographic order, so two equal covers
/// are equal as values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CoverRepr")]
pub struct Cover {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct CoverRepr {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<CoverRepr> for Cover {
    type Error = Error;

    fn try_from(r: CoverRepr) -> Result<Self> {
        Cover::new(r.n, r.blocks)
    }
}

impl Cover {
    /// Canonicalizes and validates: every index below `n`, blocks nonempty,
    /// union is everything, no block inside another, and the blocks are the
    /// maximal cliques of their co-occurrence graph.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| b.is_empty()) {
            return Err(Error::InvalidCover(format!("empty block {b:?}")));
        }
        if let Some(&i) = blocks.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::InvalidCover(format!("index {i} out of range for n = {n}")));
        }
        let cover = Cover::canonical(n, blocks);
        cover.validate()?;
        Ok(cover)
    }

    /// Sorts and deduplicates without validating.
    pub(crate) fn canonical(n: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
            b.dedup();
        }
        blocks.sort();
        blocks.dedup();
        Cover { n, blocks }
    }

    /// All singletons.
    pub fn discrete(n: usize) -> Self {
        Cover {
            n,
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn validate(&self) -> Result<()> {
        let mut covered = vec![false; self.n];
        for &i in self.blocks.iter().flatten() {
            covered[i] = true;
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidCover(format!("point {i} is not covered")));
        }
        for (a, s) in self.blocks.iter().enumerate() {
            for (b, t) in self.blocks.iter().enumerate() {
                if a != b && is_subset(s, t) {
                    return Err(Error::InvalidCover(format!("block {s:?} is nested in {t:?}")));
                }
            }
        }
        if !self.is_flag() {
            return Err(Error::InvalidCover(
                "blocks are not the maximal cliques of their co-occurrence graph".into(),
            ));
        }
        Ok(())
    }

    /// Graph joining every pair that shares a block.
    pub fn co_occurrence_graph(&self) -> Graph {
        let mut g = Graph::empty(self.n);
        for b in &self.blocks {
            for (x, &i) in b.iter().enumerate() {
                for &j in &b[x + 1..] {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// Flag condition: the blocks are exactly the maximal cliques of the
    /// co-occurrence graph.
    pub fn is_flag(&self) -> bool {
        self.co_occurrence_graph().maximal_cliques() == self.blocks
    }

    /// Whether `i` and `j` lie in a common block.
    pub fn together(&self, i: usize, j: usize) -> bool {
        self.blocks
            .iter()
            .any(|b| b.binary_search(&i).is_ok() && b.binary_search(&j).is_ok())
    }

    /// Image of the cover under a point map `f`, as a plain list of sorted
    /// blocks (not necessarily a flag cover).
    pub fn image(&self, f: &[usize]) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut img: Vec<usize> = b.iter().map(|&i| f[i]).collect();
                img.sort_unstable();
                img.dedup();
                img
            })
            .collect()
    }
}

/// True iff every block of `fine` is a subset of some block of `coarse`.
pub fn refines(fine: &Cover, coarse: &Cover) -> Result<bool> {
    if fine.n != coarse.n {
        return Err(Error::SizeMismatch {
            left: fine.n,
            right: coarse.n,
        });
    }
    Ok(fine
        .blocks
        .iter()
        .all(|s| coarse.blocks.iter().any(|t| is_subset(s, t))))
}

/// A cover for every scale `δ >= 0`, stored as critical scales
/// `0 = δ_0 < δ_1 < ... < δ_m` and the cover in force on each
/// `[δ_t, δ_{t+1})`; the last interval is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HierarchicalRepr")]
pub struct HierarchicalCover {
    n: usize,
    scales: Vec<f64>,
    covers: Vec<Cover>,
}

#[derive(Deserialize)]
struct HierarchicalRepr {
    n: usize,
    scales: Vec<f64>,
    covers: Vec<Cover>,
}

impl TryFrom<HierarchicalRepr> for HierarchicalCover {
    type Error = Error;

    fn try_from(r: HierarchicalRepr) -> Result<Self> {
        HierarchicalCover::new(r.n, r.scales, r.covers)
    }
}

impl HierarchicalCover {
    pub fn new(n: usize, scales: Vec<f64>, covers: Vec<Cover>) -> Result<Self> {
        let h = HierarchicalCover { n, scales, covers };
        h.validate()?;
        Ok(h)
    }

    /// Builds from `(scale, cover)` steps sorted by scale, dropping steps
    /// whose cover equals the one before. The first scale must be 0.
    pub(crate) fn from_steps(n: usize, steps: impl IntoIterator<Item = (f64, Cover)>) -> Self {
        let mut scales: Vec<f64> = Vec::new();
        let mut covers: Vec<Cover> = Vec::new();
        for (s, c) in steps {
            if covers.last() == Some(&c) {
                continue;
            }
            scales.push(s);
            covers.push(c);
        }
        HierarchicalCover { n, scales, covers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.len() != self.covers.len() {
            return Err(Error::InvalidCover(format!(
                "{} scales for {} covers",
                self.scales.len(),
                self.covers.len()
            )));
        }
        if self.scales[0] != 0.0 {
            return Err(Error::InvalidCover(format!(
                "first scale is {}, expected 0",
                self.scales[0]
            )));
        }
        for w in self.scales.windows(2) {
            if !(w[0] < w[1]) || !w[1].is_finite() {
                return Err(Error::InvalidCover(format!(
                    "scales must be finite and strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for c in &self.covers {
            if c.n != self.n {
                return Err(Error::SizeMismatch {
                    left: c.n,
                    right: self.n,
                });
            }
            c.validate()?;
        }
        for (t, w) in self.covers.windows(2).enumerate() {
            if !refines(&w[0], &w[1])? {
                return Err(Error::InvalidCover(format!(
                    "cover at scale {} does not refine the cover at scale {}",
                    self.scales[t],
                    self.scales[t + 1]
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn covers(&self) -> &[Cover] {
        &self.covers
    }

    /// Index of the step in force at `delta` (scales are closed on the left).
    pub fn step_index(&self, delta: f64) -> usize {
        self.scales.partition_point(|&s| s <= delta).saturating_sub(1)
    }

    /// The cover in force at scale `delta`.
    pub fn cover_at(&self, delta: f64) -> &Cover {
        &self.covers[self.step_index(delta)]
    }

    /// The cover at strength `a ∈ (0, 1]`, i.e. at scale `-ln a`.
    pub fn cover_at_strength(&self, a: f64) -> &Cover {
        self.cover_at(-libm::log(a))
    }

    /// Smallest scale at which each pair shares a block (`+∞` if never);
    /// zero on the diagonal.
    pub fn merge_scales(&self) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::filled(n, f64::INFINITY);
        for i in 0..n {
            out[(i, i)] = 0.0;
        }
        for (t, cover) in self.covers.iter().enumerate() {
            let s = self.scales[t];
            for b in cover.blocks() {
                for (x, &i) in b.iter().enumerate() {
                    for &j in &b[x + 1..] {
                        if out[(i, j)] == f64::INFINITY {
                            out[(i, j)] = s;
                            out[(j, i)] = s;
                        }
                    }
                }
            }
        }
        out
    }

    /// `W[i][j] = sup { a : i, j share a block of H(a) } = e^{-δ*}`.
    pub fn membership_matrix(&self) -> MembershipMatrix {
        MembershipMatrix {
            w: self.merge_scales().map(|s| libm::exp(-s)),
        }
    }

    /// Same hierarchy with every scale moved up by `eps`, keeping the
    /// discrete cover on `[0, eps)` unless the first cover already is.
    pub fn shifted(&self, eps: f64) -> Self {
        let mut steps = Vec::with_capacity(self.scales.len() + 1);
        steps.push((0.0, Cover::discrete(self.n)));
        for (s, c) in self.scales.iter().zip(&self.covers) {
            steps.push((s + eps, c.clone()));
        }
        if eps == 0.0 {
            steps.remove(0);
        }
        HierarchicalCover::from_steps(self.n, steps)
    }
}

/// Symmetric membership strengths in `[0, 1]` with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    w: SquareMatrix,
}

impl MembershipMatrix {
    pub fn new(w: SquareMatrix) -> Result<Self> {
        let n = w.n();
        for i in 0..n {
            if w[(i, i)] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "membership diagonal at {i} is {}, expected 1",
                    w[(i, i)]
                )));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidEntry { i, j, value: v });
                }
                if v != w[(j, i)] {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        dij: v,
                        dji: w[(j, i)],
                    });
                }
            }
        }
        Ok(MembershipMatrix { w })
    }

    pub(crate) fn from_trusted(w: SquareMatrix) -> Self {
        MembershipMatrix { w }
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.w
    }
}

/// `D'[i][j] = -ln W[i][j]`, `+∞` where `W = 0`, zero on the diagonal.
pub fn target_distances(w: &MembershipMatrix) -> SquareMatrix {
    SquareMatrix::from_fn(w.n(), |i, j| {
        let v = w.get(i, j);
        if i == j || v == 1.0 {
            0.0
        } else if v == 0.0 {
            f64::INFINITY
        } else {
            -libm::log(v)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cover(n: usize, blocks: &[&[usize]]) -> Cover {
        Cover::new(n, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    #[test]
    fn refinement_examples() {
        let singletons = cover(2, &[&[0], &[1]]);
        let pair = cover(2, &[&[0, 1]]);
        assert!(refines(&singletons, &pair).unwrap());
        assert!(!refines(&pair, &singletons).unwrap());
        let overlap = cover(3, &[&[0, 1], &[1, 2]]);
        let all = cover(3, &[&[0, 1, 2]]);
        assert!(refines(&overlap, &all).unwrap());
        assert!(refines(&overlap, &cover(2, &[&[0, 1]])).is_err());
    }

    #[test]
    fn invalid_covers_rejected() {
        assert!(Cover::new(3, vec![vec![0, 1]]).is_err());
        assert!(Cover::new(2, vec![vec![0], vec![0, 1]]).is_err());
        assert!(Cover::new(2, vec![vec![0, 2]]).is_err());
        // edges of a triangle are not a flag cover: the triangle is the clique
        assert!(Cover::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).is_err());
    }

    #[test]
    fn canonical_order_makes_equal_values() {
        let a = Cover::new(3, vec![vec![2, 1], vec![0, 1]]).unwrap();
        let b = Cover::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.blocks(), &[vec![0, 1], vec![1, 2]]);
    }

    fn chain_sl() -> HierarchicalCover {
        HierarchicalCover::new(
            3,
            vec![0.0, 1.0, 2.0],
            vec![
                Cover::discrete(3),
                cover(3, &[&[0, 1], &[2]]),
                cover(3, &[&[0, 1, 2]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cover_at_is_right_continuous() {
        let h = chain_sl();
        assert_eq!(h.cover_at(0.5), &Cover::discrete(3));
        assert_eq!(h.cover_at(1.0), &h.covers()[1]);
        assert_eq!(h.cover_at(1.5), &h.covers()[1]);
        assert_eq!(h.cover_at(100.0), &h.covers()[2]);
    }

    #[test]
    fn membership_of_chain() {
        let w = chain_sl().membership_matrix();
        assert_eq!(w.get(0, 2), libm::exp(-2.0));
        assert_eq!(w.get(0, 1), libm::exp(-1.0));
        assert_eq!(w.get(1, 1), 1.0);
    }

    #[test]
    fn never_merged_is_zero() {
        let h = HierarchicalCover::new(2, vec![0.0], vec![Cover::discrete(2)]).unwrap();
        let w = h.membership_matrix();
        assert_eq!(w.get(0, 1), 0.0);
        assert_eq!(target_distances(&w)[(0, 1)], f64::INFINITY);
    }

    #[test]
    fn target_distance_examples() {
        let mut m = SquareMatrix::filled(2, 1.0);
        let w = MembershipMatrix::new(m.clone()).unwrap();
        assert_eq!(target_distances(&w)[(0, 1)], 0.0);
        m[(0, 1)] = libm::exp(-2.0);
        m[(1, 0)] = libm::exp(-2.0);
        let w = MembershipMatrix::new(m).unwrap();
        assert!((target_distances(&w)[(0, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hierarchy_validation() {
        // coarsening violated
        let bad = HierarchicalCover::new(
            2,
            vec![0.0, 1.0],
            vec![Cover::new(2, vec![vec![0, 1]]).unwrap(), Cover::discrete(2)],
        );
        assert!(bad.is_err());
        let bad = HierarchicalCover::new(2, vec![0.5], vec![Cover::discrete(2)]);
        assert!(bad.is_err());
    }
}
