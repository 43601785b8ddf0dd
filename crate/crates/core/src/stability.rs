//! Interleaving distance between hierarchical covers and the loss-transfer
//! bound between ε-isometric spaces.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::algorithms::{self, ClusteringStage, LossStage, PipelineSpec};
use crate::covers::{refines, HierarchicalCover, MembershipMatrix};
use crate::functors::Disconnection;
use crate::loss;
use crate::metric::{isometry_epsilon, PseudometricSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `H1(δ)` fails to refine `H2(δ + ε)`.
    FirstToSecond,
    /// `H2(δ)` fails to refine `H1(δ + ε)`.
    SecondToFirst,
}

/// Where refinement first fails for a rejected candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub epsilon: f64,
    pub direction: Direction,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavingReport {
    /// Least interleaving candidate; `+∞` when none works.
    pub epsilon: f64,
    pub candidates: Vec<f64>,
    /// One witness per rejected candidate, in candidate order.
    pub witnesses: Vec<Witness>,
}

/// First scale `s_t` of `a` at which `a(s_t)` fails to refine `b(s_t + ε)`.
/// `b`'s step at `s_t + ε` is the last `u_r` with `u_r − s_t ≤ ε`, the same
/// difference the candidates are built from.
fn shifted_refinement_failure(a: &HierarchicalCover, b: &HierarchicalCover, eps: f64) -> Result<Option<f64>> {
    let bs = b.scales();
    for (t, &s) in a.scales().iter().enumerate() {
        let r = bs.partition_point(|&u| u - s <= eps) - 1;
        if !refines(&a.covers()[t], &b.covers()[r])? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Interleaving distance in scale coordinates with identity point maps:
/// the least `ε ∈ {0} ∪ {|δ_s − δ_t|}` with `H1(δ) ⊑ H2(δ + ε)` and
/// `H2(δ) ⊑ H1(δ + ε)` for all `δ`.
pub fn interleaving_distance(h1: &HierarchicalCover, h2: &HierarchicalCover) -> Result<InterleavingReport> {
    if h1.n() != h2.n() {
        return Err(Error::SizeMismatch {
            left: h1.n(),
            right: h2.n(),
        });
    }
    let mut candidates = Vec::with_capacity(h1.scales().len() * h2.scales().len() + 1);
    candidates.push(0.0);
    for &s in h1.scales() {
        for &u in h2.scales() {
            candidates.push((s - u).abs());
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut witnesses = Vec::new();
    for &eps in &candidates {
        if let Some(scale) = shifted_refinement_failure(h1, h2, eps)? {
            witnesses.push(Witness {
                epsilon: eps,
                direction: Direction::FirstToSecond,
                scale,
            });
            continue;
        }
        if let Some(scale) = shifted_refinement_failure(h2, h1, eps)? {
            witnesses.push(Witness {
                epsilon: eps,
                direction: Direction::SecondToFirst,
                scale,
            });
            continue;
        }
        return Ok(InterleavingReport {
            epsilon: eps,
            candidates,
            witnesses,
        });
    }
    Ok(InterleavingReport {
        epsilon: f64::INFINITY,
        candidates,
        witnesses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop8Report {
    /// Isometry defect of the index-aligned spaces.
    pub epsilon: f64,
    /// Interleaving distance of the two hierarchical covers.
    pub interleaving: f64,
    pub pass: bool,
}

/// Compares the interleaving distance of a clustering stage's covers of
/// `X` and `Y` with their isometry defect; passes when `ε* ≤ ε + 1e−12`.
pub fn check_prop8(
    stage: &ClusteringStage,
    x: &PseudometricSpace,
    y: &PseudometricSpace,
    policy: Disconnection,
) -> Result<Prop8Report> {
    let epsilon = isometry_epsilon(x, y)?;
    let hx = algorithms::stage_cover(stage, x, policy)?;
    let hy = algorithms::stage_cover(stage, y, policy)?;
    let interleaving = interleaving_distance(&hx, &hy)?.epsilon;
    Ok(Prop8Report {
        epsilon,
        interleaving,
        pass: interleaving <= epsilon + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    /// Evaluation radius for the suprema.
    pub radius: f64,
    pub k_c: f64,
    pub k_e: f64,
    /// `l_{M(X)}(A_X)`.
    pub loss_x: f64,
    /// `l_{M(X)}(A_Y)`.
    pub lhs: f64,
    pub rhs: f64,
    pub constant_e: bool,
    pub pass: bool,
}

/// Relative slack allowed on the right-hand side.
pub const PROP9_SLACK: f64 = 1e-9;

/// Optimizes `X` and `Y` under an MDS-family pipeline and checks
/// `l_{M(X)}(A_Y) ≤ l_{M(X)}(A_X) + K_c n² (1 − e^{−ε})` (plus
/// `K_e n² (e^ε − 1)` when `e` varies with `x`).
///
/// `K_c`, `K_e` are twice the largest `|c|`, `|e|` of either space's MDS loss
/// family over all strengths and `x ∈ [0, R]`; by default `R` is 1.1 times
/// the largest row-pair distance of either embedding.
pub fn check_prop9(
    spec: &PipelineSpec,
    x: &PseudometricSpace,
    y: &PseudometricSpace,
    radius: Option<f64>,
) -> Result<StabilityReport> {
    if spec.loss != LossStage::Mds {
        return Err(Error::InvalidParameter(
            "the loss-transfer check needs an MDS-family pipeline".into(),
        ));
    }
    let epsilon = isometry_epsilon(x, y)?;
    let (px, _) = algorithms::build_problem(spec, x)?;
    let (py, _) = algorithms::build_problem(spec, y)?;
    let ax = crate::optimize::minimize(&px, &spec.optimizer)?;
    let ay = crate::optimize::minimize(&py, &spec.optimizer)?;
    let r = match radius {
        Some(r) => r,
        None => 1.1 * ax.embedding.max_pair_distance().max(ay.embedding.max_pair_distance()),
    };
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("evaluation radius {r} must be positive")));
    }
    let mut k_c: f64 = 0.0;
    let mut k_e: f64 = 0.0;
    let mut constant_e = true;
    for p in [&px, &py] {
        let t = p.targets().expect("MDS problems carry targets");
        let w = MembershipMatrix::new(t.map(|v| libm::exp(-v)))?;
        let fam = loss::mds_fuzzy_family(&w, None)?;
        k_c = k_c.max(2.0 * fam.sup_abs_c(r));
        k_e = k_e.max(2.0 * fam.sup_abs_e(r));
        constant_e &= fam.e_constant_in_x();
    }
    let n = x.n() as f64;
    let lhs = px.loss(&ay.embedding)?;
    let mut rhs = ax.loss + k_c * n * n * (-libm::expm1(-epsilon));
    if !constant_e {
        rhs += k_e * n * n * libm::expm1(epsilon);
    }
    Ok(StabilityReport {
        epsilon,
        radius: r,
        k_c,
        k_e,
        loss_x: ax.loss,
        lhs,
        rhs,
        constant_e,
        pass: lhs <= rhs + PROP9_SLACK * rhs.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functors::{maximal_linkage, single_linkage};

    fn two(d: f64) -> PseudometricSpace {
        PseudometricSpace::from_rows(&[vec![0.0, d], vec![d, 0.0]], true).unwrap()
    }

    #[test]
    fn identical_covers() {
        let h = single_linkage(&two(1.0));
        assert_eq!(interleaving_distance(&h, &h).unwrap().epsilon, 0.0);
    }

    #[test]
    fn two_point_single_linkage() {
        let r = interleaving_distance(&single_linkage(&two(1.0)), &single_linkage(&two(2.0))).unwrap();
        assert_eq!(r.epsilon, 1.0);
        assert_eq!(r.witnesses[0].epsilon, 0.0);
        assert_eq!(r.witnesses[0].direction, Direction::FirstToSecond);
        assert_eq!(r.witnesses[0].scale, 1.0);
    }

    #[test]
    fn shifted_cover() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![3.0], vec![3.5]]).unwrap();
        for h in [single_linkage(&x), maximal_linkage(&x)] {
            for eps in [0.1, 0.25, 0.5] {
                // exact up to the rounding of the shifted scales
                let got = interleaving_distance(&h, &h.shifted(eps)).unwrap().epsilon;
                assert!((got - eps).abs() < 1e-15, "{got} vs {eps}");
            }
        }
    }

    #[test]
    fn prop8_uniform_shift() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let y = x.shifted(0.5).unwrap();
        let r = check_prop8(&ClusteringStage::SingleLinkage, &x, &y, Disconnection::default()).unwrap();
        assert_eq!(r.epsilon, 0.5);
        assert_eq!(r.interleaving, 0.5);
        assert!(r.pass);
    }

    #[test]
    fn prop9_identity() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let spec = PipelineSpec::new(ClusteringStage::MaximalLinkage, LossStage::Mds, 2);
        let r = check_prop9(&spec, &x, &x, None).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert!(r.pass);
        assert_eq!(r.lhs, r.loss_x);
        assert!(r.constant_e);
        let fce = PipelineSpec::new(ClusteringStage::Fuzzy, LossStage::Fce, 2);
        assert!(check_prop9(&fce, &x, &x, None).is_err());
    }
}
