//! Named manifold learning pipelines.
//!
//! Every pipeline is a clustering stage followed by a loss stage. MDS-family
//! stages are realized through explicit target matrices: the merge scale of
//! each pair in the stage's hierarchical cover.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::covers::{HierarchicalCover, MembershipMatrix};
use crate::functors::{self, Disconnection};
use crate::graph;
use crate::loss::{self, EmbeddingProblem, TargetPolicy, DEFAULT_FCE_CLAMP};
use crate::metric::PseudometricSpace;
use crate::optimize::{self, Embedding, ExitReason, OptimizerConfig};
use crate::{Error, Result, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum ClusteringStage {
    SingleLinkage,
    MaximalLinkage,
    /// The `L_k` functor.
    LK { k: usize },
    /// Minimax paths of at most `k` edges.
    KPath { k: usize },
    /// The `VL_k` functor.
    VlK { k: usize },
    /// IsoCluster at geodesic cap `delta`; the connectivity scale when absent.
    Iso { delta: Option<f64> },
    Fuzzy,
}

impl ClusteringStage {
    pub fn name(&self) -> String {
        match self {
            ClusteringStage::SingleLinkage => "sl".into(),
            ClusteringStage::MaximalLinkage => "ml".into(),
            ClusteringStage::LK { k } => format!("l_k({k})"),
            ClusteringStage::KPath { k } => format!("kpath({k})"),
            ClusteringStage::VlK { k } => format!("vl_k({k})"),
            ClusteringStage::Iso { delta: Some(d) } => format!("iso({d})"),
            ClusteringStage::Iso { delta: None } => "iso".into(),
            ClusteringStage::Fuzzy => "fuzzy".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ClusteringStage::LK { k } | ClusteringStage::KPath { k } | ClusteringStage::VlK { k } if k == 0 => {
                Err(Error::InvalidParameter("k must be at least 1".into()))
            }
            ClusteringStage::Iso { delta: Some(d) } if !(d >= 0.0) => {
                Err(Error::InvalidParameter(format!("geodesic cap {d} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossStage {
    Mds,
    Fce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub clustering: ClusteringStage,
    pub loss: LossStage,
    pub m: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub disconnection: Disconnection,
    #[serde(default)]
    pub target_policy: TargetPolicy,
    #[serde(default = "default_clamp")]
    pub fce_clamp: f64,
}

fn default_clamp() -> f64 {
    DEFAULT_FCE_CLAMP
}

impl PipelineSpec {
    pub fn new(clustering: ClusteringStage, loss: LossStage, m: usize) -> Self {
        PipelineSpec {
            clustering,
            loss,
            m,
            optimizer: OptimizerConfig::default(),
            disconnection: Disconnection::default(),
            target_policy: TargetPolicy::default(),
            fce_clamp: DEFAULT_FCE_CLAMP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
        }
        self.clustering.validate()?;
        self.optimizer.validate()
    }
}

/// Output of the clustering stage in target form.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTargets {
    /// Merge scale of each pair (may be `+∞` for fuzzy stages).
    pub targets: SquareMatrix,
    /// Membership strengths when the stage defines them directly.
    pub membership: Option<MembershipMatrix>,
    /// Pairs whose geodesic distance was capped.
    pub capped_pairs: usize,
}

/// Target matrix of a clustering stage.
pub fn stage_targets(stage: &ClusteringStage, x: &PseudometricSpace, policy: Disconnection) -> Result<StageTargets> {
    stage.validate()?;
    let d = x.matrix();
    let plain = |targets| StageTargets {
        targets,
        membership: None,
        capped_pairs: 0,
    };
    Ok(match *stage {
        ClusteringStage::MaximalLinkage => plain(d.clone()),
        ClusteringStage::SingleLinkage => plain(graph::bottleneck_distances(d)),
        ClusteringStage::LK { k } => plain(graph::hop_bounded_minimax(d, functors::l_k_hops(k))),
        ClusteringStage::KPath { k } => plain(graph::hop_bounded_minimax(d, k)),
        ClusteringStage::VlK { k } => plain(functors::vl_k_linkage(x, k)?.merge_scales()),
        ClusteringStage::Iso { delta } => {
            let cap = delta.unwrap_or_else(|| functors::connectivity_scale(x));
            let (g, capped) = functors::geodesic_metric_counted(x, cap, policy)?;
            StageTargets {
                targets: g.matrix().clone(),
                membership: None,
                capped_pairs: capped,
            }
        }
        ClusteringStage::Fuzzy => {
            let fs = functors::fuzzy_simplex(x)?;
            StageTargets {
                targets: fs.membership.matrix().map(functors::strength_to_scale),
                membership: Some(fs.membership),
                capped_pairs: 0,
            }
        }
    })
}

/// The hierarchical cover produced by a clustering stage.
pub fn stage_cover(stage: &ClusteringStage, x: &PseudometricSpace, policy: Disconnection) -> Result<HierarchicalCover> {
    stage.validate()?;
    match *stage {
        ClusteringStage::SingleLinkage => Ok(functors::single_linkage(x)),
        ClusteringStage::MaximalLinkage => Ok(functors::maximal_linkage(x)),
        ClusteringStage::LK { k } => functors::l_k_linkage(x, k),
        ClusteringStage::KPath { k } => functors::hop_linkage(x, k),
        ClusteringStage::VlK { k } => functors::vl_k_linkage(x, k),
        ClusteringStage::Iso { delta } => {
            let cap = delta.unwrap_or_else(|| functors::connectivity_scale(x));
            functors::iso_cluster(x, cap, policy)
        }
        ClusteringStage::Fuzzy => Ok(functors::fuzzy_simplex(x)?.cover),
    }
}

/// The embedding problem a pipeline minimizes.
pub fn build_problem(spec: &PipelineSpec, x: &PseudometricSpace) -> Result<(EmbeddingProblem, StageTargets)> {
    spec.validate()?;
    let st = stage_targets(&spec.clustering, x, spec.disconnection).map_err(Error::in_stage("clustering"))?;
    let problem = match spec.loss {
        LossStage::Mds => loss::mds_stress_problem(&st.targets, spec.m, spec.target_policy),
        LossStage::Fce => {
            let w = match &st.membership {
                Some(w) => w.clone(),
                None => MembershipMatrix::new(st.targets.map(|t| libm::exp(-t)))?,
            };
            loss::fce_problem(&w, spec.m, spec.fce_clamp)
        }
    }
    .map_err(Error::in_stage("loss"))?;
    Ok((problem, st))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub min_positive: Option<f64>,
    pub max_finite: Option<f64>,
    pub mean_finite: Option<f64>,
    pub infinite_pairs: usize,
}

impl TargetSummary {
    pub fn of(t: &SquareMatrix) -> Self {
        let mut min_positive: Option<f64> = None;
        let mut max_finite: Option<f64> = None;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut infinite_pairs = 0;
        for (_, _, v) in t.upper_pairs() {
            if v.is_infinite() {
                infinite_pairs += 1;
                continue;
            }
            if v > 0.0 {
                min_positive = Some(min_positive.map_or(v, |m| m.min(v)));
            }
            max_finite = Some(max_finite.map_or(v, |m| m.max(v)));
            sum += v;
            count += 1;
        }
        TargetSummary {
            min_positive,
            max_finite,
            mean_finite: (count > 0).then(|| sum / count as f64),
            infinite_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub clustering: String,
    pub loss: LossStage,
    pub m: usize,
    pub targets: TargetSummary,
    pub capped_pairs: usize,
    pub dropped_pairs: usize,
    pub final_loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub exit: ExitReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub embedding: Embedding,
    pub report: PipelineReport,
    pub trace: Vec<optimize::TraceEntry>,
}

pub fn run_pipeline(spec: &PipelineSpec, x: &PseudometricSpace) -> Result<PipelineOutput> {
    let (problem, st) = build_problem(spec, x)?;
    let min = optimize::minimize(&problem, &spec.optimizer).map_err(Error::in_stage("optimize"))?;
    Ok(pipeline_output(spec, &st, &problem, min))
}

/// Packages an optimizer result with its pipeline report.
pub fn pipeline_output(
    spec: &PipelineSpec,
    st: &StageTargets,
    problem: &EmbeddingProblem,
    min: optimize::Minimized,
) -> PipelineOutput {
    PipelineOutput {
        report: PipelineReport {
            clustering: spec.clustering.name(),
            loss: spec.loss,
            m: spec.m,
            targets: TargetSummary::of(&st.targets),
            capped_pairs: st.capped_pairs + problem.capped_pairs(),
            dropped_pairs: problem.dropped_pairs(),
            final_loss: min.loss,
            grad_norm: min.grad_norm,
            iterations: min.iterations,
            exit: min.exit,
        },
        embedding: min.embedding,
        trace: min.trace,
    }
}

fn run(stage: ClusteringStage, loss: LossStage, x: &PseudometricSpace, m: usize) -> Result<PipelineOutput> {
    run_pipeline(&PipelineSpec::new(stage, loss, m), x)
}

/// Stress against `d` itself.
pub fn metric_mds(x: &PseudometricSpace, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::MaximalLinkage, LossStage::Mds, x, m)
}

/// Stress against minimax (bottleneck) path costs.
pub fn single_linkage_scaling(x: &PseudometricSpace, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::SingleLinkage, LossStage::Mds, x, m)
}

/// Stress against geodesic distances at cap `delta` (the connectivity
/// scale when `None`).
pub fn isomap(x: &PseudometricSpace, delta: Option<f64>, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::Iso { delta }, LossStage::Mds, x, m)
}

/// Stress against minimax costs over paths of at most `k` edges.
pub fn k_path_scaling(x: &PseudometricSpace, k: usize, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::KPath { k }, LossStage::Mds, x, m)
}

/// Stress against the scale at which a pair first shares a
/// `min(n, k)`-vertex-connected subgraph.
pub fn k_vertex_scaling(x: &PseudometricSpace, k: usize, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::VlK { k }, LossStage::Mds, x, m)
}

/// Fuzzy cross-entropy against fuzzy simplex memberships.
pub fn umap_simplified(x: &PseudometricSpace, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::Fuzzy, LossStage::Fce, x, m)
}

/// Stress against `−ln W` of the fuzzy simplex memberships.
pub fn mds_fuzzy(x: &PseudometricSpace, m: usize) -> Result<PipelineOutput> {
    run(ClusteringStage::Fuzzy, LossStage::Mds, x, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> PseudometricSpace {
        PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap()
    }

    fn targets(stage: ClusteringStage, x: &PseudometricSpace) -> SquareMatrix {
        stage_targets(&stage, x, Disconnection::default()).unwrap().targets
    }

    #[test]
    fn chain_targets() {
        let x = chain();
        assert_eq!(targets(ClusteringStage::SingleLinkage, &x)[(0, 2)], 1.0);
        assert_eq!(targets(ClusteringStage::KPath { k: 2 }, &x)[(0, 2)], 1.0);
        assert_eq!(targets(ClusteringStage::KPath { k: 1 }, &x)[(0, 2)], 2.0);
        assert_eq!(targets(ClusteringStage::MaximalLinkage, &x), *x.matrix());
        // uneven chain a–b–c with gaps 1 and 2
        let y = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(targets(ClusteringStage::SingleLinkage, &y)[(0, 2)], 2.0);
        assert_eq!(targets(ClusteringStage::KPath { k: 2 }, &y)[(0, 2)], 2.0);
    }

    #[test]
    fn four_cycle_vertex_scaling() {
        let x = PseudometricSpace::from_rows(
            &[
                vec![0.0, 1.0, 1.5, 1.2],
                vec![1.0, 0.0, 1.1, 1.5],
                vec![1.5, 1.1, 0.0, 1.3],
                vec![1.2, 1.5, 1.3, 0.0],
            ],
            true,
        )
        .unwrap();
        let t = targets(ClusteringStage::VlK { k: 2 }, &x);
        // diagonals join when the cycle closes; cycle edges are cliques first
        assert_eq!(t[(0, 2)], 1.3);
        assert_eq!(t[(1, 3)], 1.3);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            assert_eq!(t[(i, j)], x.distance(i, j));
        }
    }

    #[test]
    fn realizable_metric_mds() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0], vec![1.0, 1.0]]).unwrap();
        let out = metric_mds(&x, 2).unwrap();
        assert!(out.report.final_loss < 1e-10, "{}", out.report.final_loss);
    }

    #[test]
    fn collinear_isomap() {
        let x = chain();
        let out = isomap(&x, Some(1.0), 1).unwrap();
        assert!(out.report.final_loss < 1e-10);
        let e = &out.embedding;
        assert!((e.distance(0, 1) - 1.0).abs() < 1e-6 && (e.distance(1, 2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fuzzy_pipelines() {
        let two = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![2.0]]).unwrap();
        let out = mds_fuzzy(&two, 1).unwrap();
        assert!(out.embedding.distance(0, 1) < 1e-6);
        let out = umap_simplified(&two, 1).unwrap();
        assert!(out.embedding.distance(0, 1) < 1e-2);
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let t = targets(ClusteringStage::Fuzzy, &x);
        let expected = -libm::log(1.0 - (1.0 - libm::exp(-2.0)) * (1.0 - libm::exp(-1.0)));
        assert!((t[(0, 2)] - expected).abs() < 1e-12);
    }

    #[test]
    fn pipeline_spec_roundtrip() {
        let spec = PipelineSpec::new(ClusteringStage::VlK { k: 3 }, LossStage::Mds, 2);
        let json = serde_json::to_string(&spec).unwrap();
        let back: PipelineSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let bad = PipelineSpec::new(ClusteringStage::LK { k: 0 }, LossStage::Mds, 2);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn stage_errors_are_attributed() {
        let x = PseudometricSpace::from_points_euclidean(&[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        let mut spec = PipelineSpec::new(ClusteringStage::Iso { delta: Some(1.0) }, LossStage::Mds, 1);
        spec.disconnection = Disconnection::Error;
        match run_pipeline(&spec, &x).unwrap_err() {
            Error::Stage { stage, source } => {
                assert_eq!(stage, "clustering");
                assert!(matches!(*source, Error::Disconnected { .. }));
            }
            e => panic!("{e}"),
        }
    }
}
