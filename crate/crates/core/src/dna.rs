//! The DNA mutation-list benchmark.
//!
//! `N` random originals over `{A, C, G, T}` are each mutated `M − 1` times,
//! giving `N` lists of `M` sequences. All `N·M` sequences are embedded from
//! their Hamming distances, and a list counts as correct when the nearest
//! original to its last sequence is its own original.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{self, ClusteringStage, LossStage, PipelineSpec};
use crate::loss;
use crate::metric::PseudometricSpace;
use crate::optimize::{self, ClassicalMds, Embedding, ExitReason};
use crate::{Error, Result};

pub const ALPHABET: [u8; 4] = *b"ACGT";

/// Default substitutions per mutation step, as a fraction of the length.
pub const DEFAULT_SUBSTITUTION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAlgorithm {
    pub name: String,
    /// Pipeline template; its `m` is replaced by each benchmark dimension.
    pub spec: PipelineSpec,
}

impl BenchAlgorithm {
    pub fn metric_mds() -> Self {
        BenchAlgorithm {
            name: "mmds".into(),
            spec: PipelineSpec::new(ClusteringStage::MaximalLinkage, LossStage::Mds, 2),
        }
    }

    pub fn single_linkage_scaling() -> Self {
        BenchAlgorithm {
            name: "sls".into(),
            spec: PipelineSpec::new(ClusteringStage::SingleLinkage, LossStage::Mds, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Number of original sequences `N`.
    pub lists: usize,
    /// Sequences per list `M`, the original included.
    pub steps: usize,
    /// Sequence length `L`.
    pub length: usize,
    /// Substitutions per step; `⌈fraction · L⌉` when absent.
    pub substitutions_per_step: Option<usize>,
    pub dims: Vec<usize>,
    pub algorithms: Vec<BenchAlgorithm>,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            lists: 100,
            steps: 10,
            length: 1000,
            substitutions_per_step: None,
            dims: vec![2, 5],
            algorithms: vec![BenchAlgorithm::metric_mds(), BenchAlgorithm::single_linkage_scaling()],
            seed: 7,
            repetitions: 10,
        }
    }
}

impl BenchConfig {
    pub fn substitutions(&self) -> usize {
        self.substitutions_per_step
            .unwrap_or_else(|| libm::ceil(DEFAULT_SUBSTITUTION_FRACTION * self.length as f64) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lists == 0 || self.steps == 0 || self.length == 0 {
            return Err(Error::InvalidParameter("N, M and L must be positive".into()));
        }
        let s = self.substitutions();
        if s == 0 || s > self.length {
            return Err(Error::InvalidParameter(format!(
                "{s} substitutions per step with length {}",
                self.length
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("at least one repetition".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidParameter("embedding dimensions must be positive".into()));
        }
        for a in &self.algorithms {
            a.spec.validate()?;
        }
        Ok(())
    }

    /// Generator for repetition `rep`: ChaCha8 seeded from `seed`, on its
    /// own stream.
    pub fn rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }
}

/// `N` lists of `M` sequences, stored list-major: sequence `t` of list `i`
/// is at index `i·M + t`; `t = 0` is the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub lists: usize,
    pub steps: usize,
    pub sequences: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn original(&self, list: usize) -> usize {
        list * self.steps
    }

    pub fn last(&self, list: usize) -> usize {
        list * self.steps + self.steps - 1
    }

    pub fn hamming_space(&self) -> Result<PseudometricSpace> {
        PseudometricSpace::from_sequences_hamming(&self.sequences)
    }
}

/// Draws originals uniformly; each step substitutes distinct uniformly
/// chosen positions with a uniformly chosen different base.
pub fn generate<R: Rng>(cfg: &BenchConfig, rng: &mut R) -> Result<Dataset> {
    cfg.validate()?;
    let (l, s) = (cfg.length, cfg.substitutions());
    let mut sequences = Vec::with_capacity(cfg.lists * cfg.steps);
    for _ in 0..cfg.lists {
        let mut seq: Vec<u8> = (0..l).map(|_| ALPHABET[rng.gen_range(0..4)]).collect();
        sequences.push(seq.clone());
        for _ in 1..cfg.steps {
            for pos in index::sample(rng, l, s).into_iter() {
                let cur = ALPHABET.iter().position(|&b| b == seq[pos]).unwrap();
                seq[pos] = ALPHABET[(cur + rng.gen_range(1..4)) % 4];
            }
            sequences.push(seq.clone());
        }
    }
    Ok(Dataset {
        lists: cfg.lists,
        steps: cfg.steps,
        sequences,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub correct: usize,
    /// Lists whose nearest original was not unique.
    pub ties: usize,
}

/// Fraction of lists whose last sequence has its own original as unique
/// Euclidean-nearest original; a tie counts as a miss.
pub fn accuracy(a: &Embedding, data: &Dataset) -> Result<Accuracy> {
    if a.n() != data.sequences.len() {
        return Err(Error::SizeMismatch {
            left: a.n(),
            right: data.sequences.len(),
        });
    }
    let mut correct = 0;
    let mut ties = 0;
    for i in 0..data.lists {
        let last = a.row(data.last(i));
        let mut best = f64::INFINITY;
        let mut winners = 0;
        let mut winner = 0;
        for j in 0..data.lists {
            let o = a.row(data.original(j));
            let d: f64 = last.iter().zip(o).map(|(x, y)| (x - y) * (x - y)).sum();
            if d < best {
                best = d;
                winners = 1;
                winner = j;
            } else if d == best {
                winners += 1;
            }
        }
        if winners > 1 {
            ties += 1;
        } else if winner == i {
            correct += 1;
        }
    }
    Ok(Accuracy {
        accuracy: correct as f64 / data.lists as f64,
        correct,
        ties,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    pub m: usize,
    pub accuracy: Accuracy,
    pub final_loss: f64,
    pub iterations: usize,
    pub exit: ExitReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub runs: Vec<RunResult>,
}

/// One repetition: generate, embed with every algorithm and dimension,
/// score. MDS-family algorithms share one eigendecomposition across
/// dimensions.
pub fn run_repetition(cfg: &BenchConfig, rep: usize, keep_embeddings: bool) -> Result<RepetitionResult> {
    let attribute = |e: Error| Error::Stage {
        stage: format!("repetition {rep}"),
        source: alloc::boxed::Box::new(e),
    };
    let data = generate(cfg, &mut cfg.rng(rep)).map_err(attribute)?;
    let x = data.hamming_space().map_err(attribute)?;
    let mut runs = Vec::new();
    for alg in &cfg.algorithms {
        let in_alg = |e: Error| {
            attribute(Error::Stage {
                stage: alg.name.clone(),
                source: alloc::boxed::Box::new(e),
            })
        };
        if alg.spec.loss == LossStage::Mds {
            let st = algorithms::stage_targets(&alg.spec.clustering, &x, alg.spec.disconnection).map_err(in_alg)?;
            let mut shared: Option<ClassicalMds> = None;
            for &m in &cfg.dims {
                let problem = loss::mds_stress_problem(&st.targets, m, alg.spec.target_policy).map_err(in_alg)?;
                let init = match &alg.spec.optimizer.init {
                    optimize::InitMode::Classical => {
                        if shared.is_none() {
                            shared = Some(ClassicalMds::new(problem.targets().unwrap()).map_err(in_alg)?);
                        }
                        shared.as_ref().unwrap().embedding(m)
                    }
                    _ => {
                        let mut cfg_m = alg.spec.optimizer.clone();
                        cfg_m.seed = cfg_m.seed.wrapping_add(rep as u64);
                        optimize::initial_embedding(&problem, &cfg_m).map_err(in_alg)?
                    }
                };
                let min = optimize::minimize_from(&problem, init, &alg.spec.optimizer).map_err(in_alg)?;
                runs.push(RunResult {
                    algorithm: alg.name.clone(),
                    m,
                    accuracy: accuracy(&min.embedding, &data)?,
                    final_loss: min.loss,
                    iterations: min.iterations,
                    exit: min.exit,
                    embedding: keep_embeddings.then_some(min.embedding),
                });
            }
        } else {
            for &m in &cfg.dims {
                let mut spec = alg.spec.clone();
                spec.m = m;
                let out = algorithms::run_pipeline(&spec, &x).map_err(in_alg)?;
                runs.push(RunResult {
                    algorithm: alg.name.clone(),
                    m,
                    accuracy: accuracy(&out.embedding, &data)?,
                    final_loss: out.report.final_loss,
                    iterations: out.report.iterations,
                    exit: out.report.exit,
                    embedding: keep_embeddings.then_some(out.embedding),
                });
            }
        }
    }
    Ok(RepetitionResult { repetition: rep, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub lists: usize,
    pub steps: usize,
    pub m: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1`); 0 for a single repetition.
    pub std: f64,
    pub single_repetition: bool,
    pub accuracies: Vec<f64>,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub substitutions_per_step: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    pub fn row(&self, algorithm: &str, m: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.m == m)
    }
}

/// Aggregates repetitions (in repetition order) into one row per algorithm
/// and dimension.
pub fn aggregate(cfg: &BenchConfig, mut reps: Vec<RepetitionResult>) -> BenchResult {
    reps.sort_by_key(|r| r.repetition);
    let mut rows = Vec::new();
    for alg in &cfg.algorithms {
        for &m in &cfg.dims {
            let runs: Vec<&RunResult> = reps
                .iter()
                .flat_map(|r| r.runs.iter())
                .filter(|r| r.algorithm == alg.name && r.m == m)
                .collect();
            let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy.accuracy).collect();
            let k = accuracies.len();
            let mean = if k == 0 { 0.0 } else { accuracies.iter().sum::<f64>() / k as f64 };
            let std = if k < 2 {
                0.0
            } else {
                libm::sqrt(accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (k - 1) as f64)
            };
            rows.push(BenchRow {
                algorithm: alg.name.clone(),
                lists: cfg.lists,
                steps: cfg.steps,
                m,
                mean,
                std,
                single_repetition: k < 2,
                accuracies,
                ties: runs.iter().map(|r| r.accuracy.ties).sum(),
            });
        }
    }
    BenchResult {
        config: cfg.clone(),
        substitutions_per_step: cfg.substitutions(),
        rows,
    }
}

/// All repetitions, sequentially.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let reps = (0..cfg.repetitions)
        .map(|rep| run_repetition(cfg, rep, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, reps))
}
