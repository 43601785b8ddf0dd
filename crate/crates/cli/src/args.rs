//! Command-line arguments.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "manifold", version = crate::version(), about = "Manifold learning as clustering followed by a loss")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// key = value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Embed a dataset with a named algorithm or a custom pipeline.
    Embed(EmbedArgs),
    /// Write the hierarchical cover of a clustering functor.
    Cluster(ClusterArgs),
    /// Interleaving distance between two cover files.
    Interleave(InterleaveArgs),
    /// Cover-interleaving and loss-transfer checks for two aligned datasets.
    Stability(StabilityArgs),
    /// The DNA mutation-list benchmark.
    BenchDna(BenchArgs),
    /// Flatten the MDS loss family of pairs by quadrature and compare with
    /// the closed form and the target distance.
    FlattenCheck(FlattenArgs),
    /// Re-execute a run from its manifest and verify output digests.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Algo {
    Mmds,
    Sls,
    Isomap,
    Kpath,
    Kvertex,
    Umap,
    Mdsfuzzy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Functor {
    Sl,
    Ml,
    Lk,
    Kpath,
    Vlk,
    Iso,
    Fuzzy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
pub enum InputFormat {
    #[default]
    Distances,
    Points,
    Sequences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum InitArg {
    Classical,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum TargetPolicyArg {
    Strict,
    Drop,
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DisconnectionArg {
    Error,
    Cap,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Input file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Distances)]
    pub format: InputFormat,
    /// Check the triangle inequality on distance input.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Classical)]
    pub init: InitArg,
    /// Seed for random initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct PolicyArgs {
    /// Handling of infinite stress targets.
    #[arg(long, value_enum, default_value_t = TargetPolicyArg::Cap)]
    pub target_policy: TargetPolicyArg,
    /// Handling of pairs no geodesic path connects.
    #[arg(long, value_enum, default_value_t = DisconnectionArg::Cap)]
    pub disconnection: DisconnectionArg,
    /// Multiple of the largest finite value used by cap policies.
    #[arg(long, default_value_t = 3.0)]
    pub cap_factor: f64,
    /// Clamp for cross-entropy membership estimates.
    #[arg(long, default_value_t = manifold_core::loss::DEFAULT_FCE_CLAMP)]
    pub fce_clamp: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// Named algorithm.
    #[arg(long, value_enum, required_unless_present = "pipeline")]
    pub algo: Option<Algo>,
    /// Custom composition, e.g. `cluster=vlk:3,loss=mds`. Clusters: sl, ml,
    /// lk:K, kpath:K, vlk:K, iso[:DELTA], fuzzy. Losses: mds, fce.
    #[arg(long, conflicts_with = "algo")]
    pub pipeline: Option<String>,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Connectivity or hop parameter for kpath / kvertex.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Geodesic cap for isomap (default: connectivity scale).
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Embedding CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optimizer trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Pipeline report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long, value_enum)]
    pub functor: Functor,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = DisconnectionArg::Cap)]
    pub disconnection: DisconnectionArg,
    #[arg(long, default_value_t = 3.0)]
    pub cap_factor: f64,
    /// Hierarchical cover JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct InterleaveArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Report JSON (candidates and witnesses).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Distances)]
    pub format: InputFormat,
    #[arg(long)]
    pub strict: bool,
    /// Evaluation radius for the loss suprema (default: 1.1 × largest
    /// embedded distance).
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Number of original sequences.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Sequences per mutation list, original included.
    #[arg(long, default_value_t = 10)]
    pub m_steps: usize,
    /// Sequence length.
    #[arg(long, default_value_t = 1000)]
    pub len: usize,
    /// Substitutions per mutation step (default from the core library).
    #[arg(long)]
    pub subs: Option<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "2,5")]
    pub dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "mmds,sls")]
    pub algos: Vec<Algo>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    /// Summary table CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Full result JSON, including per-run accuracies.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Per-sequence embeddings of the first repetition, for scatter plots.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FlattenArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Functor whose memberships define the family.
    #[arg(long, value_enum, default_value_t = Functor::Ml)]
    pub functor: Functor,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Pair to check (all pairs when omitted).
    #[arg(long, requires = "j")]
    pub i: Option<usize>,
    #[arg(long, requires = "i")]
    pub j: Option<usize>,
    /// Strength floor for pairs with zero membership.
    #[arg(long)]
    pub truncation: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    /// Grid points for the argmin search.
    #[arg(long, default_value_t = 3001)]
    pub grid_points: usize,
    /// Grid upper end (default: max(3 × target, 1)).
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Points in the reported residual curve.
    #[arg(long, default_value_t = 31)]
    pub curve_points: usize,
    /// Report JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RerunArgs {
    /// Manifest of the run to repeat.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Re-execute without comparing digests.
    #[arg(long)]
    pub no_verify: bool,
}
