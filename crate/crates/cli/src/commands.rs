//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use manifold_core::algorithms::{self, ClusteringStage, LossStage, PipelineSpec};
use manifold_core::dna::{self, BenchAlgorithm, BenchConfig};
use manifold_core::functors::{self, Disconnection};
use manifold_core::loss::{self, TargetPolicy};
use manifold_core::metric::PseudometricSpace;
use manifold_core::optimize::{self, InitMode, OptimizerConfig};
use manifold_core::quadrature::QuadratureSettings;
use manifold_core::stability;
use manifold_core::{covers::HierarchicalCover, covers::MembershipMatrix, SquareMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::io::{self, fmt_f64};
use crate::manifest::{self, Recorder, RunManifest};
use crate::CliError;

pub fn dispatch(cli: &Cli, resolved: &[String]) -> Result<(), CliError> {
    let mut rec = Recorder::default();
    let (name, config, manifest_path) = match &cli.command {
        Command::Embed(a) => {
            embed(a, &mut rec)?;
            ("embed", to_value(a), Some(a.manifest.clone().unwrap_or_else(|| manifest::default_path(&a.out))))
        }
        Command::Cluster(a) => {
            cluster(a, &mut rec)?;
            ("cluster", to_value(a), Some(a.manifest.clone().unwrap_or_else(|| manifest::default_path(&a.out))))
        }
        Command::Interleave(a) => {
            interleave(a, &mut rec)?;
            let path = a.manifest.clone().or_else(|| a.out.as_deref().map(manifest::default_path));
            ("interleave", to_value(a), path)
        }
        Command::Stability(a) => {
            stability_cmd(a, &mut rec)?;
            ("stability", to_value(a), Some(a.manifest.clone().unwrap_or_else(|| manifest::default_path(&a.out))))
        }
        Command::BenchDna(a) => {
            bench(a, &mut rec)?;
            ("bench-dna", to_value(a), Some(a.manifest.clone().unwrap_or_else(|| manifest::default_path(&a.out))))
        }
        Command::FlattenCheck(a) => {
            flatten_check(a, &mut rec)?;
            let path = a.manifest.clone().or_else(|| a.out.as_deref().map(manifest::default_path));
            ("flatten-check", to_value(a), path)
        }
        Command::Rerun(a) => return rerun(a),
    };
    if let Some(path) = manifest_path {
        let m = rec.finish(name, resolved, config)?;
        io::write_json(&path, &m)?;
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn load_space(path: &Path, format: InputFormat, strict: bool, rec: &mut Recorder) -> Result<PseudometricSpace, CliError> {
    rec.input(path);
    match format {
        InputFormat::Distances => io::read_distances(path, strict),
        InputFormat::Points => io::read_points(path),
        InputFormat::Sequences => {
            let seqs = io::read_sequences(path)?;
            Ok(PseudometricSpace::from_sequences_hamming(&seqs)?)
        }
    }
}

fn disconnection(arg: DisconnectionArg, factor: f64) -> Disconnection {
    match arg {
        DisconnectionArg::Error => Disconnection::Error,
        DisconnectionArg::Cap => Disconnection::Cap { factor },
    }
}

fn algo_stage(algo: Algo, k: usize, delta: Option<f64>) -> (ClusteringStage, LossStage) {
    match algo {
        Algo::Mmds => (ClusteringStage::MaximalLinkage, LossStage::Mds),
        Algo::Sls => (ClusteringStage::SingleLinkage, LossStage::Mds),
        Algo::Isomap => (ClusteringStage::Iso { delta }, LossStage::Mds),
        Algo::Kpath => (ClusteringStage::KPath { k }, LossStage::Mds),
        Algo::Kvertex => (ClusteringStage::VlK { k }, LossStage::Mds),
        Algo::Umap => (ClusteringStage::Fuzzy, LossStage::Fce),
        Algo::Mdsfuzzy => (ClusteringStage::Fuzzy, LossStage::Mds),
    }
}

pub fn algo_name(algo: Algo) -> &'static str {
    match algo {
        Algo::Mmds => "mmds",
        Algo::Sls => "sls",
        Algo::Isomap => "isomap",
        Algo::Kpath => "kpath",
        Algo::Kvertex => "kvertex",
        Algo::Umap => "umap",
        Algo::Mdsfuzzy => "mdsfuzzy",
    }
}

fn functor_stage(f: Functor, k: usize, delta: Option<f64>) -> ClusteringStage {
    match f {
        Functor::Sl => ClusteringStage::SingleLinkage,
        Functor::Ml => ClusteringStage::MaximalLinkage,
        Functor::Lk => ClusteringStage::LK { k },
        Functor::Kpath => ClusteringStage::KPath { k },
        Functor::Vlk => ClusteringStage::VlK { k },
        Functor::Iso => ClusteringStage::Iso { delta },
        Functor::Fuzzy => ClusteringStage::Fuzzy,
    }
}

/// Parses `cluster=...,loss=...`.
pub fn parse_pipeline(text: &str) -> Result<(ClusteringStage, LossStage), CliError> {
    let bad = |msg: String| CliError::Usage(format!("--pipeline {text:?}: {msg}"));
    let mut stage = None;
    let mut loss = LossStage::Mds;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value in {part:?}")))?;
        match key.trim() {
            "cluster" => {
                let (name, param) = match value.split_once(':') {
                    Some((n, p)) => (n, Some(p)),
                    None => (value, None),
                };
                let int = |p: Option<&str>| -> Result<usize, CliError> {
                    p.ok_or_else(|| bad(format!("{name} needs :K")))?
                        .parse()
                        .map_err(|_| bad(format!("bad integer in {value:?}")))
                };
                stage = Some(match name {
                    "sl" => ClusteringStage::SingleLinkage,
                    "ml" => ClusteringStage::MaximalLinkage,
                    "lk" => ClusteringStage::LK { k: int(param)? },
                    "kpath" => ClusteringStage::KPath { k: int(param)? },
                    "vlk" => ClusteringStage::VlK { k: int(param)? },
                    "iso" => ClusteringStage::Iso {
                        delta: param
                            .map(|p| p.parse().map_err(|_| bad(format!("bad number in {value:?}"))))
                            .transpose()?,
                    },
                    "fuzzy" => ClusteringStage::Fuzzy,
                    _ => return Err(bad(format!("unknown cluster stage {name:?}"))),
                });
            }
            "loss" => {
                loss = match value.trim() {
                    "mds" => LossStage::Mds,
                    "fce" => LossStage::Fce,
                    v => return Err(bad(format!("unknown loss stage {v:?}"))),
                }
            }
            k => return Err(bad(format!("unknown key {k:?}"))),
        }
    }
    Ok((stage.ok_or_else(|| bad("missing cluster=".into()))?, loss))
}

fn optimizer_config(o: &OptimizerArgs) -> OptimizerConfig {
    OptimizerConfig {
        max_iters: o.max_iters,
        initial_step: o.step,
        tolerance: o.tolerance,
        seed: o.seed,
        init: match o.init {
            InitArg::Classical => InitMode::Classical,
            InitArg::Random => InitMode::Random,
        },
        ..OptimizerConfig::default()
    }
}

pub fn pipeline_spec(p: &PipelineArgs) -> Result<PipelineSpec, CliError> {
    let (clustering, loss) = match (&p.pipeline, p.algo) {
        (Some(text), _) => parse_pipeline(text)?,
        (None, Some(algo)) => algo_stage(algo, p.k, p.delta),
        (None, None) => return Err(CliError::Usage("one of --algo or --pipeline is required".into())),
    };
    let spec = PipelineSpec {
        clustering,
        loss,
        m: p.m,
        optimizer: optimizer_config(&p.optimizer),
        disconnection: disconnection(p.policy.disconnection, p.policy.cap_factor),
        target_policy: match p.policy.target_policy {
            TargetPolicyArg::Strict => TargetPolicy::Strict,
            TargetPolicyArg::Drop => TargetPolicy::DropPair,
            TargetPolicyArg::Cap => TargetPolicy::Cap {
                factor: p.policy.cap_factor,
            },
        },
        fce_clamp: p.policy.fce_clamp,
    };
    spec.validate()?;
    Ok(spec)
}

fn embed(a: &EmbedArgs, rec: &mut Recorder) -> Result<(), CliError> {
    let spec = pipeline_spec(&a.pipeline)?;
    rec.seeds.push(spec.optimizer.seed);
    let x = load_space(&a.input.input, a.input.format, a.input.strict, rec)?;
    let t0 = Instant::now();
    let (problem, st) = algorithms::build_problem(&spec, &x)?;
    let t1 = Instant::now();
    let min = optimize::minimize(&problem, &spec.optimizer)
        .map_err(|e| manifold_core::Error::Stage {
            stage: "optimize".into(),
            source: Box::new(e),
        })?;
    let t2 = Instant::now();
    eprintln!(
        "timing: clustering+loss {:.3}s, optimize {:.3}s",
        (t1 - t0).as_secs_f64(),
        (t2 - t1).as_secs_f64()
    );
    let out = algorithms::pipeline_output(&spec, &st, &problem, min);
    io::write_embedding(&a.out, &out.embedding, x.labels())?;
    rec.output(&a.out);
    if let Some(t) = &a.trace {
        io::write_trace(t, &out.trace)?;
        rec.output(t);
    }
    if let Some(r) = &a.report {
        io::write_json(r, &out.report)?;
        rec.output(r);
    }
    println!(
        "loss {} after {} iterations ({:?})",
        fmt_f64(out.report.final_loss),
        out.report.iterations,
        out.report.exit
    );
    Ok(())
}

fn cluster(a: &ClusterArgs, rec: &mut Recorder) -> Result<(), CliError> {
    let x = load_space(&a.input.input, a.input.format, a.input.strict, rec)?;
    let stage = functor_stage(a.functor, a.k, a.delta);
    let h = algorithms::stage_cover(&stage, &x, disconnection(a.disconnection, a.cap_factor))?;
    io::write_json(&a.out, &h)?;
    rec.output(&a.out);
    println!("{} critical scales", h.scales().len());
    Ok(())
}

fn interleave(a: &InterleaveArgs, rec: &mut Recorder) -> Result<(), CliError> {
    rec.input(&a.a);
    rec.input(&a.b);
    let h1: HierarchicalCover = io::read_json(&a.a)?;
    let h2: HierarchicalCover = io::read_json(&a.b)?;
    let r = stability::interleaving_distance(&h1, &h2)?;
    if let Some(out) = &a.out {
        io::write_json(out, &r)?;
        rec.output(out);
    }
    println!("{}", r.epsilon);
    Ok(())
}

#[derive(Serialize)]
struct StabilityOutput {
    clustering: String,
    prop8: stability::Prop8Report,
    /// Absent for pipelines whose loss is not MDS-family.
    prop9: Option<stability::StabilityReport>,
}

fn stability_cmd(a: &StabilityArgs, rec: &mut Recorder) -> Result<(), CliError> {
    let spec = pipeline_spec(&a.pipeline)?;
    rec.seeds.push(spec.optimizer.seed);
    let x = load_space(&a.x, a.format, a.strict, rec)?;
    let y = load_space(&a.y, a.format, a.strict, rec)?;
    let prop8 = stability::check_prop8(&spec.clustering, &x, &y, spec.disconnection)?;
    let prop9 = if spec.loss == LossStage::Mds {
        Some(stability::check_prop9(&spec, &x, &y, a.radius)?)
    } else {
        None
    };
    println!(
        "epsilon {} interleaving {} prop8 {}{}",
        prop8.epsilon,
        prop8.interleaving,
        if prop8.pass { "pass" } else { "FAIL" },
        prop9
            .as_ref()
            .map(|r| format!(" prop9 {} (lhs {} rhs {})", if r.pass { "pass" } else { "FAIL" }, r.lhs, r.rhs))
            .unwrap_or_default()
    );
    let out = StabilityOutput {
        clustering: spec.clustering.name(),
        prop8,
        prop9,
    };
    io::write_json(&a.out, &out)?;
    rec.output(&a.out);
    Ok(())
}

pub fn bench_config(a: &BenchArgs) -> BenchConfig {
    BenchConfig {
        lists: a.n,
        steps: a.m_steps,
        length: a.len,
        substitutions_per_step: a.subs,
        dims: a.dim.clone(),
        algorithms: a
            .algos
            .iter()
            .map(|&algo| {
                let (clustering, loss) = algo_stage(algo, 2, None);
                let mut spec = PipelineSpec::new(clustering, loss, 2);
                spec.optimizer.max_iters = a.max_iters;
                BenchAlgorithm {
                    name: algo_name(algo).into(),
                    spec,
                }
            })
            .collect(),
        seed: a.seed,
        repetitions: a.reps,
    }
}

fn bench(a: &BenchArgs, rec: &mut Recorder) -> Result<(), CliError> {
    let cfg = bench_config(a);
    cfg.validate()?;
    rec.seeds.push(cfg.seed);
    let keep = a.embeddings.is_some();
    let reps = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| dna::run_repetition(&cfg, r, keep && r == 0))
        .collect::<Result<Vec<_>, _>>()?;
    let first = reps.first().cloned();
    let result = dna::aggregate(&cfg, reps);

    let mut w = io::create(&a.out)?;
    let mut text = String::from("algorithm,lists,steps,m,mean,std,repetitions,ties,accuracies\n");
    for r in &result.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            r.lists,
            r.steps,
            r.m,
            fmt_f64(r.mean),
            fmt_f64(r.std),
            r.accuracies.len(),
            r.ties,
            r.accuracies.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(";")
        ));
    }
    std::io::Write::write_all(&mut w, text.as_bytes()).map_err(|source| CliError::Io {
        path: a.out.display().to_string(),
        source,
    })?;
    drop(w);
    rec.output(&a.out);
    if let Some(j) = &a.json {
        io::write_json(j, &result)?;
        rec.output(j);
    }
    if let (Some(path), Some(first)) = (&a.embeddings, first) {
        write_bench_embeddings(path, &cfg, &first)?;
        rec.output(path);
    }
    for r in &result.rows {
        println!("{:>8} m={} mean {:.4} std {:.4}", r.algorithm, r.m, r.mean, r.std);
    }
    Ok(())
}

fn write_bench_embeddings(path: &Path, cfg: &BenchConfig, rep: &dna::RepetitionResult) -> Result<(), CliError> {
    let mut text = String::from("algorithm,m,list,step,coordinates...\n");
    for run in &rep.runs {
        let Some(e) = &run.embedding else { continue };
        for i in 0..e.n() {
            text.push_str(&format!("{},{},{},{}", run.algorithm, run.m, i / cfg.steps, i % cfg.steps));
            for &v in e.row(i) {
                text.push(',');
                text.push_str(&fmt_f64(v));
            }
            text.push('\n');
        }
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Serialize)]
pub struct Coefficients {
    /// Coefficient of `x²`.
    pub alpha: f64,
    /// Constant term.
    pub beta: f64,
}

#[derive(Debug, Serialize)]
pub struct QuadratureSummary {
    pub alpha: f64,
    pub beta: f64,
    pub converged: bool,
    pub max_relative_error: f64,
    pub evaluations: usize,
    pub horizon: f64,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    /// Flattened loss at `x`.
    pub flattened: f64,
    /// Flattened loss minus its grid minimum.
    pub residual: f64,
    /// `(target − x)²`, when the target is finite.
    pub stress: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub membership: f64,
    /// `−ln W_ij`.
    pub target: f64,
    pub truncated: bool,
    pub closed_form: Coefficients,
    pub quadrature: QuadratureSummary,
    pub grid_argmin: f64,
    pub grid_spacing: f64,
    /// Whether the flattened loss is minimized at the target (within one
    /// grid step).
    pub argmin_matches_target: bool,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Serialize)]
pub struct FlattenReport {
    pub functor: String,
    pub n: usize,
    pub rel_tol: f64,
    pub pairs: Vec<PairCheck>,
}

fn coefficients(f: &loss::PairForms) -> (f64, f64) {
    let (a, b1) = f.c.square_coefficients().unwrap_or((f64::NAN, f64::NAN));
    let (a2, b) = f.e.square_coefficients().unwrap_or((f64::NAN, f64::NAN));
    (a + a2, b + b1)
}

pub fn flatten_pair(
    w: f64,
    i: usize,
    j: usize,
    a: &FlattenArgs,
) -> Result<PairCheck, CliError> {
    let sub = MembershipMatrix::new(SquareMatrix::from_fn(2, |r, c| if r == c { 1.0 } else { w }))?;
    let fam = loss::mds_fuzzy_family(&sub, a.truncation)?;
    let closed = loss::flatten(&fam)?.pair(0, 1);
    let settings = QuadratureSettings {
        rel_tol: a.rel_tol,
        ..QuadratureSettings::default()
    };
    let quad = loss::flatten_quadrature(&fam, &settings)?;
    let (ca, cb) = coefficients(&closed);
    let (qa, qb) = coefficients(&quad.object.pair(0, 1));
    let target = functors::strength_to_scale(w);
    let x_max = a
        .grid_max
        .unwrap_or(if target.is_finite() { (3.0 * target).max(1.0) } else { 1.0 });
    let points = a.grid_points.max(2);
    let spacing = x_max / (points - 1) as f64;
    let value = |x: f64| qa * x * x + qb;
    let mut best = (0.0, f64::INFINITY);
    for s in 0..points {
        let x = spacing * s as f64;
        let v = value(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let curve_n = a.curve_points.max(2);
    let curve = (0..curve_n)
        .map(|s| {
            let x = x_max * s as f64 / (curve_n - 1) as f64;
            CurvePoint {
                x,
                flattened: value(x),
                residual: value(x) - best.1,
                stress: target.is_finite().then(|| (target - x) * (target - x)),
            }
        })
        .collect();
    Ok(PairCheck {
        i,
        j,
        membership: w,
        target,
        truncated: !fam.truncated_pairs().is_empty(),
        closed_form: Coefficients { alpha: ca, beta: cb },
        quadrature: QuadratureSummary {
            alpha: qa,
            beta: qb,
            converged: quad.converged,
            max_relative_error: quad.max_relative_error,
            evaluations: quad.evaluations,
            horizon: quad.horizon,
        },
        grid_argmin: best.0,
        grid_spacing: spacing,
        argmin_matches_target: (best.0 - target).abs() <= spacing,
        curve,
    })
}

fn flatten_check(a: &FlattenArgs, rec: &mut Recorder) -> Result<(), CliError> {
    let x = load_space(&a.input.input, a.input.format, a.input.strict, rec)?;
    let stage = functor_stage(a.functor, a.k, a.delta);
    let n = x.n();
    let w = if n < 2 {
        MembershipMatrix::new(SquareMatrix::filled(n, 1.0))?
    } else {
        algorithms::stage_cover(&stage, &x, Disconnection::default())?.membership_matrix()
    };
    let pairs: Vec<(usize, usize)> = match (a.i, a.j) {
        (Some(i), Some(j)) => {
            if i >= n || j >= n || i == j {
                return Err(CliError::Usage(format!("pair ({i}, {j}) is not a pair of distinct points among {n}")));
            }
            vec![(i.min(j), i.max(j))]
        }
        _ => (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect(),
    };
    let checks = pairs
        .into_iter()
        .map(|(i, j)| flatten_pair(w.get(i, j), i, j, a))
        .collect::<Result<Vec<_>, _>>()?;
    for c in &checks {
        println!(
            "pair ({},{}) target {} argmin {} quadrature alpha {} beta {}{}{}",
            c.i,
            c.j,
            c.target,
            c.grid_argmin,
            c.quadrature.alpha,
            c.quadrature.beta,
            if c.argmin_matches_target { "" } else { " [argmin differs from target]" },
            if c.truncated { " [truncated]" } else { "" }
        );
    }
    let report = FlattenReport {
        functor: stage.name(),
        n,
        rel_tol: a.rel_tol,
        pairs: checks,
    };
    match &a.out {
        Some(out) => {
            io::write_json(out, &report)?;
            rec.output(out);
        }
        None => println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default()),
    }
    Ok(())
}

fn rerun(a: &RerunArgs) -> Result<(), CliError> {
    let m: RunManifest = io::read_json(&a.manifest)?;
    let cwd = PathBuf::from(&m.cwd);
    std::env::set_current_dir(&cwd).map_err(|source| CliError::Io {
        path: m.cwd.clone(),
        source,
    })?;
    manifest::verify("input", &m.inputs)?;
    let mut argv = vec!["manifold".to_string()];
    argv.extend(m.args.iter().cloned());
    let (resolved, cli) = match crate::config::resolve(argv)? {
        Ok(v) => v,
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::Usage("a manifest cannot replay a rerun".into()));
    }
    dispatch(&cli, &resolved)?;
    if !a.no_verify {
        manifest::verify("output", &m.outputs)?;
        println!("reproduced {} outputs bit-for-bit", m.outputs.len());
    }
    Ok(())
}
