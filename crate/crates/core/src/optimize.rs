//! Embedding optimization: classical MDS initialization and deterministic
//! gradient descent with backtracking.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::EmbeddingProblem;
use crate::{Error, Result, SquareMatrix};

/// An `n × m` coordinate matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    n: usize,
    m: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn zeros(n: usize, m: usize) -> Self {
        Embedding {
            n,
            m,
            coords: vec![0.0; n * m],
        }
    }

    pub fn from_vec(n: usize, m: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * m {
            return Err(Error::Shape(format!("{} coordinates for {n}×{m}", coords.len())));
        }
        if let Some(k) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "coordinate ({}, {}) is {}",
                k / m.max(1),
                k % m.max(1),
                coords[k]
            )));
        }
        Ok(Embedding { n, m, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::NotSquare {
                rows: rows.len(),
                row: r,
                len: rows[r].len(),
            });
        }
        Embedding::from_vec(rows.len(), m, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        crate::metric::euclidean(self.row(i), self.row(j))
    }

    pub fn distance_matrix(&self) -> SquareMatrix {
        SquareMatrix::from_fn(self.n, |i, j| self.distance(i, j))
    }

    /// Largest distance between two rows.
    pub fn max_pair_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    fn step(&self, direction: &[f64], step: f64) -> Embedding {
        Embedding {
            n: self.n,
            m: self.m,
            coords: self
                .coords
                .iter()
                .zip(direction)
                .map(|(x, g)| x - step * g)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// Classical MDS on the problem's targets.
    Classical,
    /// Uniform on `[−0.5, 0.5]` from ChaCha8 seeded with the config seed.
    Random,
    Given { embedding: Embedding },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub initial_step: f64,
    /// Converged when the relative loss decrease over `window` iterations
    /// falls below this.
    pub tolerance: f64,
    pub window: usize,
    pub seed: u64,
    pub init: InitMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 2000,
            initial_step: 0.1,
            tolerance: 1e-9,
            window: 10,
            seed: 0,
            init: InitMode::Classical,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial step {} must be positive",
                self.initial_step
            )));
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues
/// descend; each eigenvector has its largest-magnitude entry positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Off-diagonal Frobenius norm target, relative to the matrix norm.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

pub fn symmetric_eigen(a: &SquareMatrix) -> Result<SymmetricEigen> {
    let n = a.n();
    if let Some(v) = a.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {v}")));
    }
    let mut m: Vec<f64> = a.as_slice().to_vec();
    // rows of `vt` are the eigenvectors
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|v| v * v).sum::<f64>();
    let target = JACOBI_TOLERANCE * JACOBI_TOLERANCE * total;
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        s
    };
    // entries below this cannot keep the off-diagonal norm above target
    let skip = JACOBI_TOLERANCE * libm::sqrt(total) / n.max(1) as f64;
    let mut sweeps = 0;
    while off(&m) > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NonFinite(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < skip {
                    continue;
                }
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                if t == 0.0 {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mp, mq) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mp - s * mq;
                    m[q * n + k] = s * mp + c * mq;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                // rows above p are not read again this sweep; the lower
                // triangle stays current and is copied up after the sweep
                for k in (p + 1)..n {
                    if k != q {
                        m[k * n + p] = m[p * n + k];
                        m[k * n + q] = m[q * n + k];
                    }
                }
                for k in 0..n {
                    let (vp, vq) = (vt[p * n + k], vt[q * n + k]);
                    vt[p * n + k] = c * vp - s * vq;
                    vt[q * n + k] = s * vp + c * vq;
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                m[i * n + j] = m[j * n + i];
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y * n + y].total_cmp(&m[x * n + x]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v = vt[k * n..(k + 1) * n].to_vec();
            let mut lead = 0;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[lead].abs() {
                    lead = i;
                }
            }
            if v.get(lead).is_some_and(|&x| x < 0.0) {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Eigendecomposition of the double-centred Gram matrix of a target
/// matrix, reusable across embedding dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMds {
    eigen: SymmetricEigen,
}

impl ClassicalMds {
    /// `B = −½ J (D∘D) J` with `J = I − 11ᵀ/n`.
    pub fn new(targets: &SquareMatrix) -> Result<Self> {
        let n = targets.n();
        if let Some((i, j, v)) = targets.upper_pairs().find(|(_, _, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("target ({i}, {j}) is {v}")));
        }
        let sq = targets.map(|v| v * v);
        let row_mean: Vec<f64> = sq.rows().map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let grand = row_mean.iter().sum::<f64>() / n.max(1) as f64;
        let b = SquareMatrix::from_fn(n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand));
        Ok(ClassicalMds {
            eigen: symmetric_eigen(&b)?,
        })
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    /// Top-`m` eigenvectors scaled by `√max(λ, 0)`; missing dimensions are
    /// zero.
    pub fn embedding(&self, m: usize) -> Embedding {
        let n = self.eigen.values.len();
        let mut coords = vec![0.0; n * m];
        for k in 0..m.min(n) {
            let scale = libm::sqrt(self.eigen.values[k].max(0.0));
            for i in 0..n {
                coords[i * m + k] = scale * self.eigen.vectors[k][i];
            }
        }
        Embedding { n, m, coords }
    }
}

pub fn classical_mds_init(targets: &SquareMatrix, m: usize) -> Result<Embedding> {
    Ok(ClassicalMds::new(targets)?.embedding(m))
}

pub fn random_init(n: usize, m: usize, seed: u64) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Embedding {
        n,
        m,
        coords: (0..n * m).map(|_| rng.gen_range(-0.5..=0.5)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub loss: f64,
    pub step: f64,
    /// Max-norm of the gradient.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Converged,
    ZeroGradient,
    StepUnderflow,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimized {
    pub embedding: Embedding,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub exit: ExitReason,
    pub trace: Vec<TraceEntry>,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-300;

/// Initial embedding for `p` under `cfg.init`.
pub fn initial_embedding(p: &EmbeddingProblem, cfg: &OptimizerConfig) -> Result<Embedding> {
    match &cfg.init {
        InitMode::Classical => classical_mds_init(&p.init_targets(), p.m()),
        InitMode::Random => Ok(random_init(p.n(), p.m(), cfg.seed)),
        InitMode::Given { embedding } => Ok(embedding.clone()),
    }
}

pub fn minimize(p: &EmbeddingProblem, cfg: &OptimizerConfig) -> Result<Minimized> {
    let init = initial_embedding(p, cfg)?;
    minimize_from(p, init, cfg)
}

/// Full-batch gradient descent from `init`: halve the step until the Armijo
/// condition holds, double it after each accepted step.
pub fn minimize_from(p: &EmbeddingProblem, init: Embedding, cfg: &OptimizerConfig) -> Result<Minimized> {
    cfg.validate()?;
    let mut a = init;
    let (mut loss, mut grad) = p.loss_and_gradient(&a)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged {
            iteration: 0,
            last_loss: loss,
        });
    }
    let max_norm = |g: &[f64]| g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut gnorm = max_norm(&grad);
    let mut step = cfg.initial_step;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        loss,
        step,
        grad_norm: gnorm,
    }];
    let mut exit = ExitReason::MaxIterations;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if gnorm == 0.0 {
            exit = ExitReason::ZeroGradient;
            break;
        }
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        let accepted = loop {
            let trial = a.step(&grad, step);
            let l = p.loss(&trial)?;
            if l.is_finite() && l <= loss - ARMIJO * step * gsq {
                break Some((trial, l));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((next, _)) = accepted else {
            exit = ExitReason::StepUnderflow;
            break;
        };
        iterations += 1;
        let (l, g) = p.loss_and_gradient(&next)?;
        if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: iterations,
                last_loss: loss,
            });
        }
        a = next;
        loss = l;
        grad = g;
        gnorm = max_norm(&grad);
        trace.push(TraceEntry {
            iteration: iterations,
            loss,
            step,
            grad_norm: gnorm,
        });
        step *= 2.0;
        if loss == 0.0 {
            exit = ExitReason::Converged;
            break;
        }
        if iterations >= cfg.window {
            let past = trace[iterations - cfg.window].loss;
            if (past - loss) <= cfg.tolerance * past.abs() {
                exit = ExitReason::Converged;
                break;
            }
        }
    }
    Ok(Minimized {
        embedding: a,
        loss,
        grad_norm: gnorm,
        iterations,
        exit,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    /// `max |analytic − numeric|` over checked coordinates, divided by the
    /// analytic gradient's max-norm (0 when both vanish).
    pub max_relative_error: f64,
    /// Coincident pairs; their points' coordinates are not checked.
    pub skipped_pairs: Vec<(usize, usize)>,
    pub checked_coordinates: usize,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Compares the analytic gradient with five-point central differences. The
/// step for point `i` is `GRAD_CHECK_STEP`, shrunk to 1% of the distance to
/// its nearest other point.
pub fn grad_check(p: &EmbeddingProblem, a: &Embedding) -> Result<GradCheck> {
    let (_, grad) = p.loss_and_gradient(a)?;
    let (n, m) = (a.n(), a.m());
    let mut skipped_pairs = Vec::new();
    let mut skip = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if a.distance(i, j) == 0.0 {
                skipped_pairs.push((i, j));
                skip[i] = true;
                skip[j] = true;
            }
        }
    }
    let scale = grad.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut probe = a.clone();
    for i in 0..n {
        if skip[i] {
            continue;
        }
        let h = (0..n)
            .filter(|&j| j != i)
            .fold(GRAD_CHECK_STEP, |h, j| h.min(0.01 * a.distance(i, j)));
        for k in 0..m {
            let idx = i * m + k;
            let x = a.coords[idx];
            let mut at = |offset: f64| {
                probe.coords[idx] = x + offset * h;
                p.loss(&probe)
            };
            let (u1, d1, u2, d2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
            probe.coords[idx] = x;
            let numeric = (8.0 * (u1 - d1) - (u2 - d2)) / (12.0 * h);
            let diff = (grad[idx] - numeric).abs();
            if diff > 0.0 {
                worst = worst.max(if scale > 0.0 { diff / scale } else { f64::INFINITY });
            }
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_relative_error: worst,
        skipped_pairs,
        checked_coordinates: checked,
    })
}
