//! Pairwise losses.
//!
//! A [`LossObject`] assigns each pair a contractive term `c_ij` and an
//! expansive term `e_ij`, both closed-form [`LossForm`]s so that interval
//! suprema are exact. A [`FuzzyLossFamily`] is a strength-indexed family of
//! such objects; [`flatten`] integrates it over strengths `a ∈ (0, 1]`.
//! [`EmbeddingProblem`] is what the optimizer minimizes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::covers::{HierarchicalCover, MembershipMatrix};
use crate::optimize::Embedding;
use crate::quadrature::{self, QuadratureSettings};
use crate::{Error, Result, SquareMatrix};

/// A closed-form function of the embedded distance `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LossForm {
    Zero,
    /// `alpha · x²`
    Quadratic { alpha: f64 },
    /// `alpha · x² + beta`
    AffineSquare { alpha: f64, beta: f64 },
    /// `beta`
    Constant { beta: f64 },
    /// `linear · x − barrier · ln(1 − e^{−x}) + offset`
    LogBarrier { linear: f64, barrier: f64, offset: f64 },
}

impl LossForm {
    /// `alpha · x² + beta` in its most specific variant.
    pub fn affine_square(alpha: f64, beta: f64) -> Self {
        match (alpha == 0.0, beta == 0.0) {
            (true, true) => LossForm::Zero,
            (false, true) => LossForm::Quadratic { alpha },
            (true, false) => LossForm::Constant { beta },
            (false, false) => LossForm::AffineSquare { alpha, beta },
        }
    }

    /// `(alpha, beta)` for forms that are affine in `x²`.
    pub fn square_coefficients(&self) -> Option<(f64, f64)> {
        match *self {
            LossForm::Zero => Some((0.0, 0.0)),
            LossForm::Quadratic { alpha } => Some((alpha, 0.0)),
            LossForm::AffineSquare { alpha, beta } => Some((alpha, beta)),
            LossForm::Constant { beta } => Some((0.0, beta)),
            LossForm::LogBarrier { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            LossForm::LogBarrier { linear, barrier, offset } => {
                let mut v = linear * x + offset;
                if barrier != 0.0 {
                    v -= barrier * libm::log1p(-libm::exp(-x));
                }
                v
            }
            _ => {
                let (alpha, beta) = self.square_coefficients().unwrap();
                alpha * x * x + beta
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            LossForm::LogBarrier { linear, barrier, .. } => {
                let mut g = linear;
                if barrier != 0.0 {
                    g -= barrier / libm::expm1(x);
                }
                g
            }
            _ => 2.0 * self.square_coefficients().unwrap().0 * x,
        }
    }

    /// Exact `sup |f(x)|` over `x ∈ [lo, hi]` (may be `+∞`).
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            LossForm::LogBarrier { linear, barrier, .. } => {
                let mut best = self.eval(lo).abs().max(self.eval(hi).abs());
                if linear != 0.0 && barrier != 0.0 && (linear > 0.0) == (barrier > 0.0) {
                    // stationary point of a·x − b·ln(1 − e^{−x})
                    let xs = libm::log((linear + barrier) / linear);
                    if xs > lo && xs < hi {
                        best = best.max(self.eval(xs).abs());
                    }
                }
                best
            }
            // monotone in x² on [lo², hi²]
            _ => self.eval(lo).abs().max(self.eval(hi).abs()),
        }
    }

    fn add(self, other: LossForm) -> Result<LossForm> {
        match (self.square_coefficients(), other.square_coefficients()) {
            (Some((a1, b1)), Some((a2, b2))) => Ok(LossForm::affine_square(a1 + a2, b1 + b2)),
            _ => match (self, other) {
                (
                    LossForm::LogBarrier { linear: l1, barrier: r1, offset: o1 },
                    LossForm::LogBarrier { linear: l2, barrier: r2, offset: o2 },
                ) => Ok(LossForm::LogBarrier {
                    linear: l1 + l2,
                    barrier: r1 + r2,
                    offset: o1 + o2,
                }),
                (LossForm::LogBarrier { linear, barrier, offset }, f)
                | (f, LossForm::LogBarrier { linear, barrier, offset })
                    if f.square_coefficients().map(|c| c.0) == Some(0.0) =>
                {
                    Ok(LossForm::LogBarrier {
                        linear,
                        barrier,
                        offset: offset + f.eval(0.0),
                    })
                }
                _ => Err(Error::InvalidParameter(
                    "cannot add a log-barrier form to a quadratic form".into(),
                )),
            },
        }
    }
}

/// The contractive and expansive terms of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairForms {
    pub c: LossForm,
    pub e: LossForm,
}

impl PairForms {
    pub const ZERO: PairForms = PairForms {
        c: LossForm::Zero,
        e: LossForm::Zero,
    };

    pub fn eval(&self, x: f64) -> f64 {
        self.c.eval(x) + self.e.eval(x)
    }

    /// Unclamped fuzzy cross-entropy of a pair with membership `w`, split as
    /// `c = w·x + w ln w` and `e = −(1 − w) ln(1 − e^{−x}) + (1 − w) ln(1 − w)`.
    pub fn cross_entropy(w: f64) -> Self {
        PairForms {
            c: LossForm::LogBarrier {
                linear: w,
                barrier: 0.0,
                offset: xlogx(w),
            },
            e: LossForm::LogBarrier {
                linear: 0.0,
                barrier: 1.0 - w,
                offset: xlogx(1.0 - w),
            },
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * libm::log(x)
    }
}

/// Object of the loss preorder: `n` points and forms for each pair `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossObject {
    n: usize,
    pairs: Vec<PairForms>,
}

/// Position of `(i, j)`, `i < j`, in the packed upper triangle.
pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl LossObject {
    pub fn zero(n: usize) -> Self {
        LossObject {
            n,
            pairs: vec![PairForms::ZERO; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn from_pairs(n: usize, pairs: Vec<PairForms>) -> Result<Self> {
        if pairs.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Shape(format!(
                "{} pair forms for {n} points",
                pairs.len()
            )));
        }
        Ok(LossObject { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Forms of pair `(i, j)`; the zero forms on the diagonal and for
    /// indices beyond `n`.
    pub fn pair(&self, i: usize, j: usize) -> PairForms {
        if i == j || i >= self.n || j >= self.n {
            PairForms::ZERO
        } else {
            self.pairs[pair_index(self.n, i, j)]
        }
    }

    pub fn pairs(&self) -> &[PairForms] {
        &self.pairs
    }

    /// `Σ_{i≠j} (c_ij + e_ij)(‖A_i − A_j‖)`.
    pub fn total(&self, a: &Embedding) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                sum += self.pair(i, j).eval(a.distance(i, j));
            }
        }
        2.0 * sum
    }
}

/// Evaluation grid over embedded distances: `points` evenly spaced values
/// in `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_max: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            x_max: 10.0,
            points: 101,
        }
    }
}

impl Grid {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let steps = self.points.max(2) - 1;
        (0..=steps).map(move |s| self.x_max * s as f64 / steps as f64)
    }
}

/// Loss ordering `L1 ≤ L2`: for every pair and sampled `x`,
/// `c2(x) ≤ c1(x)` and `e1(x) ≤ e2(x)`. For forms affine in `x²` the
/// grid endpoints make the check exact on `[0, x_max]`.
pub fn loss_leq(l1: &LossObject, l2: &LossObject, grid: &Grid) -> Result<bool> {
    if l1.n != l2.n {
        return Err(Error::SizeMismatch {
            left: l1.n,
            right: l2.n,
        });
    }
    Ok(l1.pairs.iter().zip(&l2.pairs).all(|(p1, p2)| {
        grid.values()
            .all(|x| p2.c.eval(x) <= p1.c.eval(x) && p1.e.eval(x) <= p2.e.eval(x))
    }))
}

/// A coefficient that depends on the strength `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum StrengthForm {
    Zero,
    /// `x² · (p + q / a)`
    QuadraticInvStrength { p: f64, q: f64 },
    /// `r + s · ln(a) / a`, constant in `x`
    LogOverStrength { r: f64, s: f64 },
}

impl StrengthForm {
    /// The loss form in force at strength `a`.
    pub fn at(&self, a: f64) -> LossForm {
        match *self {
            StrengthForm::Zero => LossForm::Zero,
            StrengthForm::QuadraticInvStrength { p, q } => {
                LossForm::affine_square(p + q / a, 0.0)
            }
            StrengthForm::LogOverStrength { r, s } => {
                LossForm::affine_square(0.0, r + s * libm::log(a) / a)
            }
        }
    }

    /// The scalar coefficient at `a` (of `x²`, or the constant).
    fn coefficient(&self, a: f64) -> f64 {
        match *self {
            StrengthForm::Zero => 0.0,
            StrengthForm::QuadraticInvStrength { p, q } => p + q / a,
            StrengthForm::LogOverStrength { r, s } => r + s * libm::log(a) / a,
        }
    }

    /// `sup |coefficient(a)|` over `a ∈ (lo, hi]`; both coefficient shapes
    /// are monotone in `a`.
    fn sup_abs_coefficient(&self, lo: f64, hi: f64) -> f64 {
        if matches!(self, StrengthForm::Zero) {
            return 0.0;
        }
        let at_lo = if lo > 0.0 {
            self.coefficient(lo).abs()
        } else if self.integrable_at_zero() {
            self.coefficient(1.0).abs()
        } else {
            f64::INFINITY
        };
        at_lo.max(self.coefficient(hi).abs())
    }

    /// `sup |form(a)(x)|` over `a ∈ (lo, hi]` and `x ∈ [0, r]`.
    fn sup_abs_over(&self, lo: f64, hi: f64, r: f64) -> f64 {
        match self {
            StrengthForm::QuadraticInvStrength { .. } => self.sup_abs_coefficient(lo, hi) * r * r,
            _ => self.sup_abs_coefficient(lo, hi),
        }
    }

    /// Whether `∫_0^hi` converges.
    fn integrable_at_zero(&self) -> bool {
        match *self {
            StrengthForm::Zero => true,
            StrengthForm::QuadraticInvStrength { q, .. } => q == 0.0,
            StrengthForm::LogOverStrength { s, .. } => s == 0.0,
        }
    }

    /// Closed-form `∫_{lo}^{hi}` over strengths.
    fn integral(&self, lo: f64, hi: f64) -> LossForm {
        let len = hi - lo;
        match *self {
            StrengthForm::Zero => LossForm::Zero,
            StrengthForm::QuadraticInvStrength { p, q } => {
                let log_part = if q == 0.0 { 0.0 } else { q * libm::log(hi / lo) };
                LossForm::affine_square(p * len + log_part, 0.0)
            }
            StrengthForm::LogOverStrength { r, s } => {
                let log_part = if s == 0.0 {
                    0.0
                } else {
                    let (lh, ll) = (libm::log(hi), libm::log(lo));
                    0.5 * s * (lh * lh - ll * ll)
                };
                LossForm::affine_square(0.0, r * len + log_part)
            }
        }
    }

    fn wrap(&self, value: f64) -> LossForm {
        match self {
            StrengthForm::Zero => LossForm::Zero,
            StrengthForm::QuadraticInvStrength { .. } => LossForm::affine_square(value, 0.0),
            StrengthForm::LogOverStrength { .. } => LossForm::affine_square(0.0, value),
        }
    }
}

/// The forms in force for strengths in `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthPiece {
    pub lo: f64,
    pub hi: f64,
    pub c: StrengthForm,
    pub e: StrengthForm,
}

/// A functor from strengths `(0, 1]` (reversed) to loss objects, stored per
/// pair as finitely many [`StrengthPiece`]s covering `(floor, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyLossFamily {
    n: usize,
    pairs: Vec<Vec<StrengthPiece>>,
    /// Pairs `(i, j)` whose pieces were truncated at a strength floor.
    truncated: Vec<(usize, usize)>,
}

impl FuzzyLossFamily {
    pub fn new(n: usize, pairs: Vec<Vec<StrengthPiece>>) -> Result<Self> {
        if pairs.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Shape(format!("{} pair families for {n} points", pairs.len())));
        }
        for pieces in &pairs {
            let mut top = 1.0;
            for p in pieces.iter().rev() {
                if p.hi != top || !(p.lo < p.hi) || p.lo < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "pieces must tile (floor, 1] from the top; got ({}, {}]",
                        p.lo, p.hi
                    )));
                }
                top = p.lo;
            }
        }
        Ok(FuzzyLossFamily {
            n,
            pairs,
            truncated: Vec::new(),
        })
    }

    /// The family that is the same loss object at every strength.
    pub fn constant(obj: &LossObject) -> Result<Self> {
        let lift = |f: LossForm| match f.square_coefficients() {
            Some((alpha, 0.0)) if alpha != 0.0 => Ok(StrengthForm::QuadraticInvStrength { p: alpha, q: 0.0 }),
            Some((0.0, beta)) if beta != 0.0 => Ok(StrengthForm::LogOverStrength { r: beta, s: 0.0 }),
            Some((0.0, 0.0)) => Ok(StrengthForm::Zero),
            _ => Err(Error::InvalidParameter(
                "only pure quadratic or constant forms lift to strength families".into(),
            )),
        };
        let pairs = obj
            .pairs
            .iter()
            .map(|p| {
                Ok(vec![StrengthPiece {
                    lo: 0.0,
                    hi: 1.0,
                    c: lift(p.c)?,
                    e: lift(p.e)?,
                }])
            })
            .collect::<Result<Vec<_>>>()?;
        FuzzyLossFamily::new(obj.n, pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pieces(&self, i: usize, j: usize) -> &[StrengthPiece] {
        &self.pairs[pair_index(self.n, i, j)]
    }

    pub fn truncated_pairs(&self) -> &[(usize, usize)] {
        &self.truncated
    }

    /// The loss object at strength `a` (zero for strengths below a pair's
    /// truncation floor).
    pub fn at(&self, a: f64) -> LossObject {
        let pairs = self
            .pairs
            .iter()
            .map(|pieces| {
                pieces
                    .iter()
                    .find(|p| a > p.lo && a <= p.hi)
                    .map(|p| PairForms {
                        c: p.c.at(a),
                        e: p.e.at(a),
                    })
                    .unwrap_or(PairForms::ZERO)
            })
            .collect();
        LossObject { n: self.n, pairs }
    }

    /// `sup |c_ij(a)(x)|` over all pairs, strengths and `x ∈ [0, r]`.
    pub fn sup_abs_c(&self, r: f64) -> f64 {
        self.pairs
            .iter()
            .flatten()
            .map(|p| p.c.sup_abs_over(p.lo, p.hi, r))
            .fold(0.0, f64::max)
    }

    /// `sup |e_ij(a)(x)|` over all pairs, strengths and `x ∈ [0, r]`.
    pub fn sup_abs_e(&self, r: f64) -> f64 {
        self.pairs
            .iter()
            .flatten()
            .map(|p| p.e.sup_abs_over(p.lo, p.hi, r))
            .fold(0.0, f64::max)
    }

    /// Whether every expansive term is constant in `x`.
    pub fn e_constant_in_x(&self) -> bool {
        self.pairs
            .iter()
            .flatten()
            .all(|p| !matches!(p.e, StrengthForm::QuadraticInvStrength { .. }))
    }

    /// Sorted distinct piece boundaries in `(0, 1]`.
    pub fn critical_strengths(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .pairs
            .iter()
            .flatten()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|&a| a > 0.0)
            .collect();
        v.push(1.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Strengths at which the family is sampled for ordering checks: the
    /// critical strengths, midpoints between them, and points just above
    /// each lower boundary.
    pub fn sample_strengths(&self) -> Vec<f64> {
        let crit = self.critical_strengths();
        let mut v = crit.clone();
        let mut prev = 0.0;
        for &c in &crit {
            v.push(0.5 * (prev + c));
            v.push(if prev > 0.0 { prev * (1.0 + 1e-9) } else { c * 1e-6 });
            prev = c;
        }
        v.retain(|&a| a > 0.0 && a <= 1.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Functoriality over `(0, 1]^op`: for sampled `a ≤ a'`, `F(a') ≤ F(a)`,
    /// i.e. `c_a ≤ c_{a'}` and `e_{a'} ≤ e_a`.
    pub fn is_monotone(&self, grid: &Grid) -> bool {
        let strengths = self.sample_strengths();
        strengths.windows(2).all(|w| {
            loss_leq(&self.at(w[1]), &self.at(w[0]), grid).unwrap_or(false)
        })
    }
}

/// Family order `F1 ≤ F2`: `F1(a) ≤ F2(a)` at every sampled strength of
/// either family.
pub fn family_leq(f1: &FuzzyLossFamily, f2: &FuzzyLossFamily, grid: &Grid) -> Result<bool> {
    if f1.n != f2.n {
        return Err(Error::SizeMismatch {
            left: f1.n,
            right: f2.n,
        });
    }
    let mut strengths = f1.sample_strengths();
    strengths.extend(f2.sample_strengths());
    strengths.sort_by(f64::total_cmp);
    strengths.dedup();
    for a in strengths {
        if !loss_leq(&f1.at(a), &f2.at(a), grid)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The MDS loss family of a membership matrix. For a pair with membership
/// `W` and strength `a`: when `a ≤ W` (the pair shares a block),
/// `c = x²`, `e = 0`; otherwise `c = x² + 2x²(1/W − 1/a)` and
/// `e = 2 ln(W)/W − 2 ln(a)/a`.
///
/// Pairs with `W = 0` have no defined branch; with `truncation = Some(a_min)`
/// they are treated as `W = a_min` on `(a_min, 1]` and listed in
/// [`FuzzyLossFamily::truncated_pairs`].
pub fn mds_fuzzy_family(w: &MembershipMatrix, truncation: Option<f64>) -> Result<FuzzyLossFamily> {
    if let Some(a_min) = truncation {
        if !(a_min > 0.0 && a_min < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation floor {a_min} must lie in (0, 1)"
            )));
        }
    }
    let n = w.n();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut truncated = Vec::new();
    let together = StrengthForm::QuadraticInvStrength { p: 1.0, q: 0.0 };
    for i in 0..n {
        for j in (i + 1)..n {
            let mut wij = w.get(i, j);
            let mut floor = 0.0;
            if wij == 0.0 {
                match truncation {
                    Some(a_min) => {
                        wij = a_min;
                        floor = a_min;
                        truncated.push((i, j));
                    }
                    None => return Err(Error::ZeroMembership { i, j }),
                }
            }
            let apart = StrengthPiece {
                lo: wij,
                hi: 1.0,
                c: StrengthForm::QuadraticInvStrength {
                    p: 1.0 + 2.0 / wij,
                    q: -2.0,
                },
                e: StrengthForm::LogOverStrength {
                    r: 2.0 * libm::log(wij) / wij,
                    s: -2.0,
                },
            };
            let pieces = if wij >= 1.0 {
                vec![StrengthPiece {
                    lo: 0.0,
                    hi: 1.0,
                    c: together,
                    e: StrengthForm::Zero,
                }]
            } else if floor > 0.0 {
                vec![apart]
            } else {
                vec![
                    StrengthPiece {
                        lo: 0.0,
                        hi: wij,
                        c: together,
                        e: StrengthForm::Zero,
                    },
                    apart,
                ]
            };
            pairs.push(pieces);
        }
    }
    let mut fam = FuzzyLossFamily::new(n, pairs)?;
    fam.truncated = truncated;
    Ok(fam)
}

/// [`mds_fuzzy_family`] of the membership matrix of `h`.
pub fn mds_fuzzy_family_of_cover(h: &HierarchicalCover, truncation: Option<f64>) -> Result<FuzzyLossFamily> {
    mds_fuzzy_family(&h.membership_matrix(), truncation)
}

/// `Flatten` by closed-form integration of every piece over strengths.
pub fn flatten(f: &FuzzyLossFamily) -> Result<LossObject> {
    let mut out = Vec::with_capacity(f.pairs.len());
    for pieces in &f.pairs {
        let mut c = LossForm::Zero;
        let mut e = LossForm::Zero;
        for p in pieces {
            if p.lo == 0.0 && !(p.c.integrable_at_zero() && p.e.integrable_at_zero()) {
                return Err(Error::InvalidParameter(
                    "piece is not integrable near strength 0; truncate it".into(),
                ));
            }
            c = c.add(p.c.integral(p.lo, p.hi))?;
            e = e.add(p.e.integral(p.lo, p.hi))?;
        }
        out.push(PairForms { c, e });
    }
    LossObject::from_pairs(f.n, out)
}

/// Result of [`flatten_quadrature`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureFlatten {
    pub object: LossObject,
    /// Integration horizon in scale coordinates `t = −ln a`.
    pub horizon: f64,
    pub converged: bool,
    /// Largest relative error estimate over all integrals.
    pub max_relative_error: f64,
    pub evaluations: usize,
}

/// `Flatten` by adaptive quadrature in scale coordinates: with `a = e^{-t}`,
/// `∫ g(a) da = ∫ g(e^{-t}) e^{-t} dt`, integrated over `t ∈ [0, T]` with
/// `T = (largest finite scale boundary) + 20`; the tail below `e^{-T}` is
/// added analytically (only constant-in-`a` pieces reach strength 0).
pub fn flatten_quadrature(f: &FuzzyLossFamily, settings: &QuadratureSettings) -> Result<QuadratureFlatten> {
    let max_scale = f
        .critical_strengths()
        .iter()
        .map(|&a| -libm::log(a))
        .fold(0.0, f64::max);
    let horizon = max_scale + 20.0;
    let a_horizon = libm::exp(-horizon);
    let mut converged = true;
    let mut max_rel: f64 = 0.0;
    let mut evaluations = 0;
    let mut out = Vec::with_capacity(f.pairs.len());
    for pieces in &f.pairs {
        let mut c = LossForm::Zero;
        let mut e = LossForm::Zero;
        for p in pieces {
            for (form, acc) in [(p.c, &mut c), (p.e, &mut e)] {
                if matches!(form, StrengthForm::Zero) {
                    continue;
                }
                if p.lo == 0.0 && !form.integrable_at_zero() {
                    return Err(Error::InvalidParameter(
                        "piece is not integrable near strength 0; truncate it".into(),
                    ));
                }
                let t_lo = -libm::log(p.hi);
                let t_hi = if p.lo > 0.0 { -libm::log(p.lo) } else { horizon };
                let r = quadrature::integrate(
                    |t| {
                        let a = libm::exp(-t);
                        form.coefficient(a) * a
                    },
                    t_lo.max(0.0),
                    t_hi,
                    settings,
                );
                let mut value = r.value;
                if p.lo == 0.0 {
                    // constant coefficient below e^{-T}
                    value += form.coefficient(1.0) * a_horizon;
                }
                converged &= r.converged;
                evaluations += r.evaluations;
                if value != 0.0 {
                    max_rel = max_rel.max(r.error / value.abs());
                }
                *acc = acc.add(form.wrap(value))?;
            }
        }
        out.push(PairForms { c, e });
    }
    if !converged {
        return Err(Error::Quadrature(format!(
            "relative tolerance {} not reached (estimate {max_rel})",
            settings.rel_tol
        )));
    }
    Ok(QuadratureFlatten {
        object: LossObject::from_pairs(f.n, out)?,
        horizon,
        converged,
        max_relative_error: max_rel,
        evaluations,
    })
}

/// Which of the sign patterns a family satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    /// Both patterns hold (all terms vanish).
    Both,
    /// `c ≥ 0` and `e ≤ 0`.
    PositiveExtensible,
    /// `c ≤ 0` and `e ≥ 0`.
    NegativeExtensible,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub c_nonnegative: bool,
    pub c_nonpositive: bool,
    pub e_nonnegative: bool,
    pub e_nonpositive: bool,
    pub pattern: SignPattern,
}

/// Evaluates every pair's `c` and `e` over `grid` at all sampled strengths.
pub fn sign_classification(f: &FuzzyLossFamily, grid: &Grid) -> SignReport {
    let (mut c_nn, mut c_np, mut e_nn, mut e_np) = (true, true, true, true);
    for a in f.sample_strengths() {
        let obj = f.at(a);
        for p in &obj.pairs {
            for x in grid.values() {
                let (c, e) = (p.c.eval(x), p.e.eval(x));
                c_nn &= c >= 0.0;
                c_np &= c <= 0.0;
                e_nn &= e >= 0.0;
                e_np &= e <= 0.0;
            }
        }
    }
    let pos = c_nn && e_np;
    let neg = c_np && e_nn;
    let pattern = match (pos, neg) {
        (true, true) => SignPattern::Both,
        (true, false) => SignPattern::PositiveExtensible,
        (false, true) => SignPattern::NegativeExtensible,
        (false, false) => SignPattern::Neither,
    };
    SignReport {
        c_nonnegative: c_nn,
        c_nonpositive: c_np,
        e_nonnegative: e_nn,
        e_nonpositive: e_np,
        pattern,
    }
}

/// What to do with infinite stress targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Reject infinite targets.
    Strict,
    /// Leave the pair out of the loss.
    DropPair,
    /// Replace with `factor × (largest finite target)`.
    Cap { factor: f64 },
}

impl Default for TargetPolicy {
    fn default() -> Self {
        TargetPolicy::Cap { factor: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ProblemKind {
    /// `l_ij(δ) = (D'_ij − δ)²`; dropped pairs are flagged in `active`.
    Stress {
        targets: SquareMatrix,
        active: Option<Vec<bool>>,
    },
    /// Fuzzy cross-entropy against memberships with clamp `ε`.
    CrossEntropy { w: SquareMatrix, clamp: f64 },
}

/// A pairwise embedding problem `(n, m, {l_ij})` with analytic gradient.
/// The total loss sums over ordered pairs `i ≠ j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingProblem {
    n: usize,
    m: usize,
    kind: ProblemKind,
    capped_pairs: usize,
    dropped_pairs: usize,
}

/// Default clamp for the cross-entropy membership estimate.
pub const DEFAULT_FCE_CLAMP: f64 = 1e-6;

/// Metric stress against target distances `D'`.
pub fn mds_stress_problem(targets: &SquareMatrix, m: usize, policy: TargetPolicy) -> Result<EmbeddingProblem> {
    if m == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
    }
    let n = targets.n();
    for i in 0..n {
        if targets[(i, i)] != 0.0 {
            return Err(Error::NonzeroDiagonal { i, value: targets[(i, i)] });
        }
        for j in 0..n {
            let v = targets[(i, j)];
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidEntry { i, j, value: v });
            }
            if v != targets[(j, i)] {
                return Err(Error::Asymmetric { i, j, dij: v, dji: targets[(j, i)] });
            }
        }
    }
    let mut t = targets.clone();
    let mut active = None;
    let mut capped = 0;
    let mut dropped = 0;
    let first_infinite = t
        .upper_pairs()
        .find(|(_, _, v)| v.is_infinite())
        .map(|(i, j, _)| (i, j));
    if let Some((i, j)) = first_infinite {
        match policy {
            TargetPolicy::Strict => return Err(Error::InfiniteTarget { i, j }),
            TargetPolicy::DropPair => {
                let mut mask = vec![true; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if t[(i, j)].is_infinite() {
                            mask[i * n + j] = false;
                            t[(i, j)] = 0.0;
                            if i < j {
                                dropped += 1;
                            }
                        }
                    }
                }
                active = Some(mask);
            }
            TargetPolicy::Cap { factor } => {
                capped = crate::functors::resolve_infinite(
                    &mut t,
                    crate::functors::Disconnection::Cap { factor },
                    f64::INFINITY,
                    0.0,
                )?;
            }
        }
    }
    Ok(EmbeddingProblem {
        n,
        m,
        kind: ProblemKind::Stress { targets: t, active },
        capped_pairs: capped,
        dropped_pairs: dropped,
    })
}

/// Fuzzy cross-entropy
/// `l_ij(δ) = W ln(W / v) + (1 − W) ln((1 − W)/(1 − v))` with
/// `v = min(max(e^{−δ}, ε), 1 − ε)`.
pub fn fce_problem(w: &MembershipMatrix, m: usize, clamp: f64) -> Result<EmbeddingProblem> {
    if m == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
    }
    if !(clamp > 0.0 && clamp < 0.5) {
        return Err(Error::InvalidParameter(format!("clamp {clamp} must lie in (0, 0.5)")));
    }
    Ok(EmbeddingProblem {
        n: w.n(),
        m,
        kind: ProblemKind::CrossEntropy {
            w: w.matrix().clone(),
            clamp,
        },
        capped_pairs: 0,
        dropped_pairs: 0,
    })
}

impl EmbeddingProblem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Stress targets after policy resolution, if this is a stress problem.
    pub fn targets(&self) -> Option<&SquareMatrix> {
        match &self.kind {
            ProblemKind::Stress { targets, .. } => Some(targets),
            ProblemKind::CrossEntropy { .. } => None,
        }
    }

    /// Targets for classical initialization: the stress targets, or
    /// `−ln W` with infinite entries capped at three times the largest
    /// finite value.
    pub fn init_targets(&self) -> SquareMatrix {
        match &self.kind {
            ProblemKind::Stress { targets, .. } => targets.clone(),
            ProblemKind::CrossEntropy { w, .. } => {
                let mut t = crate::covers::target_distances(&MembershipMatrix::from_trusted(w.clone()));
                let _ = crate::functors::resolve_infinite(
                    &mut t,
                    crate::functors::Disconnection::Cap { factor: 3.0 },
                    f64::INFINITY,
                    1.0,
                );
                t
            }
        }
    }

    pub fn is_stress(&self) -> bool {
        matches!(self.kind, ProblemKind::Stress { .. })
    }

    pub fn capped_pairs(&self) -> usize {
        self.capped_pairs
    }

    pub fn dropped_pairs(&self) -> usize {
        self.dropped_pairs
    }

    /// `l_ij(δ)`.
    pub fn pair_loss(&self, i: usize, j: usize, delta: f64) -> f64 {
        match &self.kind {
            ProblemKind::Stress { targets, active } => {
                if active.as_ref().is_some_and(|m| !m[i * self.n + j]) {
                    return 0.0;
                }
                let r = targets[(i, j)] - delta;
                r * r
            }
            ProblemKind::CrossEntropy { w, clamp } => cross_entropy(w[(i, j)], delta, *clamp).0,
        }
    }

    /// `dl_ij/dδ`.
    pub fn pair_derivative(&self, i: usize, j: usize, delta: f64) -> f64 {
        match &self.kind {
            ProblemKind::Stress { targets, active } => {
                if active.as_ref().is_some_and(|m| !m[i * self.n + j]) {
                    return 0.0;
                }
                2.0 * (delta - targets[(i, j)])
            }
            ProblemKind::CrossEntropy { w, clamp } => cross_entropy(w[(i, j)], delta, *clamp).1,
        }
    }

    fn check_shape(&self, a: &Embedding) -> Result<()> {
        if a.n() != self.n || a.m() != self.m {
            return Err(Error::Shape(format!(
                "embedding is {}×{}, problem is {}×{}",
                a.n(),
                a.m(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    /// Total loss `Σ_{i≠j} l_ij(‖A_i − A_j‖)`, summed in fixed pair order.
    pub fn loss(&self, a: &Embedding) -> Result<f64> {
        self.check_shape(a)?;
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                sum += self.pair_loss(i, j, a.distance(i, j));
            }
        }
        Ok(2.0 * sum)
    }

    /// Loss and its gradient with respect to the coordinates (row-major).
    /// Coincident pairs contribute the zero vector.
    pub fn loss_and_gradient(&self, a: &Embedding) -> Result<(f64, Vec<f64>)> {
        self.check_shape(a)?;
        let (n, m) = (self.n, self.m);
        let mut grad = vec![0.0; n * m];
        let mut sum = 0.0;
        let mut diff = vec![0.0; m];
        for i in 0..n {
            for j in (i + 1)..n {
                let (ri, rj) = (a.row(i), a.row(j));
                let mut sq = 0.0;
                for k in 0..m {
                    diff[k] = ri[k] - rj[k];
                    sq += diff[k] * diff[k];
                }
                let delta = libm::sqrt(sq);
                sum += self.pair_loss(i, j, delta);
                if delta > 0.0 {
                    // both orderings (i, j) and (j, i)
                    let scale = 2.0 * self.pair_derivative(i, j, delta) / delta;
                    for k in 0..m {
                        let g = scale * diff[k];
                        grad[i * m + k] += g;
                        grad[j * m + k] -= g;
                    }
                }
            }
        }
        Ok((2.0 * sum, grad))
    }
}

/// `(l(δ), dl/dδ)` of the clamped cross-entropy term.
fn cross_entropy(w: f64, delta: f64, clamp: f64) -> (f64, f64) {
    let raw = libm::exp(-delta);
    let v = raw.clamp(clamp, 1.0 - clamp);
    let mut l = 0.0;
    let mut dl_dv = 0.0;
    if w > 0.0 {
        l += w * libm::log(w / v);
        dl_dv -= w / v;
    }
    if w < 1.0 {
        l += (1.0 - w) * libm::log((1.0 - w) / (1.0 - v));
        dl_dv += (1.0 - w) / (1.0 - v);
    }
    let dv = if raw > clamp && raw < 1.0 - clamp { -raw } else { 0.0 };
    (l, dl_dv * dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covers::MembershipMatrix;

    fn membership(rows: &[Vec<f64>]) -> MembershipMatrix {
        MembershipMatrix::new(SquareMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn two_point(w: f64) -> MembershipMatrix {
        membership(&[vec![1.0, w], vec![w, 1.0]])
    }

    #[test]
    fn pair_indexing_is_dense() {
        let n = 5;
        let mut seen = vec![false; n * (n - 1) / 2];
        for i in 0..n {
            for j in (i + 1)..n {
                seen[pair_index(n, i, j)] = true;
                assert_eq!(pair_index(n, i, j), pair_index(n, j, i));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn forms_and_suprema() {
        let q = LossForm::Quadratic { alpha: -2.0 };
        assert_eq!(q.eval(3.0), -18.0);
        assert_eq!(q.sup_abs(0.0, 3.0), 18.0);
        let a = LossForm::AffineSquare { alpha: 1.0, beta: -4.0 };
        assert_eq!(a.sup_abs(0.0, 1.0), 4.0);
        assert_eq!(a.sup_abs(0.0, 3.0), 5.0);
        let lb = LossForm::LogBarrier { linear: 0.0, barrier: 1.0, offset: 0.0 };
        assert_eq!(lb.sup_abs(0.0, 1.0), f64::INFINITY);
        // interior minimum of x − ln(1 − e^{−x}) at ln 2, value ln 2 + ln 2
        let lb = LossForm::LogBarrier { linear: 1.0, barrier: 1.0, offset: -3.0 };
        let xs = libm::log(2.0);
        let expected = (lb.eval(xs)).abs().max(lb.eval(0.1).abs()).max(lb.eval(5.0).abs());
        assert_eq!(lb.sup_abs(0.1, 5.0), expected);
        assert!((lb.eval(xs) - (2.0 * xs - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn mds_family_cases() {
        let fam = mds_fuzzy_family(&two_point(1.0), None).unwrap();
        for a in [0.1, 0.5, 1.0] {
            let p = fam.at(a).pair(0, 1);
            assert_eq!(p.c, LossForm::Quadratic { alpha: 1.0 });
            assert_eq!(p.e, LossForm::Zero);
        }
        let w = libm::exp(-1.0);
        let fam = mds_fuzzy_family(&two_point(w), None).unwrap();
        // continuity at the seam a = W
        let apart = fam.pieces(0, 1)[1];
        assert!((apart.c.at(w).eval(2.0) - 4.0).abs() < 1e-12);
        assert!(apart.e.at(w).eval(2.0).abs() < 1e-12);
        // one point: nothing to integrate
        let one = membership(&[vec![1.0]]);
        let fam = mds_fuzzy_family(&one, None).unwrap();
        assert_eq!(flatten(&fam).unwrap(), LossObject::zero(1));
    }

    #[test]
    fn zero_membership_needs_truncation() {
        assert_eq!(
            mds_fuzzy_family(&two_point(0.0), None).unwrap_err(),
            Error::ZeroMembership { i: 0, j: 1 }
        );
        let fam = mds_fuzzy_family(&two_point(0.0), Some(1e-6)).unwrap();
        assert_eq!(fam.truncated_pairs(), &[(0, 1)]);
        assert!(flatten(&fam).is_ok());
    }

    #[test]
    fn flatten_constant_family() {
        let obj = LossObject::from_pairs(
            2,
            vec![PairForms {
                c: LossForm::Quadratic { alpha: 1.0 },
                e: LossForm::Zero,
            }],
        )
        .unwrap();
        let fam = FuzzyLossFamily::constant(&obj).unwrap();
        assert_eq!(flatten(&fam).unwrap(), obj);
        let q = flatten_quadrature(&fam, &QuadratureSettings::default()).unwrap();
        let alpha = q.object.pair(0, 1).c.square_coefficients().unwrap().0;
        assert!((alpha - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for d in [0.5, 1.0, 2.0, 4.0] {
            let fam = mds_fuzzy_family(&two_point(libm::exp(-d)), None).unwrap();
            let exact = flatten(&fam).unwrap().pair(0, 1);
            let quad = flatten_quadrature(&fam, &QuadratureSettings::default()).unwrap();
            assert!(quad.converged);
            let got = quad.object.pair(0, 1);
            let (ea, _) = exact.c.square_coefficients().unwrap();
            let (ga, _) = got.c.square_coefficients().unwrap();
            let (_, eb) = exact.e.square_coefficients().unwrap();
            let (_, gb) = got.e.square_coefficients().unwrap();
            assert!((ea - ga).abs() <= 1e-8 * ea.abs(), "d={d}: {ea} vs {ga}");
            assert!((eb - gb).abs() <= 1e-8 * eb.abs().max(1e-12), "d={d}: {eb} vs {gb}");
        }
    }

    #[test]
    fn mds_family_sign_pattern() {
        let w = membership(&[
            vec![1.0, libm::exp(-1.0), libm::exp(-3.0)],
            vec![libm::exp(-1.0), 1.0, libm::exp(-2.0)],
            vec![libm::exp(-3.0), libm::exp(-2.0), 1.0],
        ]);
        let fam = mds_fuzzy_family(&w, None).unwrap();
        let rep = sign_classification(&fam, &Grid::default());
        assert_eq!(rep.pattern, SignPattern::PositiveExtensible);
        assert!(fam.is_monotone(&Grid::default()));

        let zero = FuzzyLossFamily::constant(&LossObject::zero(3)).unwrap();
        assert_eq!(sign_classification(&zero, &Grid::default()).pattern, SignPattern::Both);

        let neg = LossObject::from_pairs(
            2,
            vec![PairForms {
                c: LossForm::Quadratic { alpha: -1.0 },
                e: LossForm::Zero,
            }],
        )
        .unwrap();
        let rep = sign_classification(&FuzzyLossFamily::constant(&neg).unwrap(), &Grid::default());
        assert!(!rep.c_nonnegative);
        assert_ne!(rep.pattern, SignPattern::PositiveExtensible);
    }

    #[test]
    fn loss_ordering() {
        let a = LossObject::from_pairs(
            2,
            vec![PairForms {
                c: LossForm::Quadratic { alpha: 2.0 },
                e: LossForm::Constant { beta: -1.0 },
            }],
        )
        .unwrap();
        let g = Grid::default();
        assert!(loss_leq(&a, &a, &g).unwrap());
        let crossing = LossObject::from_pairs(
            2,
            vec![PairForms {
                c: LossForm::AffineSquare { alpha: 1.0, beta: 1.0 },
                e: LossForm::Constant { beta: -1.0 },
            }],
        )
        .unwrap();
        // 2x² vs x² + 1 cross at x = 1
        assert!(!loss_leq(&a, &crossing, &g).unwrap());
        assert!(!loss_leq(&crossing, &a, &g).unwrap());
    }

    #[test]
    fn stress_examples() {
        let t = SquareMatrix::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let p = mds_stress_problem(&t, 1, TargetPolicy::Strict).unwrap();
        let a = Embedding::from_rows(&[vec![0.0], vec![3.0]]).unwrap();
        assert_eq!(p.loss(&a).unwrap(), 0.0);
        let t = SquareMatrix::from_fn(3, |i, j| if i == j { 0.0 } else { 1.0 });
        let p = mds_stress_problem(&t, 2, TargetPolicy::Strict).unwrap();
        let h = libm::sqrt(3.0) / 2.0;
        let tri = Embedding::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
        assert!(p.loss(&tri).unwrap() < 1e-30);
    }

    #[test]
    fn infinite_targets_follow_policy() {
        let t = SquareMatrix::from_rows(&[
            vec![0.0, 1.0, f64::INFINITY],
            vec![1.0, 0.0, f64::INFINITY],
            vec![f64::INFINITY, f64::INFINITY, 0.0],
        ])
        .unwrap();
        assert_eq!(
            mds_stress_problem(&t, 1, TargetPolicy::Strict).unwrap_err(),
            Error::InfiniteTarget { i: 0, j: 2 }
        );
        let p = mds_stress_problem(&t, 1, TargetPolicy::DropPair).unwrap();
        assert_eq!(p.dropped_pairs(), 2);
        assert_eq!(p.pair_loss(0, 2, 100.0), 0.0);
        let p = mds_stress_problem(&t, 1, TargetPolicy::Cap { factor: 3.0 }).unwrap();
        assert_eq!(p.capped_pairs(), 2);
        assert_eq!(p.targets().unwrap()[(0, 2)], 3.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let p = fce_problem(&two_point(1.0), 1, DEFAULT_FCE_CLAMP).unwrap();
        assert!((p.pair_loss(0, 1, 0.7) - 0.7).abs() < 1e-12);
        assert!(p.pair_derivative(0, 1, 0.7) > 0.0);
        let p = fce_problem(&two_point(0.0), 1, DEFAULT_FCE_CLAMP).unwrap();
        assert!(p.pair_loss(0, 1, 1.0) > p.pair_loss(0, 1, 2.0));
        let w = libm::exp(-1.0);
        let p = fce_problem(&two_point(w), 1, DEFAULT_FCE_CLAMP).unwrap();
        assert!(p.pair_loss(0, 1, 1.0).abs() < 1e-15);
        assert!(fce_problem(&two_point(w), 1, 0.6).is_err());
    }

    #[test]
    fn cross_entropy_forms_agree_with_problem() {
        for w in [0.1, 0.5, 0.9] {
            let p = fce_problem(&two_point(w), 1, DEFAULT_FCE_CLAMP).unwrap();
            let forms = PairForms::cross_entropy(w);
            for x in [0.05, 0.5, 2.0, 5.0] {
                assert!((forms.eval(x) - p.pair_loss(0, 1, x)).abs() < 1e-12);
                let d = forms.c.derivative(x) + forms.e.derivative(x);
                assert!((d - p.pair_derivative(0, 1, x)).abs() < 1e-12);
            }
        }
    }
}
