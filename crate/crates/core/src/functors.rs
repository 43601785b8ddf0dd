//! Hierarchical overlapping clustering functors.
//!
//! Each functor maps a [`PseudometricSpace`] to a [`HierarchicalCover`]. The
//! spectrum runs from maximal linkage (finest: cliques of the threshold
//! graph) to single linkage (coarsest: its connected components), with the
//! hop-bounded `L_k` family and the vertex-connectivity `VL_k` family in
//! between.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::covers::{Cover, HierarchicalCover, MembershipMatrix};
use crate::graph::{self, Graph, UnionFind};
use crate::metric::PseudometricSpace;
use crate::{Error, Result, SquareMatrix};

/// Connected components of the threshold graph at every scale. Critical
/// scales are the minimum-spanning-tree merge heights.
pub fn single_linkage(x: &PseudometricSpace) -> HierarchicalCover {
    let n = x.n();
    let mut edges = graph::minimum_spanning_tree(x.matrix());
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut uf = UnionFind::new(n);
    let mut steps = Vec::new();
    let mut idx = 0;
    let mut scale = 0.0;
    loop {
        while idx < edges.len() && edges[idx].2 <= scale {
            uf.union(edges[idx].0, edges[idx].1);
            idx += 1;
        }
        steps.push((scale, components_cover(&mut uf, n)));
        match edges.get(idx) {
            Some(e) => scale = e.2,
            None => break,
        }
    }
    HierarchicalCover::from_steps(n, steps)
}

fn components_cover(uf: &mut UnionFind, n: usize) -> Cover {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_block = alloc::vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if root_block[r] == usize::MAX {
            root_block[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_block[r]].push(i);
    }
    Cover::canonical(n, blocks)
}

/// Maximal cliques of the threshold graph at every scale. Critical scales
/// are the distinct off-diagonal distances.
pub fn maximal_linkage(x: &PseudometricSpace) -> HierarchicalCover {
    clique_hierarchy(x.matrix())
}

/// Maximal cliques of `{(i, j) : rel[i][j] <= δ}` at every finite critical
/// value of `rel`.
fn clique_hierarchy(rel: &SquareMatrix) -> HierarchicalCover {
    let n = rel.n();
    let steps = critical_scales(rel).into_iter().map(|s| {
        let g = Graph::threshold(rel, s);
        (s, Cover::canonical(n, g.maximal_cliques()))
    });
    HierarchicalCover::from_steps(n, steps)
}

/// `0` followed by the distinct positive finite off-diagonal values.
fn critical_scales(m: &SquareMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .upper_pairs()
        .map(|(_, _, x)| x)
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    v.push(0.0);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Relation `i R j` iff a path of at most `hops` edges joins them in the
/// threshold graph; blocks are maximal cliques of the relation.
pub fn hop_linkage(x: &PseudometricSpace, hops: usize) -> Result<HierarchicalCover> {
    if hops == 0 {
        return Err(Error::InvalidParameter("hop bound must be at least 1".into()));
    }
    Ok(clique_hierarchy(&graph::hop_bounded_minimax(x.matrix(), hops)))
}

/// The `L_k` functor: `i R j` iff there is a sequence `i = x_1, .., x_k = j`
/// with consecutive distances `<= δ`, i.e. at most `k - 1` hops. For `k = 1`
/// the relation is taken to be the edge relation, so `L_1` equals maximal
/// linkage.
pub fn l_k_linkage(x: &PseudometricSpace, k: usize) -> Result<HierarchicalCover> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    hop_linkage(x, l_k_hops(k))
}

/// Hop bound used by [`l_k_linkage`].
pub fn l_k_hops(k: usize) -> usize {
    k.saturating_sub(1).max(1)
}

/// The `VL_k` functor: maximal `min(n, k)`-vertex-connected subgraphs of the
/// threshold graph, with isolated vertices as singletons.
pub fn vl_k_linkage(x: &PseudometricSpace, k: usize) -> Result<HierarchicalCover> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n = x.n();
    let kk = k.min(n.max(1));
    let steps = critical_scales(x.matrix()).into_iter().map(|s| {
        let g = Graph::threshold(x.matrix(), s);
        (s, Cover::canonical(n, g.maximal_k_connected(kk)))
    });
    Ok(HierarchicalCover::from_steps(n, steps))
}

/// What to do with pairs that no path connects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Disconnection {
    /// Fail, listing the components.
    Error,
    /// Replace with `factor × (largest finite value)`.
    Cap { factor: f64 },
}

impl Default for Disconnection {
    fn default() -> Self {
        Disconnection::Cap { factor: 3.0 }
    }
}

/// Replaces infinite off-diagonal entries per `policy`. Returns the number
/// of capped pairs (upper triangle).
pub(crate) fn resolve_infinite(
    m: &mut SquareMatrix,
    policy: Disconnection,
    scale: f64,
    fallback_max: f64,
) -> Result<usize> {
    let infinite = m.upper_pairs().filter(|(_, _, v)| v.is_infinite()).count();
    if infinite == 0 {
        return Ok(0);
    }
    match policy {
        Disconnection::Error => {
            let mut g = Graph::empty(m.n());
            for (i, j, v) in m.upper_pairs() {
                if v.is_finite() {
                    g.add_edge(i, j);
                }
            }
            Err(Error::Disconnected {
                scale,
                components: g.components(),
            })
        }
        Disconnection::Cap { factor } => {
            if !(factor > 0.0) || !factor.is_finite() {
                return Err(Error::InvalidParameter(format!("cap factor {factor}")));
            }
            let max_finite = m.max_finite_off_diagonal().unwrap_or(0.0);
            let base = if max_finite > 0.0 { max_finite } else { fallback_max };
            let cap = factor * base;
            let n = m.n();
            for i in 0..n {
                for j in 0..n {
                    if m[(i, j)].is_infinite() {
                        m[(i, j)] = cap;
                    }
                }
            }
            Ok(infinite)
        }
    }
}

/// The smallest scale at which the threshold graph is connected: the
/// largest minimum-spanning-tree edge.
pub fn connectivity_scale(x: &PseudometricSpace) -> f64 {
    graph::minimum_spanning_tree(x.matrix())
        .iter()
        .map(|e| e.2)
        .fold(0.0, f64::max)
}

/// Shortest-path (geodesic) distances in the threshold graph at `cap`.
pub fn geodesic_metric(
    x: &PseudometricSpace,
    cap: f64,
    policy: Disconnection,
) -> Result<PseudometricSpace> {
    Ok(geodesic_metric_counted(x, cap, policy)?.0)
}

/// As [`geodesic_metric`], also returning how many pairs were capped.
pub fn geodesic_metric_counted(
    x: &PseudometricSpace,
    cap: f64,
    policy: Disconnection,
) -> Result<(PseudometricSpace, usize)> {
    if !(cap >= 0.0) {
        return Err(Error::InvalidParameter(format!("geodesic cap {cap} must be >= 0")));
    }
    let mut sp = graph::capped_shortest_paths(x.matrix(), cap);
    let capped = resolve_infinite(&mut sp, policy, cap, x.diameter())?;
    Ok((PseudometricSpace::from_trusted(sp), capped))
}

/// `IsoCluster_δ`: maximal linkage over the geodesic metric, so that the
/// MDS loss of its membership matrix is the IsoMap objective.
pub fn iso_cluster(
    x: &PseudometricSpace,
    cap: f64,
    policy: Disconnection,
) -> Result<HierarchicalCover> {
    Ok(maximal_linkage(&geodesic_metric(x, cap, policy)?))
}

/// Output of [`fuzzy_simplex`].
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySimplex {
    pub cover: HierarchicalCover,
    pub membership: MembershipMatrix,
    /// Nearest-neighbour distance `ρ_i` of each point.
    pub rho: Vec<f64>,
}

/// Builds the local uber-metric around each point (distances from `i`
/// shifted down by its nearest-neighbour distance `ρ_i` and clamped at 0),
/// turns each into directed strengths `w_i(j) = e^{-max(0, d_ij - ρ_i)}`,
/// takes the probabilistic-sum fuzzy union
/// `W_ij = 1 - (1 - w_i(j))(1 - w_j(i))`, and flag-closes the strength
/// thresholds into a hierarchical cover.
pub fn fuzzy_simplex(x: &PseudometricSpace) -> Result<FuzzySimplex> {
    let n = x.n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "fuzzy simplex needs at least two points".into(),
        ));
    }
    let d = x.matrix();
    let rho: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&l| l != i)
                .map(|l| d[(i, l)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let directed = |i: usize, j: usize| libm::exp(-(d[(i, j)] - rho[i]).max(0.0));
    let w = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            1.0 - (1.0 - directed(i, j)) * (1.0 - directed(j, i))
        }
    });
    let scales = SquareMatrix::from_fn(n, |i, j| strength_to_scale(w[(i, j)]));
    Ok(FuzzySimplex {
        cover: clique_hierarchy(&scales),
        membership: MembershipMatrix::from_trusted(w),
        rho,
    })
}

/// `-ln a`, exactly 0 at `a = 1` and `+∞` at `a = 0`.
pub fn strength_to_scale(a: f64) -> f64 {
    if a >= 1.0 {
        0.0
    } else if a <= 0.0 {
        f64::INFINITY
    } else {
        -libm::log(a)
    }
}
