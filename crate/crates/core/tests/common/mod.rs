//! Brute-force oracles and random instance generators shared by the
//! integration suites.
#![allow(dead_code)]

use manifold_core::covers::{refines, HierarchicalCover};
use manifold_core::metric::PseudometricSpace;
use manifold_core::SquareMatrix;
use rand::Rng;

/// Random metric with off-diagonal entries in `[0.5, 1)`.
pub fn random_space<R: Rng>(rng: &mut R, n: usize) -> PseudometricSpace {
    let mut d = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(0.5..1.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    PseudometricSpace::from_matrix(&d, true).unwrap()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.gen_range(0.0..side), rng.gen_range(0.0..side)]).collect()
}

/// Moves every point by at most `radius` in a uniformly random direction.
pub fn jitter<R: Rng>(rng: &mut R, pts: &[Vec<f64>], radius: f64) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|p| {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = rng.gen_range(0.0..radius);
            vec![p[0] + r * t.cos(), p[1] + r * t.sin()]
        })
        .collect()
}

/// Minimax cost over every walk of at most `hops` edges.
pub fn brute_hop_minimax(d: &SquareMatrix, hops: usize) -> SquareMatrix {
    let n = d.n();
    let mut out = SquareMatrix::filled(n, f64::INFINITY);
    fn walk(d: &SquareMatrix, start: usize, at: usize, left: usize, worst: f64, out: &mut SquareMatrix) {
        if worst < out[(start, at)] {
            out[(start, at)] = worst;
        }
        if left == 0 {
            return;
        }
        for next in 0..d.n() {
            if next != at {
                walk(d, start, next, left - 1, worst.max(d[(at, next)]), out);
            }
        }
    }
    for s in 0..n {
        walk(d, s, s, hops, 0.0, &mut out);
    }
    out
}

/// Minimax over every path (no hop bound).
pub fn brute_bottleneck(d: &SquareMatrix) -> SquareMatrix {
    brute_hop_minimax(d, d.n().saturating_sub(1))
}

fn connected(adj: &dyn Fn(usize, usize) -> bool, set: &[usize]) -> bool {
    if set.is_empty() {
        return true;
    }
    let mut seen = vec![set[0]];
    let mut stack = vec![set[0]];
    while let Some(u) = stack.pop() {
        for &v in set {
            if !seen.contains(&v) && adj(u, v) {
                seen.push(v);
                stack.push(v);
            }
        }
    }
    seen.len() == set.len()
}

/// Definition check: `set` is a clique, or stays connected after deleting
/// any fewer than `k` of its vertices.
pub fn brute_k_connected(adj: &dyn Fn(usize, usize) -> bool, set: &[usize], k: usize) -> bool {
    let clique = set.iter().enumerate().all(|(a, &u)| set[a + 1..].iter().all(|&v| adj(u, v)));
    if set.len() <= 1 || clique {
        return true;
    }
    let s = set.len();
    (0u32..(1 << s)).filter(|m| (m.count_ones() as usize) < k).all(|m| {
        let rest: Vec<usize> = (0..s).filter(|b| m & (1 << b) == 0).map(|b| set[b]).collect();
        connected(adj, &rest)
    })
}

/// Smallest scale at which `i, j` share a `min(n, k)`-connected induced
/// subgraph of the threshold graph, by enumerating every vertex subset.
pub fn brute_vl_k_targets(d: &SquareMatrix, k: usize) -> SquareMatrix {
    let n = d.n();
    let kk = k.min(n);
    let mut scales: Vec<f64> = d.as_slice().to_vec();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    let mut out = SquareMatrix::filled(n, f64::INFINITY);
    for i in 0..n {
        out[(i, i)] = 0.0;
    }
    for &s in &scales {
        let adj = |u: usize, v: usize| d[(u, v)] <= s;
        for mask in 1u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).collect();
            if set.len() < 2 || !brute_k_connected(&adj, &set, kk) {
                continue;
            }
            for &u in &set {
                for &v in &set {
                    if u != v && out[(u, v)] > s {
                        out[(u, v)] = s;
                    }
                }
            }
        }
    }
    out
}

/// Every critical scale of any of the covers.
pub fn all_scales(covers: &[&HierarchicalCover]) -> Vec<f64> {
    let mut s: Vec<f64> = covers.iter().flat_map(|h| h.scales().iter().copied()).collect();
    s.push(0.0);
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

/// `fine(δ)` refines `coarse(δ)` at every critical scale of either cover.
pub fn refines_everywhere(fine: &HierarchicalCover, coarse: &HierarchicalCover) -> bool {
    all_scales(&[fine, coarse])
        .into_iter()
        .all(|s| refines(fine.cover_at(s), coarse.cover_at(s)).unwrap())
}

/// Step-function check of an `eps`-interleaving in both directions. The
/// coarse side only grows with scale, so probing the left end of every
/// interval of the fine side suffices.
pub fn brute_interleaves(h1: &HierarchicalCover, h2: &HierarchicalCover, eps: f64) -> bool {
    let one_way = |a: &HierarchicalCover, b: &HierarchicalCover| {
        a.scales()
            .iter()
            .copied()
            .chain([0.0])
            .all(|s| refines(a.cover_at(s), b.cover_at(s + eps)).unwrap())
    };
    one_way(h1, h2) && one_way(h2, h1)
}
