//! Graph primitives shared by the clustering functors: threshold graphs,
//! components, minimum spanning trees, maximal cliques, vertex connectivity
//! and path-based distances.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::SquareMatrix;

/// Undirected simple graph on `0..n` with a dense adjacency matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: vec![false; n * n],
        }
    }

    /// The threshold (Vietoris–Rips 1-skeleton) graph: an edge joins `i != j`
    /// whenever `d[i][j] <= scale`.
    pub fn threshold(d: &SquareMatrix, scale: f64) -> Self {
        let n = d.n();
        let mut g = Graph::empty(n);
        for (i, j, v) in d.upper_pairs() {
            if v <= scale {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adj[i * self.n + j] = true;
            self.adj[j * self.n + i] = true;
        }
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count() / 2
    }

    /// Whether the vertices of `set` are pairwise adjacent.
    pub fn is_clique(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(a, &u)| set[a + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    /// Connected components, each sorted, ordered by smallest element.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let all: Vec<usize> = (0..self.n).collect();
        self.components_within(&all)
    }

    /// Connected components of the subgraph induced on `set`.
    pub fn components_within(&self, set: &[usize]) -> Vec<Vec<usize>> {
        let mut inside = vec![false; self.n];
        for &v in set {
            inside[v] = true;
        }
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for &start in set {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in 0..self.n {
                    if inside[v] && !seen[v] && self.has_edge(u, v) {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out.sort();
        out
    }

    /// All maximal cliques (Bron–Kerbosch with pivoting), each sorted, in
    /// lexicographic order. Isolated vertices are singleton cliques.
    ///
    /// Worst case is exponential in `n`.
    pub fn maximal_cliques(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut r = Vec::new();
        let p: Vec<usize> = (0..self.n).collect();
        self.bron_kerbosch(&mut r, p, Vec::new(), &mut out);
        for c in &mut out {
            c.sort_unstable();
        }
        out.sort();
        out
    }

    fn bron_kerbosch(
        &self,
        r: &mut Vec<usize>,
        p: Vec<usize>,
        mut x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() {
            if x.is_empty() {
                out.push(r.clone());
            }
            return;
        }
        // pivot: vertex of P ∪ X with the most neighbours in P
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| (p.iter().filter(|&&v| self.has_edge(u, v)).count(), usize::MAX - u))
            .unwrap();
        let candidates: Vec<usize> = p
            .iter()
            .copied()
            .filter(|&v| !self.has_edge(pivot, v))
            .collect();
        let mut p = p;
        for v in candidates {
            let next_p: Vec<usize> = p.iter().copied().filter(|&w| self.has_edge(v, w)).collect();
            let next_x: Vec<usize> = x.iter().copied().filter(|&w| self.has_edge(v, w)).collect();
            r.push(v);
            self.bron_kerbosch(r, next_p, next_x, out);
            r.pop();
            p.retain(|&w| w != v);
            x.push(v);
        }
    }

    /// Minimum vertex separator between non-adjacent `s` and `t` inside the
    /// subgraph induced on `set` (Menger: max-flow on the vertex-split graph
    /// with unit vertex capacities). Returns the sorted cut closest to `s`.
    pub fn min_vertex_cut(&self, set: &[usize], s: usize, t: usize) -> Vec<usize> {
        debug_assert!(s != t && !self.has_edge(s, t));
        let k = set.len();
        let mut local = vec![usize::MAX; self.n];
        for (idx, &v) in set.iter().enumerate() {
            local[v] = idx;
        }
        // node 2*idx = in, 2*idx+1 = out
        let nodes = 2 * k;
        let mut net = FlowNetwork::new(nodes);
        let big = k as i64 + 1;
        for (idx, &v) in set.iter().enumerate() {
            let cap = if v == s || v == t { big } else { 1 };
            net.add_edge(2 * idx, 2 * idx + 1, cap);
            for &w in set {
                if w != v && self.has_edge(v, w) {
                    net.add_edge(2 * idx + 1, 2 * local[w], big);
                }
            }
        }
        let source = 2 * local[s] + 1;
        let sink = 2 * local[t];
        net.max_flow(source, sink);
        let reach = net.residual_reachable(source);
        let mut cut: Vec<usize> = set
            .iter()
            .enumerate()
            .filter(|&(idx, &v)| v != s && v != t && reach[2 * idx] && !reach[2 * idx + 1])
            .map(|(_, &v)| v)
            .collect();
        cut.sort_unstable();
        cut
    }

    /// Whether the subgraph induced on `set` is `k`-vertex-connected: it stays
    /// connected after removing any fewer than `k` of its vertices. Complete
    /// subgraphs (including single vertices) count as `k`-connected for every
    /// `k`.
    pub fn is_k_connected(&self, set: &[usize], k: usize) -> bool {
        self.separating_cut(set, k).is_none()
    }

    /// A vertex cut of size `< k` separating the induced subgraph on `set`
    /// (the empty cut when it is disconnected), choosing among minimum cuts
    /// the lexicographically smallest; `None` if `set` is `k`-connected.
    fn separating_cut(&self, set: &[usize], k: usize) -> Option<Vec<usize>> {
        if set.len() <= 1 {
            return None;
        }
        if self.components_within(set).len() > 1 {
            return Some(Vec::new());
        }
        if k <= 1 || self.is_clique(set) {
            return None;
        }
        let mut best: Option<Vec<usize>> = None;
        for (a, &u) in set.iter().enumerate() {
            for &v in &set[a + 1..] {
                if self.has_edge(u, v) {
                    continue;
                }
                let cut = self.min_vertex_cut(set, u, v);
                let better = match &best {
                    None => true,
                    Some(b) => cut.len() < b.len() || (cut.len() == b.len() && cut < *b),
                };
                if better {
                    best = Some(cut);
                }
            }
        }
        best.filter(|c| c.len() < k)
    }

    /// Vertex sets of the maximal `k`-vertex-connected induced subgraphs,
    /// found by recursively splitting along minimum vertex cuts of size `< k`.
    /// Sorted sets in lexicographic order; every vertex appears in some set.
    pub fn maximal_k_connected(&self, k: usize) -> Vec<Vec<usize>> {
        let all: Vec<usize> = (0..self.n).collect();
        let mut found = Vec::new();
        self.split_k_connected(all, k, &mut found);
        keep_maximal(found)
    }

    fn split_k_connected(&self, set: Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        match self.separating_cut(&set, k) {
            None => out.push(set),
            Some(cut) => {
                let rest: Vec<usize> = set.iter().copied().filter(|v| !cut.contains(v)).collect();
                for comp in self.components_within(&rest) {
                    let mut part = comp;
                    part.extend_from_slice(&cut);
                    part.sort_unstable();
                    self.split_k_connected(part, k, out);
                }
            }
        }
    }
}

/// Drops sets contained in other sets and duplicates; sorts the rest.
pub(crate) fn keep_maximal(mut sets: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    sets.sort();
    sets.dedup();
    let keep: Vec<bool> = sets
        .iter()
        .enumerate()
        .map(|(a, s)| {
            !sets
                .iter()
                .enumerate()
                .any(|(b, t)| a != b && t.len() > s.len() && is_subset(s, t))
        })
        .collect();
    sets.into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

/// `a ⊆ b` for sorted slices.
pub(crate) fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: i64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0);
    }

    /// Edmonds–Karp.
    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut flow = 0;
        loop {
            let mut prev_edge = vec![usize::MAX; self.head.len()];
            let mut visited = vec![false; self.head.len()];
            visited[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if !visited[v] && self.cap[e] > 0 {
                        visited[v] = true;
                        prev_edge[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !visited[t] {
                return flow;
            }
            let mut bottleneck = i64::MAX;
            let mut v = t;
            while v != s {
                let e = prev_edge[v];
                bottleneck = bottleneck.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = prev_edge[v];
                self.cap[e] -= bottleneck;
                self.cap[e ^ 1] += bottleneck;
                v = self.to[e ^ 1];
            }
            flow += bottleneck;
        }
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if !seen[v] && self.cap[e] > 0 {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `false` if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// A weighted tree edge `(u, v, w)` with `u < v`.
pub type Edge = (usize, usize, f64);

/// Minimum spanning tree by Prim's algorithm on the dense matrix, `O(n²)`.
/// Ties prefer the smaller `(u, v)` index pair. Edges are returned in the
/// order they join the tree.
pub fn minimum_spanning_tree(d: &SquareMatrix) -> Vec<Edge> {
    let n = d.n();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = d[(0, v)];
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            if pick == usize::MAX {
                pick = v;
                continue;
            }
            let key = |x: usize| {
                let (a, b) = if parent[x] < x { (parent[x], x) } else { (x, parent[x]) };
                (best[x], a, b)
            };
            let (bv, av, cv) = key(v);
            let (bp, ap, cp) = key(pick);
            if bv < bp || (bv == bp && (av, cv) < (ap, cp)) {
                pick = v;
            }
        }
        in_tree[pick] = true;
        let u = parent[pick];
        edges.push((u.min(pick), u.max(pick), best[pick]));
        for v in 0..n {
            if !in_tree[v] {
                let w = d[(pick, v)];
                let (a, b) = (pick.min(v), pick.max(v));
                let (pa, pb) = (parent[v].min(v), parent[v].max(v));
                if w < best[v] || (w == best[v] && (a, b) < (pa, pb)) {
                    best[v] = w;
                    parent[v] = pick;
                }
            }
        }
    }
    edges
}

/// Minimax (bottleneck) path distances: the least `δ` such that `i` and `j`
/// are joined by a path whose every edge has length `<= δ`. Computed along
/// the minimum spanning tree in `O(n²)`.
pub fn bottleneck_distances(d: &SquareMatrix) -> SquareMatrix {
    let n = d.n();
    let mut tree: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (u, v, w) in minimum_spanning_tree(d) {
        tree[u].push((v, w));
        tree[v].push((u, w));
    }
    let mut out = SquareMatrix::zeros(n);
    let mut stack = Vec::new();
    let mut seen = vec![false; n];
    for src in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        seen[src] = true;
        stack.push(src);
        while let Some(u) = stack.pop() {
            let bu = out[(src, u)];
            for &(v, w) in &tree[u] {
                if !seen[v] {
                    seen[v] = true;
                    out[(src, v)] = bu.max(w);
                    stack.push(v);
                }
            }
        }
    }
    out
}

/// Hop-bounded minimax distances: the least `δ` such that `i` and `j` are
/// joined by a path of at most `hops` edges, each of length `<= δ`.
/// `hops == 0` leaves only the diagonal finite.
pub fn hop_bounded_minimax(d: &SquareMatrix, hops: usize) -> SquareMatrix {
    let n = d.n();
    if hops == 0 {
        return SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { f64::INFINITY });
    }
    let hops = hops.min(n.saturating_sub(1).max(1));
    let mut cur = SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { d[(i, j)] });
    for _ in 1..hops {
        let mut next = cur.clone();
        for i in 0..n {
            for j in 0..n {
                let mut best = next[(i, j)];
                for l in 0..n {
                    let via = cur[(i, l)].max(d[(l, j)]);
                    if via < best {
                        best = via;
                    }
                }
                next[(i, j)] = best;
            }
        }
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// All-pairs shortest path lengths (Floyd–Warshall) in the graph with an
/// edge of length `d[i][j]` wherever `d[i][j] <= cap`; unreachable pairs are
/// `+∞`.
pub fn capped_shortest_paths(d: &SquareMatrix, cap: f64) -> SquareMatrix {
    let n = d.n();
    let mut sp = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else if d[(i, j)] <= cap {
            d[(i, j)]
        } else {
            f64::INFINITY
        }
    });
    for k in 0..n {
        for i in 0..n {
            let dik = sp[(i, k)];
            if dik == f64::INFINITY {
                continue;
            }
            for j in 0..n {
                let via = dik + sp[(k, j)];
                if via < sp[(i, j)] {
                    sp[(i, j)] = via;
                }
            }
        }
    }
    sp
}
