//! Port-numbered anonymous graphs.
//!
//! Every node `v` labels its incident edges with local ports `0..deg(v)`.
//! The two endpoints of an edge label it independently, so a [`PortGraph`]
//! stores, for each `(v, q)`, both the neighbor and the neighbor's port back
//! to `v`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while building, parsing or querying a [`PortGraph`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("port {port} used twice at node {node}")]
    DuplicatePort { node: usize, port: usize },
    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },
    #[error("repeated edge between {u} and {v}")]
    MultiEdge { u: usize, v: usize },
    #[error("ports at node {node} are not exactly 0..{degree}")]
    PortGap { node: usize, degree: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("start node {node} is in the excluded set")]
    StartExcluded { node: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One edge as written in the text format: `u pu v pv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PortEdge {
    pub u: usize,
    pub pu: usize,
    pub v: usize,
    pub pv: usize,
}

impl PortEdge {
    pub fn new(u: usize, pu: usize, v: usize, pv: usize) -> Self {
        PortEdge { u, pu, v, pv }
    }
}

/// Simple connected graph with a local port numbering at every node.
///
/// Immutable after construction; `adj[v][q] = (u, q')` means the `q`-th
/// neighbor of `v` is `u`, and `u` reaches `v` through its port `q'`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortGraph {
    adj: Vec<Vec<(usize, usize)>>,
    m: usize,
}

impl PortGraph {
    /// Builds a graph from explicit port-labelled edges, enforcing
    /// reciprocity, contiguous ports, simplicity and connectivity.
    pub fn from_edges(n: usize, edges: &[PortEdge]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::InvalidParams(
                "graph must have at least one node".into(),
            ));
        }
        let mut slots: Vec<Vec<Option<(usize, usize)>>> = vec![Vec::new(); n];
        for e in edges {
            for node in [e.u, e.v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if e.u == e.v {
                return Err(GraphError::SelfLoop { node: e.u });
            }
            for (node, port, other, back) in [(e.u, e.pu, e.v, e.pv), (e.v, e.pv, e.u, e.pu)] {
                let row = &mut slots[node];
                if row.len() <= port {
                    row.resize(port + 1, None);
                }
                if row[port].is_some() {
                    return Err(GraphError::DuplicatePort { node, port });
                }
                row[port] = Some((other, back));
            }
        }
        let mut adj = Vec::with_capacity(n);
        for (node, row) in slots.into_iter().enumerate() {
            let degree = row.iter().filter(|s| s.is_some()).count();
            let filled: Option<Vec<_>> = row.into_iter().collect();
            let Some(filled) = filled else {
                return Err(GraphError::PortGap { node, degree });
            };
            let mut seen: Vec<usize> = filled.iter().map(|&(u, _)| u).collect();
            seen.sort_unstable();
            if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::MultiEdge { u: node.min(w[0]), v: node.max(w[0]) });
            }
            adj.push(filled);
        }
        let g = PortGraph { adj, m: edges.len() };
        if g.bfs_distances(0).contains(&usize::MAX) {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `N(v, q)` together with the reciprocal port at the neighbor.
    #[inline]
    pub fn neighbor(&self, v: usize, q: usize) -> (usize, usize) {
        self.adj[v][q]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&(u, _)| u)
    }

    /// Port at `v` leading to `u`, if they are adjacent.
    pub fn port_to(&self, v: usize, u: usize) -> Option<usize> {
        self.adj[v].iter().position(|&(w, _)| w == u)
    }

    /// Every edge once, listed from its lower-numbered endpoint in port order.
    pub fn edges(&self) -> Vec<PortEdge> {
        let mut out = Vec::with_capacity(self.m);
        for (u, row) in self.adj.iter().enumerate() {
            for (pu, &(v, pv)) in row.iter().enumerate() {
                if u < v {
                    out.push(PortEdge { u, pu, v, pv });
                }
            }
        }
        out
    }

    /// Hop distances from `src`; unreachable nodes get `usize::MAX`.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            for u in self.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, v: usize) -> usize {
        self.bfs_distances(v).into_iter().max().unwrap_or(0)
    }

    /// Maximum eccentricity, one BFS per node.
    pub fn diameter(&self) -> usize {
        (0..self.n()).map(|v| self.eccentricity(v)).max().unwrap_or(0)
    }

    /// Nodes within `radius` hops of `v`.
    pub fn ball(&self, v: usize, radius: usize) -> NodeSet {
        let mut set = NodeSet::new(self.n());
        for (u, d) in self.bfs_distances(v).into_iter().enumerate() {
            if d <= radius {
                set.insert(u);
            }
        }
        set
    }

    /// Connected component of `start` in the subgraph induced by the nodes
    /// outside `excluded`.
    pub fn component_excluding(
        &self,
        start: usize,
        excluded: &NodeSet,
    ) -> Result<NodeSet, GraphError> {
        if excluded.contains(start) {
            return Err(GraphError::StartExcluded { node: start });
        }
        let mut seen = NodeSet::new(self.n());
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if !excluded.contains(u) && seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        Ok(seen)
    }

    /// `set` together with every neighbor of a member.
    pub fn closed_neighborhood(&self, set: &NodeSet) -> NodeSet {
        let mut out = set.clone();
        for v in set.iter() {
            for u in self.neighbors(v) {
                out.insert(u);
            }
        }
        out
    }

    /// Serializes to the line-oriented text format (`n m`, then `u pu v pv`).
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n(), self.m());
        for e in self.edges() {
            s.push_str(&format!("{} {} {} {}\n", e.u, e.pu, e.v, e.pv));
        }
        s
    }
}

impl fmt::Display for PortGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_fields<const N: usize>(line: &str, lineno: usize) -> Result<[usize; N], GraphError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != N {
        return Err(GraphError::Parse {
            line: lineno,
            msg: format!("expected {N} fields, found {}", parts.len()),
        });
    }
    let mut out = [0usize; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| GraphError::Parse {
            line: lineno,
            msg: format!("not a non-negative integer: {p:?}"),
        })?;
    }
    Ok(out)
}

impl FromStr for PortGraph {
    type Err = GraphError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (lineno, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let [n, m] = parse_fields::<2>(header, lineno)?;
        let mut edges = Vec::with_capacity(m);
        for (lineno, line) in lines {
            let [u, pu, v, pv] = parse_fields::<4>(line, lineno)?;
            edges.push(PortEdge { u, pu, v, pv });
        }
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        PortGraph::from_edges(n, &edges)
    }
}

/// Membership bitset over the nodes `0..n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NodeSet {
    words: Vec<u64>,
    n: usize,
}

impl NodeSet {
    pub fn new(n: usize) -> Self {
        NodeSet { words: vec![0; n.div_ceil(64)], n }
    }

    pub fn full(n: usize) -> Self {
        let mut s = NodeSet::new(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    pub fn from_nodes(n: usize, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut s = NodeSet::new(n);
        for v in nodes {
            s.insert(v);
        }
        s
    }

    /// Size of the universe, not the number of members.
    pub fn universe(&self) -> usize {
        self.n
    }

    /// Returns `true` if `v` was newly added.
    #[inline]
    pub fn insert(&mut self, v: usize) -> bool {
        assert!(v < self.n, "node {v} outside universe of {}", self.n);
        let (w, b) = (v / 64, v % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, v: usize) -> bool {
        let (w, b) = (v / 64, v % 64);
        let had = v < self.n && self.words[w] & (1 << b) != 0;
        if had {
            self.words[w] &= !(1 << b);
        }
        had
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        v < self.n && self.words[v / 64] & (1 << (v % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.contains(v))
    }

    pub fn is_superset(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| b & !a == 0)
    }

    /// Members of `self` missing from `other`.
    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a & !b)
            .collect();
        NodeSet { words, n: self.n }
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> PortGraph {
        PortGraph::from_edges(3, &[PortEdge::new(0, 0, 1, 0), PortEdge::new(1, 1, 2, 0)]).unwrap()
    }

    fn c3() -> PortGraph {
        PortGraph::from_edges(
            3,
            &[
                PortEdge::new(0, 0, 1, 0),
                PortEdge::new(1, 1, 2, 0),
                PortEdge::new(2, 1, 0, 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn builds_path_and_triangle() {
        let g = p3();
        assert_eq!((g.n(), g.m()), (3, 2));
        assert_eq!((0..3).map(|v| g.degree(v)).collect::<Vec<_>>(), vec![1, 2, 1]);
        assert_eq!(g.neighbor(1, 1), (2, 0));
        let t = c3();
        assert_eq!(t.m(), 3);
        assert_eq!(t.neighbor(0, 1), (2, 1));
        assert_eq!(t.diameter(), 1);
    }

    #[test]
    fn rejects_malformed_edge_lists() {
        let multi = PortGraph::from_edges(2, &[PortEdge::new(0, 0, 1, 0), PortEdge::new(0, 1, 1, 1)]);
        assert_eq!(multi, Err(GraphError::MultiEdge { u: 0, v: 1 }));
        let dup = PortGraph::from_edges(3, &[PortEdge::new(0, 0, 1, 0), PortEdge::new(0, 0, 2, 0)]);
        assert_eq!(dup, Err(GraphError::DuplicatePort { node: 0, port: 0 }));
        let lp = PortGraph::from_edges(2, &[PortEdge::new(1, 0, 1, 1)]);
        assert_eq!(lp, Err(GraphError::SelfLoop { node: 1 }));
        let gap = PortGraph::from_edges(2, &[PortEdge::new(0, 1, 1, 0)]);
        assert!(matches!(gap, Err(GraphError::PortGap { node: 0, .. })));
        let split = PortGraph::from_edges(4, &[PortEdge::new(0, 0, 1, 0), PortEdge::new(2, 0, 3, 0)]);
        assert_eq!(split, Err(GraphError::Disconnected));
        let range = PortGraph::from_edges(2, &[PortEdge::new(0, 0, 5, 0)]);
        assert!(matches!(range, Err(GraphError::NodeOutOfRange { node: 5, .. })));
    }

    #[test]
    fn distances_on_small_graphs() {
        assert_eq!(p3().bfs_distances(0), vec![0, 1, 2]);
        assert_eq!(c3().bfs_distances(1), vec![1, 0, 1]);
        assert_eq!(p3().diameter(), 2);
    }

    #[test]
    fn component_excluding_cases() {
        let g = p3();
        let none = NodeSet::new(3);
        assert_eq!(g.component_excluding(0, &none).unwrap(), NodeSet::full(3));
        let mid = NodeSet::from_nodes(3, [1]);
        assert_eq!(g.component_excluding(0, &mid).unwrap(), NodeSet::from_nodes(3, [0]));
        let t = c3();
        let zero = NodeSet::from_nodes(3, [0]);
        assert_eq!(t.component_excluding(2, &zero).unwrap(), NodeSet::from_nodes(3, [1, 2]));
        assert_eq!(
            t.component_excluding(0, &zero),
            Err(GraphError::StartExcluded { node: 0 })
        );
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let g = c3();
        let back: PortGraph = g.to_text().parse().unwrap();
        assert_eq!(back, g);
        assert!(matches!("3 2\n0 0 1 0\n".parse::<PortGraph>(), Err(GraphError::Parse { .. })));
        assert!(matches!("2 1\n0 0 x 0\n".parse::<PortGraph>(), Err(GraphError::Parse { .. })));
        assert_eq!("2 1\n0 0 0 1\n".parse::<PortGraph>(), Err(GraphError::SelfLoop { node: 0 }));
    }

    #[test]
    fn nodeset_basics() {
        let mut s = NodeSet::new(130);
        assert!(s.insert(129));
        assert!(!s.insert(129));
        assert!(s.insert(3));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 129]);
        assert_eq!(s.len(), 2);
        assert!(NodeSet::full(130).is_superset(&s));
        assert!(s.remove(3));
        assert!(!s.contains(3));
        assert_eq!(NodeSet::full(130).difference(&s).len(), 129);
    }
}
