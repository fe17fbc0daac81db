//! Graph families used by experiments and tests.
//!
//! Every generator produces an undirected edge set and then assigns local
//! ports with a seeded shuffle, so the output is a pure function of
//! `(family, params, seed)`.

use std::fmt;
use std::str::FromStr;

use crate::graph::{GraphError, PortEdge, PortGraph};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Path { n: usize },
    Cycle { n: usize },
    Clique { n: usize },
    Grid { rows: usize, cols: usize },
    /// One center joined to `n - 1` leaves.
    Star { n: usize },
    /// Clique `K_a` plus path `u_1..u_b`, bridged from clique node `a - 1` to `u_1`.
    Lollipop { a: usize, b: usize },
    /// Uniform spanning tree plus `m - (n - 1)` distinct random extra edges.
    RandomConnected { n: usize, m: usize },
}

fn invalid(msg: impl Into<String>) -> GraphError {
    GraphError::InvalidParams(msg.into())
}

impl Family {
    fn validate(&self) -> Result<(), GraphError> {
        match *self {
            Family::Path { n } | Family::Clique { n } | Family::Star { n } if n == 0 => {
                Err(invalid("n must be at least 1"))
            }
            Family::Cycle { n } if n < 3 => Err(invalid("cycle needs n >= 3")),
            Family::Grid { rows, cols } if rows == 0 || cols == 0 => {
                Err(invalid("grid needs rows, cols >= 1"))
            }
            Family::Lollipop { a, b } if a == 0 || b == 0 => {
                Err(invalid("lollipop needs a, b >= 1"))
            }
            Family::RandomConnected { n, m } => {
                if n == 0 {
                    return Err(invalid("n must be at least 1"));
                }
                let max = n * (n - 1) / 2;
                if m + 1 < n || m > max {
                    return Err(invalid(format!(
                        "random_connected needs n-1 <= m <= n(n-1)/2, got n={n}, m={m}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            Family::Path { n }
            | Family::Cycle { n }
            | Family::Clique { n }
            | Family::Star { n }
            | Family::RandomConnected { n, .. } => n,
            Family::Grid { rows, cols } => rows * cols,
            Family::Lollipop { a, b } => a + b,
        }
    }

    fn edge_pairs(&self, rng: &mut RngStream) -> Vec<(usize, usize)> {
        match *self {
            Family::Path { n } => (1..n).map(|i| (i - 1, i)).collect(),
            Family::Cycle { n } => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Family::Clique { n } => clique_pairs(0, n),
            Family::Star { n } => (1..n).map(|i| (0, i)).collect(),
            Family::Grid { rows, cols } => {
                let id = |r: usize, c: usize| r * cols + c;
                let mut out = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        if c + 1 < cols {
                            out.push((id(r, c), id(r, c + 1)));
                        }
                        if r + 1 < rows {
                            out.push((id(r, c), id(r + 1, c)));
                        }
                    }
                }
                out
            }
            Family::Lollipop { a, b } => {
                let mut out = clique_pairs(0, a);
                out.push((a - 1, a));
                out.extend((a + 1..a + b).map(|i| (i - 1, i)));
                out
            }
            Family::RandomConnected { n, m } => random_connected_pairs(n, m, rng),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Path { n } => write!(f, "path,n={n}"),
            Family::Cycle { n } => write!(f, "cycle,n={n}"),
            Family::Clique { n } => write!(f, "clique,n={n}"),
            Family::Grid { rows, cols } => write!(f, "grid,rows={rows},cols={cols}"),
            Family::Star { n } => write!(f, "star,n={n}"),
            Family::Lollipop { a, b } => write!(f, "lollipop,a={a},b={b}"),
            Family::RandomConnected { n, m } => write!(f, "random_connected,n={n},m={m}"),
        }
    }
}

/// Parses `NAME,key=value,...`, e.g. `random_connected,n=32,m=64`.
impl FromStr for Family {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(',').map(str::trim);
        let name = parts.next().unwrap_or_default();
        let mut params: Vec<(&str, usize)> = Vec::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected key=value, got {p:?}")))?;
            let v = v
                .parse()
                .map_err(|_| invalid(format!("{k} must be a non-negative integer")))?;
            params.push((k, v));
        }
        let get = |key: &str| -> Result<usize, GraphError> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|&(_, v)| v)
                .ok_or_else(|| invalid(format!("{name} requires parameter {key}")))
        };
        let family = match name {
            "path" => Family::Path { n: get("n")? },
            "cycle" => Family::Cycle { n: get("n")? },
            "clique" => Family::Clique { n: get("n")? },
            "grid" => Family::Grid { rows: get("rows")?, cols: get("cols")? },
            "star" => Family::Star { n: get("n")? },
            "lollipop" => Family::Lollipop { a: get("a")?, b: get("b")? },
            "random_connected" => Family::RandomConnected { n: get("n")?, m: get("m")? },
            other => return Err(invalid(format!("unknown graph family {other:?}"))),
        };
        family.validate()?;
        Ok(family)
    }
}

fn clique_pairs(offset: usize, n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((offset + i, offset + j));
        }
    }
    out
}

/// Wilson's loop-erased walk on `K_n` gives a uniform spanning tree; the
/// remaining edges are a uniform subset of the non-tree pairs.
fn random_connected_pairs(n: usize, m: usize, rng: &mut RngStream) -> Vec<(usize, usize)> {
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    in_tree[rng.below_usize(n)] = true;
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for start in 0..n {
        let mut u = start;
        while !in_tree[u] {
            let mut w = rng.below_usize(n - 1);
            if w >= u {
                w += 1;
            }
            next[u] = w;
            u = w;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            tree.push((u.min(next[u]), u.max(next[u])));
            u = next[u];
        }
    }
    let mut is_tree = vec![false; n * n];
    for &(a, b) in &tree {
        is_tree[a * n + b] = true;
    }
    let mut rest: Vec<(usize, usize)> = clique_pairs(0, n)
        .into_iter()
        .filter(|&(a, b)| !is_tree[a * n + b])
        .collect();
    let extra = m - tree.len();
    for i in 0..extra {
        let j = i + rng.below_usize(rest.len() - i);
        rest.swap(i, j);
    }
    tree.extend_from_slice(&rest[..extra]);
    tree
}

/// Assigns ports by shuffling each node's incident edges.
pub fn assign_ports(
    n: usize,
    pairs: &[(usize, usize)],
    rng: &mut RngStream,
) -> Result<PortGraph, GraphError> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        incident[u].push(i);
        incident[v].push(i);
    }
    let mut port_of = vec![[usize::MAX; 2]; pairs.len()];
    for (v, list) in incident.iter_mut().enumerate() {
        rng.shuffle(list);
        for (port, &e) in list.iter().enumerate() {
            let side = usize::from(pairs[e].0 != v);
            port_of[e][side] = port;
        }
    }
    let edges: Vec<PortEdge> = pairs
        .iter()
        .zip(&port_of)
        .map(|(&(u, v), p)| PortEdge::new(u, p[0], v, p[1]))
        .collect();
    PortGraph::from_edges(n, &edges)
}

/// Ports numbered in edge-list order, no shuffling. Used for hand-built instances.
pub fn ordered_ports(n: usize, pairs: &[(usize, usize)]) -> Result<PortGraph, GraphError> {
    let mut next = vec![0usize; n];
    let mut edges = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        if u >= n || v >= n {
            return Err(GraphError::NodeOutOfRange { node: u.max(v), n });
        }
        edges.push(PortEdge::new(u, next[u], v, next[v]));
        next[u] += 1;
        next[v] += 1;
    }
    PortGraph::from_edges(n, &edges)
}

pub fn generate(family: &Family, seed: u64) -> Result<PortGraph, GraphError> {
    family.validate()?;
    let mut rng = RngStream::new(seed);
    let pairs = family.edge_pairs(&mut rng);
    assign_ports(family.node_count(), &pairs, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lollipop_six_six() {
        let g = generate(&Family::Lollipop { a: 6, b: 6 }, 3).unwrap();
        assert_eq!((g.n(), g.m()), (12, 21));
        assert_eq!(g.diameter(), 7);
        // clique node 0 is far from the path end
        assert_eq!(g.bfs_distances(0).into_iter().max(), Some(7));
    }

    #[test]
    fn small_families() {
        let p4 = generate(&Family::Path { n: 4 }, 0).unwrap();
        assert_eq!((p4.m(), p4.diameter()), (3, 3));
        let k5 = generate(&Family::Clique { n: 5 }, 0).unwrap();
        assert_eq!((k5.m(), k5.diameter()), (10, 1));
        let grid = generate(&Family::Grid { rows: 5, cols: 5 }, 0).unwrap();
        assert_eq!((grid.n(), grid.m(), grid.diameter()), (25, 40, 8));
        let star = generate(&Family::Star { n: 16 }, 0).unwrap();
        assert_eq!((star.m(), star.max_degree(), star.diameter()), (15, 15, 2));
        let c12 = generate(&Family::Cycle { n: 12 }, 0).unwrap();
        assert_eq!((c12.m(), c12.diameter()), (12, 6));
        let k1 = generate(&Family::Clique { n: 1 }, 0).unwrap();
        assert_eq!((k1.n(), k1.m()), (1, 0));
    }

    #[test]
    fn random_connected_hits_targets() {
        let g = generate(&Family::RandomConnected { n: 16, m: 32 }, 7).unwrap();
        assert_eq!((g.n(), g.m()), (16, 32));
        let tree = generate(&Family::RandomConnected { n: 10, m: 9 }, 1).unwrap();
        assert_eq!(tree.m(), 9);
        let full = generate(&Family::RandomConnected { n: 6, m: 15 }, 1).unwrap();
        assert_eq!(full.diameter(), 1);
    }

    #[test]
    fn rejects_bad_params() {
        for f in [
            Family::RandomConnected { n: 5, m: 3 },
            Family::RandomConnected { n: 5, m: 11 },
            Family::Cycle { n: 2 },
            Family::Path { n: 0 },
            Family::Lollipop { a: 0, b: 2 },
        ] {
            assert!(matches!(generate(&f, 0), Err(GraphError::InvalidParams(_))), "{f}");
        }
    }

    #[test]
    fn family_strings_round_trip() {
        let f: Family = "random_connected,n=32,m=64".parse().unwrap();
        assert_eq!(f, Family::RandomConnected { n: 32, m: 64 });
        assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        assert!("grid,rows=3".parse::<Family>().is_err());
        assert!("torus,n=3".parse::<Family>().is_err());
        assert!("path,n=x".parse::<Family>().is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let f = Family::RandomConnected { n: 20, m: 40 };
        assert_eq!(generate(&f, 5).unwrap().to_text(), generate(&f, 5).unwrap().to_text());
        assert_ne!(generate(&f, 5).unwrap().to_text(), generate(&f, 6).unwrap().to_text());
    }
}
