//! Worst-case constructions: the lollipop coloring that defeats a
//! deterministic color choice, a consistent but misleading BFS tree, and
//! the edge-splitting gadget that forces a cover-time lower bound.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::det::{Color, DetAgent, DetBoard, DetPc, DetSpec, Dir};
use crate::generate::ordered_ports;
use crate::graph::{GraphError, PortEdge, PortGraph};
use crate::ran::{RanAgent, RanBoard, RanPc, RanSpec};
use crate::rng::{trial_seed, RngStream};
use crate::sim::{run, sample_config_at, Algorithm, Configuration, RunOptions, SimError};

pub const MIN_TRIALS: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{trials} trials requested, at least {MIN_TRIALS} needed")]
    TrialsTooFew { trials: u64 },
    #[error("gadget disconnected the graph")]
    Disconnected,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The other color when only two exist.
fn other(color: u32) -> u32 {
    3 - color
}

/// Colors the two-color DFT adopts at its first `len` DFT starts, given
/// its current color.
pub fn deterministic_color_sequence(initial: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    let mut c = initial;
    for _ in 0..len {
        c = other(c);
        out.push(c);
    }
    out
}

/// Lollipop with clique `0..a` and path `a..a+b` (node `a - 1 + i` is the
/// `i`-th path node), ports in edge-list order.
pub fn lollipop_ordered(a: usize, b: usize) -> Result<PortGraph, GraphError> {
    if a < 2 || b < 1 {
        return Err(GraphError::InvalidParams("lollipop needs a >= 2 and b >= 1".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..a {
        for j in i + 1..a {
            pairs.push((i, j));
        }
    }
    pairs.push((a - 1, a));
    for i in a..a + b - 1 {
        pairs.push((i, i + 1));
    }
    ordered_ports(a + b, &pairs)
}

/// Initial color of the agent in [`lollipop_adversarial_config`].
pub const LOLLIPOP_AGENT_COLOR: u32 = 1;

/// Lollipop instance for the two-color DFT: path node `u_i` carries
/// `color_seq[i - 1]`, the clique carries the agent's color with every
/// parent pointer cleared (as right after a finished DFT), and the agent
/// sits at clique node 0 about to start its next DFT.
pub fn lollipop_adversarial_config(
    a: usize,
    b: usize,
    color_seq: &[u32],
) -> Result<(PortGraph, Configuration<RanSpec>), AdversaryError> {
    if color_seq.len() != b {
        return Err(AdversaryError::InvalidParams(format!(
            "color sequence has {} entries for a path of {b}",
            color_seq.len()
        )));
    }
    if let Some(c) = color_seq.iter().find(|c| !(1..=2).contains(*c)) {
        return Err(AdversaryError::InvalidParams(format!("color {c} outside 1..=2")));
    }
    let g = lollipop_ordered(a, b)?;
    let mut boards = vec![RanBoard { parent: None, clr: LOLLIPOP_AGENT_COLOR }; a];
    boards.extend(color_seq.iter().map(|&clr| RanBoard { parent: None, clr }));
    let cfg = Configuration {
        pos: 0,
        in_port: g.degree(0) - 1,
        agent: RanAgent { clr: LOLLIPOP_AGENT_COLOR, pc: RanPc::LoopHead },
        boards,
    };
    Ok((g, cfg))
}

/// The lollipop instance whose path colors anticipate the agent's colors.
pub fn lollipop_worst_case(
    a: usize,
    b: usize,
) -> Result<(PortGraph, Configuration<RanSpec>), AdversaryError> {
    lollipop_adversarial_config(a, b, &deterministic_color_sequence(LOLLIPOP_AGENT_COLOR, b))
}

/// Hub `v_0` joined to `v_1..v_{n-2}` plus the path `v_1 - ... - v_{n-1}`
/// (diameter 3), with whiteboards holding the chain tree
/// `v_3 -> v_2 -> v_1 -> v_0` rooted at `v_0`. The agent is back at the root
/// at the end of phase 2, so its next move starts phase 3.
pub fn stale_tree_config(n: usize) -> Result<(PortGraph, Configuration<DetSpec>), AdversaryError> {
    if n < 5 {
        return Err(AdversaryError::InvalidParams("the tree instance needs n >= 5".into()));
    }
    let mut pairs: Vec<(usize, usize)> = (1..=n - 2).map(|i| (0, i)).collect();
    pairs.extend((1..n - 1).map(|i| (i, i + 1)));
    let g = ordered_ports(n, &pairs)?;
    let port = |v: usize, u: usize| g.port_to(v, u).expect("edge exists");
    let bit = |q: usize| 1u64 << q;
    let mut boards: Vec<DetBoard> = (0..n)
        .map(|_| DetBoard { parent: 0, child: 0, clr: Color::B, dist: 0, port: 0 })
        .collect();
    boards[0].child = bit(port(0, 1));
    for (v, b) in boards.iter_mut().enumerate().take(4).skip(1) {
        b.parent = port(v, v - 1);
        b.dist = v as u32;
        if v < 3 {
            b.child = bit(port(v, v + 1));
        }
    }
    let cfg = Configuration {
        pos: 0,
        in_port: port(0, 1),
        agent: DetAgent {
            phase: 2,
            dist: 1,
            stage: 5,
            error: false,
            found: true,
            pc: DetPc::MoveArrived(Dir::Up),
        },
        boards,
    };
    Ok((g, cfg))
}

/// `k` used with [`stale_tree_config`]: large enough that no wrap interferes.
pub fn stale_tree_k(n: usize) -> u32 {
    n as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardInstance {
    #[serde(skip)]
    pub graph: PortGraph,
    pub start: usize,
    pub removed_edge: (usize, usize),
    pub new_node: usize,
    pub est_traverse_prob: f64,
    /// Truncation length `floor((m - 1) / 2)` of the estimating runs, `m`
    /// counted on the output graph.
    pub horizon: u64,
    pub trials: u64,
}

/// Monte-Carlo estimate, per edge of `g.edges()`, of the probability that
/// a run of `horizon` moves from `init` crosses the edge.
pub fn edge_traverse_estimates<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    init: &Configuration<A>,
    horizon: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<f64>, AdversaryError> {
    let edges = g.edges();
    if horizon == 0 {
        return Ok(vec![0.0; edges.len()]);
    }
    let mut index = vec![Vec::new(); g.n()];
    for (i, e) in edges.iter().enumerate() {
        index[e.u].push((e.pu, i));
        index[e.v].push((e.pv, i));
    }
    let edge_of = |v: usize, q: usize| {
        index[v].iter().find(|(p, _)| *p == q).map(|(_, i)| *i).expect("port exists")
    };
    let opts = RunOptions { max_steps: horizon, record_events: true, post_cover_steps: horizon };
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>, AdversaryError> {
            let res = run(spec, g, init, &opts, trial_seed(seed, t))?;
            let mut hit = vec![0u64; edges.len()];
            for ev in &res.events {
                if let crate::sim::Event::Move(rec) = ev {
                    hit[edge_of(rec.from, rec.out_port)] = 1;
                }
            }
            Ok(hit)
        })
        .try_reduce(
            || vec![0u64; edges.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts.into_iter().map(|c| c as f64 / trials as f64).collect())
}

/// Replaces edge `{u, v}` by the path `u - w - v` through a new node `w`.
/// `u` and `v` reuse the freed ports for `w`, so every degree except `w`'s
/// is unchanged; `w` reaches `u` via port 0 and `v` via port 1.
pub fn split_edge(g: &PortGraph, edge: PortEdge) -> Result<PortGraph, AdversaryError> {
    let w = g.n();
    let mut edges: Vec<PortEdge> = g
        .edges()
        .into_iter()
        .filter(|e| !(e.u == edge.u && e.pu == edge.pu))
        .collect();
    if edges.len() + 1 != g.m() {
        return Err(AdversaryError::InvalidParams(format!(
            "edge {}-{} is not in the graph",
            edge.u, edge.v
        )));
    }
    edges.push(PortEdge::new(edge.u, edge.pu, w, 0));
    edges.push(PortEdge::new(edge.v, edge.pv, w, 1));
    PortGraph::from_edges(w + 1, &edges).map_err(|e| match e {
        GraphError::Disconnected => AdversaryError::Disconnected,
        other => other.into(),
    })
}

/// The fixed initial configuration at `start` used by the construction.
pub fn hard_instance_init<A: Algorithm>(
    spec: &A,
    g: &PortGraph,
    start: usize,
    seed: u64,
) -> Configuration<A> {
    let mut rng = RngStream::new(seed);
    sample_config_at(spec, g, start, &mut rng)
}

/// Carries a configuration of the base graph over to the gadget graph;
/// the new node's whiteboard is drawn from `seed`.
pub fn lift_config<A: Algorithm>(
    spec: &A,
    base: &Configuration<A>,
    seed: u64,
) -> Configuration<A> {
    let mut rng = RngStream::new(seed);
    let mut cfg = base.clone();
    cfg.boards.push(spec.board_state(2, rng.below_u128(spec.board_domain_size(2))));
    cfg
}

/// Estimates, from `trials` truncated runs on `g_prime` started at `start`,
/// how likely each edge is to be crossed within `floor((m - 1) / 2)` moves
/// (`m = m' + 1`), and splits the least likely one.
pub fn build_hard_instance<A: Algorithm>(
    spec: &A,
    g_prime: &PortGraph,
    start: usize,
    trials: u64,
    seed: u64,
) -> Result<HardInstance, AdversaryError> {
    if trials < MIN_TRIALS {
        return Err(AdversaryError::TrialsTooFew { trials });
    }
    if start >= g_prime.n() {
        return Err(GraphError::NodeOutOfRange { node: start, n: g_prime.n() }.into());
    }
    if g_prime.m() == 0 {
        return Err(AdversaryError::InvalidParams("base graph has no edge to split".into()));
    }
    let horizon = g_prime.m() as u64 / 2;
    let init = hard_instance_init(spec, g_prime, start, seed);
    let est = edge_traverse_estimates(spec, g_prime, &init, horizon, trials, seed)?;
    let edges = g_prime.edges();
    let (best, &p) = est
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one edge");
    let chosen = edges[best];
    let graph = split_edge(g_prime, chosen)?;
    Ok(HardInstance {
        new_node: g_prime.n(),
        graph,
        start,
        removed_edge: (chosen.u, chosen.v),
        est_traverse_prob: p,
        horizon,
        trials,
    })
}
