//! Randomized colored depth-first traversal.
//!
//! The agent repeats DFTs, each with a fresh color drawn uniformly from the
//! `c - 1` colors other than its current one. Nodes carrying the agent's
//! color count as already visited in the current DFT. A DFT begins whenever
//! the agent stands on a node with no parent pointer, having entered it via
//! its last port.

use crate::graph::{GraphError, NodeSet, PortGraph};
use crate::sim::{Algorithm, Migration, MoveKind, Signal, SimError, StepContext};

/// Where the agent resumes after a migration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RanPc {
    /// Evaluate the DFT loop guard (after a backtrack or at the start).
    LoopHead,
    /// Just made a forward move: bounce if the node already has our color.
    AfterForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RanAgent {
    pub clr: u32,
    pub pc: RanPc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RanBoard {
    pub parent: Option<usize>,
    pub clr: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RanSpec {
    colors: u32,
}

pub fn ran_spec(c: u32) -> Result<RanSpec, SimError> {
    if c < 2 {
        return Err(SimError::InvalidParam("c must be ≥ 2".into()));
    }
    Ok(RanSpec { colors: c })
}

impl RanSpec {
    pub fn colors(&self) -> u32 {
        self.colors
    }

    /// Uniform over `{1..c} \ {current}`; forced (no draw) when `c = 2`.
    fn fresh_color(&self, current: u32, ctx: &mut StepContext<'_>) -> u32 {
        if self.colors == 2 {
            return 3 - current;
        }
        let j = 1 + ctx.rng().below(u64::from(self.colors - 1)) as u32;
        if j >= current {
            j + 1
        } else {
            j
        }
    }
}

impl Algorithm for RanSpec {
    type Agent = RanAgent;
    type Board = RanBoard;

    fn name(&self) -> String {
        format!("ran(c={})", self.colors)
    }

    fn is_randomized(&self) -> bool {
        self.colors > 2
    }

    fn agent_domain_size(&self) -> u128 {
        2 * u128::from(self.colors)
    }

    fn agent_state(&self, index: u128) -> RanAgent {
        let pc = if index.is_multiple_of(2) { RanPc::LoopHead } else { RanPc::AfterForward };
        RanAgent { clr: 1 + (index / 2) as u32, pc }
    }

    fn agent_in_domain(&self, a: &RanAgent) -> bool {
        (1..=self.colors).contains(&a.clr)
    }

    fn board_domain_size(&self, degree: usize) -> u128 {
        (degree as u128 + 1) * u128::from(self.colors)
    }

    fn board_state(&self, _degree: usize, index: u128) -> RanBoard {
        let c = u128::from(self.colors);
        let parent = match index / c {
            0 => None,
            p => Some(p as usize - 1),
        };
        RanBoard { parent, clr: 1 + (index % c) as u32 }
    }

    fn board_in_domain(&self, degree: usize, b: &RanBoard) -> bool {
        (1..=self.colors).contains(&b.clr) && b.parent.is_none_or(|p| p < degree)
    }

    fn board_color(&self, b: &RanBoard) -> Option<u32> {
        Some(b.clr)
    }

    fn transition(
        &self,
        degree: usize,
        in_port: usize,
        agent: &mut RanAgent,
        board: &mut RanBoard,
        ctx: &mut StepContext<'_>,
    ) -> Migration {
        let next = (in_port + 1) % degree;
        if agent.pc == RanPc::AfterForward {
            if board.clr == agent.clr {
                agent.pc = RanPc::LoopHead;
                return Migration { port: in_port, kind: MoveKind::BackI };
            }
            // first visit in this DFT: mark and keep going
            board.clr = agent.clr;
            board.parent = Some(in_port);
            return Migration { port: next, kind: MoveKind::Forward };
        }
        if board.parent.is_none() && in_port == degree - 1 {
            agent.clr = self.fresh_color(agent.clr, ctx);
            ctx.emit(Signal::DftStart { color: agent.clr });
            ctx.emit(Signal::ColorChange { color: agent.clr });
            board.clr = agent.clr;
            agent.pc = RanPc::AfterForward;
            return Migration { port: 0, kind: MoveKind::Forward };
        }
        if board.clr != agent.clr {
            board.clr = agent.clr;
            board.parent = Some(in_port);
            agent.pc = RanPc::AfterForward;
            return Migration { port: next, kind: MoveKind::Forward };
        }
        if board.parent == Some(next) {
            board.parent = None;
            return Migration { port: next, kind: MoveKind::BackII };
        }
        agent.pc = RanPc::AfterForward;
        Migration { port: next, kind: MoveKind::Forward }
    }
}

/// The marked set `S` (nodes already colored `color`) and the region `R`
/// a DFT started at `start` is guaranteed to sweep: `start`'s component
/// once the other marked nodes are removed.
pub fn dft_oracle_sets(
    g: &PortGraph,
    boards: &[RanBoard],
    start: usize,
    color: u32,
) -> Result<(NodeSet, NodeSet), GraphError> {
    let marked = NodeSet::from_nodes(
        g.n(),
        boards.iter().enumerate().filter(|(_, b)| b.clr == color).map(|(v, _)| v),
    );
    let mut blocking = marked.clone();
    blocking.remove(start);
    let region = g.component_excluding(start, &blocking)?;
    Ok((marked, region))
}
