//! Deterministic phased breadth-first exploration.
//!
//! The agent grows a BFS tree rooted where it last entered phase 0. Phase 0
//! makes the root's neighbors its children. Each later phase runs five
//! circulations of the current tree:
//!
//! 1. whiten the tree,
//! 2. from every boundary node, turn black neighbors red,
//! 3. blacken the tree,
//! 4. from every boundary node, turn white neighbors red,
//! 5. from every boundary node, adopt red neighbors as black children.
//!
//! Every tree move re-checks parent/child/distance consistency. Any
//! inconsistency, or a phase that adds nothing, sends the agent back to
//! phase 0 at its current node.
//!
//! Agent control points are the instants right after each migration; the
//! direction of a tree move and whether an expansion visit adopted the
//! neighbor both survive the migration and are part of the control point.

use serde::Serialize;

use crate::graph::{NodeSet, PortGraph};
use crate::sim::{
    Algorithm, ErrorCause, Migration, MoveKind, ResetCause, Signal, SimError, StepContext,
};

/// Largest degree a whiteboard child set can describe.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Color {
    W,
    B,
    R,
}

const COLORS: [Color; 3] = [Color::W, Color::B, Color::R];

/// Tree-move direction: `Down` adds one to the distance, `Up` subtracts one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetPc {
    /// At a neighbor during initialization.
    InitOut,
    /// Back at the root during initialization.
    InitBack,
    /// Arrived by a tree move.
    MoveArrived(Dir),
    /// At a neighbor of a boundary node during expansion.
    ExpandOut,
    /// Back at the boundary node; `adopted` when the neighbor just joined the tree.
    ExpandBack { adopted: bool },
}

const PCS: [DetPc; 7] = [
    DetPc::InitOut,
    DetPc::InitBack,
    DetPc::MoveArrived(Dir::Down),
    DetPc::MoveArrived(Dir::Up),
    DetPc::ExpandOut,
    DetPc::ExpandBack { adopted: false },
    DetPc::ExpandBack { adopted: true },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DetAgent {
    pub phase: u32,
    pub dist: u32,
    pub stage: u8,
    pub error: bool,
    pub found: bool,
    pub pc: DetPc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DetBoard {
    pub parent: usize,
    /// Bit `q` set when port `q` leads to a child.
    pub child: u64,
    pub clr: Color,
    pub dist: u32,
    /// Port cursor shared by initialization and expansion, in `0..=degree`.
    pub port: usize,
}

impl DetBoard {
    pub fn has_child(&self, q: usize) -> bool {
        q < MAX_DEGREE && self.child & (1 << q) != 0
    }

    /// Smallest child port `>= from`.
    fn first_child_from(&self, from: usize) -> Option<usize> {
        if from >= MAX_DEGREE {
            return None;
        }
        let rest = self.child & (u64::MAX << from);
        (rest != 0).then(|| rest.trailing_zeros() as usize)
    }
}

fn all_ports(degree: usize) -> u64 {
    if degree >= MAX_DEGREE {
        u64::MAX
    } else {
        (1u64 << degree) - 1
    }
}

/// Next port of the tree circulation at a node entered via `q`; `None`
/// means the circulation is over (back at a root with no further child).
pub fn nextd(board: &DetBoard, q: usize) -> Option<usize> {
    let at_root = board.dist == 0;
    if !at_root && q == board.parent {
        if let Some(c) = board.first_child_from(0) {
            return Some(c);
        }
    } else if let Some(c) = board.first_child_from(q + 1) {
        return Some(c);
    }
    if at_root {
        None
    } else {
        Some(board.parent)
    }
}

/// Color written by a circulation in `stage`.
pub fn colorupdate(stage: u8, current: Color) -> Color {
    match stage {
        1 => Color::W,
        3 => Color::B,
        _ => current,
    }
}

/// Effect of one expansion visit on the neighbor's whiteboard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpandOutcome {
    Nothing,
    MarkedRed,
    Adopted,
    StaleBlack,
}

/// Rule table for a visit to a boundary node's neighbor, entered via `in_port`.
pub fn expand_visit(
    stage: u8,
    phase: u32,
    agent_dist: u32,
    k: u32,
    neighbor: &mut DetBoard,
    in_port: usize,
    stale_black_rule: bool,
) -> ExpandOutcome {
    match (stage, neighbor.clr) {
        (2, Color::B) | (4, Color::W) => {
            neighbor.clr = Color::R;
            ExpandOutcome::MarkedRed
        }
        (5, Color::R) => {
            // a node one past the largest representable distance keeps k
            neighbor.dist = (agent_dist + 1).min(k);
            neighbor.parent = in_port;
            neighbor.child = 0;
            neighbor.clr = Color::B;
            ExpandOutcome::Adopted
        }
        (5, Color::B) if stale_black_rule && i64::from(neighbor.dist) < i64::from(phase) - 1 => {
            ExpandOutcome::StaleBlack
        }
        _ => ExpandOutcome::Nothing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetSpec {
    k: u32,
    stale_black_rule: bool,
}

pub fn det_spec(k: u32) -> Result<DetSpec, SimError> {
    if k < 1 {
        return Err(SimError::InvalidParam("k must be ≥ 1".into()));
    }
    Ok(DetSpec { k, stale_black_rule: true })
}

/// Where execution continues inside one transition.
#[derive(Debug, Clone, Copy)]
enum Label {
    MainTop,
    MainTail,
    InitLoop,
    CirculateGuard,
    ExpandGuard,
}

impl DetSpec {
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Test switch for the stage-5 stale-black-node rule.
    pub fn with_stale_black_rule(mut self, enabled: bool) -> Self {
        self.stale_black_rule = enabled;
        self
    }

    pub fn stale_black_rule(&self) -> bool {
        self.stale_black_rule
    }

    fn tree_move(agent: &mut DetAgent, port: usize, dir: Dir) -> Migration {
        agent.pc = DetPc::MoveArrived(dir);
        let kind = match dir {
            Dir::Down => MoveKind::TreeDown,
            Dir::Up => MoveKind::TreeUp,
        };
        Migration { port, kind }
    }

    /// Second half of a tree move, run on arrival.
    fn finish_move(
        &self,
        dir: Dir,
        in_port: usize,
        agent: &mut DetAgent,
        board: &DetBoard,
    ) -> Option<ErrorCause> {
        agent.dist = match dir {
            Dir::Down => (agent.dist + 1).min(self.k),
            Dir::Up => agent.dist.saturating_sub(1),
        };
        if agent.dist != board.dist {
            Some(ErrorCause::DistMismatch)
        } else if board.dist > 0 && board.has_child(board.parent) {
            Some(ErrorCause::ParentInChild)
        } else if dir == Dir::Down && in_port != board.parent {
            Some(ErrorCause::ParentPortMismatch)
        } else if dir == Dir::Up && !board.has_child(in_port) {
            Some(ErrorCause::ChildPortMissing)
        } else {
            None
        }
    }
}

impl Algorithm for DetSpec {
    type Agent = DetAgent;
    type Board = DetBoard;

    fn name(&self) -> String {
        if self.stale_black_rule {
            format!("det(k={})", self.k)
        } else {
            format!("det(k={},no-stage5-rule)", self.k)
        }
    }

    fn is_randomized(&self) -> bool {
        false
    }

    // phase x dist x stage x error x found x pc
    fn agent_domain_size(&self) -> u128 {
        let k1 = u128::from(self.k) + 1;
        k1 * k1 * 5 * 2 * 2 * PCS.len() as u128
    }

    fn agent_state(&self, index: u128) -> DetAgent {
        let k1 = u128::from(self.k) + 1;
        let mut i = index;
        let mut take = |radix: u128| {
            let d = i % radix;
            i /= radix;
            d
        };
        let pc = PCS[take(PCS.len() as u128) as usize];
        let found = take(2) == 1;
        let error = take(2) == 1;
        let stage = 1 + take(5) as u8;
        let dist = take(k1) as u32;
        let phase = take(k1) as u32;
        DetAgent { phase, dist, stage, error, found, pc }
    }

    fn agent_in_domain(&self, a: &DetAgent) -> bool {
        a.phase <= self.k && a.dist <= self.k && (1..=5).contains(&a.stage)
    }

    // parent x child x clr x dist x port
    fn board_domain_size(&self, degree: usize) -> u128 {
        let d = degree.max(1) as u128;
        d * (1u128 << degree.min(MAX_DEGREE)) * 3 * (u128::from(self.k) + 1) * (degree as u128 + 1)
    }

    fn board_state(&self, degree: usize, index: u128) -> DetBoard {
        let mut i = index;
        let mut take = |radix: u128| {
            let d = i % radix;
            i /= radix;
            d
        };
        let port = take(degree as u128 + 1) as usize;
        let dist = take(u128::from(self.k) + 1) as u32;
        let clr = COLORS[take(3) as usize];
        let child = take(1u128 << degree.min(MAX_DEGREE)) as u64;
        let parent = take(degree.max(1) as u128) as usize;
        DetBoard { parent, child, clr, dist, port }
    }

    fn board_in_domain(&self, degree: usize, b: &DetBoard) -> bool {
        b.parent < degree.max(1)
            && b.child & !all_ports(degree) == 0
            && b.dist <= self.k
            && b.port <= degree
    }

    fn check_graph(&self, g: &PortGraph) -> Result<(), SimError> {
        if g.max_degree() > MAX_DEGREE {
            return Err(SimError::Unsupported(format!(
                "maximum degree {} exceeds {MAX_DEGREE}",
                g.max_degree()
            )));
        }
        Ok(())
    }

    fn transition(
        &self,
        degree: usize,
        in_port: usize,
        agent: &mut DetAgent,
        board: &mut DetBoard,
        ctx: &mut StepContext<'_>,
    ) -> Migration {
        let k = self.k;
        let raise = |agent: &mut DetAgent, cause: ErrorCause, ctx: &mut StepContext<'_>| {
            agent.error = true;
            ctx.emit(Signal::Error { cause });
        };

        let mut label = match agent.pc {
            DetPc::InitOut => {
                board.parent = in_port;
                board.child = 0;
                board.dist = 1.min(k);
                agent.pc = DetPc::InitBack;
                return Migration { port: in_port, kind: MoveKind::InitBack };
            }
            DetPc::InitBack => {
                board.port = (board.port + 1).min(degree);
                Label::InitLoop
            }
            DetPc::MoveArrived(dir) => {
                if let Some(cause) = self.finish_move(dir, in_port, agent, board) {
                    raise(agent, cause, ctx);
                }
                Label::CirculateGuard
            }
            DetPc::ExpandOut => {
                let outcome = expand_visit(
                    agent.stage,
                    agent.phase,
                    agent.dist,
                    k,
                    board,
                    in_port,
                    self.stale_black_rule,
                );
                if outcome == ExpandOutcome::StaleBlack {
                    raise(agent, ErrorCause::StaleBlackNode, ctx);
                }
                agent.pc = DetPc::ExpandBack { adopted: outcome == ExpandOutcome::Adopted };
                return Migration { port: in_port, kind: MoveKind::ExpandBack };
            }
            DetPc::ExpandBack { adopted } => {
                if adopted {
                    if in_port < MAX_DEGREE {
                        board.child |= 1 << in_port;
                    }
                    agent.found = true;
                }
                board.port = (board.port + 1) % degree;
                Label::ExpandGuard
            }
        };

        loop {
            label = match label {
                Label::MainTop => {
                    if agent.phase == 0 {
                        agent.dist = 0;
                        board.dist = 0;
                        board.port = 0;
                        board.child = all_ports(degree);
                        Label::InitLoop
                    } else {
                        board.clr = colorupdate(agent.stage, board.clr);
                        return Self::tree_move(agent, 0, Dir::Down);
                    }
                }
                Label::InitLoop => {
                    if board.port < degree {
                        agent.pc = DetPc::InitOut;
                        return Migration { port: board.port, kind: MoveKind::InitOut };
                    }
                    ctx.emit(Signal::StageDone {
                        phase: agent.phase,
                        stage: 0,
                        found: agent.found,
                        error: agent.error,
                    });
                    agent.stage = 1;
                    Label::MainTail
                }
                Label::CirculateGuard => match nextd(board, in_port) {
                    Some(next) if !agent.error => {
                        board.clr = colorupdate(agent.stage, board.clr);
                        if agent.dist == agent.phase {
                            if matches!(agent.stage, 2 | 4 | 5) {
                                board.port = (board.parent + 1) % degree;
                                Label::ExpandGuard
                            } else {
                                return Self::tree_move(agent, board.parent, Dir::Up);
                            }
                        } else {
                            let dir = if agent.dist > 0 && next == board.parent {
                                Dir::Up
                            } else {
                                Dir::Down
                            };
                            return Self::tree_move(agent, next, dir);
                        }
                    }
                    _ => {
                        ctx.emit(Signal::StageDone {
                            phase: agent.phase,
                            stage: agent.stage,
                            found: agent.found,
                            error: agent.error,
                        });
                        agent.stage = agent.stage % 5 + 1;
                        Label::MainTail
                    }
                },
                Label::ExpandGuard => {
                    if board.port != board.parent {
                        agent.pc = DetPc::ExpandOut;
                        return Migration { port: board.port, kind: MoveKind::ExpandOut };
                    }
                    return Self::tree_move(agent, board.parent, Dir::Up);
                }
                Label::MainTail => {
                    if agent.error || (agent.phase >= 1 && agent.stage == 1 && !agent.found) {
                        let cause =
                            if agent.error { ResetCause::Error } else { ResetCause::NothingFound };
                        agent.phase = 0;
                        agent.error = false;
                        ctx.emit(Signal::PhaseReset { cause });
                    } else if agent.stage == 1 {
                        agent.phase = (agent.phase + 1) % (k + 1);
                        agent.found = false;
                        if agent.phase == 0 {
                            ctx.emit(Signal::PhaseReset { cause: ResetCause::Wrap });
                        }
                    }
                    Label::MainTop
                }
            };
        }
    }
}

/// Arcs `(child, parent)` of the tree encoded on the whiteboards, plus
/// per-node consistency of claimed children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeView {
    pub arcs: Vec<(usize, usize)>,
    parent_of: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// `false` at a node claiming a child whose parent pointer does not lead back.
    pub node_consistent: Vec<bool>,
}

pub fn tree_snapshot(g: &PortGraph, boards: &[DetBoard]) -> TreeView {
    let n = g.n();
    let mut parent_of = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut node_consistent = vec![true; n];
    let mut arcs = Vec::new();
    for v in 0..n {
        for q in 0..g.degree(v) {
            if !boards[v].has_child(q) {
                continue;
            }
            let (u, back) = g.neighbor(v, q);
            if boards[u].parent == back {
                arcs.push((u, v));
                parent_of[u] = Some(v);
                children[v].push(u);
            } else {
                node_consistent[v] = false;
            }
        }
    }
    TreeView { arcs, parent_of, children, node_consistent }
}

impl TreeView {
    pub fn parent_of(&self, v: usize) -> Option<usize> {
        self.parent_of[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Weakly connected component of `v` over the arcs.
    pub fn component(&self, v: usize) -> NodeSet {
        let n = self.parent_of.len();
        let mut seen = NodeSet::new(n);
        seen.insert(v);
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            let up = self.parent_of[x].into_iter();
            for y in up.chain(self.children[x].iter().copied()) {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen
    }

    pub fn component_consistent(&self, v: usize) -> bool {
        self.component(v).iter().all(|w| self.node_consistent[w])
    }

    /// Whether the arcs inside `v`'s component contain a directed cycle
    /// (following parent arcs from some node returns to it).
    pub fn has_cycle_in_component(&self, v: usize) -> bool {
        let comp = self.component(v);
        let arcs = self.arcs.iter().filter(|(c, _)| comp.contains(*c)).count();
        arcs >= comp.len()
    }

    /// Depth of every node of `root`'s component when it is an in-tree
    /// rooted at `root`; `None` otherwise.
    pub fn depths_from(&self, root: usize) -> Option<Vec<Option<usize>>> {
        if self.parent_of[root].is_some() {
            return None;
        }
        let n = self.parent_of.len();
        let mut depth = vec![None; n];
        depth[root] = Some(0);
        let mut stack = vec![root];
        let mut reached = 1;
        while let Some(x) = stack.pop() {
            for &c in &self.children[x] {
                if depth[c].is_some() {
                    return None;
                }
                depth[c] = Some(depth[x].unwrap() + 1);
                reached += 1;
                stack.push(c);
            }
        }
        (reached == self.component(root).len()).then_some(depth)
    }
}
