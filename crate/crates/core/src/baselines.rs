//! Reference walks: the simple random walk and the rotor-router.

use crate::sim::{Algorithm, Migration, MoveKind, StepContext};

/// Stateless walk choosing an exit port uniformly at random.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SrwSpec;

pub fn srw_spec() -> SrwSpec {
    SrwSpec
}

impl Algorithm for SrwSpec {
    type Agent = ();
    type Board = ();

    fn name(&self) -> String {
        "srw".into()
    }

    fn is_randomized(&self) -> bool {
        true
    }

    fn agent_domain_size(&self) -> u128 {
        1
    }

    fn agent_state(&self, _index: u128) {}

    fn agent_in_domain(&self, _agent: &()) -> bool {
        true
    }

    fn board_domain_size(&self, _degree: usize) -> u128 {
        1
    }

    fn board_state(&self, _degree: usize, _index: u128) {}

    fn board_in_domain(&self, _degree: usize, _board: &()) -> bool {
        true
    }

    fn transition(
        &self,
        degree: usize,
        _in_port: usize,
        _agent: &mut (),
        _board: &mut (),
        ctx: &mut StepContext<'_>,
    ) -> Migration {
        Migration { port: ctx.rng().below_usize(degree), kind: MoveKind::Walk }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RotorBoard {
    pub last: usize,
}

/// Each node advances its pointer by one port per visit and exits through it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RotorSpec;

pub fn rotor_spec() -> RotorSpec {
    RotorSpec
}

impl Algorithm for RotorSpec {
    type Agent = ();
    type Board = RotorBoard;

    fn name(&self) -> String {
        "rotor".into()
    }

    fn is_randomized(&self) -> bool {
        false
    }

    fn agent_domain_size(&self) -> u128 {
        1
    }

    fn agent_state(&self, _index: u128) {}

    fn agent_in_domain(&self, _agent: &()) -> bool {
        true
    }

    fn board_domain_size(&self, degree: usize) -> u128 {
        degree.max(1) as u128
    }

    fn board_state(&self, _degree: usize, index: u128) -> RotorBoard {
        RotorBoard { last: index as usize }
    }

    fn board_in_domain(&self, degree: usize, board: &RotorBoard) -> bool {
        board.last < degree.max(1)
    }

    fn transition(
        &self,
        degree: usize,
        _in_port: usize,
        _agent: &mut (),
        board: &mut RotorBoard,
        _ctx: &mut StepContext<'_>,
    ) -> Migration {
        board.last = (board.last + 1) % degree;
        Migration { port: board.last, kind: MoveKind::Walk }
    }
}
