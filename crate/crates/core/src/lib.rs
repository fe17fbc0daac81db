//! Single-agent self-stabilizing exploration of port-numbered graphs with
//! whiteboards: the machine model, two exploration algorithms, baseline
//! walks, adversarial constructions and runtime invariant checks.

pub mod adversary;
pub mod baselines;
pub mod checks;
pub mod det;
pub mod generate;
pub mod graph;
pub mod harness;
pub mod ran;
pub mod rng;
pub mod sim;

pub use graph::{GraphError, NodeSet, PortEdge, PortGraph};
pub use rng::RngStream;
pub use sim::{Algorithm, Configuration, Event, RunOptions, RunResult, SimError};
