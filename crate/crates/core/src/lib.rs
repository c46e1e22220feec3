//! Bounded-confidence (Hegselmann-Krause) opinion dynamics with heterogeneous
//! openness, time-varying influence graphs, and budgeted placement of
//! moderate-minded agents.
//!
//! The crate is organised bottom-up:
//!
//! * [`opinion`]: agents, populations, the synchronous update rules,
//!   equilibrium detection and cluster counting.
//! * [`graph`]: the directed influence graph of one opinion snapshot, with
//!   pull decomposition, strongly connected components and DOT/JSON export.
//! * [`placement`]: the intelligent space-time placement of moderate agents
//!   under a budget, plus the random baseline.
//! * [`popgen`]: initial population generators and openness transformations.
//! * [`harness`]: parameter sweeps and trajectory dumps.
//! * [`io`]: CSV formats shared by the harness and the command line.

pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod opinion;
pub mod placement;
pub mod popgen;

pub use error::{Error, Result};
pub use graph::{InfluenceGraph, PullDecomposition};
pub use opinion::{
    Agent, AgentId, DynamicsConfig, Mindedness, OpinionValue, Population, Rule, SimulationResult,
};
pub use placement::{PairScope, PlacementConfig, PlacementEvent, Side, Strategy};
pub use popgen::{MixtureSpec, OpinionDist};
