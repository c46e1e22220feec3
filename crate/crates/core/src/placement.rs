//! Budgeted injection of moderate-minded agents.
//!
//! The intelligent strategy looks, at every step, for adjacent pairs of
//! open-minded agents that are being drawn towards each other and injects
//! just enough moderate agents at the edge of each one's confidence interval
//! to cancel that pull. The random baseline drops the whole budget into the
//! initial opinion range at `t = 0`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InfluenceGraph, PullDecomposition};
use crate::opinion::{
    simulate, simulate_with, AgentId, DynamicsConfig, Mindedness, OpinionValue, Population,
    SimulationResult, SortedProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Intelligent,
    RandomAtStart,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Intelligent => "intelligent",
            Strategy::RandomAtStart => "random_at_start",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Which agents take part in the adjacency test for converging pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScope {
    /// Neighbours in the opinion order of the whole population: no agent of
    /// any class may sit between the two.
    #[default]
    AllAgents,
    /// Neighbours in the opinion order of the open-minded agents only; close
    /// or moderate agents sitting between two open agents do not break the
    /// pair.
    OpenOnly,
}

impl fmt::Display for PairScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairScope::OpenOnly => "open_only",
            PairScope::AllAgents => "all_agents",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub budget: usize,
    pub epsilon_new: f64,
    pub strategy: Strategy,
    /// Only read by [`Strategy::Intelligent`].
    pub pair_scope: PairScope,
    /// Only read by [`Strategy::RandomAtStart`].
    pub rng_seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            budget: 0,
            epsilon_new: Mindedness::Moderate.default_epsilon(),
            strategy: Strategy::Intelligent,
            pair_scope: PairScope::default(),
            rng_seed: 0,
        }
    }
}

impl PlacementConfig {
    pub fn intelligent(budget: usize) -> Self {
        PlacementConfig {
            budget,
            ..Default::default()
        }
    }

    pub fn random(budget: usize, rng_seed: u64) -> Self {
        PlacementConfig {
            budget,
            strategy: Strategy::RandomAtStart,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon_new) {
            return Err(Error::validation(format!(
                "epsilon_new {} outside [0, 1]",
                self.epsilon_new
            )));
        }
        Ok(())
    }
}

/// One batch of identical injected agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementEvent {
    pub time: usize,
    /// Where the agents were actually placed.
    pub opinion: OpinionValue,
    /// Where the placement rule asked for them, possibly outside `[0, 1]`.
    pub requested_opinion: f64,
    pub count: usize,
    /// The open-minded agent whose pull the batch counters; `None` for
    /// random placement.
    pub anchor_agent: Option<AgentId>,
    pub side: Option<Side>,
    pub clamped: bool,
}

/// An adjacent pair of open-minded agents drifting towards each other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergingPair {
    /// Vertex index of the agent on the left (smaller opinion).
    pub left: usize,
    pub right: usize,
    pub left_pull: PullDecomposition,
    pub right_pull: PullDecomposition,
}

/// Scans agents in opinion order and returns, left to right, every adjacent
/// pair where both are open-minded, the left one is pulled right and the
/// right one is pulled left. `scope` decides which agents count when judging
/// adjacency.
pub fn find_converging_pairs(g: &InfluenceGraph, scope: PairScope) -> Vec<ConvergingPair> {
    let sorted = SortedProfile::new(g.opinions());
    let open = |i: usize| g.mindedness(i) == Mindedness::Open;
    let order: Vec<usize> = match scope {
        PairScope::AllAgents => sorted.order,
        PairScope::OpenOnly => sorted.order.into_iter().filter(|&i| open(i)).collect(),
    };
    let pulls: Vec<PullDecomposition> = (0..g.n())
        .map(|i| g.pull(i).expect("index in range"))
        .collect();
    order
        .windows(2)
        .filter_map(|w| {
            let (l, r) = (w[0], w[1]);
            let qualifies = open(l) && open(r) && pulls[l].is_rightward() && pulls[r].is_leftward();
            qualifies.then(|| ConvergingPair {
                left: l,
                right: r,
                left_pull: pulls[l],
                right_pull: pulls[r],
            })
        })
        .collect()
}

/// The two counter-pull batches for a converging pair at step `t`.
///
/// The left batch sits at `x_l - eps_l` and has
/// `ceil((sum_right - sum_left) / eps_l)` agents, each adding `eps_l` to the
/// left agent's leftward distance sum. The right batch mirrors it.
pub fn compute_injection(
    g: &InfluenceGraph,
    left: usize,
    right: usize,
    t: usize,
    scope: PairScope,
) -> Result<(PlacementEvent, PlacementEvent)> {
    g.pull(left)?;
    g.pull(right)?;
    let pair = find_converging_pairs(g, scope)
        .into_iter()
        .find(|p| p.left == left && p.right == right)
        .ok_or_else(|| {
            Error::Contract(format!(
                "vertices ({left}, {right}) are not a converging open-minded pair"
            ))
        })?;
    batches(g, &pair, t)
}

fn batches(
    g: &InfluenceGraph,
    pair: &ConvergingPair,
    t: usize,
) -> Result<(PlacementEvent, PlacementEvent)> {
    let (l, r) = (pair.left, pair.right);
    let left = batch(
        t,
        g.ids()[l],
        Side::Left,
        g.opinions()[l],
        g.epsilons()[l],
        pair.left_pull.net(),
    )?;
    let right = batch(
        t,
        g.ids()[r],
        Side::Right,
        g.opinions()[r],
        g.epsilons()[r],
        -pair.right_pull.net(),
    )?;
    Ok((left, right))
}

fn batch(
    t: usize,
    anchor: AgentId,
    side: Side,
    x: f64,
    eps: f64,
    imbalance: f64,
) -> Result<PlacementEvent> {
    let requested = match side {
        Side::Left => x - eps,
        Side::Right => x + eps,
    };
    let (opinion, clamped) = OpinionValue::clamped(within_reach(x, eps, requested))?;
    Ok(PlacementEvent {
        time: t,
        opinion,
        requested_opinion: requested,
        count: counter_count(imbalance, eps),
        anchor_agent: Some(anchor),
        side: Some(side),
        clamped,
    })
}

/// Number of agents at distance `eps` needed to offset `imbalance`.
fn counter_count(imbalance: f64, eps: f64) -> usize {
    debug_assert!(imbalance > 0.0 && eps > 0.0);
    ((imbalance / eps).ceil() as usize).max(1)
}

/// Nudges `target` towards `anchor` until the anchor's closed interval
/// contains it; `anchor -/+ eps` can land one ulp outside after rounding.
fn within_reach(anchor: f64, eps: f64, target: f64) -> f64 {
    let mut v = target;
    while (v - anchor).abs() > eps {
        v = if v < anchor {
            v.next_up()
        } else {
            v.next_down()
        };
    }
    v
}

/// Runs the dynamics with the configured placement strategy active.
///
/// With [`Strategy::Intelligent`] injection is evaluated before every update
/// while budget remains; a pair whose batch no longer fits ends that step's
/// scan. Steps with an injection never count as equilibrium. Budget left when
/// the profile settles with no qualifying pair stays unspent.
pub fn run_with_placement(
    pop: &Population,
    dynamics: &DynamicsConfig,
    place: &PlacementConfig,
) -> Result<(SimulationResult, Vec<PlacementEvent>)> {
    dynamics.validate()?;
    place.validate()?;
    if place.budget == 0 {
        return Ok((simulate(pop, dynamics)?, Vec::new()));
    }
    let mut events = Vec::new();
    let result = match place.strategy {
        Strategy::Intelligent => {
            let mut budget = place.budget;
            let mut hook = |t: usize, pop: &mut Population| -> Result<bool> {
                if budget == 0 {
                    return Ok(false);
                }
                let g = InfluenceGraph::build(pop, t);
                let before = events.len();
                'scan: for pair in find_converging_pairs(&g, place.pair_scope) {
                    let (l, r) = batches(&g, &pair, t)?;
                    for ev in [l, r] {
                        if budget < ev.count {
                            break 'scan;
                        }
                        for _ in 0..ev.count {
                            pop.inject(ev.opinion, place.epsilon_new)?;
                        }
                        budget -= ev.count;
                        events.push(ev);
                    }
                }
                Ok(events.len() > before)
            };
            simulate_with(pop, dynamics, &mut hook)?
        }
        Strategy::RandomAtStart => {
            let x0 = pop.opinions();
            let lo = x0.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(place.rng_seed);
            let mut hook = |t: usize, pop: &mut Population| -> Result<bool> {
                if t != 0 {
                    return Ok(false);
                }
                for _ in 0..place.budget {
                    let x = rng.random_range(lo..=hi);
                    let opinion = OpinionValue::new(x)?;
                    pop.inject(opinion, place.epsilon_new)?;
                    events.push(PlacementEvent {
                        time: 0,
                        opinion,
                        requested_opinion: x,
                        count: 1,
                        anchor_agent: None,
                        side: None,
                        clamped: false,
                    });
                }
                Ok(true)
            };
            simulate_with(pop, dynamics, &mut hook)?
        }
    };
    Ok((result, events))
}

/// Total number of agents injected across an event log.
pub fn budget_spent(events: &[PlacementEvent]) -> usize {
    events.iter().map(|e| e.count).sum()
}
