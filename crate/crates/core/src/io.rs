//! CSV formats.
//!
//! | file            | header                                                     |
//! |-----------------|------------------------------------------------------------|
//! | population      | `agent_id,opinion,epsilon,mindedness,injected`             |
//! | trajectory      | `t,agent_id,opinion,epsilon,mindedness,injected`           |
//! | placement log   | `time,opinion,requested_opinion,count,anchor_agent,side,clamped` |
//! | run summary     | `t_eqm,converged,c_eqm,steps,n_final,budget_spent`         |
//!
//! Sweep records live in [`crate::harness`].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::opinion::{Agent, AgentId, Mindedness, OpinionValue, Population, SimulationResult};
use crate::placement::{budget_spent, PlacementEvent, Side};

#[derive(Debug, Serialize, Deserialize)]
struct PopulationRow {
    agent_id: AgentId,
    opinion: f64,
    epsilon: f64,
    mindedness: Mindedness,
    injected: bool,
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    t: usize,
    agent_id: AgentId,
    opinion: f64,
    epsilon: f64,
    mindedness: Mindedness,
    injected: bool,
}

#[derive(Debug, Serialize)]
struct EventRow {
    time: usize,
    opinion: f64,
    requested_opinion: f64,
    count: usize,
    anchor_agent: Option<AgentId>,
    side: Option<Side>,
    clamped: bool,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    t_eqm: Option<usize>,
    converged: bool,
    c_eqm: usize,
    steps: usize,
    n_final: usize,
    budget_spent: usize,
}

pub fn write_population<W: Write>(pop: &Population, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for a in pop.agents() {
        w.serialize(PopulationRow {
            agent_id: a.id,
            opinion: a.opinion.get(),
            epsilon: a.epsilon(),
            mindedness: a.mindedness(),
            injected: a.injected,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a population CSV. The mindedness column is informational and is
/// re-derived from epsilon.
pub fn read_population<R: Read>(input: R) -> Result<Population> {
    let mut r = csv::Reader::from_reader(input);
    let mut agents = Vec::new();
    for row in r.deserialize() {
        let row: PopulationRow = row?;
        let mut a = Agent::new(row.agent_id, row.opinion, row.epsilon)?;
        if row.injected {
            a = Agent::injected(a.id, OpinionValue::new(row.opinion)?, row.epsilon)?;
        }
        agents.push(a);
    }
    Population::new(agents)
}

/// One row per agent per recorded step. Agents injected mid-run appear from
/// the step they were added.
pub fn write_trajectory<W: Write>(res: &SimulationResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if res.trajectory.is_empty() {
        w.write_record([
            "t",
            "agent_id",
            "opinion",
            "epsilon",
            "mindedness",
            "injected",
        ])?;
    }
    let agents = res.population.agents();
    for (t, profile) in res.trajectory.iter().enumerate() {
        for (a, &x) in agents.iter().zip(profile) {
            w.serialize(TrajectoryRow {
                t,
                agent_id: a.id,
                opinion: x,
                epsilon: a.epsilon(),
                mindedness: a.mindedness(),
                injected: a.injected,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(events: &[PlacementEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if events.is_empty() {
        w.write_record([
            "time",
            "opinion",
            "requested_opinion",
            "count",
            "anchor_agent",
            "side",
            "clamped",
        ])?;
    }
    for e in events {
        w.serialize(EventRow {
            time: e.time,
            opinion: e.opinion.get(),
            requested_opinion: e.requested_opinion,
            count: e.count,
            anchor_agent: e.anchor_agent,
            side: e.side,
            clamped: e.clamped,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(
    res: &SimulationResult,
    events: &[PlacementEvent],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(SummaryRow {
        t_eqm: res.t_eqm,
        converged: res.converged,
        c_eqm: res.c_eqm,
        steps: res.trajectory.len() - 1,
        n_final: res.population.len(),
        budget_spent: budget_spent(events),
    })?;
    w.flush()?;
    Ok(())
}
