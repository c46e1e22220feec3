//! Agents, populations and the bounded-confidence state machine.

mod cluster;
mod dynamics;

pub use cluster::{cluster_labels, count_clusters};
pub(crate) use dynamics::SortedProfile;
pub use dynamics::{
    max_change, neighborhood, neighborhood_of, simulate, simulate_with, step, step_hk, step_hk_mod,
    step_hk_mod_per_agent, SimulationResult, StepHook,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower edge of the moderate band (inclusive).
pub const MODERATE_LOW: f64 = 0.17;
/// Upper edge of the moderate band (inclusive).
pub const MODERATE_HIGH: f64 = 0.22;

/// Openness used for close-minded agents in the mixture experiments.
pub const EPSILON_CLOSE: f64 = 0.01;
/// Openness used for moderate-minded agents in the mixture experiments.
pub const EPSILON_MODERATE: f64 = 0.2;
/// Openness used for open-minded agents in the mixture experiments.
pub const EPSILON_OPEN: f64 = 0.45;

pub type AgentId = u64;

/// A position on the opinion spectrum, always within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OpinionValue(f64);

impl OpinionValue {
    pub const LEFT_POLE: OpinionValue = OpinionValue(0.0);
    pub const RIGHT_POLE: OpinionValue = OpinionValue(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(OpinionValue(value))
        } else {
            Err(Error::validation(format!("opinion {value} outside [0, 1]")))
        }
    }

    /// Clamps `value` into the spectrum; the flag reports whether clamping
    /// moved it. NaN is rejected.
    pub fn clamped(value: f64) -> Result<(Self, bool)> {
        if value.is_nan() {
            return Err(Error::validation("opinion is NaN"));
        }
        let v = value.clamp(0.0, 1.0);
        Ok((OpinionValue(v), v != value))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for OpinionValue {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        OpinionValue::new(value)
    }
}

impl From<OpinionValue> for f64 {
    fn from(v: OpinionValue) -> f64 {
        v.0
    }
}

impl fmt::Display for OpinionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mindedness {
    Close,
    Moderate,
    Open,
}

impl Mindedness {
    pub const ALL: [Mindedness; 3] = [Mindedness::Close, Mindedness::Moderate, Mindedness::Open];

    /// Labels an openness value. Close below 0.17, Moderate in the closed
    /// band `[0.17, 0.22]`, Open above.
    pub fn classify(epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::validation(format!(
                "confidence interval {epsilon} is negative"
            )));
        }
        Ok(if epsilon < MODERATE_LOW {
            Mindedness::Close
        } else if epsilon <= MODERATE_HIGH {
            Mindedness::Moderate
        } else {
            Mindedness::Open
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mindedness::Close => "close",
            Mindedness::Moderate => "moderate",
            Mindedness::Open => "open",
        }
    }

    /// The openness the mixture experiments use for this class.
    pub fn default_epsilon(self) -> f64 {
        match self {
            Mindedness::Close => EPSILON_CLOSE,
            Mindedness::Moderate => EPSILON_MODERATE,
            Mindedness::Open => EPSILON_OPEN,
        }
    }
}

impl fmt::Display for Mindedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mindedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "close" => Ok(Mindedness::Close),
            "moderate" => Ok(Mindedness::Moderate),
            "open" => Ok(Mindedness::Open),
            other => Err(Error::validation(format!("unknown mindedness {other:?}"))),
        }
    }
}

/// Shorthand for [`Mindedness::classify`].
pub fn classify(epsilon: f64) -> Result<Mindedness> {
    Mindedness::classify(epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub opinion: OpinionValue,
    epsilon: f64,
    pub injected: bool,
}

impl Agent {
    pub fn new(id: AgentId, opinion: f64, epsilon: f64) -> Result<Self> {
        let opinion = OpinionValue::new(opinion)?;
        check_epsilon(epsilon)?;
        Ok(Agent {
            id,
            opinion,
            epsilon,
            injected: false,
        })
    }

    pub fn injected(id: AgentId, opinion: OpinionValue, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Agent {
            id,
            opinion,
            epsilon,
            injected: true,
        })
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) -> Result<()> {
        check_epsilon(epsilon)?;
        self.epsilon = epsilon;
        Ok(())
    }

    pub fn mindedness(&self) -> Mindedness {
        // epsilon is validated on every write
        Mindedness::classify(self.epsilon).expect("validated epsilon")
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "confidence interval {epsilon} outside [0, 1]"
        )))
    }
}

/// An ordered, non-empty roster of agents with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Agent>", into = "Vec<Agent>")]
pub struct Population {
    agents: Vec<Agent>,
    next_id: AgentId,
}

impl Population {
    pub fn new(agents: Vec<Agent>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::validation(
                "population must contain at least one agent",
            ));
        }
        for a in &agents {
            check_epsilon(a.epsilon)?;
        }
        let mut ids: Vec<AgentId> = agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!("duplicate agent id {}", w[0])));
        }
        let next_id = ids.last().map_or(0, |&m| m + 1);
        Ok(Population { agents, next_id })
    }

    /// Builds a population with ids `0..n` from parallel opinion and
    /// openness vectors.
    pub fn from_profiles(opinions: &[f64], epsilons: &[f64]) -> Result<Self> {
        if opinions.len() != epsilons.len() {
            return Err(Error::validation(format!(
                "{} opinions but {} confidence intervals",
                opinions.len(),
                epsilons.len()
            )));
        }
        let agents = opinions
            .iter()
            .zip(epsilons)
            .enumerate()
            .map(|(i, (&x, &e))| Agent::new(i as AgentId, x, e))
            .collect::<Result<Vec<_>>>()?;
        Population::new(agents)
    }

    /// Homogeneous openness shorthand for [`Population::from_profiles`].
    pub fn homogeneous(opinions: &[f64], epsilon: f64) -> Result<Self> {
        Population::from_profiles(opinions, &vec![epsilon; opinions.len()])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> Result<&Agent> {
        self.agents.get(i).ok_or(Error::Index {
            index: i,
            len: self.agents.len(),
        })
    }

    pub(crate) fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    /// The opinion profile x(t).
    pub fn opinions(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.opinion.get()).collect()
    }

    /// The openness profile.
    pub fn epsilons(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.epsilon).collect()
    }

    pub fn count(&self, class: Mindedness) -> usize {
        self.agents
            .iter()
            .filter(|a| a.mindedness() == class)
            .count()
    }

    pub fn mean_epsilon(&self) -> f64 {
        self.agents.iter().map(|a| a.epsilon).sum::<f64>() / self.agents.len() as f64
    }

    /// Overwrites every opinion. Values must already lie in `[0, 1]`.
    pub fn set_opinions(&mut self, opinions: &[f64]) -> Result<()> {
        if opinions.len() != self.agents.len() {
            return Err(Error::validation(format!(
                "profile of length {} for population of {}",
                opinions.len(),
                self.agents.len()
            )));
        }
        for (a, &x) in self.agents.iter_mut().zip(opinions) {
            a.opinion = OpinionValue::new(x)?;
        }
        Ok(())
    }

    /// Appends a freshly injected agent and returns its id.
    pub fn inject(&mut self, opinion: OpinionValue, epsilon: f64) -> Result<AgentId> {
        let id = self.next_id;
        self.agents.push(Agent::injected(id, opinion, epsilon)?);
        self.next_id += 1;
        Ok(id)
    }
}

impl TryFrom<Vec<Agent>> for Population {
    type Error = Error;

    fn try_from(agents: Vec<Agent>) -> Result<Self> {
        Population::new(agents)
    }
}

impl From<Population> for Vec<Agent> {
    fn from(p: Population) -> Vec<Agent> {
        p.agents
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Plain average over the neighborhood, self included.
    #[serde(rename = "HK")]
    Hk,
    /// Self-weighted average: `w_own` on the agent's own opinion, the rest
    /// spread evenly over the other neighbors.
    #[serde(rename = "HKMod")]
    HkMod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub rule: Rule,
    pub w_own: f64,
    pub delta: f64,
    pub max_steps: usize,
    pub cluster_tol: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            rule: Rule::Hk,
            w_own: 0.6,
            delta: 1e-6,
            max_steps: 1000,
            cluster_tol: 1e-3,
        }
    }
}

impl DynamicsConfig {
    pub fn hk() -> Self {
        DynamicsConfig::default()
    }

    pub fn hk_mod(w_own: f64) -> Self {
        DynamicsConfig {
            rule: Rule::HkMod,
            w_own,
            ..DynamicsConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rule == Rule::HkMod && !(self.w_own > 0.5 && self.w_own <= 1.0) {
            return Err(Error::validation(format!(
                "w_own {} must lie in (0.5, 1]",
                self.w_own
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::validation(format!(
                "delta {} must be positive",
                self.delta
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::validation("max_steps must be at least 1"));
        }
        if !(self.cluster_tol >= 0.0 && self.cluster_tol.is_finite()) {
            return Err(Error::validation(format!(
                "cluster_tol {} must be >= 0",
                self.cluster_tol
            )));
        }
        Ok(())
    }
}
