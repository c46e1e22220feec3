//! Initial populations.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so a seed gives the
//! same population on every platform.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opinion::{Agent, AgentId, Mindedness, Population};

pub const NORMAL_MEAN: f64 = 0.5;
pub const NORMAL_SD: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpinionDist {
    EvenlySpaced,
    ClippedNormal { mean: f64, sd: f64 },
}

impl Default for OpinionDist {
    fn default() -> Self {
        OpinionDist::ClippedNormal {
            mean: NORMAL_MEAN,
            sd: NORMAL_SD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub n: usize,
    pub fractions: BTreeMap<Mindedness, f64>,
    pub epsilons: BTreeMap<Mindedness, f64>,
    pub opinion_dist: OpinionDist,
    pub rng_seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            n: 200,
            fractions: BTreeMap::from([(Mindedness::Close, 0.5), (Mindedness::Open, 0.5)]),
            epsilons: default_epsilons(),
            opinion_dist: OpinionDist::default(),
            rng_seed: 0,
        }
    }
}

fn default_epsilons() -> BTreeMap<Mindedness, f64> {
    Mindedness::ALL
        .iter()
        .map(|&m| (m, m.default_epsilon()))
        .collect()
}

impl MixtureSpec {
    /// A clipped-normal mixture with the standard class openness values.
    pub fn new(n: usize, fractions: &[(Mindedness, f64)], rng_seed: u64) -> Self {
        MixtureSpec {
            n,
            fractions: fractions.iter().copied().collect(),
            rng_seed,
            ..MixtureSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("mixture size must be at least 1"));
        }
        if self.fractions.is_empty() {
            return Err(Error::validation("mixture has no classes"));
        }
        if let Some((m, f)) = self
            .fractions
            .iter()
            .find(|(_, &f)| !(0.0..=1.0).contains(&f))
        {
            return Err(Error::validation(format!(
                "fraction {f} for {m} outside [0, 1]"
            )));
        }
        let total: f64 = self.fractions.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "class fractions sum to {total}, not 1"
            )));
        }
        for m in self.fractions.keys() {
            let eps = self.epsilon(*m);
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::validation(format!(
                    "epsilon {eps} for {m} outside [0, 1]"
                )));
            }
        }
        if let OpinionDist::ClippedNormal { mean, sd } = self.opinion_dist {
            if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
                return Err(Error::validation(format!(
                    "bad normal parameters ({mean}, {sd})"
                )));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self, class: Mindedness) -> f64 {
        self.epsilons
            .get(&class)
            .copied()
            .unwrap_or_else(|| class.default_epsilon())
    }

    /// Integer class sizes: round half up, last class takes the remainder.
    pub fn class_counts(&self) -> Vec<(Mindedness, usize)> {
        let classes: Vec<_> = self.fractions.iter().map(|(&m, &f)| (m, f)).collect();
        let mut counts = Vec::with_capacity(classes.len());
        let mut assigned = 0usize;
        for (k, &(m, f)) in classes.iter().enumerate() {
            let c = if k + 1 == classes.len() {
                self.n.saturating_sub(assigned)
            } else {
                ((f * self.n as f64 + 0.5).floor() as usize).min(self.n - assigned)
            };
            assigned += c;
            counts.push((m, c));
        }
        counts
    }
}

/// Opinions `i / (n - 1)` for `i = 0..n`, all with the same openness.
pub fn evenly_spaced(n: usize, epsilon: f64) -> Result<Population> {
    if n < 2 {
        return Err(Error::validation(format!(
            "evenly spaced population needs n >= 2, got {n}"
        )));
    }
    let opinions: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    Population::homogeneous(&opinions, epsilon)
}

/// Draws a mixture. Agents are laid out class by class (close, moderate,
/// open), ids `0..n`; every opinion is an independent draw, clipped into
/// `[0, 1]` for the normal distribution.
pub fn clipped_normal_mixture(spec: &MixtureSpec) -> Result<Population> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let opinions: Vec<f64> = match spec.opinion_dist {
        OpinionDist::EvenlySpaced if spec.n == 1 => vec![0.5],
        OpinionDist::EvenlySpaced => (0..spec.n)
            .map(|i| i as f64 / (spec.n - 1) as f64)
            .collect(),
        OpinionDist::ClippedNormal { mean, sd } => {
            let normal = Normal::new(mean, sd)
                .map_err(|e| Error::validation(format!("normal distribution: {e}")))?;
            (0..spec.n)
                .map(|_| normal.sample(&mut rng).clamp(0.0, 1.0))
                .collect()
        }
    };
    let mut agents = Vec::with_capacity(spec.n);
    for (m, count) in spec.class_counts() {
        let eps = spec.epsilon(m);
        for _ in 0..count {
            let id = agents.len();
            agents.push(Agent::new(id as AgentId, opinions[id], eps)?);
        }
    }
    Population::new(agents)
}

/// Re-labels a seeded random subset of class `from` with openness
/// `epsilon_new`; `round(fraction * count(from))` agents change. Opinions,
/// ids and order are untouched.
pub fn transform(
    pop: &Population,
    from: Mindedness,
    fraction: f64,
    epsilon_new: f64,
    rng_seed: u64,
) -> Result<Population> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::validation(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    let members: Vec<usize> = pop
        .agents()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.mindedness() == from)
        .map(|(i, _)| i)
        .collect();
    let k = (fraction * members.len() as f64).round() as usize;
    let mut out = pop.clone();
    if k == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, members.len(), k)
        .into_iter()
        .map(|p| members[p])
        .collect();
    chosen.sort_unstable();
    let agents = out.agents_mut();
    for i in chosen {
        agents[i].set_epsilon(epsilon_new)?;
    }
    Ok(out)
}
