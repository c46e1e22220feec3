use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{count_clusters, DynamicsConfig, Population, Rule};
use crate::error::{Error, Result};

/// Below this size a step runs on the calling thread.
const PARALLEL_MIN_AGENTS: usize = 512;

/// Brute-force neighborhood: every `j` with `|x_j - x_i| <= epsilon`, in
/// index order. Always contains `i`.
pub fn neighborhood_of(opinions: &[f64], i: usize, epsilon: f64) -> Result<Vec<usize>> {
    let xi = *opinions.get(i).ok_or(Error::Index {
        index: i,
        len: opinions.len(),
    })?;
    Ok(opinions
        .iter()
        .enumerate()
        .filter(|(_, &xj)| (xj - xi).abs() <= epsilon)
        .map(|(j, _)| j)
        .collect())
}

/// Neighborhood of agent `i` under its own confidence interval.
pub fn neighborhood(pop: &Population, i: usize) -> Result<Vec<usize>> {
    let eps = pop.agent(i)?.epsilon();
    neighborhood_of(&pop.opinions(), i, eps)
}

/// A profile sorted by opinion, ties broken by index. Neighborhoods are
/// contiguous windows of the sorted order.
#[derive(Debug, Clone)]
pub(crate) struct SortedProfile {
    /// `order[r]` is the agent index at sorted rank `r`.
    pub order: Vec<usize>,
    /// `values[r]` is the opinion at sorted rank `r`.
    pub values: Vec<f64>,
    /// `rank[i]` is the sorted rank of agent `i`.
    pub rank: Vec<usize>,
}

impl SortedProfile {
    pub fn new(opinions: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..opinions.len()).collect();
        order.sort_by(|&a, &b| opinions[a].total_cmp(&opinions[b]).then(a.cmp(&b)));
        let values = order.iter().map(|&i| opinions[i]).collect();
        let mut rank = vec![0; opinions.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        SortedProfile {
            order,
            values,
            rank,
        }
    }

    /// Sorted ranks of all opinions within `epsilon` of `x`. The predicates
    /// evaluate the same `|x_j - x| <= epsilon` test as the brute-force scan
    /// (floating-point subtraction is sign-symmetric), so the window matches
    /// it exactly, boundary ties included.
    pub fn window(&self, x: f64, epsilon: f64) -> Range<usize> {
        let lo = self.values.partition_point(|&v| x - v > epsilon);
        let hi = self.values.partition_point(|&v| v - x <= epsilon);
        lo..hi
    }
}

/// Per-agent parameters of one update, resolved up front so both rules share
/// the same window machinery.
#[derive(Clone, Copy)]
enum Update<'a> {
    Mean,
    SelfWeighted(&'a [f64]),
}

fn update_profile(opinions: &[f64], epsilons: &[f64], update: Update<'_>) -> Vec<f64> {
    let sorted = SortedProfile::new(opinions);
    let one = |i: usize| -> f64 {
        let xi = opinions[i];
        let w = sorted.window(xi, epsilons[i]);
        let (lo_val, hi_val) = (sorted.values[w.start], sorted.values[w.end - 1]);
        let k = w.len();
        let next = match update {
            Update::Mean => sorted.values[w].iter().sum::<f64>() / k as f64,
            Update::SelfWeighted(weights) => {
                if k == 1 {
                    return xi;
                }
                let own = sorted.rank[i];
                let others: f64 = w.filter(|&r| r != own).map(|r| sorted.values[r]).sum();
                let wi = weights[i];
                wi * xi + (1.0 - wi) * (others / (k - 1) as f64)
            }
        };
        // Round-off can push a mean one ulp past the window hull.
        next.clamp(lo_val, hi_val)
    };
    if opinions.len() >= PARALLEL_MIN_AGENTS {
        (0..opinions.len()).into_par_iter().map(one).collect()
    } else {
        (0..opinions.len()).map(one).collect()
    }
}

/// One synchronous plain-average update from the frozen current profile.
pub fn step_hk(pop: &Population) -> Vec<f64> {
    update_profile(&pop.opinions(), &pop.epsilons(), Update::Mean)
}

/// One synchronous self-weighted update with a shared `w_own`.
///
/// Accepts any `w_own` in `(0, 1]`; the stricter `(0.5, 1]` range is
/// enforced by [`DynamicsConfig::validate`]. Agents with no neighbor other
/// than themselves keep their opinion.
pub fn step_hk_mod(pop: &Population, w_own: f64) -> Result<Vec<f64>> {
    step_hk_mod_per_agent(pop, &vec![w_own; pop.len()])
}

/// Self-weighted update with one own-weight per agent.
pub fn step_hk_mod_per_agent(pop: &Population, w_own: &[f64]) -> Result<Vec<f64>> {
    if w_own.len() != pop.len() {
        return Err(Error::validation(format!(
            "{} own-weights for population of {}",
            w_own.len(),
            pop.len()
        )));
    }
    if let Some(w) = w_own.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
        return Err(Error::validation(format!("w_own {w} outside (0, 1]")));
    }
    Ok(update_profile(
        &pop.opinions(),
        &pop.epsilons(),
        Update::SelfWeighted(w_own),
    ))
}

/// One update under the configured rule.
pub fn step(pop: &Population, cfg: &DynamicsConfig) -> Result<Vec<f64>> {
    match cfg.rule {
        Rule::Hk => Ok(step_hk(pop)),
        Rule::HkMod => step_hk_mod(pop, cfg.w_own),
    }
}

/// Max-norm distance between two profiles of equal length.
pub fn max_change(before: &[f64], after: &[f64]) -> f64 {
    debug_assert_eq!(before.len(), after.len());
    before
        .iter()
        .zip(after)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// Opinion profiles `x(0), x(1), ...`; entry `t` is the profile the
    /// update at step `t` read from. Agents injected at step `t` first appear
    /// in entry `t`, so later entries may be longer.
    pub trajectory: Vec<Vec<f64>>,
    /// First step whose update moved no agent by more than `delta`.
    pub t_eqm: Option<usize>,
    /// Cluster count of the final profile (computed even without convergence).
    pub c_eqm: usize,
    pub converged: bool,
    /// Roster at the end of the run, carrying the final opinions.
    pub population: Population,
}

impl SimulationResult {
    pub fn final_profile(&self) -> &[f64] {
        self.trajectory
            .last()
            .expect("trajectory holds at least x(0)")
    }

    /// `t_eqm`, or `cap` for runs that never settled.
    pub fn t_eqm_or(&self, cap: usize) -> usize {
        self.t_eqm.unwrap_or(cap)
    }
}

/// Called before every update; may mutate the population (e.g. add agents).
/// Returning `true` marks the step as perturbed, which blocks equilibrium
/// from being declared at that step.
pub trait StepHook {
    fn before_step(&mut self, t: usize, pop: &mut Population) -> Result<bool>;
}

impl StepHook for () {
    fn before_step(&mut self, _t: usize, _pop: &mut Population) -> Result<bool> {
        Ok(false)
    }
}

impl<F> StepHook for F
where
    F: FnMut(usize, &mut Population) -> Result<bool>,
{
    fn before_step(&mut self, t: usize, pop: &mut Population) -> Result<bool> {
        self(t, pop)
    }
}

/// Iterates the configured rule until the profile settles or `max_steps`
/// updates have been made.
pub fn simulate(pop: &Population, cfg: &DynamicsConfig) -> Result<SimulationResult> {
    simulate_with(pop, cfg, &mut ())
}

pub fn simulate_with<H: StepHook + ?Sized>(
    pop: &Population,
    cfg: &DynamicsConfig,
    hook: &mut H,
) -> Result<SimulationResult> {
    cfg.validate()?;
    let mut pop = pop.clone();
    let mut trajectory = Vec::with_capacity(cfg.max_steps.min(1024) + 1);
    let mut t_eqm = None;

    for t in 0..cfg.max_steps {
        let perturbed = hook.before_step(t, &mut pop)?;
        let current = pop.opinions();
        let next = step(&pop, cfg)?;
        let settled = !perturbed && max_change(&current, &next) <= cfg.delta;
        trajectory.push(current);
        pop.set_opinions(&next)?;
        if settled {
            t_eqm = Some(t);
            break;
        }
    }
    trajectory.push(pop.opinions());

    let c_eqm = count_clusters(trajectory.last().expect("non-empty"), cfg.cluster_tol)?;
    Ok(SimulationResult {
        trajectory,
        converged: t_eqm.is_some(),
        t_eqm,
        c_eqm,
        population: pop,
    })
}
