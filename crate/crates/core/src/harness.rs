//! Experiment sweeps.
//!
//! Every sweep expands into independent work items that run on the rayon
//! pool; results come back in the order the items were generated, so output
//! never depends on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_trajectory;
use crate::opinion::{cluster_labels, simulate, DynamicsConfig, Mindedness, SimulationResult};
use crate::placement::{
    budget_spent, run_with_placement, PlacementConfig, PlacementEvent, Strategy,
};
use crate::popgen::{clipped_normal_mixture, evenly_spaced, transform, MixtureSpec};
use crate::Population;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    EpsilonSweep,
    TransformSweep,
    PlacementCompare,
    TrajectoryDump,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::EpsilonSweep => "epsilon_sweep",
            SweepKind::TransformSweep => "transform_sweep",
            SweepKind::PlacementCompare => "placement_compare",
            SweepKind::TrajectoryDump => "trajectory_dump",
        })
    }
}

/// Which class a transform sweep converts, and to what openness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub from: Mindedness,
    #[serde(default = "moderate_epsilon")]
    pub epsilon_new: f64,
}

fn moderate_epsilon() -> f64 {
    Mindedness::Moderate.default_epsilon()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Openness values, transform fractions or budget fractions.
    pub grid: Vec<f64>,
    #[serde(default = "default_sizes")]
    pub population_sizes: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_mixture: MixtureSpec,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub placement: Option<PlacementConfig>,
    #[serde(default)]
    pub transform: Option<TransformSpec>,
    /// Run `k` uses seed `seed_base + k`.
    #[serde(default = "default_seed_base")]
    pub seed_base: u64,
    /// Also re-draw the initial opinions per run (the mixture seed becomes
    /// the run seed). Otherwise opinions stay fixed and only the transformed
    /// subset or the random placement varies.
    #[serde(default)]
    pub redraw_opinions: bool,
}

fn default_sizes() -> Vec<usize> {
    vec![50, 100, 200, 500]
}

fn default_runs() -> usize {
    5
}

fn default_seed_base() -> u64 {
    1
}

impl SweepSpec {
    pub fn new(kind: SweepKind, grid: Vec<f64>) -> Self {
        SweepSpec {
            kind,
            grid,
            population_sizes: default_sizes(),
            runs: default_runs(),
            base_mixture: MixtureSpec::default(),
            dynamics: DynamicsConfig::default(),
            placement: None,
            transform: None,
            seed_base: default_seed_base(),
            redraw_opinions: false,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(move |k| self.seed_base + k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::validation("sweep grid is empty"));
        }
        if let Some(p) = self.grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::validation(format!("grid point {p} outside [0, 1]")));
        }
        if self.runs < 1 {
            return Err(Error::validation("runs must be at least 1"));
        }
        if self.population_sizes.is_empty() {
            return Err(Error::validation("population_sizes is empty"));
        }
        self.dynamics.validate()?;
        if let Some(p) = &self.placement {
            p.validate()?;
        }
        match self.kind {
            SweepKind::EpsilonSweep => {
                if let Some(&n) = self.population_sizes.iter().find(|&&n| n < 2) {
                    return Err(Error::validation(format!(
                        "epsilon sweep needs n >= 2, got {n}"
                    )));
                }
            }
            SweepKind::TransformSweep => {
                if self.transform.is_none() {
                    return Err(Error::validation(
                        "transform sweep needs a `transform` block",
                    ));
                }
                self.base_mixture.validate()?;
            }
            SweepKind::PlacementCompare | SweepKind::TrajectoryDump => {
                self.base_mixture.validate()?;
            }
        }
        Ok(())
    }

    fn mixture(&self, n: usize, seed: Option<u64>) -> Result<Population> {
        let mut spec = self.base_mixture.clone();
        spec.n = n;
        if let (true, Some(s)) = (self.redraw_opinions, seed) {
            spec.rng_seed = s;
        }
        clipped_normal_mixture(&spec)
    }

    fn expect(&self, kind: SweepKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::validation(format!(
                "expected a {kind} spec, got {}",
                self.kind
            )));
        }
        self.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kind: SweepKind,
    pub point: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub strategy: Option<Strategy>,
    pub budget_spent: Option<usize>,
    /// Equilibrium step, or `max_steps` for runs that never settled.
    pub t_eqm: usize,
    pub converged: bool,
    pub c_eqm: usize,
}

impl SweepRecord {
    fn from_result(
        kind: SweepKind,
        point: f64,
        n: usize,
        seed: Option<u64>,
        cap: usize,
        res: &SimulationResult,
    ) -> Self {
        SweepRecord {
            kind,
            point,
            n,
            seed,
            strategy: None,
            budget_spent: None,
            t_eqm: res.t_eqm_or(cap),
            converged: res.converged,
            c_eqm: res.c_eqm,
        }
    }
}

/// Dispatches on `spec.kind`. Trajectory dumps produce no records; use
/// [`dump_trajectories`] for them.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    match spec.kind {
        SweepKind::EpsilonSweep => run_epsilon_sweep(spec),
        SweepKind::TransformSweep => run_transform_sweep(spec),
        SweepKind::PlacementCompare => run_placement_compare(spec),
        SweepKind::TrajectoryDump => Err(Error::validation(
            "trajectory_dump specs produce trajectories, not records",
        )),
    }
}

/// Evenly spaced homogeneous populations, one deterministic run per
/// `(epsilon, n)`.
pub fn run_epsilon_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.expect(SweepKind::EpsilonSweep)?;
    let items: Vec<(f64, usize)> = spec
        .grid
        .iter()
        .flat_map(|&eps| spec.population_sizes.iter().map(move |&n| (eps, n)))
        .collect();
    items
        .into_par_iter()
        .map(|(eps, n)| {
            let res = simulate(&evenly_spaced(n, eps)?, &spec.dynamics)?;
            Ok(SweepRecord::from_result(
                SweepKind::EpsilonSweep,
                eps,
                n,
                None,
                spec.dynamics.max_steps,
                &res,
            ))
        })
        .collect()
}

/// Converts a fraction of one class to the new openness, once per seed and
/// grid point.
pub fn run_transform_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.expect(SweepKind::TransformSweep)?;
    let tf = spec.transform.as_ref().expect("validated");
    let mut items = Vec::new();
    for &frac in &spec.grid {
        for &n in &spec.population_sizes {
            for seed in spec.seeds() {
                items.push((frac, n, seed));
            }
        }
    }
    items
        .into_par_iter()
        .map(|(frac, n, seed)| {
            let base = spec.mixture(n, Some(seed))?;
            let pop = transform(&base, tf.from, frac, tf.epsilon_new, seed)?;
            let res = simulate(&pop, &spec.dynamics)?;
            Ok(SweepRecord::from_result(
                SweepKind::TransformSweep,
                frac,
                n,
                Some(seed),
                spec.dynamics.max_steps,
                &res,
            ))
        })
        .collect()
}

/// Intelligent placement against the random baseline at budgets
/// `round(fraction * n)`. Intelligent placement is deterministic, so unless
/// opinions are re-drawn per seed it runs once per point.
pub fn run_placement_compare(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.expect(SweepKind::PlacementCompare)?;
    let template = spec.placement.clone().unwrap_or_default();
    let mut items = Vec::new();
    for &b in &spec.grid {
        for &n in &spec.population_sizes {
            if spec.redraw_opinions {
                for seed in spec.seeds() {
                    items.push((b, n, Strategy::Intelligent, Some(seed)));
                }
            } else {
                items.push((b, n, Strategy::Intelligent, None));
            }
            for seed in spec.seeds() {
                items.push((b, n, Strategy::RandomAtStart, Some(seed)));
            }
        }
    }
    items
        .into_par_iter()
        .map(|(b, n, strategy, seed)| {
            let pop = spec.mixture(n, seed)?;
            let place = PlacementConfig {
                budget: (b * n as f64).round() as usize,
                strategy,
                rng_seed: seed.unwrap_or(template.rng_seed),
                ..template.clone()
            };
            let (res, events) = run_with_placement(&pop, &spec.dynamics, &place)?;
            let mut rec = SweepRecord::from_result(
                SweepKind::PlacementCompare,
                b,
                n,
                seed,
                spec.dynamics.max_steps,
                &res,
            );
            rec.strategy = Some(strategy);
            rec.budget_spent = Some(budget_spent(&events));
            Ok(rec)
        })
        .collect()
}

/// Simulates (optionally with placement) and writes the per-step trajectory
/// CSV to `out`.
pub fn dump_trajectories<W: Write>(
    pop: &Population,
    dynamics: &DynamicsConfig,
    place: Option<&PlacementConfig>,
    out: W,
) -> Result<(SimulationResult, Vec<PlacementEvent>)> {
    let (res, events) = match place {
        Some(p) => run_with_placement(pop, dynamics, p)?,
        None => (simulate(pop, dynamics)?, Vec::new()),
    };
    write_trajectory(&res, out)?;
    Ok((res, events))
}

/// Per-cluster class membership of the final profile, clusters ordered from
/// the left pole.
pub fn cluster_composition(
    res: &SimulationResult,
    cluster_tol: f64,
) -> Result<Vec<BTreeMap<Mindedness, usize>>> {
    let labels = cluster_labels(res.final_profile(), cluster_tol)?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut comp = vec![BTreeMap::new(); k];
    for (a, &l) in res.population.agents().iter().zip(&labels) {
        *comp[l].entry(a.mindedness()).or_insert(0) += 1;
    }
    Ok(comp)
}

/// Aggregate of all seeds at one `(point, n, strategy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub kind: SweepKind,
    pub point: f64,
    pub n: usize,
    pub strategy: Option<Strategy>,
    pub runs: usize,
    pub mean_t_eqm: f64,
    pub min_t_eqm: usize,
    pub max_t_eqm: usize,
    pub mean_c_eqm: f64,
    pub min_c_eqm: usize,
    pub max_c_eqm: usize,
}

/// Arithmetic means (with min/max envelopes) grouped by point, size and
/// strategy, in first-appearance order.
pub fn summarize(records: &[SweepRecord]) -> Vec<PointSummary> {
    let mut groups: Vec<(PointSummary, Vec<&SweepRecord>)> = Vec::new();
    for r in records {
        let key = |s: &PointSummary| {
            s.kind == r.kind && s.point == r.point && s.n == r.n && s.strategy == r.strategy
        };
        match groups.iter_mut().find(|(s, _)| key(s)) {
            Some((_, members)) => members.push(r),
            None => groups.push((
                PointSummary {
                    kind: r.kind,
                    point: r.point,
                    n: r.n,
                    strategy: r.strategy,
                    runs: 0,
                    mean_t_eqm: 0.0,
                    min_t_eqm: 0,
                    max_t_eqm: 0,
                    mean_c_eqm: 0.0,
                    min_c_eqm: 0,
                    max_c_eqm: 0,
                },
                vec![r],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut s, members)| {
            let t: Vec<usize> = members.iter().map(|r| r.t_eqm).collect();
            let c: Vec<usize> = members.iter().map(|r| r.c_eqm).collect();
            s.runs = members.len();
            s.mean_t_eqm = mean(&t);
            s.min_t_eqm = *t.iter().min().expect("non-empty group");
            s.max_t_eqm = *t.iter().max().expect("non-empty group");
            s.mean_c_eqm = mean(&c);
            s.min_c_eqm = *c.iter().min().expect("non-empty group");
            s.max_c_eqm = *c.iter().max().expect("non-empty group");
            s
        })
        .collect()
}

fn mean(v: &[usize]) -> f64 {
    v.iter().sum::<usize>() as f64 / v.len() as f64
}

/// Spearman rank correlation with average ranks for ties. `None` when fewer
/// than two points or either series is constant.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

#[derive(Serialize)]
struct RecordRow {
    kind: SweepKind,
    point: f64,
    n: usize,
    seed: Option<u64>,
    strategy: Option<Strategy>,
    budget_spent: Option<usize>,
    t_eqm: usize,
    converged: bool,
    c_eqm: usize,
}

/// `kind,point,n,seed,strategy,budget_spent,t_eqm,converged,c_eqm`
pub fn write_records<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "kind",
            "point",
            "n",
            "seed",
            "strategy",
            "budget_spent",
            "t_eqm",
            "converged",
            "c_eqm",
        ])?;
    }
    for r in records {
        w.serialize(RecordRow {
            kind: r.kind,
            point: r.point,
            n: r.n,
            seed: r.seed,
            strategy: r.strategy,
            budget_spent: r.budget_spent,
            t_eqm: r.t_eqm,
            converged: r.converged,
            c_eqm: r.c_eqm,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summaries<W: Write>(summaries: &[PointSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dynamics() -> DynamicsConfig {
        DynamicsConfig {
            max_steps: 300,
            ..DynamicsConfig::hk()
        }
    }

    #[test]
    fn epsilon_sweep_below_spacing_is_frozen() {
        let spec = SweepSpec {
            population_sizes: vec![20, 41],
            dynamics: small_dynamics(),
            ..SweepSpec::new(SweepKind::EpsilonSweep, vec![0.01, 0.3])
        };
        let recs = run_epsilon_sweep(&spec).unwrap();
        assert_eq!(recs.len(), 4);
        let frozen: Vec<_> = recs.iter().filter(|r| r.point == 0.01).collect();
        for r in frozen {
            assert_eq!(r.t_eqm, 0);
            assert_eq!(r.c_eqm, r.n);
            assert!(r.converged);
        }
        assert!(recs.iter().filter(|r| r.point == 0.3).all(|r| r.c_eqm == 1));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let spec = SweepSpec::new(SweepKind::EpsilonSweep, vec![0.1]);
        assert!(run_transform_sweep(&spec).unwrap_err().is_validation());
        assert!(run_sweep(&SweepSpec::new(SweepKind::TrajectoryDump, vec![0.0])).is_err());
        let empty = SweepSpec::new(SweepKind::EpsilonSweep, vec![]);
        assert!(run_epsilon_sweep(&empty).is_err());
        let no_tf = SweepSpec::new(SweepKind::TransformSweep, vec![0.5]);
        assert!(run_transform_sweep(&no_tf).is_err());
    }

    #[test]
    fn transform_fraction_zero_is_the_baseline() {
        let spec = SweepSpec {
            population_sizes: vec![60],
            runs: 2,
            base_mixture: MixtureSpec::new(
                60,
                &[(Mindedness::Close, 0.8), (Mindedness::Open, 0.2)],
                4,
            ),
            dynamics: small_dynamics(),
            transform: Some(TransformSpec {
                from: Mindedness::Close,
                epsilon_new: 0.2,
            }),
            ..SweepSpec::new(SweepKind::TransformSweep, vec![0.0, 0.5])
        };
        let recs = run_transform_sweep(&spec).unwrap();
        assert_eq!(recs.len(), 2 * 2);
        let mut base = spec.base_mixture.clone();
        base.n = 60;
        let res = simulate(&clipped_normal_mixture(&base).unwrap(), &spec.dynamics).unwrap();
        for r in recs.iter().filter(|r| r.point == 0.0) {
            assert_eq!(r.c_eqm, res.c_eqm);
            assert_eq!(r.t_eqm, res.t_eqm_or(300));
        }
    }

    #[test]
    fn placement_budget_zero_matches_baseline() {
        let spec = SweepSpec {
            population_sizes: vec![40],
            runs: 2,
            base_mixture: MixtureSpec::new(
                40,
                &[(Mindedness::Close, 0.5), (Mindedness::Open, 0.5)],
                3,
            ),
            dynamics: small_dynamics(),
            ..SweepSpec::new(SweepKind::PlacementCompare, vec![0.0])
        };
        let recs = run_placement_compare(&spec).unwrap();
        assert_eq!(recs.len(), 3);
        let mut base = spec.base_mixture.clone();
        base.n = 40;
        let res = simulate(&clipped_normal_mixture(&base).unwrap(), &spec.dynamics).unwrap();
        for r in &recs {
            assert_eq!(r.c_eqm, res.c_eqm);
            assert_eq!(r.budget_spent, Some(0));
        }
    }

    #[test]
    fn summary_means_and_envelopes() {
        let mk = |seed, t, c| SweepRecord {
            kind: SweepKind::TransformSweep,
            point: 0.5,
            n: 10,
            seed: Some(seed),
            strategy: None,
            budget_spent: None,
            t_eqm: t,
            converged: true,
            c_eqm: c,
        };
        let s = summarize(&[mk(1, 10, 3), mk(2, 20, 5), mk(3, 30, 4)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].runs, 3);
        assert_eq!(s[0].mean_t_eqm, 20.0);
        assert_eq!(s[0].mean_c_eqm, 4.0);
        assert_eq!((s[0].min_c_eqm, s[0].max_c_eqm), (3, 5));
    }

    #[test]
    fn rank_correlation_matches_closed_form_without_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ys = [3.0, 1.0, 6.0, 2.0, 5.0, 4.0];
        // 1 - 6 sum(d^2) / (n (n^2 - 1)) with d = rank differences
        let d2: f64 = [
            (1.0, 3.0),
            (2.0, 1.0),
            (3.0, 6.0),
            (4.0, 2.0),
            (5.0, 5.0),
            (6.0, 4.0),
        ]
        .iter()
        .map(|(a, b): &(f64, f64)| (a - b).powi(2))
        .sum();
        let expected = 1.0 - 6.0 * d2 / (6.0 * 35.0);
        assert!((rank_correlation(&xs, &ys).unwrap() - expected).abs() < 1e-12);
        assert!(
            (rank_correlation(&xs, &[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12
        );
        assert_eq!(rank_correlation(&xs, &[1.0; 6]), None);
    }

    #[test]
    fn tied_ranks_are_averaged() {
        assert_eq!(ranks(&[0.5, 0.1, 0.5, 0.9]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn record_csv_header() {
        let mut buf = Vec::new();
        write_records(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kind,point,n,seed,strategy,budget_spent,t_eqm,converged,c_eqm\n"
        );
    }

    #[test]
    fn composition_of_consensus() {
        let pop = Population::from_profiles(&[0.4, 0.5, 0.6], &[0.01, 0.2, 0.45]).unwrap();
        let (res, _) =
            dump_trajectories(&pop, &DynamicsConfig::hk(), None, std::io::sink()).unwrap();
        let comp = cluster_composition(&res, 1e-3).unwrap();
        assert!(!comp.is_empty());
        let total: usize = comp.iter().flat_map(|m| m.values()).sum();
        assert_eq!(total, 3);
    }
}
