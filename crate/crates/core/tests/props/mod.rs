//! Randomized invariants shared by the property and acceptance targets.

use std::collections::BTreeSet;

use hk_echo::graph::{build_graph, regular_degree_check};
use hk_echo::harness::{run_sweep, summarize, SweepKind, SweepSpec, TransformSpec};
use hk_echo::opinion::{
    neighborhood, neighborhood_of, simulate, step_hk, step_hk_mod, step_hk_mod_per_agent,
};
use hk_echo::placement::{
    budget_spent, compute_injection, find_converging_pairs, run_with_placement,
};
use hk_echo::popgen::{clipped_normal_mixture, evenly_spaced, transform};
use hk_echo::{
    DynamicsConfig, InfluenceGraph, Mindedness, MixtureSpec, PairScope, PlacementConfig,
    Population, Rule, Strategy as Placement,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 1000;

pub type Outcome = Result<(), String>;

fn check<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Opinions in [0, 1]; half the time snapped to a coarse grid so ties and
/// exact-boundary distances show up.
fn opinion() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, (0..=20u32).prop_map(|k| k as f64 / 20.0)]
}

fn openness() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.01),
        Just(0.2),
        Just(0.45),
        0.0..=1.0f64,
        (0..=10u32).prop_map(|k| k as f64 / 20.0)
    ]
}

fn population(max: usize) -> impl Strategy<Value = Population> {
    (1..=max)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(opinion(), n),
                prop::collection::vec(openness(), n),
            )
        })
        .prop_map(|(x, e)| Population::from_profiles(&x, &e).unwrap())
}

fn homogeneous(max: usize) -> impl Strategy<Value = Population> {
    (prop::collection::vec(opinion(), 1..=max), openness())
        .prop_map(|(x, e)| Population::homogeneous(&x, e).unwrap())
}

fn open_mixture(max: usize) -> impl Strategy<Value = Population> {
    (2..=max)
        .prop_flat_map(|n| {
            let class = prop_oneof![3 => Just(0.45), 1 => Just(0.01), 1 => Just(0.2)];
            (
                prop::collection::vec(opinion(), n),
                prop::collection::vec(class, n),
            )
        })
        .prop_map(|(x, e)| Population::from_profiles(&x, &e).unwrap())
}

fn hull(x: &[f64]) -> (f64, f64) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn reach(g: &InfluenceGraph, from: usize) -> Vec<bool> {
    let mut seen = vec![false; g.n()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for &w in g.out_neighbors(v).unwrap() {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

pub fn convex_hull_never_grows() -> Outcome {
    check((population(40), 0.5001..=1.0f64), |(pop, w)| {
        let (lo, hi) = hull(&pop.opinions());
        for next in [step_hk(&pop), step_hk_mod(&pop, w).unwrap()] {
            let (nlo, nhi) = hull(&next);
            prop_assert!(nlo >= lo && nhi <= hi, "[{lo}, {hi}] -> [{nlo}, {nhi}]");
        }
        Ok(())
    })
}

pub fn homogeneous_order_is_preserved() -> Outcome {
    check(homogeneous(40), |pop| {
        let x = pop.opinions();
        let next = step_hk(&pop);
        for i in 0..x.len() {
            for j in 0..x.len() {
                if x[i] <= x[j] {
                    prop_assert!(
                        next[i] <= next[j],
                        "x{i}={} x{j}={} -> {} {}",
                        x[i],
                        x[j],
                        next[i],
                        next[j]
                    );
                }
            }
        }
        Ok(())
    })
}

pub fn every_agent_is_its_own_neighbor() -> Outcome {
    check(population(30), |pop| {
        let res = simulate(
            &pop,
            &DynamicsConfig {
                max_steps: 5,
                ..DynamicsConfig::hk()
            },
        )
        .unwrap();
        for profile in &res.trajectory {
            for (i, eps) in pop.epsilons().into_iter().enumerate() {
                prop_assert!(neighborhood_of(profile, i, eps).unwrap().contains(&i));
            }
        }
        Ok(())
    })
}

pub fn wider_interval_means_superset() -> Outcome {
    check(
        (
            prop::collection::vec(opinion(), 1..30),
            0.0..=1.0f64,
            0.0..=1.0f64,
            any::<prop::sample::Index>(),
        ),
        |(x, a, b, pick)| {
            let (small, large) = if a <= b { (a, b) } else { (b, a) };
            let i = pick.index(x.len());
            let n_small: BTreeSet<_> = neighborhood_of(&x, i, small).unwrap().into_iter().collect();
            let n_large: BTreeSet<_> = neighborhood_of(&x, i, large).unwrap().into_iter().collect();
            prop_assert!(n_small.is_subset(&n_large));
            Ok(())
        },
    )
}

pub fn equal_openness_is_symmetric() -> Outcome {
    check(homogeneous(30), |pop| {
        let sets: Vec<BTreeSet<usize>> = (0..pop.len())
            .map(|i| neighborhood(&pop, i).unwrap().into_iter().collect())
            .collect();
        for i in 0..pop.len() {
            for j in 0..pop.len() {
                prop_assert_eq!(sets[i].contains(&j), sets[j].contains(&i));
            }
        }
        Ok(())
    })
}

pub fn graph_matches_neighborhoods() -> Outcome {
    check(population(40), |pop| {
        let g = build_graph(&pop);
        for i in 0..pop.len() {
            prop_assert_eq!(
                g.out_neighbors(i).unwrap(),
                &neighborhood(&pop, i).unwrap()[..]
            );
        }
        Ok(())
    })
}

pub fn plain_mean_is_self_weighted_with_uniform_weights() -> Outcome {
    check(population(40), |pop| {
        let w: Vec<f64> = (0..pop.len())
            .map(|i| 1.0 / neighborhood(&pop, i).unwrap().len() as f64)
            .collect();
        let hk = step_hk(&pop);
        let modded = step_hk_mod_per_agent(&pop, &w).unwrap();
        for (a, b) in hk.iter().zip(&modded) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        Ok(())
    })
}

pub fn consensus_is_a_fixpoint() -> Outcome {
    check(
        (
            opinion(),
            1usize..30,
            prop::collection::vec(openness(), 30),
            0.5001..=1.0f64,
        ),
        |(x, n, e, w)| {
            let pop = Population::from_profiles(&vec![x; n], &e[..n]).unwrap();
            prop_assert_eq!(step_hk(&pop), vec![x; n]);
            prop_assert_eq!(step_hk_mod(&pop, w).unwrap(), vec![x; n]);
            Ok(())
        },
    )
}

pub fn pull_direction_matches_update() -> Outcome {
    check(population(40), |pop| {
        let g = build_graph(&pop);
        let x = pop.opinions();
        let next = step_hk(&pop);
        for i in 0..pop.len() {
            let p = g.pull(i).unwrap();
            let k = g.out_degree(i).unwrap() as f64;
            let moved = next[i] - x[i];
            // the update moves by exactly net / |N_i|
            prop_assert!(
                (moved - p.net() / k).abs() <= 1e-12,
                "agent {i}: moved {moved}, net {}",
                p.net()
            );
            if p.net().abs() > 1e-9 {
                prop_assert_eq!(moved.signum(), p.net().signum());
            }
        }
        Ok(())
    })
}

pub fn interior_degree_is_regular() -> Outcome {
    check((3usize..400, 0usize..200, 0.05..0.95f64), |(n, m, frac)| {
        let eps = (m as f64 + frac) / (n - 1) as f64;
        prop_assume!(eps <= 1.0);
        let pop = evenly_spaced(n, eps).unwrap();
        let g = build_graph(&pop);
        let k = regular_degree_check(n, eps).unwrap();
        prop_assert_eq!(k, n.min(2 * m + 1));
        for i in m..n.saturating_sub(m) {
            prop_assert_eq!(g.out_degree(i).unwrap(), k, "vertex {}", i);
        }
        Ok(())
    })
}

pub fn components_partition_the_graph() -> Outcome {
    check(population(30), |pop| {
        let g = build_graph(&pop);
        let comps = g.strongly_connected_components();
        let mut owner = vec![usize::MAX; g.n()];
        for (c, comp) in comps.iter().enumerate() {
            prop_assert!(!comp.is_empty());
            for &v in comp {
                prop_assert_eq!(owner[v], usize::MAX, "vertex {} in two components", v);
                owner[v] = c;
            }
        }
        prop_assert!(owner.iter().all(|&c| c != usize::MAX));
        let reach: Vec<Vec<bool>> = (0..g.n()).map(|v| reach(&g, v)).collect();
        for u in 0..g.n() {
            for v in 0..g.n() {
                let mutual = reach[u][v] && reach[v][u];
                // same component exactly when mutually reachable
                prop_assert_eq!(mutual, owner[u] == owner[v], "{} {}", u, v);
            }
        }
        Ok(())
    })
}

pub fn simulation_is_bit_identical() -> Outcome {
    check(
        (
            population(60),
            prop_oneof![Just(Rule::Hk), Just(Rule::HkMod)],
        ),
        |(pop, rule)| {
            let cfg = DynamicsConfig {
                rule,
                max_steps: 50,
                ..DynamicsConfig::default()
            };
            let a = simulate(&pop, &cfg).unwrap();
            let b = simulate(&pop, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            let serial = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap();
            let c = serial.install(|| simulate(&pop, &cfg).unwrap());
            prop_assert_eq!(a, c);
            Ok(())
        },
    )
}

pub fn placement_respects_budget() -> Outcome {
    check(
        (
            open_mixture(30),
            0usize..40,
            any::<bool>(),
            any::<u64>(),
            prop_oneof![Just(PairScope::OpenOnly), Just(PairScope::AllAgents)],
        ),
        |(pop, budget, random, seed, scope)| {
            let place = PlacementConfig {
                budget,
                strategy: if random {
                    Placement::RandomAtStart
                } else {
                    Placement::Intelligent
                },
                rng_seed: seed,
                pair_scope: scope,
                ..PlacementConfig::default()
            };
            let dynamics = DynamicsConfig {
                max_steps: 60,
                ..DynamicsConfig::hk()
            };
            let (res, events) = run_with_placement(&pop, &dynamics, &place).unwrap();
            let spent = budget_spent(&events);
            prop_assert!(spent <= budget);
            if random {
                prop_assert_eq!(spent, budget);
            }
            let agents = res.population.agents();
            prop_assert_eq!(agents.len(), pop.len() + spent);
            for (orig, now) in pop.agents().iter().zip(agents) {
                prop_assert_eq!(orig.id, now.id);
                prop_assert_eq!(orig.epsilon(), now.epsilon());
                prop_assert!(!now.injected);
            }
            for a in &agents[pop.len()..] {
                prop_assert!(a.injected);
                prop_assert_eq!(a.epsilon(), place.epsilon_new);
            }
            prop_assert!(events.windows(2).all(|w| w[0].time <= w[1].time));
            let (again, events_again) = run_with_placement(&pop, &dynamics, &place).unwrap();
            prop_assert_eq!(res, again);
            prop_assert_eq!(events, events_again);
            Ok(())
        },
    )
}

pub fn left_batch_cancels_rightward_pull() -> Outcome {
    check(
        (
            open_mixture(30),
            prop_oneof![Just(PairScope::OpenOnly), Just(PairScope::AllAgents)],
        ),
        |(pop, scope)| {
            let g = build_graph(&pop);
            for pair in find_converging_pairs(&g, scope) {
                let (left, right) = compute_injection(&g, pair.left, pair.right, 0, scope).unwrap();
                for (ev, anchor, before) in [
                    (left, pair.left, pair.left_pull),
                    (right, pair.right, pair.right_pull),
                ] {
                    if ev.clamped {
                        continue;
                    }
                    let mut p = pop.clone();
                    for _ in 0..ev.count {
                        p.inject(ev.opinion, 0.2).unwrap();
                    }
                    let after = build_graph(&p).pull(anchor).unwrap();
                    if ev.side == Some(hk_echo::Side::Left) {
                        prop_assert!(after.sum_left - before.sum_left >= before.net() - 1e-12);
                        prop_assert!(!after.is_rightward() || after.net() <= 1e-12);
                    } else {
                        prop_assert!(after.sum_right - before.sum_right >= -before.net() - 1e-12);
                        prop_assert!(!after.is_leftward() || after.net() >= -1e-12);
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn generators_are_seeded() -> Outcome {
    check(
        (1usize..300, 0.0..=1.0f64, any::<u64>()),
        |(n, close, seed)| {
            let spec = MixtureSpec::new(
                n,
                &[(Mindedness::Close, close), (Mindedness::Open, 1.0 - close)],
                seed,
            );
            let a = clipped_normal_mixture(&spec).unwrap();
            prop_assert_eq!(&a, &clipped_normal_mixture(&spec).unwrap());
            prop_assert_eq!(a.len(), n);
            prop_assert!(a.opinions().iter().all(|x| (0.0..=1.0).contains(x)));
            Ok(())
        },
    )
}

pub fn eighty_twenty_mean_openness() -> Outcome {
    check((1usize..200, any::<u64>()), |(k, seed)| {
        let spec = MixtureSpec::new(
            5 * k,
            &[(Mindedness::Close, 0.8), (Mindedness::Open, 0.2)],
            seed,
        );
        let pop = clipped_normal_mixture(&spec).unwrap();
        prop_assert!((pop.mean_epsilon() - 0.098).abs() < 1e-12);
        Ok(())
    })
}

pub fn transform_only_touches_openness() -> Outcome {
    check(
        (
            1usize..200,
            0.0..=1.0f64,
            any::<u64>(),
            any::<u64>(),
            any::<bool>(),
        ),
        |(n, fraction, mix_seed, seed, from_open)| {
            let spec = MixtureSpec::new(
                n,
                &[(Mindedness::Close, 0.5), (Mindedness::Open, 0.5)],
                mix_seed,
            );
            let pop = clipped_normal_mixture(&spec).unwrap();
            let from = if from_open {
                Mindedness::Open
            } else {
                Mindedness::Close
            };
            let out = transform(&pop, from, fraction, 0.2, seed).unwrap();
            prop_assert_eq!(&out, &transform(&pop, from, fraction, 0.2, seed).unwrap());
            prop_assert_eq!(out.opinions(), pop.opinions());
            let ids = |p: &Population| p.agents().iter().map(|a| a.id).collect::<Vec<_>>();
            prop_assert_eq!(ids(&out), ids(&pop));
            let before = pop.count(from);
            let moved = (fraction * before as f64).round() as usize;
            prop_assert_eq!(out.count(from), before - moved);
            prop_assert_eq!(out.count(Mindedness::Moderate), moved);
            for (a, b) in pop.agents().iter().zip(out.agents()) {
                prop_assert!(
                    a.epsilon() == b.epsilon() || (a.mindedness() == from && b.epsilon() == 0.2)
                );
            }
            Ok(())
        },
    )
}

pub fn sweep_records_and_envelopes() -> Outcome {
    check(
        (
            prop::collection::vec((0..=10u32).prop_map(|k| k as f64 / 10.0), 1..4),
            prop::collection::vec(2usize..25, 1..3),
            1usize..4,
            prop_oneof![
                Just(SweepKind::EpsilonSweep),
                Just(SweepKind::TransformSweep),
                Just(SweepKind::PlacementCompare)
            ],
            0u64..1000,
        ),
        |(grid, sizes, runs, kind, seed_base)| {
            let mut spec = SweepSpec::new(kind, grid.clone());
            spec.population_sizes = sizes.clone();
            spec.runs = runs;
            spec.seed_base = seed_base;
            spec.dynamics.max_steps = 100;
            if kind == SweepKind::TransformSweep {
                spec.transform = Some(TransformSpec {
                    from: Mindedness::Close,
                    epsilon_new: 0.2,
                });
            }
            if kind == SweepKind::PlacementCompare {
                spec.placement = Some(PlacementConfig::default());
            }
            let records = run_sweep(&spec).unwrap();
            let per_point = match kind {
                SweepKind::EpsilonSweep => 1,
                SweepKind::TransformSweep => runs,
                _ => 1 + runs,
            };
            prop_assert_eq!(records.len(), grid.len() * sizes.len() * per_point);
            for s in summarize(&records) {
                prop_assert!(
                    s.min_t_eqm as f64 <= s.mean_t_eqm + 1e-9
                        && s.mean_t_eqm <= s.max_t_eqm as f64 + 1e-9
                );
                prop_assert!(
                    s.min_c_eqm as f64 <= s.mean_c_eqm + 1e-9
                        && s.mean_c_eqm <= s.max_c_eqm as f64 + 1e-9
                );
            }
            Ok(())
        },
    )
}

pub type Property = (&'static str, fn() -> Outcome);

/// Every property by name, for targets that report them together.
#[allow(dead_code)]
pub const ALL: &[Property] = &[
    ("convex_hull_never_grows", convex_hull_never_grows),
    (
        "homogeneous_order_is_preserved",
        homogeneous_order_is_preserved,
    ),
    (
        "every_agent_is_its_own_neighbor",
        every_agent_is_its_own_neighbor,
    ),
    (
        "wider_interval_means_superset",
        wider_interval_means_superset,
    ),
    ("equal_openness_is_symmetric", equal_openness_is_symmetric),
    ("graph_matches_neighborhoods", graph_matches_neighborhoods),
    (
        "plain_mean_is_self_weighted_with_uniform_weights",
        plain_mean_is_self_weighted_with_uniform_weights,
    ),
    ("consensus_is_a_fixpoint", consensus_is_a_fixpoint),
    (
        "pull_direction_matches_update",
        pull_direction_matches_update,
    ),
    ("interior_degree_is_regular", interior_degree_is_regular),
    (
        "components_partition_the_graph",
        components_partition_the_graph,
    ),
    ("simulation_is_bit_identical", simulation_is_bit_identical),
    ("placement_respects_budget", placement_respects_budget),
    (
        "left_batch_cancels_rightward_pull",
        left_batch_cancels_rightward_pull,
    ),
    ("generators_are_seeded", generators_are_seeded),
    ("eighty_twenty_mean_openness", eighty_twenty_mean_openness),
    (
        "transform_only_touches_openness",
        transform_only_touches_openness,
    ),
    ("sweep_records_and_envelopes", sweep_records_and_envelopes),
];
