//! Cross-module invariants on seeded random corpora, plus proptest
//! coverage of the structural graph/chain properties.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use pivotrank::avoidance::{
    avoidance_fundamental, avoidance_hitting_cost, avoidance_hitting_time, AvoidanceQuery,
    TargetSweep, FEASIBILITY_EPS,
};
use pivotrank::chain::{build_chain, partition, Chain};
use pivotrank::classical::{
    absorption_probabilities, fundamental_matrix, full_hitting_times, FundamentalMatrix,
};
use pivotrank::graph::Graph;
use pivotrank::netgen::{random_graph, two_block};
use pivotrank::pivotality::{ath, mf};

fn corpus_sized(count: u64, n_min: usize, n_max: usize, directed: bool, seed: u64) -> Vec<Graph> {
    (0..count)
        .map(|i| {
            let n = n_min + (i as usize % (n_max - n_min + 1));
            random_graph(n, 0.45, seed.wrapping_add(i), directed).expect("corpus graph")
        })
        .collect()
}

fn corpus(count: u64, n_max: usize, directed: bool, seed: u64) -> Vec<Graph> {
    corpus_sized(count, 3, n_max, directed, seed)
}

fn fm(c: &Chain, absorbing: &[usize]) -> FundamentalMatrix {
    let part = partition(c, &BTreeSet::from_iter(absorbing.iter().copied())).unwrap();
    fundamental_matrix(&part).unwrap()
}

#[test]
fn rows_of_p_are_stochastic() {
    for g in corpus(30, 12, true, 10).iter().chain(corpus(30, 12, false, 11).iter()) {
        let c = build_chain(g).unwrap();
        for i in 0..c.state_count() {
            let sum: f64 = c.transition().row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "row {i} sums to {sum}");
        }
    }
}

#[test]
fn undirected_walk_satisfies_detailed_balance() {
    for g in corpus(30, 12, false, 21) {
        let c = build_chain(&g).unwrap();
        let d = c.out_degree();
        let p = c.transition();
        for e in g.edges() {
            let lhs = d[e.src] * p[(e.src, e.dst)];
            let rhs = d[e.dst] * p[(e.dst, e.src)];
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "detailed balance broken on {} -> {}",
                e.src,
                e.dst
            );
        }
    }
}

#[test]
fn fundamental_matrix_residual_and_bounds() {
    for g in corpus(25, 14, true, 33) {
        let c = build_chain(&g).unwrap();
        let f = fm(&c, &[0]);
        let n = f.values().nrows();
        let part = partition(&c, &BTreeSet::from([0])).unwrap();
        let residual =
            f.values() * (DMatrix::identity(n, n) - part.p_tt()) - DMatrix::<f64>::identity(n, n);
        assert!(residual.iter().all(|v| v.abs() <= 1e-9));
        for i in 0..n {
            assert!(f.values()[(i, i)] >= 1.0 - 1e-12, "diagonal below one");
            for j in 0..n {
                assert!(f.values()[(i, j)] >= -1e-12, "negative visit count");
            }
        }
        let h = f.hitting_times();
        assert!(h.iter().all(|&x| x >= 1.0 - 1e-12), "hitting time below 1");
        assert_eq!(f.hitting_costs(&c), f.hitting_times());
    }
}

#[test]
fn absorption_rows_are_distributions() {
    for g in corpus(25, 12, true, 47) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let part = partition(&c, &BTreeSet::from([0, n - 1])).unwrap();
        let f = fundamental_matrix(&part).unwrap();
        let q = absorption_probabilities(&f, &part);
        for i in 0..q.values().nrows() {
            let mut sum = 0.0;
            for j in 0..q.values().ncols() {
                let v = q.values()[(i, j)];
                assert!((-1e-9..=1.0 + 1e-9).contains(&v));
                sum += v;
            }
            assert!((sum - 1.0).abs() <= 1e-9);
        }
    }
}

/// 100 random chains: the incremental update must match the direct solve.
#[test]
fn incremental_update_matches_direct_solve() {
    let graphs: Vec<Graph> = corpus_sized(50, 4, 12, true, 55)
        .into_iter()
        .chain(corpus_sized(50, 4, 12, false, 56))
        .collect();
    assert_eq!(graphs.len(), 100);
    for g in graphs {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let f1 = fm(&c, &[0]);
        let extra = BTreeSet::from([1, n - 1]);
        let incremental = f1.incremental(&extra).unwrap();
        let direct = {
            let mut absorbing = extra.clone();
            absorbing.insert(0);
            let part = partition(&c, &absorbing).unwrap();
            fundamental_matrix(&part).unwrap()
        };
        for &i in direct.transient() {
            for &j in direct.transient() {
                let a = incremental.entry(i, j).unwrap();
                let b = direct.entry(i, j).unwrap();
                assert!(
                    (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1.0),
                    "incremental {a} vs direct {b} at ({i},{j})"
                );
            }
        }
    }
}

#[test]
fn normalized_fundamental_matches_absorption_route() {
    for g in corpus(40, 12, true, 71) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let f = fm(&c, &[0]);
        let j = n - 1;
        let shortcut = f.absorption_to(j).unwrap();
        let part = partition(&c, &BTreeSet::from([0, j])).unwrap();
        let direct = absorption_probabilities(&fundamental_matrix(&part).unwrap(), &part);
        for (pos, &state) in part.transient().iter().enumerate() {
            let a = shortcut[f.transient_pos(state).unwrap()];
            let b = direct.values()[(pos, part.absorbing_pos(j).unwrap())];
            assert!((a - b).abs() <= 1e-9, "state {state}: {a} vs {b}");
        }
        // and at j itself the shortcut gives exactly one
        assert_eq!(shortcut[f.transient_pos(j).unwrap()], 1.0);
    }
}

#[test]
fn recursive_hitting_cost_identity() {
    // U_s = r_s + sum_m P_sm U_m on every transient state
    for g in corpus(20, 10, false, 91) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let part = partition(&c, &BTreeSet::from([n - 1])).unwrap();
        let f = fundamental_matrix(&part).unwrap();
        let u = f.hitting_costs(&c);
        let r = c.expected_out_cost();
        let mut u_full = DVector::zeros(n);
        for (pos, &s) in part.transient().iter().enumerate() {
            u_full[s] = u[pos];
        }
        for (pos, &s) in part.transient().iter().enumerate() {
            let mut rhs = r[s];
            for m in 0..n {
                rhs += c.transition()[(s, m)] * u_full[m];
            }
            assert!((u[pos] - rhs).abs() <= 1e-9, "recursion broken at {s}");
        }
    }
}

#[test]
fn empty_avoid_reduces_to_classical_metrics() {
    for g in corpus(20, 10, true, 101) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let t = n - 1;
        let h_classical = full_hitting_times(&c, &BTreeSet::from([t])).unwrap();
        for s in 0..n - 1 {
            let q = AvoidanceQuery::new(s, t, BTreeSet::new()).unwrap();
            let h = avoidance_hitting_time(&c, &q).unwrap();
            assert!((h.value - h_classical[s]).abs() <= 1e-9);
            assert!((h.feasibility - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn conditioned_chain_equivalence() {
    // the avoidance hitting time equals the classical hitting time on the
    // feasibility-reweighted chain restricted to feasible states
    for g in corpus(25, 10, true, 113) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let (s, t, o) = (0, n - 1, 1);
        if s == o || t == o {
            continue;
        }
        let query = AvoidanceQuery::new(s, t, BTreeSet::from([o])).unwrap();
        let direct = avoidance_hitting_time(&c, &query).unwrap();
        if !direct.is_feasible() {
            continue;
        }
        let af = avoidance_fundamental(&c, &query).unwrap();
        let mut q_full = vec![0.0; n];
        for &state in af.transient() {
            q_full[state] = af.feasibility_of(state).unwrap();
        }
        q_full[t] = 1.0;
        let kept: Vec<usize> = (0..n).filter(|&i| q_full[i] > FEASIBILITY_EPS).collect();
        let m = kept.len();
        let mut p_tilde = DMatrix::zeros(m, m);
        for (a, &i) in kept.iter().enumerate() {
            if i == t {
                p_tilde[(a, a)] = 1.0;
                continue;
            }
            for (b, &j) in kept.iter().enumerate() {
                p_tilde[(a, b)] = c.transition()[(i, j)] * q_full[j] / q_full[i];
            }
            // renormalize the float noise so the constructor accepts it
            let sum: f64 = p_tilde.row(a).iter().sum();
            for b in 0..m {
                p_tilde[(a, b)] /= sum;
            }
        }
        let conditioned =
            Chain::from_transition(p_tilde, DMatrix::repeat(m, m, 1.0)).unwrap();
        let new_t = kept.iter().position(|&i| i == t).unwrap();
        let new_s = kept.iter().position(|&i| i == s).unwrap();
        let h = full_hitting_times(&conditioned, &BTreeSet::from([new_t])).unwrap();
        assert!(
            (h[new_s] - direct.value).abs() <= 1e-8 * direct.value.max(1.0),
            "conditioned chain gives {}, closed form {}",
            h[new_s],
            direct.value
        );
    }
}

#[test]
fn monotone_feasibility_under_set_growth() {
    for g in corpus(25, 10, false, 131) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let t = n - 1;
        if n < 5 {
            continue;
        }
        let small = AvoidanceQuery::new(0, t, BTreeSet::from([1])).unwrap();
        let large = AvoidanceQuery::new(0, t, BTreeSet::from([1, 2])).unwrap();
        let qs = avoidance_hitting_time(&c, &small).unwrap().feasibility;
        let ql = avoidance_hitting_time(&c, &large).unwrap().feasibility;
        assert!(ql <= qs + 1e-12, "enlarging the avoid set raised feasibility");
    }
}

#[test]
fn sweep_agrees_with_direct_avoidance_route() {
    for g in corpus(20, 12, true, 149) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let t = n - 1;
        let sweep = TargetSweep::new(&c, t).unwrap();
        for s in 0..n - 1 {
            for k in 0..n - 1 {
                if k == s {
                    continue;
                }
                let query = AvoidanceQuery::new(s, k, BTreeSet::from([t])).unwrap();
                let direct = avoidance_hitting_time(&c, &query).unwrap();
                let batched = sweep.avoidance_to(s, k).unwrap();
                assert!(
                    (direct.feasibility - batched.feasibility).abs() <= 1e-9,
                    "feasibility mismatch at ({s},{k})"
                );
                if direct.is_feasible() && batched.is_feasible() {
                    assert!(
                        (direct.value - batched.value).abs()
                            <= 1e-8 * direct.value.abs().max(1.0),
                        "avoidance mismatch at ({s},{k}): {} vs {}",
                        direct.value,
                        batched.value
                    );
                } else {
                    assert_eq!(direct.is_feasible(), batched.is_feasible());
                }
            }
        }
    }
}

#[test]
fn unit_cost_avoidance_cost_equals_time_bitwise() {
    for g in corpus(15, 10, false, 163) {
        let c = build_chain(&g).unwrap();
        let n = c.state_count();
        let query = AvoidanceQuery::new(0, n - 1, BTreeSet::from([1])).unwrap();
        let h = avoidance_hitting_time(&c, &query).unwrap();
        let u = avoidance_hitting_cost(&c, &query).unwrap();
        assert_eq!(h.value, u.value);
        assert_eq!(h.feasibility, u.feasibility);
    }
}

#[test]
fn cut_vertex_law_on_two_block_graphs() {
    for seed in 0..5u64 {
        let (g, k) = two_block(5 + (seed as usize % 3), 5, 0.5, 200 + seed).unwrap();
        let c = build_chain(&g).unwrap();
        let s = g.index_of("a0").unwrap();
        let t = g.index_of("b1").unwrap();
        let pivot = ath(&c, s, t, k).unwrap();
        assert!(pivot.abs() <= 1e-9, "cut vertex pivotality {pivot}");
        for other in 0..g.node_count() {
            if other == s || other == t || other == k {
                continue;
            }
            let score = ath(&c, s, t, other).unwrap();
            assert!(score <= 1e-9, "non-cut node {other} scored {score}");
        }
        assert_eq!(mf(&g, s, t, k).unwrap(), 1.0);
    }
}

#[test]
fn core_types_are_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Graph>();
    assert_send_sync::<Chain>();
    assert_send_sync::<pivotrank::ChainPartition>();
    assert_send_sync::<FundamentalMatrix>();
    assert_send_sync::<pivotrank::AbsorptionMatrix>();
    assert_send_sync::<pivotrank::avoidance::TargetSweep>();
    assert_send_sync::<pivotrank::PivotalityReport>();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_chain_rows_stochastic(seed in 0u64..5000, n in 3usize..14, directed in any::<bool>()) {
        let g = random_graph(n, 0.4, seed, directed).unwrap();
        let c = build_chain(&g).unwrap();
        for i in 0..n {
            let sum: f64 = c.transition().row(i).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn partition_blocks_reassemble_exactly(seed in 0u64..5000, n in 4usize..12) {
        let g = random_graph(n, 0.45, seed, true).unwrap();
        let c = build_chain(&g).unwrap();
        let absorbing = BTreeSet::from([0, n / 2]);
        let part = partition(&c, &absorbing).unwrap();
        for (ti, &i) in part.transient().iter().enumerate() {
            for (tj, &j) in part.transient().iter().enumerate() {
                prop_assert_eq!(part.p_tt()[(ti, tj)], c.transition()[(i, j)]);
            }
            for (aj, &j) in part.absorbing().iter().enumerate() {
                prop_assert_eq!(part.p_ta()[(ti, aj)], c.transition()[(i, j)]);
            }
        }
    }

    #[test]
    fn feasibility_stays_in_unit_interval(seed in 0u64..5000, n in 4usize..10) {
        let g = random_graph(n, 0.45, seed, false).unwrap();
        let c = build_chain(&g).unwrap();
        let query = AvoidanceQuery::new(0, n - 1, BTreeSet::from([1])).unwrap();
        let r = avoidance_hitting_time(&c, &query).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.feasibility));
        if r.is_feasible() {
            prop_assert!(r.value >= 1.0 - 1e-9);
        } else {
            prop_assert!(r.value.is_infinite());
        }
    }
}
