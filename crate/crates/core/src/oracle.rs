//! Independent verification oracles for the conditioned metrics: a
//! rejection sampler that realizes the probabilistic definitions directly,
//! and a truncated power-series evaluator for the sum formulas.
//!
//! Sampling uses ChaCha8 with one dedicated stream per sample index, so an
//! estimate depends only on (seed, sample count) and not on how the stream
//! is partitioned across workers.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::avoidance::{
    avoidance_fundamental, avoidance_hitting_cost, avoidance_hitting_time, AvoidanceQuery,
    FEASIBILITY_EPS,
};
use crate::chain::{partition, Chain};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default per-walk step cap; absorbing chains terminate with probability
/// one, so truncation is a diagnostics path, not an expected outcome.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

pub const RNG_ALGORITHM: &str = "chacha8, one stream per sample index";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkOutcome {
    HitTarget,
    HitAvoid,
    Truncated,
}

/// One realized walk: the visited states, its length, its accumulated edge
/// cost and how it ended.
#[derive(Debug, Clone)]
pub struct WalkSample {
    pub states: Vec<usize>,
    pub steps: usize,
    pub cost: f64,
    pub outcome: WalkOutcome,
}

/// Categorical sampler over the rows of P with per-sample RNG streams.
#[derive(Debug)]
pub struct WalkSampler<'a> {
    chain: &'a Chain,
    /// per state: (cumulative probability, successor), nonzero entries only
    rows: Vec<Vec<(f64, usize)>>,
    seed: u64,
}

impl<'a> WalkSampler<'a> {
    pub fn new(chain: &'a Chain, seed: u64) -> Self {
        let n = chain.state_count();
        let p = chain.transition();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for j in 0..n {
                if p[(i, j)] > 0.0 {
                    acc += p[(i, j)];
                    row.push((acc, j));
                }
            }
            rows.push(row);
        }
        WalkSampler { chain, rows, seed }
    }

    fn step(&self, state: usize, rng: &mut ChaCha8Rng) -> usize {
        let row = &self.rows[state];
        let u: f64 = rng.random();
        let idx = row.partition_point(|&(cum, _)| cum <= u);
        row[idx.min(row.len() - 1)].1
    }

    /// Samples walk number `index`: starts at `start`, stops on the first
    /// visit to `targets` or `avoid`, truncates after `max_steps`.
    pub fn sample_walk(
        &self,
        index: u64,
        start: usize,
        targets: &BTreeSet<usize>,
        avoid: &BTreeSet<usize>,
        max_steps: usize,
    ) -> WalkSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let classify = |state: usize| {
            if targets.contains(&state) {
                Some(WalkOutcome::HitTarget)
            } else if avoid.contains(&state) {
                Some(WalkOutcome::HitAvoid)
            } else {
                None
            }
        };
        let mut states = vec![start];
        let mut cost = 0.0;
        let mut current = start;
        if let Some(outcome) = classify(current) {
            return WalkSample {
                states,
                steps: 0,
                cost,
                outcome,
            };
        }
        let w = self.chain.cost();
        for step in 1..=max_steps {
            let next = self.step(current, &mut rng);
            cost += w[(current, next)];
            states.push(next);
            current = next;
            if let Some(outcome) = classify(current) {
                return WalkSample {
                    states,
                    steps: step,
                    cost,
                    outcome,
                };
            }
        }
        WalkSample {
            steps: states.len() - 1,
            states,
            cost,
            outcome: WalkOutcome::Truncated,
        }
    }
}

/// Draws one seeded walk; deterministic in (inputs, seed).
pub fn sample_walk(
    c: &Chain,
    start: usize,
    targets: &BTreeSet<usize>,
    avoid: &BTreeSet<usize>,
    max_steps: usize,
    seed: u64,
) -> WalkSample {
    WalkSampler::new(c, seed).sample_walk(0, start, targets, avoid, max_steps)
}

/// Monte Carlo estimate with its sampling diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples_accepted: u64,
    pub samples_total: u64,
    pub samples_truncated: u64,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub rng: &'static str,
}

/// Which conditioned quantity to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    HittingTime,
    HittingCost,
    /// Expected visits to a transient state.
    Visits(usize),
    Feasibility,
}

/// All conditioned estimates from one shared sample stream. The visit
/// estimates are indexed by state; entries for the target and the avoid
/// set stay zero.
#[derive(Debug, Clone)]
pub struct AvoidanceEstimates {
    pub hitting_time: EstimateReport,
    pub hitting_cost: EstimateReport,
    pub feasibility: EstimateReport,
    pub visits: Vec<EstimateReport>,
}

#[derive(Debug, Clone, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let variance = self.m2 / (self.count - 1) as f64;
        (variance / self.count as f64).sqrt()
    }
}

/// Rejection sampling: walks run until absorption by the avoid set or the
/// target; only the ones that end at the target enter the conditional
/// estimates, and the acceptance rate estimates the feasibility.
pub fn estimate_all(
    c: &Chain,
    query: &AvoidanceQuery,
    n_samples: u64,
    seed: u64,
    max_steps: usize,
) -> Result<AvoidanceEstimates> {
    if n_samples == 0 {
        return Err(Error::InvalidQuery("n_samples must be at least 1".into()));
    }
    collect_estimates(c, query, 0..n_samples, seed, max_steps)
}

/// Keeps drawing deterministic sample indices until `min_accepted` walks
/// were accepted (or `max_total` drawn); the result is identical to an
/// `estimate_all` run over the same index range.
pub fn estimate_all_until(
    c: &Chain,
    query: &AvoidanceQuery,
    min_accepted: u64,
    max_total: u64,
    seed: u64,
    max_steps: usize,
) -> Result<AvoidanceEstimates> {
    let sampler = WalkSampler::new(c, seed);
    let targets = BTreeSet::from([query.target]);
    let mut acc = Accumulators::new(c.state_count());
    let mut index = 0u64;
    while acc.accepted < min_accepted && index < max_total {
        let walk = sampler.sample_walk(index, query.source, &targets, &query.avoid, max_steps);
        acc.push(&walk);
        index += 1;
    }
    Ok(acc.reports(seed))
}

struct Accumulators {
    accepted: u64,
    total: u64,
    truncated: u64,
    steps: Welford,
    cost: Welford,
    visits: Vec<Welford>,
    visit_counts: Vec<f64>,
}

impl Accumulators {
    fn new(n: usize) -> Self {
        Accumulators {
            accepted: 0,
            total: 0,
            truncated: 0,
            steps: Welford::default(),
            cost: Welford::default(),
            visits: vec![Welford::default(); n],
            visit_counts: vec![0.0; n],
        }
    }

    fn push(&mut self, walk: &WalkSample) {
        self.total += 1;
        match walk.outcome {
            WalkOutcome::Truncated => self.truncated += 1,
            WalkOutcome::HitAvoid => {}
            WalkOutcome::HitTarget => {
                self.accepted += 1;
                self.steps.push(walk.steps as f64);
                self.cost.push(walk.cost);
                self.visit_counts.iter_mut().for_each(|v| *v = 0.0);
                for &s in &walk.states[..walk.states.len() - 1] {
                    self.visit_counts[s] += 1.0;
                }
                for (w, &count) in self.visits.iter_mut().zip(&self.visit_counts) {
                    w.push(count);
                }
            }
        }
    }

    fn reports(&self, seed: u64) -> AvoidanceEstimates {
        let rate = self.accepted as f64 / self.total as f64;
        let conditional = |w: &Welford| {
            if self.accepted == 0 {
                EstimateReport {
                    estimate: f64::INFINITY,
                    standard_error: f64::INFINITY,
                    samples_accepted: 0,
                    samples_total: self.total,
                    samples_truncated: self.truncated,
                    acceptance_rate: rate,
                    seed,
                    rng: RNG_ALGORITHM,
                }
            } else {
                EstimateReport {
                    estimate: w.mean,
                    standard_error: w.standard_error(),
                    samples_accepted: self.accepted,
                    samples_total: self.total,
                    samples_truncated: self.truncated,
                    acceptance_rate: rate,
                    seed,
                    rng: RNG_ALGORITHM,
                }
            }
        };
        let feasibility = EstimateReport {
            estimate: rate,
            standard_error: (rate * (1.0 - rate) / self.total as f64).sqrt(),
            samples_accepted: self.accepted,
            samples_total: self.total,
            samples_truncated: self.truncated,
            acceptance_rate: rate,
            seed,
            rng: RNG_ALGORITHM,
        };
        AvoidanceEstimates {
            hitting_time: conditional(&self.steps),
            hitting_cost: conditional(&self.cost),
            feasibility,
            visits: self.visits.iter().map(conditional).collect(),
        }
    }
}

fn collect_estimates(
    c: &Chain,
    query: &AvoidanceQuery,
    indices: std::ops::Range<u64>,
    seed: u64,
    max_steps: usize,
) -> Result<AvoidanceEstimates> {
    let sampler = WalkSampler::new(c, seed);
    let targets = BTreeSet::from([query.target]);
    let mut acc = Accumulators::new(c.state_count());
    for index in indices {
        let walk = sampler.sample_walk(index, query.source, &targets, &query.avoid, max_steps);
        acc.push(&walk);
    }
    Ok(acc.reports(seed))
}

/// Single-quantity entry point over `n_samples` total walks.
pub fn estimate_avoidance(
    c: &Chain,
    query: &AvoidanceQuery,
    quantity: Quantity,
    n_samples: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let all = estimate_all(c, query, n_samples, seed, DEFAULT_MAX_STEPS)?;
    Ok(match quantity {
        Quantity::HittingTime => all.hitting_time,
        Quantity::HittingCost => all.hitting_cost,
        Quantity::Feasibility => all.feasibility,
        Quantity::Visits(state) => {
            if state >= c.state_count()
                || state == query.target
                || query.avoid.contains(&state)
            {
                return Err(Error::InvalidQuery(format!(
                    "state {state} is not transient for this query"
                )));
            }
            all.visits[state].clone()
        }
    })
}

/// Truncated-series evaluation of the conditioned metrics: partial sums of
/// the step-count and absorption series for the absorbing set `avoid +
/// target`, with a geometric-envelope tail estimate from the max row sum
/// of P_TT^K.
#[derive(Debug, Clone)]
pub struct SeriesReport {
    pub hitting_time: f64,
    pub feasibility: f64,
    /// Per-state conditioned visit estimates (zero on absorbing states).
    pub visits: Vec<f64>,
    /// max row sum of P_TT^K
    pub envelope: f64,
    pub hitting_time_tail: f64,
    pub feasibility_tail: f64,
    pub visits_tail: f64,
    pub converged: bool,
    pub truncation: usize,
}

/// Envelope below which the series is treated as converged.
pub const SERIES_CONVERGENCE: f64 = 1e-8;

pub fn series_metrics(c: &Chain, query: &AvoidanceQuery, truncation: usize) -> Result<SeriesReport> {
    if truncation == 0 {
        return Err(Error::InvalidQuery("truncation must be at least 1".into()));
    }
    let mut absorbing = query.avoid.clone();
    absorbing.insert(query.target);
    let part = partition(c, &absorbing)?;
    let p_tt = part.p_tt();
    let nt = part.transient().len();
    let s_pos = part
        .transient_pos(query.source)
        .expect("source transient by query validation");
    let t_col = part.absorbing_pos(query.target).expect("target absorbing");
    let p_t = part.p_ta().column(t_col).into_owned();

    // column series: x_k = P_TT^{k-1} p_t, absorption mass per start state
    let mut x = p_t.clone();
    // row series: r_k = e_s P_TT^{k-1}, visit mass from the source
    let mut row = DVector::<f64>::zeros(nt);
    row[s_pos] = 1.0;
    // envelope iterate: w_k = P_TT^k 1
    let mut w = DVector::<f64>::repeat(nt, 1.0);

    let mut numerator = 0.0;
    let mut absorb = DVector::<f64>::zeros(nt);
    let mut visits_row = DVector::<f64>::zeros(nt);
    for k in 1..=truncation {
        numerator += k as f64 * x[s_pos];
        absorb += &x;
        visits_row += &row;
        x = p_tt * &x;
        row = (row.transpose() * p_tt).transpose();
        w = p_tt * &w;
    }

    let envelope = w.max();
    let feasibility = absorb[s_pos];
    let feasibility_tail = w[s_pos];
    let infeasible = feasibility <= FEASIBILITY_EPS;
    let hitting_time = if infeasible {
        f64::INFINITY
    } else {
        numerator / feasibility
    };

    let mut visits = vec![0.0; c.state_count()];
    if !infeasible {
        for (pos, &state) in part.transient().iter().enumerate() {
            visits[state] = visits_row[pos] * absorb[pos] / feasibility;
        }
    }

    // block-geometric tails: mass after step bK is at most envelope^b
    let k = truncation as f64;
    let (numerator_tail, visits_row_tail) = if envelope < 1.0 {
        (
            k * envelope * (2.0 - envelope) / ((1.0 - envelope) * (1.0 - envelope)),
            k * envelope / (1.0 - envelope),
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let denom = (feasibility - feasibility_tail).max(f64::MIN_POSITIVE);
    let hitting_time_tail = if infeasible {
        f64::INFINITY
    } else {
        (numerator_tail + hitting_time.abs() * feasibility_tail) / denom
    };
    let visits_tail = if infeasible {
        f64::INFINITY
    } else {
        let v_max = visits_row.max();
        let est_max = visits.iter().cloned().fold(0.0, f64::max);
        (visits_row_tail + v_max * envelope + est_max * feasibility_tail) / denom
    };

    Ok(SeriesReport {
        hitting_time,
        feasibility,
        visits,
        envelope,
        hitting_time_tail,
        feasibility_tail,
        visits_tail,
        converged: envelope < SERIES_CONVERGENCE,
        truncation,
    })
}

/// One oracle-vs-closed-form comparison.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub graph: String,
    pub query: String,
    pub quantity: String,
    pub estimate: f64,
    pub reference: f64,
    /// allowed deviation (3 SE / 2% for MC, tail + 1e-6 for series)
    pub allowance: f64,
    /// sampling standard error (MC checks only; 0 for series)
    pub standard_error: f64,
    pub pass: bool,
}

impl OracleCheck {
    /// Deviation in standard errors, when a standard error applies.
    pub fn z_score(&self) -> Option<f64> {
        if self.standard_error > 0.0 && self.reference.is_finite() {
            Some((self.estimate - self.reference).abs() / self.standard_error)
        } else {
            None
        }
    }
}

fn describe_query(g: &Graph, q: &AvoidanceQuery) -> String {
    let avoid: Vec<&str> = q.avoid.iter().map(|&o| g.label(o)).collect();
    format!(
        "s={} t={} avoid={{{}}}",
        g.label(q.source),
        g.label(q.target),
        avoid.join(",")
    )
}

/// Monte Carlo suite: runs the rejection sampler against the closed forms
/// for hitting time, hitting cost, feasibility and per-state visits.
/// Feasible references must agree within max(3 SE, `rel_tol` * reference);
/// infeasible ones must see zero accepted walks.
pub fn mc_checks(
    g: &Graph,
    c: &Chain,
    name: &str,
    query: &AvoidanceQuery,
    min_accepted: u64,
    max_total: u64,
    seed: u64,
    rel_tol: f64,
) -> Result<Vec<OracleCheck>> {
    let closed_h = avoidance_hitting_time(c, query)?;
    let desc = describe_query(g, query);
    let mut checks = Vec::new();

    if !closed_h.is_feasible() {
        let est = estimate_all(c, query, max_total, seed, DEFAULT_MAX_STEPS)?;
        checks.push(OracleCheck {
            graph: name.to_string(),
            query: desc,
            quantity: format!("zero acceptance over {max_total} walks"),
            estimate: est.feasibility.samples_accepted as f64,
            reference: 0.0,
            allowance: 0.0,
            standard_error: 0.0,
            pass: est.feasibility.samples_accepted == 0,
        });
        return Ok(checks);
    }

    let closed_u = avoidance_hitting_cost(c, query)?;
    let af = avoidance_fundamental(c, query)?;
    let est = estimate_all_until(c, query, min_accepted, max_total, seed, DEFAULT_MAX_STEPS)?;

    let mut push = |quantity: String, report: &EstimateReport, reference: f64| {
        let allowance = (3.0 * report.standard_error).max(rel_tol * reference.abs());
        checks.push(OracleCheck {
            graph: name.to_string(),
            query: desc.clone(),
            quantity,
            estimate: report.estimate,
            reference,
            allowance,
            standard_error: report.standard_error,
            pass: (report.estimate - reference).abs() <= allowance,
        });
    };

    push("hitting-time".to_string(), &est.hitting_time, closed_h.value);
    push("hitting-cost".to_string(), &est.hitting_cost, closed_u.value);
    push(
        "feasibility".to_string(),
        &est.feasibility,
        closed_h.feasibility,
    );
    for &m in af.transient() {
        let reference = af.entry(query.source, m).expect("feasible source row");
        push(format!("visits({})", g.label(m)), &est.visits[m], reference);
    }
    Ok(checks)
}

/// Series suite: compares the truncated sums against the closed forms
/// within tail + `abs_tol`, skipping (and flagging) unconverged chains.
pub fn series_checks(
    g: &Graph,
    c: &Chain,
    name: &str,
    query: &AvoidanceQuery,
    truncation: usize,
    abs_tol: f64,
) -> Result<Vec<OracleCheck>> {
    let series = series_metrics(c, query, truncation)?;
    let desc = describe_query(g, query);
    let mut checks = Vec::new();
    if !series.converged {
        checks.push(OracleCheck {
            graph: name.to_string(),
            query: desc,
            quantity: format!("unconverged (envelope {:.2e})", series.envelope),
            estimate: series.envelope,
            reference: 0.0,
            allowance: SERIES_CONVERGENCE,
            standard_error: 0.0,
            pass: true,
        });
        return Ok(checks);
    }
    let closed_h = avoidance_hitting_time(c, query)?;
    let mut push = |quantity: String, value: f64, reference: f64, tail: f64| {
        let allowance = tail + abs_tol;
        let pass = if reference.is_infinite() {
            value.is_infinite() || value <= allowance
        } else {
            (value - reference).abs() <= allowance
        };
        checks.push(OracleCheck {
            graph: name.to_string(),
            query: desc.clone(),
            quantity,
            estimate: value,
            reference,
            allowance,
            standard_error: 0.0,
            pass,
        });
    };
    if closed_h.is_feasible() {
        push(
            "series hitting-time".to_string(),
            series.hitting_time,
            closed_h.value,
            series.hitting_time_tail,
        );
    }
    push(
        "series feasibility".to_string(),
        series.feasibility,
        closed_h.feasibility,
        series.feasibility_tail,
    );
    if closed_h.is_feasible() {
        let af = avoidance_fundamental(c, query)?;
        for &m in af.transient() {
            let reference = af.entry(query.source, m).expect("feasible source row");
            push(
                format!("series visits({})", g.label(m)),
                series.visits[m],
                reference,
                series.visits_tail,
            );
        }
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::graph::load_csv;

    fn chain(text: &str, directed: bool) -> Chain {
        build_chain(&load_csv(text.as_bytes(), directed).unwrap()).unwrap()
    }

    fn example1() -> Chain {
        chain("1,2,1\n2,3,1\n3,4,1\n1,5,1\n5,4,1\n4,1,1", true)
    }

    fn query(s: usize, t: usize, avoid: &[usize]) -> AvoidanceQuery {
        AvoidanceQuery::new(s, t, BTreeSet::from_iter(avoid.iter().copied())).unwrap()
    }

    #[test]
    fn deterministic_two_state_walk() {
        let c = chain("s,t,1\nt,t,1", true);
        let walk = sample_walk(&c, 0, &BTreeSet::from([1]), &BTreeSet::new(), 10, 7);
        assert_eq!(walk.states, vec![0, 1]);
        assert_eq!(walk.steps, 1);
        assert_eq!(walk.outcome, WalkOutcome::HitTarget);
    }

    #[test]
    fn truncation_is_an_outcome() {
        let c = chain("1,2,1\n2,3,1\n3,4,1", false);
        let walk = sample_walk(&c, 0, &BTreeSet::from([3]), &BTreeSet::new(), 1, 7);
        assert_eq!(walk.outcome, WalkOutcome::Truncated);
        assert_eq!(walk.steps, 1);
    }

    #[test]
    fn seeded_walks_are_reproducible() {
        let c = chain("1,2,1\n2,3,1\n3,1,1\n1,3,1", false);
        let sampler = WalkSampler::new(&c, 99);
        let stop = BTreeSet::from([2]);
        let none = BTreeSet::new();
        for index in 0..20 {
            let a = sampler.sample_walk(index, 0, &stop, &none, 1000);
            let b = sampler.sample_walk(index, 0, &stop, &none, 1000);
            assert_eq!(a.states, b.states);
        }
        // different indices explore different paths eventually
        let walks: BTreeSet<Vec<usize>> = (0..50)
            .map(|i| sampler.sample_walk(i, 0, &stop, &none, 1000).states)
            .collect();
        assert!(walks.len() > 1);
    }

    #[test]
    fn walk_samples_satisfy_their_invariants() {
        let c = chain("a,b,1,2\na,c,1,0.5\nb,a,1,1\nb,d,1,3\nc,d,1,1\nc,a,1,2\nd,a,1,1", true);
        let sampler = WalkSampler::new(&c, 13);
        let targets = BTreeSet::from([3]);
        let avoid = BTreeSet::from([2]);
        for index in 0..200 {
            let w = sampler.sample_walk(index, 0, &targets, &avoid, 50);
            assert_eq!(w.states[0], 0);
            assert_eq!(w.steps, w.states.len() - 1);
            let recomputed: f64 = w
                .states
                .windows(2)
                .map(|pair| c.cost()[(pair[0], pair[1])])
                .sum();
            assert_eq!(w.cost, recomputed);
            let terminal = *w.states.last().unwrap();
            match w.outcome {
                WalkOutcome::HitTarget => assert!(targets.contains(&terminal)),
                WalkOutcome::HitAvoid => assert!(avoid.contains(&terminal)),
                WalkOutcome::Truncated => {
                    assert!(!targets.contains(&terminal) && !avoid.contains(&terminal))
                }
            }
            // every transition follows an actual edge
            for pair in w.states.windows(2) {
                assert!(c.transition()[(pair[0], pair[1])] > 0.0);
            }
        }
    }

    #[test]
    fn path_mean_steps_match_hitting_time() {
        let c = chain("1,2,1\n2,3,1", false);
        let est = estimate_all(&c, &query(0, 2, &[]), 40_000, 5, DEFAULT_MAX_STEPS).unwrap();
        // H = 4; no rejection without an avoid set
        assert_eq!(est.feasibility.estimate, 1.0);
        assert!(
            (est.hitting_time.estimate - 4.0).abs() <= 3.0 * est.hitting_time.standard_error,
            "{} +- {}",
            est.hitting_time.estimate,
            est.hitting_time.standard_error
        );
    }

    #[test]
    fn example1_accepted_walks_take_one_step() {
        let c = example1();
        let est = estimate_all(&c, &query(0, 4, &[3]), 20_000, 11, DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(est.hitting_time.estimate, 1.0);
        assert_eq!(est.hitting_time.standard_error, 0.0);
        let se = est.feasibility.standard_error;
        assert!((est.feasibility.estimate - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn impossible_conditioning_accepts_nothing() {
        let c = chain("1,2,1\n2,3,1", false);
        let est = estimate_all(&c, &query(0, 2, &[1]), 5_000, 3, DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(est.feasibility.samples_accepted, 0);
        assert!(est.hitting_time.estimate.is_infinite());
    }

    #[test]
    fn single_quantity_dispatch() {
        let c = example1();
        let q14 = query(0, 3, &[4]);
        let h = estimate_avoidance(&c, &q14, Quantity::HittingTime, 5_000, 8).unwrap();
        assert_eq!(h.estimate, 3.0);
        let v = estimate_avoidance(&c, &q14, Quantity::Visits(1), 5_000, 8).unwrap();
        assert_eq!(v.estimate, 1.0);
        let f = estimate_avoidance(&c, &q14, Quantity::Feasibility, 5_000, 8).unwrap();
        assert!((f.estimate - 0.5).abs() <= 3.0 * f.standard_error);
        // visits of an absorbed state is not a valid request
        assert!(estimate_avoidance(&c, &q14, Quantity::Visits(4), 100, 8).is_err());
    }

    #[test]
    fn until_variant_reaches_the_accepted_target() {
        let c = example1();
        let est =
            estimate_all_until(&c, &query(0, 4, &[3]), 1_000, 100_000, 1, DEFAULT_MAX_STEPS)
                .unwrap();
        assert!(est.feasibility.samples_accepted >= 1_000);
    }

    #[test]
    fn series_single_term() {
        let c = chain("s,t,1\nt,t,1", true);
        let report = series_metrics(&c, &query(0, 1, &[]), 1).unwrap();
        assert_eq!(report.hitting_time, 1.0);
        assert_eq!(report.feasibility, 1.0);
        assert_eq!(report.envelope, 0.0);
        assert!(report.converged);
    }

    #[test]
    fn series_single_surviving_walk() {
        let c = example1();
        let report = series_metrics(&c, &query(0, 3, &[4]), 10).unwrap();
        assert!((report.hitting_time - 3.0).abs() <= 1e-12);
        assert!((report.feasibility - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn series_converges_on_the_path() {
        let c = chain("1,2,1\n2,3,1", false);
        let report = series_metrics(&c, &query(0, 2, &[]), 60).unwrap();
        assert!(report.converged, "envelope {}", report.envelope);
        assert!((report.hitting_time - 4.0).abs() <= report.hitting_time_tail + 1e-6);
        assert!((report.feasibility - 1.0).abs() <= report.feasibility_tail + 1e-6);
    }

    #[test]
    fn series_flags_unconverged_runs() {
        let c = chain("1,2,1\n2,3,1", false);
        let report = series_metrics(&c, &query(0, 2, &[]), 3).unwrap();
        assert!(!report.converged);
    }

    #[test]
    fn mc_suite_on_example1() {
        let g = load_csv(
            "1,2,1\n2,3,1\n3,4,1\n1,5,1\n5,4,1\n4,1,1".as_bytes(),
            true,
        )
        .unwrap();
        let c = build_chain(&g).unwrap();
        let checks = mc_checks(&g, &c, "example1", &query(0, 4, &[3]), 5_000, 100_000, 2, 0.02)
            .unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    }

    #[test]
    fn series_suite_on_example1() {
        let g = load_csv(
            "1,2,1\n2,3,1\n3,4,1\n1,5,1\n5,4,1\n4,1,1".as_bytes(),
            true,
        )
        .unwrap();
        let c = build_chain(&g).unwrap();
        let checks = series_checks(&g, &c, "example1", &query(0, 3, &[4]), 200, 1e-6).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    }
}
