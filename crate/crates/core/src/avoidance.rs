//! Avoidance Markov metrics: visit counts, hitting time and hitting cost
//! conditioned on reaching the target before an avoid set, plus the transit
//! variant. The general set-avoidance form is the implemented path; a
//! single avoid node is the one-element special case.
//!
//! All quantities reduce to products of one classical fundamental matrix
//! (absorbing set = avoid set plus target) with the absorption column of
//! the target: F^{t,O-bar}_{sm} = F^{t,O}_{sm} * Q_m / Q_s.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::chain::{partition, Chain, ChainPartition};
use crate::classical::{absorption_probabilities, fundamental_matrix, FundamentalMatrix};
use crate::error::{Error, Result};

/// Feasibility probabilities below this are treated as exact zeros: the
/// conditioning event is impossible and the metric is reported infinite.
pub const FEASIBILITY_EPS: f64 = 1e-12;

/// A conditioning request: walk from `source`, absorb at `target`, and
/// condition on never visiting `avoid` on the way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvoidanceQuery {
    pub source: usize,
    pub target: usize,
    pub avoid: BTreeSet<usize>,
}

impl AvoidanceQuery {
    pub fn new(source: usize, target: usize, avoid: BTreeSet<usize>) -> Result<Self> {
        if source == target {
            return Err(Error::InvalidQuery(
                "source and target must differ".to_string(),
            ));
        }
        if avoid.contains(&source) || avoid.contains(&target) {
            return Err(Error::InvalidQuery(
                "avoid set must be disjoint from source and target".to_string(),
            ));
        }
        Ok(AvoidanceQuery {
            source,
            target,
            avoid,
        })
    }

    fn check_states(&self, n: usize) -> Result<()> {
        for &s in [self.source, self.target]
            .iter()
            .chain(self.avoid.iter())
        {
            if s >= n {
                return Err(Error::StateOutOfRange(s));
            }
        }
        Ok(())
    }
}

/// A conditioned metric value: the feasibility probability of the
/// conditioning event and the (extended-real) metric, infinite exactly
/// when the feasibility is below threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceResult {
    pub feasibility: f64,
    pub value: f64,
}

impl AvoidanceResult {
    pub fn is_feasible(&self) -> bool {
        self.feasibility > FEASIBILITY_EPS
    }

    fn infeasible(feasibility: f64) -> Self {
        AvoidanceResult {
            feasibility,
            value: f64::INFINITY,
        }
    }
}

/// Shared solve for one query: the fundamental matrix with absorbing set
/// `avoid + target` and the target's absorption column.
pub(crate) struct ConditionedBase {
    pub partition: ChainPartition,
    pub fundamental: FundamentalMatrix,
    /// Q^{t,O-bar} per transient state, indexed like the partition.
    pub q: DVector<f64>,
    /// Q extended to all states: 1 at the target, 0 on the avoid set.
    pub q_full: Vec<f64>,
    pub source_pos: usize,
}

pub(crate) fn conditioned_base(c: &Chain, query: &AvoidanceQuery) -> Result<ConditionedBase> {
    query.check_states(c.state_count())?;
    let mut absorbing = query.avoid.clone();
    absorbing.insert(query.target);
    let part = partition(c, &absorbing)?;
    let fundamental = fundamental_matrix(&part)?;
    let absorption = absorption_probabilities(&fundamental, &part);
    let q = absorption
        .column_for(query.target)
        .expect("target is absorbing by construction");
    let mut q_full = vec![0.0; c.state_count()];
    for (pos, &s) in part.transient().iter().enumerate() {
        q_full[s] = q[pos];
    }
    q_full[query.target] = 1.0;
    let source_pos = part
        .transient_pos(query.source)
        .expect("source is transient by construction");
    Ok(ConditionedBase {
        partition: part,
        fundamental,
        q,
        q_full,
        source_pos,
    })
}

/// Conditioned expected visit counts. Rows for states whose feasibility is
/// below threshold are undefined; `entry`/`row` return `None` there.
#[derive(Debug, Clone)]
pub struct AvoidanceFundamental {
    transient: Vec<usize>,
    values: DMatrix<f64>,
    feasibility: DVector<f64>,
    source: usize,
}

impl AvoidanceFundamental {
    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn feasibility_of(&self, state: usize) -> Option<f64> {
        let pos = self.transient.iter().position(|&s| s == state)?;
        Some(self.feasibility[pos])
    }

    pub fn source_feasibility(&self) -> f64 {
        self.feasibility_of(self.source).unwrap_or(0.0)
    }

    /// Conditioned visits to `m` for a walk started at `i`.
    pub fn entry(&self, i: usize, m: usize) -> Option<f64> {
        let pi = self.transient.iter().position(|&s| s == i)?;
        if self.feasibility[pi] <= FEASIBILITY_EPS {
            return None;
        }
        let pm = self.transient.iter().position(|&s| s == m)?;
        Some(self.values[(pi, pm)])
    }

    /// The query's source row, indexed like `transient()`.
    pub fn source_row(&self) -> Option<Vec<f64>> {
        let pi = self.transient.iter().position(|&s| s == self.source)?;
        if self.feasibility[pi] <= FEASIBILITY_EPS {
            return None;
        }
        Some(self.values.row(pi).iter().copied().collect())
    }
}

/// Conditioned visit-count matrix F^{t,O-bar} over T = V minus (O + t).
pub fn avoidance_fundamental(c: &Chain, query: &AvoidanceQuery) -> Result<AvoidanceFundamental> {
    let base = conditioned_base(c, query)?;
    let n = base.partition.transient().len();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        let qi = base.q[i];
        if qi <= FEASIBILITY_EPS {
            continue;
        }
        for m in 0..n {
            values[(i, m)] = base.fundamental.values()[(i, m)] * base.q[m] / qi;
        }
    }
    Ok(AvoidanceFundamental {
        transient: base.partition.transient().to_vec(),
        values,
        feasibility: base.q,
        source: query.source,
    })
}

/// Conditional sum over the source row: with `weights = None` this is the
/// hitting time (and, bit-for-bit, the unit-cost hitting cost); otherwise
/// rows below the feasibility threshold carry zero weight.
fn conditional_row_sum(
    base: &ConditionedBase,
    weights: Option<&DVector<f64>>,
) -> f64 {
    let f = base.fundamental.values();
    let s = base.source_pos;
    let qs = base.q[s];
    let mut acc = 0.0;
    match weights {
        None => {
            for m in 0..base.q.len() {
                acc += f[(s, m)] * base.q[m] / qs;
            }
        }
        Some(r) => {
            for m in 0..base.q.len() {
                if base.q[m] > FEASIBILITY_EPS {
                    acc += f[(s, m)] * (base.q[m] / qs) * r[m];
                }
            }
        }
    }
    acc
}

/// Expected steps to the target conditioned on avoiding the avoid set.
pub fn avoidance_hitting_time(c: &Chain, query: &AvoidanceQuery) -> Result<AvoidanceResult> {
    let base = conditioned_base(c, query)?;
    let qs = base.q[base.source_pos];
    if qs <= FEASIBILITY_EPS {
        return Ok(AvoidanceResult::infeasible(qs.max(0.0)));
    }
    Ok(AvoidanceResult {
        feasibility: qs,
        value: conditional_row_sum(&base, None),
    })
}

/// Conditioned expected out-going cost r_m = sum_i p_mi w_mi Q_i / Q_m,
/// indexed like the partition's transient list. Successors with zero
/// feasibility contribute nothing; rows with zero feasibility are left 0.
fn conditioned_out_cost(c: &Chain, base: &ConditionedBase) -> DVector<f64> {
    let transient = base.partition.transient();
    let p = c.transition();
    let w = c.cost();
    let mut r = DVector::zeros(transient.len());
    for (pos, &m) in transient.iter().enumerate() {
        let qm = base.q[pos];
        if qm <= FEASIBILITY_EPS {
            continue;
        }
        let mut acc = 0.0;
        for i in 0..c.state_count() {
            let pm = p[(m, i)];
            if pm > 0.0 && base.q_full[i] > 0.0 {
                acc += pm * w[(m, i)] * base.q_full[i] / qm;
            }
        }
        r[pos] = acc;
    }
    r
}

/// Expected accumulated cost to the target conditioned on avoiding the
/// avoid set. With unit costs this equals the avoidance hitting time.
pub fn avoidance_hitting_cost(c: &Chain, query: &AvoidanceQuery) -> Result<AvoidanceResult> {
    let base = conditioned_base(c, query)?;
    let qs = base.q[base.source_pos];
    if qs <= FEASIBILITY_EPS {
        return Ok(AvoidanceResult::infeasible(qs.max(0.0)));
    }
    // On the conditioned chain unit costs give r identically 1, which makes
    // the cost the same sum as the time; reuse the exact same summation.
    let value = if c.unit_costs() {
        conditional_row_sum(&base, None)
    } else {
        let r = conditioned_out_cost(c, &base);
        conditional_row_sum(&base, Some(&r))
    };
    Ok(AvoidanceResult {
        feasibility: qs,
        value,
    })
}

/// Transit hitting time: expected steps of a walk forced through `via`
/// before the target — the avoidance leg (source to `via` avoiding the
/// target) plus the unconditional leg (`via` to target). The reported
/// feasibility is the first leg's.
pub fn transit_hitting_time(
    c: &Chain,
    source: usize,
    target: usize,
    via: usize,
) -> Result<AvoidanceResult> {
    if source == target || source == via || target == via {
        return Err(Error::InvalidQuery(
            "source, target and via must be distinct".to_string(),
        ));
    }
    let leg = avoidance_hitting_time(
        c,
        &AvoidanceQuery::new(source, via, BTreeSet::from([target]))?,
    )?;
    if !leg.is_feasible() {
        return Ok(AvoidanceResult::infeasible(leg.feasibility));
    }
    let back = crate::classical::hitting_time_between(c, via, target)?;
    Ok(AvoidanceResult {
        feasibility: leg.feasibility,
        value: leg.value + back,
    })
}

/// Shared factorization for sweeping many avoid/via nodes against a fixed
/// target: one fundamental matrix F = F^{t} and its square G are enough to
/// read off, for every other node k,
///   Q_s^{k,t-bar} = F_sk / F_kk     and
///   H_s^{k,t-bar} = G_sk / F_sk - G_kk / F_kk,
/// which turns an all-k sweep into one O(n^3) factorization plus O(1) work
/// per node.
#[derive(Debug)]
pub struct TargetSweep {
    fundamental: FundamentalMatrix,
    square: DMatrix<f64>,
    hitting: DVector<f64>,
    target: usize,
}

impl TargetSweep {
    pub fn new(c: &Chain, target: usize) -> Result<Self> {
        let part = partition(c, &BTreeSet::from([target]))?;
        let fundamental = fundamental_matrix(&part)?;
        let square = fundamental.values() * fundamental.values();
        let hitting = fundamental.hitting_times();
        Ok(TargetSweep {
            fundamental,
            square,
            hitting,
            target,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn fundamental(&self) -> &FundamentalMatrix {
        &self.fundamental
    }

    /// Unconditional hitting time from `k` to the target.
    pub fn hitting_from(&self, k: usize) -> Option<f64> {
        if k == self.target {
            return Some(0.0);
        }
        let pos = self.fundamental.transient_pos(k)?;
        Some(self.hitting[pos])
    }

    /// Probability of reaching `k` before the target when starting at `s`.
    pub fn feasibility(&self, s: usize, k: usize) -> Option<f64> {
        let (ps, pk) = (
            self.fundamental.transient_pos(s)?,
            self.fundamental.transient_pos(k)?,
        );
        Some(self.fundamental.values()[(ps, pk)] / self.fundamental.values()[(pk, pk)])
    }

    /// Avoidance hitting time from `s` to `k` avoiding the target.
    pub fn avoidance_to(&self, s: usize, k: usize) -> Option<AvoidanceResult> {
        let (ps, pk) = (
            self.fundamental.transient_pos(s)?,
            self.fundamental.transient_pos(k)?,
        );
        let f = self.fundamental.values();
        let feasibility = f[(ps, pk)] / f[(pk, pk)];
        if feasibility <= FEASIBILITY_EPS {
            return Some(AvoidanceResult::infeasible(feasibility.max(0.0)));
        }
        let value = self.square[(ps, pk)] / f[(ps, pk)] - self.square[(pk, pk)] / f[(pk, pk)];
        Some(AvoidanceResult {
            feasibility,
            value,
        })
    }

    /// Transit hitting time from `s` to the target forced through `k`.
    pub fn transit_via(&self, s: usize, k: usize) -> Option<AvoidanceResult> {
        let leg = self.avoidance_to(s, k)?;
        if !leg.is_feasible() {
            return Some(leg);
        }
        let back = self.hitting_from(k)?;
        Some(AvoidanceResult {
            feasibility: leg.feasibility,
            value: leg.value + back,
        })
    }
}
