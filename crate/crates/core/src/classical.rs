//! Classical absorbing-chain metrics: fundamental matrix, hitting time,
//! hitting cost and absorption probabilities, plus the incremental update
//! and the normalized-column absorption shortcut that the avoidance layer
//! builds on.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::chain::{partition, Chain, ChainPartition};
use crate::error::{Error, Result};

/// Condition estimate above which reports should carry a warning.
pub const CONDITION_WARN: f64 = 1e12;

/// F = (I - P_TT)^-1: expected visit counts to each transient state before
/// absorption. Entries are addressed by original state index.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    values: DMatrix<f64>,
    transient: Vec<usize>,
    absorbing: Vec<usize>,
    transient_pos: Vec<Option<usize>>,
    condition: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Computes F by a pivoted dense solve with n right-hand sides.
pub fn fundamental_matrix(p: &ChainPartition) -> Result<FundamentalMatrix> {
    let n = p.transient().len();
    let a = DMatrix::identity(n, n) - p.p_tt();
    let lu = a.clone().lu();
    let values = lu
        .solve(&DMatrix::identity(n, n))
        .ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let condition = norm1(&a) * norm1(&values);
    let mut transient_pos = vec![None; p.transient().iter().copied().max().unwrap_or(0) + 1];
    for (pos, &s) in p.transient().iter().enumerate() {
        transient_pos[s] = Some(pos);
    }
    Ok(FundamentalMatrix {
        values,
        transient: p.transient().to_vec(),
        absorbing: p.absorbing().to_vec(),
        transient_pos,
        condition,
    })
}

impl FundamentalMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    /// 1-norm condition estimate of I - P_TT.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARN
    }

    pub fn transient_pos(&self, state: usize) -> Option<usize> {
        self.transient_pos.get(state).copied().flatten()
    }

    /// Entry by original state indices; `None` when either state is absorbing.
    pub fn entry(&self, i: usize, j: usize) -> Option<f64> {
        let (pi, pj) = (self.transient_pos(i)?, self.transient_pos(j)?);
        Some(self.values[(pi, pj)])
    }

    /// Hitting times H_s = sum_m F_sm, indexed like `transient()`.
    pub fn hitting_times(&self) -> DVector<f64> {
        let ones = DVector::repeat(self.values.ncols(), 1.0);
        &self.values * ones
    }

    /// Hitting costs U_s = sum_m F_sm r_m. With unit costs r is exactly the
    /// ones vector, so this is bit-identical to `hitting_times`.
    pub fn hitting_costs(&self, c: &Chain) -> DVector<f64> {
        let r_full = c.expected_out_cost();
        let r = DVector::from_iterator(
            self.transient.len(),
            self.transient.iter().map(|&s| r_full[s]),
        );
        &self.values * r
    }

    /// Incremental update: the fundamental matrix after moving the states
    /// in `extra` into the absorbing set, computed from this matrix alone
    /// via the Schur complement on the `extra` block.
    pub fn incremental(&self, extra: &BTreeSet<usize>) -> Result<FundamentalMatrix> {
        if extra.is_empty() {
            return Ok(self.clone());
        }
        for &s in extra {
            if self.transient_pos(s).is_none() {
                return Err(Error::InvalidQuery(format!(
                    "state {s} is not transient in the source fundamental matrix"
                )));
            }
        }
        let keep: Vec<usize> = self
            .transient
            .iter()
            .copied()
            .filter(|s| !extra.contains(s))
            .collect();
        if keep.is_empty() {
            return Err(Error::InvalidAbsorbingSet);
        }
        let kp: Vec<usize> = keep.iter().map(|&s| self.transient_pos(s).unwrap()).collect();
        let ep: Vec<usize> = extra
            .iter()
            .map(|&s| self.transient_pos(s).unwrap())
            .collect();

        let f_kk = DMatrix::from_fn(kp.len(), kp.len(), |i, j| self.values[(kp[i], kp[j])]);
        let f_ke = DMatrix::from_fn(kp.len(), ep.len(), |i, j| self.values[(kp[i], ep[j])]);
        let f_ee = DMatrix::from_fn(ep.len(), ep.len(), |i, j| self.values[(ep[i], ep[j])]);
        let f_ek = DMatrix::from_fn(ep.len(), kp.len(), |i, j| self.values[(ep[i], kp[j])]);

        let solved = f_ee.lu().solve(&f_ek).ok_or(Error::SingularBlock)?;
        let values = f_kk - f_ke * solved;

        let mut absorbing: Vec<usize> = self
            .absorbing
            .iter()
            .copied()
            .chain(extra.iter().copied())
            .collect();
        absorbing.sort_unstable();
        let mut transient_pos = vec![None; keep.iter().copied().max().unwrap_or(0) + 1];
        for (pos, &s) in keep.iter().enumerate() {
            transient_pos[s] = Some(pos);
        }
        Ok(FundamentalMatrix {
            values,
            transient: keep,
            absorbing,
            transient_pos,
            // carried from the source factorization; the update reuses it
            condition: self.condition,
        })
    }

    /// Absorption probabilities toward a transient state j: the vector
    /// Q_i = F_ij / F_jj equals the j-column of the absorption matrix for
    /// the enlarged absorbing set (original set plus j).
    pub fn absorption_to(&self, j: usize) -> Result<DVector<f64>> {
        let pj = self
            .transient_pos(j)
            .ok_or_else(|| Error::InvalidQuery(format!("state {j} is not transient")))?;
        let fjj = self.values[(pj, pj)];
        Ok(DVector::from_iterator(
            self.transient.len(),
            (0..self.transient.len()).map(|pi| self.values[(pi, pj)] / fjj),
        ))
    }
}

/// Q = F * P_TA: first-hit probabilities per absorbing state.
#[derive(Debug, Clone)]
pub struct AbsorptionMatrix {
    values: DMatrix<f64>,
    transient: Vec<usize>,
    absorbing: Vec<usize>,
}

pub fn absorption_probabilities(f: &FundamentalMatrix, p: &ChainPartition) -> AbsorptionMatrix {
    AbsorptionMatrix {
        values: f.values() * p.p_ta(),
        transient: p.transient().to_vec(),
        absorbing: p.absorbing().to_vec(),
    }
}

impl AbsorptionMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    /// Column of the absorbing state `a`, indexed like `transient()`.
    pub fn column_for(&self, a: usize) -> Option<DVector<f64>> {
        let col = self.absorbing.iter().position(|&x| x == a)?;
        Some(self.values.column(col).into_owned())
    }

    pub fn entry(&self, i: usize, a: usize) -> Option<f64> {
        let row = self.transient.iter().position(|&x| x == i)?;
        let col = self.absorbing.iter().position(|&x| x == a)?;
        Some(self.values[(row, col)])
    }
}

/// Hitting times toward `absorbing` exposed over all states, with the
/// convention H = 0 on the absorbing states themselves. Solves
/// (I - P_TT) h = 1 directly; the full fundamental matrix is never formed.
pub fn full_hitting_times(c: &Chain, absorbing: &BTreeSet<usize>) -> Result<DVector<f64>> {
    let part = partition(c, absorbing)?;
    let n = part.transient().len();
    let a = DMatrix::identity(n, n) - part.p_tt();
    let h = a
        .lu()
        .solve(&DVector::repeat(n, 1.0))
        .ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let mut out = DVector::zeros(c.state_count());
    for (pos, &s) in part.transient().iter().enumerate() {
        out[s] = h[pos];
    }
    Ok(out)
}

/// Expected steps from one state to another (0 when they coincide).
pub fn hitting_time_between(c: &Chain, from: usize, to: usize) -> Result<f64> {
    if from == to {
        return Ok(0.0);
    }
    let h = full_hitting_times(c, &BTreeSet::from([to]))?;
    Ok(h[from])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::graph::load_csv;

    fn chain(text: &str, directed: bool) -> Chain {
        build_chain(&load_csv(text.as_bytes(), directed).unwrap()).unwrap()
    }

    fn path3() -> Chain {
        chain("1,2,1\n2,3,1", false)
    }

    /// Directed 5-node cycle pair: 1->2->3->4, 1->5->4, 4->1.
    fn example1() -> Chain {
        chain("1,2,1\n2,3,1\n3,4,1\n1,5,1\n5,4,1\n4,1,1", true)
    }

    fn fm(c: &Chain, absorbing: &[usize]) -> FundamentalMatrix {
        let part = partition(c, &BTreeSet::from_iter(absorbing.iter().copied())).unwrap();
        fundamental_matrix(&part).unwrap()
    }

    #[test]
    fn path_fundamental_matrix() {
        // hand inverse of [[1,-1],[-1/2,1]]
        let f = fm(&path3(), &[2]);
        let expect = [[2.0, 2.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((f.values()[(i, j)] - expect[i][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_transient_state() {
        let c = chain("s,t,1\nt,t,1", true);
        let f = fm(&c, &[1]);
        assert!((f.values()[(0, 0)] - 1.0).abs() <= 1e-15);
        assert!((f.hitting_times()[0] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn example1_visit_row() {
        // walk enumeration: node 4 absorbs before any return to node 1
        let f = fm(&example1(), &[3]);
        let row1: Vec<f64> = [0, 1, 2, 4]
            .iter()
            .map(|&m| f.entry(0, m).unwrap())
            .collect();
        let expect = [1.0, 0.5, 0.5, 0.5];
        for (got, want) in row1.iter().zip(expect) {
            assert!((got - want).abs() <= 1e-12, "{row1:?}");
        }
    }

    #[test]
    fn path_hitting_times() {
        let f = fm(&path3(), &[2]);
        let h = f.hitting_times();
        assert!((h[0] - 4.0).abs() <= 1e-12);
        assert!((h[1] - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn example1_hitting_time_cross_checked_by_branch_enumeration() {
        let f = fm(&example1(), &[3]);
        // 0.5 * 3 + 0.5 * 2
        assert!((f.hitting_times()[0] - 2.5).abs() <= 1e-12);
    }

    #[test]
    fn unit_costs_make_cost_equal_time_bitwise() {
        for c in [path3(), example1()] {
            let f = fm(&c, &[2]);
            assert_eq!(f.hitting_costs(&c), f.hitting_times());
        }
    }

    #[test]
    fn single_edge_cost() {
        let c = chain("s,t,1,3\nt,t,1", true);
        let f = fm(&c, &[1]);
        assert!((f.hitting_costs(&c)[0] - 3.0).abs() <= 1e-15);
    }

    #[test]
    fn path_weighted_hitting_costs() {
        // costs w12 = w21 = 2, w23 = 1 -> r = (2, 3/2) -> U = (7, 5)
        let c = chain("1,2,1,2\n2,3,1,1", false);
        let f = fm(&c, &[2]);
        let u = f.hitting_costs(&c);
        assert!((u[0] - 7.0).abs() <= 1e-12);
        assert!((u[1] - 5.0).abs() <= 1e-12);
    }

    #[test]
    fn example1_absorption_split() {
        let c = example1();
        let part = partition(&c, &BTreeSet::from([3, 4])).unwrap();
        let f = fundamental_matrix(&part).unwrap();
        let q = absorption_probabilities(&f, &part);
        assert!((q.entry(0, 3).unwrap() - 0.5).abs() <= 1e-12);
        assert!((q.entry(0, 4).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn single_absorbing_state_gives_unit_column() {
        let c = example1();
        let part = partition(&c, &BTreeSet::from([3])).unwrap();
        let f = fundamental_matrix(&part).unwrap();
        let q = absorption_probabilities(&f, &part);
        for i in 0..q.values().nrows() {
            assert!((q.values()[(i, 0)] - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn path_symmetric_absorption() {
        let c = path3();
        let part = partition(&c, &BTreeSet::from([0, 2])).unwrap();
        let f = fundamental_matrix(&part).unwrap();
        let q = absorption_probabilities(&f, &part);
        assert!((q.entry(1, 0).unwrap() - 0.5).abs() <= 1e-12);
        assert!((q.entry(1, 2).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn residual_invariant() {
        let c = example1();
        let part = partition(&c, &BTreeSet::from([3])).unwrap();
        let f = fundamental_matrix(&part).unwrap();
        let n = part.transient().len();
        let residual = f.values() * (DMatrix::identity(n, n) - part.p_tt())
            - DMatrix::<f64>::identity(n, n);
        assert!(residual.iter().all(|v| v.abs() <= 1e-9));
        assert!(!f.is_ill_conditioned());
    }

    #[test]
    fn incremental_with_empty_set_is_identity() {
        let f = fm(&path3(), &[2]);
        let f2 = f.incremental(&BTreeSet::new()).unwrap();
        assert_eq!(f.values(), f2.values());
    }

    #[test]
    fn incremental_path_example() {
        // F for target {2,3} over T = {1} is [[1]]
        let f = fm(&path3(), &[2]);
        let f2 = f.incremental(&BTreeSet::from([1])).unwrap();
        assert_eq!(f2.transient(), &[0]);
        assert!((f2.values()[(0, 0)] - 1.0).abs() <= 1e-12);
        assert_eq!(f2.absorbing(), &[1, 2]);
    }

    #[test]
    fn absorption_to_self_is_one() {
        let f = fm(&example1(), &[3]);
        let q = f.absorption_to(4).unwrap();
        let pos5 = f.transient_pos(4).unwrap();
        assert_eq!(q[pos5], 1.0);
    }

    #[test]
    fn absorption_to_funnel_state() {
        // node 1 must pass node 2 to reach node 3 on the path
        let f = fm(&path3(), &[2]);
        let q = f.absorption_to(1).unwrap();
        assert!((q[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn absorption_to_example1() {
        let f = fm(&example1(), &[3]);
        let q = f.absorption_to(4).unwrap();
        assert!((q[0] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn full_hitting_times_zero_on_absorbing() {
        let c = path3();
        let h = full_hitting_times(&c, &BTreeSet::from([2])).unwrap();
        assert_eq!(h[2], 0.0);
        assert!((h[0] - 4.0).abs() <= 1e-12);
        assert_eq!(hitting_time_between(&c, 2, 2).unwrap(), 0.0);
        assert!((hitting_time_between(&c, 1, 2).unwrap() - 3.0).abs() <= 1e-12);
    }
}
