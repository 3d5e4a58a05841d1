//! Random-walk chain built from a graph (P = D^-1 A) and its split into
//! transient and absorbing blocks.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Row-stochastic random-walk chain over the graph's nodes.
#[derive(Debug, Clone)]
pub struct Chain {
    transition: DMatrix<f64>,
    cost: DMatrix<f64>,
    out_degree: DVector<f64>,
}

impl Chain {
    pub fn state_count(&self) -> usize {
        self.out_degree.len()
    }

    /// Transition matrix P with P_ij = a_ij / d_i.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Edge-cost matrix W on the support of P.
    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn out_degree(&self) -> &DVector<f64> {
        &self.out_degree
    }

    /// Expected one-step out-going cost r_s = sum_i p_si w_si.
    ///
    /// When every cost on the support equals 1 this is identically 1, so the
    /// short-circuit returns exact ones instead of accumulating rounding
    /// noise from the row sums of P.
    pub fn expected_out_cost(&self) -> DVector<f64> {
        let n = self.state_count();
        if self.unit_costs() {
            return DVector::repeat(n, 1.0);
        }
        let mut r = DVector::zeros(n);
        for s in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                let p = self.transition[(s, i)];
                if p > 0.0 {
                    acc += p * self.cost[(s, i)];
                }
            }
            r[s] = acc;
        }
        r
    }

    /// Builds a chain from a raw transition matrix and cost matrix, for
    /// transformed chains (conditioning, tests). Rows must be stochastic
    /// within 1e-9; out-degrees are set to 1.
    pub fn from_transition(transition: DMatrix<f64>, cost: DMatrix<f64>) -> Result<Chain> {
        let n = transition.nrows();
        if transition.ncols() != n || cost.nrows() != n || cost.ncols() != n {
            return Err(Error::InvalidGraph("transition matrix must be square".to_string()));
        }
        for i in 0..n {
            let sum: f64 = transition.row(i).iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidGraph(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
            if transition.row(i).iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidGraph(format!("negative probability in row {i}")));
            }
        }
        Ok(Chain {
            transition,
            cost,
            out_degree: DVector::repeat(n, 1.0),
        })
    }

    /// True when every edge on the support of P has cost exactly 1.
    pub fn unit_costs(&self) -> bool {
        let n = self.state_count();
        for s in 0..n {
            for i in 0..n {
                if self.transition[(s, i)] > 0.0 && self.cost[(s, i)] != 1.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Builds the degree-normalized walk. Nodes with zero out-degree are an
/// error: silently adding self-loops would change every metric downstream.
pub fn build_chain(g: &Graph) -> Result<Chain> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidGraph("empty graph".to_string()));
    }
    let d = g.out_degrees();
    let dangling: Vec<String> = (0..n)
        .filter(|&i| d[i] <= 0.0)
        .map(|i| g.label(i).to_string())
        .collect();
    if !dangling.is_empty() {
        return Err(Error::DanglingNodes(dangling));
    }
    let mut p = DMatrix::zeros(n, n);
    for e in g.edges() {
        p[(e.src, e.dst)] = e.affinity / d[e.src];
    }
    Ok(Chain {
        transition: p,
        cost: g.cost_matrix(),
        out_degree: d,
    })
}

/// Ordered split of the states into transient set T and absorbing set A,
/// with the induced blocks P_TT and P_TA. Both orderings are ascending by
/// state index.
#[derive(Debug, Clone)]
pub struct ChainPartition {
    transient: Vec<usize>,
    absorbing: Vec<usize>,
    p_tt: DMatrix<f64>,
    p_ta: DMatrix<f64>,
    /// state index -> position in `transient`
    transient_pos: Vec<Option<usize>>,
}

impl ChainPartition {
    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    pub fn p_tt(&self) -> &DMatrix<f64> {
        &self.p_tt
    }

    pub fn p_ta(&self) -> &DMatrix<f64> {
        &self.p_ta
    }

    pub fn transient_pos(&self, state: usize) -> Option<usize> {
        self.transient_pos.get(state).copied().flatten()
    }

    pub fn absorbing_pos(&self, state: usize) -> Option<usize> {
        self.absorbing.iter().position(|&a| a == state)
    }
}

/// Extracts the blocks for the given absorbing set and verifies that some
/// absorbing state is reachable from every transient state.
pub fn partition(c: &Chain, absorbing: &BTreeSet<usize>) -> Result<ChainPartition> {
    let n = c.state_count();
    if absorbing.is_empty() || absorbing.len() >= n {
        return Err(Error::InvalidAbsorbingSet);
    }
    if let Some(&bad) = absorbing.iter().find(|&&s| s >= n) {
        return Err(Error::StateOutOfRange(bad));
    }

    let transient: Vec<usize> = (0..n).filter(|s| !absorbing.contains(s)).collect();
    let absorbing: Vec<usize> = absorbing.iter().copied().collect();

    // Backward search from the absorbing set over the support of P.
    let p = c.transition();
    let mut reaches = vec![false; n];
    let mut queue: VecDeque<usize> = absorbing.iter().copied().collect();
    for &a in &absorbing {
        reaches[a] = true;
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !reaches[i] && p[(i, j)] > 0.0 {
                reaches[i] = true;
                queue.push_back(i);
            }
        }
    }
    let stranded: Vec<usize> = transient.iter().copied().filter(|&s| !reaches[s]).collect();
    if !stranded.is_empty() {
        return Err(Error::StrandedStates(stranded));
    }

    let mut p_tt = DMatrix::zeros(transient.len(), transient.len());
    let mut p_ta = DMatrix::zeros(transient.len(), absorbing.len());
    for (ti, &i) in transient.iter().enumerate() {
        for (tj, &j) in transient.iter().enumerate() {
            p_tt[(ti, tj)] = p[(i, j)];
        }
        for (aj, &j) in absorbing.iter().enumerate() {
            p_ta[(ti, aj)] = p[(i, j)];
        }
    }
    let mut transient_pos = vec![None; n];
    for (ti, &i) in transient.iter().enumerate() {
        transient_pos[i] = Some(ti);
    }
    Ok(ChainPartition {
        transient,
        absorbing,
        p_tt,
        p_ta,
        transient_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_csv;

    fn path3() -> Graph {
        load_csv("1,2,1\n2,3,1".as_bytes(), false).unwrap()
    }

    #[test]
    fn path_middle_node_splits_mass() {
        let c = build_chain(&path3()).unwrap();
        let p = c.transition();
        assert_eq!(p[(1, 0)], 0.5);
        assert_eq!(p[(1, 1)], 0.0);
        assert_eq!(p[(1, 2)], 0.5);
        assert_eq!(p[(0, 1)], 1.0);
    }

    #[test]
    fn self_loop_normalizes_to_one() {
        let g = load_csv("a,a,5".as_bytes(), true).unwrap();
        let c = build_chain(&g).unwrap();
        assert_eq!(c.transition()[(0, 0)], 1.0);
    }

    #[test]
    fn dangling_node_is_an_error_naming_it() {
        let g = load_csv("a,b,1".as_bytes(), true).unwrap();
        match build_chain(&g).unwrap_err() {
            Error::DanglingNodes(names) => assert_eq!(names, vec!["b".to_string()]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let g = load_csv("a,b,1\nb,c,2\nc,a,0.5\na,d,3".as_bytes(), false).unwrap();
        let c = build_chain(&g).unwrap();
        for i in 0..c.state_count() {
            let s: f64 = c.transition().row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "row {i} sums to {s}");
        }
    }

    #[test]
    fn partition_extracts_path_blocks() {
        let c = build_chain(&path3()).unwrap();
        let part = partition(&c, &BTreeSet::from([2])).unwrap();
        assert_eq!(part.transient(), &[0, 1]);
        assert_eq!(part.absorbing(), &[2]);
        let tt = part.p_tt();
        assert_eq!(tt[(0, 0)], 0.0);
        assert_eq!(tt[(0, 1)], 1.0);
        assert_eq!(tt[(1, 0)], 0.5);
        assert_eq!(tt[(1, 1)], 0.0);
        assert_eq!(part.p_ta()[(1, 0)], 0.5);
    }

    #[test]
    fn absorbing_must_be_strict_subset() {
        let c = build_chain(&path3()).unwrap();
        let err = partition(&c, &BTreeSet::from([0, 1, 2])).unwrap_err();
        assert!(matches!(err, Error::InvalidAbsorbingSet));
        let err = partition(&c, &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, Error::InvalidAbsorbingSet));
    }

    #[test]
    fn stranded_component_is_detected() {
        // two disconnected 2-cycles, absorbing inside the first
        let g = load_csv("a,b,1\nc,d,1".as_bytes(), false).unwrap();
        let c = build_chain(&g).unwrap();
        match partition(&c, &BTreeSet::from([0])).unwrap_err() {
            Error::StrandedStates(states) => assert_eq!(states, vec![2, 3]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn partition_reassembles_transition_rows() {
        let g = load_csv("a,b,1\nb,c,2\nc,a,1\nb,a,3".as_bytes(), true).unwrap();
        let c = build_chain(&g).unwrap();
        let part = partition(&c, &BTreeSet::from([2])).unwrap();
        for (ti, &i) in part.transient().iter().enumerate() {
            for (tj, &j) in part.transient().iter().enumerate() {
                assert_eq!(part.p_tt()[(ti, tj)], c.transition()[(i, j)]);
            }
            for (aj, &j) in part.absorbing().iter().enumerate() {
                assert_eq!(part.p_ta()[(ti, aj)], c.transition()[(i, j)]);
            }
        }
    }

    #[test]
    fn unit_cost_detection() {
        let c = build_chain(&path3()).unwrap();
        assert!(c.unit_costs());
        assert_eq!(c.expected_out_cost(), DVector::repeat(3, 1.0));
        let g = load_csv("1,2,1,2\n2,3,1".as_bytes(), false).unwrap();
        let c = build_chain(&g).unwrap();
        assert!(!c.unit_costs());
        // node 2: half to 1 at cost 2, half to 3 at cost 1
        assert_eq!(c.expected_out_cost()[1], 1.5);
    }
}
