//! Edmonds-Karp max flow with edge affinities as capacities. Node removal
//! (for the flow pivotality metric) is plain deletion of the node and its
//! incident arcs.

use std::collections::VecDeque;

use crate::graph::Graph;

const FLOW_EPS: f64 = 1e-9;

struct FlowNetwork {
    /// (to, residual); arcs stored in pairs, arc ^ 1 is the reverse.
    arcs: Vec<(usize, f64)>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(g: &Graph, skip: Option<usize>) -> Self {
        let n = g.node_count();
        let mut net = FlowNetwork {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        };
        for e in g.edges() {
            if Some(e.src) == skip || Some(e.dst) == skip {
                continue;
            }
            let id = net.arcs.len();
            net.arcs.push((e.dst, e.affinity));
            net.arcs.push((e.src, 0.0));
            net.adj[e.src].push(id);
            net.adj[e.dst].push(id + 1);
        }
        net
    }

    fn augment(&mut self, source: usize, sink: usize) -> f64 {
        let n = self.adj.len();
        let mut incoming: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::from([source]);
        incoming[source] = Some(usize::MAX);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for &arc in &self.adj[u] {
                let (v, residual) = self.arcs[arc];
                if residual > FLOW_EPS && incoming[v].is_none() {
                    incoming[v] = Some(arc);
                    queue.push_back(v);
                }
            }
        }
        if incoming[sink].is_none() {
            return 0.0;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let arc = incoming[v].unwrap();
            bottleneck = bottleneck.min(self.arcs[arc].1);
            v = self.arcs[arc ^ 1].0;
        }
        let mut v = sink;
        while v != source {
            let arc = incoming[v].unwrap();
            self.arcs[arc].1 -= bottleneck;
            self.arcs[arc ^ 1].1 += bottleneck;
            v = self.arcs[arc ^ 1].0;
        }
        bottleneck
    }
}

/// Maximum flow from `source` to `sink`; `skip` deletes a node and its
/// incident arcs first.
pub fn max_flow(g: &Graph, source: usize, sink: usize, skip: Option<usize>) -> f64 {
    if source == sink || Some(source) == skip || Some(sink) == skip {
        return 0.0;
    }
    let mut net = FlowNetwork::new(g, skip);
    let mut total = 0.0;
    loop {
        let pushed = net.augment(source, sink);
        if pushed <= FLOW_EPS {
            return total;
        }
        total += pushed;
    }
}
