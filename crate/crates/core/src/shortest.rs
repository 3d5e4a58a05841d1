//! Dijkstra over edge costs, forward or along reversed arcs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(PartialEq)]
struct QueueItem {
    dist: f64,
    node: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by node index for determinism
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path costs from `source` to every node (`f64::INFINITY` for
/// unreachable ones). With `reverse` the arcs are traversed backwards,
/// giving the cost *to* `source` from every node. Costs must be
/// nonnegative.
pub fn shortest_path_costs(g: &Graph, source: usize, reverse: bool) -> Result<Vec<f64>> {
    let n = g.node_count();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in g.edges() {
        if e.cost < 0.0 {
            return Err(Error::NegativeCost {
                src: g.label(e.src).to_string(),
                dst: g.label(e.dst).to_string(),
                cost: e.cost,
            });
        }
        if reverse {
            adj[e.dst].push((e.src, e.cost));
        } else {
            adj[e.src].push((e.dst, e.cost));
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(QueueItem {
        dist: 0.0,
        node: source,
    });
    while let Some(QueueItem { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, cost) in &adj[node] {
            let nd = d + cost;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(QueueItem {
                    dist: nd,
                    node: next,
                });
            }
        }
    }
    Ok(dist)
}
