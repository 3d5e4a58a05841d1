//! Deterministic generators for the bundled example topologies, the
//! fat-tree, and the seeded random corpora used by the property and
//! verification suites. All affinities and costs are 1.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};

const GENERATOR_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Example1,
    Example2 { l2: usize, n2: usize },
    Example3b,
    FatTree { arity: usize },
    Random { n: usize, edge_prob: f64, seed: u64, directed: bool },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Graph> {
        match *self {
            GeneratorSpec::Example1 => Ok(example1()),
            GeneratorSpec::Example2 { l2, n2 } => example2(l2, n2),
            GeneratorSpec::Example3b => Ok(example3b()),
            GeneratorSpec::FatTree { arity } => fat_tree(arity),
            GeneratorSpec::Random {
                n,
                edge_prob,
                seed,
                directed,
            } => random_graph(n, edge_prob, seed, directed),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GeneratorSpec::Example1 => write!(f, "example1"),
            GeneratorSpec::Example2 { l2, n2 } => write!(f, "example2({l2},{n2})"),
            GeneratorSpec::Example3b => write!(f, "example3b"),
            GeneratorSpec::FatTree { arity } => write!(f, "fat-tree({arity})"),
            GeneratorSpec::Random {
                n,
                edge_prob,
                seed,
                directed,
            } => write!(
                f,
                "random({n},{edge_prob},{seed},{})",
                if directed { "directed" } else { "undirected" }
            ),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    /// Accepted forms: `example1`, `example2(L2,N2)`, `example3b`,
    /// `fat-tree(H)`, `random(N,P,SEED,directed|undirected)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::GeneratorSpec(format!("unbalanced parentheses in '{s}'")));
                }
                let inner = &s[open + 1..s.len() - 1];
                (
                    &s[..open],
                    inner.split(',').map(str::trim).collect::<Vec<_>>(),
                )
            }
            None => (s, Vec::new()),
        };
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::GeneratorSpec(format!(
                    "'{name}' expects {n} argument(s), got {}",
                    args.len()
                )))
            }
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::GeneratorSpec(format!("invalid integer '{v}'")))
        };
        match name {
            "example1" => {
                want(0)?;
                Ok(GeneratorSpec::Example1)
            }
            "example2" => {
                want(2)?;
                Ok(GeneratorSpec::Example2 {
                    l2: parse_usize(args[0])?,
                    n2: parse_usize(args[1])?,
                })
            }
            "example3b" => {
                want(0)?;
                Ok(GeneratorSpec::Example3b)
            }
            "fat-tree" | "fat_tree" => {
                want(1)?;
                Ok(GeneratorSpec::FatTree {
                    arity: parse_usize(args[0])?,
                })
            }
            "random" => {
                want(4)?;
                let edge_prob: f64 = args[1]
                    .parse()
                    .map_err(|_| Error::GeneratorSpec(format!("invalid probability '{}'", args[1])))?;
                let directed = match args[3] {
                    "directed" => true,
                    "undirected" => false,
                    other => {
                        return Err(Error::GeneratorSpec(format!(
                            "expected 'directed' or 'undirected', got '{other}'"
                        )))
                    }
                };
                Ok(GeneratorSpec::Random {
                    n: parse_usize(args[0])?,
                    edge_prob,
                    seed: args[2]
                        .parse()
                        .map_err(|_| Error::GeneratorSpec(format!("invalid seed '{}'", args[2])))?,
                    directed,
                })
            }
            other => Err(Error::GeneratorSpec(format!("unknown generator '{other}'"))),
        }
    }
}

/// The 5-node directed example: unit edges 1->2, 2->3, 3->4, 1->5, 5->4
/// and the cycle closure 4->1. The closure is what gives the (1, 4)
/// reachability its exact reference metric values; an undirected reading
/// does not reproduce them.
pub fn example1() -> Graph {
    let mut b = GraphBuilder::new(true);
    for (s, d) in [("1", "2"), ("2", "3"), ("3", "4"), ("1", "5"), ("5", "4"), ("4", "1")] {
        b.edge(s, d, 1.0, None).expect("static edges are valid");
    }
    b.build()
}

/// Parametric two-branch example: a two-hop path s-g-t, a three-hop branch
/// s-k1-m1-t, and `n2` internally disjoint chains of `l2` edges from k2 to
/// t behind the single edge s-k2. With l2 = 2, n2 = 1 the graph is
/// symmetric in k1 and k2. The attachment of the gray path is pinned to
/// the simplest reading; only symmetry and trend claims rely on it.
pub fn example2(l2: usize, n2: usize) -> Result<Graph> {
    if l2 < 1 || n2 < 1 {
        return Err(Error::GeneratorSpec(
            "example2 requires L2 >= 1 and N2 >= 1".to_string(),
        ));
    }
    let mut b = GraphBuilder::new(false);
    b.edge("s", "g", 1.0, None).unwrap();
    b.edge("g", "t", 1.0, None).unwrap();
    b.edge("s", "k1", 1.0, None).unwrap();
    b.edge("k1", "m1", 1.0, None).unwrap();
    b.edge("m1", "t", 1.0, None).unwrap();
    b.edge("s", "k2", 1.0, None).unwrap();
    for j in 1..=n2 {
        let mut prev = "k2".to_string();
        for i in 1..l2 {
            let node = format!("c{j}_{i}");
            b.edge(&prev, &node, 1.0, None).unwrap();
            prev = node;
        }
        b.edge(&prev, "t", 1.0, None).unwrap();
    }
    Ok(b.build())
}

/// The three-node undirected path 1-2-3.
pub fn example3b() -> Graph {
    let mut b = GraphBuilder::new(false);
    b.edge("1", "2", 1.0, None).unwrap();
    b.edge("2", "3", 1.0, None).unwrap();
    b.build()
}

/// Standard data-center fat-tree of even arity h: (h/2)^2 core switches,
/// h pods of h/2 aggregation and h/2 edge switches, and h^3/4 hosts, all
/// with unit undirected edges. h = 6 gives the 99-node instance.
pub fn fat_tree(arity: usize) -> Result<Graph> {
    if arity < 2 || arity % 2 != 0 {
        return Err(Error::GeneratorSpec(
            "fat-tree arity must be an even integer >= 2".to_string(),
        ));
    }
    let half = arity / 2;
    let mut b = GraphBuilder::new(false);
    for i in 0..half * half {
        b.node(&format!("core{i}"));
    }
    for p in 0..arity {
        for j in 0..half {
            let agg = format!("agg{p}_{j}");
            // group j of the cores serves aggregation position j in each pod
            for i in 0..half {
                b.edge(&agg, &format!("core{}", j * half + i), 1.0, None)
                    .unwrap();
            }
            for jj in 0..half {
                b.edge(&agg, &format!("edge{p}_{jj}"), 1.0, None).unwrap();
            }
        }
        for j in 0..half {
            for i in 0..half {
                b.edge(
                    &format!("edge{p}_{j}"),
                    &format!("host{p}_{j}_{i}"),
                    1.0,
                    None,
                )
                .unwrap();
            }
        }
    }
    Ok(b.build())
}

fn is_connected(n: usize, arcs: &[(usize, usize)], directed: bool) -> bool {
    let reachable = |forward: bool| -> usize {
        let mut adj = vec![Vec::new(); n];
        for &(s, d) in arcs {
            if forward || !directed {
                adj[s].push(d);
            }
            if !forward || !directed {
                adj[d].push(s);
            }
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    };
    if directed {
        reachable(true) == n && reachable(false) == n
    } else {
        reachable(true) == n
    }
}

/// Seeded Erdos-Renyi graph, redrawn until strongly connected (directed)
/// or connected (undirected), with an attempt cap.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64, directed: bool) -> Result<Graph> {
    if n < 2 {
        return Err(Error::GeneratorSpec("random graph needs n >= 2".to_string()));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(Error::GeneratorSpec(
            "edge probability must be in (0, 1]".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERATOR_ATTEMPTS {
        let mut arcs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if !directed && j < i {
                    continue;
                }
                if rng.random::<f64>() < edge_prob {
                    arcs.push((i, j));
                }
            }
        }
        if !is_connected(n, &arcs, directed) {
            continue;
        }
        let mut b = GraphBuilder::new(directed);
        for i in 0..n {
            b.node(&i.to_string());
        }
        for (s, d) in arcs {
            b.edge(&s.to_string(), &d.to_string(), 1.0, None).unwrap();
        }
        return Ok(b.build());
    }
    Err(Error::GeneratorAttemptsExceeded(GENERATOR_ATTEMPTS))
}

/// Two seeded random connected undirected blocks sharing exactly one
/// vertex. Returns the graph and the index of the shared cut vertex; every
/// path between the blocks passes through it.
pub fn two_block(n1: usize, n2: usize, edge_prob: f64, seed: u64) -> Result<(Graph, usize)> {
    let block_a = random_graph(n1, edge_prob, seed, false)?;
    let block_b = random_graph(n2, edge_prob, seed ^ 0x9e3779b97f4a7c15, false)?;
    let mut b = GraphBuilder::new(false);
    let map_a = |i: usize| {
        if i == n1 - 1 {
            "k".to_string()
        } else {
            format!("a{i}")
        }
    };
    let map_b = |i: usize| {
        if i == 0 {
            "k".to_string()
        } else {
            format!("b{i}")
        }
    };
    for e in block_a.edges().iter().filter(|e| e.src <= e.dst) {
        b.edge(&map_a(e.src), &map_a(e.dst), e.affinity, Some(e.cost))?;
    }
    for e in block_b.edges().iter().filter(|e| e.src <= e.dst) {
        b.edge(&map_b(e.src), &map_b(e.dst), e.affinity, Some(e.cost))?;
    }
    let g = b.build();
    let k = g.index_of("k").expect("cut vertex present");
    Ok((g, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;

    #[test]
    fn example1_shape() {
        let g = example1();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edges().len(), 6);
        let c = build_chain(&g).unwrap();
        // node 4 sends all mass back to node 1
        let i4 = g.index_of("4").unwrap();
        let i1 = g.index_of("1").unwrap();
        assert_eq!(c.transition()[(i4, i1)], 1.0);
        // node 1 splits evenly between nodes 2 and 5
        assert_eq!(c.transition()[(i1, g.index_of("2").unwrap())], 0.5);
        assert_eq!(c.transition()[(i1, g.index_of("5").unwrap())], 0.5);
    }

    #[test]
    fn example2_symmetric_case_shape() {
        let g = example2(2, 1).unwrap();
        // s, g, t, k1, m1, k2, c1_1
        assert_eq!(g.node_count(), 7);
        for label in ["s", "g", "t", "k1", "m1", "k2", "c1_1"] {
            assert!(g.index_of(label).is_some(), "missing {label}");
        }
    }

    #[test]
    fn example2_parallel_single_edge_chains_merge() {
        // L2 = 1: the N2 parallel chains collapse onto one fat k2-t edge
        let g = example2(1, 2).unwrap();
        let k2 = g.index_of("k2").unwrap();
        let t = g.index_of("t").unwrap();
        let e = g
            .edges()
            .iter()
            .find(|e| e.src == k2 && e.dst == t)
            .unwrap();
        assert_eq!(e.affinity, 2.0);
        assert_eq!(e.cost, 1.0);
    }

    #[test]
    fn example2_rejects_zero_parameters() {
        assert!(example2(0, 1).is_err());
        assert!(example2(1, 0).is_err());
    }

    #[test]
    fn example3b_values() {
        let g = example3b();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges().len(), 4);
    }

    #[test]
    fn fat_tree_node_counts() {
        let g = fat_tree(6).unwrap();
        assert_eq!(g.node_count(), 99);
        let g2 = fat_tree(2).unwrap();
        assert_eq!(g2.node_count(), 7);
        assert!(fat_tree(3).is_err());
    }

    #[test]
    fn fat_tree_hosts_have_degree_one() {
        let g = fat_tree(6).unwrap();
        let d = g.out_degrees();
        for i in 0..g.node_count() {
            if g.label(i).starts_with("host") {
                assert_eq!(d[i], 1.0, "host {} degree {}", g.label(i), d[i]);
            }
        }
        assert_eq!(
            (0..g.node_count()).filter(|&i| g.label(i).starts_with("host")).count(),
            54
        );
    }

    #[test]
    fn random_graph_is_deterministic_and_connected() {
        let a = random_graph(30, 0.2, 7, true).unwrap();
        let b = random_graph(30, 0.2, 7, true).unwrap();
        assert_eq!(a.edges(), b.edges());
        let arcs: Vec<(usize, usize)> = a.edges().iter().map(|e| (e.src, e.dst)).collect();
        assert!(is_connected(30, &arcs, true));
    }

    #[test]
    fn complete_digraph_on_two_nodes() {
        let g = random_graph(2, 1.0, 0, true).unwrap();
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn two_block_shares_one_vertex() {
        let (g, k) = two_block(5, 6, 0.5, 3).unwrap();
        assert_eq!(g.label(k), "k");
        assert_eq!(g.node_count(), 5 + 6 - 1);
        // no edge crosses between a* and b* directly
        for e in g.edges() {
            let (ls, ld) = (g.label(e.src), g.label(e.dst));
            assert!(
                !(ls.starts_with('a') && ld.starts_with('b'))
                    && !(ls.starts_with('b') && ld.starts_with('a')),
                "cross edge {ls}-{ld}"
            );
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for text in [
            "example1",
            "example2(2,1)",
            "example3b",
            "fat-tree(6)",
            "random(30,0.2,7,directed)",
        ] {
            let spec: GeneratorSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
            spec.generate().unwrap();
        }
        assert!("example9".parse::<GeneratorSpec>().is_err());
        assert!("example2(2)".parse::<GeneratorSpec>().is_err());
    }
}
