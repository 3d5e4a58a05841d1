//! Node pivotality for a fixed source/target reachability: the
//! avoidance-transit metric plus the classical-hitting-time, shortest-path
//! and max-flow comparison metrics, with full-graph ranking and the color
//! mapping used by the DOT export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::avoidance::{transit_hitting_time, TargetSweep, FEASIBILITY_EPS};
use crate::chain::Chain;
use crate::classical::{full_hitting_times, hitting_time_between};
use crate::error::{Error, Result};
use crate::flow::max_flow;
use crate::graph::Graph;
use crate::shortest::shortest_path_costs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Ath,
    Ch,
    Shp,
    Mf,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ath, Metric::Ch, Metric::Shp, Metric::Mf];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Metric::Ath => "ath",
            Metric::Ch => "ch",
            Metric::Shp => "shp",
            Metric::Mf => "mf",
        };
        f.write_str(name)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ath" => Ok(Metric::Ath),
            "ch" => Ok(Metric::Ch),
            "shp" => Ok(Metric::Shp),
            "mf" => Ok(Metric::Mf),
            other => Err(Error::InvalidQuery(format!("unknown metric '{other}'"))),
        }
    }
}

/// Avoidance-transit pivotality: how much shorter (or longer) the walks
/// forced through `k` are than the unconditional ones. Negative infinity
/// exactly when `k` cannot be reached before the target.
pub fn ath(c: &Chain, s: usize, t: usize, k: usize) -> Result<f64> {
    let h = hitting_time_between(c, s, t)?;
    let transit = transit_hitting_time(c, s, t, k)?;
    if !transit.is_feasible() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(h - transit.value)
}

/// Classical-hitting-time pivotality (negated forced detour cost).
pub fn ch(c: &Chain, s: usize, t: usize, k: usize) -> Result<f64> {
    if s == t || s == k || t == k {
        return Err(Error::InvalidQuery(
            "source, target and k must be distinct".to_string(),
        ));
    }
    let h_st = hitting_time_between(c, s, t)?;
    let h_sk = hitting_time_between(c, s, k)?;
    let h_kt = hitting_time_between(c, k, t)?;
    Ok(h_st - (h_sk + h_kt))
}

/// Shortest-path pivotality over edge costs.
pub fn shp(g: &Graph, s: usize, t: usize, k: usize) -> Result<f64> {
    if s == t || s == k || t == k {
        return Err(Error::InvalidQuery(
            "source, target and k must be distinct".to_string(),
        ));
    }
    let from_s = shortest_path_costs(g, s, false)?;
    if !from_s[t].is_finite() {
        return Err(Error::UnreachableTarget(format!(
            "no path from {} to {}",
            g.label(s),
            g.label(t)
        )));
    }
    let to_t = shortest_path_costs(g, t, true)?;
    if !from_s[k].is_finite() || !to_t[k].is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(from_s[t] - (from_s[k] + to_t[k]))
}

/// Max-flow pivotality: the fraction of the source-target flow lost when
/// `k` is deleted. Affinities act as capacities.
pub fn mf(g: &Graph, s: usize, t: usize, k: usize) -> Result<f64> {
    if s == t || s == k || t == k {
        return Err(Error::InvalidQuery(
            "source, target and k must be distinct".to_string(),
        ));
    }
    let base = max_flow(g, s, t, None);
    if base <= 0.0 {
        return Err(Error::UnreachableTarget(format!(
            "max flow from {} to {} is zero",
            g.label(s),
            g.label(t)
        )));
    }
    let without = max_flow(g, s, t, Some(k));
    Ok(((base - without) / base).clamp(0.0, 1.0))
}

/// Per-node scores for one or more metrics for a fixed (source, target).
#[derive(Debug, Clone)]
pub struct PivotalityReport {
    pub source: usize,
    pub target: usize,
    pub primary: Metric,
    /// All nodes except source and target, ascending by index.
    pub candidates: Vec<usize>,
    /// Q_s^{k, t-bar} per candidate: zero marks a non-pivotal node.
    pub feasibility: Vec<f64>,
    pub scores: BTreeMap<Metric, Vec<f64>>,
    /// Candidates sorted by primary score descending, non-pivotal (-inf)
    /// last, ties broken by ascending node label.
    pub ranking: Vec<usize>,
    /// Per-candidate fill color derived from the primary metric.
    pub colors: Vec<String>,
    /// Condition estimate of the target factorization, for reporting.
    pub condition: f64,
}

impl PivotalityReport {
    pub fn score(&self, metric: Metric, node: usize) -> Option<f64> {
        let pos = self.candidates.iter().position(|&k| k == node)?;
        Some(self.scores.get(&metric)?[pos])
    }

    pub fn color_of(&self, node: usize) -> Option<&str> {
        let pos = self.candidates.iter().position(|&k| k == node)?;
        Some(&self.colors[pos])
    }
}

/// Scores every candidate node with the requested metrics and ranks by the
/// primary one. The avoidance-transit sweep reuses one factorization
/// anchored at the target for all candidates.
pub fn rank(
    c: &Chain,
    g: &Graph,
    s: usize,
    t: usize,
    metrics: &BTreeSet<Metric>,
    primary: Metric,
) -> Result<PivotalityReport> {
    let n = c.state_count();
    if s >= n || t >= n {
        return Err(Error::StateOutOfRange(s.max(t)));
    }
    if s == t {
        return Err(Error::InvalidQuery(
            "source and target must differ".to_string(),
        ));
    }
    let mut metrics = metrics.clone();
    metrics.insert(primary);

    let sweep = TargetSweep::new(c, t)?;
    let h_st = sweep
        .hitting_from(s)
        .expect("source is transient for the target partition");
    let candidates: Vec<usize> = (0..n).filter(|&k| k != s && k != t).collect();

    let feasibility: Vec<f64> = candidates
        .iter()
        .map(|&k| sweep.feasibility(s, k).unwrap_or(0.0).max(0.0))
        .collect();

    let mut scores: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
    for &metric in &metrics {
        let values = match metric {
            Metric::Ath => candidates
                .iter()
                .map(|&k| {
                    let transit = sweep.transit_via(s, k).expect("candidate is transient");
                    if transit.is_feasible() {
                        h_st - transit.value
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
            Metric::Ch => {
                let mut values = Vec::with_capacity(candidates.len());
                for &k in &candidates {
                    let h_sk = full_hitting_times(c, &BTreeSet::from([k]))?[s];
                    let h_kt = sweep.hitting_from(k).expect("candidate is transient");
                    values.push(h_st - (h_sk + h_kt));
                }
                values
            }
            Metric::Shp => {
                let from_s = shortest_path_costs(g, s, false)?;
                if !from_s[t].is_finite() {
                    return Err(Error::UnreachableTarget(format!(
                        "no path from {} to {}",
                        g.label(s),
                        g.label(t)
                    )));
                }
                let to_t = shortest_path_costs(g, t, true)?;
                candidates
                    .iter()
                    .map(|&k| {
                        if from_s[k].is_finite() && to_t[k].is_finite() {
                            from_s[t] - (from_s[k] + to_t[k])
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect()
            }
            Metric::Mf => {
                let base = max_flow(g, s, t, None);
                if base <= 0.0 {
                    return Err(Error::UnreachableTarget(format!(
                        "max flow from {} to {} is zero",
                        g.label(s),
                        g.label(t)
                    )));
                }
                candidates
                    .iter()
                    .map(|&k| ((base - max_flow(g, s, t, Some(k))) / base).clamp(0.0, 1.0))
                    .collect()
            }
        };
        scores.insert(metric, values);
    }

    let primary_scores = &scores[&primary];
    let mut ranking = candidates.clone();
    ranking.sort_by(|&ka, &kb| {
        let pa = candidates.iter().position(|&k| k == ka).unwrap();
        let pb = candidates.iter().position(|&k| k == kb).unwrap();
        primary_scores[pb]
            .total_cmp(&primary_scores[pa])
            .then_with(|| g.label(ka).cmp(g.label(kb)))
    });
    let colors = score_colors(primary_scores);

    Ok(PivotalityReport {
        source: s,
        target: t,
        primary,
        candidates,
        feasibility,
        scores,
        ranking,
        colors,
        condition: sweep.fundamental().condition(),
    })
}

/// Color mapping for the DOT export: non-pivotal scores are black, finite
/// ones are min-max normalized and interpolated channelwise from white
/// (lowest) to red (highest); a single distinct finite value maps to red.
pub fn score_colors(scores: &[f64]) -> Vec<String> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in scores.iter().filter(|v| v.is_finite()) {
        min = min.min(v);
        max = max.max(v);
    }
    scores
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                "#000000".to_string()
            } else {
                let u = if max > min { (v - min) / (max - min) } else { 1.0 };
                let channel = (255.0 * (1.0 - u)).round() as u8;
                format!("#FF{channel:02X}{channel:02X}")
            }
        })
        .collect()
}

/// True when the node plays no role in the source-target reachability.
pub fn is_non_pivotal(feasibility: f64) -> bool {
    feasibility <= FEASIBILITY_EPS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::graph::load_csv;

    fn graph(text: &str, directed: bool) -> Graph {
        load_csv(text.as_bytes(), directed).unwrap()
    }

    fn example1() -> (Graph, Chain) {
        let g = graph("1,2,1\n2,3,1\n3,4,1\n1,5,1\n5,4,1\n4,1,1", true);
        let c = build_chain(&g).unwrap();
        (g, c)
    }

    fn path3() -> (Graph, Chain) {
        let g = graph("1,2,1\n2,3,1", false);
        let c = build_chain(&g).unwrap();
        (g, c)
    }

    #[test]
    fn example1_ath_row() {
        let (_, c) = example1();
        assert!((ath(&c, 0, 3, 1).unwrap() + 0.5).abs() <= 1e-12);
        assert!((ath(&c, 0, 3, 2).unwrap() + 0.5).abs() <= 1e-12);
        assert!((ath(&c, 0, 3, 4).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn path_superfluous_node_is_non_pivotal() {
        let (_, c) = path3();
        assert_eq!(ath(&c, 0, 1, 2).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn example1_ch_row() {
        let (_, c) = example1();
        for k in [1usize, 2, 4] {
            assert!((ch(&c, 0, 3, k).unwrap() + 3.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn path_ch_value() {
        let (_, c) = path3();
        assert!((ch(&c, 0, 1, 2).unwrap() + 4.0).abs() <= 1e-12);
    }

    #[test]
    fn deterministic_cycle_ch_is_zero() {
        // s -> k -> t -> s: forced transit through k costs nothing extra
        let c = build_chain(&graph("s,k,1\nk,t,1\nt,s,1", true)).unwrap();
        assert!(ch(&c, 0, 2, 1).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn example1_shp_row() {
        let (g, _) = example1();
        assert!((shp(&g, 0, 3, 1).unwrap() + 1.0).abs() <= 1e-12);
        assert!((shp(&g, 0, 3, 2).unwrap() + 1.0).abs() <= 1e-12);
        assert!(shp(&g, 0, 3, 4).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn path_shp_value() {
        let (g, _) = path3();
        assert!((shp(&g, 0, 1, 2).unwrap() + 2.0).abs() <= 1e-12);
    }

    #[test]
    fn example1_mf_row() {
        let (g, _) = example1();
        for k in [1usize, 2, 4] {
            assert!((mf(&g, 0, 3, k).unwrap() - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn cut_vertex_mf_is_one_and_bystander_zero() {
        let g = graph("s,k,1\nk,t,1", false);
        assert_eq!(mf(&g, 0, 2, 1).unwrap(), 1.0);
        let (g, _) = path3();
        assert_eq!(mf(&g, 0, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn rank_orders_example1_by_ath() {
        let (g, c) = example1();
        let report = rank(
            &c,
            &g,
            0,
            3,
            &BTreeSet::from(Metric::ALL),
            Metric::Ath,
        )
        .unwrap();
        // node 5 first, then the tie 2, 3 by label
        assert_eq!(report.ranking, vec![4, 1, 2]);
        assert_eq!(report.candidates, vec![1, 2, 4]);
        for &k in &report.candidates {
            assert!(report.score(Metric::Ch, k).unwrap() <= 0.0);
            assert!(report.score(Metric::Shp, k).unwrap() <= 0.0);
            let m = report.score(Metric::Mf, k).unwrap();
            assert!((0.0..=1.0).contains(&m));
        }
        // most pivotal is pure red, colors well-formed
        assert_eq!(report.color_of(4).unwrap(), "#FF0000");
    }

    #[test]
    fn rank_marks_non_pivotal_black() {
        let (g, c) = path3();
        let report = rank(&c, &g, 0, 1, &BTreeSet::from([Metric::Ath]), Metric::Ath).unwrap();
        assert_eq!(report.color_of(2).unwrap(), "#000000");
        assert!(is_non_pivotal(report.feasibility[0]));
        assert_eq!(report.score(Metric::Ath, 2).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn ch_minus_ath_isolates_conditioning() {
        let (_, c) = example1();
        for k in [1usize, 2, 4] {
            let diff = ch(&c, 0, 3, k).unwrap() - ath(&c, 0, 3, k).unwrap();
            assert!(diff <= 1e-12, "conditioning can only shorten the leg");
        }
    }

    #[test]
    fn color_scale_degenerate_cases() {
        assert_eq!(score_colors(&[1.0, 1.0]), vec!["#FF0000", "#FF0000"]);
        assert_eq!(
            score_colors(&[f64::NEG_INFINITY, 2.0, 4.0]),
            vec!["#000000", "#FFFFFF", "#FF0000"]
        );
    }
}
