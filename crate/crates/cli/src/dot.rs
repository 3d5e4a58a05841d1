//! Graphviz rendering of a pivotality report: every node filled with its
//! score color (black for non-pivotal nodes), the source drawn as a box
//! and the target as a doublecircle.

use pivotrank::graph::Graph;
use pivotrank::pivotality::PivotalityReport;

use crate::output::format_sig;

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn render(g: &Graph, report: &PivotalityReport) -> String {
    let directed = g.is_directed();
    let mut out = String::new();
    out.push_str(if directed {
        "digraph pivotality {\n"
    } else {
        "graph pivotality {\n"
    });
    for i in 0..g.node_count() {
        let name = quote(g.label(i));
        if i == report.source {
            out.push_str(&format!(
                "  {name} [style=filled, fillcolor=\"#FFFFFF\", shape=box];\n"
            ));
        } else if i == report.target {
            out.push_str(&format!(
                "  {name} [style=filled, fillcolor=\"#FFFFFF\", shape=doublecircle];\n"
            ));
        } else {
            let pos = report
                .candidates
                .iter()
                .position(|&k| k == i)
                .expect("every non-endpoint node is a candidate");
            let score = report.scores[&report.primary][pos];
            out.push_str(&format!(
                "  {name} [style=filled, fillcolor=\"{}\", tooltip=\"{}={}\"];\n",
                report.colors[pos],
                report.primary,
                format_sig(score)
            ));
        }
    }
    let connector = if directed { "->" } else { "--" };
    for e in g.edges() {
        if !directed && e.src > e.dst {
            continue;
        }
        out.push_str(&format!(
            "  {} {} {};\n",
            quote(g.label(e.src)),
            connector,
            quote(g.label(e.dst))
        ));
    }
    out.push_str("}\n");
    out
}
