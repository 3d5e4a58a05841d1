//! Command-line front end: compute classical and avoidance metrics, rank
//! node pivotality, generate example topologies and run the verification
//! suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

mod dot;
mod output;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use pivotrank::avoidance::{
    avoidance_hitting_cost, avoidance_hitting_time, transit_hitting_time, AvoidanceQuery,
};
use pivotrank::chain::{build_chain, partition, Chain};
use pivotrank::classical::{absorption_probabilities, fundamental_matrix, CONDITION_WARN};
use pivotrank::error::Error;
use pivotrank::graph::{load_graph, Graph, GraphFormat};
use pivotrank::identities::identity_suite;
use pivotrank::netgen::{self, GeneratorSpec};
use pivotrank::oracle::{mc_checks, series_checks, OracleCheck};
use pivotrank::pivotality::{rank, Metric};

use output::{format_sig, json_number, json_object, Table};

#[derive(Parser)]
#[command(
    name = "pivotrank",
    version,
    about = "Markov reachability metrics and node pivotality ranking on weighted directed graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hitting time, hitting cost and absorption probabilities for a
    /// declared absorbing set
    Metrics(MetricsArgs),
    /// Avoidance metrics for one source/target query (or transit via a node)
    Avoid(AvoidArgs),
    /// Pivotality scores and ranking for every node w.r.t. a source/target
    Pivotality(PivotalityArgs),
    /// Emit a generated topology as a graph file
    Gen(GenArgs),
    /// Run the identity, Monte Carlo and series verification suites
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Dot,
}

#[derive(Args)]
struct GraphArgs {
    /// Graph file to load
    #[arg(long, value_name = "PATH", conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generated topology: example1 | example2(L2,N2) | example3b |
    /// fat-tree(H) | random(N,P,SEED,directed|undirected)
    #[arg(long, value_name = "SPEC")]
    gen: Option<String>,
    /// Input format for --graph
    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    format: InputFormat,
    /// Treat csv edges as directed (json carries its own flag)
    #[arg(long)]
    directed: bool,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph, Error> {
        match (&self.graph, &self.gen) {
            (Some(path), None) => {
                let file = File::open(path)?;
                let format = match self.format {
                    InputFormat::Csv => GraphFormat::EdgeListCsv,
                    InputFormat::Json => GraphFormat::Json,
                };
                load_graph(BufReader::new(file), format, self.directed)
            }
            (None, Some(spec)) => spec.parse::<GeneratorSpec>()?.generate(),
            _ => Err(Error::InvalidQuery(
                "exactly one of --graph or --gen is required".to_string(),
            )),
        }
    }

    fn name(&self) -> String {
        match (&self.graph, &self.gen) {
            (Some(path), _) => path.display().to_string(),
            (_, Some(spec)) => spec.clone(),
            _ => "default".to_string(),
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Report format
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    output: OutputFormat,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn emit(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(path) => {
                let mut file = File::create(path)?;
                file.write_all(text.as_bytes())?;
                Ok(())
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Absorbing node labels, comma separated
    #[arg(long, value_name = "L1,L2,...", required = true)]
    absorbing: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AvoidArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Source node label
    #[arg(long, value_name = "L")]
    source: String,
    /// Target node label
    #[arg(long, value_name = "L")]
    target: String,
    /// Avoid node labels, comma separated
    #[arg(long, value_name = "L1,L2,...")]
    avoid: Option<String>,
    /// Report the transit hitting time through this node instead
    #[arg(long, value_name = "L", conflicts_with = "avoid")]
    via: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PivotalityArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Source node label
    #[arg(long, value_name = "L")]
    source: String,
    /// Target node label
    #[arg(long, value_name = "L")]
    target: String,
    /// Metrics to compute (default: all four)
    #[arg(long, value_name = "ath,ch,shp,mf")]
    metrics: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Topology to generate (see --gen on the other commands)
    #[arg(long, value_name = "SPEC", required = true)]
    gen: String,
    /// Emitted graph format
    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    format: InputFormat,
    /// Write the graph here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Accepted-walk target per Monte Carlo query
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    mc_samples: u64,
    /// Base seed for corpora and sampling
    #[arg(long, value_name = "N", default_value_t = 42)]
    seed: u64,
    /// Series truncation order
    #[arg(long, value_name = "K", default_value_t = 200)]
    series_k: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Metrics(args) => cmd_metrics(args).map(|()| true),
        Command::Avoid(args) => cmd_avoid(args).map(|()| true),
        Command::Pivotality(args) => cmd_pivotality(args).map(|()| true),
        Command::Gen(args) => cmd_gen(args).map(|()| true),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn resolve(g: &Graph, label: &str) -> Result<usize, Error> {
    g.index_of(label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

fn resolve_list(g: &Graph, list: &str) -> Result<Vec<usize>, Error> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|label| resolve(g, label))
        .collect()
}

fn warn_condition(condition: f64) {
    if condition > CONDITION_WARN {
        eprintln!(
            "warning: condition estimate {condition:.3e} exceeds {CONDITION_WARN:.0e}; \
             reported values may be inaccurate"
        );
    }
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), Error> {
    let g = args.graph.load()?;
    let c = build_chain(&g)?;
    let absorbing_states = resolve_list(&g, &args.absorbing)?;
    if absorbing_states.is_empty() {
        return Err(Error::InvalidQuery("--absorbing must be nonempty".into()));
    }
    let absorbing: BTreeSet<usize> = absorbing_states.into_iter().collect();
    let part = partition(&c, &absorbing)?;
    let f = fundamental_matrix(&part)?;
    warn_condition(f.condition());
    let h = f.hitting_times();
    let u = f.hitting_costs(&c);
    let q = absorption_probabilities(&f, &part);

    let text = match args.output.output {
        OutputFormat::Csv => {
            let mut header = vec![
                "node".to_string(),
                "hitting_time".to_string(),
                "hitting_cost".to_string(),
            ];
            for &a in part.absorbing() {
                header.push(format!("q_{}", g.label(a)));
            }
            let mut table = Table::new(header);
            for (pos, &s) in part.transient().iter().enumerate() {
                let mut row = vec![
                    g.label(s).to_string(),
                    format_sig(h[pos]),
                    format_sig(u[pos]),
                ];
                for col in 0..part.absorbing().len() {
                    row.push(format_sig(q.values()[(pos, col)]));
                }
                table.row(row);
            }
            table.to_csv()
        }
        OutputFormat::Json => {
            let nodes: Vec<Value> = part
                .transient()
                .iter()
                .enumerate()
                .map(|(pos, &s)| {
                    let absorption = json_object(
                        part.absorbing()
                            .iter()
                            .enumerate()
                            .map(|(col, &a)| (g.label(a), json_number(q.values()[(pos, col)])))
                            .collect(),
                    );
                    json_object(vec![
                        ("node", Value::String(g.label(s).to_string())),
                        ("hitting_time", json_number(h[pos])),
                        ("hitting_cost", json_number(u[pos])),
                        ("absorption", absorption),
                    ])
                })
                .collect();
            let doc = json_object(vec![
                ("command", Value::String("metrics".into())),
                (
                    "absorbing",
                    Value::Array(
                        part.absorbing()
                            .iter()
                            .map(|&a| Value::String(g.label(a).to_string()))
                            .collect(),
                    ),
                ),
                ("condition", json_number(f.condition())),
                ("nodes", Value::Array(nodes)),
            ]);
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        OutputFormat::Dot => {
            return Err(Error::InvalidQuery(
                "dot output is only available for the pivotality command".into(),
            ))
        }
    };
    args.output.emit(&text)
}

fn cmd_avoid(args: AvoidArgs) -> Result<(), Error> {
    let g = args.graph.load()?;
    let c = build_chain(&g)?;
    let s = resolve(&g, &args.source)?;
    let t = resolve(&g, &args.target)?;

    let text = if let Some(via_label) = &args.via {
        let via = resolve(&g, via_label)?;
        let transit = transit_hitting_time(&c, s, t, via)?;
        match args.output.output {
            OutputFormat::Csv => {
                let mut table = Table::new(
                    ["source", "target", "via", "leg_feasibility", "transit_hitting_time"]
                        .map(String::from)
                        .to_vec(),
                );
                table.row(vec![
                    args.source.clone(),
                    args.target.clone(),
                    via_label.clone(),
                    format_sig(transit.feasibility),
                    format_sig(transit.value),
                ]);
                table.to_csv()
            }
            OutputFormat::Json => {
                let doc = json_object(vec![
                    ("command", Value::String("avoid".into())),
                    ("source", Value::String(args.source.clone())),
                    ("target", Value::String(args.target.clone())),
                    ("via", Value::String(via_label.clone())),
                    ("leg_feasibility", json_number(transit.feasibility)),
                    ("transit_hitting_time", json_number(transit.value)),
                ]);
                format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
            }
            OutputFormat::Dot => {
                return Err(Error::InvalidQuery(
                    "dot output is only available for the pivotality command".into(),
                ))
            }
        }
    } else {
        let avoid_labels: Vec<usize> = match &args.avoid {
            Some(list) => resolve_list(&g, list)?,
            None => Vec::new(),
        };
        let query = AvoidanceQuery::new(s, t, avoid_labels.into_iter().collect())?;
        let h = avoidance_hitting_time(&c, &query)?;
        let u = avoidance_hitting_cost(&c, &query)?;
        let avoid_text = query
            .avoid
            .iter()
            .map(|&o| g.label(o).to_string())
            .collect::<Vec<_>>()
            .join(";");
        match args.output.output {
            OutputFormat::Csv => {
                let mut table = Table::new(
                    ["source", "target", "avoid", "feasibility", "hitting_time", "hitting_cost"]
                        .map(String::from)
                        .to_vec(),
                );
                table.row(vec![
                    args.source.clone(),
                    args.target.clone(),
                    avoid_text,
                    format_sig(h.feasibility),
                    format_sig(h.value),
                    format_sig(u.value),
                ]);
                table.to_csv()
            }
            OutputFormat::Json => {
                let doc = json_object(vec![
                    ("command", Value::String("avoid".into())),
                    ("source", Value::String(args.source.clone())),
                    ("target", Value::String(args.target.clone())),
                    (
                        "avoid",
                        Value::Array(
                            query
                                .avoid
                                .iter()
                                .map(|&o| Value::String(g.label(o).to_string()))
                                .collect(),
                        ),
                    ),
                    ("feasibility", json_number(h.feasibility)),
                    ("hitting_time", json_number(h.value)),
                    ("hitting_cost", json_number(u.value)),
                ]);
                format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
            }
            OutputFormat::Dot => {
                return Err(Error::InvalidQuery(
                    "dot output is only available for the pivotality command".into(),
                ))
            }
        }
    };
    args.output.emit(&text)
}

fn parse_metrics(list: &Option<String>) -> Result<BTreeSet<Metric>, Error> {
    match list {
        None => Ok(BTreeSet::from(Metric::ALL)),
        Some(text) => text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect(),
    }
}

fn cmd_pivotality(args: PivotalityArgs) -> Result<(), Error> {
    let g = args.graph.load()?;
    let c = build_chain(&g)?;
    let s = resolve(&g, &args.source)?;
    let t = resolve(&g, &args.target)?;
    let metrics = parse_metrics(&args.metrics)?;
    if metrics.is_empty() {
        return Err(Error::InvalidQuery("--metrics must name at least one metric".into()));
    }
    let primary = if metrics.contains(&Metric::Ath) {
        Metric::Ath
    } else {
        *metrics.iter().next().unwrap()
    };
    let report = rank(&c, &g, s, t, &metrics, primary)?;
    warn_condition(report.condition);

    let rank_of = |k: usize| report.ranking.iter().position(|&r| r == k).unwrap() + 1;
    let text = match args.output.output {
        OutputFormat::Csv => {
            let mut header = vec!["node".to_string(), "rank".to_string(), "feasibility".to_string()];
            for metric in report.scores.keys() {
                header.push(metric.to_string());
            }
            header.push("color".to_string());
            let mut table = Table::new(header);
            for (pos, &k) in report.candidates.iter().enumerate() {
                let mut row = vec![
                    g.label(k).to_string(),
                    rank_of(k).to_string(),
                    format_sig(report.feasibility[pos]),
                ];
                for values in report.scores.values() {
                    row.push(format_sig(values[pos]));
                }
                row.push(report.colors[pos].clone());
                table.row(row);
            }
            table.to_csv()
        }
        OutputFormat::Json => {
            let nodes: Vec<Value> = report
                .candidates
                .iter()
                .enumerate()
                .map(|(pos, &k)| {
                    let mut entries = vec![
                        ("node", Value::String(g.label(k).to_string())),
                        ("rank", Value::from(rank_of(k))),
                        ("feasibility", json_number(report.feasibility[pos])),
                    ];
                    for (metric, values) in &report.scores {
                        entries.push((
                            match metric {
                                Metric::Ath => "ath",
                                Metric::Ch => "ch",
                                Metric::Shp => "shp",
                                Metric::Mf => "mf",
                            },
                            json_number(values[pos]),
                        ));
                    }
                    entries.push(("color", Value::String(report.colors[pos].clone())));
                    json_object(entries)
                })
                .collect();
            let doc = json_object(vec![
                ("command", Value::String("pivotality".into())),
                ("source", Value::String(args.source.clone())),
                ("target", Value::String(args.target.clone())),
                ("primary", Value::String(report.primary.to_string())),
                (
                    "ranking",
                    Value::Array(
                        report
                            .ranking
                            .iter()
                            .map(|&k| Value::String(g.label(k).to_string()))
                            .collect(),
                    ),
                ),
                ("nodes", Value::Array(nodes)),
            ]);
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        OutputFormat::Dot => dot::render(&g, &report),
    };
    args.output.emit(&text)
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let graph = args.gen.parse::<GeneratorSpec>()?.generate()?;
    let text = match args.format {
        InputFormat::Csv => graph.to_csv(),
        InputFormat::Json => format!("{}\n", graph.to_json()),
    };
    match &args.out {
        Some(path) => {
            let mut file = File::create(path)?;
            file.write_all(text.as_bytes())?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

const IDENTITY_TOL: f64 = 1e-8;
const MC_REL_TOL: f64 = 0.02;
const SERIES_ABS_TOL: f64 = 1e-6;

/// Picks deterministic verification queries on a graph: the first few
/// feasible (s, t, o) triples with comfortably large feasibility (so the
/// rejection sampler stays cheap) plus the first structurally infeasible
/// one, if any.
fn pick_queries(c: &Chain, max_feasible: usize) -> Result<Vec<AvoidanceQuery>, Error> {
    let n = c.state_count();
    let mut feasible = Vec::new();
    let mut infeasible = None;
    'outer: for s in 0..n {
        for t in 0..n {
            for o in 0..n {
                if s == t || s == o || t == o {
                    continue;
                }
                let query = AvoidanceQuery::new(s, t, BTreeSet::from([o]))?;
                let h = avoidance_hitting_time(c, &query)?;
                if h.is_feasible() {
                    if h.feasibility >= 0.2 && feasible.len() < max_feasible {
                        feasible.push(query);
                    }
                } else if infeasible.is_none() {
                    infeasible = Some(query);
                }
                if feasible.len() >= max_feasible && infeasible.is_some() {
                    break 'outer;
                }
            }
        }
    }
    feasible.extend(infeasible);
    Ok(feasible)
}

fn print_oracle_checks(kind: &str, checks: &[OracleCheck]) -> bool {
    let mut pass = true;
    for check in checks {
        pass &= check.pass;
        let z = match check.z_score() {
            Some(z) => format!(" z={}", format_sig(z)),
            None => String::new(),
        };
        println!(
            "{kind} {} [{}] {}: value={} reference={} allowance={}{z} {}",
            check.graph,
            check.query,
            check.quantity,
            format_sig(check.estimate),
            format_sig(check.reference),
            format_sig(check.allowance),
            if check.pass { "PASS" } else { "FAIL" }
        );
    }
    pass
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, Error> {
    let seed = args.seed;
    let supplied = args.graph.graph.is_some() || args.graph.gen.is_some();
    let mut pass = true;

    // --- identity suite ---
    let identity_graphs: Vec<(String, Graph)> = if supplied {
        vec![(args.graph.name(), args.graph.load()?)]
    } else {
        let mut graphs = Vec::new();
        for i in 0..10u64 {
            let n = 4 + (i as usize % 9);
            graphs.push((
                format!("random-directed-{i}"),
                netgen::random_graph(n, 0.4, seed.wrapping_add(i), true)?,
            ));
            graphs.push((
                format!("random-undirected-{i}"),
                netgen::random_graph(n, 0.4, seed.wrapping_add(100 + i), false)?,
            ));
        }
        graphs
    };
    let mut summary = pivotrank::identities::SuiteSummary::default();
    for (_, g) in &identity_graphs {
        let c = build_chain(g)?;
        let cap = if c.state_count() > 25 { Some(20_000) } else { None };
        summary.merge(&identity_suite(&c, cap)?);
    }
    for (name, stats) in &summary.per_identity {
        let ok = stats.max_residual <= IDENTITY_TOL;
        pass &= ok;
        println!(
            "identity {name}: max_residual={} evaluated={} skipped={} {}",
            format_sig(stats.max_residual),
            stats.evaluated,
            stats.skipped,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "identity suite: {} graph(s), {} triples, tolerance {}",
        summary.chains, summary.triples, IDENTITY_TOL
    );

    // --- Monte Carlo and series suites ---
    let oracle_graphs: Vec<(String, Graph)> = if supplied {
        vec![(args.graph.name(), args.graph.load()?)]
    } else {
        vec![
            ("example1".to_string(), netgen::example1()),
            ("example3b".to_string(), netgen::example3b()),
            (
                "random-directed".to_string(),
                netgen::random_graph(6, 0.5, seed.wrapping_add(1000), true)?,
            ),
            (
                "random-undirected".to_string(),
                netgen::random_graph(7, 0.45, seed.wrapping_add(2000), false)?,
            ),
        ]
    };
    let max_total = (args.mc_samples.saturating_mul(50)).max(1_000_000);
    for (name, g) in &oracle_graphs {
        let c = build_chain(g)?;
        if c.state_count() > 40 {
            println!("oracle {name}: skipped (too large for the sampling suite)");
            continue;
        }
        for query in pick_queries(&c, 3)? {
            let checks = mc_checks(
                g,
                &c,
                name,
                &query,
                args.mc_samples,
                max_total,
                seed,
                MC_REL_TOL,
            )?;
            pass &= print_oracle_checks("mc", &checks);
            let checks = series_checks(g, &c, name, &query, args.series_k, SERIES_ABS_TOL)?;
            pass &= print_oracle_checks("series", &checks);
        }
    }

    println!("VERIFY {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}
