//! `xroute`: run the routing protocols on a topology file or preset.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};
use xroute::fastpath::{run_cr, TournamentMode};
use xroute::pspt::revealed;
use xroute::runtime::{write_csv, CsvRow};
use xroute::topology::{generate, preset, sweep, SyntheticConfig};
use xroute::{
    bench, reveal_tree, route, run_ba, run_pspt, spawn_network, Backend, BaOptions, Cluster, CryptoParams, DeleteMode,
    EcgSkeleton, Error, FlowAllocation, HelperPolicy, MultiDomainNetwork, RoutingMode, SwitchId,
};

const EXIT_USAGE: u8 = 1;
const EXIT_NO_ROUTE: u8 = 2;
const EXIT_UNSATISFIABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "xroute", version, about = "Privacy-preserving cross-domain routing for multi-controller SDN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the shortest path tree with the baseline encrypted protocol.
    Pspt(TreeArgs),
    /// Build the shortest path tree with candidate recommendation.
    Cr(CrArgs),
    /// Establish one flow and print its path and forwarding entries.
    Route(RouteArgs),
    /// Allocate bandwidth for a flow over one or more paths.
    Ba(BaArgs),
    /// Emit benchmark CSV rows for a sweep or a list of topologies.
    Bench(BenchArgs),
    /// Generate a topology file.
    Gen(GenArgs),
}

#[derive(Args)]
struct Common {
    /// Built-in name (toy1, toy-ba, fig2), generator preset, or file path.
    #[arg(long)]
    topology: String,
    #[arg(long, default_value = "real")]
    backend: Backend,
    #[arg(long, default_value_t = 1024)]
    key_bits: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `random` or `fixed:<domain>`.
    #[arg(long, default_value = "random")]
    helper: String,
    /// Write a metrics row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    common: Common,
    /// Source switch as `domain:switch`.
    #[arg(long)]
    source: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tournament {
    /// Only domains holding a candidate compete.
    Holders,
    /// Every domain competes in every round.
    All,
}

#[derive(Args)]
struct CrArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long, value_enum, default_value = "holders")]
    tournament: Tournament,
}

#[derive(Args)]
struct RouteArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    source: String,
    #[arg(long)]
    dest: String,
    /// baseline, cr or shared.
    #[arg(long, default_value = "cr")]
    mode: RoutingMode,
}

#[derive(Args)]
struct BaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    source: String,
    #[arg(long)]
    dest: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    demand: u64,
    /// zero-cap or whole-path.
    #[arg(long, default_value = "zero-cap")]
    ba_delete_mode: DeleteMode,
    /// baseline or cr.
    #[arg(long, default_value = "cr")]
    mode: RoutingMode,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark group (1 to 6) sweeping the inter-link count.
    #[arg(long, conflicts_with = "topology")]
    sweep: Option<usize>,
    /// Topologies to measure; repeat for several.
    #[arg(long, required_unless_present = "sweep")]
    topology: Vec<String>,
    /// Modes to measure; repeat for several.
    #[arg(long, default_value = "cr")]
    mode: Vec<RoutingMode>,
    #[arg(long, default_value = "transparent")]
    backend: Backend,
    #[arg(long, default_value_t = 1024)]
    key_bits: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source switch; the first switch of the first domain by default.
    #[arg(long)]
    source: Option<String>,
    /// Write rows here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Generator preset (table1-I … table1-VII, table2-1 … table2-30).
    #[arg(long, conflicts_with_all = ["domains", "switches", "inter_links"])]
    preset: Option<String>,
    #[arg(long, default_value_t = 3)]
    domains: usize,
    #[arg(long, default_value_t = 6)]
    switches: usize,
    #[arg(long, default_value_t = 4)]
    inter_links: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoRoute(_) => EXIT_NO_ROUTE,
            Error::Unsatisfiable(_) => EXIT_UNSATISFIABLE,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn load_topology(spec: &str, seed: u64) -> Result<MultiDomainNetwork, Failure> {
    if let Some(net) = MultiDomainNetwork::builtin(spec) {
        return Ok(net);
    }
    if spec.starts_with("table1-") || spec.starts_with("table2-") {
        return preset(spec, seed).map_err(|e| usage(e.to_string()));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| usage(format!("cannot read topology `{spec}`: {e}")))?;
    MultiDomainNetwork::parse(&text).map_err(|e| usage(format!("{spec}: {e}")))
}

fn resolve(net: &MultiDomainNetwork, label: &str) -> Result<SwitchId, Failure> {
    net.resolve(label).map_err(|e| usage(e.to_string()))
}

fn params(backend: Backend, key_bits: u64) -> CryptoParams {
    CryptoParams { backend, key_bits, ..CryptoParams::default() }
}

fn start(common: &Common) -> Result<(MultiDomainNetwork, Cluster), Failure> {
    let net = load_topology(&common.topology, common.seed)?;
    let helper = HelperPolicy::parse(&common.helper, &net)?;
    let mut cluster = spawn_network(net.clone(), &params(common.backend, common.key_bits), common.seed)?;
    cluster.set_helper_policy(helper);
    Ok((net, cluster))
}

fn write_csv_file(path: &FsPath, rows: &[CsvRow]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    write_csv(file, rows).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn report_metrics(cluster: &Cluster, wall: Duration) {
    let m = cluster.metrics_snapshot();
    println!(
        "metrics: rounds {}, secure-if {}, comparisons {}, messages {}, bytes per domain {:.1}",
        m.rounds,
        m.secif_count,
        m.cmp_count,
        m.total_messages(),
        m.bytes_per_domain_avg()
    );
    // kept off stdout so that seeded runs print identical output
    eprintln!("wall time {:.1} ms", wall.as_secs_f64() * 1000.0);
}

fn print_tree(net: &MultiDomainNetwork, tree: &[BTreeMap<SwitchId, (u64, Option<SwitchId>)>]) {
    for (d, nodes) in tree.iter().enumerate() {
        if nodes.is_empty() {
            continue;
        }
        println!("domain {}", net.domains[d].name);
        for (node, (dist, parent)) in nodes {
            let parent = parent.map_or_else(|| "-".to_string(), |p| net.label(p));
            println!("  {:<16} dist {:<8} parent {}", net.label(*node), dist, parent);
        }
    }
}

fn cmd_tree(args: &TreeArgs, mode: RoutingMode, tournament: TournamentMode) -> Result<(), Failure> {
    let (net, mut cluster) = start(&args.common)?;
    let source = resolve(&net, &args.source)?;
    let skeleton = EcgSkeleton::build(&net, Some(source), &[]).map_err(Error::from)?;
    if !skeleton.is_connected() {
        return Err(Error::NoRoute("equivalent cost graph is disconnected".into()).into());
    }
    let started = Instant::now();
    let session = cluster.start_session(source.domain, skeleton.clone())?;
    let mut by_domain = vec![BTreeMap::new(); net.domains.len()];
    if mode == RoutingMode::Baseline {
        let res = run_pspt(&mut cluster, session)?;
        reveal_tree(&mut cluster, &res)?;
        by_domain = revealed(&cluster, session)?.domains;
    } else {
        let tree = run_cr(&mut cluster, session, tournament)?;
        for (p, node) in skeleton.nodes.iter().enumerate() {
            if let Some(dist) = tree.dist(p) {
                by_domain[node.domain].insert(*node, (dist, tree.parent(p).map(|q| skeleton.nodes[q])));
            }
        }
    }
    let wall = started.elapsed();
    println!("tree from {} ({}, {})", net.label(source), bench::mode_name(mode), bench::backend_name(args.common.backend));
    print_tree(&net, &by_domain);
    report_metrics(&cluster, wall);
    if let Some(path) = &args.common.csv {
        let row = bench::csv_row(&args.common.topology, &net, mode, args.common.backend, &cluster.metrics_snapshot(), wall);
        write_csv_file(path, &[row])?;
    }
    Ok(())
}

fn cmd_route(args: &RouteArgs) -> Result<(), Failure> {
    let (net, mut cluster) = start(&args.common)?;
    let (s, t) = (resolve(&net, &args.source)?, resolve(&net, &args.dest)?);
    if args.mode == RoutingMode::Shared && s.domain == t.domain && s != t {
        return Err(usage("shared trees only serve flows that leave the source domain"));
    }
    let started = Instant::now();
    let r = route(&mut cluster, s, t, args.mode)?;
    let wall = started.elapsed();
    if r.path.switches.is_empty() {
        println!("path: (empty, source is the destination)");
    } else {
        println!("path: {}", r.path.render(&net));
    }
    let cost = r.path.cost(&net).unwrap_or(0);
    println!("hops {}, cost {cost}", r.path.hops());
    for ctrl in cluster.controllers() {
        let entries = ctrl.forwarding().flow_entries(r.flow);
        if entries.is_empty() {
            continue;
        }
        let list: Vec<String> = entries.iter().map(|(a, b)| format!("{} -> {}", net.label(*a), net.label(*b))).collect();
        println!("entries {}: {}", net.domains[ctrl.id()].name, list.join(", "));
    }
    report_metrics(&cluster, wall);
    if let Some(path) = &args.common.csv {
        let row = bench::csv_row(&args.common.topology, &net, args.mode, args.common.backend, &cluster.metrics_snapshot(), wall);
        write_csv_file(path, &[row])?;
    }
    Ok(())
}

fn print_allocation(net: &MultiDomainNetwork, a: &FlowAllocation) {
    println!("{:<5} {:>5} {:>7} {:>10}  switches", "path", "hops", "length", "allocated");
    for (i, p) in a.paths.iter().enumerate() {
        println!("{:<5} {:>5} {:>7} {:>10}  {}", i + 1, p.path.hops(), p.length, p.amount, p.path.render(net));
    }
    println!(
        "total cost {}, allocated {} of {}, {}",
        a.total_cost,
        a.allocated(),
        a.demand,
        if a.is_satisfied() { "satisfied" } else { "unsatisfied" }
    );
}

fn cmd_ba(args: &BaArgs) -> Result<(), Failure> {
    if args.mode == RoutingMode::Shared {
        return Err(usage("bandwidth allocation needs --mode baseline or cr"));
    }
    let (net, mut cluster) = start(&args.common)?;
    let (s, t) = (resolve(&net, &args.source)?, resolve(&net, &args.dest)?);
    let opts = BaOptions { delete: args.ba_delete_mode, mode: args.mode };
    let started = Instant::now();
    let result = run_ba(&mut cluster, s, t, args.demand, opts);
    let wall = started.elapsed();
    let outcome = match result {
        Ok(a) => {
            print_allocation(&net, &a);
            Ok(())
        }
        Err(Error::Unsatisfiable(a)) => {
            print_allocation(&net, &a);
            Err(Failure { code: EXIT_UNSATISFIABLE, message: format!("demand {} cannot be met", a.demand) })
        }
        Err(e) => return Err(e.into()),
    };
    report_metrics(&cluster, wall);
    if let Some(path) = &args.common.csv {
        let row = bench::csv_row(&args.common.topology, &net, args.mode, args.common.backend, &cluster.metrics_snapshot(), wall);
        write_csv_file(path, &[row])?;
    }
    outcome
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let topologies: Vec<(String, MultiDomainNetwork)> = match args.sweep {
        Some(group) => sweep(group, args.seed).map_err(|e| usage(e.to_string()))?,
        None => args.topology.iter().map(|t| Ok((t.clone(), load_topology(t, args.seed)?))).collect::<Result<_, Failure>>()?,
    };
    let params = params(args.backend, args.key_bits);
    let mut rows = Vec::new();
    for (id, net) in &topologies {
        let source = match &args.source {
            Some(label) => resolve(net, label)?,
            None => bench::default_source(net),
        };
        for &mode in &args.mode {
            rows.push(bench::measure(id, net, mode, &params, source, args.seed)?);
        }
    }
    match &args.csv {
        Some(path) => write_csv_file(path, &rows),
        None => write_csv(std::io::stdout().lock(), &rows).map_err(|e| usage(e.to_string())),
    }
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let net = match &args.preset {
        Some(name) => preset(name, args.seed),
        None => generate(&SyntheticConfig::uniform(args.domains, args.switches, args.inter_links), args.seed),
    }
    .map_err(|e| usage(e.to_string()))?;
    let text = net.to_text();
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(usage(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Pspt(a) => cmd_tree(a, RoutingMode::Baseline, TournamentMode::HoldersOnly),
        Command::Cr(a) => {
            let t = match a.tournament {
                Tournament::Holders => TournamentMode::HoldersOnly,
                Tournament::All => TournamentMode::AllDomains,
            };
            cmd_tree(&a.tree, RoutingMode::Cr, t)
        }
        Command::Route(a) => cmd_route(a),
        Command::Ba(a) => cmd_ba(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
