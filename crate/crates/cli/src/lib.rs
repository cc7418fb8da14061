//! Command-line front end: loads scenario files, runs and validates them,
//! checks the convergence guarantees and writes CSV output.

use std::collections::BTreeMap;
use std::env;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use msrpa::engine::{self, Trace};
use msrpa::graph::{self, AgentId, AgentSet, Digraph, BRUTEFORCE_LIMIT};
use msrpa::metrics::{self, MetricSeries, EXACT_TOL};
use msrpa::scenario_file::{load_with, LoadedScenario, Overrides};
use msrpa::{bundled, export};
use rayon::prelude::*;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "MSRPA_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "msrpa-out";

#[derive(Debug, Parser)]
#[command(name = "msrpa", version, about = "Resilient leader tracking simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, simulate and export one or more scenarios.
    Run(RunArgs),
    /// Report the convergence hypotheses without simulating.
    Validate(ValidateArgs),
    /// Check strong r-robustness of a graph with respect to a seed set.
    Robustness(RobustnessArgs),
    /// List the bundled scenario names.
    List,
}

#[derive(Debug, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub eta: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long = "u-max")]
    pub u_max: Option<f64>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            eta: self.eta,
            seed: self.seed,
            horizon: self.horizon,
            u_max: self.u_max,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario files or bundled scenario names.
    #[arg(required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Exit with status 2 instead of simulating when a hypothesis fails.
    #[arg(long)]
    pub strict: bool,
    /// Compare the trace against the exact-tracking and finite-time guarantees.
    #[arg(long)]
    pub check_theorems: bool,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    /// Output directory. Defaults to the file's `output.dir`, then $MSRPA_OUT_DIR,
    /// then `msrpa-out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of scenarios to run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub scenarios: Vec<PathBuf>,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    /// k-circulant generator as `n,k`.
    #[arg(long, value_name = "N,K", conflicts_with_all = ["edges", "path", "complete"])]
    pub circulant: Option<String>,
    /// Symmetrize the circulant.
    #[arg(long, requires = "circulant")]
    pub undirected: bool,
    /// Edge-list file with one `head tail` pair per line.
    #[arg(long, conflicts_with_all = ["path", "complete"])]
    pub edges: Option<PathBuf>,
    /// Directed path on `n` agents.
    #[arg(long, value_name = "N", conflicts_with = "complete")]
    pub path: Option<usize>,
    /// Complete digraph on `n` agents.
    #[arg(long, value_name = "N")]
    pub complete: Option<usize>,
    /// Seed set as a comma-separated list of labels.
    #[arg(long = "s", value_delimiter = ',', required = true)]
    pub seeds: Vec<usize>,
    /// Label of the first agent (0 or 1). Applies to `--s`, edge files and output.
    #[arg(long, default_value_t = 0)]
    pub index_base: usize,
    #[arg(long)]
    pub r: usize,
    /// Cross-check against exhaustive search.
    #[arg(long)]
    pub bruteforce: bool,
}

/// Runs a parsed command, writing its report to a string. Returns the exit
/// status and the text for stdout.
pub fn execute(cli: &Cli) -> (u8, String) {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Robustness(args) => cmd_robustness(args),
        Command::List => (
            EXIT_OK,
            bundled::NAMES.iter().map(|n| format!("{n}\n")).collect(),
        ),
    }
}

fn load(path: &Path, o: &OverrideArgs, out: &mut String) -> Option<LoadedScenario> {
    match load_with(path, &o.overrides()) {
        Ok(l) => Some(l),
        Err(e) => {
            let msg = e.to_string();
            let shown = path.display().to_string();
            if msg.contains(&shown) {
                let _ = writeln!(out, "error: {msg}");
            } else {
                let _ = writeln!(out, "error: {shown}: {msg}");
            }
            None
        }
    }
}

fn cmd_validate(args: &ValidateArgs) -> (u8, String) {
    let mut out = String::new();
    let mut code = EXIT_OK;
    for path in &args.scenarios {
        let Some(l) = load(path, &args.overrides, &mut out) else {
            code = code.max(EXIT_USAGE);
            continue;
        };
        match engine::validate(&l.scenario) {
            Ok(report) => {
                let _ = write!(out, "== {}\n{report}", l.name);
                if !report.all_passed() {
                    code = code.max(EXIT_VALIDATION);
                }
            }
            Err(e) => {
                let _ = writeln!(out, "error: {}: {e}", l.name);
                code = code.max(EXIT_USAGE);
            }
        }
    }
    (code, out)
}

fn output_root(args: &RunArgs, l: &LoadedScenario) -> PathBuf {
    if let Some(dir) = &args.out {
        return dir.clone();
    }
    if let Some(dir) = l.file.output.as_ref().and_then(|o| o.dir.as_ref()) {
        return if dir.is_absolute() || l.base_dir.starts_with(bundled::dir()) {
            dir.clone()
        } else {
            l.base_dir.join(dir)
        };
    }
    env::var_os(OUT_DIR_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

/// Gives scenarios that share a name distinct output subdirectories.
fn unique_names(loaded: &[LoadedScenario]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    loaded
        .iter()
        .map(|l| {
            let k = seen.entry(&l.name).or_default();
            *k += 1;
            if *k == 1 {
                l.name.clone()
            } else {
                format!("{}-{k}", l.name)
            }
        })
        .collect()
}

fn cmd_run(args: &RunArgs) -> (u8, String) {
    let mut out = String::new();
    let mut code = EXIT_OK;
    let mut loaded = Vec::new();
    for path in &args.scenarios {
        match load(path, &args.overrides, &mut out) {
            Some(l) => loaded.push(l),
            None => code = code.max(EXIT_USAGE),
        }
    }
    let names = unique_names(&loaded);
    let jobs: Vec<(&LoadedScenario, &String)> = loaded.iter().zip(&names).collect();
    let results: Vec<(u8, String)> = if args.jobs > 1 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs as usize)
            .build()
        {
            Ok(pool) => {
                pool.install(|| jobs.par_iter().map(|(l, n)| run_one(args, l, n)).collect())
            }
            Err(e) => return (EXIT_RUNTIME, format!("{out}error: thread pool: {e}\n")),
        }
    } else {
        jobs.iter().map(|(l, n)| run_one(args, l, n)).collect()
    };
    for (c, text) in results {
        code = code.max(c);
        out.push_str(&text);
    }
    (code, out)
}

fn run_one(args: &RunArgs, l: &LoadedScenario, subdir: &str) -> (u8, String) {
    let mut out = String::new();
    let _ = writeln!(out, "== {}", l.name);
    let report = match engine::validate(&l.scenario) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return (EXIT_USAGE, out);
        }
    };
    let _ = write!(out, "{report}");
    if args.strict && !report.all_passed() {
        let failed: Vec<String> = report.failed().map(|c| c.hypothesis.to_string()).collect();
        let _ = writeln!(
            out,
            "refusing to run: hypothesis not met: {}",
            failed.join("; ")
        );
        return (EXIT_VALIDATION, out);
    }
    match simulate(args, l, subdir, &mut out) {
        Ok(()) => (EXIT_OK, out),
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            (EXIT_RUNTIME, out)
        }
    }
}

fn simulate(
    args: &RunArgs,
    l: &LoadedScenario,
    subdir: &str,
    out: &mut String,
) -> msrpa::Result<()> {
    let tr = engine::run(&l.scenario)?;
    let m = MetricSeries::from_trace(&tr)?;
    let dir = output_root(args, l).join(subdir);
    let paths = export::write_all(&tr, &m, &dir)?;
    let violations = tr.violations().count();
    let _ = writeln!(
        out,
        "ran {} steps, {} messages, {} acceptances, {violations} assumption violations",
        l.scenario.horizon,
        tr.rounds.iter().map(|r| r.messages.len()).sum::<usize>(),
        tr.acceptances().count(),
    );
    let _ = writeln!(
        out,
        "final tracking error {:e}",
        m.e.last().copied().unwrap_or(0.0)
    );
    let _ = writeln!(out, "wrote {}", paths.trace.display());
    let _ = writeln!(out, "wrote {}", paths.messages.display());
    let _ = writeln!(out, "wrote {}", paths.metrics.display());
    if args.check_theorems {
        check_theorems(&tr, &m, out)?;
    }
    Ok(())
}

fn check_theorems(tr: &Trace, m: &MetricSeries, out: &mut String) -> msrpa::Result<()> {
    let sc = &tr.scenario;
    let t0 = sc.params.t0;
    let eta = sc.params.eta as i64;
    let conv = m
        .convergence_time
        .map_or_else(|| "never".to_string(), |t| t.to_string());
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    let note = if tr.report.all_passed() {
        ""
    } else {
        " (hypotheses not met, guarantee does not apply)"
    };
    match sc.params.u_max {
        None => {
            let deadline = t0 + eta;
            let ok =
                m.t.iter()
                    .zip(&m.e)
                    .all(|(&t, &e)| t < deadline || e <= EXACT_TOL);
            let _ = writeln!(out, "exact tracking from t = {deadline}");
            let _ = writeln!(out, "observed convergence time {conv}");
            let _ = writeln!(out, "unbounded tracking: {}{note}", verdict(ok));
        }
        Some(_) => {
            let Some(periods) = m.bound_periods else {
                let _ = writeln!(
                    out,
                    "bounded tracking: FAIL, no positive input margin{note}"
                );
                return Ok(());
            };
            let deadline = t0 + periods as i64 * eta;
            let mono = metrics::monotonicity_check(tr, EXACT_TOL)?;
            let reached = m.t.last().is_some_and(|&t| t >= deadline);
            let tracked =
                m.t.iter()
                    .zip(&m.e)
                    .all(|(&t, &e)| t < deadline || e <= EXACT_TOL);
            let ok = mono.holds && tracked && m.convergence_time.is_some_and(|t| t <= deadline);
            let _ = writeln!(
                out,
                "epsilon {}",
                tr.report
                    .epsilon
                    .map_or_else(|| "n/a".into(), |e| e.to_string())
            );
            let _ = writeln!(out, "T = {periods} periods, bound t = {deadline}");
            let _ = writeln!(out, "observed convergence time {conv}");
            let _ = writeln!(out, "monotone tracking error: {}", verdict(mono.holds));
            if !reached {
                let _ = writeln!(out, "note: horizon ends before the bound");
            }
            let _ = writeln!(out, "bounded tracking: {}{note}", verdict(ok));
        }
    }
    Ok(())
}

fn parse_pair(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn build_graph(args: &RobustnessArgs) -> Result<Digraph, String> {
    if let Some(spec) = &args.circulant {
        let (n, k) = parse_pair(spec).ok_or(format!("--circulant expects N,K, got {spec:?}"))?;
        return graph::k_circulant(n, k, args.undirected).map_err(|e| e.to_string());
    }
    if let Some(path) = &args.edges {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let g = Digraph::from_edge_list(&text, None).map_err(|e| e.to_string())?;
        if args.index_base == 0 {
            return Ok(g);
        }
        let shifted: Result<Vec<(usize, usize)>, String> = g
            .edges()
            .map(|(h, t)| match (h.checked_sub(1), t.checked_sub(1)) {
                (Some(h), Some(t)) => Ok((h, t)),
                _ => Err("label 0 in a 1-based edge list".to_string()),
            })
            .collect();
        return Digraph::from_edges(g.n().saturating_sub(1), shifted?).map_err(|e| e.to_string());
    }
    if let Some(n) = args.path {
        return Ok(Digraph::path(n));
    }
    if let Some(n) = args.complete {
        return Ok(Digraph::complete(n));
    }
    Err("one of --circulant, --edges, --path or --complete is required".into())
}

fn labels(set: &AgentSet, base: usize) -> String {
    let items: Vec<String> = set.iter().map(|a| (a.0 + base).to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

fn cmd_robustness(args: &RobustnessArgs) -> (u8, String) {
    let mut out = String::new();
    if args.index_base > 1 {
        return (EXIT_USAGE, "error: --index-base must be 0 or 1\n".into());
    }
    let g = match build_graph(args) {
        Ok(g) => g,
        Err(e) => return (EXIT_USAGE, format!("error: {e}\n")),
    };
    let mut s = AgentSet::new();
    for &label in &args.seeds {
        match label.checked_sub(args.index_base).filter(|&i| i < g.n()) {
            Some(i) => {
                s.insert(AgentId(i));
            }
            None => {
                return (
                    EXIT_USAGE,
                    format!("error: seed label {label} is not an agent\n"),
                )
            }
        }
    }
    let cert = match graph::strongly_robust_wrt(&g, &s, args.r) {
        Ok(c) => c,
        Err(e) => return (EXIT_USAGE, format!("error: {e}\n")),
    };
    let base = args.index_base;
    let _ = writeln!(
        out,
        "graph: {} agents, {} edges; S = {}; r = {}",
        g.n(),
        g.edge_count(),
        labels(&s, base),
        args.r
    );
    let _ = writeln!(out, "holds: {}", cert.holds);
    for (round, absorbed) in &cert.peel_order {
        let _ = writeln!(out, "round {round}: {}", labels(absorbed, base));
    }
    if !cert.holds {
        let _ = writeln!(out, "witness: {}", labels(&cert.witness, base));
    }
    if args.bruteforce {
        match graph::strongly_robust_bruteforce(&g, &s, args.r) {
            Ok(brute) if brute == cert.holds => {
                let _ = writeln!(out, "bruteforce: agrees ({brute})");
            }
            Ok(brute) => {
                let _ = writeln!(out, "bruteforce: DISAGREES ({brute})");
                return (EXIT_RUNTIME, out);
            }
            Err(e) => {
                let _ = writeln!(
                    out,
                    "error: {e} (exhaustive limit is {BRUTEFORCE_LIMIT} agents outside S)"
                );
                return (EXIT_USAGE, out);
            }
        }
    }
    (EXIT_OK, out)
}
