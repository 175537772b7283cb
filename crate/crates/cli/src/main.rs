use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cbgraph_core::bench::{bfs_cbgraph, gen_fattree, gen_running_example, FattreeSpec, Variant};
use cbgraph_core::chc::{emit_chc, solve_chc, validate_solution, ChcError, ChcOutcome};
use cbgraph_core::model::{route_to_json, Document, Interfaces};
use cbgraph_core::sim::{check_abstract_convergence, random_fair_schedule, run, FairnessProfile};
use cbgraph_core::smt::{Profile, SolverConfig};
use cbgraph_core::tolerance::tolerance_report;
use cbgraph_core::verify::{verify, CbGraph, VerifyOptions};
use cbgraph_core::Network;

#[derive(Parser, Debug)]
#[command(
    name = "cbgraph",
    version,
    about = "Modular verification of eventually-stable routing properties"
)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    /// Solver binary; overrides CBGRAPH_SOLVER
    #[arg(long, global = true)]
    solver: Option<String>,

    /// Extra solver argument, repeatable; replaces the default arguments
    #[arg(long = "solver-arg", global = true, allow_hyphen_values = true)]
    solver_args: Vec<String>,

    /// Per-query timeout in seconds
    #[arg(long, global = true, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    timeout: u64,

    /// Concurrent solver processes
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,

    /// Write every solver script to this directory
    #[arg(long = "dump-smt", global = true)]
    dump_smt: Option<PathBuf>,

    /// Output style on standard output
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Pretty,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check interfaces and properties of a network
    Verify {
        #[arg(long)]
        net: PathBuf,
        /// Also write the verdict as JSON
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        profile: Profile,
    },
    /// Report how many CB-edge failures each node survives
    Tolerance {
        #[arg(long)]
        net: PathBuf,
        /// Check whether the network survives this many failures
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Synthesize interfaces for a given CB-graph
    Synth {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        cbgraph: PathBuf,
        #[arg(long, default_value = "full")]
        profile: Profile,
        /// Write the network with the solved interfaces
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the network under a random fair schedule
    Simulate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: usize,
        /// Edge `u->v` that stops delivering after the cutoff, repeatable
        #[arg(long = "fail")]
        fail: Vec<String>,
        /// Time after which failed edges stop delivering
        #[arg(long, default_value_t = 0)]
        cutoff: usize,
        #[arg(long, default_value_t = 3)]
        activation_period: usize,
        #[arg(long, default_value_t = 3)]
        max_lag: usize,
        /// Trailing window for the convergence check
        #[arg(long, default_value_t = 5)]
        tail: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write benchmark inputs
    Gen {
        /// Fat-tree with this many pods
        #[arg(long, conflicts_with = "example", required_unless_present = "example")]
        fattree: Option<usize>,
        #[arg(long, default_value = "reachability")]
        variant: Variant,
        /// Built-in example; only `fig1` exists
        #[arg(long)]
        example: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl RunConfig {
    fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig::discover(self.solver.as_deref());
        if !self.solver_args.is_empty() {
            cfg.args = self.solver_args.clone();
        }
        cfg.timeout = Duration::from_secs(self.timeout);
        cfg.dump_dir = self.dump_smt.clone();
        cfg
    }

    fn options(&self, profile: Profile) -> VerifyOptions {
        let mut opts = VerifyOptions {
            solver: self.solver(),
            profile,
            ..VerifyOptions::default()
        };
        if let Some(j) = self.jobs {
            opts.jobs = j as usize;
        }
        opts
    }

    fn emit(&self, pretty: &str, value: &Value) -> Result<()> {
        match self.format {
            Format::Pretty => print!("{pretty}"),
            Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        }
        Ok(())
    }
}

fn load(path: &Path) -> Result<Document> {
    let src =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Document::parse(&src).with_context(|| format!("invalid network file {}", path.display()))
}

fn interfaces(doc: &Document, path: &Path) -> Result<Interfaces> {
    doc.interfaces().map_err(|errs| {
        let msgs: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        anyhow!("{}: {}", path.display(), msgs.join("; "))
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_verify(
    cfg: &RunConfig,
    net_path: &Path,
    json_out: Option<&Path>,
    profile: Profile,
) -> Result<ExitCode> {
    let doc = load(net_path)?;
    let ifs = interfaces(&doc, net_path)?;
    let verdict = verify(&doc.network, &ifs, &cfg.options(profile))?;
    let value = verdict.to_json(&doc.network);
    if let Some(p) = json_out {
        write_json(p, &value)?;
    }
    cfg.emit(&verdict.render(&doc.network), &value)?;
    Ok(exit(verdict.is_correct()))
}

fn cmd_tolerance(
    cfg: &RunConfig,
    net_path: &Path,
    k: Option<u64>,
    json_out: Option<&Path>,
) -> Result<ExitCode> {
    let doc = load(net_path)?;
    let ifs = interfaces(&doc, net_path)?;
    let net = &doc.network;
    let verdict = verify(net, &ifs, &cfg.options(Profile::Full))?;
    if verdict.failures.iter().any(|f| f.kind.is_essential()) {
        cfg.emit(
            &verdict.render(net),
            &json!({"verdict": verdict.to_json(net)}),
        )?;
        return Ok(ExitCode::from(1));
    }
    let report = tolerance_report(&verdict.cb_graph, net, k);
    let value = json!({"tolerance": report.to_json(net), "verdict": verdict.to_json(net)});
    if let Some(p) = json_out {
        write_json(p, &value)?;
    }
    cfg.emit(&report.render(net), &value)?;
    Ok(exit(report.for_k.unwrap_or(true) && verdict.is_correct()))
}

fn cmd_synth(
    cfg: &RunConfig,
    net_path: &Path,
    graph_path: &Path,
    profile: Profile,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let doc = load(net_path)?;
    let net = &doc.network;
    let props = doc
        .y
        .clone()
        .ok_or_else(|| anyhow!("{}: no property map Y", net_path.display()))?;
    let src = fs::read_to_string(graph_path)
        .with_context(|| format!("cannot read {}", graph_path.display()))?;
    let gv: Value = serde_json::from_str(&src)
        .with_context(|| format!("invalid JSON in {}", graph_path.display()))?;
    let g = CbGraph::from_json(net, &gv).map_err(|errs| {
        let msgs: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        anyhow!("{}: {}", graph_path.display(), msgs.join("; "))
    })?;
    let opts = cfg.options(profile);
    let sys = emit_chc(net, &props, &g, profile)?;
    match solve_chc(net, &sys, &opts.solver)? {
        ChcOutcome::Infeasible => {
            cfg.emit("Infeasible\n", &json!({"result": "infeasible"}))?;
            Ok(ExitCode::from(1))
        }
        ChcOutcome::Unknown(reason) => bail!("solver gave no answer: {reason}"),
        ChcOutcome::Solved(sol) => {
            let ifs = sol.interfaces(&props);
            match validate_solution(net, &ifs, &g, &opts) {
                Ok(_) => {}
                Err(ChcError::RoundTripFailure { failed, .. }) => {
                    bail!("solved interfaces fail validation at {}", failed.join(", "))
                }
                Err(e) => return Err(e.into()),
            }
            let doc_out = Document::new(net.clone(), Some(ifs)).to_value();
            if let Some(p) = out {
                write_json(p, &doc_out)?;
            }
            let pretty = format!("Solved (validated)\n{}", sol.render(net));
            cfg.emit(&pretty, &json!({"result": "solved", "document": doc_out}))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

struct SimArgs<'a> {
    seed: u64,
    horizon: usize,
    fail: &'a [String],
    cutoff: usize,
    activation_period: usize,
    max_lag: usize,
    tail: usize,
    trace: Option<&'a Path>,
}

fn cmd_simulate(cfg: &RunConfig, net_path: &Path, a: SimArgs<'_>) -> Result<ExitCode> {
    let doc = load(net_path)?;
    let net: &Network = &doc.network;
    let mut profile = FairnessProfile::new(a.activation_period, a.max_lag);
    for f in a.fail {
        let (u, v) = f
            .split_once("->")
            .ok_or_else(|| anyhow!("--fail expects u->v, got `{f}`"))?;
        let e = net
            .node(u.trim())
            .zip(net.node(v.trim()))
            .and_then(|(u, v)| net.edge(u, v))
            .ok_or_else(|| anyhow!("no edge {f}"))?;
        profile = profile.with_failure(e, a.cutoff);
    }
    let sched = random_fair_schedule(net, a.seed, a.horizon, &profile)?;
    let trace = run(net, &sched)?;
    if let Some(p) = a.trace {
        write_json(p, &trace.to_json(net))?;
    }
    let mut pretty = format!("final states at t={}:\n", a.horizon);
    let mut finals = serde_json::Map::new();
    for v in net.nodes() {
        let r = route_to_json(net, trace.state(v, a.horizon));
        pretty.push_str(&format!("  {}: {r}\n", net.name(v)));
        finals.insert(net.name(v).to_string(), r);
    }
    let mut value = json!({"final": finals});
    let mut ok = true;
    for (key, preds) in [("Q", &doc.q), ("Y", &doc.y)] {
        let Some(preds) = preds else { continue };
        let held: BTreeMap<_, _> = check_abstract_convergence(net, &trace, preds, a.tail)?;
        let bad: Vec<&str> = held
            .iter()
            .filter(|(_, &b)| !b)
            .map(|(&v, _)| net.name(v))
            .collect();
        ok &= bad.is_empty();
        pretty.push_str(&format!(
            "{key} over the last {} steps: {}\n",
            a.tail,
            if bad.is_empty() {
                "holds everywhere".to_string()
            } else {
                format!("violated at {}", bad.join(", "))
            }
        ));
        value[key] = json!(bad);
    }
    cfg.emit(&pretty, &value)?;
    Ok(exit(ok))
}

fn cmd_gen(
    cfg: &RunConfig,
    fattree: Option<usize>,
    variant: Variant,
    example: Option<&str>,
    out: &Path,
) -> Result<ExitCode> {
    let mut written = Vec::new();
    let mut put = |name: String, value: Value| -> Result<()> {
        let p = out.join(name);
        write_json(&p, &value)?;
        written.push(p.display().to_string());
        Ok(())
    };
    match (fattree, example) {
        (Some(k), _) => {
            let inst = gen_fattree(&FattreeSpec::new(k, variant))?;
            let stem = format!("fattree{k}_{variant}");
            let g = bfs_cbgraph(&inst.network, inst.destination);
            put(format!("{stem}.cbgraph.json"), g.to_json(&inst.network))?;
            put(
                format!("{stem}.json"),
                Document::new(inst.network, Some(inst.interfaces)).to_value(),
            )?;
        }
        (None, Some("fig1")) => {
            let ex = gen_running_example();
            put(
                "fig1_cbgraph.json".into(),
                ex.tree_graph().to_json(&ex.network),
            )?;
            put(
                "fig1_pkg1.json".into(),
                Document::new(ex.network.clone(), Some(ex.package1)).to_value(),
            )?;
            put(
                "fig1_pkg2.json".into(),
                Document::new(ex.network, Some(ex.package2)).to_value(),
            )?;
        }
        (None, Some(other)) => bail!("unknown example `{other}`; available: fig1"),
        (None, None) => bail!("give --fattree K or --example NAME"),
    }
    let pretty: String = written.iter().map(|p| format!("wrote {p}\n")).collect();
    cfg.emit(&pretty, &json!({"written": written}))?;
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let cfg = &cli.run;
    match &cli.command {
        Command::Verify { net, json, profile } => cmd_verify(cfg, net, json.as_deref(), *profile),
        Command::Tolerance { net, k, json } => cmd_tolerance(cfg, net, *k, json.as_deref()),
        Command::Synth {
            net,
            cbgraph,
            profile,
            out,
        } => cmd_synth(cfg, net, cbgraph, *profile, out.as_deref()),
        Command::Simulate {
            net,
            seed,
            horizon,
            fail,
            cutoff,
            activation_period,
            max_lag,
            tail,
            trace,
        } => cmd_simulate(
            cfg,
            net,
            SimArgs {
                seed: *seed,
                horizon: *horizon,
                fail,
                cutoff: *cutoff,
                activation_period: *activation_period,
                max_lag: *max_lag,
                tail: *tail,
                trace: trace.as_deref(),
            },
        ),
        Command::Gen {
            fattree,
            variant,
            example,
            out,
        } => cmd_gen(cfg, *fattree, *variant, example.as_deref(), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
