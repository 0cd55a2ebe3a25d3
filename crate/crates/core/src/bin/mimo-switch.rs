use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, bail};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mimo_switch::harness::{
    self, CsvPaths, Protocol, RunConfig, Summary, TopologyMode, sweep_training, write_sweep_csv,
};
use mimo_switch::link_adapt::McsTable;
use mimo_switch::mac::Mode;

#[derive(Parser)]
#[command(name = "mimo-switch", version, about = "Two-link MIMO MAC Monte-Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo and write trial, histogram and summary CSVs.
    Run(RunArgs),
    /// Ergodic throughput against the number of training symbols.
    SweepNt {
        #[command(flatten)]
        common: RunArgs,
        /// Training symbol counts to sweep.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
        values: Vec<usize>,
    },
    /// Per-link throughput and chosen schemes on the two fixed topologies.
    TopologyDemo(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Comma-separated subset of single,mima,mst,adaptive.
    #[arg(long)]
    protocols: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training symbols per transmit antenna.
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    backoff_db: Option<f64>,
    #[arg(long)]
    frame_ms: Option<f64>,
    /// random, a or b.
    #[arg(long)]
    topology: Option<TopologyMode>,
    /// MCS table in TOML (`[[mcs]]` entries).
    #[arg(long)]
    mcs_table: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-frame allocation trace.
    #[arg(long)]
    trace: bool,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<String>,
    protocols: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    nt: Option<usize>,
    backoff_db: Option<f64>,
    frame_ms: Option<f64>,
    topology: Option<String>,
    mcs_table: Option<PathBuf>,
    out: Option<PathBuf>,
}

struct Resolved {
    cfg: RunConfig,
    out: PathBuf,
    trace: bool,
}

fn resolve(args: &RunArgs) -> anyhow::Result<Resolved> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let mode = match (args.mode, &file.mode) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse()?,
        (None, None) => Mode::Ideal,
    };
    let mut cfg = RunConfig::new(mode);
    if let Some(p) = args.protocols.as_ref().or(file.protocols.as_ref()) {
        cfg.protocols = Protocol::parse_list(p)?;
    }
    if let Some(n) = args.trials.or(file.trials) {
        cfg.n_trials = n;
    }
    if let Some(s) = args.seed.or(file.seed) {
        cfg.seed = s;
    }
    if let Some(nt) = args.nt.or(file.nt) {
        cfg.n_training = nt;
    }
    if let Some(b) = args.backoff_db.or(file.backoff_db) {
        cfg.backoff_db = b;
    }
    if let Some(ms) = args.frame_ms.or(file.frame_ms) {
        cfg.frame_s = ms * 1e-3;
    }
    cfg.topology = match (args.topology, &file.topology) {
        (Some(t), _) => t,
        (None, Some(s)) => s.parse()?,
        (None, None) => cfg.topology,
    };
    if let Some(path) = args.mcs_table.as_ref().or(file.mcs_table.as_ref()) {
        cfg.mcs = McsTable::load(path)?;
    }
    cfg.parallel = !args.sequential;
    cfg.validate()?;

    let out = args
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved { cfg, out, trace: args.trace })
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    if dir.as_os_str().is_empty() {
        bail!("empty output directory");
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn print_summary(summary: &Summary) {
    println!(
        "{:<9} {:>10} {:>9} {:>9} {:>7} {:>7} {:>9}",
        "protocol", "ergodic", "out<1.00", "out<0.95", "rt_min", "rt_max", "conc_frm"
    );
    for p in &summary.protocols {
        println!(
            "{:<9} {:>10.2} {:>9.3} {:>9.3} {:>7.2} {:>7.2} {:>9.2}",
            p.protocol.as_str(),
            p.ergodic_mbps,
            p.outage_100,
            p.outage_095,
            p.rt_min,
            p.rt_max,
            p.concurrent_frame_fraction
        );
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let Resolved { cfg, out, trace } = resolve(args)?;
    create_dir(&out)?;
    let records = if trace {
        let traced = harness::run_traced(&cfg)?;
        let frames: Vec<_> = traced.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
        harness::write_trace(&out.join("trace.csv"), &frames)?;
        traced.into_iter().map(|(r, _)| r).collect()
    } else {
        harness::run(&cfg)?
    };
    let summary = harness::aggregate(&records)?;
    harness::emit_csv(&records, &summary, &CsvPaths::in_dir(&out))?;
    print_summary(&summary);
    Ok(())
}

fn cmd_sweep(args: &RunArgs, values: &[usize]) -> anyhow::Result<()> {
    let mut args = args.clone();
    args.mode.get_or_insert(Mode::Practical);
    let Resolved { cfg, out, .. } = resolve(&args)?;
    create_dir(&out)?;
    let rows = sweep_training(&cfg, values)?;
    write_sweep_csv(&out.join("sweep_nt.csv"), &rows)?;
    for r in &rows {
        println!("nt={:<3} {:<9} {:>8.2} Mbps", r.n_training, r.protocol.as_str(), r.ergodic_mbps);
    }
    Ok(())
}

fn cmd_topology_demo(args: &RunArgs) -> anyhow::Result<()> {
    let mut args = args.clone();
    args.trials.get_or_insert(500);
    for topology in [TopologyMode::FixedA, TopologyMode::FixedB] {
        args.topology = Some(topology);
        let Resolved { cfg, .. } = resolve(&args)?;
        let summary = harness::aggregate(&harness::run(&cfg)?)?;
        let mode = match cfg.mode {
            Mode::Ideal => "ideal",
            Mode::Practical => "practical",
        };
        println!("topology {} ({} trials, {mode} mode)", topology.as_str(), cfg.n_trials);
        print_summary(&summary);
        println!();
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(&args),
        Command::SweepNt { common, values } => cmd_sweep(&common, &values),
        Command::TopologyDemo(args) => cmd_topology_demo(&args),
    }
}
