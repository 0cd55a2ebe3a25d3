//! Monte-Carlo driver, RT-ratio statistics and CSV reporting.

use std::fmt;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::channel::{
    draw_fading, estimate_channel, random_topology, ChannelParams, EstimationConfig, FadingRealization, Topology,
};
use crate::error::{Error, Result};
use crate::link_adapt::{BackoffConfig, LinkAdapter, McsTable, OfdmParams, PayloadDurations, RateTable};
use crate::mac::{
    plan_adaptive_ideal, plan_adaptive_practical, plan_mima_mac, plan_mst_mac, plan_single_link_mac, FramePlan, Mode,
    Scheme, TimingModel,
};
use crate::rng::{substream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Single,
    Mima,
    Mst,
    Adaptive,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Single, Protocol::Mima, Protocol::Mst, Protocol::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Single => "single",
            Protocol::Mima => "mima",
            Protocol::Mst => "mst",
            Protocol::Adaptive => "adaptive",
        }
    }

    /// Parses a comma-separated list such as `single,mima,mst,adaptive`.
    pub fn parse_list(s: &str) -> Result<Vec<Protocol>> {
        let mut out: Vec<Protocol> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::InvalidParameter("no protocols selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown protocol {s:?}")))
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Mode::Ideal),
            "practical" => Ok(Mode::Practical),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyMode {
    Random,
    /// Parallel links, same direction.
    FixedA,
    /// Parallel links, opposite directions.
    FixedB,
}

impl TopologyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyMode::Random => "random",
            TopologyMode::FixedA => "a",
            TopologyMode::FixedB => "b",
        }
    }
}

impl std::str::FromStr for TopologyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(TopologyMode::Random),
            "a" => Ok(TopologyMode::FixedA),
            "b" => Ok(TopologyMode::FixedB),
            _ => Err(Error::Parse(format!("unknown topology {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub protocols: Vec<Protocol>,
    pub n_trials: u64,
    pub seed: u64,
    pub n_training: usize,
    pub backoff_db: f64,
    pub frame_s: f64,
    pub topology: TopologyMode,
    pub l_max: usize,
    pub channel: ChannelParams,
    pub mcs: McsTable,
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            protocols: Protocol::ALL.to_vec(),
            n_trials: 1000,
            seed: 1,
            n_training: 4,
            backoff_db: match mode {
                Mode::Ideal => 0.0,
                Mode::Practical => 1.0,
            },
            frame_s: 0.005,
            topology: TopologyMode::Random,
            l_max: 8,
            channel: ChannelParams::default(),
            mcs: McsTable::default(),
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be >= 1".into()));
        }
        if self.protocols.is_empty() {
            return Err(Error::InvalidParameter("no protocols selected".into()));
        }
        if !(self.frame_s > 0.0) || !self.frame_s.is_finite() {
            return Err(Error::InvalidParameter("frame duration must be positive".into()));
        }
        BackoffConfig::new(self.backoff_db)?;
        self.channel.validate()?;
        self.mcs.validate()?;
        self.estimation().validate()?;
        // longest handshake must fit in the frame even at the largest backoff
        self.timing()
            .payload_s(Scheme::Concurrent, Mode::Practical, self.timing().cw_min)?;
        Ok(())
    }

    pub fn timing(&self) -> TimingModel {
        TimingModel {
            frame_s: self.frame_s,
            ..TimingModel::new(self.n_training, self.channel.n_antennas)
        }
    }

    pub fn estimation(&self) -> EstimationConfig {
        EstimationConfig {
            n_training: self.n_training,
            l_max: self.l_max,
            n_subcarriers: self.channel.n_subcarriers,
            noise_power_mw: self.channel.noise_power_mw(),
        }
    }

    pub fn adapter(&self) -> LinkAdapter {
        LinkAdapter {
            mcs: self.mcs.clone(),
            ofdm: OfdmParams {
                n_subcarriers: self.channel.n_subcarriers,
                ..OfdmParams::default()
            },
            noise_power_mw: self.channel.noise_power_mw(),
        }
    }

    fn backoff(&self) -> BackoffConfig {
        BackoffConfig::new(self.backoff_db).expect("validated")
    }
}

/// One protocol's result on one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOutcome {
    pub protocol: Protocol,
    pub schemes: [Scheme; 2],
    pub throughput_mbps: [f64; 2],
    /// Throughput relative to the single link MAC on the same trial and
    /// link; `None` when the single link MAC delivered nothing.
    pub rt_ratio: [Option<f64>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub outcomes: Vec<ProtocolOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, p: Protocol) -> Option<&ProtocolOutcome> {
        self.outcomes.iter().find(|o| o.protocol == p)
    }
}

/// A planned frame with the MDUs actually credited.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTrace {
    pub trial: u64,
    pub protocol: Protocol,
    pub plan: FramePlan,
    pub credited: [u32; 2],
}

pub const TRACE_HEADER: &str = "trial,protocol,frame,scheme,m1,m2,mcs_l1,mcs_l2,mdus_l1,mdus_l2";

impl FrameTrace {
    /// Line of the trace format; MCS lists are `;`-separated, `-` for a
    /// stream without a usable MCS.
    pub fn line(&self) -> String {
        let mcs = |v: &[Option<u8>]| {
            v.iter()
                .map(|m| m.map_or_else(|| "-".to_string(), |i| i.to_string()))
                .collect::<Vec<_>>()
                .join(";")
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.protocol,
            self.plan.frame,
            self.plan.scheme,
            self.plan.config.m1,
            self.plan.config.m2,
            mcs(&self.plan.config.mcs[0]),
            mcs(&self.plan.config.mcs[1]),
            self.credited[0],
            self.credited[1]
        )
    }
}

/// Channels and rate tables of one trial's two frames.
pub struct TrialChannels {
    pub topology: Topology,
    pub truth: [FadingRealization; 2],
    /// Tables the planners see (estimated channels in practical mode).
    pub planning: [RateTable; 2],
    /// Tables from true channels without backoff, used to adjudicate.
    pub actual: [RateTable; 2],
}

fn trial_topology(cfg: &RunConfig, trial: u64) -> Topology {
    match cfg.topology {
        TopologyMode::Random => random_topology(&mut substream(cfg.seed, trial, Purpose::Topology)),
        TopologyMode::FixedA => Topology::parallel_same_direction(),
        TopologyMode::FixedB => Topology::parallel_opposite_direction(),
    }
}

/// Draws everything stochastic about a trial and builds its rate tables.
pub fn trial_channels(cfg: &RunConfig, trial: u64) -> Result<TrialChannels> {
    let topology = trial_topology(cfg, trial);
    let adapter = cfg.adapter();
    let timing = cfg.timing();
    let draw = |f: u8| draw_fading(&topology, u64::from(f), &cfg.channel, &mut substream(cfg.seed, trial, Purpose::Fading { frame: f }));
    let truth = [draw(0)?, draw(1)?];

    let mut planning = Vec::with_capacity(2);
    let mut actual = Vec::with_capacity(2);
    for (f, h) in truth.iter().enumerate() {
        let f = f as u8;
        match cfg.mode {
            Mode::Ideal => {
                let t = adapter.build_rate_table(h, PayloadDurations::uniform(cfg.frame_s), BackoffConfig::NONE)?;
                planning.push(t.clone());
                actual.push(t);
            }
            Mode::Practical => {
                let slots = timing.draw_backoff_slots(&mut substream(cfg.seed, trial, Purpose::Contention { frame: f }));
                let payload = PayloadDurations {
                    single_s: timing.payload_s(Scheme::Single, Mode::Practical, slots)?,
                    concurrent_s: timing.payload_s(Scheme::Concurrent, Mode::Practical, slots)?,
                };
                let est = estimate_channel(h, &cfg.estimation(), &mut substream(cfg.seed, trial, Purpose::Estimation { frame: f }))?;
                planning.push(adapter.build_rate_table(&est, payload, cfg.backoff())?);
                actual.push(adapter.build_rate_table(h, payload, BackoffConfig::NONE)?);
            }
        }
    }
    let [p0, p1]: [RateTable; 2] = planning.try_into().expect("two frames");
    let [a0, a1]: [RateTable; 2] = actual.try_into().expect("two frames");
    Ok(TrialChannels {
        topology,
        truth,
        planning: [p0, p1],
        actual: [a0, a1],
    })
}

fn plan(protocol: Protocol, mode: Mode, tables: [&RateTable; 2]) -> Result<[FramePlan; 2]> {
    Ok(match protocol {
        Protocol::Single => plan_single_link_mac(tables),
        Protocol::Mima => plan_mima_mac(tables)?,
        Protocol::Mst => plan_mst_mac(tables),
        Protocol::Adaptive => match mode {
            Mode::Ideal => plan_adaptive_ideal(tables),
            Mode::Practical => plan_adaptive_practical(tables),
        },
    })
}

/// Runs one trial and also returns per-frame traces.
pub fn run_trial_traced(cfg: &RunConfig, trial: u64) -> Result<(TrialRecord, Vec<FrameTrace>)> {
    let ch = trial_channels(cfg, trial)?;
    let adapter = cfg.adapter();
    let mdu_bits = adapter.ofdm.mdu_bits();
    let window_s = 2.0 * cfg.frame_s;

    let run = |protocol: Protocol, traces: &mut Vec<FrameTrace>| -> Result<([Scheme; 2], [f64; 2])> {
        let plans = plan(protocol, cfg.mode, [&ch.planning[0], &ch.planning[1]])?;
        let mut total = [0u32; 2];
        for (f, p) in plans.iter().enumerate() {
            let (m1, m2) = p.allocation();
            let credited = adapter.delivered(ch.planning[f].get(m1, m2), ch.actual[f].get(m1, m2));
            total[0] += credited[0];
            total[1] += credited[1];
            traces.push(FrameTrace {
                trial,
                protocol,
                plan: p.clone(),
                credited,
            });
        }
        let mbps = total.map(|n| f64::from(n) * mdu_bits / window_s / 1e6);
        Ok(([plans[0].scheme, plans[1].scheme], mbps))
    };

    let mut traces = Vec::new();
    let mut scratch = Vec::new();
    let (_, single) = run(Protocol::Single, &mut scratch)?;
    let mut outcomes = Vec::with_capacity(cfg.protocols.len());
    for &p in &cfg.protocols {
        let (schemes, tput) = run(p, &mut traces)?;
        let rt = [0, 1].map(|l| (single[l] > 0.0).then(|| tput[l] / single[l]));
        outcomes.push(ProtocolOutcome {
            protocol: p,
            schemes,
            throughput_mbps: tput,
            rt_ratio: rt,
        });
    }
    Ok((TrialRecord { trial, outcomes }, traces))
}

pub fn run_trial(cfg: &RunConfig, trial: u64) -> Result<TrialRecord> {
    run_trial_traced(cfg, trial).map(|(r, _)| r)
}

/// All trials of a run, ordered by trial id.
pub fn run_traced(cfg: &RunConfig) -> Result<Vec<(TrialRecord, Vec<FrameTrace>)>> {
    cfg.validate()?;
    if cfg.parallel {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| run_trial_traced(cfg, t))
            .collect()
    } else {
        (0..cfg.n_trials).map(|t| run_trial_traced(cfg, t)).collect()
    }
}

pub fn run(cfg: &RunConfig) -> Result<Vec<TrialRecord>> {
    Ok(run_traced(cfg)?.into_iter().map(|(r, _)| r).collect())
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.1;
pub const OUTAGE_THRESHOLDS: [f64; 2] = [1.0, 0.95];

/// Histogram bin of an RT ratio: `floor(ratio / 0.1)`, robust to ratios that
/// sit exactly on a bin edge.
pub fn histogram_bin(ratio: f64) -> usize {
    (ratio / HISTOGRAM_BIN_WIDTH + 1e-9).floor().max(0.0) as usize
}

/// Fraction of samples strictly below `threshold`.
pub fn outage(ratios: &[f64], threshold: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|&&r| r < threshold).count() as f64 / ratios.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSummary {
    pub protocol: Protocol,
    /// Mean over all (trial, link) samples.
    pub ergodic_mbps: f64,
    pub outage_100: f64,
    pub outage_095: f64,
    /// Defined RT-ratio samples.
    pub rt_samples: usize,
    /// Samples dropped because the single link MAC delivered nothing.
    pub rt_excluded: usize,
    pub rt_min: f64,
    pub rt_max: f64,
    /// Sample counts per 0.1-wide bin, starting at 0.
    pub histogram: Vec<usize>,
    /// Fraction of trials whose first frame is concurrent.
    pub f1_concurrent_fraction: f64,
    /// Fraction of all frames that are concurrent.
    pub concurrent_frame_fraction: f64,
}

impl ProtocolSummary {
    pub fn outage(&self, threshold: f64) -> f64 {
        if threshold == 1.0 {
            self.outage_100
        } else if threshold == 0.95 {
            self.outage_095
        } else {
            panic!("outage only summarised at 1.0 and 0.95")
        }
    }

    pub fn pdf(&self) -> Vec<f64> {
        self.histogram
            .iter()
            .map(|&c| c as f64 / self.rt_samples.max(1) as f64)
            .collect()
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pdf()
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub n_trials: usize,
    pub protocols: Vec<ProtocolSummary>,
}

impl Summary {
    pub fn get(&self, p: Protocol) -> Option<&ProtocolSummary> {
        self.protocols.iter().find(|s| s.protocol == p)
    }
}

/// Folds trial records, in order, into per-protocol statistics.
pub fn aggregate(records: &[TrialRecord]) -> Result<Summary> {
    let first = records.first().ok_or(Error::Empty("no trial records"))?;
    let protocols: Vec<Protocol> = first.outcomes.iter().map(|o| o.protocol).collect();
    let mut out = Vec::with_capacity(protocols.len());
    for &p in &protocols {
        let mut tput = 0.0;
        let mut n_tput = 0usize;
        let mut ratios = Vec::new();
        let mut excluded = 0;
        let (mut f1_conc, mut frames_conc) = (0usize, 0usize);
        for r in records {
            let o = r
                .outcome(p)
                .ok_or_else(|| Error::InvalidParameter(format!("trial {} lacks protocol {p}", r.trial)))?;
            for l in 0..2 {
                tput += o.throughput_mbps[l];
                n_tput += 1;
                match o.rt_ratio[l] {
                    Some(x) => ratios.push(x),
                    None => excluded += 1,
                }
            }
            f1_conc += usize::from(o.schemes[0] == Scheme::Concurrent);
            frames_conc += o.schemes.iter().filter(|&&s| s == Scheme::Concurrent).count();
        }
        let mut histogram = Vec::new();
        for &x in &ratios {
            let b = histogram_bin(x);
            if histogram.len() <= b {
                histogram.resize(b + 1, 0);
            }
            histogram[b] += 1;
        }
        out.push(ProtocolSummary {
            protocol: p,
            ergodic_mbps: tput / n_tput as f64,
            outage_100: outage(&ratios, OUTAGE_THRESHOLDS[0]),
            outage_095: outage(&ratios, OUTAGE_THRESHOLDS[1]),
            rt_samples: ratios.len(),
            rt_excluded: excluded,
            rt_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            rt_max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram,
            f1_concurrent_fraction: f1_conc as f64 / records.len() as f64,
            concurrent_frame_fraction: frames_conc as f64 / (2 * records.len()) as f64,
        });
    }
    Ok(Summary {
        n_trials: records.len(),
        protocols: out,
    })
}

pub const TRIALS_HEADER: &str =
    "trial,protocol,scheme_f1,scheme_f2,throughput_l1_mbps,throughput_l2_mbps,rt_ratio_l1,rt_ratio_l2";
pub const HISTOGRAM_HEADER: &str = "protocol,bin_lo,bin_hi,count,pdf,cdf";
pub const SUMMARY_HEADER: &str =
    "protocol,ergodic_mbps,outage_1_00,outage_0_95,rt_samples,rt_excluded,rt_min,rt_max,f1_concurrent_fraction,concurrent_frame_fraction";
pub const SWEEP_HEADER: &str = "n_training,protocol,ergodic_mbps";

/// Output file locations.
#[derive(Clone, Debug)]
pub struct CsvPaths {
    pub trials: PathBuf,
    pub histogram: PathBuf,
    pub summary: PathBuf,
}

impl CsvPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            trials: dir.join("trials.csv"),
            histogram: dir.join("rt_histogram.csv"),
            summary: dir.join("summary.csv"),
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidParameter("empty output path".into()));
    }
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn write_rows(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let wrap = |source: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(header.split(',')).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let rows = records.iter().flat_map(|r| {
        r.outcomes.iter().map(move |o| {
            vec![
                r.trial.to_string(),
                o.protocol.to_string(),
                o.schemes[0].to_string(),
                o.schemes[1].to_string(),
                o.throughput_mbps[0].to_string(),
                o.throughput_mbps[1].to_string(),
                opt(o.rt_ratio[0]),
                opt(o.rt_ratio[1]),
            ]
        })
    });
    write_rows(path, TRIALS_HEADER, rows)
}

/// Reads a file written by [`write_trials_csv`].
pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let wrap = |source: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(wrap)?;
    let header: Vec<String> = rdr.headers().map_err(wrap)?.iter().map(str::to_string).collect();
    if header.join(",") != TRIALS_HEADER {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let mut records: Vec<TrialRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(wrap)?;
        let f = |i: usize| row.get(i).unwrap_or_default();
        let trial: u64 = f(0).parse().map_err(|e| Error::Parse(format!("trial id: {e}")))?;
        let outcome = ProtocolOutcome {
            protocol: f(1).parse()?,
            schemes: [f(2).parse()?, f(3).parse()?],
            throughput_mbps: [num(f(4))?, num(f(5))?],
            rt_ratio: [opt_num(f(6))?, opt_num(f(7))?],
        };
        match records.last_mut() {
            Some(r) if r.trial == trial => r.outcomes.push(outcome),
            _ => records.push(TrialRecord {
                trial,
                outcomes: vec![outcome],
            }),
        }
    }
    Ok(records)
}

pub fn write_histogram_csv(path: &Path, summary: &Summary) -> Result<()> {
    let n_bins = summary.protocols.iter().map(|p| p.histogram.len()).max().unwrap_or(0);
    let rows = summary.protocols.iter().flat_map(|p| {
        let pdf = p.pdf();
        let cdf = p.cdf();
        (0..n_bins).map(move |b| {
            let count = p.histogram.get(b).copied().unwrap_or(0);
            let lo = b as f64 / 10.0;
            let hi = (b + 1) as f64 / 10.0;
            vec![
                p.protocol.to_string(),
                lo.to_string(),
                hi.to_string(),
                count.to_string(),
                pdf.get(b).copied().unwrap_or(0.0).to_string(),
                cdf.get(b).or(cdf.last()).copied().unwrap_or(0.0).to_string(),
            ]
        })
    });
    write_rows(path, HISTOGRAM_HEADER, rows)
}

pub fn write_summary_csv(path: &Path, summary: &Summary) -> Result<()> {
    let rows = summary.protocols.iter().map(|p| {
        vec![
            p.protocol.to_string(),
            p.ergodic_mbps.to_string(),
            p.outage_100.to_string(),
            p.outage_095.to_string(),
            p.rt_samples.to_string(),
            p.rt_excluded.to_string(),
            p.rt_min.to_string(),
            p.rt_max.to_string(),
            p.f1_concurrent_fraction.to_string(),
            p.concurrent_frame_fraction.to_string(),
        ]
    });
    write_rows(path, SUMMARY_HEADER, rows)
}

/// Writes per-trial records, the RT-ratio histogram/CDF and the ergodic
/// summary.
pub fn emit_csv(records: &[TrialRecord], summary: &Summary, paths: &CsvPaths) -> Result<()> {
    write_trials_csv(&paths.trials, records)?;
    write_histogram_csv(&paths.histogram, summary)?;
    write_summary_csv(&paths.summary, summary)
}

pub fn write_trace(path: &Path, traces: &[FrameTrace]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidParameter("empty trace path".into()));
    }
    let mut f = std::io::BufWriter::new(File::create(path).map_err(io)?);
    writeln!(f, "{TRACE_HEADER}").map_err(io)?;
    for t in traces {
        writeln!(f, "{}", t.line()).map_err(io)?;
    }
    f.flush().map_err(io)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n_training: usize,
    pub protocol: Protocol,
    pub ergodic_mbps: f64,
}

/// Ergodic throughput of every protocol at each training length.
pub fn sweep_training(cfg: &RunConfig, nt_values: &[usize]) -> Result<Vec<SweepRow>> {
    if cfg.mode != Mode::Practical {
        return Err(Error::InvalidParameter("training sweep needs practical mode".into()));
    }
    let mut rows = Vec::new();
    for &nt in nt_values {
        let c = RunConfig {
            n_training: nt,
            ..cfg.clone()
        };
        let summary = aggregate(&run(&c)?)?;
        rows.extend(summary.protocols.iter().map(|p| SweepRow {
            n_training: nt,
            protocol: p.protocol,
            ergodic_mbps: p.ergodic_mbps,
        }));
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(
        path,
        SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.n_training.to_string(),
                r.protocol.to_string(),
                r.ergodic_mbps.to_string(),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(p: Protocol, rt: [Option<f64>; 2]) -> ProtocolOutcome {
        ProtocolOutcome {
            protocol: p,
            schemes: [Scheme::Single, Scheme::Concurrent],
            throughput_mbps: [10.0, 20.0],
            rt_ratio: rt,
        }
    }

    #[test]
    fn aggregate_single_record() {
        let r = TrialRecord {
            trial: 0,
            outcomes: vec![outcome(Protocol::Adaptive, [Some(1.2), Some(1.2)])],
        };
        let s = aggregate(&[r]).unwrap();
        let a = s.get(Protocol::Adaptive).unwrap();
        assert_eq!(a.outage_100, 0.0);
        assert_eq!(histogram_bin(1.2), 12);
        assert_eq!(a.histogram[12], 2);
        assert_eq!(a.pdf()[12], 1.0);
        assert_eq!(a.ergodic_mbps, 15.0);
    }

    #[test]
    fn outage_counting() {
        let r = TrialRecord {
            trial: 0,
            outcomes: vec![outcome(Protocol::Mima, [Some(0.9), Some(1.1)])],
        };
        let s = aggregate(&[r]).unwrap();
        let m = s.get(Protocol::Mima).unwrap();
        assert_eq!(m.outage_100, 0.5);
        assert_eq!(m.outage_095, 0.5);
    }

    #[test]
    fn excluded_ratios_are_counted() {
        let r = TrialRecord {
            trial: 0,
            outcomes: vec![outcome(Protocol::Mst, [None, Some(1.0)])],
        };
        let s = aggregate(&[r]).unwrap();
        let m = s.get(Protocol::Mst).unwrap();
        assert_eq!((m.rt_samples, m.rt_excluded), (1, 1));
        assert_eq!(m.ergodic_mbps, 15.0);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(matches!(aggregate(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram_bin(0.0), 0);
        assert_eq!(histogram_bin(0.3), 3);
        assert_eq!(histogram_bin(0.7), 7);
        assert_eq!(histogram_bin(1.0), 10);
        assert_eq!(histogram_bin(0.999), 9);
        assert_eq!(histogram_bin(2.0), 20);
    }

    #[test]
    fn protocol_list_parsing() {
        assert_eq!(
            Protocol::parse_list("adaptive, single,mst").unwrap(),
            vec![Protocol::Single, Protocol::Mst, Protocol::Adaptive]
        );
        assert!(Protocol::parse_list("").is_err());
        assert!(Protocol::parse_list("aloha").is_err());
    }

    #[test]
    fn empty_path_is_an_error() {
        assert!(write_trials_csv(Path::new(""), &[]).is_err());
        let bad = Path::new("/nonexistent-dir/for/sure/trials.csv");
        let err = write_trials_csv(bad, &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/for/sure/trials.csv"));
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Mode::Practical);
        c.validate().unwrap();
        c.n_trials = 0;
        assert!(c.validate().is_err());
        let c = RunConfig {
            n_training: 1000,
            ..RunConfig::new(Mode::Practical)
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            backoff_db: -1.0,
            ..RunConfig::new(Mode::Ideal)
        };
        assert!(c.validate().is_err());
    }
}
