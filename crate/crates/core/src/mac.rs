//! MAC decision procedures over a two-frame window and the handshake timing
//! model.
//!
//! Frame `F1` belongs to link 1 and frame `F2` to link 2 under the default
//! single link scheme. Every planner picks one stream allocation `(m1, m2)`
//! per frame from that frame's [`RateTable`].

use std::cmp::Reverse;
use std::fmt;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::link_adapt::{allocations, single_link_best, single_link_rate, AllocationEntry, RateTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Single,
    Concurrent,
}

impl Scheme {
    pub fn of(m1: usize, m2: usize) -> Self {
        if m1 > 0 && m2 > 0 {
            Scheme::Concurrent
        } else {
            Scheme::Single
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Single => "single",
            Scheme::Concurrent => "concurrent",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Scheme::Single),
            "concurrent" => Ok(Scheme::Concurrent),
            _ => Err(Error::Parse(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameId {
    F1,
    F2,
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameId::F1 => "F1",
            FrameId::F2 => "F2",
        })
    }
}

/// Stream counts and per-stream MCS indices of both links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamConfig {
    pub m1: usize,
    pub m2: usize,
    pub mcs: [Vec<Option<u8>>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FramePlan {
    pub frame: FrameId,
    pub scheme: Scheme,
    pub config: StreamConfig,
    /// MDUs each link sends in this frame according to the planning table.
    pub mdus: [u32; 2],
}

impl FramePlan {
    pub fn from_entry(frame: FrameId, entry: &AllocationEntry) -> Self {
        let mcs = |l: usize| entry.streams[l].iter().map(|s| s.mcs).collect();
        Self {
            frame,
            scheme: Scheme::of(entry.m1, entry.m2),
            config: StreamConfig {
                m1: entry.m1,
                m2: entry.m2,
                mcs: [mcs(0), mcs(1)],
            },
            mdus: entry.mdus,
        }
    }

    pub fn allocation(&self) -> (usize, usize) {
        (self.config.m1, self.config.m2)
    }
}

/// Non-empty allocations of a table.
fn candidates(table: &RateTable) -> impl Iterator<Item = &AllocationEntry> {
    allocations(table.n_antennas())
        .filter(|&(m1, m2)| m1 + m2 > 0)
        .map(move |(m1, m2)| table.get(m1, m2))
}

/// Ordering among equal-sum candidates: fairer first, then fewer streams,
/// then lexicographically smaller allocation.
type RankKey = (u32, u32, Reverse<usize>, Reverse<(usize, usize, usize, usize)>);

fn frame_key(e: &AllocationEntry) -> RankKey {
    (
        e.sum(),
        e.mdus[0].min(e.mdus[1]),
        Reverse(e.m1 + e.m2),
        Reverse((e.m1, e.m2, 0, 0)),
    )
}

fn pair_key(a: &AllocationEntry, b: &AllocationEntry) -> RankKey {
    let l1 = a.mdus[0] + b.mdus[0];
    let l2 = a.mdus[1] + b.mdus[1];
    (
        l1 + l2,
        l1.min(l2),
        Reverse(a.m1 + a.m2 + b.m1 + b.m2),
        Reverse((a.m1, a.m2, b.m1, b.m2)),
    )
}

fn best_frame<'a>(it: impl Iterator<Item = &'a AllocationEntry>) -> Option<&'a AllocationEntry> {
    it.max_by_key(|e| frame_key(e))
}

/// Default single link scheme: link 1 alone in `F1`, link 2 alone in `F2`,
/// each at its best stream count.
pub fn plan_single_link_mac(tables: [&RateTable; 2]) -> [FramePlan; 2] {
    let (m1, _) = single_link_best(tables[0], 0);
    let (m2, _) = single_link_best(tables[1], 1);
    [
        FramePlan::from_entry(FrameId::F1, tables[0].solo(0, m1)),
        FramePlan::from_entry(FrameId::F2, tables[1].solo(1, m2)),
    ]
}

/// Both links always concurrent with half the antennas each.
pub fn plan_mima_mac(tables: [&RateTable; 2]) -> Result<[FramePlan; 2]> {
    let na = tables[0].n_antennas();
    if !na.is_multiple_of(2) || na == 0 {
        return Err(Error::InvalidParameter(format!(
            "fixed half split needs an even antenna count, got {na}"
        )));
    }
    let h = na / 2;
    Ok([
        FramePlan::from_entry(FrameId::F1, tables[0].get(h, h)),
        FramePlan::from_entry(FrameId::F2, tables[1].get(h, h)),
    ])
}

/// Unconstrained sum maximisation, frame by frame.
pub fn plan_mst_mac(tables: [&RateTable; 2]) -> [FramePlan; 2] {
    fn pick(t: &RateTable) -> &AllocationEntry {
        best_frame(candidates(t)).expect("table has non-empty allocations")
    }
    [
        FramePlan::from_entry(FrameId::F1, pick(tables[0])),
        FramePlan::from_entry(FrameId::F2, pick(tables[1])),
    ]
}

/// Non-causal adaptive switching: joint search over both frames maximising
/// the window sum while each link gets at least its single-link rate.
/// Link 1's guarantee comes from `F1`'s table, link 2's from `F2`'s.
pub fn plan_adaptive_ideal(tables: [&RateTable; 2]) -> [FramePlan; 2] {
    let sl1 = single_link_rate(tables[0], 0);
    let sl2 = single_link_rate(tables[1], 1);
    let mut best: Option<(RankKey, &AllocationEntry, &AllocationEntry)> = None;
    for a in candidates(tables[0]) {
        for b in candidates(tables[1]) {
            if a.mdus[0] + b.mdus[0] < sl1 || a.mdus[1] + b.mdus[1] < sl2 {
                continue;
            }
            let key = pair_key(a, b);
            if best.as_ref().is_none_or(|(k, _, _)| key > *k) {
                best = Some((key, a, b));
            }
        }
    }
    match best {
        Some((_, a, b)) => [FramePlan::from_entry(FrameId::F1, a), FramePlan::from_entry(FrameId::F2, b)],
        // unreachable in practice: the default plan meets both guarantees
        None => plan_single_link_mac(tables),
    }
}

/// Causal decision at the start of `F1`, using only `F1`'s (estimated)
/// table. Returns a concurrent plan, or the single-link plan for link 1 when
/// no concurrent allocation guarantees half of both single-link rates.
pub fn plan_adaptive_practical_f1(table: &RateTable) -> FramePlan {
    let sl1 = single_link_rate(table, 0);
    let sl2 = single_link_rate(table, 1);
    let best = best_frame(candidates(table).filter(|e| 2 * e.mdus[0] >= sl1 && 2 * e.mdus[1] >= sl2));
    match best {
        Some(e) if e.is_concurrent() => FramePlan::from_entry(FrameId::F1, e),
        _ => {
            let (m, _) = single_link_best(table, 0);
            FramePlan::from_entry(FrameId::F1, table.solo(0, m))
        }
    }
}

/// Guaranteed fraction of a link's single-link rate; vacuous (1) when the
/// single-link rate is zero.
pub fn single_link_ratio(mdus: u32, single_rate: u32) -> Ratio<u64> {
    if single_rate == 0 {
        Ratio::from_integer(1)
    } else {
        Ratio::new(2 * u64::from(mdus), u64::from(single_rate))
    }
}

/// Solution of the `F2` configuration problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioPlan {
    pub plan: FramePlan,
    /// Largest simultaneously guaranteeable single-link ratio, capped at 1.
    pub max_ratio: Ratio<u64>,
    /// Ratios achieved by the chosen allocation, per link.
    pub achieved: [Ratio<u64>; 2],
}

/// `F2` configuration after a concurrent `F1`: maximise the sum subject to
/// both links keeping the largest single-link ratio that can be guaranteed.
pub fn plan_adaptive_practical_f2(table: &RateTable) -> RatioPlan {
    let sl = [single_link_rate(table, 0), single_link_rate(table, 1)];
    let ratios = |e: &AllocationEntry| [single_link_ratio(e.mdus[0], sl[0]), single_link_ratio(e.mdus[1], sl[1])];
    let one = Ratio::from_integer(1);
    let max_ratio = allocations(table.n_antennas())
        .map(|(m1, m2)| {
            let r = ratios(table.get(m1, m2));
            r[0].min(r[1])
        })
        .max()
        .expect("non-empty table")
        .min(one);
    let chosen = best_frame(candidates(table).filter(|e| {
        let r = ratios(e);
        r[0] >= max_ratio && r[1] >= max_ratio
    }))
    .expect("the ratio-maximising allocation is always feasible");
    let achieved = ratios(chosen);
    debug_assert!(achieved[0].min(achieved[1]) >= max_ratio);
    RatioPlan {
        plan: FramePlan::from_entry(FrameId::F2, chosen),
        max_ratio,
        achieved,
    }
}

/// Causal adaptive switching over the window: `F1` decides from its own
/// table, `F2` follows with a single link (link 2) or the ratio-guarantee
/// configuration.
pub fn plan_adaptive_practical(tables: [&RateTable; 2]) -> [FramePlan; 2] {
    let f1 = plan_adaptive_practical_f1(tables[0]);
    let f2 = match f1.scheme {
        Scheme::Concurrent => plan_adaptive_practical_f2(tables[1]).plan,
        Scheme::Single => {
            let (m, _) = single_link_best(tables[1], 1);
            FramePlan::from_entry(FrameId::F2, tables[1].solo(1, m))
        }
    };
    [f1, f2]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Ideal,
    Practical,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ideal => "ideal",
            Mode::Practical => "practical",
        }
    }
}

/// Contention and handshake timing, in microseconds unless noted.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingModel {
    pub n_training: usize,
    pub n_antennas: usize,
    pub symbol_us: f64,
    pub slot_us: f64,
    pub cw_min: u32,
    /// Kept for completeness; cooperative links never retry.
    pub cw_max: u32,
    pub frame_s: f64,
    /// Spacing between consecutive control packets.
    pub gap_us: f64,
}

impl TimingModel {
    pub fn new(n_training: usize, n_antennas: usize) -> Self {
        Self {
            n_training,
            n_antennas,
            symbol_us: 4.0,
            slot_us: 9.0,
            cw_min: 7,
            cw_max: 63,
            frame_s: 0.005,
            gap_us: 16.0,
        }
    }

    pub fn rts_us(&self) -> f64 {
        (6 + self.n_training * self.n_antennas) as f64 * self.symbol_us
    }

    pub fn cts_us(&self) -> f64 {
        (6 + self.n_training) as f64 * self.symbol_us
    }

    pub fn dts_us(&self) -> f64 {
        (4 + self.n_training) as f64 * self.symbol_us
    }

    pub fn ack_us(&self) -> f64 {
        (6 + 2) as f64 * self.symbol_us
    }

    /// Control packets of a frame's handshake.
    pub fn control_packets_us(&self, scheme: Scheme) -> Vec<f64> {
        match scheme {
            Scheme::Single => vec![self.rts_us(), self.cts_us(), self.ack_us()],
            Scheme::Concurrent => vec![
                self.rts_us(),
                self.rts_us(),
                self.cts_us(),
                self.dts_us(),
                self.ack_us(),
                self.ack_us(),
            ],
        }
    }

    /// Control packets plus the gaps between consecutive ones.
    pub fn handshake_overhead_us(&self, scheme: Scheme) -> f64 {
        let pk = self.control_packets_us(scheme);
        pk.iter().sum::<f64>() + (pk.len() - 1) as f64 * self.gap_us
    }

    pub fn mean_backoff_us(&self) -> f64 {
        f64::from(self.cw_min) / 2.0 * self.slot_us
    }

    /// Backoff slots before a frame, uniform in `0..=cw_min`.
    pub fn draw_backoff_slots<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(0..=self.cw_min)
    }

    /// Payload time of a frame after `backoff_slots` of contention.
    pub fn payload_s(&self, scheme: Scheme, mode: Mode, backoff_slots: u32) -> Result<f64> {
        match mode {
            Mode::Ideal => Ok(self.frame_s),
            Mode::Practical => {
                let overhead_us = self.handshake_overhead_us(scheme) + f64::from(backoff_slots) * self.slot_us;
                let frame_us = self.frame_s * 1e6;
                if overhead_us >= frame_us {
                    return Err(Error::NegativePayload { overhead_us, frame_us });
                }
                // integer-microsecond arithmetic, converted once
                Ok((frame_us - overhead_us) * 1e-6)
            }
        }
    }

    /// Fraction of the frame left for payload at the mean backoff.
    pub fn mean_efficiency(&self, scheme: Scheme) -> f64 {
        1.0 - (self.handshake_overhead_us(scheme) + self.mean_backoff_us()) / (self.frame_s * 1e6)
    }
}

/// Payload time of one frame; practical mode draws the contention backoff
/// from `rng`.
pub fn payload_duration<R: Rng + ?Sized>(
    scheme: Scheme,
    timing: &TimingModel,
    mode: Mode,
    rng: &mut R,
) -> Result<f64> {
    let slots = match mode {
        Mode::Ideal => 0,
        Mode::Practical => timing.draw_backoff_slots(rng),
    };
    timing.payload_s(scheme, mode, slots)
}
