//! Link adaptation: effective PPSNR, MCS selection, MDU aggregation and the
//! per-allocation rate table that every MAC planner consumes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::FadingRealization;
use crate::error::{Error, Result};
use crate::phy::{mmse_ppsnr, PpsnrGrid};
use crate::scalar::{to_db, Scalar};

/// Weight of the dB variance in the effective PPSNR.
pub const EFFECTIVE_SNR_ALPHA: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: u8,
    /// Coded bits per subcarrier per OFDM symbol (QAM bits times code rate).
    pub bits_per_symbol: f64,
    /// Minimum effective PPSNR for the target packet error rate.
    pub threshold_db: f64,
}

const DEFAULT_MCS: [(f64, f64); 8] = [
    (0.5, 1.4),  // BPSK 1/2
    (1.0, 4.4),  // QPSK 1/2
    (1.5, 6.5),  // QPSK 3/4
    (2.0, 8.6),  // 16QAM 1/2
    (3.0, 12.0), // 16QAM 3/4
    (4.0, 15.8), // 64QAM 2/3
    (4.5, 17.2), // 64QAM 3/4
    (5.0, 18.8), // 64QAM 5/6
];

/// Ordered list of usable modulation and coding schemes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    mcs: Vec<McsEntry>,
}

impl Default for McsTable {
    fn default() -> Self {
        Self {
            mcs: DEFAULT_MCS
                .iter()
                .enumerate()
                .map(|(i, &(bits_per_symbol, threshold_db))| McsEntry {
                    index: i as u8,
                    bits_per_symbol,
                    threshold_db,
                })
                .collect(),
        }
    }
}

impl McsTable {
    pub const LEN: usize = 8;

    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        let t = Self { mcs: entries };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mcs.len() != Self::LEN {
            return Err(Error::InvalidParameter(format!(
                "MCS table needs {} entries, got {}",
                Self::LEN,
                self.mcs.len()
            )));
        }
        for (i, e) in self.mcs.iter().enumerate() {
            if usize::from(e.index) != i {
                return Err(Error::InvalidParameter(format!("MCS entry {i} has index {}", e.index)));
            }
            if !(e.bits_per_symbol > 0.0 && e.bits_per_symbol.is_finite() && e.threshold_db.is_finite()) {
                return Err(Error::InvalidParameter(format!("MCS {i} has invalid values")));
            }
        }
        for w in self.mcs.windows(2) {
            if w[1].threshold_db <= w[0].threshold_db {
                return Err(Error::InvalidParameter("MCS thresholds must strictly increase".into()));
            }
            if w[1].bits_per_symbol < w[0].bits_per_symbol {
                return Err(Error::InvalidParameter("MCS rates must not decrease".into()));
            }
        }
        Ok(())
    }

    /// Parses the TOML schema:
    ///
    /// ```toml
    /// [[mcs]]
    /// index = 0
    /// bits_per_symbol = 0.5
    /// threshold_db = 1.4
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let t: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("MCS table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.mcs
    }

    pub fn get(&self, index: u8) -> Option<&McsEntry> {
        self.mcs.get(usize::from(index))
    }

    /// Highest MCS whose threshold does not exceed `eff_db` (inclusive).
    pub fn select(&self, eff_db: f64) -> Option<&McsEntry> {
        self.mcs.iter().rev().find(|e| e.threshold_db <= eff_db)
    }
}

/// Static SNR margin subtracted from estimated effective PPSNR.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BackoffConfig {
    backoff_db: f64,
}

impl BackoffConfig {
    pub const NONE: Self = Self { backoff_db: 0.0 };

    pub fn new(backoff_db: f64) -> Result<Self> {
        if !(backoff_db >= 0.0) || !backoff_db.is_finite() {
            return Err(Error::InvalidParameter(format!("SNR backoff {backoff_db} dB")));
        }
        Ok(Self { backoff_db })
    }

    pub fn db(&self) -> f64 {
        self.backoff_db
    }
}

/// Effective PPSNR (dB) of one stream: mean of the per-subcarrier dB values
/// minus alpha times their population variance, minus the backoff.
pub fn effective_ppsnr<T: Scalar>(grid: &PpsnrGrid<T>, stream: usize, backoff: BackoffConfig) -> T {
    let n = T::of_usize(grid.n_subcarriers());
    let db: Vec<T> = grid.stream(stream).map(to_db).collect();
    let mean = db.iter().fold(T::zero(), |a, &v| a + v) / n;
    let var = db.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
    mean - T::of(EFFECTIVE_SNR_ALPHA) * var - T::of(backoff.db())
}

/// OFDM numerology and MDU size.
#[derive(Clone, Debug, PartialEq)]
pub struct OfdmParams {
    pub n_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub guard_fraction: f64,
    pub mdu_bytes: usize,
}

impl Default for OfdmParams {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            bandwidth_hz: 20e6,
            guard_fraction: 0.25,
            mdu_bytes: 100,
        }
    }
}

impl OfdmParams {
    /// Symbol duration including the guard interval (4 us by default).
    pub fn symbol_duration_s(&self) -> f64 {
        self.n_subcarriers as f64 / self.bandwidth_hz * (1.0 + self.guard_fraction)
    }

    pub fn mdu_bits(&self) -> f64 {
        (8 * self.mdu_bytes) as f64
    }
}

/// Whole MDUs one stream carries in `payload_s` seconds at the given MCS.
/// Every subcarrier carries data; partial symbols and partial MDUs are
/// dropped.
pub fn mdus_per_stream(mcs: &McsEntry, payload_s: f64, ofdm: &OfdmParams) -> u32 {
    if !(payload_s > 0.0) {
        return 0;
    }
    // guard against 0.005 / 4e-6 landing a hair under 1250
    let symbols = (payload_s / ofdm.symbol_duration_s() * (1.0 + 1e-12)).floor();
    let bits = symbols * ofdm.n_subcarriers as f64 * mcs.bits_per_symbol;
    (bits / ofdm.mdu_bits()).floor() as u32
}

/// Outcome of link adaptation for one stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamChoice {
    pub eff_db: f64,
    pub mcs: Option<u8>,
    pub mdus: u32,
}

/// Both links' link adaptation under one stream allocation `(m1, m2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationEntry {
    pub m1: usize,
    pub m2: usize,
    /// Per-stream choices for link 1 (`m1` entries) and link 2 (`m2`).
    pub streams: [Vec<StreamChoice>; 2],
    /// Total MDUs per link.
    pub mdus: [u32; 2],
}

impl AllocationEntry {
    pub fn streams_of(&self, link: usize) -> usize {
        [self.m1, self.m2][link]
    }

    pub fn sum(&self) -> u32 {
        self.mdus[0] + self.mdus[1]
    }

    pub fn is_concurrent(&self) -> bool {
        self.m1 > 0 && self.m2 > 0
    }
}

/// Payload time available to a frame, by scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayloadDurations {
    pub single_s: f64,
    pub concurrent_s: f64,
}

impl PayloadDurations {
    pub fn uniform(d: f64) -> Self {
        Self {
            single_s: d,
            concurrent_s: d,
        }
    }

    pub fn for_allocation(&self, m1: usize, m2: usize) -> f64 {
        if m1 > 0 && m2 > 0 {
            self.concurrent_s
        } else {
            self.single_s
        }
    }
}

/// Transmission rate (MDUs) of both links for every feasible allocation
/// `m1 + m2 <= n_antennas`, including `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    n_antennas: usize,
    entries: Vec<AllocationEntry>,
}

fn allocation_slot(n_antennas: usize, m1: usize, m2: usize) -> usize {
    // rows of decreasing length: m1 = 0 has n+1 entries, m1 = 1 has n, ...
    let before: usize = (0..m1).map(|r| n_antennas + 1 - r).sum();
    before + m2
}

/// Every `(m1, m2)` with `m1 + m2 <= n_antennas`, in table order.
pub fn allocations(n_antennas: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=n_antennas).flat_map(move |m1| (0..=n_antennas - m1).map(move |m2| (m1, m2)))
}

impl RateTable {
    /// Assembles a table from entries; every allocation must appear exactly
    /// once, in [`allocations`] order.
    pub fn from_entries(n_antennas: usize, entries: Vec<AllocationEntry>) -> Result<Self> {
        let expected: Vec<_> = allocations(n_antennas).collect();
        if entries.len() != expected.len()
            || entries.iter().zip(&expected).any(|(e, &(a, b))| (e.m1, e.m2) != (a, b))
        {
            return Err(Error::DimensionMismatch("rate table allocations incomplete or out of order".into()));
        }
        for e in &entries {
            if (e.m1 == 0 && e.mdus[0] != 0) || (e.m2 == 0 && e.mdus[1] != 0) {
                return Err(Error::InvalidParameter(format!(
                    "silent link credited MDUs at ({}, {})",
                    e.m1, e.m2
                )));
            }
            if e.streams[0].len() != e.m1 || e.streams[1].len() != e.m2 {
                return Err(Error::DimensionMismatch("stream choices do not match allocation".into()));
            }
        }
        Ok(Self { n_antennas, entries })
    }

    /// Table from raw MDU counts, without per-stream detail: `counts(m1, m2)`
    /// gives `[N_L1, N_L2]`. Silent links are forced to zero.
    pub fn from_counts(n_antennas: usize, mut counts: impl FnMut(usize, usize) -> [u32; 2]) -> Self {
        let entries = allocations(n_antennas)
            .map(|(m1, m2)| {
                let c = counts(m1, m2);
                let mdus = [if m1 > 0 { c[0] } else { 0 }, if m2 > 0 { c[1] } else { 0 }];
                let split = |m: usize, total: u32| {
                    (0..m)
                        .map(|s| StreamChoice {
                            eff_db: 0.0,
                            mcs: None,
                            mdus: if s == 0 { total } else { 0 },
                        })
                        .collect()
                };
                AllocationEntry {
                    m1,
                    m2,
                    streams: [split(m1, mdus[0]), split(m2, mdus[1])],
                    mdus,
                }
            })
            .collect();
        Self { n_antennas, entries }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn entries(&self) -> &[AllocationEntry] {
        &self.entries
    }

    pub fn get(&self, m1: usize, m2: usize) -> &AllocationEntry {
        assert!(m1 + m2 <= self.n_antennas, "allocation ({m1}, {m2}) infeasible");
        &self.entries[allocation_slot(self.n_antennas, m1, m2)]
    }

    /// `N_L1(m1, m2)` for link 0 or `N_L2(m2, m1)` for link 1, addressed by
    /// the allocation `(m1, m2)`.
    pub fn mdus(&self, link: usize, m1: usize, m2: usize) -> u32 {
        self.get(m1, m2).mdus[link]
    }

    /// Allocation where only `link` transmits with `m` streams.
    pub fn solo(&self, link: usize, m: usize) -> &AllocationEntry {
        if link == 0 {
            self.get(m, 0)
        } else {
            self.get(0, m)
        }
    }

    /// The table with link roles exchanged.
    pub fn mirrored(&self) -> Self {
        let entries = allocations(self.n_antennas)
            .map(|(m1, m2)| {
                let e = self.get(m2, m1);
                AllocationEntry {
                    m1,
                    m2,
                    streams: [e.streams[1].clone(), e.streams[0].clone()],
                    mdus: [e.mdus[1], e.mdus[0]],
                }
            })
            .collect();
        Self {
            n_antennas: self.n_antennas,
            entries,
        }
    }
}

/// Best interference-free allocation of `link`: `(streams, mdus)`. Ties go
/// to the fewest streams.
pub fn single_link_best(table: &RateTable, link: usize) -> (usize, u32) {
    (1..=table.n_antennas())
        .map(|m| (m, table.solo(link, m).mdus[link]))
        .fold((1, 0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Single-link rate `N^SL` of `link`.
pub fn single_link_rate(table: &RateTable, link: usize) -> u32 {
    single_link_best(table, link).1
}

/// Everything needed to turn channels into rate tables.
#[derive(Clone, Debug)]
pub struct LinkAdapter {
    pub mcs: McsTable,
    pub ofdm: OfdmParams,
    pub noise_power_mw: f64,
}

impl LinkAdapter {
    fn stream_choices(&self, grid: &PpsnrGrid<f64>, payload_s: f64, backoff: BackoffConfig) -> Vec<StreamChoice> {
        (0..grid.n_streams())
            .map(|m| {
                let eff_db = effective_ppsnr(grid, m, backoff);
                let mcs = self.mcs.select(eff_db);
                StreamChoice {
                    eff_db,
                    mcs: mcs.map(|e| e.index),
                    mdus: mcs.map_or(0, |e| mdus_per_stream(e, payload_s, &self.ofdm)),
                }
            })
            .collect()
    }

    /// PPSNR grid of `link` when link 1 sends `m1` and link 2 sends `m2`
    /// streams. `None` if the link is silent.
    pub fn link_ppsnr(
        &self,
        channels: &FadingRealization,
        link: usize,
        m1: usize,
        m2: usize,
    ) -> Result<Option<PpsnrGrid<f64>>> {
        let (own, other) = if link == 0 { (m1, m2) } else { (m2, m1) };
        if own == 0 {
            return Ok(None);
        }
        let desired = channels.pair(link, link);
        let interferer = (other > 0).then(|| channels.pair(link, 1 - link));
        mmse_ppsnr(desired, interferer, own, other, self.noise_power_mw).map(Some)
    }

    /// Exhaustive rate table over all allocations.
    pub fn build_rate_table(
        &self,
        channels: &FadingRealization,
        payload: PayloadDurations,
        backoff: BackoffConfig,
    ) -> Result<RateTable> {
        if channels.n_subcarriers() != self.ofdm.n_subcarriers {
            return Err(Error::DimensionMismatch("channel and OFDM subcarrier counts differ".into()));
        }
        let na = channels.n_antennas();
        let entries = allocations(na)
            .map(|(m1, m2)| {
                let payload_s = payload.for_allocation(m1, m2);
                let mut streams: [Vec<StreamChoice>; 2] = Default::default();
                for (link, slot) in streams.iter_mut().enumerate() {
                    if let Some(grid) = self.link_ppsnr(channels, link, m1, m2)? {
                        *slot = self.stream_choices(&grid, payload_s, backoff);
                    }
                }
                let mdus = [
                    streams[0].iter().map(|s| s.mdus).sum(),
                    streams[1].iter().map(|s| s.mdus).sum(),
                ];
                Ok(AllocationEntry { m1, m2, streams, mdus })
            })
            .collect::<Result<Vec<_>>>()?;
        RateTable::from_entries(na, entries)
    }

    /// MDUs actually delivered when `chosen` (picked from possibly
    /// estimated channels) is sent over channels whose true link adaptation
    /// is `truth` for the same allocation. A stream delivers its MDUs only if
    /// its true effective PPSNR reaches the chosen MCS threshold.
    pub fn delivered(&self, chosen: &AllocationEntry, truth: &AllocationEntry) -> [u32; 2] {
        assert_eq!((chosen.m1, chosen.m2), (truth.m1, truth.m2), "allocation mismatch");
        let mut out = [0u32; 2];
        for link in 0..2 {
            out[link] = chosen.streams[link]
                .iter()
                .zip(&truth.streams[link])
                .filter(|(c, t)| {
                    c.mcs
                        .and_then(|i| self.mcs.get(i))
                        .is_some_and(|e| t.eff_db >= e.threshold_db)
                })
                .map(|(c, _)| c.mdus)
                .sum();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ofdm() -> OfdmParams {
        OfdmParams::default()
    }

    #[test]
    fn default_table_values() {
        let t = McsTable::default();
        t.validate().unwrap();
        let th: Vec<f64> = t.entries().iter().map(|e| e.threshold_db).collect();
        assert_eq!(th, vec![1.4, 4.4, 6.5, 8.6, 12.0, 15.8, 17.2, 18.8]);
        let r: Vec<f64> = t.entries().iter().map(|e| e.bits_per_symbol).collect();
        assert_eq!(r, vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 4.5, 5.0]);
    }

    #[test]
    fn select_mcs_examples() {
        let t = McsTable::default();
        assert_eq!(t.select(12.5).unwrap().index, 4);
        assert_eq!(t.select(1.4).unwrap().index, 0);
        assert!(t.select(0.0).is_none());
        assert_eq!(t.select(40.0).unwrap().index, 7);
    }

    #[test]
    fn effective_ppsnr_examples() {
        let flat = PpsnrGrid::flat(64, 1, 10.0_f64).unwrap();
        assert!((effective_ppsnr(&flat, 0, BackoffConfig::NONE) - 10.0).abs() < 1e-12);
        let b = BackoffConfig::new(1.5).unwrap();
        assert!((effective_ppsnr(&flat, 0, b) - 8.5).abs() < 1e-12);

        let vals: Vec<f64> = (0..64)
            .map(|i| if i % 2 == 0 { 10f64.powf(0.8) } else { 10f64.powf(1.2) })
            .collect();
        let g = PpsnrGrid::new(64, 1, vals).unwrap();
        assert!((effective_ppsnr(&g, 0, BackoffConfig::NONE) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn effective_ppsnr_single_precision() {
        let flat = PpsnrGrid::flat(64, 2, 100.0_f32).unwrap();
        assert!((effective_ppsnr(&flat, 1, BackoffConfig::NONE) - 20.0).abs() < 1e-4);
    }

    #[test]
    fn mdu_counting_examples() {
        let t = McsTable::default();
        let o = ofdm();
        assert!((o.symbol_duration_s() - 4e-6).abs() < 1e-18);
        assert_eq!(mdus_per_stream(t.get(0).unwrap(), 0.005, &o), 50);
        assert_eq!(mdus_per_stream(t.get(7).unwrap(), 0.005, &o), 500);
        assert_eq!(mdus_per_stream(t.get(7).unwrap(), 3.9e-6, &o), 0);
        assert_eq!(mdus_per_stream(t.get(7).unwrap(), 0.0, &o), 0);
    }

    #[test]
    fn backoff_validation() {
        assert!(BackoffConfig::new(-0.1).is_err());
        assert!(BackoffConfig::new(f64::NAN).is_err());
        assert_eq!(BackoffConfig::new(1.0).unwrap().db(), 1.0);
    }

    #[test]
    fn mcs_table_from_toml() {
        let mut text = String::new();
        for e in McsTable::default().entries() {
            text += &format!(
                "[[mcs]]\nindex = {}\nbits_per_symbol = {}\nthreshold_db = {}\n\n",
                e.index, e.bits_per_symbol, e.threshold_db
            );
        }
        assert_eq!(McsTable::from_toml_str(&text).unwrap(), McsTable::default());
        let broken = text.replacen("threshold_db = 4.4", "threshold_db = 1.0", 1);
        assert!(McsTable::from_toml_str(&broken).is_err());
        assert!(McsTable::from_toml_str("[[mcs]]\nindex = 0\nbits_per_symbol = 1\nthreshold_db = 1\n").is_err());
    }

    #[test]
    fn table_layout_and_single_link_rate() {
        assert_eq!(allocations(4).count(), 15);
        let counts = [50, 80, 90, 84];
        let t = RateTable::from_counts(4, |m1, m2| {
            if m2 == 0 && m1 > 0 {
                [counts[m1 - 1], 0]
            } else {
                [m1 as u32, m2 as u32]
            }
        });
        for (m1, m2) in allocations(4) {
            let e = t.get(m1, m2);
            assert_eq!((e.m1, e.m2), (m1, m2));
        }
        assert_eq!(single_link_rate(&t, 0), 90);
        assert_eq!(single_link_best(&t, 0), (3, 90));
        assert_eq!(single_link_rate(&t, 1), 4);
        let zero = RateTable::from_counts(4, |_, _| [0, 0]);
        assert_eq!(single_link_rate(&zero, 0), 0);
        assert_eq!(zero.get(0, 0).mdus, [0, 0]);
        assert_eq!(t.mirrored().mirrored(), t);
    }

    #[test]
    fn delivered_respects_true_threshold() {
        let a = LinkAdapter {
            mcs: McsTable::default(),
            ofdm: ofdm(),
            noise_power_mw: 1.0,
        };
        let choice = |eff_db: f64, mcs: Option<u8>, mdus: u32| StreamChoice { eff_db, mcs, mdus };
        let chosen = AllocationEntry {
            m1: 2,
            m2: 1,
            streams: [
                vec![choice(13.0, Some(4), 150), choice(9.0, Some(3), 100)],
                vec![choice(2.0, Some(0), 50)],
            ],
            mdus: [250, 50],
        };
        let truth = AllocationEntry {
            m1: 2,
            m2: 1,
            streams: [
                vec![choice(12.0, None, 0), choice(8.5, None, 0)],
                vec![choice(1.0, None, 0)],
            ],
            mdus: [0, 0],
        };
        assert_eq!(a.delivered(&chosen, &truth), [150, 0]);
    }
}
