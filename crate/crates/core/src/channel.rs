//! Two-link topologies, path loss, frequency-selective Rayleigh fading and
//! training-based channel estimates.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::dbm_to_mw;

pub const AREA_SIDE_M: f64 = 200.0;
pub const MIN_SEPARATION_M: f64 = 0.1;
pub const PATH_LOSS_EXPONENT: f64 = 3.0;
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
pub const WAVELENGTH_M: f64 = 0.125;

/// Length of each link in the fixed representative topologies.
pub const FIXED_LINK_LENGTH_M: f64 = 150.0;
/// Spacing between the two parallel links in the fixed topologies.
pub const FIXED_LINK_SPACING_M: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions of `T1, T2` (transmitters) and `R1, R2` (receivers).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Topology {
    pub tx: [Point; 2],
    pub rx: [Point; 2],
}

impl Topology {
    pub fn new(tx: [Point; 2], rx: [Point; 2]) -> Result<Self> {
        let t = Self { tx, rx };
        let nodes = t.nodes();
        for (i, a) in nodes.iter().enumerate() {
            if !(a.x.is_finite() && a.y.is_finite()) {
                return Err(Error::NonFinite("node coordinates"));
            }
            for b in &nodes[i + 1..] {
                if a.distance(b) < MIN_SEPARATION_M {
                    return Err(Error::InvalidParameter(format!(
                        "nodes {a:?} and {b:?} closer than {MIN_SEPARATION_M} m"
                    )));
                }
            }
        }
        Ok(t)
    }

    fn nodes(&self) -> [Point; 4] {
        [self.tx[0], self.tx[1], self.rx[0], self.rx[1]]
    }

    /// Two parallel links pointing the same way.
    pub fn parallel_same_direction() -> Self {
        let (len, gap) = (FIXED_LINK_LENGTH_M, FIXED_LINK_SPACING_M);
        Self {
            tx: [Point::new(0.0, 0.0), Point::new(0.0, gap)],
            rx: [Point::new(len, 0.0), Point::new(len, gap)],
        }
    }

    /// Two parallel links pointing opposite ways, so each receiver sits
    /// next to the other link's transmitter.
    pub fn parallel_opposite_direction() -> Self {
        let (len, gap) = (FIXED_LINK_LENGTH_M, FIXED_LINK_SPACING_M);
        Self {
            tx: [Point::new(0.0, 0.0), Point::new(len, gap)],
            rx: [Point::new(len, 0.0), Point::new(0.0, gap)],
        }
    }

    /// Distance from transmitter `tx` to receiver `rx` (both 0-based).
    pub fn distance(&self, rx: usize, tx: usize) -> f64 {
        self.rx[rx].distance(&self.tx[tx])
    }

    pub fn within_area(&self) -> bool {
        self.nodes()
            .iter()
            .all(|p| (0.0..=AREA_SIDE_M).contains(&p.x) && (0.0..=AREA_SIDE_M).contains(&p.y))
    }
}

/// Uniform node placement in the square deployment area.
pub fn random_topology<R: Rng + ?Sized>(rng: &mut R) -> Topology {
    loop {
        let mut p = || Point::new(rng.random::<f64>() * AREA_SIDE_M, rng.random::<f64>() * AREA_SIDE_M);
        let tx = [p(), p()];
        let rx = [p(), p()];
        if let Ok(t) = Topology::new(tx, rx) {
            return t;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLoss {
    /// Linear power gain.
    pub gain: f64,
    /// Set when the distance was below the reference distance and clamped.
    pub clamped: bool,
}

/// Simplified path loss: `(lambda / (4 pi d0))^2 (d0 / d)^3`.
pub fn path_loss_gain(dist_m: f64) -> PathLoss {
    let clamped = dist_m < REFERENCE_DISTANCE_M;
    let d = dist_m.max(REFERENCE_DISTANCE_M);
    let k = WAVELENGTH_M / (4.0 * PI * REFERENCE_DISTANCE_M);
    PathLoss {
        gain: k * k * (REFERENCE_DISTANCE_M / d).powf(PATH_LOSS_EXPONENT),
        clamped,
    }
}

/// Radio and fading parameters shared by every node.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    /// Time-domain taps of the tap-delay-line model.
    pub n_taps: usize,
    /// Power of the last tap relative to the first, in dB.
    pub last_tap_db: f64,
    /// Transmit power per node over the whole band, in dBm.
    pub tx_power_dbm: f64,
    /// Background noise power per subcarrier, in dBm.
    pub noise_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            n_antennas: 4,
            n_subcarriers: 64,
            n_taps: 8,
            last_tap_db: -20.0,
            tx_power_dbm: 25.0,
            noise_dbm: -113.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.n_subcarriers == 0 || self.n_taps == 0 {
            return Err(Error::InvalidParameter("antenna, subcarrier and tap counts must be >= 1".into()));
        }
        if self.n_taps > self.n_subcarriers {
            return Err(Error::InvalidParameter("more taps than subcarriers".into()));
        }
        if !(self.last_tap_db <= 0.0 && self.tx_power_dbm.is_finite() && self.noise_dbm.is_finite()) {
            return Err(Error::InvalidParameter("invalid power settings".into()));
        }
        Ok(())
    }

    /// Transmit power carried by one subcarrier (total power split evenly).
    pub fn tx_power_per_subcarrier_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm) / self.n_subcarriers as f64
    }

    pub fn noise_power_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    /// Mean per-element `|H|^2` for a link of the given length.
    pub fn mean_element_power(&self, dist_m: f64) -> f64 {
        path_loss_gain(dist_m).gain * self.tx_power_per_subcarrier_mw()
    }
}

/// Exponential power-delay profile normalised to unit total power.
pub fn exponential_pdp(n_taps: usize, last_tap_db: f64) -> Vec<f64> {
    let step = if n_taps > 1 {
        last_tap_db / (n_taps - 1) as f64
    } else {
        0.0
    };
    let raw: Vec<f64> = (0..n_taps).map(|l| 10f64.powf(step * l as f64 / 10.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Ordered `(receiver, transmitter)` pairs in storage order.
pub const PAIRS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

fn pair_index(rx: usize, tx: usize) -> usize {
    assert!(rx < 2 && tx < 2, "two-link network");
    rx * 2 + tx
}

/// Per-subcarrier channel matrices between every receiver/transmitter pair
/// for one frame. Matrices include path loss and transmit power.
#[derive(Clone, Debug, PartialEq)]
pub struct FadingRealization {
    pub frame_id: u64,
    n_antennas: usize,
    n_subcarriers: usize,
    pairs: [Vec<ComplexMatrix<f64>>; 4],
}

impl FadingRealization {
    pub fn new(
        frame_id: u64,
        n_antennas: usize,
        n_subcarriers: usize,
        pairs: [Vec<ComplexMatrix<f64>>; 4],
    ) -> Result<Self> {
        for p in &pairs {
            if p.len() != n_subcarriers
                || p.iter().any(|h| h.rows() != n_antennas || h.cols() != n_antennas)
            {
                return Err(Error::DimensionMismatch(format!(
                    "pair channels must be {n_subcarriers} matrices of {n_antennas}x{n_antennas}"
                )));
            }
            if p.iter().any(|h| !h.is_finite()) {
                return Err(Error::NonFinite("fading realization"));
            }
        }
        Ok(Self {
            frame_id,
            n_antennas,
            n_subcarriers,
            pairs,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Channel from transmitter `tx` to receiver `rx`, one matrix per
    /// subcarrier.
    pub fn pair(&self, rx: usize, tx: usize) -> &[ComplexMatrix<f64>] {
        &self.pairs[pair_index(rx, tx)]
    }

    /// Same channels with the link labels exchanged.
    pub fn swap_links(&self) -> Self {
        Self {
            frame_id: self.frame_id,
            n_antennas: self.n_antennas,
            n_subcarriers: self.n_subcarriers,
            pairs: [
                self.pair(1, 1).to_vec(),
                self.pair(1, 0).to_vec(),
                self.pair(0, 1).to_vec(),
                self.pair(0, 0).to_vec(),
            ],
        }
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<f64> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re * s, im * s)
}

/// Draws one frame of channels for all four node pairs.
///
/// Each antenna element gets an independent tap-delay line with the
/// exponential profile; its DFT gives the per-subcarrier response, which is
/// scaled by the pair's path loss and per-subcarrier transmit power.
pub fn draw_fading<R: Rng + ?Sized>(
    topology: &Topology,
    frame_id: u64,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<FadingRealization> {
    params.validate()?;
    let na = params.n_antennas;
    let nc = params.n_subcarriers;
    let pdp = exponential_pdp(params.n_taps, params.last_tap_db);
    // twiddle[k][l] = exp(-j 2 pi k l / nc)
    let twiddle: Vec<Vec<Complex<f64>>> = (0..nc)
        .map(|k| {
            (0..pdp.len())
                .map(|l| Complex::from_polar(1.0, -2.0 * PI * (k * l) as f64 / nc as f64))
                .collect()
        })
        .collect();

    let mut pairs: [Vec<ComplexMatrix<f64>>; 4] = Default::default();
    for (slot, &(rx, tx)) in pairs.iter_mut().zip(PAIRS.iter()) {
        let scale = params.mean_element_power(topology.distance(rx, tx)).sqrt();
        let mut per_sc = vec![vec![Complex::new(0.0, 0.0); na * na]; nc];
        for e in 0..na * na {
            let taps: Vec<Complex<f64>> = pdp.iter().map(|&p| complex_gaussian(rng, p)).collect();
            for (k, block) in per_sc.iter_mut().enumerate() {
                let h: Complex<f64> = taps.iter().zip(&twiddle[k]).map(|(t, w)| t * w).sum();
                block[e] = h * scale;
            }
        }
        *slot = per_sc
            .into_iter()
            .map(|d| ComplexMatrix::from_column_major(na, na, d))
            .collect::<Result<_>>()?;
    }
    FadingRealization::new(frame_id, na, nc, pairs)
}

/// Training setup for channel estimation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimationConfig {
    /// Training symbols per transmit antenna.
    pub n_training: usize,
    /// Time-domain channel paths resolved by the estimator.
    pub l_max: usize,
    pub n_subcarriers: usize,
    pub noise_power_mw: f64,
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_training == 0 || self.l_max == 0 {
            return Err(Error::InvalidParameter("n_training and l_max must be >= 1".into()));
        }
        if self.l_max > self.n_subcarriers {
            return Err(Error::InvalidParameter("l_max exceeds subcarrier count".into()));
        }
        if !(self.noise_power_mw > 0.0) {
            return Err(Error::InvalidParameter("noise power must be positive".into()));
        }
        Ok(())
    }

    /// Per-element estimation error variance `l_max * noise / (n_c * n_t)`.
    pub fn error_variance(&self) -> f64 {
        self.l_max as f64 * self.noise_power_mw / (self.n_subcarriers * self.n_training) as f64
    }
}

/// Adds i.i.d. circular Gaussian estimation error to every element.
pub fn estimate_channel<R: Rng + ?Sized>(
    truth: &FadingRealization,
    cfg: &EstimationConfig,
    rng: &mut R,
) -> Result<FadingRealization> {
    cfg.validate()?;
    if cfg.n_subcarriers != truth.n_subcarriers {
        return Err(Error::DimensionMismatch(
            "estimation config subcarrier count differs from channel".into(),
        ));
    }
    perturb_channel(truth, cfg.error_variance(), rng)
}

/// `H + sqrt(variance) Z` with `Z` unit complex Gaussian per element.
/// A zero variance returns an exact copy.
pub fn perturb_channel<R: Rng + ?Sized>(
    truth: &FadingRealization,
    variance: f64,
    rng: &mut R,
) -> Result<FadingRealization> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter("error variance must be >= 0".into()));
    }
    if variance == 0.0 {
        return Ok(truth.clone());
    }
    let na = truth.n_antennas;
    let mut pairs: [Vec<ComplexMatrix<f64>>; 4] = Default::default();
    for (slot, &(rx, tx)) in pairs.iter_mut().zip(PAIRS.iter()) {
        *slot = truth
            .pair(rx, tx)
            .iter()
            .map(|h| {
                let noisy = h
                    .as_column_major()
                    .iter()
                    .map(|z| z + complex_gaussian(rng, variance))
                    .collect();
                ComplexMatrix::from_column_major(na, na, noisy)
            })
            .collect::<Result<_>>()?;
    }
    FadingRealization::new(truth.frame_id, na, truth.n_subcarriers, pairs)
}

const DUMP_HEADER: &str = "# channel-dump v1";

/// Text dump of a realization.
///
/// Layout: a header line, a `dims <n_antennas> <n_subcarriers>` line, then one
/// line per pair and subcarrier:
/// `<frame> <rx><tx> <subcarrier> re im re im ...` with entries row-major and
/// pairs named `11`, `12`, `21`, `22` (receiver then transmitter, 1-based).
pub fn write_channel_dump(realizations: &[&FadingRealization]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DUMP_HEADER}");
    if let Some(first) = realizations.first() {
        let _ = writeln!(out, "dims {} {}", first.n_antennas, first.n_subcarriers);
    }
    for r in realizations {
        for &(rx, tx) in &PAIRS {
            for (i, h) in r.pair(rx, tx).iter().enumerate() {
                let _ = write!(out, "{} {}{} {}", r.frame_id, rx + 1, tx + 1, i);
                for row in 0..h.rows() {
                    for col in 0..h.cols() {
                        let z = h[(row, col)];
                        let _ = write!(out, " {} {}", z.re, z.im);
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Parses the output of [`write_channel_dump`].
pub fn read_channel_dump(text: &str) -> Result<Vec<FadingRealization>> {
    let bad = |msg: &str| Error::Parse(format!("channel dump: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some(DUMP_HEADER) {
        return Err(bad("missing header"));
    }
    let Some(dims) = lines.next() else {
        return Ok(Vec::new());
    };
    let dims: Vec<usize> = dims
        .strip_prefix("dims ")
        .ok_or_else(|| bad("missing dims line"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad dims")))
        .collect::<Result<_>>()?;
    let [na, nc] = dims[..] else {
        return Err(bad("dims needs two values"));
    };

    let mut frames: Vec<(u64, [Vec<ComplexMatrix<f64>>; 4])> = Vec::new();
    for line in lines {
        let mut tok = line.split_whitespace();
        let frame: u64 = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("frame id"))?;
        let pair = tok.next().ok_or_else(|| bad("pair id"))?;
        let idx = match pair {
            "11" => 0,
            "12" => 1,
            "21" => 2,
            "22" => 3,
            _ => return Err(bad("unknown pair id")),
        };
        let sc: usize = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("subcarrier"))?;
        let nums: Vec<f64> = tok
            .map(|t| t.parse().map_err(|_| bad("number")))
            .collect::<Result<_>>()?;
        if nums.len() != 2 * na * na {
            return Err(bad("wrong number of entries"));
        }
        let entries: Vec<Complex<f64>> = nums.chunks(2).map(|c| Complex::new(c[0], c[1])).collect();
        let h = ComplexMatrix::from_row_major(na, na, &entries)?;
        if frames.last().map(|f| f.0) != Some(frame) {
            frames.push((frame, Default::default()));
        }
        let slot = &mut frames.last_mut().expect("pushed above").1[idx];
        if slot.len() != sc {
            return Err(bad("subcarriers out of order"));
        }
        slot.push(h);
    }
    frames
        .into_iter()
        .map(|(id, pairs)| FadingRealization::new(id, na, nc, pairs))
        .collect()
}
