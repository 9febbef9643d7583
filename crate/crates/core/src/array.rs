//! m x n array of bitcells with one WDM channel per row.
//!
//! Row `i` keeps its latch at the base wavelength and shifts its compute
//! rings by `dL = i * 34 nm`, which places them on channel `i` of an
//! eight-channel grid spanning one FSR. Each column has one X and one XB
//! bus waveguide carrying every channel past the compute rings of all rows
//! in turn; the two bus outputs meet in the column's MMI at `Z`. A row's
//! ring only interacts with its own channel, so `Z` at `λ_i` carries the XOR
//! of input bit `i` with the bit stored in row `i`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitcell::{
    add_compute_ring, add_latch, calibration_from_levels, BitcellConfig, Calibration, LatchNodes, OpKind,
    RAIL_TOLERANCE,
};
use crate::energy::{report_window, ElectricalModel, EnergyReport};
use crate::engine::{run, NetlistBuilder, Netlist, PulseEvent, Schedule, SignalId, Waveform};
use crate::error::{Diagnostic, Error, Result};
use crate::latch::LatchState;
use crate::photonics::{
    dl_shift, fsr, lorentzian_unchecked, resonance_wavelength, RingParams, RingState, CHANNELS_PER_FSR,
    DL_STEP_NM,
};

/// Popcount results further than this from an integer are ambiguous.
pub const POPCOUNT_ROUNDING_LIMIT: f64 = 0.4;

/// Off-diagonal crosstalk above this flags a plan.
pub const CROSSTALK_LIMIT: f64 = 0.05;

const CALIBRATION_SETTLE_PS: f64 = 500.0;

/// A word of bits, most significant (row 1, `λ_1`) first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(Vec<bool>);

impl Word {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    /// The low `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        Self((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn to_u64(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hamming_weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn xor(&self, other: &Word) -> Word {
        Word(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!("`{other}` is not a bit in word `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub row: usize,
    pub dl_nm: f64,
    pub lambda_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub channels: Vec<Channel>,
    pub fsr_nm: f64,
}

impl ChannelPlan {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.lambda_nm).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.channels.len();
        if n == 0 {
            return Err(Error::config("channel plan is empty"));
        }
        let min_spacing = self.fsr_nm / n as f64 * 0.9;
        for w in self.channels.windows(2) {
            let gap = w[1].lambda_nm - w[0].lambda_nm;
            if gap <= 0.0 {
                return Err(Error::config("channel wavelengths must strictly increase"));
            }
            if gap < min_spacing {
                return Err(Error::config(format!(
                    "channels {} and {} are {gap:.4} nm apart, below {min_spacing:.4} nm",
                    w[0].row, w[1].row
                )));
            }
        }
        let span = self.channels[n - 1].lambda_nm - self.channels[0].lambda_nm;
        if span > self.fsr_nm {
            return Err(Error::config(format!("plan spans {span:.4} nm, more than one FSR")));
        }
        Ok(())
    }
}

/// Places `m` channels `34 nm` of ring length apart, starting at the ring's
/// resonance under `v_drive`.
pub fn plan_channels(m: usize, ring: &RingParams, v_drive: f64) -> Result<ChannelPlan> {
    if m > CHANNELS_PER_FSR {
        return Err(Error::Capacity { requested: m, max: CHANNELS_PER_FSR });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("an array needs at least one row".into()));
    }
    let base = RingParams { dl_nm: 0.0, ..*ring };
    let lambda_1 = resonance_wavelength(&RingState::new(base, v_drive, 0.0)).nm();
    let channels = (0..m)
        .map(|row| {
            let dl_nm = row as f64 * DL_STEP_NM;
            Channel { row, dl_nm, lambda_nm: lambda_1 + dl_shift(dl_nm, &base) }
        })
        .collect();
    let plan = ChannelPlan { channels, fsr_nm: fsr(&base) };
    plan.validate()?;
    Ok(plan)
}

/// Fraction of channel `j` that row `i`'s compute ring can divert, taking
/// the worse of its two drive states; the diagonal is 1.
pub fn crosstalk_matrix(plan: &ChannelPlan, ring: &RingParams, vdd: f64) -> Vec<Vec<f64>> {
    let n = plan.len();
    let mut out = vec![vec![0.0; n]; n];
    for (i, ci) in plan.channels.iter().enumerate() {
        let p = RingParams { dl_nm: ci.dl_nm, ..*ring };
        let res: Vec<f64> = [0.0, vdd]
            .iter()
            .map(|&v| resonance_wavelength(&RingState::new(p, v, 0.0)).nm())
            .collect();
        for (j, cj) in plan.channels.iter().enumerate() {
            out[i][j] = if i == j {
                1.0
            } else {
                res.iter()
                    .map(|r| lorentzian_unchecked(cj.lambda_nm - r, p.fwhm_nm))
                    .fold(0.0, f64::max)
            };
        }
    }
    out
}

pub fn max_off_diagonal(matrix: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j {
                worst = worst.max(v);
            }
        }
    }
    worst
}

/// Per-channel optical power at one column's Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpectrum {
    pub lambda_nm: Vec<f64>,
    pub power_w: Vec<f64>,
}

impl ColumnSpectrum {
    pub fn total_w(&self) -> f64 {
        self.power_w.iter().sum()
    }
}

/// Decode levels for each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelThresholds {
    pub channels: Vec<Calibration>,
    /// Mean high level per channel, used as the popcount unit.
    pub high_w: Vec<f64>,
    pub guard_band: f64,
}

/// Compares each channel against its threshold.
pub fn decode_column_spectrum(spectrum: &ColumnSpectrum, th: &ChannelThresholds, column: usize) -> Result<Word> {
    if spectrum.power_w.len() != th.channels.len() {
        return Err(Error::InvalidParameter(format!(
            "spectrum has {} channels, thresholds {}",
            spectrum.power_w.len(),
            th.channels.len()
        )));
    }
    let mut bad = Vec::new();
    let bits = spectrum
        .power_w
        .iter()
        .zip(&th.channels)
        .enumerate()
        .map(|(i, (&p, cal))| {
            if (p - cal.threshold_w).abs() <= th.guard_band * cal.threshold_w {
                bad.push(i);
            }
            p > cal.threshold_w
        })
        .collect();
    if !bad.is_empty() {
        return Err(Diagnostic::IndeterminateChannels { column, channels: bad }.into());
    }
    Ok(Word(bits))
}

/// Sums a column's Z spectrum on one photodiode and converts the current to
/// a count of lit channels. Returns `(count, photocurrent_A)`.
pub fn popcount_accumulate(spectrum: &ColumnSpectrum, responsivity_a_per_w: f64, high_level_w: f64) -> Result<(usize, f64)> {
    if !(high_level_w > 0.0) || !(responsivity_a_per_w > 0.0) {
        return Err(Error::InvalidParameter("popcount needs a positive high level and responsivity".into()));
    }
    let current = responsivity_a_per_w * spectrum.total_w();
    let units = current / (responsivity_a_per_w * high_level_w);
    let count = units.round();
    if (units - count).abs() > POPCOUNT_ROUNDING_LIMIT {
        return Err(Diagnostic::PopcountAmbiguity { units }.into());
    }
    Ok((count as usize, current))
}

/// Resonance wavelength for each ring length offset in `[start, stop]`.
/// An inverted range yields no points; a non-positive step is an error.
pub fn sweep_dl(ring: &RingParams, v_drive: f64, start_nm: f64, stop_nm: f64, step_nm: f64) -> Result<Vec<(f64, f64)>> {
    if !(step_nm > 0.0) || !step_nm.is_finite() {
        return Err(Error::InvalidParameter(format!("sweep step must be positive, got {step_nm}")));
    }
    if !start_nm.is_finite() || !stop_nm.is_finite() {
        return Err(Error::InvalidParameter("sweep bounds must be finite".into()));
    }
    if stop_nm < start_nm {
        return Ok(Vec::new());
    }
    let n = ((stop_nm - start_nm) / step_nm + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|k| {
            let dl = start_nm + k as f64 * step_nm;
            let p = RingParams { dl_nm: dl, ..*ring };
            (dl, resonance_wavelength(&RingState::new(p, v_drive, 0.0)).nm())
        })
        .collect())
}

/// Least-squares slope of `y` against `x`; `None` with fewer than two
/// distinct `x`.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone)]
struct Column {
    net: Netlist,
    rows: Vec<LatchNodes>,
    z: SignalId,
}

/// Outcome of one single-shot XOR in one column.
#[derive(Debug, Clone)]
pub struct ColumnResult {
    pub column: usize,
    pub spectrum: ColumnSpectrum,
    pub bits: Word,
    pub schedule: Schedule,
    pub waveforms: Vec<Waveform>,
    pub t_start_ps: f64,
    pub window_ps: f64,
}

#[derive(Debug, Clone)]
pub struct XpsramArray {
    config: BitcellConfig,
    plan: ChannelPlan,
    columns: Vec<Column>,
    thresholds: Option<ChannelThresholds>,
}

impl XpsramArray {
    /// Builds `n` columns of `m` rows. Row `i` compute rings take the plan's
    /// `dL_i`; latches stay at the base wavelength.
    pub fn new(m: usize, n: usize, plan: ChannelPlan, config: BitcellConfig) -> Result<Self> {
        config.validate()?;
        plan.validate()?;
        if plan.len() != m {
            return Err(Error::config(format!("plan has {} channels for {m} rows", plan.len())));
        }
        if n == 0 {
            return Err(Error::config("array needs at least one column"));
        }
        let base = resonance_wavelength(&RingState::new(config.compute_rings[0], config.vdd_v, 0.0)).nm();
        if (plan.channels[0].lambda_nm - base).abs() > 1e-3 {
            return Err(Error::config(format!(
                "plan starts at {:.4} nm but row-1 compute rings resonate at {base:.4} nm",
                plan.channels[0].lambda_nm
            )));
        }
        let columns = (0..n)
            .map(|_| build_column(&config, &plan))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, plan, columns, thresholds: None })
    }

    pub fn rows(&self) -> usize {
        self.plan.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn plan(&self) -> &ChannelPlan {
        &self.plan
    }

    pub fn config(&self) -> &BitcellConfig {
        &self.config
    }

    pub fn column_netlist(&self, column: usize) -> &Netlist {
        &self.columns[column].net
    }

    /// Compute rings per column (two per row).
    pub fn compute_ring_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| {
                c.net
                    .elements()
                    .iter()
                    .filter(|e| matches!(e, crate::engine::Element::Ring { name, .. } if name.starts_with("M3") || name.starts_with("M4")))
                    .count()
            })
            .sum()
    }

    pub fn crosstalk_matrix(&self) -> Vec<Vec<f64>> {
        crosstalk_matrix(&self.plan, &self.config.compute_rings[0], self.config.vdd_v)
    }

    pub fn thresholds(&self) -> Option<&ChannelThresholds> {
        self.thresholds.as_ref()
    }

    fn check_word(&self, word: &Word) -> Result<()> {
        if word.len() != self.rows() {
            return Err(Error::InvalidParameter(format!(
                "word `{word}` has {} bits for {} rows",
                word.len(),
                self.rows()
            )));
        }
        Ok(())
    }

    /// Forces a column's latches onto the rails for `word`.
    pub fn set_word(&mut self, column: usize, word: &Word) -> Result<()> {
        self.check_word(word)?;
        let vdd = self.config.vdd_v;
        let col = &mut self.columns[column];
        for (row, &bit) in col.rows.iter().zip(word.bits()) {
            let s = LatchState::for_bit(bit, vdd, self.config.c_node_ff);
            col.net.set_node_voltage(row.y, s.v_y);
            col.net.set_node_voltage(row.yb, s.v_yb);
        }
        Ok(())
    }

    /// Bits currently held in a column; `None` for rows off the rails.
    pub fn stored(&self, column: usize) -> Vec<Option<bool>> {
        let col = &self.columns[column];
        col.rows
            .iter()
            .map(|r| {
                LatchState {
                    v_y: col.net.node_voltage(r.y),
                    v_yb: col.net.node_voltage(r.yb),
                    c_node_ff: self.config.c_node_ff,
                }
                .settled_bit(self.config.vdd_v, RAIL_TOLERANCE)
            })
            .collect()
    }

    /// `(Y, YB)` of every row in a column.
    pub fn node_voltages(&self, column: usize) -> Vec<(f64, f64)> {
        let col = &self.columns[column];
        col.rows
            .iter()
            .map(|r| (col.net.node_voltage(r.y), col.net.node_voltage(r.yb)))
            .collect()
    }

    /// Writes `words[j]` into column `j`, all rows at once.
    pub fn store(&mut self, words: &[Word]) -> Result<()> {
        if words.len() != self.cols() {
            return Err(Error::InvalidParameter(format!(
                "{} stored words for {} columns",
                words.len(),
                self.cols()
            )));
        }
        for w in words {
            self.check_word(w)?;
        }
        let cfg = &self.config;
        self.columns
            .par_iter_mut()
            .zip(words)
            .try_for_each(|(col, word)| write_column(col, cfg, word))
    }

    /// Lets every column evolve under bias only.
    pub fn advance_bias_only(&mut self, duration_ps: f64) -> Result<()> {
        let cfg = &self.config;
        self.columns.par_iter_mut().try_for_each(|col| {
            let sched = bias_schedule(cfg, col.rows.len(), col.net.time_ps(), duration_ps);
            run(&mut col.net, &sched, &[]).map(|_| ())
        })
    }

    /// Applies `input` on every column in one compute window and returns
    /// the raw Z spectra without decoding.
    pub fn compute_spectra(&mut self, input: &Word) -> Result<Vec<ColumnResult>> {
        self.check_word(input)?;
        let cfg = &self.config;
        let plan = &self.plan;
        self.columns
            .par_iter_mut()
            .enumerate()
            .map(|(j, col)| compute_column(col, j, cfg, plan, input))
            .collect()
    }

    /// Single-shot XOR of `input` against every column's stored word.
    pub fn single_shot_xor(&mut self, input: &Word) -> Result<Vec<ColumnResult>> {
        if self.thresholds.is_none() {
            self.calibrate()?;
        }
        let mut results = self.compute_spectra(input)?;
        let th = self.thresholds.as_ref().expect("calibrated");
        for r in &mut results {
            r.bits = decode_column_spectrum(&r.spectrum, th, r.column)?;
        }
        Ok(results)
    }

    /// Writes `stored` then runs [`XpsramArray::single_shot_xor`].
    pub fn store_and_xor(&mut self, stored: &[Word], input: &Word) -> Result<Vec<ColumnResult>> {
        self.store(stored)?;
        self.single_shot_xor(input)
    }

    /// Per-channel thresholds from stored/input pattern pairs run on a copy
    /// of column 0. Patterns include alternating words so each channel sees
    /// its neighbours in both ring states.
    pub fn calibrate(&mut self) -> Result<&ChannelThresholds> {
        let m = self.rows();
        let patterns = [
            Word::zeros(m),
            Word::ones(m),
            Word((0..m).map(|i| i % 2 == 0).collect()),
            Word((0..m).map(|i| i % 2 == 1).collect()),
        ];
        let mut highs = vec![Vec::new(); m];
        let mut lows = vec![Vec::new(); m];
        for stored in &patterns {
            for input in &patterns {
                let mut col = self.columns[0].clone();
                set_column(&mut col, &self.config, stored);
                let sched = bias_schedule(&self.config, m, col.net.time_ps(), CALIBRATION_SETTLE_PS);
                run(&mut col.net, &sched, &[])?;
                let r = compute_column(&mut col, 0, &self.config, &self.plan, input)?;
                for i in 0..m {
                    let p = r.spectrum.power_w[i];
                    if stored.bits()[i] != input.bits()[i] {
                        highs[i].push(p);
                    } else {
                        lows[i].push(p);
                    }
                }
            }
        }
        let channels = (0..m)
            .map(|i| calibration_from_levels(&highs[i], &lows[i]))
            .collect::<Result<Vec<_>>>()?;
        let high_w = highs
            .iter()
            .map(|h| h.iter().sum::<f64>() / h.len() as f64)
            .collect();
        self.thresholds = Some(ChannelThresholds {
            channels,
            high_w,
            guard_band: self.config.guard_band,
        });
        Ok(self.thresholds.as_ref().expect("just set"))
    }

    /// Popcount of a column result using the calibrated mean high level.
    pub fn popcount(&self, result: &ColumnResult) -> Result<(usize, f64)> {
        let th = self
            .thresholds
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("array is not calibrated".into()))?;
        let unit = th.high_w.iter().sum::<f64>() / th.high_w.len() as f64;
        popcount_accumulate(&result.spectrum, self.config.pd[0].responsivity_a_per_w, unit)
    }

    /// Energy of a column's compute window. Every row's bias laser counts.
    pub fn energy(&self, result: &ColumnResult) -> Result<EnergyReport> {
        let m = self.rows();
        let model = ElectricalModel {
            photodiodes: (1..=m)
                .flat_map(|r| (0..4).map(move |k| (format!("P{}{r}", k + 1), k)))
                .map(|(name, k)| (name, self.config.pd[k].responsivity_a_per_w))
                .collect(),
            driver_nodes: (1..=m).flat_map(|r| [format!("Y{r}"), format!("YB{r}")]).collect(),
            ..ElectricalModel::for_bitcell(&self.config)
        };
        let window = (result.t_start_ps, result.t_start_ps + result.window_ps);
        let mut rep = report_window(
            OpKind::ArrayXor,
            &result.schedule,
            &result.waveforms,
            window,
            &model,
            self.config.latch_heater_mw.iter().sum::<f64>() * m as f64,
        )?;
        // One evaluation per channel rather than one per op.
        let extra = (m.saturating_sub(1)) as f64 * model.switching_energy_fj();
        rep.electrical_fj += extra;
        rep.total_fj += extra;
        Ok(rep)
    }
}

fn build_column(cfg: &BitcellConfig, plan: &ChannelPlan) -> Result<Column> {
    let mut b = NetlistBuilder::new();
    b.channel(cfg.lambda_in_nm);
    let chans: Vec<usize> = plan.channels.iter().map(|c| b.channel(c.lambda_nm)).collect();
    let rows: Vec<LatchNodes> = (1..=plan.len())
        .map(|r| add_latch(&mut b, cfg, &r.to_string(), false))
        .collect();

    let mut x = b.source("X");
    b.probe_signal("X", x);
    let mut xb = b.source("XB");
    b.probe_signal("XB", xb);
    for (r, (row, ch)) in rows.iter().zip(&plan.channels).enumerate() {
        let m3 = RingParams { dl_nm: ch.dl_nm, ..cfg.compute_rings[0] };
        let m4 = RingParams { dl_nm: ch.dl_nm, ..cfg.compute_rings[1] };
        x = add_compute_ring(&mut b, &format!("M3_{}", r + 1), x, m3, row.d1);
        xb = add_compute_ring(&mut b, &format!("M4_{}", r + 1), xb, m4, row.d2);
    }
    let z = b.combiner("C1", vec![x, xb], cfg.il_mmi_db);
    b.probe_signal("Z", z);
    for (i, &ch) in chans.iter().enumerate() {
        b.probe_channel(format!("Z[{}]", i + 1), z, ch);
    }
    b.output("Z", z);
    Ok(Column { net: b.finish()?, rows, z })
}

fn bias_schedule(cfg: &BitcellConfig, rows: usize, t0: f64, window: f64) -> Schedule {
    let mut s = Schedule::new(t0, t0 + window, cfg.dt_ps);
    if cfg.bias_power_uw > 0.0 {
        for r in 1..=rows {
            s.push(PulseEvent::new(format!("IN{r}"), t0, window, cfg.bias_power_w(), cfg.lambda_in_nm));
        }
    }
    s
}

fn set_column(col: &mut Column, cfg: &BitcellConfig, word: &Word) {
    for (row, &bit) in col.rows.iter().zip(word.bits()) {
        let s = LatchState::for_bit(bit, cfg.vdd_v, cfg.c_node_ff);
        col.net.set_node_voltage(row.y, s.v_y);
        col.net.set_node_voltage(row.yb, s.v_yb);
    }
}

fn column_settled(col: &Column, cfg: &BitcellConfig, word: &Word) -> bool {
    col.rows.iter().zip(word.bits()).all(|(r, &bit)| {
        LatchState {
            v_y: col.net.node_voltage(r.y),
            v_yb: col.net.node_voltage(r.yb),
            c_node_ff: cfg.c_node_ff,
        }
        .settled_bit(cfg.vdd_v, RAIL_TOLERANCE)
            == Some(bit)
    })
}

fn write_column(col: &mut Column, cfg: &BitcellConfig, word: &Word) -> Result<()> {
    let m = col.rows.len();
    let t0 = col.net.time_ps();
    let window = cfg.op_period_ps.max(cfg.write_width_ps);
    let mut sched = bias_schedule(cfg, m, t0, window);
    for (r, &bit) in word.bits().iter().enumerate() {
        let port = if bit { format!("WBL{}", r + 1) } else { format!("WBLB{}", r + 1) };
        sched.push(PulseEvent::new(port, t0, cfg.write_width_ps, cfg.write_power_w(), cfg.lambda_in_nm));
    }
    run(&mut col.net, &sched, &[])?;
    let mut elapsed = window;
    while !column_settled(col, cfg, word) && elapsed + 10.0 <= cfg.write_deadline_ps + 1e-9 {
        let t = col.net.time_ps();
        run(&mut col.net, &bias_schedule(cfg, m, t, 10.0), &[])?;
        elapsed += 10.0;
    }
    if !column_settled(col, cfg, word) {
        let (r, bit) = col
            .rows
            .iter()
            .zip(word.bits())
            .find(|(r, &bit)| {
                LatchState {
                    v_y: col.net.node_voltage(r.y),
                    v_yb: col.net.node_voltage(r.yb),
                    c_node_ff: cfg.c_node_ff,
                }
                .settled_bit(cfg.vdd_v, RAIL_TOLERANCE)
                    != Some(bit)
            })
            .expect("some row unsettled");
        return Err(Diagnostic::WriteFailure {
            bit: *bit as u8,
            deadline_ps: cfg.write_deadline_ps,
            y: col.net.node_voltage(r.y),
            yb: col.net.node_voltage(r.yb),
        }
        .into());
    }
    Ok(())
}

fn compute_column(col: &mut Column, j: usize, cfg: &BitcellConfig, plan: &ChannelPlan, input: &Word) -> Result<ColumnResult> {
    let m = col.rows.len();
    let t0 = col.net.time_ps();
    let width = cfg.read_width_ps;
    let window = cfg.op_period_ps.max(width);
    let mut sched = bias_schedule(cfg, m, t0, window);
    for (ch, &bit) in plan.channels.iter().zip(input.bits()) {
        let port = if bit { "X" } else { "XB" };
        sched.push(PulseEvent::new(port, t0, width, cfg.read_power_w(), ch.lambda_nm));
    }
    let mut probes: Vec<String> = vec!["Z".into()];
    probes.extend((1..=m).map(|i| format!("Z[{i}]")));
    for r in 1..=m {
        probes.extend([format!("Y{r}"), format!("YB{r}")]);
        probes.extend((1..=4).map(|k| format!("P{k}{r}")));
    }
    let names: Vec<&str> = probes.iter().map(String::as_str).collect();
    let waveforms = run(&mut col.net, &sched, &names)?;
    let power_w = (1..=m)
        .map(|i| waveforms[i].mean_over(t0, t0 + width))
        .collect();
    debug_assert_eq!(col.net.signal_name(col.z), "C1");
    Ok(ColumnResult {
        column: j,
        spectrum: ColumnSpectrum { lambda_nm: plan.wavelengths(), power_w },
        bits: Word::zeros(m),
        schedule: sched,
        waveforms,
        t_start_ps: t0,
        window_ps: window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_plan(m: usize) -> ChannelPlan {
        plan_channels(m, &RingParams::default(), 1.0).unwrap()
    }

    #[test]
    fn word_parsing_and_bits() {
        let w: Word = "11001010".parse().unwrap();
        assert_eq!(w.to_string(), "11001010");
        assert_eq!(w.to_u64(), 0b11001010);
        assert_eq!(Word::from_u64(0b1001_0011, 8).to_string(), "10010011");
        assert_eq!(w.hamming_weight(), 4);
        assert!("10a1".parse::<Word>().is_err());
    }

    #[test]
    fn eight_channel_plan() {
        let plan = default_plan(8);
        let spacing = plan.fsr_nm / 8.0;
        assert!((spacing - 1.139).abs() < 1e-3);
        for w in plan.channels.windows(2) {
            assert_relative_eq!(w[1].lambda_nm - w[0].lambda_nm, spacing, epsilon = 1e-9);
            assert_relative_eq!(w[1].dl_nm - w[0].dl_nm, 34.0);
        }
        assert!(plan.validate().is_ok());
    }

    #[test]
    fn single_channel_plan_sits_at_base() {
        let plan = default_plan(1);
        assert_eq!(plan.len(), 1);
        assert_relative_eq!(plan.channels[0].lambda_nm, 1310.52, epsilon = 1e-9);
    }

    #[test]
    fn nine_channels_exceed_capacity() {
        assert!(matches!(
            plan_channels(9, &RingParams::default(), 1.0),
            Err(Error::Capacity { requested: 9, max: 8 })
        ));
    }

    #[test]
    fn array_structure() {
        let a = XpsramArray::new(8, 1, default_plan(8), BitcellConfig::default()).unwrap();
        assert_eq!(a.compute_ring_count(), 16);
        let a = XpsramArray::new(8, 4, default_plan(8), BitcellConfig::default()).unwrap();
        assert_eq!(a.cols(), 4);
        assert!(XpsramArray::new(4, 1, default_plan(8), BitcellConfig::default()).is_err());
    }

    #[test]
    fn input_encoding_follows_bits() {
        let plan = default_plan(8);
        let mut a = XpsramArray::new(8, 1, plan.clone(), BitcellConfig::default()).unwrap();
        let r = a.compute_spectra(&"11001010".parse().unwrap()).unwrap();
        let s = &r[0].schedule;
        let lit = |port: &str| -> Vec<usize> {
            s.events
                .iter()
                .filter(|e| e.port == port)
                .map(|e| plan.channels.iter().position(|c| (c.lambda_nm - e.lambda_nm).abs() < 1e-9).unwrap())
                .collect()
        };
        assert_eq!(lit("X"), vec![0, 1, 4, 6]);
        assert_eq!(lit("XB"), vec![2, 3, 5, 7]);
    }

    #[test]
    fn crosstalk_defaults_and_limits() {
        let ring = RingParams::default();
        let m = crosstalk_matrix(&default_plan(8), &ring, 1.0);
        for (i, row) in m.iter().enumerate() {
            assert_eq!(row[i], 1.0);
        }
        assert!(max_off_diagonal(&m) < CROSSTALK_LIMIT, "{}", max_off_diagonal(&m));

        let wide = RingParams { fwhm_nm: default_plan(8).fsr_nm / 8.0, ..ring };
        let m = crosstalk_matrix(&default_plan(8), &wide, 1.0);
        assert!(max_off_diagonal(&m) > 0.2);

        // Very narrow lines approach zero leakage at fixed spacing.
        let narrow = RingParams { fwhm_nm: 1e-4, ..ring };
        let m = crosstalk_matrix(&default_plan(8), &narrow, 1.0);
        assert!(max_off_diagonal(&m) < 1e-6);
    }

    #[test]
    fn sweep_slope_matches_grid() {
        let ring = RingParams::default();
        let pts = sweep_dl(&ring, 1.0, -272.0, 272.0, 34.0).unwrap();
        assert_eq!(pts.len(), 17);
        let slope = linear_slope(&pts).unwrap();
        assert_relative_eq!(slope, fsr(&ring) / 272.0, max_relative = 1e-9);
        assert!((slope - 0.0335).abs() < 1e-4);
        assert!(sweep_dl(&ring, 1.0, 10.0, 0.0, 1.0).unwrap().is_empty());
        assert!(sweep_dl(&ring, 1.0, 0.0, 10.0, -1.0).is_err());
        assert_eq!(sweep_dl(&ring, 1.0, 0.0, 0.0, 1.0).unwrap().len(), 1);
        assert_eq!(linear_slope(&pts[..1]), None);
    }

    #[test]
    fn popcount_examples() {
        let high = 70e-6;
        let mk = |bits: &str| ColumnSpectrum {
            lambda_nm: vec![0.0; 8],
            power_w: bits.chars().map(|c| if c == '1' { high } else { 1e-6 }).collect(),
        };
        assert_eq!(popcount_accumulate(&mk("01011001"), 1.0, high).unwrap().0, 4);
        assert_eq!(popcount_accumulate(&mk("00000000"), 1.0, high).unwrap().0, 0);
        assert_eq!(popcount_accumulate(&mk("11111111"), 1.0, high).unwrap().0, 8);
        let half = ColumnSpectrum { lambda_nm: vec![0.0], power_w: vec![high * 1.5] };
        assert!(matches!(
            popcount_accumulate(&half, 1.0, high),
            Err(Error::Diagnostic(Diagnostic::PopcountAmbiguity { .. }))
        ));
    }
}
