//! The XOR-augmented photonic SRAM bitcell.
//!
//! Netlist (ports in capitals):
//!
//! ```text
//! IN -> PS1 -> M1.in, M2.in
//! M1.thru -> P1 (pull-up Y)    M1.drop -> P2 (pull-down Y)
//! M2.thru -> P3 (pull-up YB)   M2.drop -> P4 (pull-down YB)
//! Y  -> D1 -> M2, M3           YB -> D2 -> M1, M4
//! WBL  -> PS2 -> P1, P4        WBLB -> PS3 -> P2, P3
//! X -> M3.in, M3.drop -> A1    XB -> M4.in, M4.drop -> A2
//! M3.thru, M4.thru -> C1 -> Z
//! ```
//!
//! Every operation continues from the cell's current state and simulated
//! time and returns an [`OpRecord`] holding the schedule it applied and the
//! traces it produced.

use serde::{Deserialize, Serialize};

use crate::engine::{
    run, NetlistBuilder, Netlist, NodeId, PortName, Pull, PulseEvent, RingDrive, Schedule, SignalId, Waveform,
};
use crate::error::{Diagnostic, Error, Result};
use crate::latch::{DriverParams, LatchState};
use crate::photonics::{resonance_wavelength, PdParams, RingParams, RingState};

/// Probes recorded by every bitcell operation.
pub const STANDARD_PROBES: [&str; 12] = ["Y", "YB", "Z", "WBL", "WBLB", "X", "XB", "IN", "P1", "P2", "P3", "P4"];

/// Nodes must sit within this fraction of VDD of their rails.
pub const RAIL_TOLERANCE: f64 = 0.05;

/// Minimum high/low Z contrast accepted by threshold calibration.
pub const MIN_CONTRAST: f64 = 10.0;

const RESONANCE_MATCH_NM: f64 = 1e-3;
const CALIBRATION_SETTLE_PS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReadPort {
    /// Active-high read through M4.
    #[default]
    Xb,
    /// Active-low read through M3.
    X,
}

/// Differential encoding of a logic input on the X/XB pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// 1 puts P_X on X.
    Xor,
    /// 1 puts P_X on XB.
    Xnor,
}

impl Polarity {
    /// `(x_lit, xb_lit)` for an input bit.
    pub fn encode(self, bit: bool) -> (bool, bool) {
        let x_lit = match self {
            Polarity::Xor => bit,
            Polarity::Xnor => !bit,
        };
        (x_lit, !x_lit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BitcellConfig {
    pub vdd_v: f64,
    pub c_node_ff: f64,
    pub lambda_in_nm: f64,
    pub bias_power_uw: f64,
    pub write_power_uw: f64,
    pub write_width_ps: f64,
    /// Read/compute power P_X.
    pub read_power_uw: f64,
    pub read_width_ps: f64,
    /// Spacing of back-to-back operations.
    pub op_period_ps: f64,
    pub write_deadline_ps: f64,
    /// M1, M2.
    pub latch_rings: [RingParams; 2],
    /// M3, M4.
    pub compute_rings: [RingParams; 2],
    /// P1..P4.
    pub pd: [PdParams; 4],
    /// D1 (Y), D2 (YB).
    pub drivers: [DriverParams; 2],
    pub il_split_db: f64,
    pub il_mmi_db: f64,
    /// Heater power on VTH1/VTH2.
    pub latch_heater_mw: [f64; 2],
    /// Fabrication offset of the M1/M2 resonances.
    pub latch_mismatch_nm: [f64; 2],
    pub read_port: ReadPort,
    /// Half-width of the indeterminate band as a fraction of the threshold.
    pub guard_band: f64,
    pub dt_ps: f64,
}

impl Default for BitcellConfig {
    fn default() -> Self {
        Self {
            vdd_v: 1.0,
            c_node_ff: 1.0,
            lambda_in_nm: 1310.52,
            bias_power_uw: 10.0,
            write_power_uw: 1000.0,
            write_width_ps: 50.0,
            read_power_uw: 100.0,
            read_width_ps: 100.0,
            op_period_ps: 100.0,
            write_deadline_ps: 500.0,
            latch_rings: [RingParams::default(); 2],
            compute_rings: [RingParams::default(); 2],
            pd: [PdParams::default(); 4],
            drivers: [DriverParams::default(); 2],
            il_split_db: 0.0,
            il_mmi_db: 0.5,
            latch_heater_mw: [0.0; 2],
            latch_mismatch_nm: [0.0; 2],
            read_port: ReadPort::Xb,
            guard_band: 0.2,
            dt_ps: 1.0,
        }
    }
}

impl BitcellConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, ring) in [
            ("M1", &self.latch_rings[0]),
            ("M2", &self.latch_rings[1]),
            ("M3", &self.compute_rings[0]),
            ("M4", &self.compute_rings[1]),
        ] {
            if let Err(e) = ring.validate() {
                bad.push(format!("{name}: {e}"));
                continue;
            }
            let res = resonance_wavelength(&RingState::new(*ring, self.vdd_v, 0.0)).nm();
            if (res - self.lambda_in_nm).abs() > RESONANCE_MATCH_NM {
                bad.push(format!(
                    "{name} resonates at {res:.4} nm with VDD applied, not at lambda_in {:.4} nm",
                    self.lambda_in_nm
                ));
            }
        }
        for (i, pd) in self.pd.iter().enumerate() {
            if let Err(e) = pd.validate() {
                bad.push(format!("P{}: {e}", i + 1));
            }
        }
        for (i, d) in self.drivers.iter().enumerate() {
            if let Err(e) = d.validate() {
                bad.push(format!("D{}: {e}", i + 1));
            }
        }
        if !(self.vdd_v > 0.0) {
            bad.push("vdd_v must be > 0".into());
        }
        if !(self.c_node_ff > 0.0) {
            bad.push("c_node_ff must be > 0".into());
        }
        if !(self.lambda_in_nm > 0.0) {
            bad.push("lambda_in_nm must be > 0".into());
        }
        if !(self.bias_power_uw >= 0.0) || !(self.read_power_uw >= 0.0) {
            bad.push("optical powers must be >= 0".into());
        }
        if !(self.bias_power_uw < self.write_power_uw) {
            bad.push(format!(
                "bias power {} uW must be below write power {} uW",
                self.bias_power_uw, self.write_power_uw
            ));
        }
        if !(self.write_width_ps > 0.0) || !(self.read_width_ps > 0.0) {
            bad.push("pulse widths must be > 0".into());
        }
        if !(self.op_period_ps >= self.write_width_ps && self.op_period_ps >= self.read_width_ps) {
            bad.push("op_period_ps must cover the write and read pulse widths".into());
        }
        if !(self.write_deadline_ps >= self.op_period_ps) {
            bad.push("write_deadline_ps must be >= op_period_ps".into());
        }
        if !(self.dt_ps > 0.0) {
            bad.push("dt_ps must be > 0".into());
        }
        if !(self.guard_band > 0.0 && self.guard_band < 1.0) {
            bad.push("guard_band must be in (0, 1)".into());
        }
        if self.il_split_db < 0.0 || self.il_mmi_db < 0.0 {
            bad.push("splitter and MMI losses must be >= 0".into());
        }
        if self.latch_heater_mw.iter().any(|h| !(*h >= 0.0)) {
            bad.push("heater powers must be >= 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn bias_power_w(&self) -> f64 {
        self.bias_power_uw / 1e6
    }

    pub fn write_power_w(&self) -> f64 {
        self.write_power_uw / 1e6
    }

    pub fn read_power_w(&self) -> f64 {
        self.read_power_uw / 1e6
    }
}

/// Handles to one latch inside a netlist.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LatchNodes {
    pub y: NodeId,
    pub yb: NodeId,
    pub d1: crate::engine::DriverId,
    pub d2: crate::engine::DriverId,
}

/// Adds the memory half of a cell (PS1..PS3, M1, M2, P1..P4, D1, D2). Port
/// and element names get `suffix` appended.
pub(crate) fn add_latch(b: &mut NetlistBuilder, cfg: &BitcellConfig, suffix: &str, bit: bool) -> LatchNodes {
    let vdd = cfg.vdd_v;
    let init = LatchState::for_bit(bit, vdd, cfg.c_node_ff);
    let y = b.node(&format!("Y{suffix}"), cfg.c_node_ff, vdd, init.v_y);
    let yb = b.node(&format!("YB{suffix}"), cfg.c_node_ff, vdd, init.v_yb);
    let d1 = b.driver(y, cfg.drivers[0]);
    let d2 = b.driver(yb, cfg.drivers[1]);

    let bias = b.source(format!("IN{suffix}"));
    b.probe_signal(format!("IN{suffix}"), bias);
    let (to_m1, to_m2) = b.splitter(&format!("PS1{suffix}"), bias, cfg.il_split_db);
    let (m1_thru, m1_drop) = b.ring(
        &format!("M1{suffix}"),
        to_m1,
        cfg.latch_rings[0],
        RingDrive::Driver(d2),
        cfg.latch_heater_mw[0],
        cfg.latch_mismatch_nm[0],
    );
    let (m2_thru, m2_drop) = b.ring(
        &format!("M2{suffix}"),
        to_m2,
        cfg.latch_rings[1],
        RingDrive::Driver(d1),
        cfg.latch_heater_mw[1],
        cfg.latch_mismatch_nm[1],
    );

    let wbl = b.source(format!("WBL{suffix}"));
    b.probe_signal(format!("WBL{suffix}"), wbl);
    let (wbl_p1, wbl_p4) = b.splitter(&format!("PS2{suffix}"), wbl, cfg.il_split_db);
    let wblb = b.source(format!("WBLB{suffix}"));
    b.probe_signal(format!("WBLB{suffix}"), wblb);
    let (wblb_p2, wblb_p3) = b.splitter(&format!("PS3{suffix}"), wblb, cfg.il_split_db);

    b.photodiode(&format!("P1{suffix}"), vec![m1_thru, wbl_p1], y, Pull::Up, cfg.pd[0]);
    b.photodiode(&format!("P2{suffix}"), vec![m1_drop, wblb_p2], y, Pull::Down, cfg.pd[1]);
    b.photodiode(&format!("P3{suffix}"), vec![m2_thru, wblb_p3], yb, Pull::Up, cfg.pd[2]);
    b.photodiode(&format!("P4{suffix}"), vec![m2_drop, wbl_p4], yb, Pull::Down, cfg.pd[3]);

    LatchNodes { y, yb, d1, d2 }
}

/// Adds a compute ring fed by `input`, absorbing its drop port.
pub(crate) fn add_compute_ring(
    b: &mut NetlistBuilder,
    name: &str,
    input: SignalId,
    params: RingParams,
    driver: crate::engine::DriverId,
) -> SignalId {
    let (thru, drop) = b.ring(name, input, params, RingDrive::Driver(driver), 0.0, 0.0);
    b.absorber(drop);
    thru
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Hold,
    Write,
    Read,
    Xor,
    Xnor,
    ArrayXor,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Hold => "hold",
            OpKind::Write => "write",
            OpKind::Read => "read",
            OpKind::Xor => "xor",
            OpKind::Xnor => "xnor",
            OpKind::ArrayXor => "array-xor",
        }
    }

    /// Compute ops evaluate a result at Z.
    pub fn is_compute(self) -> bool {
        matches!(self, OpKind::Read | OpKind::Xor | OpKind::Xnor | OpKind::ArrayXor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpOutcome {
    Held,
    Written { bit: bool, settle_ps: f64 },
    Decoded { bit: bool, p_z_w: f64 },
}

/// Everything one operation applied and observed.
#[derive(Debug, Clone)]
pub struct OpRecord {
    pub kind: OpKind,
    pub t_start_ps: f64,
    pub window_ps: f64,
    pub schedule: Schedule,
    pub waveforms: Vec<Waveform>,
    pub outcome: OpOutcome,
}

impl OpRecord {
    pub fn trace(&self, probe: &str) -> Option<&Waveform> {
        self.waveforms.iter().find(|w| w.probe == probe)
    }

    pub fn decoded(&self) -> Option<(bool, f64)> {
        match self.outcome {
            OpOutcome::Decoded { bit, p_z_w } => Some((bit, p_z_w)),
            _ => None,
        }
    }
}

/// Z power levels found by calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub threshold_w: f64,
    pub min_high_w: f64,
    pub max_low_w: f64,
}

impl Calibration {
    pub fn contrast(&self) -> f64 {
        self.min_high_w / self.max_low_w.max(f64::MIN_POSITIVE)
    }
}

/// A simulated bitcell with its latch state and decode threshold.
#[derive(Debug, Clone)]
pub struct Bitcell {
    config: BitcellConfig,
    net: Netlist,
    nodes: LatchNodes,
    calibration: Option<Calibration>,
}

impl Bitcell {
    /// Builds the netlist; the cell starts storing 0.
    pub fn new(config: BitcellConfig) -> Result<Self> {
        config.validate()?;
        let mut b = NetlistBuilder::new();
        b.channel(config.lambda_in_nm);
        let nodes = add_latch(&mut b, &config, "", false);

        let x = b.source(PortName::X.as_str());
        b.probe_signal("X", x);
        let xb = b.source(PortName::Xb.as_str());
        b.probe_signal("XB", xb);
        let m3_thru = add_compute_ring(&mut b, "M3", x, config.compute_rings[0], nodes.d1);
        let m4_thru = add_compute_ring(&mut b, "M4", xb, config.compute_rings[1], nodes.d2);
        let z = b.combiner("C1", vec![m3_thru, m4_thru], config.il_mmi_db);
        b.probe_signal("Z", z);
        b.output(PortName::Z.as_str(), z);

        let net = b.finish()?;
        Ok(Self {
            config,
            net,
            nodes,
            calibration: None,
        })
    }

    pub fn config(&self) -> &BitcellConfig {
        &self.config
    }

    pub fn netlist(&self) -> &Netlist {
        &self.net
    }

    pub fn netlist_mut(&mut self) -> &mut Netlist {
        &mut self.net
    }

    pub fn time_ps(&self) -> f64 {
        self.net.time_ps()
    }

    pub fn voltages(&self) -> (f64, f64) {
        (self.net.node_voltage(self.nodes.y), self.net.node_voltage(self.nodes.yb))
    }

    pub fn latch_state(&self) -> LatchState {
        let (v_y, v_yb) = self.voltages();
        LatchState { v_y, v_yb, c_node_ff: self.config.c_node_ff }
    }

    pub fn set_voltages(&mut self, y: f64, yb: f64) {
        self.net.set_node_voltage(self.nodes.y, y);
        self.net.set_node_voltage(self.nodes.yb, yb);
    }

    /// Forces the storage nodes onto the rails for `bit`.
    pub fn set_bit(&mut self, bit: bool) {
        let s = LatchState::for_bit(bit, self.config.vdd_v, self.config.c_node_ff);
        self.set_voltages(s.v_y, s.v_yb);
    }

    /// Stored bit if both nodes are within 5% of the rails.
    pub fn stored_bit(&self) -> Option<bool> {
        self.latch_state().settled_bit(self.config.vdd_v, RAIL_TOLERANCE)
    }

    pub fn calibration(&self) -> Option<Calibration> {
        self.calibration
    }

    pub fn set_calibration(&mut self, cal: Calibration) {
        self.calibration = Some(cal);
    }

    fn bias_event(&self, t0: f64, window: f64) -> Option<PulseEvent> {
        (self.config.bias_power_uw > 0.0).then(|| {
            PulseEvent::new(PortName::In, t0, window, self.config.bias_power_w(), self.config.lambda_in_nm)
        })
    }

    /// Runs `window_ps` from the current time with the bias laser on and the
    /// given extra pulses (times relative to the window start).
    fn run_window(&mut self, window_ps: f64, pulses: &[(PortName, f64, f64, f64)]) -> Result<(Schedule, Vec<Waveform>)> {
        let t0 = self.net.time_ps();
        let mut sched = Schedule::new(t0, t0 + window_ps, self.config.dt_ps);
        if let Some(bias) = self.bias_event(t0, window_ps) {
            sched.push(bias);
        }
        for &(port, start, width, power) in pulses {
            sched.push(PulseEvent::new(port, t0 + start, width, power, self.config.lambda_in_nm));
        }
        let waves = run(&mut self.net, &sched, &STANDARD_PROBES)?;
        Ok((sched, waves))
    }

    /// Lets the latch evolve under bias only, without recording an op.
    pub fn advance_bias_only(&mut self, duration_ps: f64) -> Result<()> {
        let t0 = self.net.time_ps();
        let mut sched = Schedule::new(t0, t0 + duration_ps, self.config.dt_ps);
        if let Some(bias) = self.bias_event(t0, duration_ps) {
            sched.push(bias);
        }
        run(&mut self.net, &sched, &[])?;
        Ok(())
    }

    /// Retains the stored state for `duration_ps` with only the bias laser on.
    ///
    /// Fails if the nodes end outside 5% of the starting rails, or if the
    /// illumination at the end of the hold pulls either node toward a point
    /// outside that band (the state is not a fixed point and will decay).
    pub fn hold(&mut self, duration_ps: f64) -> Result<OpRecord> {
        let start = self.stored_bit();
        let t0 = self.time_ps();
        let (schedule, waveforms) = self.run_window(duration_ps, &[])?;
        let vdd = self.config.vdd_v;
        let band = RAIL_TOLERANCE * vdd;
        if let Some(bit) = start {
            if self.stored_bit() != Some(bit) {
                let (y, yb) = self.voltages();
                return Err(Diagnostic::StabilityViolation {
                    reason: format!("stored {} drifted to Y={y:.4} V, YB={yb:.4} V", bit as u8),
                }
                .into());
            }
            let (ty, tyb) = (self.net.node_target(self.nodes.y), self.net.node_target(self.nodes.yb));
            let (want_y, want_yb) = if bit { (vdd, 0.0) } else { (0.0, vdd) };
            if (ty - want_y).abs() > band || (tyb - want_yb).abs() > band {
                return Err(Diagnostic::StabilityViolation {
                    reason: format!(
                        "stored {} is not self-sustaining: nodes relax toward Y={ty:.4} V, YB={tyb:.4} V",
                        bit as u8
                    ),
                }
                .into());
            }
        }
        Ok(OpRecord {
            kind: OpKind::Hold,
            t_start_ps: t0,
            window_ps: duration_ps,
            schedule,
            waveforms,
            outcome: OpOutcome::Held,
        })
    }

    /// Writes `bit` with the configured write pulse.
    pub fn write(&mut self, bit: bool) -> Result<OpRecord> {
        self.write_pulse(bit, self.config.write_power_w(), self.config.write_width_ps)
    }

    /// Writes `bit` with an explicit pulse on WBL (1) or WBLB (0).
    ///
    /// The write window is one op period; if the nodes are not yet within
    /// 5% of the new rails it is extended until the write deadline.
    pub fn write_pulse(&mut self, bit: bool, power_w: f64, width_ps: f64) -> Result<OpRecord> {
        let bias_w = self.config.bias_power_w();
        if !(power_w > bias_w) {
            return Err(Diagnostic::WriteUnderpowered { write_w: power_w, bias_w }.into());
        }
        let port = if bit { PortName::Wbl } else { PortName::Wblb };
        let t0 = self.time_ps();
        let window = self.config.op_period_ps.max(width_ps);
        let (mut schedule, mut waveforms) = self.run_window(window, &[(port, 0.0, width_ps, power_w)])?;
        let mut elapsed = window;
        let chunk = 10.0;
        while self.stored_bit() != Some(bit) && elapsed + chunk <= self.config.write_deadline_ps + 1e-9 {
            let (s, w) = self.run_window(chunk, &[])?;
            schedule.events.extend(s.events);
            schedule.t_end_ps = s.t_end_ps;
            for (acc, more) in waveforms.iter_mut().zip(&w) {
                acc.extend(more)?;
            }
            elapsed += chunk;
        }
        merge_bias_events(&mut schedule);
        if self.stored_bit() != Some(bit) {
            let (y, yb) = self.voltages();
            return Err(Diagnostic::WriteFailure {
                bit: bit as u8,
                deadline_ps: self.config.write_deadline_ps,
                y,
                yb,
            }
            .into());
        }
        let settle_ps = settle_time(&waveforms, bit, self.config.vdd_v) - t0;
        Ok(OpRecord {
            kind: OpKind::Write,
            t_start_ps: t0,
            window_ps: elapsed,
            schedule,
            waveforms,
            outcome: OpOutcome::Written { bit, settle_ps },
        })
    }

    /// Applies one compute pulse and returns the mean Z power over it.
    fn compute_raw(&mut self, x_w: f64, xb_w: f64, kind: OpKind) -> Result<OpRecord> {
        let width = self.config.read_width_ps;
        let window = self.config.op_period_ps.max(width);
        let mut pulses = Vec::new();
        if x_w > 0.0 {
            pulses.push((PortName::X, 0.0, width, x_w));
        }
        if xb_w > 0.0 {
            pulses.push((PortName::Xb, 0.0, width, xb_w));
        }
        let t0 = self.time_ps();
        let (schedule, waveforms) = self.run_window(window, &pulses)?;
        let z = waveforms.iter().find(|w| w.probe == "Z").expect("Z is a standard probe");
        let p_z_w = z.mean_over(t0, t0 + width);
        Ok(OpRecord {
            kind,
            t_start_ps: t0,
            window_ps: window,
            schedule,
            waveforms,
            outcome: OpOutcome::Decoded { bit: false, p_z_w },
        })
    }

    fn decode(&mut self, p_z_w: f64, input_power_w: f64) -> Result<bool> {
        let cal = match self.calibration {
            Some(c) => c,
            None => self.calibrate_threshold()?,
        };
        let th = cal.threshold_w;
        if !(input_power_w > 0.0) || (p_z_w - th).abs() <= self.config.guard_band * th {
            return Err(Diagnostic::IndeterminateRead { p_z_w, threshold_w: th }.into());
        }
        Ok(p_z_w > th)
    }

    fn finish_compute(&mut self, mut rec: OpRecord, input_power_w: f64, invert: bool) -> Result<OpRecord> {
        let p_z_w = match rec.outcome {
            OpOutcome::Decoded { p_z_w, .. } => p_z_w,
            _ => unreachable!("compute ops decode"),
        };
        let bit = self.decode(p_z_w, input_power_w)? ^ invert;
        rec.outcome = OpOutcome::Decoded { bit, p_z_w };
        Ok(rec)
    }

    /// Reads the stored bit with the configured read power.
    pub fn read(&mut self) -> Result<OpRecord> {
        self.read_with_power(self.config.read_power_w())
    }

    pub fn read_with_power(&mut self, power_w: f64) -> Result<OpRecord> {
        let (rec, invert) = match self.config.read_port {
            ReadPort::Xb => (self.compute_raw(0.0, power_w, OpKind::Read)?, false),
            ReadPort::X => (self.compute_raw(power_w, 0.0, OpKind::Read)?, true),
        };
        self.finish_compute(rec, power_w, invert)
    }

    /// Encoded compute with the given polarity.
    pub fn compute(&mut self, input: bool, polarity: Polarity) -> Result<OpRecord> {
        let p = self.config.read_power_w();
        let (x_lit, xb_lit) = polarity.encode(input);
        let kind = match polarity {
            Polarity::Xor => OpKind::Xor,
            Polarity::Xnor => OpKind::Xnor,
        };
        let rec = self.compute_raw(if x_lit { p } else { 0.0 }, if xb_lit { p } else { 0.0 }, kind)?;
        self.finish_compute(rec, p, false)
    }

    /// Z high iff stored and input differ.
    pub fn xor(&mut self, input: bool) -> Result<OpRecord> {
        self.compute(input, Polarity::Xor)
    }

    /// Z high iff stored and input agree.
    pub fn xnor(&mut self, input: bool) -> Result<OpRecord> {
        self.compute(input, Polarity::Xnor)
    }

    /// Measures Z for the four XOR corners on a copy of this cell and sets
    /// the decode threshold to the geometric mean of the weakest high and
    /// strongest low level.
    pub fn calibrate_threshold(&mut self) -> Result<Calibration> {
        let p = self.config.read_power_w();
        let mut highs = Vec::new();
        let mut lows = Vec::new();
        for stored in [false, true] {
            for input in [false, true] {
                let mut probe = self.clone();
                probe.set_bit(stored);
                probe.advance_bias_only(CALIBRATION_SETTLE_PS)?;
                let (x_lit, xb_lit) = Polarity::Xor.encode(input);
                let rec = probe.compute_raw(if x_lit { p } else { 0.0 }, if xb_lit { p } else { 0.0 }, OpKind::Xor)?;
                let (_, p_z) = rec.decoded().expect("compute record");
                if stored != input {
                    highs.push(p_z);
                } else {
                    lows.push(p_z);
                }
            }
        }
        let cal = calibration_from_levels(&highs, &lows)?;
        self.calibration = Some(cal);
        Ok(cal)
    }
}

pub(crate) fn calibration_from_levels(highs: &[f64], lows: &[f64]) -> Result<Calibration> {
    let min_high_w = highs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_low_w = lows.iter().copied().fold(0.0, f64::max);
    let cal = Calibration {
        threshold_w: (min_high_w * max_low_w.max(f64::MIN_POSITIVE)).sqrt(),
        min_high_w,
        max_low_w,
    };
    if !(cal.contrast() >= MIN_CONTRAST) {
        return Err(Diagnostic::CalibrationFailure { contrast: cal.contrast(), required: MIN_CONTRAST }.into());
    }
    Ok(cal)
}

/// Consecutive window extensions each carry their own bias pulse; fuse
/// adjacent ones so energy accounting sees one continuous source.
fn merge_bias_events(s: &mut Schedule) {
    let mut merged: Vec<PulseEvent> = Vec::with_capacity(s.events.len());
    for e in s.events.drain(..) {
        if let Some(prev) = merged
            .iter_mut()
            .rev()
            .find(|p| p.port == e.port && p.power_w == e.power_w && p.lambda_nm == e.lambda_nm)
        {
            if (prev.t_end_ps() - e.t_start_ps).abs() < 1e-9 {
                prev.width_ps += e.width_ps;
                continue;
            }
        }
        merged.push(e);
    }
    merged.sort_by(|a, b| a.t_start_ps.total_cmp(&b.t_start_ps));
    s.events = merged;
}

/// Earliest time after which Y and YB stay within the rail band for `bit`.
fn settle_time(waves: &[Waveform], bit: bool, vdd: f64) -> f64 {
    let y = waves.iter().find(|w| w.probe == "Y").expect("Y probe");
    let yb = waves.iter().find(|w| w.probe == "YB").expect("YB probe");
    let band = RAIL_TOLERANCE * vdd;
    let ok = |a: f64, b: f64| {
        if bit {
            a >= vdd - band && b <= band
        } else {
            a <= band && b >= vdd - band
        }
    };
    let n = y.values.len();
    let mut k = n;
    while k > 0 && ok(y.values[k - 1], yb.values[k - 1]) {
        k -= 1;
    }
    y.time_at(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell_storing(bit: bool) -> Bitcell {
        let mut c = Bitcell::new(BitcellConfig::default()).unwrap();
        c.set_bit(bit);
        c.advance_bias_only(500.0).unwrap();
        c
    }

    #[test]
    fn default_netlist_is_fully_wired() {
        let c = Bitcell::new(BitcellConfig::default()).unwrap();
        let mut ports: Vec<_> = c.netlist().ports().collect();
        ports.sort();
        assert_eq!(ports, vec!["IN", "WBL", "WBLB", "X", "XB"]);
        for p in STANDARD_PROBES {
            assert!(c.netlist().probe_names().iter().any(|n| n == p), "{p}");
        }
    }

    #[test]
    fn bias_at_or_above_write_power_is_rejected() {
        let cfg = BitcellConfig { bias_power_uw: 1000.0, ..Default::default() };
        match Bitcell::new(cfg) {
            Err(Error::Config(msgs)) => assert!(msgs.iter().any(|m| m.contains("write power"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detuned_compute_ring_is_rejected() {
        let mut cfg = BitcellConfig::default();
        cfg.compute_rings[0].lambda_geo_nm += 0.05;
        match Bitcell::new(cfg) {
            Err(Error::Config(msgs)) => assert!(msgs.iter().any(|m| m.starts_with("M3"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn polarity_encoding() {
        assert_eq!(Polarity::Xor.encode(true), (true, false));
        assert_eq!(Polarity::Xor.encode(false), (false, true));
        assert_eq!(Polarity::Xnor.encode(true), (false, true));
        assert_eq!(Polarity::Xnor.encode(false), (true, false));
    }

    #[test]
    fn hold_keeps_both_states() {
        for bit in [true, false] {
            let mut c = cell_storing(bit);
            c.hold(10_000.0).unwrap();
            assert_eq!(c.stored_bit(), Some(bit));
        }
    }

    #[test]
    fn hold_without_bias_is_flagged() {
        let cfg = BitcellConfig { bias_power_uw: 0.0, ..Default::default() };
        let mut c = Bitcell::new(cfg).unwrap();
        c.set_bit(true);
        match c.hold(10_000.0) {
            Err(Error::Diagnostic(Diagnostic::StabilityViolation { .. })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_flips_and_is_idempotent() {
        let mut c = cell_storing(false);
        let rec = c.write(true).unwrap();
        let (y, yb) = c.voltages();
        assert!(y >= 0.95 && yb <= 0.05, "{y} {yb}");
        match rec.outcome {
            OpOutcome::Written { settle_ps, .. } => assert!(settle_ps < 50.0, "{settle_ps}"),
            _ => panic!(),
        }
        let before = c.voltages();
        c.write(true).unwrap();
        let after = c.voltages();
        assert!((before.0 - after.0).abs() < 0.01 && (before.1 - after.1).abs() < 0.01);
    }

    #[test]
    fn write_at_bias_power_fails() {
        let mut c = cell_storing(false);
        let bias = c.config().bias_power_w();
        match c.write_pulse(true, bias, 50.0) {
            Err(Error::Diagnostic(Diagnostic::WriteUnderpowered { .. })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn read_levels() {
        let mut c = cell_storing(true);
        let rec = c.read().unwrap();
        let (bit, p1) = rec.decoded().unwrap();
        assert!(bit);
        let mut c = cell_storing(false);
        let (bit, p0) = c.read().unwrap().decoded().unwrap();
        assert!(!bit);
        assert!(p0 < 3e-6, "{p0}");
        assert!(p1 / p0 >= 10.0);
    }

    #[test]
    fn zero_power_read_is_indeterminate() {
        let mut c = cell_storing(true);
        match c.read_with_power(0.0) {
            Err(Error::Diagnostic(Diagnostic::IndeterminateRead { .. })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn active_low_read_through_x() {
        let cfg = BitcellConfig { read_port: ReadPort::X, ..Default::default() };
        for bit in [false, true] {
            let mut c = Bitcell::new(cfg.clone()).unwrap();
            c.set_bit(bit);
            c.advance_bias_only(500.0).unwrap();
            assert_eq!(c.read().unwrap().decoded().unwrap().0, bit);
        }
    }

    #[test]
    fn bias_events_merge() {
        let mut s = Schedule::new(0.0, 120.0, 1.0);
        s.push(PulseEvent::new("IN", 0.0, 100.0, 1e-5, 1310.52));
        s.push(PulseEvent::new("WBL", 0.0, 50.0, 1e-3, 1310.52));
        s.push(PulseEvent::new("IN", 100.0, 10.0, 1e-5, 1310.52));
        s.push(PulseEvent::new("IN", 110.0, 10.0, 1e-5, 1310.52));
        merge_bias_events(&mut s);
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.events.iter().find(|e| e.port == "IN").unwrap().width_ps, 120.0);
    }
}
