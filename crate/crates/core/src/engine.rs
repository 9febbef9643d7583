//! Fixed-step transient executor.
//!
//! A [`Netlist`] holds optical elements wired by single-producer,
//! single-consumer signals, plus the electrical nodes and drivers that close
//! the latch loop. Optics are memoryless and are re-evaluated every step in
//! topological order; only node voltages and driver outputs carry state from
//! one step to the next.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latch::{driver_output, driver_step, euler_gain, node_step_unchecked, DriverParams};
use crate::photonics::{
    db_to_transmission, dl_shift, lorentzian_unchecked, PdParams, RingParams, WAVELENGTH_TOL_NM,
};

/// Names of the bitcell's ports. Array rows reuse these with a row suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PortName {
    In,
    Wbl,
    Wblb,
    X,
    Xb,
    Z,
    Y,
    Yb,
}

impl PortName {
    pub fn as_str(self) -> &'static str {
        match self {
            PortName::In => "IN",
            PortName::Wbl => "WBL",
            PortName::Wblb => "WBLB",
            PortName::X => "X",
            PortName::Xb => "XB",
            PortName::Z => "Z",
            PortName::Y => "Y",
            PortName::Yb => "YB",
        }
    }

    /// Y and YB are electrical probes only.
    pub fn is_optical(self) -> bool {
        !matches!(self, PortName::Y | PortName::Yb)
    }
}

impl fmt::Display for PortName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DriverId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pull {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RingDrive {
    Fixed(f64),
    Driver(DriverId),
}

#[derive(Debug, Clone)]
pub enum Element {
    Source {
        port: String,
        out: SignalId,
    },
    Splitter {
        input: SignalId,
        outs: [SignalId; 2],
        il_db: f64,
    },
    Ring {
        name: String,
        input: SignalId,
        thru: SignalId,
        drop: SignalId,
        params: RingParams,
        drive: RingDrive,
        heat_mw: f64,
        /// Fabrication mismatch added to the designed resonance.
        offset_nm: f64,
    },
    Combiner {
        inputs: Vec<SignalId>,
        out: SignalId,
        il_db: f64,
    },
    Photodiode {
        name: String,
        inputs: Vec<SignalId>,
        node: NodeId,
        pull: Pull,
        params: PdParams,
    },
    Absorber {
        input: SignalId,
    },
    Output {
        port: String,
        input: SignalId,
    },
}

impl Element {
    fn inputs(&self) -> Vec<SignalId> {
        match self {
            Element::Source { .. } => vec![],
            Element::Splitter { input, .. }
            | Element::Ring { input, .. }
            | Element::Absorber { input }
            | Element::Output { input, .. } => vec![*input],
            Element::Combiner { inputs, .. } | Element::Photodiode { inputs, .. } => inputs.clone(),
        }
    }

    fn outputs(&self) -> Vec<SignalId> {
        match self {
            Element::Source { out, .. } | Element::Combiner { out, .. } => vec![*out],
            Element::Splitter { outs, .. } => outs.to_vec(),
            Element::Ring { thru, drop, .. } => vec![*thru, *drop],
            Element::Photodiode { .. } | Element::Absorber { .. } | Element::Output { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "V")]
    Volts,
    #[serde(rename = "W")]
    Watts,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Volts => "V",
            Unit::Watts => "W",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ProbeKind {
    Node(NodeId),
    Signal(SignalId),
    Channel(SignalId, usize),
    PdIncident(usize),
}

#[derive(Debug, Clone)]
struct NodeDef {
    name: String,
    c_ff: f64,
    vdd: f64,
}

#[derive(Debug, Clone)]
struct DriverDef {
    node: NodeId,
    params: DriverParams,
}

/// Incrementally assembles a [`Netlist`]; [`NetlistBuilder::finish`] checks
/// connectivity and orders the optics.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    channels: Vec<f64>,
    signals: Vec<String>,
    elements: Vec<Element>,
    nodes: Vec<NodeDef>,
    node_v: Vec<f64>,
    drivers: Vec<DriverDef>,
    probes: Vec<(String, ProbeKind)>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a wavelength channel and returns its index.
    pub fn channel(&mut self, lambda_nm: f64) -> usize {
        if let Some(i) = self
            .channels
            .iter()
            .position(|l| (l - lambda_nm).abs() <= WAVELENGTH_TOL_NM)
        {
            return i;
        }
        self.channels.push(lambda_nm);
        self.channels.len() - 1
    }

    pub fn signal(&mut self, name: impl Into<String>) -> SignalId {
        self.signals.push(name.into());
        SignalId(self.signals.len() - 1)
    }

    pub fn add(&mut self, element: Element) {
        self.elements.push(element);
    }

    pub fn source(&mut self, port: impl Into<String>) -> SignalId {
        let port = port.into();
        let out = self.signal(port.clone());
        self.add(Element::Source { port, out });
        out
    }

    pub fn splitter(&mut self, name: &str, input: SignalId, il_db: f64) -> (SignalId, SignalId) {
        let a = self.signal(format!("{name}.a"));
        let b = self.signal(format!("{name}.b"));
        self.add(Element::Splitter { input, outs: [a, b], il_db });
        (a, b)
    }

    pub fn ring(
        &mut self,
        name: &str,
        input: SignalId,
        params: RingParams,
        drive: RingDrive,
        heat_mw: f64,
        offset_nm: f64,
    ) -> (SignalId, SignalId) {
        let thru = self.signal(format!("{name}.thru"));
        let drop = self.signal(format!("{name}.drop"));
        self.add(Element::Ring {
            name: name.to_string(),
            input,
            thru,
            drop,
            params,
            drive,
            heat_mw,
            offset_nm,
        });
        (thru, drop)
    }

    pub fn combiner(&mut self, name: &str, inputs: Vec<SignalId>, il_db: f64) -> SignalId {
        let out = self.signal(name.to_string());
        self.add(Element::Combiner { inputs, out, il_db });
        out
    }

    pub fn photodiode(&mut self, name: &str, inputs: Vec<SignalId>, node: NodeId, pull: Pull, params: PdParams) {
        let idx = self.elements.len();
        self.add(Element::Photodiode {
            name: name.to_string(),
            inputs,
            node,
            pull,
            params,
        });
        self.probes.push((name.to_string(), ProbeKind::PdIncident(idx)));
    }

    pub fn absorber(&mut self, input: SignalId) {
        self.add(Element::Absorber { input });
    }

    pub fn output(&mut self, port: impl Into<String>, input: SignalId) {
        self.add(Element::Output { port: port.into(), input });
    }

    pub fn node(&mut self, name: &str, c_ff: f64, vdd: f64, v0: f64) -> NodeId {
        self.nodes.push(NodeDef { name: name.to_string(), c_ff, vdd });
        self.node_v.push(v0.clamp(0.0, vdd));
        let id = NodeId(self.nodes.len() - 1);
        self.probes.push((name.to_string(), ProbeKind::Node(id)));
        id
    }

    pub fn driver(&mut self, node: NodeId, params: DriverParams) -> DriverId {
        self.drivers.push(DriverDef { node, params });
        DriverId(self.drivers.len() - 1)
    }

    pub fn probe_signal(&mut self, name: impl Into<String>, sig: SignalId) {
        self.probes.push((name.into(), ProbeKind::Signal(sig)));
    }

    pub fn probe_channel(&mut self, name: impl Into<String>, sig: SignalId, channel: usize) {
        self.probes.push((name.into(), ProbeKind::Channel(sig, channel)));
    }

    pub fn finish(self) -> Result<Netlist> {
        let n_sig = self.signals.len();
        let mut producer: Vec<Vec<usize>> = vec![Vec::new(); n_sig];
        let mut consumer: Vec<Vec<usize>> = vec![Vec::new(); n_sig];
        for (i, e) in self.elements.iter().enumerate() {
            for s in e.outputs() {
                producer[s.0].push(i);
            }
            for s in e.inputs() {
                consumer[s.0].push(i);
            }
        }
        let mut problems = Vec::new();
        for (s, name) in self.signals.iter().enumerate() {
            if producer[s].len() != 1 {
                problems.push(format!("signal `{name}` has {} producers", producer[s].len()));
            }
            if consumer[s].len() != 1 {
                problems.push(format!("signal `{name}` has {} consumers", consumer[s].len()));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }

        // Kahn's algorithm over element dependencies.
        let n_el = self.elements.len();
        let mut indeg = vec![0usize; n_el];
        for (i, e) in self.elements.iter().enumerate() {
            indeg[i] = e.inputs().len();
        }
        let mut ready: Vec<usize> = (0..n_el).filter(|&i| indeg[i] == 0).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(n_el);
        while let Some(i) = ready.pop() {
            order.push(i);
            for s in self.elements[i].outputs() {
                let c = consumer[s.0][0];
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != n_el {
            let stuck: Vec<String> = (0..n_el)
                .filter(|&i| indeg[i] > 0)
                .flat_map(|i| self.elements[i].inputs())
                .map(|s| self.signals[s.0].clone())
                .collect();
            return Err(Error::Topology(format!(
                "zero-delay optical loop through signals {}",
                stuck.join(", ")
            )));
        }

        let mut sources = HashMap::new();
        for (i, e) in self.elements.iter().enumerate() {
            if let Element::Source { port, .. } = e {
                if sources.insert(port.clone(), i).is_some() {
                    return Err(Error::config(format!("port `{port}` declared twice")));
                }
            }
        }
        let mut seen = HashMap::new();
        for (name, _) in &self.probes {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::config(format!("probe `{name}` declared twice")));
            }
        }

        let n_ch = self.channels.len().max(1);
        let driver_v = self
            .drivers
            .iter()
            .map(|d| driver_output(self.node_v[d.node.0], &d.params))
            .collect();
        let n_nodes = self.nodes.len();
        let mut net = Netlist {
            n_ch,
            channels: self.channels,
            signals: self.signals,
            elements: self.elements,
            order,
            nodes: self.nodes,
            node_v: self.node_v,
            drivers: self.drivers,
            driver_v,
            sources,
            probes: self.probes,
            buf: vec![0.0; n_sig * n_ch],
            pd_power: vec![0.0; n_el],
            g_up: vec![0.0; n_nodes],
            g_down: vec![0.0; n_nodes],
            src_power: HashMap::new(),
            time_ps: 0.0,
        };
        net.evaluate();
        Ok(net)
    }
}

/// A wired circuit with its electrical state.
#[derive(Debug, Clone)]
pub struct Netlist {
    n_ch: usize,
    channels: Vec<f64>,
    signals: Vec<String>,
    elements: Vec<Element>,
    order: Vec<usize>,
    nodes: Vec<NodeDef>,
    node_v: Vec<f64>,
    drivers: Vec<DriverDef>,
    driver_v: Vec<f64>,
    sources: HashMap<String, usize>,
    probes: Vec<(String, ProbeKind)>,
    buf: Vec<f64>,
    pd_power: Vec<f64>,
    g_up: Vec<f64>,
    g_down: Vec<f64>,
    /// Per-source channel powers for the current step, keyed by element index.
    src_power: HashMap<usize, Vec<f64>>,
    time_ps: f64,
}

impl Netlist {
    pub fn channels(&self) -> &[f64] {
        &self.channels
    }

    pub fn channel_index(&self, lambda_nm: f64) -> Option<usize> {
        self.channels
            .iter()
            .position(|l| (l - lambda_nm).abs() <= WAVELENGTH_TOL_NM)
    }

    pub fn signal_name(&self, id: SignalId) -> &str {
        &self.signals[id.0]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn ports(&self) -> impl Iterator<Item = &str> {
        self.sources.keys().map(String::as_str)
    }

    pub fn probe_names(&self) -> Vec<String> {
        self.probes.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Simulated time at which the next step starts.
    pub fn time_ps(&self) -> f64 {
        self.time_ps
    }

    pub fn set_time_ps(&mut self, t: f64) {
        self.time_ps = t;
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn node_voltage(&self, id: NodeId) -> f64 {
        self.node_v[id.0]
    }

    /// Forces a node voltage and snaps any driver fed by it to its settled
    /// output.
    pub fn set_node_voltage(&mut self, id: NodeId, v: f64) {
        let vdd = self.nodes[id.0].vdd;
        self.node_v[id.0] = v.clamp(0.0, vdd);
        for (d, def) in self.drivers.iter().enumerate() {
            if def.node == id {
                self.driver_v[d] = driver_output(self.node_v[id.0], &def.params);
            }
        }
        self.evaluate();
    }

    /// Voltage the node is relaxing toward under the current illumination.
    pub fn node_target(&self, id: NodeId) -> f64 {
        crate::latch::divider_fixed_point(
            self.node_v[id.0],
            self.g_up[id.0],
            self.g_down[id.0],
            self.nodes[id.0].vdd,
        )
    }

    fn find_probe(&self, name: &str) -> Result<ProbeKind> {
        self.probes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::UnknownProbe {
                name: name.to_string(),
                available: self.probe_names(),
            })
    }

    fn probe_value(&self, kind: ProbeKind) -> (f64, Unit) {
        match kind {
            ProbeKind::Node(id) => (self.node_v[id.0], Unit::Volts),
            ProbeKind::Signal(s) => {
                let base = s.0 * self.n_ch;
                (self.buf[base..base + self.n_ch].iter().sum(), Unit::Watts)
            }
            ProbeKind::Channel(s, ch) => (self.buf[s.0 * self.n_ch + ch], Unit::Watts),
            ProbeKind::PdIncident(el) => (self.pd_power[el], Unit::Watts),
        }
    }

    /// Per-channel powers currently on a signal.
    pub fn signal_spectrum(&self, sig: SignalId) -> &[f64] {
        let base = sig.0 * self.n_ch;
        &self.buf[base..base + self.n_ch]
    }

    fn set_sources(&mut self, active: &[(usize, usize, f64)]) {
        for v in self.src_power.values_mut() {
            v.iter_mut().for_each(|p| *p = 0.0);
        }
        for &(el, ch, p) in active {
            let n_ch = self.n_ch;
            self.src_power.entry(el).or_insert_with(|| vec![0.0; n_ch])[ch] += p;
        }
    }

    fn ring_resonance(&self, params: &RingParams, drive: RingDrive, heat_mw: f64, offset_nm: f64) -> f64 {
        let v = match drive {
            RingDrive::Fixed(v) => v,
            RingDrive::Driver(d) => self.driver_v[d.0],
        };
        params.lambda_geo_nm
            + params.s_eo_nm_per_v * v
            + params.s_th_nm_per_mw * heat_mw
            + dl_shift(params.dl_nm, params)
            + offset_nm
    }

    /// Propagates the current source powers through the optics and refreshes
    /// photodiode conductances.
    pub fn evaluate(&mut self) {
        let n = self.n_ch;
        self.g_up.iter_mut().for_each(|g| *g = 0.0);
        self.g_down.iter_mut().for_each(|g| *g = 0.0);
        for idx in 0..self.order.len() {
            let i = self.order[idx];
            match &self.elements[i] {
                Element::Source { out, .. } => {
                    let base = out.0 * n;
                    match self.src_power.get(&i) {
                        Some(p) => self.buf[base..base + n].copy_from_slice(p),
                        None => self.buf[base..base + n].iter_mut().for_each(|x| *x = 0.0),
                    }
                }
                Element::Splitter { input, outs, il_db } => {
                    let t = 0.5 * db_to_transmission(*il_db);
                    let (inp, a, b) = (input.0 * n, outs[0].0 * n, outs[1].0 * n);
                    for c in 0..n {
                        let p = self.buf[inp + c] * t;
                        self.buf[a + c] = p;
                        self.buf[b + c] = p;
                    }
                }
                Element::Ring { input, thru, drop, params, drive, heat_mw, offset_nm, .. } => {
                    let res = self.ring_resonance(params, *drive, *heat_mw, *offset_nm);
                    let t_thru = db_to_transmission(params.il_thru_db);
                    let t_drop = db_to_transmission(params.il_drop_db);
                    let (inp, th, dr) = (input.0 * n, thru.0 * n, drop.0 * n);
                    for c in 0..n {
                        let p = self.buf[inp + c];
                        if p == 0.0 {
                            self.buf[th + c] = 0.0;
                            self.buf[dr + c] = 0.0;
                            continue;
                        }
                        let l = lorentzian_unchecked(self.channels[c] - res, params.fwhm_nm);
                        self.buf[th + c] = p * (1.0 - l) * t_thru;
                        self.buf[dr + c] = p * l * t_drop;
                    }
                }
                Element::Combiner { inputs, out, il_db } => {
                    let t = db_to_transmission(*il_db);
                    let o = out.0 * n;
                    for c in 0..n {
                        let s: f64 = inputs.iter().map(|s| self.buf[s.0 * n + c]).sum();
                        self.buf[o + c] = s * t;
                    }
                }
                Element::Photodiode { inputs, node, pull, params, .. } => {
                    let p: f64 = inputs
                        .iter()
                        .map(|s| self.buf[s.0 * n..s.0 * n + n].iter().sum::<f64>())
                        .sum();
                    self.pd_power[i] = p;
                    let g = params.g_dark_s + params.gamma_s_per_w * p;
                    match pull {
                        Pull::Up => self.g_up[node.0] += g,
                        Pull::Down => self.g_down[node.0] += g,
                    }
                }
                Element::Absorber { .. } | Element::Output { .. } => {}
            }
        }
    }

    /// Advances node voltages and drivers by `dt_ps` using the conductances
    /// from the last [`Netlist::evaluate`]. Steps whose Euler gain exceeds 1
    /// are split into equal sub-steps so the update never overshoots.
    fn integrate(&mut self, dt_ps: f64) {
        for (i, node) in self.nodes.iter().enumerate() {
            let (gu, gd) = (self.g_up[i], self.g_down[i]);
            let k = euler_gain(gu + gd, dt_ps, node.c_ff);
            let subs = k.ceil().max(1.0) as usize;
            let h = dt_ps / subs as f64;
            let mut v = self.node_v[i];
            for _ in 0..subs {
                v = node_step_unchecked(v, gu, gd, h, node.vdd, node.c_ff);
            }
            self.node_v[i] = v;
        }
        for (d, def) in self.drivers.iter().enumerate() {
            self.driver_v[d] = driver_step(self.driver_v[d], self.node_v[def.node.0], &def.params, dt_ps);
        }
    }
}

/// Rectangular optical pulse on a source port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub port: String,
    pub t_start_ps: f64,
    pub width_ps: f64,
    pub power_w: f64,
    pub lambda_nm: f64,
}

impl PulseEvent {
    pub fn new(port: impl fmt::Display, t_start_ps: f64, width_ps: f64, power_w: f64, lambda_nm: f64) -> Self {
        Self {
            port: port.to_string(),
            t_start_ps,
            width_ps,
            power_w,
            lambda_nm,
        }
    }

    pub fn t_end_ps(&self) -> f64 {
        self.t_start_ps + self.width_ps
    }

    /// Length of the overlap of this pulse with `[a, b)`.
    pub fn overlap_ps(&self, a: f64, b: f64) -> f64 {
        (self.t_end_ps().min(b) - self.t_start_ps.max(a)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<PulseEvent>,
    pub t_begin_ps: f64,
    pub t_end_ps: f64,
    pub dt_ps: f64,
}

impl Schedule {
    pub fn new(t_begin_ps: f64, t_end_ps: f64, dt_ps: f64) -> Self {
        Self {
            events: Vec::new(),
            t_begin_ps,
            t_end_ps,
            dt_ps,
        }
    }

    /// Adds an event keeping `events` sorted by start time.
    pub fn push(&mut self, event: PulseEvent) {
        let pos = self
            .events
            .partition_point(|e| e.t_start_ps <= event.t_start_ps);
        self.events.insert(pos, event);
    }

    pub fn with(mut self, event: PulseEvent) -> Self {
        self.push(event);
        self
    }

    pub fn duration_ps(&self) -> f64 {
        self.t_end_ps - self.t_begin_ps
    }

    pub fn steps(&self) -> usize {
        (self.duration_ps() / self.dt_ps).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ps > 0.0) {
            return Err(Error::Schedule(format!("dt must be > 0, got {}", self.dt_ps)));
        }
        if self.t_end_ps < self.t_begin_ps {
            return Err(Error::Schedule("t_end precedes t_begin".into()));
        }
        for w in self.events.windows(2) {
            if w[1].t_start_ps < w[0].t_start_ps {
                return Err(Error::Schedule("events are not sorted by start time".into()));
            }
        }
        for e in &self.events {
            if !(e.width_ps > 0.0) {
                return Err(Error::Schedule(format!("pulse on {} has width {} ps", e.port, e.width_ps)));
            }
            if !(e.power_w >= 0.0) {
                return Err(Error::Schedule(format!("pulse on {} has negative power", e.port)));
            }
            if e.t_end_ps() > self.t_end_ps + 1e-9 {
                return Err(Error::Schedule(format!(
                    "pulse on {} ends at {} ps after schedule end {} ps",
                    e.port,
                    e.t_end_ps(),
                    self.t_end_ps
                )));
            }
        }
        Ok(())
    }
}

/// A probed trace on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub probe: String,
    pub unit: Unit,
    pub t0_ps: f64,
    pub dt_ps: f64,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn time_at(&self, k: usize) -> f64 {
        self.t0_ps + k as f64 * self.dt_ps
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| (self.time_at(k), v))
    }

    fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = ((a - self.t0_ps) / self.dt_ps).round().max(0.0) as usize;
        let hi = ((b - self.t0_ps) / self.dt_ps).round().max(0.0) as usize;
        lo.min(self.values.len())..hi.min(self.values.len())
    }

    /// Mean over samples with `a <= t < b`.
    pub fn mean_over(&self, a: f64, b: f64) -> f64 {
        let r = self.index_range(a, b);
        let n = r.len();
        if n == 0 {
            return 0.0;
        }
        self.values[r].iter().sum::<f64>() / n as f64
    }

    /// Rectangle-rule integral over `[a, b)` in value·ps.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        let r = self.index_range(a, b);
        self.values[r].iter().sum::<f64>() * self.dt_ps
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Appends a trace that starts where this one ends.
    pub fn extend(&mut self, next: &Waveform) -> Result<()> {
        let expected = self.time_at(self.values.len());
        if next.probe != self.probe
            || (next.dt_ps - self.dt_ps).abs() > 1e-12
            || (next.t0_ps - expected).abs() > 1e-6
        {
            return Err(Error::Schedule(format!(
                "cannot append `{}` trace at {} ps to one ending at {} ps",
                next.probe, next.t0_ps, expected
            )));
        }
        self.values.extend_from_slice(&next.values);
        Ok(())
    }
}

struct ActivePulse {
    element: usize,
    channel: usize,
    power: f64,
    k_start: usize,
    k_end: usize,
}

/// Runs `schedule` on `net`, returning one waveform per requested probe.
///
/// Sample `k` is taken at `t_begin + k dt` before that step's integration,
/// so consecutive schedules tile time without duplicate samples.
pub fn run(net: &mut Netlist, schedule: &Schedule, probes: &[&str]) -> Result<Vec<Waveform>> {
    schedule.validate()?;
    let kinds = probes
        .iter()
        .map(|p| net.find_probe(p))
        .collect::<Result<Vec<_>>>()?;

    let dt = schedule.dt_ps;
    let mut pulses = Vec::with_capacity(schedule.events.len());
    for e in &schedule.events {
        let element = *net.sources.get(&e.port).ok_or_else(|| {
            let mut ports: Vec<_> = net.ports().map(str::to_string).collect();
            ports.sort();
            Error::Schedule(format!("no source port `{}` (ports: {})", e.port, ports.join(", ")))
        })?;
        let channel = net.channel_index(e.lambda_nm).ok_or_else(|| {
            Error::Schedule(format!(
                "pulse on {} at {} nm matches no channel of the netlist",
                e.port, e.lambda_nm
            ))
        })?;
        let rel = (e.t_start_ps - schedule.t_begin_ps) / dt;
        let k_start = rel.round();
        let span = (e.width_ps / dt).round();
        if (rel - k_start).abs() > 1e-6 || (e.width_ps / dt - span).abs() > 1e-6 {
            log::warn!(
                "pulse on {} at {} ps (width {} ps) snapped to the {} ps grid",
                e.port,
                e.t_start_ps,
                e.width_ps,
                dt
            );
        }
        let k_start = k_start.max(0.0) as usize;
        pulses.push(ActivePulse {
            element,
            channel,
            power: e.power_w,
            k_start,
            k_end: k_start + span.max(1.0) as usize,
        });
    }

    let steps = schedule.steps();
    let mut out: Vec<Waveform> = probes
        .iter()
        .zip(&kinds)
        .map(|(name, &kind)| Waveform {
            probe: name.to_string(),
            unit: net.probe_value(kind).1,
            t0_ps: schedule.t_begin_ps,
            dt_ps: dt,
            values: Vec::with_capacity(steps),
        })
        .collect();

    let mut active = Vec::new();
    for k in 0..steps {
        active.clear();
        active.extend(
            pulses
                .iter()
                .filter(|p| p.k_start <= k && k < p.k_end)
                .map(|p| (p.element, p.channel, p.power)),
        );
        net.set_sources(&active);
        net.evaluate();
        for (w, &kind) in out.iter_mut().zip(&kinds) {
            w.values.push(net.probe_value(kind).0);
        }
        net.integrate(dt);
    }
    // Leave the last step's sources in place so `probe` and
    // `node_target` describe the instant just simulated.
    net.evaluate();
    net.time_ps = schedule.t_begin_ps + steps as f64 * dt;
    Ok(out)
}

/// Instantaneous probe value from the most recent evaluation.
pub fn probe(net: &Netlist, name: &str) -> Result<(f64, Unit)> {
    let kind = net.find_probe(name)?;
    Ok(net.probe_value(kind))
}
