//! Scenario configs, built-in presets and the CSV/JSON emitters behind the CLI.
//!
//! A scenario is a TOML document. Physical keys carry their unit in the
//! name and unknown keys are rejected:
//!
//! ```toml
//! name = "demo"
//! probes = ["Y", "YB", "Z"]
//!
//! [device]
//! bias_power_uw = 10.0
//!
//! [engine]
//! dt_ps = 1.0
//!
//! [[script]]
//! op = "write"
//! bit = 1
//! t_start_ps = 100.0
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::{linear_slope, max_off_diagonal, plan_channels, sweep_dl, ColumnResult, Word, XpsramArray};
use crate::bitcell::{Bitcell, BitcellConfig, OpKind, OpOutcome, OpRecord, STANDARD_PROBES};
use crate::energy::{self, EnergyReport};
use crate::engine::Waveform;
use crate::error::{Diagnostic, Error, Result};

pub const PRESET_NAMES: [&str; 7] = ["fig3", "fig4", "fig5", "fig6", "table1", "identity", "random"];

const TIME_EPS_PS: f64 = 1e-6;

fn default_name() -> String {
    "scenario".into()
}

fn default_probes() -> Vec<String> {
    vec!["Y".into(), "YB".into(), "Z".into()]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_ps: Option<f64>,
    /// Hold with bias only until this time after the script.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end_ps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub rows: usize,
    #[serde(default = "one")]
    pub cols: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
}

/// File names inside the output directory; unset ones default to
/// `<name>_<kind>.<ext>`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waveforms_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_json: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_config: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScriptOp {
    Hold {
        duration_ps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_start_ps: Option<f64>,
    },
    Write {
        bit: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_start_ps: Option<f64>,
    },
    Read {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_start_ps: Option<f64>,
    },
    Xor {
        input: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_start_ps: Option<f64>,
    },
    Xnor {
        input: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_start_ps: Option<f64>,
    },
    /// Either explicit words or `random_pairs` seeded word pairs checked
    /// against integer XOR.
    ArrayXor {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stored: Option<Vec<Word>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input: Option<Word>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random_pairs: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_start_ps: Option<f64>,
    },
}

impl ScriptOp {
    pub fn kind(&self) -> OpKind {
        match self {
            ScriptOp::Hold { .. } => OpKind::Hold,
            ScriptOp::Write { .. } => OpKind::Write,
            ScriptOp::Read { .. } => OpKind::Read,
            ScriptOp::Xor { .. } => OpKind::Xor,
            ScriptOp::Xnor { .. } => OpKind::Xnor,
            ScriptOp::ArrayXor { .. } => OpKind::ArrayXor,
        }
    }

    pub fn t_start_ps(&self) -> Option<f64> {
        match self {
            ScriptOp::Hold { t_start_ps, .. }
            | ScriptOp::Write { t_start_ps, .. }
            | ScriptOp::Read { t_start_ps }
            | ScriptOp::Xor { t_start_ps, .. }
            | ScriptOp::Xnor { t_start_ps, .. }
            | ScriptOp::ArrayXor { t_start_ps, .. } => *t_start_ps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_probes")]
    pub probes: Vec<String>,
    #[serde(default)]
    pub device: BitcellConfig,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArraySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub script: Vec<ScriptOp>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: default_name(),
            seed: 0,
            probes: default_probes(),
            device: BitcellConfig::default(),
            engine: EngineSection::default(),
            array: None,
            sweep: None,
            output: OutputSection::default(),
            script: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.normalize();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Makes `engine.dt_ps` and `device.dt_ps` agree; the engine value wins.
    fn normalize(&mut self) {
        match self.engine.dt_ps {
            Some(dt) => self.device.dt_ps = dt,
            None => self.engine.dt_ps = Some(self.device.dt_ps),
        }
    }

    pub fn set_dt_ps(&mut self, dt: f64) {
        self.engine.dt_ps = Some(dt);
        self.normalize();
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        let mut bad = Vec::new();
        let uses_cell = self.script.iter().any(|op| op.kind() != OpKind::ArrayXor);
        if uses_cell {
            for p in &self.probes {
                if !STANDARD_PROBES.contains(&p.as_str()) {
                    return Err(Error::UnknownProbe {
                        name: p.clone(),
                        available: STANDARD_PROBES.iter().map(|s| s.to_string()).collect(),
                    });
                }
            }
        }
        for (i, op) in self.script.iter().enumerate() {
            let at = format!("script[{i}] ({})", op.kind().as_str());
            if let Some(t) = op.t_start_ps() {
                if !(t >= 0.0) {
                    bad.push(format!("{at}: t_start_ps must be >= 0"));
                }
            }
            match op {
                ScriptOp::Hold { duration_ps, .. } if !(*duration_ps > 0.0) => {
                    bad.push(format!("{at}: duration_ps must be > 0"))
                }
                ScriptOp::Write { bit, .. } if *bit > 1 => bad.push(format!("{at}: bit must be 0 or 1")),
                ScriptOp::Xor { input, .. } | ScriptOp::Xnor { input, .. } if *input > 1 => {
                    bad.push(format!("{at}: input must be 0 or 1"))
                }
                ScriptOp::ArrayXor { stored, input, random_pairs, .. } => {
                    let Some(arr) = &self.array else {
                        bad.push(format!("{at}: needs an [array] section"));
                        continue;
                    };
                    match (stored, input, random_pairs) {
                        (Some(s), Some(x), None) => {
                            if s.len() != arr.cols {
                                bad.push(format!("{at}: {} stored words for {} columns", s.len(), arr.cols));
                            }
                            for w in s.iter().chain(std::iter::once(x)) {
                                if w.len() != arr.rows {
                                    bad.push(format!("{at}: word `{w}` has {} bits for {} rows", w.len(), arr.rows));
                                }
                            }
                        }
                        (None, None, Some(_)) => {}
                        _ => bad.push(format!("{at}: give either `stored` and `input`, or `random_pairs`")),
                    }
                }
                _ => {}
            }
        }
        if let Some(a) = &self.array {
            if a.cols == 0 || a.rows == 0 {
                bad.push("array: rows and cols must be >= 1".into());
            }
        }
        if let Some(s) = &self.sweep {
            if !(s.step_nm > 0.0) {
                bad.push(format!("sweep: step_nm must be > 0, got {}", s.step_nm));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = match name {
        "fig3" => include_str!("../presets/fig3.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig5" => include_str!("../presets/fig5.toml"),
        "fig6" => include_str!("../presets/fig6.toml"),
        "table1" => include_str!("../presets/table1.toml"),
        "identity" => include_str!("../presets/identity.toml"),
        "random" => include_str!("../presets/random.toml"),
        other => {
            return Err(Error::config(format!(
                "unknown preset `{other}`; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    ScenarioConfig::from_toml_str(text)
}

/// What one script op did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpSummary {
    pub op: OpKind,
    pub t_start_ps: f64,
    pub window_ps: f64,
    pub stored: Option<String>,
    pub input: Option<String>,
    pub output: Option<String>,
    pub p_z_w: Option<f64>,
    pub settle_ps: Option<f64>,
    pub popcount: Option<usize>,
    /// Storage-node voltages after the op, `(Y, YB)` per row.
    pub nodes_v: Vec<(f64, f64)>,
}

impl OpSummary {
    pub fn line(&self) -> String {
        let mut s = format!("{:>9.1} ps  {:<9}", self.t_start_ps, self.op.as_str());
        if let Some(v) = &self.stored {
            let _ = write!(s, " stored={v}");
        }
        if let Some(v) = &self.input {
            let _ = write!(s, " input={v}");
        }
        if let Some(v) = &self.output {
            let _ = write!(s, " -> {v}");
        }
        if let Some(p) = self.p_z_w {
            let _ = write!(s, " (P_Z={:.3} uW)", p * 1e6);
        }
        if let Some(t) = self.settle_ps {
            let _ = write!(s, " settled in {t:.0} ps");
        }
        if let Some(c) = self.popcount {
            let _ = write!(s, " popcount={c}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<(f64, f64)>,
    pub slope_nm_per_nm: Option<f64>,
    pub crosstalk_max: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub name: String,
    pub ops: Vec<OpSummary>,
    pub waveforms: Vec<Waveform>,
    pub energy: Vec<EnergyReport>,
    pub spectra: Vec<ColumnResult>,
    pub sweep: Option<SweepResult>,
}

impl ScenarioOutput {
    /// Decoded results in script order.
    pub fn decoded(&self) -> Vec<String> {
        self.ops.iter().filter_map(|o| o.output.clone()).collect()
    }
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    cell: Option<Bitcell>,
    array: Option<XpsramArray>,
    traces: Vec<Waveform>,
    out: ScenarioOutput,
}

impl<'a> Runner<'a> {
    fn cell(&mut self) -> Result<&mut Bitcell> {
        if self.cell.is_none() {
            self.cell = Some(Bitcell::new(self.cfg.device.clone())?);
        }
        Ok(self.cell.as_mut().expect("just built"))
    }

    fn array(&mut self) -> Result<&mut XpsramArray> {
        if self.array.is_none() {
            let a = self.cfg.array.as_ref().ok_or_else(|| Error::config("array op without [array] section"))?;
            let dev = &self.cfg.device;
            let plan = plan_channels(a.rows, &dev.compute_rings[0], dev.vdd_v)?;
            self.array = Some(XpsramArray::new(a.rows, a.cols, plan, dev.clone())?);
        }
        Ok(self.array.as_mut().expect("just built"))
    }

    fn record_trace(&mut self, rec: &OpRecord) -> Result<()> {
        let picked: Vec<&Waveform> = self
            .cfg
            .probes
            .iter()
            .map(|p| rec.trace(p).expect("probes validated"))
            .collect();
        if self.traces.is_empty() {
            self.traces = picked.into_iter().cloned().collect();
        } else {
            for (acc, w) in self.traces.iter_mut().zip(picked) {
                acc.extend(w)?;
            }
        }
        Ok(())
    }

    fn wait_cell(&mut self, until: Option<f64>, op: &str) -> Result<()> {
        let Some(t) = until else { return Ok(()) };
        let now = self.cell()?.time_ps();
        if t < now - TIME_EPS_PS {
            return Err(Error::Schedule(format!("{op} at {t} ps starts before the previous op ends at {now} ps")));
        }
        if t > now + TIME_EPS_PS {
            let rec = self.cell()?.hold(t - now)?;
            self.record_trace(&rec)?;
        }
        Ok(())
    }

    fn cell_op(&mut self, op: &ScriptOp) -> Result<()> {
        self.wait_cell(op.t_start_ps(), op.kind().as_str())?;
        let cell = self.cell()?;
        let before = cell.stored_bit();
        let (rec, input) = match *op {
            ScriptOp::Hold { duration_ps, .. } => (cell.hold(duration_ps)?, None),
            ScriptOp::Write { bit, .. } => (cell.write(bit == 1)?, None),
            ScriptOp::Read { .. } => (cell.read()?, None),
            ScriptOp::Xor { input, .. } => (cell.xor(input == 1)?, Some(input)),
            ScriptOp::Xnor { input, .. } => (cell.xnor(input == 1)?, Some(input)),
            ScriptOp::ArrayXor { .. } => unreachable!("array ops are dispatched separately"),
        };
        let (y, yb) = cell.voltages();
        let bit_str = |b: bool| (b as u8).to_string();
        let mut summary = OpSummary {
            op: rec.kind,
            t_start_ps: rec.t_start_ps,
            window_ps: rec.window_ps,
            stored: before.map(bit_str),
            input: input.map(|i| i.to_string()),
            output: None,
            p_z_w: None,
            settle_ps: None,
            popcount: None,
            nodes_v: vec![(y, yb)],
        };
        match rec.outcome {
            OpOutcome::Held => {}
            OpOutcome::Written { bit, settle_ps } => {
                summary.output = Some(bit_str(bit));
                summary.settle_ps = Some(settle_ps);
            }
            OpOutcome::Decoded { bit, p_z_w } => {
                summary.output = Some(bit_str(bit));
                summary.p_z_w = Some(p_z_w);
            }
        }
        self.out.energy.push(energy::report(&rec, &self.cfg.device)?);
        self.record_trace(&rec)?;
        self.out.ops.push(summary);
        Ok(())
    }

    fn array_op(&mut self, op: &ScriptOp) -> Result<()> {
        let ScriptOp::ArrayXor { stored, input, random_pairs, t_start_ps } = op else {
            unreachable!("only array ops")
        };
        let (rows, cols) = {
            let a = self.cfg.array.as_ref().expect("validated");
            (a.rows, a.cols)
        };
        let seed = self.cfg.seed;
        let array = self.array()?;
        if let Some(t) = *t_start_ps {
            let now = array.column_netlist(0).time_ps();
            if t < now - TIME_EPS_PS {
                return Err(Error::Schedule(format!("array-xor at {t} ps starts before {now} ps")));
            }
            if t > now + TIME_EPS_PS {
                array.advance_bias_only(t - now)?;
            }
        }
        let (stored_words, input_word, results) = match (stored, input, random_pairs) {
            (Some(s), Some(x), _) => {
                let r = array.store_and_xor(s, x)?;
                (s.clone(), x.clone(), r)
            }
            (_, _, Some(n)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mask = if rows >= 64 { u64::MAX } else { (1u64 << rows) - 1 };
                let mut last = None;
                for _ in 0..*n {
                    let s: Vec<u64> = (0..cols).map(|_| rng.gen::<u64>() & mask).collect();
                    let x = rng.gen::<u64>() & mask;
                    let sw: Vec<Word> = s.iter().map(|&v| Word::from_u64(v, rows)).collect();
                    let xw = Word::from_u64(x, rows);
                    let r = array.store_and_xor(&sw, &xw)?;
                    for (j, res) in r.iter().enumerate() {
                        let expected = Word::from_u64(s[j] ^ x, rows);
                        if res.bits != expected {
                            return Err(Diagnostic::OracleMismatch {
                                column: j,
                                expected: expected.to_string(),
                                got: res.bits.to_string(),
                            }
                            .into());
                        }
                    }
                    last = Some((sw, xw, r));
                }
                match last {
                    Some(l) => l,
                    None => return Ok(()),
                }
            }
            _ => unreachable!("validated"),
        };
        let popcount = array.popcount(&results[0])?.0;
        let report = array.energy(&results[0])?;
        let nodes_v = (0..cols).flat_map(|j| array.node_voltages(j)).collect();
        let label = |words: &[Word]| words.iter().map(Word::to_string).collect::<Vec<_>>().join(",");
        let mut summary = OpSummary {
            op: OpKind::ArrayXor,
            t_start_ps: results[0].t_start_ps,
            window_ps: results[0].window_ps,
            stored: Some(label(&stored_words)),
            input: Some(input_word.to_string()),
            output: Some(label(&results.iter().map(|r| r.bits.clone()).collect::<Vec<_>>())),
            p_z_w: None,
            settle_ps: None,
            popcount: Some(popcount),
            nodes_v,
        };
        if let Some(n) = random_pairs {
            summary.stored = Some(format!("{n} random words (last {})", summary.stored.take().unwrap_or_default()));
        }
        self.out.energy.push(report);
        self.out.spectra = results;
        self.out.ops.push(summary);
        Ok(())
    }
}

/// Runs the script, then the sweep if one is configured.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let mut r = Runner {
        cfg,
        cell: None,
        array: None,
        traces: Vec::new(),
        out: ScenarioOutput {
            name: cfg.name.clone(),
            ops: Vec::new(),
            waveforms: Vec::new(),
            energy: Vec::new(),
            spectra: Vec::new(),
            sweep: None,
        },
    };
    for op in &cfg.script {
        log::info!("{}: {}", cfg.name, op.kind().as_str());
        match op.kind() {
            OpKind::ArrayXor => r.array_op(op)?,
            _ => r.cell_op(op)?,
        }
    }
    if r.cell.is_some() {
        if let Some(t_end) = cfg.engine.t_end_ps {
            r.wait_cell(Some(t_end), "end of run")?;
        }
    }
    if let Some(s) = &cfg.sweep {
        let dev = &cfg.device;
        let points = sweep_dl(&dev.compute_rings[0], dev.vdd_v, s.start_nm, s.stop_nm, s.step_nm)?;
        let rows = cfg.array.as_ref().map_or(8, |a| a.rows);
        let plan = plan_channels(rows, &dev.compute_rings[0], dev.vdd_v)?;
        let xt = crate::array::crosstalk_matrix(&plan, &dev.compute_rings[0], dev.vdd_v);
        r.out.sweep = Some(SweepResult {
            slope_nm_per_nm: linear_slope(&points),
            points,
            crosstalk_max: max_off_diagonal(&xt),
        });
    }
    r.out.waveforms = r.traces;
    Ok(r.out)
}

/// `# units:` comment, `time_ps,<probe>...` header, one row per sample.
pub fn waveforms_csv(waves: &[Waveform]) -> Result<String> {
    let mut s = String::new();
    let Some(first) = waves.first() else {
        return Ok("time_ps\n".into());
    };
    if waves.iter().any(|w| w.values.len() != first.values.len() || w.t0_ps != first.t0_ps) {
        return Err(Error::InvalidParameter("waveforms are on different time grids".into()));
    }
    let units: Vec<&str> = waves.iter().map(|w| w.unit.symbol()).collect();
    let _ = writeln!(s, "# units: ps,{}", units.join(","));
    let names: Vec<&str> = waves.iter().map(|w| w.probe.as_str()).collect();
    let _ = writeln!(s, "time_ps,{}", names.join(","));
    for k in 0..first.values.len() {
        let _ = write!(s, "{}", first.time_at(k));
        for w in waves {
            let _ = write!(s, ",{}", w.values[k]);
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn spectrum_csv(result: &ColumnResult) -> String {
    let mut s = String::from("channel,wavelength_nm,power_uW,decoded_bit\n");
    for (i, (l, p)) in result.spectrum.lambda_nm.iter().zip(&result.spectrum.power_w).enumerate() {
        let bit = result.bits.bits().get(i).copied().unwrap_or(false) as u8;
        let _ = writeln!(s, "{},{l},{},{bit}", i + 1, p * 1e6);
    }
    s
}

pub fn sweep_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("dL_nm,lambda_nm\n");
    for (dl, l) in points {
        let _ = writeln!(s, "{dl},{l}");
    }
    s
}

pub fn energy_json(reports: &[EnergyReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Writes every artifact the run produced into `dir` and returns the paths.
pub fn write_outputs(cfg: &ScenarioConfig, out: &ScenarioOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = |set: &Option<String>, kind: &str| {
        dir.join(set.clone().unwrap_or_else(|| format!("{}_{kind}", cfg.name)))
    };
    let o = &cfg.output;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: String| -> Result<()> {
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if !out.waveforms.is_empty() {
        put(name(&o.waveforms_csv, "waveforms.csv"), waveforms_csv(&out.waveforms)?)?;
    }
    if !out.energy.is_empty() {
        put(name(&o.energy_json, "energy.json"), energy_json(&out.energy))?;
    }
    for r in &out.spectra {
        let base = name(&o.spectrum_csv, "spectrum.csv");
        let path = if r.column == 0 {
            base
        } else {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("spectrum");
            base.with_file_name(format!("{stem}_col{}.csv", r.column))
        };
        put(path, spectrum_csv(r))?;
    }
    if let Some(sw) = &out.sweep {
        put(name(&o.sweep_csv, "sweep.csv"), sweep_csv(&sw.points))?;
    }
    put(name(&o.effective_config, "effective.toml"), cfg.to_toml()?)?;
    Ok(written)
}
