//! Per-operation energy accounting.
//!
//! Optical energy is the exact sum of source power times on-time inside the
//! window. Electrical energy has two parts: photodiode bias dissipation
//! `V_bias * R * P_incident` integrated over the window, and a switching
//! charge `C_drv * VDD^2` per driver transition. Compute operations count one
//! transition for the evaluation at Z. Thermal tuning is static power and is
//! reported separately.

use serde::{Deserialize, Serialize};

use crate::bitcell::{BitcellConfig, OpKind, OpRecord};
use crate::engine::{Schedule, Waveform};
use crate::error::{Error, Result};
use crate::photonics::{fsr, RingParams};

/// Effective driver switching capacitance; together with a PD bias of VDD
/// it places a default XOR at about 2.2 fJ electrical.
pub const DEFAULT_C_DRV_FF: f64 = 1.4;

/// Reference energies per bit for other XOR/memory macros, as
/// `(method, latency_ns, energy_fj)`.
pub const REFERENCE_ROWS: [(&str, f64, Option<f64>); 6] = [
    ("8T-SRAM IMC", 3.0, Some(17.25)),
    ("SRAM IMC", 0.85, Some(3679.0)),
    ("Boolean photonic XOR (DC-controlled)", 10.0, None),
    ("Boolean photonic XOR (EO modulator)", 0.05, None),
    ("InP optical flip-flop", 0.2, Some(7960.0)),
    ("Photonic IMC XOR (reported)", 0.1, Some(13.15)),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalModel {
    pub vdd_v: f64,
    pub pd_bias_v: f64,
    pub c_drv_ff: f64,
    /// `(probe, responsivity A/W)` for every biased photodiode.
    pub photodiodes: Vec<(String, f64)>,
    /// Node probes whose drivers switch when the node crosses VDD/2.
    pub driver_nodes: Vec<String>,
}

impl ElectricalModel {
    pub fn for_bitcell(cfg: &BitcellConfig) -> Self {
        Self {
            vdd_v: cfg.vdd_v,
            pd_bias_v: cfg.vdd_v,
            c_drv_ff: DEFAULT_C_DRV_FF,
            photodiodes: (0..4)
                .map(|i| (format!("P{}", i + 1), cfg.pd[i].responsivity_a_per_w))
                .collect(),
            driver_nodes: vec!["Y".into(), "YB".into()],
        }
    }

    pub fn switching_energy_fj(&self) -> f64 {
        self.c_drv_ff * self.vdd_v * self.vdd_v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub op: String,
    pub window_ps: f64,
    #[serde(rename = "optical_fJ")]
    pub optical_fj: f64,
    #[serde(rename = "electrical_fJ")]
    pub electrical_fj: f64,
    #[serde(rename = "total_fJ")]
    pub total_fj: f64,
    #[serde(rename = "thermal_static_mW")]
    pub thermal_static_mw: f64,
}

impl EnergyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Σ P·Δt over all pulses overlapping `[a, b)`, in fJ.
pub fn optical_energy(schedule: &Schedule, window: (f64, f64)) -> f64 {
    schedule
        .events
        .iter()
        // W * ps = 1e-12 J = 1e3 fJ
        .map(|e| e.power_w * e.overlap_ps(window.0, window.1) * 1e3)
        .sum()
}

fn find<'a>(waveforms: &'a [Waveform], probe: &str) -> Result<&'a Waveform> {
    waveforms
        .iter()
        .find(|w| w.probe == probe)
        .ok_or_else(|| Error::UnknownProbe {
            name: probe.to_string(),
            available: waveforms.iter().map(|w| w.probe.clone()).collect(),
        })
}

/// Number of VDD/2 crossings of the driver nodes inside `[a, b)`.
pub fn driver_transitions(waveforms: &[Waveform], window: (f64, f64), model: &ElectricalModel) -> Result<usize> {
    let mid = model.vdd_v / 2.0;
    let mut count = 0;
    for name in &model.driver_nodes {
        let w = find(waveforms, name)?;
        let mut prev: Option<bool> = None;
        for (t, v) in w.samples() {
            if t < window.0 - 1e-9 || t >= window.1 - 1e-9 {
                continue;
            }
            let high = v > mid;
            if prev.is_some_and(|p| p != high) {
                count += 1;
            }
            prev = Some(high);
        }
    }
    Ok(count)
}

/// Photodiode bias energy in fJ.
pub fn photodiode_energy(waveforms: &[Waveform], window: (f64, f64), model: &ElectricalModel) -> Result<f64> {
    let mut total = 0.0;
    for (name, resp) in &model.photodiodes {
        let w = find(waveforms, name)?;
        total += model.pd_bias_v * resp * w.integral_over(window.0, window.1) * 1e3;
    }
    Ok(total)
}

/// Photodiode dissipation plus `C_drv VDD^2` per transition, in fJ.
/// `extra_transitions` adds switching events not visible on the node
/// traces, such as the evaluation of a compute result.
pub fn electrical_energy(
    waveforms: &[Waveform],
    window: (f64, f64),
    model: &ElectricalModel,
    extra_transitions: usize,
) -> Result<f64> {
    let pd = photodiode_energy(waveforms, window, model)?;
    let transitions = driver_transitions(waveforms, window, model)? + extra_transitions;
    Ok(pd + transitions as f64 * model.switching_energy_fj())
}

/// Heater power to move a resonance by `delta_lambda_nm`. Shifts beyond
/// half an FSR should use the neighbouring resonance order instead.
pub fn thermal_tuning_power(delta_lambda_nm: f64, ring: &RingParams) -> Result<f64> {
    let half = fsr(ring) / 2.0;
    if delta_lambda_nm.abs() > half * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "|{delta_lambda_nm}| nm exceeds half an FSR ({half:.4} nm); tune to the adjacent order instead"
        )));
    }
    if !(ring.s_th_nm_per_mw > 0.0) {
        return Err(Error::InvalidParameter("ring has no thermal tuning coefficient".into()));
    }
    Ok(delta_lambda_nm.abs() / ring.s_th_nm_per_mw)
}

/// Energy over an arbitrary window of a completed run.
pub fn report_window(
    kind: OpKind,
    schedule: &Schedule,
    waveforms: &[Waveform],
    window: (f64, f64),
    model: &ElectricalModel,
    thermal_static_mw: f64,
) -> Result<EnergyReport> {
    let optical_fj = optical_energy(schedule, window);
    let evaluations = usize::from(kind.is_compute());
    let electrical_fj = electrical_energy(waveforms, window, model, evaluations)?;
    Ok(EnergyReport {
        op: kind.as_str().to_string(),
        window_ps: window.1 - window.0,
        optical_fj,
        electrical_fj,
        total_fj: optical_fj + electrical_fj,
        thermal_static_mw,
    })
}

/// Energy of one bitcell operation over its own window.
pub fn report(rec: &OpRecord, cfg: &BitcellConfig) -> Result<EnergyReport> {
    let model = ElectricalModel::for_bitcell(cfg);
    report_window(
        rec.kind,
        &rec.schedule,
        &rec.waveforms,
        (rec.t_start_ps, rec.t_start_ps + rec.window_ps),
        &model,
        cfg.latch_heater_mw.iter().sum(),
    )
}
