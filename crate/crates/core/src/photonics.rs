//! Stateless behavioral models of the optical devices in a bitcell:
//! add-drop microring, photodiode, 50:50 splitter, MMI combiner.
//!
//! All optics are incoherent. A signal is a set of per-wavelength powers and
//! devices act on those powers independently; phase is never tracked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wavelengths closer than this are treated as the same channel.
pub const WAVELENGTH_TOL_NM: f64 = 1e-6;

/// Wavelength at which the free spectral range is evaluated.
pub const DESIGN_WAVELENGTH_NM: f64 = 1310.52;

/// Geometric ring-length step between adjacent WDM channels.
pub const DL_STEP_NM: f64 = 34.0;

/// Number of `DL_STEP_NM` steps that span one free spectral range.
pub const CHANNELS_PER_FSR: usize = 8;

/// Heater power that moves a resonance by half a free spectral range.
pub const HALF_FSR_HEATER_MW: f64 = 7.2;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn from_nm(nm: f64) -> Result<Self> {
        if nm.is_finite() && nm > 0.0 {
            Ok(Self(nm))
        } else {
            Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {nm} nm"
            )))
        }
    }

    pub fn nm(self) -> f64 {
        self.0
    }

    /// Same channel within [`WAVELENGTH_TOL_NM`].
    pub fn same_channel(self, other: Wavelength) -> bool {
        (self.0 - other.0).abs() <= WAVELENGTH_TOL_NM
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct OpticalPower(f64);

impl OpticalPower {
    pub const ZERO: OpticalPower = OpticalPower(0.0);

    pub fn from_watts(w: f64) -> Result<Self> {
        if w.is_finite() && w >= 0.0 {
            Ok(Self(w))
        } else {
            Err(Error::InvalidParameter(format!(
                "optical power must be non-negative, got {w} W"
            )))
        }
    }

    pub fn from_microwatts(uw: f64) -> Result<Self> {
        Self::from_watts(uw / 1e6)
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn microwatts(self) -> f64 {
        self.0 * 1e6
    }
}

/// Design parameters of one add-drop microring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingParams {
    pub radius_um: f64,
    /// Geometric length adjustment used to place the resonance on a WDM grid.
    pub dl_nm: f64,
    /// Resonance with zero drive, zero heat and `dl_nm == 0`.
    pub lambda_geo_nm: f64,
    pub fwhm_nm: f64,
    pub s_eo_nm_per_v: f64,
    pub s_th_nm_per_mw: f64,
    pub il_thru_db: f64,
    pub il_drop_db: f64,
    pub group_index: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        let radius_um = 7.5;
        let group_index = 4.0;
        let fsr_nm = fsr_nm_raw(radius_um, group_index);
        Self {
            radius_um,
            dl_nm: 0.0,
            lambda_geo_nm: 1309.92,
            fwhm_nm: 0.2,
            s_eo_nm_per_v: 0.6,
            s_th_nm_per_mw: fsr_nm / 2.0 / HALF_FSR_HEATER_MW,
            il_thru_db: 0.1,
            il_drop_db: 1.0,
            group_index,
        }
    }
}

impl RingParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.fwhm_nm > 0.0) {
            bad.push(format!("fwhm_nm must be > 0 (got {})", self.fwhm_nm));
        }
        if !(self.radius_um > 0.0) {
            bad.push(format!("radius_um must be > 0 (got {})", self.radius_um));
        }
        if !(self.il_thru_db >= 0.0) || !(self.il_drop_db >= 0.0) {
            bad.push("insertion losses must be >= 0".to_string());
        }
        if !(self.group_index > 1.0) {
            bad.push(format!("group_index must be > 1 (got {})", self.group_index));
        }
        if !(self.lambda_geo_nm > 0.0) {
            bad.push("lambda_geo_nm must be > 0".to_string());
        }
        if !(self.s_th_nm_per_mw >= 0.0) {
            bad.push("s_th_nm_per_mw must be >= 0".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(bad.join("; ")))
        }
    }

    /// Returns a copy with `s_th_nm_per_mw` re-derived from the current
    /// geometry, so half an FSR of heater tuning costs [`HALF_FSR_HEATER_MW`].
    pub fn with_default_thermal(mut self) -> Self {
        self.s_th_nm_per_mw = fsr(&self) / 2.0 / HALF_FSR_HEATER_MW;
        self
    }
}

/// Operating point of a ring: design plus drive voltage and heater power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingState {
    pub params: RingParams,
    pub v_drive: f64,
    pub p_heat_mw: f64,
}

impl RingState {
    pub fn new(params: RingParams, v_drive: f64, p_heat_mw: f64) -> Self {
        Self {
            params,
            v_drive,
            p_heat_mw: p_heat_mw.max(0.0),
        }
    }
}

/// Photodiode parameters for the light-controlled conductance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdParams {
    /// Photoconductance per incident watt.
    pub gamma_s_per_w: f64,
    pub g_dark_s: f64,
    /// Used only for energy accounting.
    pub responsivity_a_per_w: f64,
}

impl Default for PdParams {
    fn default() -> Self {
        Self {
            gamma_s_per_w: 2.0,
            g_dark_s: 1e-9,
            responsivity_a_per_w: 1.0,
        }
    }
}

impl PdParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_s_per_w >= 0.0 && self.g_dark_s >= 0.0 && self.responsivity_a_per_w >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "photodiode parameters must be >= 0".to_string(),
            ))
        }
    }
}

/// Convert a loss in dB to a linear power transmission.
pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Single-pole Lorentzian power response, 1 at zero detuning and 1/2 at
/// `±fwhm/2`.
pub fn lorentzian_response(detuning_nm: f64, fwhm_nm: f64) -> Result<f64> {
    if !(fwhm_nm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fwhm must be positive, got {fwhm_nm} nm"
        )));
    }
    Ok(lorentzian_unchecked(detuning_nm, fwhm_nm))
}

#[inline]
pub(crate) fn lorentzian_unchecked(detuning_nm: f64, fwhm_nm: f64) -> f64 {
    let x = 2.0 * detuning_nm / fwhm_nm;
    1.0 / (1.0 + x * x)
}

fn fsr_nm_raw(radius_um: f64, group_index: f64) -> f64 {
    let lambda = DESIGN_WAVELENGTH_NM;
    // nm^2 / (um * 1e3 nm/um) keeps the result in nm.
    lambda * lambda / (group_index * 2.0 * std::f64::consts::PI * radius_um * 1e3)
}

/// Free spectral range at [`DESIGN_WAVELENGTH_NM`].
pub fn fsr(params: &RingParams) -> f64 {
    fsr_nm_raw(params.radius_um, params.group_index)
}

/// Resonance shift from the geometric length adjustment. Eight
/// [`DL_STEP_NM`] steps span exactly one FSR.
pub fn dl_shift(dl_nm: f64, params: &RingParams) -> f64 {
    let limit = CHANNELS_PER_FSR as f64 * DL_STEP_NM;
    if dl_nm.abs() > limit {
        log::warn!("dL = {dl_nm} nm is outside the calibrated range ±{limit} nm");
    }
    dl_nm * fsr(params) / limit
}

pub fn resonance_wavelength(state: &RingState) -> Wavelength {
    let p = &state.params;
    Wavelength(
        p.lambda_geo_nm
            + p.s_eo_nm_per_v * state.v_drive
            + p.s_th_nm_per_mw * state.p_heat_mw
            + dl_shift(p.dl_nm, p),
    )
}

/// Add-drop transfer: returns `(thru, drop)` for light at `lambda`.
pub fn ring_transfer(
    p_in: OpticalPower,
    lambda: Wavelength,
    state: &RingState,
) -> (OpticalPower, OpticalPower) {
    let res = resonance_wavelength(state).nm();
    let (t, d) = ring_split(lambda.nm() - res, &state.params);
    (OpticalPower(p_in.0 * t), OpticalPower(p_in.0 * d))
}

/// Thru and drop power fractions for a given detuning.
#[inline]
pub(crate) fn ring_split(detuning_nm: f64, params: &RingParams) -> (f64, f64) {
    let l = lorentzian_unchecked(detuning_nm, params.fwhm_nm);
    (
        (1.0 - l) * db_to_transmission(params.il_thru_db),
        l * db_to_transmission(params.il_drop_db),
    )
}

pub fn split_5050(p_in: OpticalPower, il_split_db: f64) -> (OpticalPower, OpticalPower) {
    let half = OpticalPower(p_in.0 / 2.0 * db_to_transmission(il_split_db));
    (half, half)
}

/// Linear photoconductance `g_dark + gamma * p`.
pub fn pd_conductance(p_incident: OpticalPower, params: &PdParams) -> f64 {
    params.g_dark_s + params.gamma_s_per_w * p_incident.0
}

/// Per-channel optical power on one waveguide, kept sorted by wavelength.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WdmSignal {
    channels: Vec<(f64, f64)>,
}

impl WdmSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(lambda: Wavelength, power: OpticalPower) -> Self {
        let mut s = Self::new();
        s.add(lambda, power);
        s
    }

    /// Adds `power` to the channel at `lambda`, creating it if needed.
    pub fn add(&mut self, lambda: Wavelength, power: OpticalPower) {
        let nm = lambda.nm();
        match self
            .channels
            .iter_mut()
            .find(|(l, _)| (l - nm).abs() <= WAVELENGTH_TOL_NM)
        {
            Some((_, p)) => *p += power.watts(),
            None => {
                self.channels.push((nm, power.watts()));
                self.channels
                    .sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite wavelengths"));
            }
        }
    }

    pub fn power_at(&self, lambda: Wavelength) -> OpticalPower {
        self.channels
            .iter()
            .find(|(l, _)| (l - lambda.nm()).abs() <= WAVELENGTH_TOL_NM)
            .map(|&(_, p)| OpticalPower(p))
            .unwrap_or(OpticalPower::ZERO)
    }

    pub fn total(&self) -> OpticalPower {
        OpticalPower(self.channels.iter().map(|(_, p)| p).sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Wavelength, OpticalPower)> + '_ {
        self.channels
            .iter()
            .map(|&(l, p)| (Wavelength(l), OpticalPower(p)))
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Incoherent MMI combiner: per-wavelength power sum times the coupler loss.
pub fn mmi_combine(inputs: &[WdmSignal], il_mmi_db: f64) -> Result<WdmSignal> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter(
            "mmi_combine needs at least one input".to_string(),
        ));
    }
    let t = db_to_transmission(il_mmi_db);
    let mut out = WdmSignal::new();
    for sig in inputs {
        for (l, p) in sig.iter() {
            out.add(l, OpticalPower(p.watts() * t));
        }
    }
    Ok(out)
}
