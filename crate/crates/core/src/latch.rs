//! Electrical side of the latch: the Y/YB storage nodes formed by photodiode
//! dividers and the drivers that feed node voltages back to ring drives.
//!
//! Each storage node sits between a pull-up photodiode to VDD and a
//! pull-down photodiode to ground, so
//!
//! ```text
//! C dV/dt = g_up (VDD - V) - g_down V
//! ```
//!
//! with photoconductances set by the light reaching each diode. The fixed
//! point is the divider ratio `VDD g_up / (g_up + g_down)`.

use serde::{Deserialize, Serialize};

use crate::bitcell::{Bitcell, BitcellConfig};
use crate::error::{Diagnostic, Error, Result};

/// Voltages on the complementary storage nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatchState {
    pub v_y: f64,
    pub v_yb: f64,
    pub c_node_ff: f64,
}

impl LatchState {
    /// Rails for a stored bit: `1` means Y at VDD.
    pub fn for_bit(bit: bool, vdd: f64, c_node_ff: f64) -> Self {
        let (v_y, v_yb) = if bit { (vdd, 0.0) } else { (0.0, vdd) };
        Self { v_y, v_yb, c_node_ff }
    }

    /// `Some(bit)` when both nodes are within `tol` (fraction of VDD) of
    /// the rails for that bit.
    pub fn settled_bit(&self, vdd: f64, tol: f64) -> Option<bool> {
        let band = tol * vdd;
        if self.v_y >= vdd - band && self.v_yb <= band {
            Some(true)
        } else if self.v_y <= band && self.v_yb >= vdd - band {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverParams {
    pub gain: f64,
    pub v_out_min: f64,
    pub v_out_max: f64,
    /// First-order lag; zero makes the driver instantaneous.
    pub tau_ps: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            gain: 1.0,
            v_out_min: 0.0,
            v_out_max: 1.0,
            tau_ps: 0.0,
        }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_out_min < self.v_out_max) {
            return Err(Error::InvalidParameter(format!(
                "driver clamp [{}, {}] is empty",
                self.v_out_min, self.v_out_max
            )));
        }
        if !(self.tau_ps >= 0.0) {
            return Err(Error::InvalidParameter("driver tau_ps must be >= 0".into()));
        }
        Ok(())
    }
}

/// One explicit-Euler step of the divider ODE, clamped to `[0, vdd]`.
pub fn node_step(v: f64, g_up: f64, g_down: f64, dt_ps: f64, vdd: f64, c_ff: f64) -> Result<f64> {
    if !(dt_ps > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt_ps} ps")));
    }
    if !(c_ff > 0.0) {
        return Err(Error::InvalidParameter(format!("node capacitance must be > 0, got {c_ff} fF")));
    }
    if g_up < 0.0 || g_down < 0.0 {
        return Err(Error::InvalidParameter("conductances must be >= 0".into()));
    }
    Ok(node_step_unchecked(v, g_up, g_down, dt_ps, vdd, c_ff))
}

#[inline]
pub(crate) fn node_step_unchecked(v: f64, g_up: f64, g_down: f64, dt_ps: f64, vdd: f64, c_ff: f64) -> f64 {
    // dt[ps] * g[S] / C[fF] = 1e3 * dt * g / C (dimensionless)
    let k = 1e3 * dt_ps / c_ff;
    let next = v + k * (g_up * (vdd - v) - g_down * v);
    next.clamp(0.0, vdd)
}

/// Euler gain `dt (g_up + g_down) / C`; the step is non-oscillatory for
/// values up to 1.
#[inline]
pub(crate) fn euler_gain(g_total: f64, dt_ps: f64, c_ff: f64) -> f64 {
    1e3 * dt_ps * g_total / c_ff
}

/// Divider fixed point `vdd g_up / (g_up + g_down)`; a floating node keeps `v`.
pub fn divider_fixed_point(v: f64, g_up: f64, g_down: f64, vdd: f64) -> f64 {
    let g = g_up + g_down;
    if g > 0.0 {
        vdd * g_up / g
    } else {
        v
    }
}

/// Clamped non-inverting buffer without lag.
pub fn driver_output(v_node: f64, params: &DriverParams) -> f64 {
    (params.gain * v_node).clamp(params.v_out_min, params.v_out_max)
}

/// Driver output after one step of the first-order lag.
pub fn driver_step(v_out: f64, v_node: f64, params: &DriverParams, dt_ps: f64) -> f64 {
    let target = driver_output(v_node, params);
    if params.tau_ps <= 0.0 {
        target
    } else {
        v_out + (target - v_out) * (1.0 - (-dt_ps / params.tau_ps).exp())
    }
}

/// A settled point of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attractor {
    pub y: f64,
    pub yb: f64,
    /// False when a 1 mV differential nudge drives the loop away from it.
    pub stable: bool,
}

const FIXED_POINT_LIMIT_NS: f64 = 100.0;
const CONVERGED_DV: f64 = 1e-6;
const DEDUP_V: f64 = 1e-3;

/// Settles the closed loop under bias-only illumination from the corners
/// `(0, VDD)`, `(VDD, 0)` and `(VDD/2, VDD/2)` and returns the distinct
/// points reached.
pub fn latch_fixed_points(config: &BitcellConfig) -> Result<Vec<Attractor>> {
    let vdd = config.vdd_v;
    let starts = [(0.0, vdd), (vdd, 0.0), (vdd / 2.0, vdd / 2.0)];
    let mut found: Vec<Attractor> = Vec::new();
    for start in starts {
        let (y, yb) = settle_from(config, start)?;
        let stable = is_stable(config, (y, yb))?;
        if !found
            .iter()
            .any(|a| (a.y - y).abs() < DEDUP_V && (a.yb - yb).abs() < DEDUP_V)
        {
            found.push(Attractor { y, yb, stable });
        }
    }
    Ok(found)
}

fn settle_from(config: &BitcellConfig, start: (f64, f64)) -> Result<(f64, f64)> {
    let mut cell = Bitcell::new(config.clone())?;
    cell.set_voltages(start.0, start.1);
    let chunk_ps = 100.0;
    let chunks = (FIXED_POINT_LIMIT_NS * 1e3 / chunk_ps) as usize;
    let mut prev = start;
    for _ in 0..chunks {
        cell.advance_bias_only(chunk_ps)?;
        let now = cell.voltages();
        if (now.0 - prev.0).abs() < CONVERGED_DV && (now.1 - prev.1).abs() < CONVERGED_DV {
            return Ok(now);
        }
        prev = now;
    }
    Err(Diagnostic::NonConvergence {
        limit_ns: FIXED_POINT_LIMIT_NS,
        start,
        y: prev.0,
        yb: prev.1,
    }
    .into())
}

fn is_stable(config: &BitcellConfig, point: (f64, f64)) -> Result<bool> {
    let nudge = 1e-3;
    let vdd = config.vdd_v;
    let mut cell = Bitcell::new(config.clone())?;
    cell.set_voltages(
        (point.0 + nudge).clamp(0.0, vdd),
        (point.1 - nudge).clamp(0.0, vdd),
    );
    cell.advance_bias_only(10_000.0)?;
    let (y, yb) = cell.voltages();
    Ok((y - point.0).abs() < 10.0 * nudge && (yb - point.1).abs() < 10.0 * nudge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn integrate(mut v: f64, gu: f64, gd: f64, dt: f64, t_end: f64) -> f64 {
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            v = node_step(v, gu, gd, dt, 1.0, 1.0).unwrap();
        }
        v
    }

    #[test]
    fn node_step_fixed_points() {
        // 1 mS up, 1 uS down: divider settles at 1e-3 / 1.001e-3.
        let v = integrate(0.0, 1e-3, 1e-6, 0.5, 200.0);
        assert_relative_eq!(v, 1.0 / 1.001, epsilon = 1e-9);
        assert!((v - 0.999).abs() < 1e-3);

        let v = integrate(0.9, 5e-6, 5e-6, 1.0, 5_000.0);
        assert_relative_eq!(v, 0.5, epsilon = 1e-9);

        assert_eq!(node_step(0.37, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap(), 0.37);
    }

    #[test]
    fn node_step_rejects_bad_dt() {
        assert!(node_step(0.0, 1e-6, 1e-6, 0.0, 1.0, 1.0).is_err());
        assert!(node_step(0.0, 1e-6, 1e-6, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn node_step_convergence_under_dt_halving() {
        let a = integrate(0.2, 9.5e-6, 2.1e-7, 1.0, 2_000.0);
        let b = integrate(0.2, 9.5e-6, 2.1e-7, 0.5, 2_000.0);
        assert!((a - b).abs() < 1e-3);
    }

    #[test]
    fn driver_examples() {
        let p = DriverParams::default();
        assert_eq!(driver_output(1.0, &p), 1.0);
        assert_eq!(driver_output(0.0, &p), 0.0);
        assert_eq!(driver_output(1.2, &p), 1.0);
        assert_eq!(driver_step(0.0, 0.7, &p, 1.0), 0.7);

        let lagged = DriverParams { tau_ps: 10.0, ..p };
        let mut v = 0.0;
        for _ in 0..10 {
            v = driver_step(v, 1.0, &lagged, 1.0);
        }
        assert_relative_eq!(v, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn settled_bit_bands() {
        let s = LatchState { v_y: 0.97, v_yb: 0.02, c_node_ff: 1.0 };
        assert_eq!(s.settled_bit(1.0, 0.05), Some(true));
        let s = LatchState { v_y: 0.5, v_yb: 0.5, c_node_ff: 1.0 };
        assert_eq!(s.settled_bit(1.0, 0.05), None);
        assert_eq!(LatchState::for_bit(false, 1.0, 1.0).settled_bit(1.0, 0.0), Some(false));
    }

    #[test]
    fn default_latch_is_bistable() {
        let cfg = BitcellConfig::default();
        let pts = latch_fixed_points(&cfg).unwrap();
        let stable: Vec<_> = pts.iter().filter(|a| a.stable).collect();
        assert_eq!(stable.len(), 2, "{pts:?}");
        assert!(stable.iter().any(|a| a.y > 0.95 && a.yb < 0.05));
        assert!(stable.iter().any(|a| a.y < 0.05 && a.yb > 0.95));
        // The symmetric start is an exact symmetry of the loop and stays put
        // on the metastable point.
        let meta: Vec<_> = pts.iter().filter(|a| !a.stable).collect();
        assert_eq!(meta.len(), 1, "{pts:?}");
        assert!((meta[0].y - meta[0].yb).abs() < 1e-9);
    }

    #[test]
    fn dark_latch_does_not_separate() {
        let cfg = BitcellConfig { bias_power_uw: 0.0, ..Default::default() };
        match latch_fixed_points(&cfg) {
            Err(Error::Diagnostic(Diagnostic::NonConvergence { start, y, yb, .. })) => {
                // Dark conductances are equal, so each node creeps toward VDD/2.
                if start.0 < 0.5 {
                    assert!(y > start.0 && y < 0.5);
                }
                if start.1 > 0.5 {
                    assert!(yb < start.1 && yb > 0.5);
                }
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn node_stays_in_rails(v in 0.0..1.0f64, gu in 0.0..5e-3f64, gd in 0.0..5e-3f64, dt in 0.01..5.0f64) {
            let n = node_step(v, gu, gd, dt, 1.0, 1.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&n));
        }

        #[test]
        fn driver_is_monotone(a in -1.0..2.0f64, b in -1.0..2.0f64) {
            let p = DriverParams::default();
            if a <= b {
                prop_assert!(driver_output(a, &p) <= driver_output(b, &p));
            }
        }
    }
}
