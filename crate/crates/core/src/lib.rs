//! Behavioral simulator for a photonic SRAM bitcell with embedded XOR/XNOR
//! logic and its wavelength-multiplexed array.
//!
//! Layers, bottom up:
//! - [`photonics`]: stateless device models (ring, splitter, MMI, photodiode)
//! - [`latch`]: storage-node dynamics and drivers
//! - [`engine`]: netlists and the fixed-step transient executor
//! - [`bitcell`]: the full cell with hold/write/read/XOR/XNOR
//! - [`array`]: WDM channel planning and single-shot n-bit XOR
//! - [`energy`]: per-operation energy accounting
//! - [`scenario`]: config schema, presets and CSV/JSON emitters used by the CLI

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod bitcell;
pub mod energy;
pub mod engine;
pub mod error;
pub mod latch;
pub mod photonics;
pub mod scenario;

pub use bitcell::{Bitcell, BitcellConfig, OpKind, OpOutcome, OpRecord, Polarity, ReadPort};
pub use engine::{run, probe, Netlist, PortName, PulseEvent, Schedule, Unit, Waveform};
pub use error::{Diagnostic, Error, Result};
pub use latch::{DriverParams, LatchState};
pub use photonics::{OpticalPower, PdParams, RingParams, RingState, WdmSignal, Wavelength};
