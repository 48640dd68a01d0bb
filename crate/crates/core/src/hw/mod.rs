//! Obfuscated constant multiplier, its gate-level form and the folded filter.

pub mod folded;
pub mod lower;
pub mod netlist;
pub mod tmcm;
pub mod verilog;

pub use folded::{build_folded_filter, reference_convolution, simulate_filter, FoldedFilter};
pub use lower::lower_to_gates;
pub use netlist::{Gate, GateNetlist, NetlistBuilder};
pub use tmcm::{build_tmcm, ConstantMultiplier, ObfuscatedTmcm, SecretKey};
pub use verilog::{emit_verilog, parse_verilog};
