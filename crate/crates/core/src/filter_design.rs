//! Linear-phase FIR design by linear programming.
//!
//! A symmetric filter of odd length `N = 2M + 1` is described by its first
//! `M + 1` taps `h_0 … h_M`. Its zero-phase frequency response
//!
//! ```text
//! G(w) = Σ_{i=0}^{M} e_i · h_i · cos(w·(M − i)),   e_i = 2 for i < M, e_M = 1
//! ```
//!
//! is linear in the taps, so the ripple constraints on a discretized
//! frequency grid form a linear program. The same constraint set also yields
//! the extreme value every individual tap can take over all admissible
//! filters, which is what decoys are later chosen to avoid.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::bit_width;
use crate::error::{Error, Result};
use crate::lp::LinearProgram;

/// Default design grid density, in points per band per tap.
pub const DESIGN_DENSITY: f64 = 16.0;
/// Default verification density (10× the design grid).
pub const VERIFY_DENSITY: f64 = 160.0;
/// Residual tolerated on a spec constraint before it counts as violated.
pub const SPEC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandType {
    #[serde(rename = "low-pass")]
    LowPass,
    #[serde(rename = "high-pass")]
    HighPass,
}

/// Filter specification; band edges are in units of π rad/sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub index: u32,
    #[serde(rename = "type")]
    pub band_type: BandType,
    #[serde(rename = "N")]
    pub taps: usize,
    #[serde(rename = "wp")]
    pub passband_edge: f64,
    #[serde(rename = "ws")]
    pub stopband_edge: f64,
    #[serde(rename = "dp")]
    pub passband_ripple: f64,
    #[serde(rename = "ds")]
    pub stopband_ripple: f64,
    #[serde(rename = "Q")]
    pub quantization: u32,
}

impl FilterSpec {
    /// The three benchmark filters: two low-pass and one high-pass.
    pub fn benchmarks() -> [FilterSpec; 3] {
        [
            FilterSpec {
                index: 1,
                band_type: BandType::LowPass,
                taps: 29,
                passband_edge: 0.3,
                stopband_edge: 0.5,
                passband_ripple: 0.00316,
                stopband_ripple: 0.00316,
                quantization: 14,
            },
            FilterSpec {
                index: 2,
                band_type: BandType::LowPass,
                taps: 59,
                passband_edge: 0.125,
                stopband_edge: 0.225,
                passband_ripple: 0.01,
                stopband_ripple: 0.001,
                quantization: 14,
            },
            FilterSpec {
                index: 3,
                band_type: BandType::HighPass,
                taps: 105,
                passband_edge: 0.8,
                stopband_edge: 0.7,
                passband_ripple: 0.005,
                stopband_ripple: 0.001,
                quantization: 14,
            },
        ]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FilterSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.taps.is_multiple_of(2) {
            return bad(format!("N must be a positive odd integer, got {}", self.taps));
        }
        for (name, edge) in [("wp", self.passband_edge), ("ws", self.stopband_edge)] {
            if !(edge > 0.0 && edge < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {edge}"));
            }
        }
        match self.band_type {
            BandType::LowPass if self.passband_edge >= self.stopband_edge => {
                return bad("low-pass filters need wp < ws".into())
            }
            BandType::HighPass if self.stopband_edge >= self.passband_edge => {
                return bad("high-pass filters need ws < wp".into())
            }
            _ => {}
        }
        for (name, d) in [("dp", self.passband_ripple), ("ds", self.stopband_ripple)] {
            if !(d > 0.0 && d < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {d}"));
            }
        }
        if self.quantization == 0 || self.quantization > 30 {
            return bad(format!("Q must lie in 1..=30, got {}", self.quantization));
        }
        Ok(())
    }

    /// `M = (N − 1) / 2`.
    pub fn half_order(&self) -> usize {
        (self.taps - 1) / 2
    }

    /// Passband and stopband as closed intervals of angular frequency.
    pub fn band_intervals(&self) -> ((f64, f64), (f64, f64)) {
        let (wp, ws) = (self.passband_edge * PI, self.stopband_edge * PI);
        match self.band_type {
            BandType::LowPass => ((0.0, wp), (ws, PI)),
            BandType::HighPass => ((wp, PI), (0.0, ws)),
        }
    }
}

/// Sampled passband and stopband frequencies, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub passband: Vec<f64>,
    pub stopband: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|k| if k + 1 == count { hi } else { lo + step * k as f64 }).collect()
}

/// `⌈density·N⌉` uniformly spaced points per band, band edges included.
pub fn build_frequency_grid(spec: &FilterSpec, density: f64) -> FrequencyGrid {
    assert!(density >= 1.0, "grid density must be at least 1");
    let count = (density * spec.taps as f64).ceil() as usize;
    let ((p0, p1), (s0, s1)) = spec.band_intervals();
    FrequencyGrid { passband: linspace(p0, p1, count), stopband: linspace(s0, s1, count) }
}

/// First half `h_0 … h_M` of a symmetric impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealCoefficients {
    pub h: Vec<f64>,
}

impl RealCoefficients {
    pub fn half_order(&self) -> usize {
        self.h.len() - 1
    }

    /// All `N` taps, mirrored around the center.
    pub fn full_response(&self) -> Vec<f64> {
        mirror(&self.h)
    }
}

pub(crate) fn mirror<T: Copy>(half: &[T]) -> Vec<T> {
    let m = half.len() - 1;
    (0..2 * m + 1).map(|i| half[i.min(2 * m - i)]).collect()
}

/// The row `[e_i · cos(w·(M − i))]_i`, so that `G(w) = row · h`.
pub fn zpfr_row(half_order: usize, w: f64) -> Vec<f64> {
    (0..=half_order)
        .map(|i| {
            let e = if i == half_order { 1.0 } else { 2.0 };
            e * (w * (half_order - i) as f64).cos()
        })
        .collect()
}

/// Zero-phase frequency response `G(w)` of the half-taps `h`.
pub fn zpfr(h: &[f64], w: f64) -> f64 {
    let m = h.len() - 1;
    h.iter()
        .enumerate()
        .map(|(i, hi)| {
            let e = if i == m { 1.0 } else { 2.0 };
            e * hi * (w * (m - i) as f64).cos()
        })
        .sum()
}

pub fn compute_zpfr(coeffs: &RealCoefficients, w: f64) -> f64 {
    zpfr(&coeffs.h, w)
}

/// Ripple constraints over `grid`, optionally tightened by a margin variable
/// `t` appended after the taps (each ripple shrinks by `t·δ`).
fn spec_program(spec: &FilterSpec, grid: &FrequencyGrid, with_margin: bool) -> LinearProgram {
    let m = spec.half_order();
    let nv = m + 1 + usize::from(with_margin);
    let mut lp = LinearProgram::new(nv, -1.0, 1.0);
    if with_margin {
        // A negative optimum means the ripples cannot be met at all.
        lp.set_bounds(m + 1, -1e3, 1.0);
    }
    let (dp, ds) = (spec.passband_ripple, spec.stopband_ripple);
    let mut add = |w: f64, lo: f64, hi: f64, delta: f64| {
        let row = zpfr_row(m, w);
        let mut up = row.clone();
        let mut down: Vec<f64> = row.iter().map(|v| -v).collect();
        if with_margin {
            up.push(delta);
            down.push(delta);
        }
        lp.add_le(&up, hi);
        lp.add_le(&down, -lo);
    };
    for &w in &grid.passband {
        add(w, 1.0 - dp, 1.0 + dp, dp);
    }
    for &w in &grid.stopband {
        add(w, -ds, ds, ds);
    }
    lp
}

/// Designs the filter and returns the achieved relative ripple margin
/// (0 = constraints just met, 1 = ideal response).
pub fn design_with_margin(spec: &FilterSpec, grid: &FrequencyGrid) -> Result<(RealCoefficients, f64)> {
    let m = spec.half_order();
    let lp = spec_program(spec, grid, true);
    let mut objective = vec![0.0; m + 2];
    objective[m + 1] = 1.0;
    let sol = lp.maximize(&objective)?;
    let margin = sol.x[m + 1];
    if margin < -1e-9 {
        return Err(Error::Infeasible);
    }
    let h = sol.x[..=m].iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    Ok((RealCoefficients { h }, margin.max(0.0)))
}

/// Feasible taps meeting every grid constraint, with the widest uniform margin.
pub fn design_coefficients(spec: &FilterSpec, grid: &FrequencyGrid) -> Result<RealCoefficients> {
    design_with_margin(spec, grid).map(|(c, _)| c)
}

/// Per-tap extremes over all filters meeting the grid constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// The constraint set the bound LPs optimize over; exposed for cross-checks.
pub fn bound_program(spec: &FilterSpec, grid: &FrequencyGrid) -> LinearProgram {
    spec_program(spec, grid, false)
}

/// Solves `min h_i` and `max h_i` for every tap; the `2(M + 1)` solves run in
/// parallel and the result does not depend on scheduling.
pub fn coefficient_bounds(spec: &FilterSpec, grid: &FrequencyGrid) -> Result<BoundSet> {
    let m = spec.half_order();
    let lp = bound_program(spec, grid);
    let solved: Vec<Result<f64>> = (0..2 * (m + 1))
        .into_par_iter()
        .map(|job| {
            let i = job / 2;
            let mut objective = vec![0.0; m + 1];
            objective[i] = 1.0;
            let sol = if job % 2 == 0 { lp.minimize(&objective)? } else { lp.maximize(&objective)? };
            Ok(sol.x[i])
        })
        .collect();
    let mut lower = Vec::with_capacity(m + 1);
    let mut upper = Vec::with_capacity(m + 1);
    for (job, value) in solved.into_iter().enumerate() {
        if job % 2 == 0 {
            lower.push(value?);
        } else {
            upper.push(value?);
        }
    }
    Ok(BoundSet { lower, upper })
}

/// Integer filter in units of `2^-Q`, materialized at full length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedFilter {
    pub coeffs: Vec<i64>,
    pub bounds_l: Vec<i64>,
    pub bounds_u: Vec<i64>,
    #[serde(rename = "Q")]
    pub q: u32,
    pub mbw: u32,
}

impl QuantizedFilter {
    pub fn taps(&self) -> usize {
        self.coeffs.len()
    }

    /// Builds from full-length integer taps with degenerate (point) bounds.
    pub fn from_coeffs(coeffs: Vec<i64>, q: u32) -> Self {
        let mbw = max_bit_width(&coeffs);
        Self { bounds_l: coeffs.clone(), bounds_u: coeffs.clone(), coeffs, q, mbw }
    }

    /// First `M + 1` taps scaled back to real values.
    pub fn half_real(&self) -> Vec<f64> {
        let scale = (1u64 << self.q) as f64;
        self.coeffs[..=(self.taps() - 1) / 2].iter().map(|&c| c as f64 / scale).collect()
    }
}

/// `⌈v · 2^Q⌉`.
pub fn quantize_value(v: f64, q: u32) -> i64 {
    (v * (1u64 << q) as f64).ceil() as i64
}

pub fn max_bit_width(coeffs: &[i64]) -> u32 {
    coeffs.iter().map(|c| bit_width(c.unsigned_abs())).max().unwrap_or(1)
}

pub fn quantize(coeffs: &RealCoefficients, bounds: &BoundSet, q: u32) -> QuantizedFilter {
    let conv = |v: &[f64]| mirror(&v.iter().map(|&x| quantize_value(x, q)).collect::<Vec<_>>());
    let full = conv(&coeffs.h);
    QuantizedFilter {
        mbw: max_bit_width(&full),
        coeffs: full,
        bounds_l: conv(&bounds.lower),
        bounds_u: conv(&bounds.upper),
        q,
    }
}

/// Worst-case deviation of `G(w)/2^Q` from the ideal band gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// `max |G(w) − 1|` over the passband grid.
    pub max_passband_deviation: f64,
    /// `max |G(w)|` over the stopband grid.
    pub max_stopband_deviation: f64,
    pub violating_points: usize,
    pub violated: bool,
}

pub fn verify_half(h: &[f64], spec: &FilterSpec, grid: &FrequencyGrid) -> ViolationReport {
    let pass: Vec<f64> = grid.passband.iter().map(|&w| (zpfr(h, w) - 1.0).abs()).collect();
    let stop: Vec<f64> = grid.stopband.iter().map(|&w| zpfr(h, w).abs()).collect();
    let violating_points = pass.iter().filter(|&&d| d > spec.passband_ripple + SPEC_TOL).count()
        + stop.iter().filter(|&&d| d > spec.stopband_ripple + SPEC_TOL).count();
    ViolationReport {
        max_passband_deviation: pass.iter().copied().fold(0.0, f64::max),
        max_stopband_deviation: stop.iter().copied().fold(0.0, f64::max),
        violating_points,
        violated: violating_points > 0,
    }
}

/// Checks the integer filter's scaled response against the ripples on `grid`.
pub fn verify_spec(qf: &QuantizedFilter, spec: &FilterSpec, grid: &FrequencyGrid) -> ViolationReport {
    verify_half(&qf.half_real(), spec, grid)
}

/// `max_w |G_a(w) − G_b(w)|` over both bands of `grid`.
pub fn max_zpfr_difference(a: &[f64], b: &[f64], grid: &FrequencyGrid) -> f64 {
    grid.passband.iter().chain(&grid.stopband).map(|&w| (zpfr(a, w) - zpfr(b, w)).abs()).fold(0.0, f64::max)
}

/// Everything the design stage produces for one specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignArtifacts {
    pub real: RealCoefficients,
    pub margin: f64,
    pub bounds: BoundSet,
    pub quantized: QuantizedFilter,
    pub verification: ViolationReport,
}

/// Runs design, bound LPs, quantization and dense-grid verification.
pub fn design_filter(spec: &FilterSpec, density: f64) -> Result<DesignArtifacts> {
    spec.validate()?;
    let grid = build_frequency_grid(spec, density);
    let (real, margin) = design_with_margin(spec, &grid)?;
    let bounds = coefficient_bounds(spec, &grid)?;
    let quantized = quantize(&real, &bounds, spec.quantization);
    let dense = build_frequency_grid(spec, density * 10.0);
    let verification = verify_spec(&quantized, spec, &dense);
    Ok(DesignArtifacts { real, margin, bounds, quantized, verification })
}
