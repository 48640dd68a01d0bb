//! Behaviour of an obfuscated filter under arbitrary keys: the taps a user
//! of the chip would observe, their frequency response, and whether that
//! response still meets the specification.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_design::{build_frequency_grid, zpfr, FilterSpec, FrequencyGrid, SPEC_TOL};
use crate::hw::folded::{simulate_with, FoldedFilter};
use crate::hw::tmcm::ConstantMultiplier;
use crate::key::Key;
use crate::seeded_rng;

pub const DEFAULT_WRONG_KEYS: usize = 50;
pub const DEFAULT_MAX_HD: usize = 4;
/// Points of the plotted response between 0 and π, inclusive.
pub const DEFAULT_CURVE_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrongKeySample {
    pub keys: Vec<Key>,
    pub max_hd: usize,
    pub seed: u64,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// Distinct keys drawn uniformly from those at Hamming distance
/// `1..=max_hd` from `secret`.
pub fn sample_wrong_keys(secret: &Key, count: usize, max_hd: usize, seed: u64) -> Result<WrongKeySample> {
    let p = secret.len();
    assert!(max_hd >= 1 && max_hd <= p, "distance bound must lie in 1..=p");
    let shells: Vec<u128> = (1..=max_hd).map(|d| binomial(p, d)).collect();
    let available: u128 = shells.iter().sum();
    if count as u128 > available {
        return Err(Error::TooManyWrongKeys { requested: count, available });
    }
    let mut rng = seeded_rng(seed);
    let mut seen = HashSet::with_capacity(count);
    let mut keys = Vec::with_capacity(count);
    while keys.len() < count {
        let mut pick = rng.gen_range(0..available);
        let mut d = 1;
        for &s in &shells {
            if pick < s {
                break;
            }
            pick -= s;
            d += 1;
        }
        let mut key = secret.clone();
        for b in sample(&mut rng, p, d) {
            key.flip(b);
        }
        if seen.insert(key.clone()) {
            keys.push(key);
        }
    }
    Ok(WrongKeySample { keys, max_hd, seed })
}

/// Every key that differs from `secret` in exactly one slice value.
pub fn single_slice_keys(secret: &Key, layout: &crate::key::KeyLayout) -> Vec<Key> {
    let mut out = Vec::new();
    for i in 0..layout.len() {
        let truth = secret.slice(layout, i);
        for v in 0..1u64 << layout.widths[i] {
            if v != truth {
                let mut k = secret.clone();
                k.set_slice(layout, i, v);
                out.push(k);
            }
        }
    }
    out
}

/// Taps observed through the step probe: reset, drive a constant 1 and
/// difference the first `N` outputs.
pub fn effective_coefficients_with<M: ConstantMultiplier + ?Sized>(
    filter: &FoldedFilter,
    multiplier: &M,
    key: &Key,
) -> Vec<i64> {
    let n = filter.taps();
    let y = simulate_with(filter, multiplier, key, &vec![1; n]).outputs;
    (0..n).map(|i| if i == 0 { y[0] } else { y[i] - y[i - 1] }).collect()
}

pub fn effective_coefficients(filter: &FoldedFilter, key: &Key) -> Vec<i64> {
    effective_coefficients_with(filter, &filter.tmcm, key)
}

/// Half taps of the symmetric part `(c_i + c_{N-1-i}) / 2`, scaled by `2^-Q`.
pub fn symmetric_half(taps: &[i64], q: u32) -> Vec<f64> {
    let n = taps.len();
    let scale = (1u64 << q) as f64;
    (0..=(n - 1) / 2).map(|i| (taps[i] + taps[n - 1 - i]) as f64 / 2.0 / scale).collect()
}

pub fn is_symmetric(taps: &[i64]) -> bool {
    taps.iter().eq(taps.iter().rev())
}

/// ZPFR of the symmetric part of the effective taps at each `w`.
pub fn zpfr_under_key(filter: &FoldedFilter, key: &Key, q: u32, ws: &[f64]) -> Vec<f64> {
    let half = symmetric_half(&effective_coefficients(filter, key), q);
    ws.iter().map(|&w| zpfr(&half, w)).collect()
}

/// `|H(e^{jw})|` of arbitrary taps scaled by `2^-Q`.
pub fn magnitude_response(taps: &[i64], q: u32, w: f64) -> f64 {
    let scale = (1u64 << q) as f64;
    // Horner's rule in z = e^{-jw}; the phase error stays far below the
    // deviations being measured for the tap counts used here.
    let (s, c) = w.sin_cos();
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for &t in taps.iter().rev() {
        let (r2, i2) = (re * c + im * s, im * c - re * s);
        re = r2 + t as f64;
        im = i2;
    }
    re.hypot(im) / scale
}

/// Largest `||H| − 1|` over the passband and `|H|` over the stopband.
pub fn magnitude_deviation(taps: &[i64], q: u32, grid: &FrequencyGrid) -> (f64, f64) {
    let pass = grid.passband.iter().map(|&w| (magnitude_response(taps, q, w) - 1.0).abs()).fold(0.0, f64::max);
    let stop = grid.stopband.iter().map(|&w| magnitude_response(taps, q, w)).fold(0.0, f64::max);
    (pass, stop)
}

/// Deviation each band may reach before a response counts as violating:
/// the ripple, or the correct-key response's own deviation if that is
/// larger (quantization can push it slightly past the ripple).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allowance {
    pub passband: f64,
    pub stopband: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyBehavior {
    pub key_id: usize,
    pub key: String,
    pub hamming_distance: usize,
    pub effective: Vec<i64>,
    /// Positions whose tap differs from the correct-key tap.
    pub corrupted: Vec<usize>,
    pub symmetric: bool,
    pub max_passband_deviation: f64,
    pub max_stopband_deviation: f64,
    pub violated: bool,
    /// Symmetric-part ZPFR sampled at the report's curve frequencies.
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub spec: FilterSpec,
    pub grid_density: f64,
    pub max_hd: usize,
    pub seed: u64,
    pub allowance: Allowance,
    /// Curve frequencies in units of π.
    pub curve_w_over_pi: Vec<f64>,
    /// Key 0 is the correct key.
    pub keys: Vec<KeyBehavior>,
    pub wrong_keys: usize,
    pub violating_wrong_keys: usize,
    pub violation_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationOptions {
    pub grid_density: f64,
    pub curve_points: usize,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self { grid_density: crate::filter_design::VERIFY_DENSITY, curve_points: DEFAULT_CURVE_POINTS }
    }
}

/// Evaluates the correct key and every key of `wrong`, in that order.
pub fn behavior_report(
    filter: &FoldedFilter,
    spec: &FilterSpec,
    secret: &Key,
    wrong: &WrongKeySample,
    options: EvaluationOptions,
) -> BehaviorReport {
    behavior_report_with(filter, &filter.tmcm, spec, secret, wrong, options)
}

/// [`behavior_report`] with the products supplied by `multiplier`, such as
/// the gate netlist of the filter's TMCM.
pub fn behavior_report_with<M: ConstantMultiplier + ?Sized>(
    filter: &FoldedFilter,
    multiplier: &M,
    spec: &FilterSpec,
    secret: &Key,
    wrong: &WrongKeySample,
    options: EvaluationOptions,
) -> BehaviorReport {
    let grid = build_frequency_grid(spec, options.grid_density);
    let q = spec.quantization;
    let curve_w: Vec<f64> =
        (0..options.curve_points).map(|k| k as f64 / (options.curve_points.max(2) - 1) as f64).collect();
    let curve_rad: Vec<f64> = curve_w.iter().map(|w| w * PI).collect();
    let truth = effective_coefficients_with(filter, multiplier, secret);
    let (tp, ts) = magnitude_deviation(&truth, q, &grid);
    let allowance = Allowance { passband: spec.passband_ripple.max(tp), stopband: spec.stopband_ripple.max(ts) };
    let all: Vec<&Key> = std::iter::once(secret).chain(&wrong.keys).collect();
    let keys: Vec<KeyBehavior> = all
        .par_iter()
        .enumerate()
        .map(|(key_id, key)| {
            let effective = effective_coefficients_with(filter, multiplier, key);
            let (pass, stop) = magnitude_deviation(&effective, q, &grid);
            let half = symmetric_half(&effective, q);
            KeyBehavior {
                key_id,
                key: key.to_hex(),
                hamming_distance: key.hamming(secret),
                corrupted: (0..effective.len()).filter(|&i| effective[i] != truth[i]).collect(),
                symmetric: is_symmetric(&effective),
                max_passband_deviation: pass,
                max_stopband_deviation: stop,
                violated: pass > allowance.passband + SPEC_TOL || stop > allowance.stopband + SPEC_TOL,
                curve: curve_rad.iter().map(|&w| zpfr(&half, w)).collect(),
                effective,
            }
        })
        .collect();
    let violating = keys[1..].iter().filter(|k| k.violated).count();
    let wrong_keys = keys.len() - 1;
    BehaviorReport {
        spec: spec.clone(),
        grid_density: options.grid_density,
        max_hd: wrong.max_hd,
        seed: wrong.seed,
        allowance,
        curve_w_over_pi: curve_w,
        violation_fraction: if wrong_keys == 0 { 0.0 } else { violating as f64 / wrong_keys as f64 },
        wrong_keys,
        violating_wrong_keys: violating,
        keys,
    }
}

pub const CURVE_HEADER: &str = "key_id,w_over_pi,gain";

/// One row per key and curve frequency.
pub fn emit_curves(report: &BehaviorReport) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for k in &report.keys {
        for (w, g) in report.curve_w_over_pi.iter().zip(&k.curve) {
            out += &format!("{},{w},{g}\n", k.key_id);
        }
    }
    out
}

/// Reads rows written by [`emit_curves`] back as `(key_id, w_over_pi, gain)`.
pub fn parse_curves(text: &str) -> Result<Vec<(usize, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CURVE_HEADER => {}
        _ => return Err(Error::Parse(format!("expected header {CURVE_HEADER:?}"))),
    }
    lines
        .map(|(n, line)| {
            let bad = || Error::Parse(format!("line {}: malformed row {line:?}", n + 1));
            let mut f = line.split(',');
            let (a, b, c) = (f.next().ok_or_else(bad)?, f.next().ok_or_else(bad)?, f.next().ok_or_else(bad)?);
            if f.next().is_some() {
                return Err(bad());
            }
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?))
        })
        .collect()
}
