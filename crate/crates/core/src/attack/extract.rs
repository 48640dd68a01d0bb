//! LSB-first recovery of the constants behind a keyed constant multiplier.
//!
//! Product bit `j` of `r · x` depends only on bits `0..=j` of `r` and `x`,
//! so once the low bits of `r` are known the next one is the unique value
//! that makes bit `j` agree with the black box for every `x` whose free bits
//! are `0..=j`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{from_twos, to_twos};
use crate::error::{Error, Result};
use crate::hw::tmcm::ConstantMultiplier;
use crate::key::{Key, KeyLayout};
use crate::seeded_rng;

/// Random full-width inputs each recovered constant is checked against.
pub const VERIFY_SAMPLES: usize = 1000;

/// Per select value, every constant reachable through its key slice, listed
/// by slice value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredConstantSets {
    #[serde(rename = "R")]
    pub sets: Vec<Vec<i64>>,
    pub cbw: u32,
}

impl RecoveredConstantSets {
    pub fn total(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// Key-slice width of each select value.
    pub fn widths(&self) -> Vec<u32> {
        self.sets.iter().map(|s| s.len().trailing_zeros()).collect()
    }
}

/// Constant width implied by the port widths.
pub fn constant_width<M: ConstantMultiplier + ?Sized>(f: &M) -> u32 {
    f.output_width() - f.input_width()
}

/// Key whose slice `i` holds `value` and whose other bits are zero.
pub fn probe_key(layout: &KeyLayout, i: usize, value: u64) -> Key {
    let mut k = Key::zeros(layout.total_bits());
    k.set_slice(layout, i, value);
    k
}

fn free_inputs(j: u32, ibw: u32) -> u64 {
    1u64 << (j + 1).min(ibw)
}

/// Tests candidate bit `b` at position `j` against observed outputs, where
/// `observed[x]` is the output for the `ibw`-bit input pattern `x`.
fn bit_consistent(observed: &[u64], partial: u64, b: bool, j: u32, ibw: u32) -> bool {
    let r = partial | ((b as u64) << j);
    observed.iter().enumerate().all(|(x, &y)| {
        // Sign extension only matters once j reaches the input width.
        let x = from_twos(x as u64, ibw) as u64;
        let want = (r.wrapping_mul(x) >> j) & 1;
        want == (y >> j) & 1
    })
}

fn decide(observed: &[u64], partial: u64, j: u32, ibw: u32, select: usize, slice: u64) -> Result<bool> {
    match (bit_consistent(observed, partial, false, j, ibw), bit_consistent(observed, partial, true, j, ibw)) {
        (true, false) => Ok(false),
        (false, true) => Ok(true),
        // A true multiplier always separates the two once x = 1 is probed.
        (true, true) => {
            Err(Error::InconsistentAssignment(format!("bit {j} of select {select}, slice {slice} is not determined")))
        }
        (false, false) => Err(Error::NoConsistentBit { select, slice, bit: j }),
    }
}

fn observe<M: ConstantMultiplier + ?Sized>(f: &M, i: usize, key: &Key, count: u64) -> Vec<u64> {
    let ibw = f.input_width();
    let queries: Vec<(usize, i64)> = (0..count).map(|x| (i, from_twos(x, ibw))).collect();
    f.eval_bits(key, &queries)
}

/// Recovers bit `j` of the constant selected by `(i, key)` given its bits
/// `0..j` in `partial`, by enumerating the free low input bits.
pub fn extract_bit<M: ConstantMultiplier + ?Sized>(f: &M, i: usize, key: &Key, partial: u64, j: u32) -> Result<bool> {
    let observed = observe(f, i, key, free_inputs(j, f.input_width()));
    decide(&observed, partial, j, f.input_width(), i, 0)
}

/// Recovers the whole constant for `(i, key)` and checks it on random
/// full-width inputs.
pub fn extract_constant<M: ConstantMultiplier + ?Sized>(
    f: &M,
    i: usize,
    key: &Key,
    slice: u64,
    seed: u64,
) -> Result<i64> {
    let cbw = constant_width(f);
    let ibw = f.input_width();
    let observed = observe(f, i, key, free_inputs(cbw - 1, ibw));
    let mut bits = 0u64;
    for j in 0..cbw {
        let need = free_inputs(j, ibw) as usize;
        if decide(&observed[..need], bits, j, ibw, i, slice)? {
            bits |= 1 << j;
        }
    }
    let value = from_twos(bits, cbw);
    if !verify_constant(f, i, key, value, seed) {
        return Err(Error::VerificationMismatch { select: i, slice, value });
    }
    Ok(value)
}

/// Checks `f(i, key, x) == value · x` on random inputs.
pub fn verify_constant<M: ConstantMultiplier + ?Sized>(f: &M, i: usize, key: &Key, value: i64, seed: u64) -> bool {
    let ibw = f.input_width();
    let w = f.output_width();
    let mut rng = seeded_rng(seed);
    let xs: Vec<(usize, i64)> = (0..VERIFY_SAMPLES).map(|_| (i, from_twos(rng.gen::<u64>(), ibw))).collect();
    let got = f.eval_bits(key, &xs);
    xs.iter().zip(got).all(|(&(_, x), y)| to_twos((value as i128 * x as i128) as i64, w) == y)
}

/// Reads the slice layout off the black box: with the all-zero key and
/// `x = 1` the output is the selected constant, and toggling a single key
/// bit changes it for exactly the select value owning that bit.
pub fn infer_key_layout<M: ConstantMultiplier + ?Sized>(f: &M) -> Result<KeyLayout> {
    let selects = 1usize << f.select_width();
    let queries: Vec<(usize, i64)> = (0..selects).map(|i| (i, 1)).collect();
    let base = f.eval_bits(&Key::zeros(f.key_bits()), &queries);
    let mut owners = Vec::with_capacity(f.key_bits());
    for b in 0..f.key_bits() {
        let mut key = Key::zeros(f.key_bits());
        key.set_bit(b, true);
        let out = f.eval_bits(&key, &queries);
        let changed: Vec<usize> = (0..selects).filter(|&i| out[i] != base[i]).collect();
        match changed[..] {
            [i] => owners.push(i),
            _ => return Err(Error::InconsistentAssignment(format!("key bit {b} affects select values {changed:?}"))),
        }
    }
    let mut widths: Vec<u32> = Vec::new();
    for (b, &i) in owners.iter().enumerate() {
        if i + 1 == widths.len() {
            widths[i] += 1;
        } else if i == widths.len() {
            widths.push(1);
        } else {
            return Err(Error::InconsistentAssignment(format!("key bit {b} belongs to select {i} out of order")));
        }
    }
    Ok(KeyLayout::new(widths))
}

/// Recovers every constant reachable through every key slice.
pub fn extract_constants<M: ConstantMultiplier + ?Sized>(
    f: &M,
    layout: &KeyLayout,
    seed: u64,
) -> Result<RecoveredConstantSets> {
    let jobs: Vec<(usize, u64)> =
        (0..layout.len()).flat_map(|i| (0..1u64 << layout.widths[i]).map(move |s| (i, s))).collect();
    let values: Vec<i64> = jobs
        .par_iter()
        .enumerate()
        .map(|(n, &(i, s))| {
            let key = probe_key(layout, i, s);
            extract_constant(f, i, &key, s, seed.wrapping_add(n as u64))
        })
        .collect::<Result<_>>()?;
    let mut sets = vec![Vec::new(); layout.len()];
    for (&(i, _), v) in jobs.iter().zip(values) {
        sets[i].push(v);
    }
    Ok(RecoveredConstantSets { sets, cbw: constant_width(f) })
}
