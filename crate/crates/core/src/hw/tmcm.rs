//! Word-level model of the obfuscated time-multiplexed constant multiplier.
//!
//! For every coefficient a key-driven multiplexer picks one entry of a table
//! holding the coefficient and its decoys in random order; a second
//! multiplexer driven by the primary select `i` picks among coefficients, and
//! a single signed multiplier scales the filter input by the chosen constant.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bits::{bit_width, from_twos};
use crate::decoy::DecoyAssignment;
use crate::error::{Error, Result};
use crate::filter_design::QuantizedFilter;
use crate::key::{Key, KeyLayout};
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscatedTmcm {
    /// Filter input width.
    pub ibw: u32,
    /// Constant width in two's complement, `mbw + 1`.
    pub cbw: u32,
    pub mux_tables: Vec<Vec<i64>>,
    pub layout: KeyLayout,
}

impl ObfuscatedTmcm {
    pub fn taps(&self) -> usize {
        self.mux_tables.len()
    }

    pub fn key_bits(&self) -> usize {
        self.layout.total_bits()
    }

    pub fn product_width(&self) -> u32 {
        self.cbw + self.ibw
    }

    /// Constant routed to the multiplier for select `i` under `key`.
    pub fn select(&self, i: usize, key: &Key) -> i64 {
        self.mux_tables[i][key.slice(&self.layout, i) as usize]
    }

    /// Constants for every select value under `key`.
    pub fn selected_constants(&self, key: &Key) -> Vec<i64> {
        (0..self.taps()).map(|i| self.select(i, key)).collect()
    }

    pub fn multiply(&self, i: usize, key: &Key, x: i64) -> i128 {
        self.select(i, key) as i128 * x as i128
    }

    /// Table from explicit contents; used for hand-built designs.
    pub fn from_tables(mux_tables: Vec<Vec<i64>>, ibw: u32) -> Result<Self> {
        let mut widths = Vec::with_capacity(mux_tables.len());
        for (i, t) in mux_tables.iter().enumerate() {
            if !t.len().is_power_of_two() {
                return Err(Error::InconsistentAssignment(format!("table {i} has {} entries", t.len())));
            }
            widths.push(t.len().trailing_zeros());
        }
        let mbw = mux_tables.iter().flatten().map(|c| bit_width(c.unsigned_abs())).max().unwrap_or(1);
        Ok(Self { ibw, cbw: mbw + 1, mux_tables, layout: KeyLayout::new(widths) })
    }
}

/// The secret key together with the slice layout it is read through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub key: Key,
    pub layout: KeyLayout,
}

/// Shuffles each coefficient in with its decoys and records its position.
pub fn build_tmcm(
    qf: &QuantizedFilter,
    da: &DecoyAssignment,
    ibw: u32,
    seed: u64,
) -> Result<(ObfuscatedTmcm, SecretKey)> {
    da.validate(qf)?;
    assert!(ibw >= 1, "input width must be positive");
    let mut rng = seeded_rng(seed);
    let widths: Vec<u32> = (0..qf.taps()).map(|i| da.key_width(i)).collect();
    let layout = KeyLayout::new(widths);
    let mut key = Key::zeros(layout.total_bits());
    let mut tables = Vec::with_capacity(qf.taps());
    for (i, decoys) in da.decoys.iter().enumerate() {
        let mut order: Vec<usize> = (0..=decoys.len()).collect();
        order.shuffle(&mut rng);
        let table: Vec<i64> = order.iter().map(|&k| if k == 0 { qf.coeffs[i] } else { decoys[k - 1] }).collect();
        let position = order.iter().position(|&k| k == 0).unwrap();
        key.set_slice(&layout, i, position as u64);
        tables.push(table);
    }
    let tmcm = ObfuscatedTmcm { ibw, cbw: qf.mbw + 1, mux_tables: tables, layout: layout.clone() };
    Ok((tmcm, SecretKey { key, layout }))
}

/// Something that computes `f_r(i, k, x)`: a word model or a netlist.
pub trait ConstantMultiplier: Sync {
    fn select_width(&self) -> u32;
    fn key_bits(&self) -> usize;
    fn input_width(&self) -> u32;
    fn output_width(&self) -> u32;

    /// Raw output bits (low `output_width` bits) for each `(i, x)` query
    /// under a shared key.
    fn eval_bits(&self, key: &Key, queries: &[(usize, i64)]) -> Vec<u64>;

    /// Signed products for each `(i, x)` query.
    fn products(&self, key: &Key, queries: &[(usize, i64)]) -> Vec<i128> {
        let w = self.output_width();
        self.eval_bits(key, queries).into_iter().map(|b| from_twos(b, w) as i128).collect()
    }
}

impl ConstantMultiplier for ObfuscatedTmcm {
    fn select_width(&self) -> u32 {
        crate::bits::ceil_log2(self.taps())
    }

    fn key_bits(&self) -> usize {
        self.layout.total_bits()
    }

    fn input_width(&self) -> u32 {
        self.ibw
    }

    fn output_width(&self) -> u32 {
        self.product_width()
    }

    fn eval_bits(&self, key: &Key, queries: &[(usize, i64)]) -> Vec<u64> {
        let w = self.product_width();
        let x_mask_bits = self.ibw;
        queries
            .iter()
            .map(|&(i, x)| {
                let x = from_twos(crate::bits::to_twos(x, x_mask_bits), x_mask_bits);
                let c = if i < self.taps() { self.select(i, key) } else { 0 };
                crate::bits::to_twos((c as i128 * x as i128) as i64, w)
            })
            .collect()
    }
}
