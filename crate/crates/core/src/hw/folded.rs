//! Folded transposed-form filter around a single TMCM.
//!
//! Each input sample is held for `N` clock cycles. In cycle `c` the TMCM
//! forms `constant_c · x_t`, which is accumulated into slot `c` of the delay
//! line. When the counter reaches `N - 1`, TS fires: slot 0 is emitted as
//! `y_t`, the line shifts by one and the next sample is loaded.

use serde::{Deserialize, Serialize};

use crate::bits::{ceil_log2, from_twos, to_twos};
use crate::hw::tmcm::{ConstantMultiplier, ObfuscatedTmcm};
use crate::key::Key;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldedFilter {
    pub tmcm: ObfuscatedTmcm,
    pub counter_width: u32,
    pub register_count: usize,
    /// Accumulator width, wide enough for any sum of `N` products.
    pub output_width: u32,
}

impl FoldedFilter {
    pub fn taps(&self) -> usize {
        self.tmcm.taps()
    }
}

pub fn build_folded_filter(tmcm: &ObfuscatedTmcm) -> FoldedFilter {
    let n = tmcm.taps();
    let output_width = tmcm.product_width() + ceil_log2(n);
    assert!(output_width <= 64, "accumulator wider than 64 bits");
    FoldedFilter { tmcm: tmcm.clone(), counter_width: ceil_log2(n), register_count: n - 1, output_width }
}

/// Cycle-level record of a simulation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterTrace {
    pub outputs: Vec<i64>,
    /// Counter value in each clock cycle.
    pub counter: Vec<u32>,
    /// TS level in each clock cycle.
    pub ts: Vec<bool>,
}

/// Runs the folded schedule with any implementation of the multiplier,
/// recording counter and TS per cycle.
pub fn simulate_with<M: ConstantMultiplier + ?Sized>(
    filter: &FoldedFilter,
    multiplier: &M,
    key: &Key,
    inputs: &[i64],
) -> FilterTrace {
    let n = filter.taps();
    let w = filter.output_width;
    let mut slots = vec![0u64; n];
    let mut trace = FilterTrace::default();
    let mut queries = Vec::with_capacity(n);
    for &x in inputs {
        queries.clear();
        queries.extend((0..n).map(|c| (c, x)));
        let products = multiplier.products(key, &queries);
        for (c, m) in products.into_iter().enumerate() {
            slots[c] = to_twos(slots[c].wrapping_add(m as i64 as u64) as i64, w);
            trace.counter.push(c as u32);
            trace.ts.push(c == n - 1);
        }
        trace.outputs.push(from_twos(slots[0], w));
        slots.rotate_left(1);
        slots[n - 1] = 0;
    }
    trace
}

/// Output stream of the folded filter under `key`, word-level model.
pub fn simulate_filter(filter: &FoldedFilter, key: &Key, inputs: &[i64]) -> Vec<i64> {
    simulate_with(filter, &filter.tmcm, key, inputs).outputs
}

/// Direct-form convolution with `x(t) = 0` for `t < 0`.
pub fn reference_convolution(coeffs: &[i64], inputs: &[i64]) -> Vec<i64> {
    (0..inputs.len())
        .map(|j| {
            coeffs.iter().enumerate().take(j + 1).map(|(i, &h)| h as i128 * inputs[j - i] as i128).sum::<i128>() as i64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw::lower::lower_to_gates;
    use proptest::prelude::*;
    use rand::Rng;

    fn filter_from(coeffs: &[i64], ibw: u32) -> FoldedFilter {
        let tables = coeffs.iter().map(|&c| vec![c, c + 1000]).collect();
        build_folded_filter(&ObfuscatedTmcm::from_tables(tables, ibw).unwrap())
    }

    #[test]
    fn convolution_examples() {
        assert_eq!(reference_convolution(&[3, -2, 5], &[1, 1, 1, 1]), vec![3, 1, 6, 6]);
        assert_eq!(reference_convolution(&[3, -2, 5], &[1, 0, 0, 0]), vec![3, -2, 5, 0]);
    }

    #[test]
    fn structure() {
        let f = filter_from(&[1, 2, 3, 4, 5, 6, 7, 8, 9], 8);
        assert_eq!(f.register_count, 8);
        assert_eq!(f.counter_width, 4);
        let trace = simulate_with(&f, &f.tmcm, &Key::zeros(9), &[1; 5]);
        assert_eq!(trace.ts.len(), 45);
        for (cycle, &ts) in trace.ts.iter().enumerate() {
            assert_eq!(ts, cycle % 9 == 8);
            assert_eq!(trace.counter[cycle], (cycle % 9) as u32);
        }
    }

    #[test]
    fn step_gives_partial_sums() {
        let h = [3, -2, 5];
        let f = filter_from(&h, 8);
        let y = simulate_filter(&f, &Key::zeros(3), &[1; 5]);
        assert_eq!(y, vec![3, 1, 6, 6, 6]);
    }

    #[test]
    fn gate_level_filter_matches_word_level() {
        let f = filter_from(&[-7, 12, 30, 12, -7], 6);
        let net = lower_to_gates(&f.tmcm);
        let mut rng = crate::seeded_rng(4);
        let xs: Vec<i64> = (0..200).map(|_| rng.gen_range(-32..32)).collect();
        for kv in [0u32, 5, 31] {
            let key = Key::from_bits((0..5).map(|b| (kv >> b) & 1 == 1).collect());
            assert_eq!(simulate_with(&f, &net, &key, &xs).outputs, simulate_filter(&f, &key, &xs));
        }
    }

    proptest! {
        #[test]
        fn correct_key_is_convolution(
            h in proptest::collection::vec(-4000i64..4000, 1..12),
            xs in proptest::collection::vec(-(1i64 << 31)..(1i64 << 31), 0..40),
        ) {
            let f = filter_from(&h, 32);
            let key = Key::zeros(h.len());
            prop_assert_eq!(simulate_filter(&f, &key, &xs), reference_convolution(&h, &xs));
        }

        #[test]
        fn convolution_is_linear(
            h in proptest::collection::vec(-100i64..100, 1..8),
            u in proptest::collection::vec(-1000i64..1000, 10),
            v in proptest::collection::vec(-1000i64..1000, 10),
            a in -20i64..20,
            b in -20i64..20,
        ) {
            let mix: Vec<i64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = reference_convolution(&h, &mix);
            let cu = reference_convolution(&h, &u);
            let cv = reference_convolution(&h, &v);
            let rhs: Vec<i64> = cu.iter().zip(&cv).map(|(x, y)| a * x + b * y).collect();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
