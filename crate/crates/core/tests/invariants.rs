use proptest::prelude::*;

use firobf::attack::extract::probe_key;
use firobf::attack::sat::extract_constant_sat;
use firobf::attack::{extract_constants, infer_key_layout};
use firobf::bits::magnitude_hamming;
use firobf::decoy::{assign_decoys, candidate_set, DsmKind};
use firobf::filter_design::{quantize_value, zpfr, QuantizedFilter};
use firobf::hw::{emit_verilog, lower_to_gates, parse_verilog, GateNetlist, ObfuscatedTmcm};

/// `G(w)` straight from the full symmetric impulse response.
fn zpfr_full(half: &[f64], w: f64) -> f64 {
    let m = half.len() - 1;
    (0..=2 * m).map(|n| half[n.min(2 * m - n)] * (w * (n as f64 - m as f64)).cos()).sum()
}

fn dsm() -> impl Strategy<Value = DsmKind> {
    prop::sample::select(DsmKind::ALL.to_vec())
}

/// A symmetric integer filter of 3 to 9 taps with small bounds around each tap.
fn small_filter() -> impl Strategy<Value = QuantizedFilter> {
    (1usize..=4)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(-40i64..=40, m + 1),
                prop::collection::vec(0i64..=3, m + 1),
                prop::collection::vec(0i64..=3, m + 1),
            )
        })
        .prop_map(|(h, below, above)| {
            let mirror = |v: &[i64]| -> Vec<i64> {
                let m = v.len() - 1;
                (0..=2 * m).map(|n| v[n.min(2 * m - n)]).collect()
            };
            let lo: Vec<i64> = h.iter().zip(&below).map(|(a, b)| a - b).collect();
            let hi: Vec<i64> = h.iter().zip(&above).map(|(a, b)| a + b).collect();
            let coeffs = mirror(&h);
            let mbw = 7;
            QuantizedFilter { coeffs, bounds_l: mirror(&lo), bounds_u: mirror(&hi), q: 8, mbw }
        })
}

/// One to four tables of one or two key bits each, distinct constants per table.
fn random_tables() -> impl Strategy<Value = Vec<Vec<i64>>> {
    let pool: Vec<i64> = (-60..=60).collect();
    let table = (1u32..=2).prop_flat_map(move |w| prop::sample::subsequence(pool.clone(), 1 << w).prop_shuffle());
    prop::collection::vec(table, 1..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zpfr_matches_full_sum(h in prop::collection::vec(-1.0f64..1.0, 1..20), w in 0.0f64..std::f64::consts::PI) {
        prop_assert!((zpfr(&h, w) - zpfr_full(&h, w)).abs() < 1e-9);
    }

    #[test]
    fn zpfr_is_linear(
        pair in (1usize..20).prop_flat_map(|n| (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))),
        k in -4.0f64..4.0,
        w in 0.0f64..std::f64::consts::PI,
    ) {
        let (a, b) = pair;
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + k * y).collect();
        prop_assert!((zpfr(&sum, w) - (zpfr(&a, w) + k * zpfr(&b, w))).abs() < 1e-9);
    }

    #[test]
    fn quantization_is_monotone_ceiling(a in -1.0f64..1.0, b in -1.0f64..1.0, q in 1u32..20) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize_value(lo, q) <= quantize_value(hi, q));
        let scale = (1u64 << q) as f64;
        let err = quantize_value(a, q) as f64 / scale - a;
        prop_assert!((0.0..1.0 / scale).contains(&err));
    }

    #[test]
    fn decoy_assignment_invariants(qf in small_filter(), extra in 0usize..8, dsm in dsm(), seed in any::<u64>()) {
        let p = qf.taps() + extra;
        let da = assign_decoys(&qf, p, dsm, seed).unwrap();
        da.validate(&qf).unwrap();
        let mut bits = 0;
        for i in 0..qf.taps() {
            prop_assert!((da.nd[i] + 1).is_power_of_two());
            bits += (da.nd[i] + 1).trailing_zeros() as usize;
            let set = candidate_set(qf.coeffs[i], qf.bounds_l[i], qf.bounds_u[i], qf.mbw).unwrap();
            for &d in &da.decoys[i] {
                prop_assert!(set.contains(d));
                prop_assert!(d != 0 && (d > 0) == (qf.coeffs[i] >= 0));
                prop_assert!(d < qf.bounds_l[i] || d > qf.bounds_u[i]);
            }
            if dsm == DsmKind::Hd {
                // No unchosen candidate is strictly closer than a chosen one.
                let far = da.decoys[i].iter().map(|&d| magnitude_hamming(d, qf.coeffs[i])).max().unwrap();
                let closer = set.iter().filter(|&v| magnitude_hamming(v, qf.coeffs[i]) < far);
                for v in closer {
                    prop_assert!(da.decoys[i].contains(&v));
                }
            }
        }
        prop_assert_eq!(bits, p);
        prop_assert_eq!(&assign_decoys(&qf, p, dsm, seed).unwrap(), &da);
    }

    #[test]
    fn extraction_recovers_tables(tables in random_tables(), ibw in 1u32..9) {
        let t = ObfuscatedTmcm::from_tables(tables, ibw).unwrap();
        let net = lower_to_gates(&t);
        let layout = infer_key_layout(&net).unwrap();
        prop_assert_eq!(&layout, &t.layout);
        prop_assert_eq!(extract_constants(&net, &layout, 0).unwrap().sets, t.mux_tables);
    }

    #[test]
    fn netlist_serializations_round_trip(tables in random_tables(), ibw in 1u32..7) {
        let net = lower_to_gates(&ObfuscatedTmcm::from_tables(tables, ibw).unwrap());
        let json = serde_json::to_string(&net).unwrap();
        prop_assert_eq!(&GateNetlist::from_json(&json).unwrap(), &net);
        let v = emit_verilog(&net);
        prop_assert_eq!(emit_verilog(&parse_verilog(&v).unwrap()), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sat_route_agrees_with_enumeration(tables in random_tables(), ibw in 1u32..6) {
        let t = ObfuscatedTmcm::from_tables(tables, ibw).unwrap();
        let net = lower_to_gates(&t);
        for i in 0..t.taps() {
            for s in 0..1u64 << t.layout.widths[i] {
                let key = probe_key(&t.layout, i, s);
                prop_assert_eq!(extract_constant_sat(&net, i, &key).unwrap(), t.mux_tables[i][s as usize]);
            }
        }
    }
}
