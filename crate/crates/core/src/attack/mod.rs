//! Attacks on obfuscated designs: constant extraction, decoy-method
//! classification, hub-based coefficient recovery and key-space accounting.
//!
//! Nothing here reads a secret key or decoy assignment; ground truth enters
//! only through the optional argument of [`compile_report`].

pub mod classify;
pub mod extract;
pub mod sat;

use serde::{Deserialize, Serialize};

pub use classify::{classify_dsm, DsmClassifier, DsmLabel, DsmVerdict};
pub use extract::{extract_bit, extract_constants, infer_key_layout, RecoveredConstantSets};

use crate::bits::{is_nonnegative, magnitude_hamming, unique_hub};

/// Whether minimal-distance selection could have produced the rest of `set`
/// as decoys of `set[c]`. The widest admissible bound interval is the gap
/// between the nearest other members on either side; every same-sign
/// nonzero value of at most `mbw` bits that is strictly closer to `set[c]`
/// than the farthest decoy must fall inside that gap, or selection would
/// have preferred it.
pub fn hd_consistent(set: &[i64], c: usize, mbw: u32) -> bool {
    let h = set[c];
    let decoys: Vec<i64> = set.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect();
    if decoys.iter().any(|&d| is_nonnegative(d) != is_nonnegative(h)) {
        return false;
    }
    let lower = decoys.iter().filter(|&&d| d < h).max().map_or(i64::MIN, |d| d + 1);
    let upper = decoys.iter().filter(|&&d| d > h).min().map_or(i64::MAX, |d| d - 1);
    let farthest = decoys.iter().map(|&d| magnitude_hamming(d, h)).max().unwrap_or(0);
    let sign = if is_nonnegative(h) { 1 } else { -1 };
    let limit = (1u64 << mbw) - 1;
    (1..=limit).all(|mag| {
        let v = sign * mag as i64;
        magnitude_hamming(v, h) >= farthest || v == h || (lower..=upper).contains(&v) || decoys.contains(&v)
    })
}

/// Coefficient hypothesis for one recovered set. The constant at distance
/// ≤ `tau` from all others wins if it is the only one; failing that, the
/// only member within `tau + 1` of all others that is consistent with
/// minimal-distance selection at width `mbw` (see [`hd_consistent`]). Two-element sets are always undecided.
pub fn doc_hd(set: &[i64], tau: u32, mbw: u32) -> Option<i64> {
    if set.len() <= 2 {
        return None;
    }
    if let Some(c) = unique_hub(set, tau) {
        return Some(set[c]);
    }
    let near_hub = |c: usize| set.iter().all(|&r| magnitude_hamming(set[c], r) <= tau + 1);
    let mut consistent = (0..set.len()).filter(|&c| near_hub(c) && hd_consistent(set, c, mbw));
    match (consistent.next(), consistent.next()) {
        (Some(c), None) => Some(set[c]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientVerdict {
    pub index: usize,
    pub candidates: usize,
    pub hypothesis: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Coefficients hidden among more than one decoy.
    pub vc: usize,
    /// Correctly determined coefficients; present only with ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdc: Option<usize>,
    /// log2 of the key combinations left after the resolved slices are fixed.
    pub apc_log2: u32,
    pub dsm_verdict: Option<DsmVerdict>,
    pub tau: u32,
    pub coefficients: Vec<CoefficientVerdict>,
}

/// Runs the hub rule on every set and tallies what was learned.
pub fn compile_report(
    r: &RecoveredConstantSets,
    verdict: Option<DsmVerdict>,
    tau: u32,
    ground_truth: Option<&[i64]>,
) -> RecoveryReport {
    let widths = r.widths();
    let p: u32 = widths.iter().sum();
    let coefficients: Vec<CoefficientVerdict> = r
        .sets
        .iter()
        .enumerate()
        .map(|(index, set)| {
            let hypothesis = doc_hd(set, tau, r.cbw - 1);
            CoefficientVerdict {
                index,
                candidates: set.len(),
                hypothesis,
                correct: ground_truth.and_then(|t| hypothesis.map(|h| h == t[index])),
            }
        })
        .collect();
    let resolved: u32 = coefficients.iter().filter(|c| c.hypothesis.is_some()).map(|c| widths[c.index]).sum();
    RecoveryReport {
        vc: r.sets.iter().filter(|s| s.len() > 2).count(),
        cdc: ground_truth.map(|_| coefficients.iter().filter(|c| c.correct == Some(true)).count()),
        apc_log2: p - resolved,
        dsm_verdict: verdict,
        tau,
        coefficients,
    }
}

/// Recovers the taps of an unprotected filter from its step response:
/// `h_0 = y(0)` and `h_i = y(i) - y(i-1)`.
pub fn impulse_attack<F: FnMut(&[i64]) -> Vec<i64>>(mut filter: F, taps: usize) -> Vec<i64> {
    let y = filter(&vec![1; taps]);
    (0..taps).map(|i| if i == 0 { y[0] } else { y[i] - y[i - 1] }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw::folded::reference_convolution;

    #[test]
    fn doc_hd_examples() {
        assert_eq!(doc_hd(&[6, 7, 5, 3], 1, 3), Some(7));
        assert_eq!(doc_hd(&[7, 6], 1, 3), None);
        assert_eq!(doc_hd(&[7, 100, 3000, 12], 1, 12), None);
    }

    #[test]
    fn consistency_resolves_missing_neighbour() {
        // Flipping bit 9 of 11 lands inside the bounds, so the third decoy
        // is two flips away and no element is a hub.
        let set = [-11, -1035, -2059, -1039];
        assert_eq!(unique_hub(&set, 1), None);
        assert!(hd_consistent(&set, 0, 12));
        assert!(!hd_consistent(&set, 1, 12));
        assert_eq!(doc_hd(&set, 1, 12), Some(-11));
    }

    #[test]
    fn report_counts() {
        let r = RecoveredConstantSets { sets: vec![vec![6, 7, 5, 3], vec![9, 10], vec![1, 30, 17, 12]], cbw: 6 };
        let rep = compile_report(&r, None, 1, Some(&[7, 9, 17]));
        assert_eq!(rep.vc, 2);
        assert_eq!(rep.cdc, Some(1));
        assert_eq!(rep.apc_log2, 5 - 2);
        let blind = compile_report(&r, None, 1, None);
        assert_eq!(blind.cdc, None);
        assert!(!serde_json::to_string(&blind).unwrap().contains("cdc"));
    }

    #[test]
    fn nothing_resolved_leaves_full_key_space() {
        let r = RecoveredConstantSets { sets: vec![vec![1, 2], vec![3, 4]], cbw: 4 };
        assert_eq!(compile_report(&r, None, 1, None).apc_log2, 2);
    }

    #[test]
    fn impulse_attack_examples() {
        let h = [3, -2, 5];
        assert_eq!(impulse_attack(|x| reference_convolution(&h, x), 3), h);
        assert_eq!(impulse_attack(|x| reference_convolution(&[0, 0], x), 2), vec![0, 0]);
    }
}
