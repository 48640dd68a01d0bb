//! Decoy-selection-method classification from recovered constant sets.
//!
//! A design built with minimal-Hamming-distance decoys leaves a "hub" in
//! every multi-decoy set: the coefficient sits at distance ≤ τ from each
//! decoy while the decoys are farther apart from each other. The score is
//! the fraction of multi-element sets showing that pattern.

use serde::{Deserialize, Serialize};

use crate::attack::extract::RecoveredConstantSets;
use crate::bits::{bit_width, magnitude_hamming, unique_hub};
use crate::error::{Error, Result};

pub const DEFAULT_TAU: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DsmLabel {
    #[serde(rename = "HD-like")]
    HdLike,
    #[serde(rename = "non-HD")]
    NonHd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmFeatures {
    /// Sets with more than two constants.
    pub multi_sets: usize,
    pub hub_sets: usize,
    pub hub_fraction: f64,
    /// Two-element sets and the fraction of them at distance ≤ τ.
    pub pair_sets: usize,
    pub pair_close_fraction: f64,
    /// Mean, over multi-element sets, of the standard deviation of the
    /// members' magnitude bit-widths.
    pub width_dispersion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmVerdict {
    pub label: DsmLabel,
    pub score: f64,
    pub features: DsmFeatures,
}

/// Index of the hub of `set` if it has one and the remaining members are
/// pairwise farther than `tau` apart.
pub fn strict_hub(set: &[i64], tau: u32) -> Option<usize> {
    let c = unique_hub(set, tau)?;
    let rest: Vec<i64> = set.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect();
    let separated = rest.iter().enumerate().all(|(a, &u)| rest[a + 1..].iter().all(|&v| magnitude_hamming(u, v) > tau));
    separated.then_some(c)
}

pub fn features(r: &RecoveredConstantSets, tau: u32) -> DsmFeatures {
    let multi: Vec<&Vec<i64>> = r.sets.iter().filter(|s| s.len() > 2).collect();
    let pairs: Vec<&Vec<i64>> = r.sets.iter().filter(|s| s.len() == 2).collect();
    let hub_sets = multi.iter().filter(|s| strict_hub(s, tau).is_some()).count();
    let close = pairs.iter().filter(|s| magnitude_hamming(s[0], s[1]) <= tau).count();
    let dispersion = |s: &Vec<i64>| {
        let w: Vec<f64> = s.iter().map(|v| bit_width(v.unsigned_abs()) as f64).collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt()
    };
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    DsmFeatures {
        multi_sets: multi.len(),
        hub_sets,
        hub_fraction: ratio(hub_sets, multi.len()),
        pair_sets: pairs.len(),
        pair_close_fraction: ratio(close, pairs.len()),
        width_dispersion: if multi.is_empty() {
            0.0
        } else {
            multi.iter().map(|s| dispersion(s)).sum::<f64>() / multi.len() as f64
        },
    }
}

/// Threshold rule on the hub fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsmClassifier {
    pub tau: u32,
    pub threshold: f64,
}

impl Default for DsmClassifier {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, threshold: 0.5 }
    }
}

impl DsmClassifier {
    pub fn classify(&self, r: &RecoveredConstantSets) -> Result<DsmVerdict> {
        let features = features(r, self.tau);
        if features.multi_sets == 0 {
            return Err(Error::Inconclusive);
        }
        let score = features.hub_fraction;
        let label = if score >= self.threshold { DsmLabel::HdLike } else { DsmLabel::NonHd };
        Ok(DsmVerdict { label, score, features })
    }

    /// Picks the threshold with the best accuracy on labelled examples
    /// (`true` = built with minimal-distance decoys); ties go to the
    /// midpoint of the widest gap between observed scores.
    pub fn calibrate(corpus: &[(RecoveredConstantSets, bool)], tau: u32) -> Self {
        let mut scored: Vec<(f64, bool)> = corpus
            .iter()
            .filter_map(|(r, hd)| {
                let f = features(r, tau);
                (f.multi_sets > 0).then_some((f.hub_fraction, *hd))
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cuts: Vec<f64> = vec![0.0];
        cuts.extend(scored.windows(2).map(|w| (w[0].0 + w[1].0) / 2.0));
        cuts.push(1.0 + f64::EPSILON);
        let accuracy = |t: f64| scored.iter().filter(|&&(s, hd)| (s >= t) == hd).count();
        let gap = |t: f64| {
            let below = scored.iter().map(|s| s.0).filter(|&s| s < t).fold(f64::MIN, f64::max);
            let above = scored.iter().map(|s| s.0).filter(|&s| s >= t).fold(f64::MAX, f64::min);
            above - below
        };
        let best = cuts
            .iter()
            .copied()
            .max_by(|&a, &b| accuracy(a).cmp(&accuracy(b)).then(gap(a).total_cmp(&gap(b))))
            .unwrap_or(0.5);
        Self { tau, threshold: best }
    }
}

/// Classification with the default rule.
pub fn classify_dsm(r: &RecoveredConstantSets) -> Result<DsmVerdict> {
    DsmClassifier::default().classify(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(s: Vec<Vec<i64>>) -> RecoveredConstantSets {
        RecoveredConstantSets { sets: s, cbw: 5 }
    }

    #[test]
    fn strict_hub_examples() {
        assert_eq!(strict_hub(&[6, 7, 5, 3], 1), Some(1));
        // At τ = 2, 0 is the only hub but 1 and 3 are close to each other.
        assert_eq!(unique_hub(&[0, 1, 3, 12], 2), Some(0));
        assert_eq!(strict_hub(&[0, 1, 3, 12], 2), None);
    }

    #[test]
    fn hub_pattern_is_hd_like() {
        let v = classify_dsm(&sets(vec![vec![6, 7, 5, 3], vec![9, 10], vec![-14, -15, -13, -11]])).unwrap();
        assert_eq!(v.label, DsmLabel::HdLike);
        assert_eq!(v.score, 1.0);
        assert_eq!(v.features.pair_sets, 1);
    }

    #[test]
    fn pairs_only_is_inconclusive() {
        assert!(matches!(classify_dsm(&sets(vec![vec![1, 2], vec![3, 4]])), Err(Error::Inconclusive)));
    }

    #[test]
    fn calibration_separates() {
        let hd = sets(vec![vec![6, 7, 5, 3]]);
        let rd = sets(vec![vec![6, 17, 29, 3]]);
        let c = DsmClassifier::calibrate(&[(hd.clone(), true), (rd.clone(), false)], 1);
        assert!(c.threshold > 0.0 && c.threshold <= 1.0);
        assert_eq!(c.classify(&hd).unwrap().label, DsmLabel::HdLike);
        assert_eq!(c.classify(&rd).unwrap().label, DsmLabel::NonHd);
    }
}
