//! Decoy assignment.
//!
//! Every quantized coefficient is hidden among decoys that
//!
//! * share its sign (zero counts as positive),
//! * fit in `mbw` magnitude bits,
//! * lie strictly outside the coefficient's quantized LP bounds, and
//! * are pairwise distinct.
//!
//! Key bits are handed out in rounds. In round `r` each coefficient, visited
//! in index order, receives `2^r` new decoys and consumes one key bit; the
//! assignment stops the moment `p` key bits are used. After `r` visits a
//! coefficient therefore has `2^r − 1` decoys and a key slice of `r` bits.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bits::{bit_width, is_nonnegative, magnitude_hamming, unique_hub};
use crate::error::{Error, Result};
use crate::filter_design::QuantizedFilter;
use crate::seeded_rng;

/// Decoy selection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DsmKind {
    /// Decoys at minimal Hamming distance from the coefficient.
    #[serde(rename = "HD")]
    Hd,
    /// Uniformly random decoys of similar bit-width.
    #[serde(rename = "RD")]
    Rd,
    /// `Hd` for the first single decoy of a coefficient, `Rd` afterwards.
    #[serde(rename = "HDRD")]
    HdRd,
}

impl DsmKind {
    pub const ALL: [DsmKind; 3] = [DsmKind::Hd, DsmKind::Rd, DsmKind::HdRd];

    pub fn name(self) -> &'static str {
        match self {
            DsmKind::Hd => "HD",
            DsmKind::Rd => "RD",
            DsmKind::HdRd => "HDRD",
        }
    }
}

impl std::str::FromStr for DsmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hd" => Ok(DsmKind::Hd),
            "rd" => Ok(DsmKind::Rd),
            "hdrd" => Ok(DsmKind::HdRd),
            other => Err(Error::Parse(format!("unknown decoy selection method {other:?}"))),
        }
    }
}

impl std::fmt::Display for DsmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The admissible decoy values for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateSet {
    pub value: i64,
    pub lower: i64,
    pub upper: i64,
    pub mbw: u32,
}

impl CandidateSet {
    pub fn max_magnitude(&self) -> i64 {
        (1i64 << self.mbw) - 1
    }

    pub fn contains(&self, v: i64) -> bool {
        let same_sign = if is_nonnegative(self.value) { v >= 1 } else { v <= -1 };
        same_sign && v.abs() <= self.max_magnitude() && (v < self.lower || v > self.upper) && v != self.value
    }

    /// Candidates in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        let max = self.max_magnitude();
        let range = if is_nonnegative(self.value) { 1..=max } else { -max..=-1 };
        range.filter(move |&v| self.contains(v))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }
}

/// Candidates for coefficient `value` with quantized bounds `[lower, upper]`.
pub fn candidate_set(value: i64, lower: i64, upper: i64, mbw: u32) -> Result<CandidateSet> {
    let set = CandidateSet { value, lower, upper, mbw };
    if set.is_empty() {
        return Err(Error::EmptyCandidateSet { value, lower, upper, mbw });
    }
    Ok(set)
}

/// Bit-widths an `Rd` decoy may take: within one of the coefficient's own.
pub fn rd_width_window(value: i64, mbw: u32) -> (u32, u32) {
    let w = bit_width(value.unsigned_abs());
    (w.saturating_sub(1).max(1), (w + 1).min(mbw))
}

fn rd_slice(set: &CandidateSet, available: &[i64]) -> Vec<i64> {
    let (lo, hi) = rd_width_window(set.value, set.mbw);
    available.iter().copied().filter(|v| (lo..=hi).contains(&bit_width(v.unsigned_abs()))).collect()
}

/// The method that actually picks the next `nod` decoys.
fn effective_method(dsm: DsmKind, existing: usize, nod: usize) -> DsmKind {
    match dsm {
        DsmKind::HdRd if existing == 0 && nod == 1 => DsmKind::Hd,
        DsmKind::HdRd => DsmKind::Rd,
        other => other,
    }
}

/// Appends `nod` new decoys for one coefficient to `existing`.
pub fn assign_decoy_single<R: Rng>(
    nod: usize,
    set: &CandidateSet,
    existing: &mut Vec<i64>,
    dsm: DsmKind,
    rng: &mut R,
) -> Result<()> {
    assert!(nod >= 1);
    if set.is_empty() {
        return Err(Error::EmptyCandidateSet { value: set.value, lower: set.lower, upper: set.upper, mbw: set.mbw });
    }
    let taken: BTreeSet<i64> = existing.iter().copied().collect();
    let available: Vec<i64> = set.iter().filter(|v| !taken.contains(v)).collect();
    if available.len() < nod {
        return Err(Error::InsufficientCandidates { value: set.value, needed: nod, available: available.len() });
    }
    match effective_method(dsm, existing.len(), nod) {
        DsmKind::Hd => existing.extend(pick_min_hamming(set.value, &available, nod, rng)),
        _ => {
            let slice = rd_slice(set, &available);
            let pool = if slice.len() >= nod { slice } else { available };
            existing.extend(pool.choose_multiple(rng, nod).copied());
        }
    }
    Ok(())
}

/// Lowest-distance candidates first; ties inside the last needed distance
/// class are broken uniformly at random.
fn pick_min_hamming<R: Rng>(value: i64, available: &[i64], nod: usize, rng: &mut R) -> Vec<i64> {
    let mut by_distance: Vec<(u32, i64)> = available.iter().map(|&v| (magnitude_hamming(v, value), v)).collect();
    by_distance.sort_unstable();
    let mut picked = Vec::with_capacity(nod);
    let mut start = 0;
    while picked.len() < nod {
        let d = by_distance[start].0;
        let end = start + by_distance[start..].iter().take_while(|(dd, _)| *dd == d).count();
        let class: Vec<i64> = by_distance[start..end].iter().map(|(_, v)| *v).collect();
        let need = nod - picked.len();
        if class.len() <= need {
            let mut class = class;
            class.shuffle(rng);
            picked.extend(class);
        } else {
            picked.extend(class.choose_multiple(rng, need).copied());
        }
        start = end;
    }
    picked
}

/// One coefficient visit of the assignment loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub round: u32,
    pub index: usize,
    /// Decoys added on this visit, `2^round`.
    pub decoys: usize,
}

/// The visit sequence for `n` coefficients and `p` key bits: rounds in
/// order, coefficients in index order within a round, one key bit each.
pub fn visit_schedule(n: usize, p: usize) -> Vec<Visit> {
    let mut visits = Vec::with_capacity(p);
    let mut round = 0u32;
    'rounds: while visits.len() < p {
        for index in 0..n {
            visits.push(Visit { round, index, decoys: 1usize << round });
            if visits.len() == p {
                break 'rounds;
            }
        }
        round += 1;
    }
    visits
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyAssignment {
    pub dsm: DsmKind,
    pub seed: u64,
    pub p: usize,
    pub nd: Vec<usize>,
    #[serde(rename = "D")]
    pub decoys: Vec<Vec<i64>>,
}

impl DecoyAssignment {
    /// Key bits consumed by coefficient `i`: `log2(nd_i + 1)`.
    pub fn key_width(&self, i: usize) -> u32 {
        (self.nd[i] + 1).trailing_zeros()
    }

    /// Checks every structural invariant against the filter it protects.
    pub fn validate(&self, qf: &QuantizedFilter) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentAssignment(m));
        if self.nd.len() != qf.taps() || self.decoys.len() != qf.taps() {
            return bad("length differs from the filter".into());
        }
        let mut bits = 0usize;
        for i in 0..qf.taps() {
            let (nd, d, h) = (self.nd[i], &self.decoys[i], qf.coeffs[i]);
            if !(nd + 1).is_power_of_two() || d.len() != nd {
                return bad(format!("coefficient {i} has {nd} decoys"));
            }
            bits += self.key_width(i) as usize;
            let set = CandidateSet { value: h, lower: qf.bounds_l[i], upper: qf.bounds_u[i], mbw: qf.mbw };
            let unique: BTreeSet<i64> = d.iter().copied().collect();
            if unique.len() != d.len() {
                return bad(format!("coefficient {i} has repeated decoys"));
            }
            if let Some(v) = d.iter().find(|&&v| !set.contains(v)) {
                return bad(format!("decoy {v} of coefficient {i} is not an admissible candidate"));
            }
        }
        if bits != self.p {
            return bad(format!("key widths sum to {bits}, expected {}", self.p));
        }
        Ok(())
    }
}

/// Assigns decoys to every coefficient of `qf` using `p` key bits.
pub fn assign_decoys(qf: &QuantizedFilter, p: usize, dsm: DsmKind, seed: u64) -> Result<DecoyAssignment> {
    let n = qf.taps();
    if p < n {
        return Err(Error::TooFewKeyBits { p, n });
    }
    let mut rng = seeded_rng(seed);
    let sets: Vec<CandidateSet> =
        (0..n).map(|i| candidate_set(qf.coeffs[i], qf.bounds_l[i], qf.bounds_u[i], qf.mbw)).collect::<Result<_>>()?;
    let mut decoys: Vec<Vec<i64>> = vec![Vec::new(); n];
    for visit in visit_schedule(n, p) {
        assign_decoy_single(visit.decoys, &sets[visit.index], &mut decoys[visit.index], dsm, &mut rng)?;
    }
    Ok(DecoyAssignment { dsm, seed, p, nd: decoys.iter().map(Vec::len).collect(), decoys })
}

/// Goodness of fit of sampled decoy values against a uniform distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityTest {
    pub support: usize,
    pub samples: usize,
    pub chi_square: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDistribution {
    pub index: usize,
    pub value: i64,
    pub nd: usize,
    /// Fraction of trials in which the coefficient was the unique element
    /// at Hamming distance ≤ 1 from every other element of its set.
    pub hub_frequency: f64,
    /// Uniformity of the randomly chosen decoys, when the method picks any.
    pub uniformity: Option<UniformityTest>,
    /// A coefficient with a single decoy: both elements are interchangeable.
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistinguishabilityReport {
    pub dsm: DsmKind,
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    pub coefficients: Vec<CoefficientDistribution>,
}

/// Repeats the decoy selection of every coefficient `trials` times with
/// fresh seeds and summarizes how distinguishable the coefficient is.
pub fn check_indistinguishability(
    dsm: DsmKind,
    qf: &QuantizedFilter,
    p: usize,
    trials: usize,
    seed: u64,
) -> Result<IndistinguishabilityReport> {
    let n = qf.taps();
    if p < n {
        return Err(Error::TooFewKeyBits { p, n });
    }
    let schedule = visit_schedule(n, p);
    let mut coefficients = Vec::with_capacity(n);
    for i in 0..n {
        let visits: Vec<usize> = schedule.iter().filter(|v| v.index == i).map(|v| v.decoys).collect();
        let nd: usize = visits.iter().sum();
        let value = qf.coeffs[i];
        let set = candidate_set(value, qf.bounds_l[i], qf.bounds_u[i], qf.mbw)?;
        if nd == 1 {
            coefficients.push(CoefficientDistribution {
                index: i,
                value,
                nd,
                hub_frequency: 0.0,
                uniformity: None,
                symmetric: true,
            });
            continue;
        }
        let all: Vec<i64> = set.iter().collect();
        let slice = rd_slice(&set, &all);
        let support = if slice.len() >= nd { slice } else { all };
        let mut counts = std::collections::BTreeMap::<i64, usize>::new();
        let mut random_draws = 0usize;
        let mut hubs = 0usize;
        for t in 0..trials {
            let mut rng = seeded_rng(seed.wrapping_add(t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut decoys = Vec::new();
            for &nod in &visits {
                let method = effective_method(dsm, decoys.len(), nod);
                let before = decoys.len();
                assign_decoy_single(nod, &set, &mut decoys, dsm, &mut rng)?;
                if method == DsmKind::Rd {
                    for &d in &decoys[before..] {
                        *counts.entry(d).or_default() += 1;
                        random_draws += 1;
                    }
                }
            }
            let mut members = vec![value];
            members.extend(&decoys);
            if unique_hub(&members, 1) == Some(0) {
                hubs += 1;
            }
        }
        let uniformity = (random_draws > 0).then(|| {
            let expected = random_draws as f64 / support.len() as f64;
            let chi_square: f64 = support
                .iter()
                .map(|v| {
                    let o = *counts.get(v).unwrap_or(&0) as f64;
                    (o - expected).powi(2) / expected
                })
                .sum();
            let dof = (support.len() - 1).max(1) as f64;
            let p_value = 1.0 - ChiSquared::new(dof).map(|d| d.cdf(chi_square)).unwrap_or(0.0);
            UniformityTest { support: support.len(), samples: random_draws, chi_square, p_value }
        });
        coefficients.push(CoefficientDistribution {
            index: i,
            value,
            nd,
            hub_frequency: hubs as f64 / trials as f64,
            uniformity,
            symmetric: false,
        });
    }
    Ok(IndistinguishabilityReport { dsm, p, trials, seed, coefficients })
}
