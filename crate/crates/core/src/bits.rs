//! Small integer bit utilities shared by the decoy engine and the attacks.

/// Number of bits needed for the magnitude `v`; zero takes one bit.
pub fn bit_width(v: u64) -> u32 {
    if v == 0 {
        1
    } else {
        64 - v.leading_zeros()
    }
}

/// Hamming distance between the magnitudes of `a` and `b`.
///
/// Signs are ignored: constants compared this way always share a sign.
pub fn magnitude_hamming(a: i64, b: i64) -> u32 {
    (a.unsigned_abs() ^ b.unsigned_abs()).count_ones()
}

/// Zero counts as positive.
pub fn is_nonnegative(v: i64) -> bool {
    v >= 0
}

/// Two's-complement encoding of `v` in the low `width` bits.
pub fn to_twos(v: i64, width: u32) -> u64 {
    if width >= 64 {
        v as u64
    } else {
        (v as u64) & ((1u64 << width) - 1)
    }
}

/// Sign-extends the low `width` bits of `bits`.
pub fn from_twos(bits: u64, width: u32) -> i64 {
    if width == 0 {
        return 0;
    }
    if width >= 64 {
        return bits as i64;
    }
    let shift = 64 - width;
    ((bits << shift) as i64) >> shift
}

/// `⌈log2 n⌉`, with `ceil_log2(1) == 0`.
pub fn ceil_log2(n: usize) -> u32 {
    assert!(n > 0);
    usize::BITS - (n - 1).leading_zeros()
}

/// Index of the only element whose magnitude Hamming distance to every other
/// element is at most `tau`, if exactly one such element exists.
pub fn unique_hub(set: &[i64], tau: u32) -> Option<usize> {
    if set.len() < 2 {
        return None;
    }
    let is_hub = |c: usize| set.iter().enumerate().all(|(j, &r)| j == c || magnitude_hamming(set[c], r) <= tau);
    let mut hubs = (0..set.len()).filter(|&c| is_hub(c));
    match (hubs.next(), hubs.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(bit_width(0), 1);
        assert_eq!(bit_width(1), 1);
        assert_eq!(bit_width(7), 3);
        assert_eq!(bit_width(8), 4);
        assert_eq!(bit_width(16384), 15);
    }

    #[test]
    fn logs() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(29), 5);
        assert_eq!(ceil_log2(32), 5);
        assert_eq!(ceil_log2(105), 7);
    }

    #[test]
    fn twos_complement_round_trip() {
        for w in 1..12 {
            let lo = -(1i64 << (w - 1));
            let hi = (1i64 << (w - 1)) - 1;
            for v in lo..=hi {
                assert_eq!(from_twos(to_twos(v, w), w), v);
            }
        }
        assert_eq!(to_twos(-1, 4), 0b1111);
    }

    #[test]
    fn hubs() {
        assert_eq!(unique_hub(&[6, 7, 5, 3], 1), Some(1));
        assert_eq!(unique_hub(&[7, 6], 1), None);
        assert_eq!(unique_hub(&[7, 100, 3000, 12], 1), None);
    }

    #[test]
    fn hamming_on_magnitudes() {
        assert_eq!(magnitude_hamming(7, 6), 1);
        assert_eq!(magnitude_hamming(7, 3), 1);
        assert_eq!(magnitude_hamming(-7, -5), 1);
        assert_eq!(magnitude_hamming(6, 5), 2);
    }
}
