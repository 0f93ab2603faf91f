//! Exhaustive subset scans.
//!
//! Every nonempty subset `A` of a ground set is visited and its slack
//! `e^ε Q(A) + δ - P(A)` evaluated. Subset sums come from two half tables
//! (low and high bits of the mask), so each sum is built from at most
//! `len` additions and stays accurate to a few ulps, unlike a running
//! Gray-code sum.

/// Minimum slack found by a scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ScanResult {
    pub slack: f64,
    /// Bit `i` set means ground element `i` is in the minimising subset.
    pub mask: u64,
}

fn half_table(values: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1usize << values.len()];
    for mask in 1..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + values[low];
    }
    sums
}

/// Scan every nonempty subset of the ground set (and skip the full set when
/// `exclude_full`). `p` and `q` are the point masses of `X_d` and `X_{d'}`.
/// Returns `None` when no subset qualifies.
pub(crate) fn scan_subsets(
    p: &[f64],
    q: &[f64],
    exp_epsilon: f64,
    delta: f64,
    exclude_full: bool,
) -> Option<ScanResult> {
    debug_assert_eq!(p.len(), q.len());
    let len = p.len();
    assert!(len < 64, "subset scan over {len} elements");
    let lo_bits = len / 2;
    let (p_lo, p_hi) = (half_table(&p[..lo_bits]), half_table(&p[lo_bits..]));
    let (q_lo, q_hi) = (half_table(&q[..lo_bits]), half_table(&q[lo_bits..]));
    let full_lo = p_lo.len() - 1;
    let full_hi = p_hi.len() - 1;

    let mut best = f64::INFINITY;
    let mut best_mask: Option<u64> = None;
    for hi in 0..p_hi.len() {
        let (ph, qh) = (p_hi[hi], q_hi[hi]);
        let start = usize::from(hi == 0);
        for lo in start..p_lo.len() {
            if exclude_full && hi == full_hi && lo == full_lo {
                continue;
            }
            let slack = exp_epsilon * (qh + q_lo[lo]) + delta - (ph + p_lo[lo]);
            if slack < best {
                best = slack;
                best_mask = Some(((hi as u64) << lo_bits) | lo as u64);
            }
        }
    }
    best_mask.map(|mask| ScanResult { slack: best, mask })
}

/// Number of subsets visited by [`scan_subsets`].
pub(crate) fn scan_count(len: usize, exclude_full: bool) -> u128 {
    (1u128 << len) - 1 - u128::from(exclude_full)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: recompute every subset sum from scratch.
    fn naive(p: &[f64], q: &[f64], e: f64, delta: f64, exclude_full: bool) -> Option<f64> {
        let len = p.len();
        let full = (1u64 << len) - 1;
        (1..=full)
            .filter(|&m| !(exclude_full && m == full))
            .map(|m| {
                let (mut pa, mut qa) = (0.0, 0.0);
                for i in 0..len {
                    if m >> i & 1 == 1 {
                        pa += p[i];
                        qa += q[i];
                    }
                }
                e * qa + delta - pa
            })
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    #[test]
    fn matches_naive_scan() {
        let p = [0.3, 0.05, 0.2, 0.15, 0.1, 0.2];
        let q = [0.1, 0.25, 0.1, 0.3, 0.1, 0.15];
        for &(e, delta) in &[(1.0, 0.0), (1.5, 0.01), (2.0, 0.3)] {
            for &ex in &[true, false] {
                let got = scan_subsets(&p, &q, e, delta, ex).unwrap();
                let want = naive(&p, &q, e, delta, ex).unwrap();
                assert!((got.slack - want).abs() < 1e-15);
                // The reported mask reproduces the slack.
                let (mut pa, mut qa) = (0.0, 0.0);
                for i in 0..p.len() {
                    if got.mask >> i & 1 == 1 {
                        pa += p[i];
                        qa += q[i];
                    }
                }
                assert!((e * qa + delta - pa - got.slack).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn singleton_and_pair_ground_sets() {
        let r = scan_subsets(&[0.7], &[0.2], 1.0, 0.0, false).unwrap();
        assert!((r.slack - (0.2 - 0.7)).abs() < 1e-15);
        assert_eq!(r.mask, 1);
        assert!(scan_subsets(&[1.0], &[1.0], 1.0, 0.0, true).is_none());
        let r = scan_subsets(&[0.9, 0.1], &[0.4, 0.6], 1.0, 0.0, true).unwrap();
        assert_eq!(r.mask, 0b01);
        assert_eq!(scan_count(2, true), 2);
        assert_eq!(scan_count(3, false), 7);
    }
}
