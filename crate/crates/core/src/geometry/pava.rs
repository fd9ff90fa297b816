// SPDX-License-Identifier: Apache-2.0

//! Pool-adjacent-violators for the monotone cone.

use std::ops::Range;

/// Isotonic fit of `y` (nondecreasing, unit weights) with its level sets.
///
/// Adjacent blocks are pooled whenever the left mean is `>=` the right
/// mean, so returned block values are strictly increasing.
pub fn pava(y: &[f64]) -> (Vec<f64>, Vec<Range<usize>>) {
    // (sum, count) per block, with block start offsets kept implicitly.
    let mut sums: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        let mut s = v;
        let mut c = 1usize;
        while let (Some(&ps), Some(&pc)) = (sums.last(), counts.last()) {
            // ps/pc >= s/c, cross-multiplied to avoid a division
            if ps * c as f64 >= s * pc as f64 {
                s += ps;
                c += pc;
                sums.pop();
                counts.pop();
            } else {
                break;
            }
        }
        sums.push(s);
        counts.push(c);
    }
    let mut fit = Vec::with_capacity(y.len());
    let mut blocks = Vec::with_capacity(sums.len());
    let mut start = 0;
    for (s, c) in sums.iter().zip(&counts) {
        let m = s / *c as f64;
        fit.extend(std::iter::repeat_n(m, *c));
        blocks.push(start..start + c);
        start += c;
    }
    (fit, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_monotone_is_fixed() {
        let (fit, blocks) = pava(&[1.0, 2.0, 3.0]);
        assert_eq!(fit, vec![1.0, 2.0, 3.0]);
        assert_eq!(blocks.len(), 3);
    }

    #[test]
    fn two_point_pooling() {
        let (fit, blocks) = pava(&[2.0, 1.0]);
        assert_eq!(fit, vec![1.5, 1.5]);
        assert_eq!(blocks, vec![0..2]);
    }

    #[test]
    fn three_point_single_block() {
        let (fit, blocks) = pava(&[3.0, 1.0, 2.0]);
        for v in fit {
            assert!((v - 2.0).abs() < 1e-15);
        }
        assert_eq!(blocks, vec![0..3]);
    }

    #[test]
    fn ties_are_pooled() {
        let (_, blocks) = pava(&[1.0, 1.0, 2.0]);
        assert_eq!(blocks, vec![0..2, 2..3]);
    }

    #[test]
    fn single_element() {
        let (fit, blocks) = pava(&[-4.0]);
        assert_eq!(fit, vec![-4.0]);
        assert_eq!(blocks, vec![0..1]);
    }
}
