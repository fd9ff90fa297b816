// SPDX-License-Identifier: Apache-2.0

//! Independent numerical oracles shared by unit tests.

use crate::special::normal_pdf;

/// `E g(ξ)` for standard normal `ξ` by composite Simpson on [-12, 12].
pub fn gauss_expect(g: impl Fn(f64) -> f64) -> f64 {
    let steps = 40_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / steps as f64;
    let mut total = 0.0;
    for k in 0..=steps {
        let z = a + k as f64 * h;
        let w = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * g(z) * normal_pdf(z);
    }
    total * h / 3.0
}

pub fn within(value: f64, target: f64, se: f64) -> bool {
    (value - target).abs() <= 3.0 * se + 1e-12
}
