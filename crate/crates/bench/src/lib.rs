// SPDX-License-Identifier: Apache-2.0

//! Inputs shared by the benchmarks.

use conelrt::geometry::ConstraintSet;
use conelrt::rng::{fill_standard_normal, replication_rng};
use conelrt::Result;

/// A standard Gaussian vector of length `n`, fixed by `seed`.
pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, 0);
    let mut y = vec![0.0; n];
    fill_standard_normal(&mut rng, &mut y);
    y
}

/// The benchmarked sets at dimension `n`, with display names.
pub fn sets(n: usize) -> Result<Vec<(&'static str, ConstraintSet)>> {
    let p = (n / 4).max(1);
    let design = nalgebra::DMatrix::from_fn(n, p, |i, j| {
        let t = (i as f64 + 1.0) / n as f64;
        (std::f64::consts::PI * (j as f64 + 1.0) * t).sin()
    });
    Ok(vec![
        ("orthant", ConstraintSet::orthant(n)?),
        ("monotone", ConstraintSet::monotone(n)?),
        ("convex", ConstraintSet::kmonotone(n, 1)?),
        ("circular", ConstraintSet::circular(n, std::f64::consts::FRAC_PI_6)?),
        ("product-circular", ConstraintSet::product_circular(n, std::f64::consts::FRAC_PI_6)?),
        ("poly2", ConstraintSet::poly_subspace(n, 2)?),
        ("l1image", ConstraintSet::l1_image(design, 1.0)?),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_fixed_and_sets_build() {
        assert_eq!(gaussian(5, 1), gaussian(5, 1));
        for (name, set) in sets(64).unwrap() {
            let y = gaussian(64, 2);
            assert!(set.project(&y).is_ok(), "{name}");
        }
    }
}
