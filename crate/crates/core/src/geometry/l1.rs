// SPDX-License-Identifier: Apache-2.0

//! Euclidean projection onto the l1 ball by sort-and-threshold.

/// Soft-threshold level `tau` such that shrinking `v` by `tau` lands on the
/// sphere `||.||_1 = radius`; zero when `v` is already inside the ball.
pub fn l1_threshold(v: &[f64], radius: f64) -> f64 {
    let norm1: f64 = v.iter().map(|x| x.abs()).sum();
    if norm1 <= radius {
        return 0.0;
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

pub fn soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| x.signum() * (x.abs() - tau).max(0.0))
        .collect()
}

/// `argmin ||v - theta||^2` subject to `||theta||_1 <= radius`.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "l1 radius must be positive");
    let tau = l1_threshold(v, radius);
    if tau == 0.0 {
        v.to_vec()
    } else {
        soft_threshold(v, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_point_is_unchanged() {
        assert_eq!(project_l1_ball(&[0.5, -0.3], 1.0), vec![0.5, -0.3]);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(l1_threshold(&[3.0, 1.0], 2.0), 1.0);
        assert_eq!(project_l1_ball(&[3.0, 1.0], 2.0), vec![2.0, 0.0]);
        assert_eq!(project_l1_ball(&[2.0, 2.0], 2.0), vec![1.0, 1.0]);
    }

    #[test]
    fn signs_are_preserved() {
        let p = project_l1_ball(&[-3.0, 1.0, 0.5], 2.0);
        assert!((p[0] + 2.0).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[2], 0.0);
    }
}
