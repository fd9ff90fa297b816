// SPDX-License-Identifier: Apache-2.0

//! Circular (ice-cream) cone `{v : v_1 >= ||v|| cos(alpha)}`.

/// Projects `x` onto the circular cone with half-angle `alpha` around `e_1`.
pub fn project_circular(x: &[f64], alpha: f64) -> Vec<f64> {
    let t = x[0];
    let s = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let (sin, cos) = alpha.sin_cos();
    if s <= t * alpha.tan() {
        return x.to_vec();
    }
    if s * sin <= -t * cos {
        // inside the polar cone
        return vec![0.0; x.len()];
    }
    let radius = t * cos + s * sin;
    let mut out = Vec::with_capacity(x.len());
    out.push(radius * cos);
    let scale = radius * sin / s;
    out.extend(x[1..].iter().map(|v| v * scale));
    out
}

/// Amount by which `v` fails the defining inequality.
pub fn circular_violation(v: &[f64], alpha: f64) -> f64 {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (norm * alpha.cos() - v[0]).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn quarter_angle_example() {
        let p = project_circular(&[0.0, 1.0], FRAC_PI_4);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_cases() {
        assert_eq!(project_circular(&[2.0, 1.0, 0.5], 1.0), vec![2.0, 1.0, 0.5]);
        assert_eq!(project_circular(&[-2.0, 0.1], 0.5), vec![0.0, 0.0]);
        let p = project_circular(&[1.0, 3.0, 4.0], 0.3);
        assert!(circular_violation(&p, 0.3) < 1e-12);
        // the residual is orthogonal to the projection
        let r: Vec<f64> = [1.0, 3.0, 4.0].iter().zip(&p).map(|(a, b)| a - b).collect();
        let ip: f64 = r.iter().zip(&p).map(|(a, b)| a * b).sum();
        assert!(ip.abs() < 1e-12);
    }

    /// Dense-grid brute force over the 2-d cone, parameterized by angle and radius.
    #[test]
    fn matches_grid_search_in_two_dimensions() {
        let alpha = 0.6;
        for &(a, b) in &[(0.0, 1.0), (1.0, 2.0), (-0.3, 1.5), (0.2, -0.9), (3.0, 0.1)] {
            let p = project_circular(&[a, b], alpha);
            let mut best = f64::INFINITY;
            let steps = 800;
            for i in 0..=steps {
                let phi = -alpha + 2.0 * alpha * i as f64 / steps as f64;
                for j in 0..=steps {
                    let r = 4.0 * j as f64 / steps as f64;
                    let (u, v) = (r * phi.cos(), r * phi.sin());
                    best = best.min((a - u).powi(2) + (b - v).powi(2));
                }
            }
            let got = (a - p[0]).powi(2) + (b - p[1]).powi(2);
            assert!(got <= best + 1e-9, "({a},{b}) got {got} grid {best}");
            assert!(best - got < 5e-4);
        }
    }
}
