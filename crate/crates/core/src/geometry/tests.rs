// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

use super::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

fn random_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    DMatrix::from_vec(n, p, standard_normal(&mut rng, n * p))
}

/// One instance of every tag in dimension `n` (n >= 5).
fn all_sets(n: usize) -> Vec<ConstraintSet> {
    let mut rng = Pcg64Mcg::seed_from_u64(n as u64);
    let raw = DMatrix::from_vec(n, 2, standard_normal(&mut rng, 2 * n));
    vec![
        ConstraintSet::span(raw).unwrap(),
        ConstraintSet::poly_subspace(n, 2).unwrap(),
        ConstraintSet::orthant(n).unwrap(),
        ConstraintSet::circular(n, 0.7).unwrap(),
        ConstraintSet::product_circular(n, 0.4).unwrap(),
        ConstraintSet::monotone(n).unwrap(),
        ConstraintSet::kmonotone(n, 1).unwrap(),
        ConstraintSet::kmonotone(n, 2).unwrap(),
        ConstraintSet::l1_image(random_design(n, 3, 7), 1.5).unwrap(),
        ConstraintSet::product(vec![
            ConstraintSet::orthant(2).unwrap(),
            ConstraintSet::monotone(n - 2).unwrap(),
        ])
        .unwrap(),
    ]
}

#[test]
fn projection_examples() {
    let o = ConstraintSet::orthant(3).unwrap();
    let r = o.project(&[1.0, -2.0, 3.0]).unwrap();
    assert_eq!(r.point, vec![1.0, 0.0, 3.0]);
    assert_eq!(r.face_dim, Some(2));

    let s = ConstraintSet::span(DMatrix::from_element(2, 1, 1.0)).unwrap();
    let r = s.project(&[1.0, 3.0]).unwrap();
    assert_close(&r.point, &[2.0, 2.0], 1e-12);
    assert_eq!(r.face_dim, Some(1));

    let c = ConstraintSet::circular(2, FRAC_PI_4).unwrap();
    let r = c.project(&[0.0, 1.0]).unwrap();
    assert_close(&r.point, &[0.5, 0.5], 1e-12);
    assert_eq!(r.face_dim, None);

    let m = ConstraintSet::monotone(3).unwrap();
    let r = m.project(&[3.0, 1.0, 2.0]).unwrap();
    assert_close(&r.point, &[2.0, 2.0, 2.0], 1e-12);
    assert_eq!(r.blocks, Some(vec![0..3]));
    assert_eq!(r.face_dim, Some(1));
}

#[test]
fn pava_examples() {
    let r = pava(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(r.point, vec![1.0, 2.0, 3.0]);
    assert_eq!(r.blocks.unwrap().len(), 3);
    let r = pava(&[2.0, 1.0]).unwrap();
    assert_eq!(r.point, vec![1.5, 1.5]);
    assert!(pava(&[]).is_err());
}

#[test]
fn jacobian_examples() {
    let o = ConstraintSet::orthant(3).unwrap();
    let j = jacobian(&o, &[1.0, -2.0, 3.0]).unwrap();
    assert_eq!(j.exactness, Exactness::ClosedForm);
    assert_eq!(j.entries, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 1.0])));

    let m = ConstraintSet::monotone(3).unwrap();
    let j = jacobian(&m, &[3.0, 1.0, 2.0]).unwrap();
    assert!(j.entries.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

    let s = ConstraintSet::span(DMatrix::from_element(2, 1, 1.0)).unwrap();
    let j = jacobian(&s, &[0.3, -4.0]).unwrap();
    assert!(j.entries.iter().all(|v| (v - 0.5).abs() < 1e-12));
}

#[test]
fn jacobian_reports_kinks() {
    let o = ConstraintSet::orthant(2).unwrap();
    assert!(matches!(
        jacobian(&o, &[1.0, 0.0]),
        Err(Error::Degenerate { coordinate: 1, .. })
    ));
    let m = ConstraintSet::monotone(2).unwrap();
    assert!(matches!(jacobian(&m, &[1.0, 1.0 + 1e-12]), Err(Error::Degenerate { .. })));
}

#[test]
fn moreau_examples() {
    let o = ConstraintSet::orthant(2).unwrap();
    let (p, q) = moreau_split(&o, &[1.0, -2.0]).unwrap();
    assert_eq!(p, vec![1.0, 0.0]);
    assert_eq!(q, vec![0.0, -2.0]);
    assert_eq!(dot(&p, &q), 0.0);

    let (_, q) = moreau_split(&o, &[1.0, 2.0]).unwrap();
    assert_eq!(q, vec![0.0, 0.0]);

    let c = ConstraintSet::circular(2, FRAC_PI_4).unwrap();
    let (p, q) = moreau_split(&c, &[0.0, 1.0]).unwrap();
    assert_close(&p, &[0.5, 0.5], 1e-12);
    assert_close(&q, &[-0.5, 0.5], 1e-12);

    let l = ConstraintSet::l1_image(DMatrix::identity(2, 2), 1.0).unwrap();
    assert!(matches!(moreau_split(&l, &[1.0, 1.0]), Err(Error::NotACone(SetTag::L1Image))));
}

#[test]
fn construction_validates() {
    assert!(ConstraintSet::circular(3, 0.0).is_err());
    assert!(ConstraintSet::circular(3, PI / 2.0).is_err());
    assert!(ConstraintSet::kmonotone(3, 2).is_err());
    assert!(ConstraintSet::kmonotone(4, 2).is_ok());
    assert!(ConstraintSet::subspace(DMatrix::from_element(2, 1, 1.0)).is_err());
    assert!(ConstraintSet::span(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0])).is_err());
    assert!(matches!(
        ConstraintSet::l1_image(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]), 1.0),
        Err(Error::RankDeficient { .. })
    ));
    assert!(ConstraintSet::l1_image(DMatrix::identity(2, 2), 0.0).is_err());
    assert!(matches!(
        ConstraintSet::orthant(3).unwrap().project(&[1.0]),
        Err(Error::DimensionMismatch { expected: 3, found: 1 })
    ));
}

#[test]
fn sampled_points_are_members() {
    let mut rng = Pcg64Mcg::seed_from_u64(3);
    for set in all_sets(9) {
        for _ in 0..20 {
            let v = set.sample_point(&mut rng);
            assert!(set.max_violation(&v).unwrap() < 1e-8, "{}", set.label());
        }
    }
}

#[test]
fn projections_satisfy_the_variational_inequality() {
    let mut rng = Pcg64Mcg::seed_from_u64(11);
    for set in all_sets(8) {
        for _ in 0..30 {
            let x: Vec<f64> = standard_normal(&mut rng, 8).iter().map(|v| 2.0 * v).collect();
            let p = set.project(&x).unwrap().point;
            assert!(set.max_violation(&p).unwrap() <= 1e-8, "{}", set.label());
            let r: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            for _ in 0..20 {
                let v = set.sample_point(&mut rng);
                let d: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
                let bound = 1e-8 * dist(&x, &p) * dist(&v, &p) + 1e-12;
                assert!(dot(&r, &d) <= bound, "{} violates optimality", set.label());
            }
        }
    }
}

#[test]
fn moreau_orthogonality_and_polar_membership() {
    let mut rng = Pcg64Mcg::seed_from_u64(5);
    for set in all_sets(7).into_iter().filter(|s| s.is_cone()) {
        for _ in 0..20 {
            let x = standard_normal(&mut rng, 7);
            let (p, q) = moreau_split(&set, &x).unwrap();
            let nx = dot(&x, &x);
            assert!(dot(&p, &q).abs() <= 1e-8 * nx, "{}", set.label());
            for _ in 0..10 {
                let u = set.sample_point(&mut rng);
                let nu = dot(&u, &u).sqrt();
                assert!(dot(&q, &u) <= 1e-8 * (1.0 + nu * nx.sqrt()), "{}", set.label());
            }
        }
    }
}

#[test]
fn circular_matches_grid_in_three_dimensions() {
    let alpha = 0.5;
    let set = ConstraintSet::circular(3, alpha).unwrap();
    for x in [[0.2, 1.0, -0.5], [-0.4, 0.3, 0.9], [1.0, 0.1, 0.2]] {
        let p = set.project(&x).unwrap().point;
        let got = dist(&x, &p);
        let mut best = f64::INFINITY;
        let steps = 120;
        for a in 0..=steps {
            let phi = alpha * a as f64 / steps as f64;
            for b in 0..steps {
                let psi = 2.0 * PI * b as f64 / steps as f64;
                for c in 0..=steps {
                    let r = 2.0 * c as f64 / steps as f64;
                    let v = [r * phi.cos(), r * phi.sin() * psi.cos(), r * phi.sin() * psi.sin()];
                    best = best.min(dist(&x, &v));
                }
            }
        }
        assert!(got <= best + 1e-12);
        assert!(best - got < 0.03);
    }
}

#[test]
fn translation_invariance_along_lineality() {
    let mut rng = Pcg64Mcg::seed_from_u64(8);
    for set in all_sets(10) {
        let Some(u) = set.lineality_direction() else { continue };
        for _ in 0..10 {
            let x = standard_normal(&mut rng, 10);
            let shifted: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + 5.0 * b).collect();
            let lhs = set.project(&shifted).unwrap().point;
            let rhs: Vec<f64> = set
                .project(&x)
                .unwrap()
                .point
                .iter()
                .zip(&u)
                .map(|(a, b)| a + 5.0 * b)
                .collect();
            assert_close(&lhs, &rhs, 1e-8);
        }
    }
}

#[test]
fn polyhedral_jacobians_match_finite_differences() {
    let mut rng = Pcg64Mcg::seed_from_u64(21);
    let n = 6;
    let sets = [
        ConstraintSet::span(DMatrix::from_vec(n, 2, standard_normal(&mut rng, 2 * n))).unwrap(),
        ConstraintSet::poly_subspace(n, 1).unwrap(),
        ConstraintSet::orthant(n).unwrap(),
        ConstraintSet::monotone(n).unwrap(),
    ];
    for set in &sets {
        let mut checked = 0;
        while checked < 50 {
            let x = standard_normal(&mut rng, n);
            let Ok(exact) = jacobian(set, &x) else { continue };
            assert_eq!(exact.exactness, Exactness::ClosedForm);
            let fd = finite_difference_jacobian(set, &x).unwrap();
            assert!((exact.entries.clone() - fd.entries).amax() < 1e-4, "{}", set.label());
            let e = &exact.entries;
            assert!((e.clone() - e.transpose()).amax() < 1e-8);
            assert!((e * e - e).amax() < 1e-8);
            let face = set.project(&x).unwrap().face_dim.unwrap();
            assert!((exact.trace() - face as f64).abs() < 1e-8);
            checked += 1;
        }
    }
}

#[test]
fn jacobians_are_contractions() {
    let mut rng = Pcg64Mcg::seed_from_u64(4);
    for set in all_sets(6) {
        let x = standard_normal(&mut rng, 6);
        let Ok(j) = jacobian(&set, &x) else { continue };
        assert!(j.spectral_norm() <= 1.0 + 1e-6, "{}", set.label());
        let id = DMatrix::<f64>::identity(6, 6) - &j.entries;
        assert!(id.singular_values().max() <= 1.0 + 1e-6, "{}", set.label());
        let div = divergence(&set, &x).unwrap();
        assert!((div - j.trace()).abs() < 1e-4, "{}", set.label());
    }
}

#[test]
fn lasso_fixed_point_when_interior() {
    let x = random_design(12, 4, 1);
    let design = LassoDesign::new(x.clone()).unwrap();
    let y = standard_normal(&mut Pcg64Mcg::seed_from_u64(2), 12);
    let ols = design.least_squares(&y);
    let l1: f64 = ols.iter().map(|v| v.abs()).sum();
    let (theta, mu) = fit_constrained_lasso(&x, &y, l1 * 1.01).unwrap();
    assert_close(&theta, &ols, 1e-12);
    assert_close(&mu, &design.apply(&ols), 1e-12);
}

/// `max_{u <= i} min_{v >= i}` of block means.
fn min_max_oracle(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|u| {
                    (i..n)
                        .map(|v| y[u..=v].iter().sum::<f64>() / (v - u + 1) as f64)
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Minimizes `||y - mu||` over the k-monotone cone by enumerating every set
/// of active difference constraints and solving the equality-constrained
/// least squares problem on each.
fn kmonotone_brute_force(y: &[f64], k: usize) -> Vec<f64> {
    let n = y.len();
    let m = n - k - 1;
    let d = DMatrix::from_fn(m, n, |r, c| {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        forward_difference(&e, k + 1)[r]
    });
    let yv = DVector::from_column_slice(y);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|r| mask & (1 << r) != 0).collect();
        let mu = if rows.is_empty() {
            yv.clone()
        } else {
            let a = DMatrix::from_fn(rows.len(), n, |r, c| d[(rows[r], c)]);
            let aat = &a * a.transpose();
            let lam = aat.lu().solve(&(&a * &yv)).unwrap();
            &yv - a.transpose() * lam
        };
        if (&d * &mu).iter().any(|&v| v < -1e-10) {
            continue;
        }
        let obj = (&yv - &mu).norm_squared();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, mu.as_slice().to_vec()));
        }
    }
    best.unwrap().1
}

fn vector(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pava_equals_min_max(y in vector(12)) {
        let fit = pava(&y).unwrap();
        let oracle = min_max_oracle(&y);
        for (a, b) in fit.point.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let blocks = fit.blocks.unwrap();
        prop_assert_eq!(blocks.first().unwrap().start, 0);
        prop_assert_eq!(blocks.last().unwrap().end, y.len());
        for w in blocks.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert!(fit.point[w[0].start] < fit.point[w[1].start]);
        }
        for b in &blocks {
            prop_assert!(fit.point[b.clone()].iter().all(|v| *v == fit.point[b.start]));
        }
    }

    #[test]
    fn kmonotone_equals_brute_force(
        k in 0usize..=2,
        extra in 0usize..=4,
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
    ) {
        let n = k + 2 + extra;
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let y: Vec<f64> = standard_normal(&mut rng, n).iter().map(|v| v * scale).collect();
        let set = ConstraintSet::kmonotone(n, k).unwrap();
        let fit = set.project(&y).unwrap();
        let oracle = kmonotone_brute_force(&y, k);
        for (a, b) in fit.point.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", fit.point, oracle);
        }
        let active = forward_difference(&fit.point, k + 1)
            .iter()
            .filter(|v| v.abs() <= 1e-9 * (1.0 + scale))
            .count();
        prop_assert_eq!(fit.face_dim, Some(n - active));
    }

    #[test]
    fn nonexpansive_and_idempotent(
        which in 0usize..10,
        seed in any::<u64>(),
        spread in 0.1f64..5.0,
    ) {
        let n = 7;
        let set = all_sets(n).swap_remove(which);
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let x: Vec<f64> = standard_normal(&mut rng, n).iter().map(|v| v * spread).collect();
        let y: Vec<f64> = standard_normal(&mut rng, n).iter().map(|v| v * spread).collect();
        let px = set.project(&x).unwrap().point;
        let py = set.project(&y).unwrap().point;
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-8);
        let ppx = set.project(&px).unwrap().point;
        for (a, b) in ppx.iter().zip(&px) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn cones_scale(which in 0usize..10, seed in any::<u64>(), c in 0.01f64..100.0) {
        let n = 7;
        let set = all_sets(n).swap_remove(which);
        prop_assume!(set.is_cone());
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let x = standard_normal(&mut rng, n);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let lhs = set.project(&cx).unwrap().point;
        let rhs = set.project(&x).unwrap().point;
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - c * b).abs() <= 1e-8 * (1.0 + c));
        }
    }

    #[test]
    fn l1_projection_kkt(v in prop::collection::vec(-4.0f64..4.0, 1..20), radius in 0.05f64..6.0) {
        let out = project_l1_ball(&v, radius);
        let l1v: f64 = v.iter().map(|a| a.abs()).sum();
        if l1v <= radius {
            prop_assert_eq!(out, v);
        } else {
            let l1: f64 = out.iter().map(|a| a.abs()).sum();
            prop_assert!((l1 - radius).abs() <= 1e-10 * (1.0 + radius));
            let tau = l1_threshold(&v, radius);
            prop_assert!(tau >= 0.0);
            let st = soft_threshold(&v, tau);
            for (a, b) in st.iter().zip(&out) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
