// SPDX-License-Identifier: Apache-2.0

use super::*;
use crate::rng::with_workers;

fn point(scenario: &str, param: f64, predicted: Option<f64>) -> PowerCurvePoint {
    PowerCurvePoint {
        scenario: scenario.into(),
        n: 10,
        param,
        reps: 100,
        empirical_power: 0.25,
        empirical_se: binomial_se(0.25, 100),
        predicted_power: predicted,
        m_hat: 5.0,
        sigma_hat: 1.0 / 3.0,
        seed: 7,
    }
}

fn small(scenario: Scenario, dir: &Path) -> ScenarioConfig {
    let mut c = ScenarioConfig::desk(scenario, dir);
    c.reps_power = 200;
    c.reps_calibration = 1000;
    c.master_seed = 11;
    c
}

#[test]
fn significant_digit_formatting() {
    assert_eq!(format_sig(0.0), "0");
    assert_eq!(format_sig(3.0), "3");
    assert_eq!(format_sig(0.1 + 0.2), "0.3");
    assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
    assert_eq!(format_sig(-2.0 / 3.0), "-0.666666666667");
    assert_eq!(format_sig(1e-20), "1e-20");
    assert_eq!(format_sig(123_456_789_012_345.0), "123456789012000");
    assert_eq!(round_sig(0.123456789, 3), 0.123);
}

#[test]
fn blob_hash_matches_git() {
    assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

#[test]
fn canonical_json_sorts_and_rounds() {
    let v = serde_json::json!({"b": 1.0 / 3.0, "a": {"z": [1, 2.5], "y": null}, "c": "x"});
    assert_eq!(
        to_canonical_json(&v, false).unwrap(),
        r#"{"a":{"y":null,"z":[1,2.5]},"b":0.333333333333,"c":"x"}"#
    );
    let pretty = to_canonical_json(&v, true).unwrap();
    let back: serde_json::Value = serde_json::from_str(&pretty).unwrap();
    assert_eq!(back["a"]["z"][1], 2.5);
}

#[test]
fn csv_format() {
    let text = csv_string(&[point("a,b", 0.5, None), point("fig2/flat", 0.1, Some(0.2))]).unwrap();
    let lines: Vec<&str> = text.split("\r\n").collect();
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert_eq!(lines[1], "\"a,b\",10,0.5,100,0.25,0.0433012701892,,5,0.333333333333,7");
    assert_eq!(lines[2], "fig2/flat,10,0.1,100,0.25,0.0433012701892,0.2,5,0.333333333333,7");
    assert_eq!(lines[3], "");
    assert!(!text.contains("NaN"));
}

#[test]
fn svg_shapes() {
    let one = svg_string(&[point("fig1/flat", 0.2, None)], "fig1");
    assert!(one.starts_with("<svg") && one.trim_end().ends_with("</svg>"));
    assert_eq!(one.matches("<polyline").count(), 1);

    let pts: Vec<PowerCurvePoint> = ["fig2/flat", "fig2/decay"]
        .iter()
        .flat_map(|s| (1..=3).map(move |i| point(s, i as f64 / 10.0, Some(0.3))))
        .collect();
    let svg = svg_string(&pts, "fig2");
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert_eq!(svg.matches(r##"stroke="#d62728""##).count(), 2); // curve and legend
    assert_eq!(svg.matches(r##"stroke="#1f77b4""##).count(), 2);
    assert!(svg.contains("fig2/flat predicted"));

    let dir = tempfile::tempdir().unwrap();
    assert!(emit_csv(&[], &dir.path().join("x.csv")).is_err());
    assert!(emit_svg(&[], &dir.path().join("x.svg")).is_err());
}

#[test]
fn config_validation_and_round_trip() {
    let c = ScenarioConfig::desk(Scenario::Fig2, "/tmp/out");
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), c);

    let minimal = r#"{"scenario":"Fig1","n_grid":[64],"param_grid":[0.2],"output_dir":"o"}"#;
    let m = ScenarioConfig::from_json(minimal).unwrap();
    assert_eq!((m.alpha, m.reps_power, m.reps_calibration, m.master_seed), (0.05, 1000, 20_000, 0));

    let unknown = r#"{"scenario":"Fig1","n_grid":[64],"param_grid":[0.2],"output_dir":"o","bogus":1}"#;
    assert!(matches!(ScenarioConfig::from_json(unknown), Err(Error::Json(_))));
    for bad in [
        r#"{"scenario":"Fig1","n_grid":[],"param_grid":[0.2],"output_dir":"o"}"#,
        r#"{"scenario":"Fig1","n_grid":[64],"param_grid":[0.2],"output_dir":"o","alpha":1.5}"#,
        r#"{"scenario":"Fig1","n_grid":[64],"param_grid":[0.2],"output_dir":"o","reps_power":99}"#,
        r#"{"scenario":"LassoSuite","n_grid":[4],"param_grid":[0.2],"output_dir":"o"}"#,
    ] {
        assert!(matches!(ScenarioConfig::from_json(bad), Err(Error::InvalidArgument(_))), "{bad}");
    }
    for s in Scenario::ALL {
        assert_eq!(Scenario::from_slug(s.slug()), Some(s));
    }
}

#[test]
fn construction_helpers() {
    assert_eq!(Family::Flat.mean(4, 0.5, 2.0), vec![1.0; 4]);
    assert_eq!(Family::Decay.mean(4, 0.5, 1.0)[3], 0.5);

    // Simpson rule for ∫ δ² on [0, 1] is exact for quadratics
    let integral = (iso_drift(0.0).powi(2) + 4.0 * iso_drift(0.5).powi(2) + iso_drift(1.0).powi(2)) / 6.0;
    assert!((integral - 1.0).abs() < 1e-14);
    let (mu, mu0) = iso_alternative(50, 0.3);
    assert!(mu0.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(mu[49], 1.0);

    let x = orthonormal_design(30, 6, 1).unwrap();
    let g = x.transpose() * &x;
    assert!((g - DMatrix::identity(6, 6)).abs().max() < 1e-12);

    for k in [0usize, 1] {
        let u = kmonotone_direction(40, k).unwrap();
        let cone = ConstraintSet::kmonotone(40, k).unwrap();
        assert!(cone.max_violation(&u).unwrap() < 1e-10);
        let p = ConstraintSet::poly_subspace(40, k).unwrap().project(&u).unwrap().point;
        assert!(p.iter().all(|v| v.abs() < 1e-12));
        assert!((u.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn runs_are_reproducible_and_hashed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small(Scenario::Fig1, a.path());
    ca.n_grid = vec![64];
    ca.param_grid = vec![0.2, 0.6];
    let mut cb = ca.clone();
    cb.output_dir = b.path().into();
    let ra = with_workers(Some(1), || run_scenario(&ca).unwrap());
    let rb = with_workers(Some(3), || run_scenario(&cb).unwrap());
    assert_eq!(ra.points, rb.points);
    assert_eq!(ra.points.len(), 4);
    let csv_a = std::fs::read(a.path().join(CSV_FILE)).unwrap();
    assert_eq!(csv_a, std::fs::read(b.path().join(CSV_FILE)).unwrap());
    assert_eq!(ra.manifest.files[CSV_FILE], git_blob_hash(&csv_a));
    assert_eq!(ra.manifest.status, RunStatus::Complete);
    let seeds: Vec<u64> = ra.points.iter().map(|p| p.seed).collect();
    assert_eq!(seeds, (0..4).map(|i| mix64(11, i)).collect::<Vec<_>>());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["config"]["master_seed"], 11);
    assert_eq!(manifest["calibrations"][0]["mode"], "monte_carlo");
    assert_eq!(manifest["calibrations"][0]["seed"], mix64(11, 1 << 32));
}

#[test]
fn failure_flushes_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Scenario::LassoSuite, dir.path());
    c.n_grid = vec![40];
    c.param_grid = vec![0.0, 1e6];
    assert!(run_scenario(&c).is_err());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].as_str().unwrap().contains("outside the l1 ball"));
    let partial = std::fs::read_to_string(dir.path().join(PARTIAL_CSV_FILE)).unwrap();
    assert_eq!(partial.lines().count(), 2);
    assert!(!dir.path().join(CSV_FILE).exists());
}

#[test]
fn null_rows_hold_size() {
    // param 0 gives mu = mu0 in every suite below
    for scenario in [
        Scenario::SubspaceConeSuite,
        Scenario::CircularSuite,
        Scenario::LassoSuite,
        Scenario::IsoSuite,
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(scenario, dir.path());
        c.n_grid = vec![40];
        c.param_grid = vec![0.0];
        c.reps_power = 2000;
        c.reps_calibration = 5000;
        let run = run_scenario(&c).unwrap();
        for p in &run.points {
            let se = binomial_se(c.alpha, p.reps);
            // calibration error adds to the binomial noise; allow 4 SE
            assert!((p.empirical_power - c.alpha).abs() <= 4.0 * se, "{p:?}");
            let pred = p.predicted_power.unwrap();
            assert!((pred - c.alpha).abs() < 0.02, "{p:?}");
        }
    }
}

#[test]
fn counterexample_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Scenario::CounterExamples, dir.path());
    c.n_grid = vec![64];
    c.param_grid = vec![1.0, 3.0];
    let run = run_scenario(&c).unwrap();
    let labels: Vec<&str> = run.points.iter().map(|p| p.scenario.as_str()).collect();
    assert_eq!(
        labels,
        [
            "counterexamples/c0",
            "counterexamples/c1-one-sided",
            "counterexamples/c1-two-sided",
            "counterexamples/two-sided",
            "counterexamples/two-sided"
        ]
    );
    // one- and two-sided rows share their draws
    assert_eq!(run.points[1].seed, run.points[2].seed);
    assert!(run.manifest.extras["n=64/variance_ratio"] > 0.0);
    assert!(run.points[4].empirical_power > 0.99);
    assert!((run.points[3].predicted_power.unwrap() - c.alpha).abs() < 1e-12);
}

proptest::proptest! {
    #[test]
    fn formatted_values_parse_back_within_rounding(x in -1e12f64..1e12) {
        let back: f64 = format_sig(x).parse().unwrap();
        proptest::prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(f64::MIN_POSITIVE));
        proptest::prop_assert_eq!(format_sig(back), format_sig(x));
    }

    #[test]
    fn canonical_json_is_stable_under_reparse(a in -1e6f64..1e6, b in 0u64..1000, s in "[a-z]{0,6}") {
        let v = serde_json::json!({"s": s, "b": b, "a": a, "nested": {"z": [a, b], "a": null}});
        let once = to_canonical_json(&v, false).unwrap();
        let again = to_canonical_json(&serde_json::from_str::<serde_json::Value>(&once).unwrap(), false).unwrap();
        proptest::prop_assert_eq!(once, again);
    }
}
