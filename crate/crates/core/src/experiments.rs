// SPDX-License-Identifier: Apache-2.0

//! Config-driven simulation scenarios. Each run writes `results.csv`,
//! `results.svg` and `manifest.json` into the configured output directory.
//!
//! Point `i` of a run (in output order) simulates with seed
//! `mix64(master_seed, i)`; null calibrations draw from a separate stream
//! family, so adding points never perturbs earlier ones.

mod output;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use output::{
    csv_string, emit_csv, emit_svg, format_sig, git_blob_hash, round_sig, svg_string, to_canonical_json, CSV_HEADER,
    SIGNIFICANT_DIGITS,
};

use crate::conic_stats::sample_lrs;
use crate::error::{Error, Result};
use crate::geometry::{ConstraintSet, LassoDesign};
use crate::lrt::{
    calibrate_null, counter_f, decide, delta_power, find_c0, find_c1, mean_shift, CalibrationMode, NullCalibration,
    NullSpec, Sidedness, TestPlan, MIN_CALIBRATION_REPS,
};
use crate::rng::{mix64, replication_rng, standard_normal};
use crate::stats::{binomial_se, jackknife_variance_se, variance};

/// Exponent of the fixed-direction alternatives in `Fig2`.
pub const FIG2_EXPONENT: f64 = 0.3;
/// Cone half-angle used by `CircularSuite`.
pub const CIRCULAR_ANGLE: f64 = PI / 6.0;
/// Constant in the Lasso radius `C sqrt(p log n / (n λ_min(X'X / n)))`.
pub const LASSO_RADIUS_CONSTANT: f64 = 4.0;
/// `LassoSuite` uses `p = n / LASSO_ASPECT` columns.
pub const LASSO_ASPECT: usize = 4;
/// Smallest power-simulation size accepted by a config.
pub const MIN_POWER_REPS: usize = 100;

const CALIBRATION_STREAM: u64 = 1 << 32;
const DESIGN_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Fig1,
    Fig2,
    CounterExamples,
    SubspaceConeSuite,
    CircularSuite,
    LassoSuite,
    IsoSuite,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Fig1,
        Scenario::Fig2,
        Scenario::CounterExamples,
        Scenario::SubspaceConeSuite,
        Scenario::CircularSuite,
        Scenario::LassoSuite,
        Scenario::IsoSuite,
    ];

    /// Short lowercase name used in curve labels and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Fig2 => "fig2",
            Scenario::CounterExamples => "counterexamples",
            Scenario::SubspaceConeSuite => "subspace-cone",
            Scenario::CircularSuite => "circular",
            Scenario::LassoSuite => "lasso",
            Scenario::IsoSuite => "iso",
        }
    }

    pub fn from_slug(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|sc| sc.slug() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps_power() -> usize {
    1000
}

fn default_reps_calibration() -> usize {
    20_000
}

/// A scenario run. `param_grid` is read per scenario:
///
/// | scenario | param |
/// |---|---|
/// | `Fig1` | decay exponent `q` |
/// | `Fig2` | scale `τ` |
/// | `CounterExamples` | level `c` of `mu = c 1` (`mu0 = 1`) |
/// | `SubspaceConeSuite` | `||mu - Π_{K0} mu||` |
/// | `CircularSuite` | `||mu||` along each probe direction |
/// | `LassoSuite` | `||mu - mu0|| / p^{1/4}` |
/// | `IsoSuite` | `ρ_n n^{5/12}` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_grid: Vec<usize>,
    pub param_grid: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_reps_power")]
    pub reps_power: usize,
    #[serde(default = "default_reps_calibration")]
    pub reps_calibration: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ScenarioConfig {
    /// Desk-scale grids for each scenario.
    pub fn desk(scenario: Scenario, output_dir: impl Into<PathBuf>) -> Self {
        let (n_grid, param_grid): (Vec<usize>, Vec<f64>) = match scenario {
            Scenario::Fig1 => (vec![1 << 13], (1..=9).map(|i| i as f64 / 10.0).collect()),
            Scenario::Fig2 => (vec![5000], (1..=10).map(|i| i as f64 / 10.0).collect()),
            Scenario::CounterExamples => (vec![4096], vec![0.0, 0.5, 1.0, 1.5]),
            Scenario::SubspaceConeSuite => (vec![200], vec![0.0, 1.0, 2.0, 4.0, 8.0]),
            Scenario::CircularSuite => (vec![1024], vec![0.0, 1.0, 2.0, 3.0, 5.0]),
            Scenario::LassoSuite => (vec![200], vec![0.0, 0.25, 1.0, 2.0, 4.0]),
            Scenario::IsoSuite => (vec![256, 1024], vec![0.0, 1.0, 2.0, 4.0, 8.0]),
        };
        ScenarioConfig {
            scenario,
            n_grid,
            param_grid,
            alpha: default_alpha(),
            reps_power: default_reps_power(),
            reps_calibration: default_reps_calibration(),
            master_seed: 0,
            output_dir: output_dir.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_grid.is_empty() || self.param_grid.is_empty() {
            return bad("n_grid and param_grid must be nonempty".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.reps_power < MIN_POWER_REPS {
            return bad(format!("reps_power must be at least {MIN_POWER_REPS}, got {}", self.reps_power));
        }
        if self.reps_calibration < MIN_CALIBRATION_REPS {
            return bad(format!(
                "reps_calibration must be at least {MIN_CALIBRATION_REPS}, got {}",
                self.reps_calibration
            ));
        }
        if let Some(p) = self.param_grid.iter().find(|p| !p.is_finite()) {
            return bad(format!("param_grid entries must be finite, got {p}"));
        }
        let min_n = match self.scenario {
            Scenario::SubspaceConeSuite => 3,
            Scenario::LassoSuite => 2 * LASSO_ASPECT,
            _ => 2,
        };
        if let Some(n) = self.n_grid.iter().find(|&&n| n < min_n) {
            return bad(format!("{} needs n >= {min_n}, got {n}", self.scenario));
        }
        let nonnegative = !matches!(self.scenario, Scenario::IsoSuite);
        if nonnegative {
            if let Some(p) = self.param_grid.iter().find(|&&p| p < 0.0) {
                return bad(format!("{} needs nonnegative params, got {p}", self.scenario));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurvePoint {
    /// Curve label, `<scenario>/<curve>`.
    pub scenario: String,
    pub n: usize,
    pub param: f64,
    pub reps: usize,
    pub empirical_power: f64,
    pub empirical_se: f64,
    pub predicted_power: Option<f64>,
    pub m_hat: f64,
    pub sigma_hat: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub label: String,
    pub n: usize,
    pub m_hat: f64,
    pub sigma_hat: f64,
    pub m_se: f64,
    pub sigma_se: f64,
    pub reps: usize,
    pub seed: u64,
    pub mode: CalibrationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ScenarioConfig,
    pub status: RunStatus,
    pub error: Option<String>,
    pub version: String,
    pub points: usize,
    pub calibrations: Vec<CalibrationRecord>,
    /// Scenario-specific scalars (roots, variance ratios, design constants).
    pub extras: BTreeMap<String, f64>,
    /// How alternatives and designs were constructed.
    pub notes: Vec<String>,
    /// File name to git blob hash.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub points: Vec<PowerCurvePoint>,
    pub manifest: Manifest,
}

pub const CSV_FILE: &str = "results.csv";
pub const PARTIAL_CSV_FILE: &str = "results.partial.csv";
pub const SVG_FILE: &str = "results.svg";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs the scenario and writes its outputs. On failure the points finished
/// so far go to `results.partial.csv` and the manifest is marked failed.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let mut r = Runner::new(config);
    let outcome = match config.scenario {
        Scenario::Fig1 => r.fig1(),
        Scenario::Fig2 => r.fig2(),
        Scenario::CounterExamples => r.counterexamples(),
        Scenario::SubspaceConeSuite => r.subspace_cone(),
        Scenario::CircularSuite => r.circular(),
        Scenario::LassoSuite => r.lasso(),
        Scenario::IsoSuite => r.iso(),
    };
    match outcome {
        Ok(()) => r.finish(),
        Err(e) => {
            r.flush_failed(&e)?;
            Err(e)
        }
    }
}

/// Alternatives `mu = (τ n^{-q}) 1` and `mu = (τ i^{-q})_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Flat,
    Decay,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Flat => "flat",
            Family::Decay => "decay",
        }
    }

    pub fn mean(self, n: usize, q: f64, tau: f64) -> Vec<f64> {
        match self {
            Family::Flat => vec![tau * (n as f64).powf(-q); n],
            Family::Decay => (1..=n).map(|i| tau * (i as f64).powf(-q)).collect(),
        }
    }
}

/// The isotonic null drift `δ(t) = 2 sqrt(3) (t - 1/2)`, with `∫ δ² = 1`.
pub fn iso_drift(t: f64) -> f64 {
    2.0 * 3f64.sqrt() * (t - 0.5)
}

/// `(mu, mu0)` for the isotonic local alternative with `f(t) = t` and
/// `f0 = f + ρ δ`, sampled at `t = i / n`.
pub fn iso_alternative(n: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let mu: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let mu0 = mu.iter().map(|&t| t + rho * iso_drift(t)).collect();
    (mu, mu0)
}

/// Design with orthonormal columns from the QR factor of a seeded Gaussian
/// `n x p` matrix.
pub fn orthonormal_design(n: usize, p: usize, seed: u64) -> Result<DMatrix<f64>> {
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!("need 0 < p <= n, got n={n}, p={p}")));
    }
    let mut rng = replication_rng(seed, 0);
    let g = DMatrix::from_vec(n, p, standard_normal(&mut rng, n * p));
    Ok(g.qr().q())
}

/// `C sqrt(p log n / λ_min(X'X))` for `θ0 = 0` (note `n λ_min(Σ) = λ_min(X'X)`).
pub fn lasso_radius(design: &LassoDesign) -> f64 {
    let (n, p) = (design.nrows() as f64, design.ncols() as f64);
    LASSO_RADIUS_CONSTANT * (p * n.ln() / design.lambda_min_gram()).sqrt()
}

/// Unit vector along `v - Π_{K0} v` with `v_i = (i/n)^{k+1}`, an element of
/// the k-monotone cone orthogonal to polynomials of degree `k`.
pub fn kmonotone_direction(n: usize, k: usize) -> Result<Vec<f64>> {
    let k0 = ConstraintSet::poly_subspace(n, k)?;
    let v: Vec<f64> = (1..=n).map(|i| (i as f64 / n as f64).powi(k as i32 + 1)).collect();
    let p = k0.project(&v)?.point;
    let r: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
    let norm = r.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(r.into_iter().map(|a| a / norm).collect())
}

fn rejection_rate(samples: &[f64], plan: &TestPlan) -> f64 {
    samples.iter().filter(|&&t| decide(t, plan)).count() as f64 / samples.len() as f64
}

struct Runner<'a> {
    config: &'a ScenarioConfig,
    points: Vec<PowerCurvePoint>,
    calibrations: Vec<CalibrationRecord>,
    extras: BTreeMap<String, f64>,
    notes: Vec<String>,
}

/// A fixed test at one `n`: the set, the null and its calibration.
struct Setting {
    set: ConstraintSet,
    null: NullSpec,
    calibration: NullCalibration,
}

impl<'a> Runner<'a> {
    fn new(config: &'a ScenarioConfig) -> Self {
        Runner {
            config,
            points: Vec::new(),
            calibrations: Vec::new(),
            extras: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn next_seed(&self) -> u64 {
        mix64(self.config.master_seed, self.points.len() as u64)
    }

    fn setting(&mut self, label: &str, set: ConstraintSet, null: NullSpec) -> Result<Setting> {
        let seed = mix64(self.config.master_seed, CALIBRATION_STREAM + self.calibrations.len() as u64);
        let calibration = calibrate_null(&set, &null, self.config.reps_calibration, seed)?;
        self.calibrations.push(CalibrationRecord {
            label: label.to_string(),
            n: set.dim(),
            m_hat: calibration.m_hat,
            sigma_hat: calibration.sigma_hat,
            m_se: calibration.m_se,
            sigma_se: calibration.sigma_se,
            reps: calibration.reps,
            seed,
            mode: calibration.mode,
        });
        Ok(Setting { set, null, calibration })
    }

    fn plan(&self, s: &Setting, sidedness: Sidedness) -> Result<TestPlan> {
        TestPlan::new(sidedness, self.config.alpha, s.calibration)
    }

    fn push(&mut self, label: String, s: &Setting, param: f64, power: f64, predicted: Option<f64>, seed: u64) {
        let reps = self.config.reps_power;
        self.points.push(PowerCurvePoint {
            scenario: label,
            n: s.set.dim(),
            param,
            reps,
            empirical_power: power,
            empirical_se: binomial_se(power, reps),
            predicted_power: predicted,
            m_hat: s.calibration.m_hat,
            sigma_hat: s.calibration.sigma_hat,
            seed,
        });
    }

    /// Simulates the two-sided test at `mu`; with `predict`, adds the
    /// normal-shift prediction `Δ(shift / σ̂)`.
    fn power_point(&mut self, curve: &str, s: &Setting, mu: &[f64], param: f64, predict: bool) -> Result<()> {
        let seed = self.next_seed();
        let plan = self.plan(s, Sidedness::TwoSided)?;
        let samples = sample_lrs(&s.set, &s.null, mu, self.config.reps_power, seed)?;
        let power = rejection_rate(&samples, &plan);
        let predicted = if predict {
            let (shift, _) = mean_shift(&s.set, &s.null, mu, self.config.reps_calibration, mix64(seed, 1))?;
            Some(delta_power(Sidedness::TwoSided, self.config.alpha, shift / s.calibration.sigma_hat))
        } else {
            None
        };
        let label = format!("{}/{curve}", self.config.scenario.slug());
        self.push(label, s, param, power, predicted, seed);
        Ok(())
    }

    fn fig1(&mut self) -> Result<()> {
        self.notes.push("alternatives: flat mu = 2 n^-q 1, decay mu_i = i^-q; K = orthant, mu0 = 0".into());
        for &n in &self.config.n_grid.clone() {
            let s = self.setting("orthant", ConstraintSet::orthant(n)?, NullSpec::zero(n))?;
            for (family, tau) in [(Family::Flat, 2.0), (Family::Decay, 1.0)] {
                for &q in &self.config.param_grid.clone() {
                    let mu = family.mean(n, q, tau);
                    self.power_point(family.name(), &s, &mu, q, false)?;
                }
            }
        }
        Ok(())
    }

    fn fig2(&mut self) -> Result<()> {
        self.notes.push(format!(
            "alternatives: flat mu = tau n^-{FIG2_EXPONENT} 1, decay mu_i = tau i^-{FIG2_EXPONENT}; K = orthant, mu0 = 0"
        ));
        for &n in &self.config.n_grid.clone() {
            let s = self.setting("orthant", ConstraintSet::orthant(n)?, NullSpec::zero(n))?;
            for family in [Family::Flat, Family::Decay] {
                for &tau in &self.config.param_grid.clone() {
                    let mu = family.mean(n, FIG2_EXPONENT, tau);
                    self.power_point(family.name(), &s, &mu, tau, true)?;
                }
            }
        }
        Ok(())
    }

    fn counterexamples(&mut self) -> Result<()> {
        let c0 = find_c0()?;
        let c1 = find_c1()?;
        let (f0, f1) = (counter_f(c0)?, counter_f(c1)?);
        self.extras.insert("c0".into(), c0);
        self.extras.insert("c1".into(), c1);
        self.extras.insert("f_c0".into(), f0);
        self.extras.insert("f_c1".into(), f1);
        self.notes.push("K = orthant, mu0 = 1, mu = c 1; c1 minimizes F on [c0, 1]".into());
        let alpha = self.config.alpha;
        for &n in &self.config.n_grid.clone() {
            let s = self.setting("orthant-at-one", ConstraintSet::orthant(n)?, NullSpec::Point(vec![1.0; n]))?;
            let one = self.plan(&s, Sidedness::OneSided)?;
            let two = self.plan(&s, Sidedness::TwoSided)?;
            let shift = |c: f64| -> Result<f64> { Ok(n as f64 * counter_f(c)? / s.calibration.sigma_hat) };
            let slug = self.config.scenario.slug();

            // variance inflation at the root of F
            let seed = self.next_seed();
            let samples = sample_lrs(&s.set, &s.null, &vec![c0; n], self.config.reps_power, seed)?;
            let z: Vec<f64> = samples.iter().map(|&t| two.standardize(t)).collect();
            self.extras.insert(format!("n={n}/variance_ratio"), variance(&z));
            self.extras.insert(format!("n={n}/variance_ratio_se"), jackknife_variance_se(&z));
            let w = shift(c0)?;
            let power = rejection_rate(&samples, &two);
            self.push(format!("{slug}/c0"), &s, c0, power, Some(delta_power(Sidedness::TwoSided, alpha, w)), seed);

            // one- against two-sided rejection on the same draws
            let seed = self.next_seed();
            let samples = sample_lrs(&s.set, &s.null, &vec![c1; n], self.config.reps_power, seed)?;
            let w = shift(c1)?;
            self.extras.insert(format!("n={n}/shift_c1"), w);
            let p1 = rejection_rate(&samples, &one);
            let p2 = rejection_rate(&samples, &two);
            self.push(format!("{slug}/c1-one-sided"), &s, c1, p1, Some(delta_power(Sidedness::OneSided, alpha, w)), seed);
            self.push(format!("{slug}/c1-two-sided"), &s, c1, p2, Some(delta_power(Sidedness::TwoSided, alpha, w)), seed);

            for &c in &self.config.param_grid.clone() {
                let w = shift(c)?;
                let seed = self.next_seed();
                let samples = sample_lrs(&s.set, &s.null, &vec![c; n], self.config.reps_power, seed)?;
                let p = rejection_rate(&samples, &two);
                self.push(format!("{slug}/two-sided"), &s, c, p, Some(delta_power(Sidedness::TwoSided, alpha, w)), seed);
            }
        }
        Ok(())
    }

    fn subspace_cone(&mut self) -> Result<()> {
        self.notes.push(
            "K = k-monotone cone, K0 = polynomials of degree k; mu = s u with u the unit residual of (i/n)^(k+1)"
                .into(),
        );
        for &n in &self.config.n_grid.clone() {
            for k in [0usize, 1] {
                let k0 = ConstraintSet::poly_subspace(n, k)?;
                let s = self.setting(&format!("kmonotone-{k}"), ConstraintSet::kmonotone(n, k)?, NullSpec::Subspace(k0))?;
                let u = kmonotone_direction(n, k)?;
                for &sep in &self.config.param_grid.clone() {
                    let mu: Vec<f64> = u.iter().map(|v| sep * v).collect();
                    self.power_point(&format!("k{k}"), &s, &mu, sep, true)?;
                }
            }
        }
        Ok(())
    }

    fn circular(&mut self) -> Result<()> {
        self.extras.insert("angle".into(), CIRCULAR_ANGLE);
        self.notes.push(
            "cone: mu = s e1 in K_alpha(n); product: mu = s e1 (axis) or s e_n (free coordinate) in K_alpha(n-1) x R"
                .into(),
        );
        for &n in &self.config.n_grid.clone() {
            let cone = self.setting("circular", ConstraintSet::circular(n, CIRCULAR_ANGLE)?, NullSpec::zero(n))?;
            let product = self.setting(
                "product-circular",
                ConstraintSet::product_circular(n, CIRCULAR_ANGLE)?,
                NullSpec::zero(n),
            )?;
            let grid = self.config.param_grid.clone();
            for &r in &grid {
                let mut mu = vec![0.0; n];
                mu[0] = r;
                self.power_point("cone-axis", &cone, &mu, r, true)?;
            }
            for &r in &grid {
                let mut mu = vec![0.0; n];
                mu[0] = r;
                self.power_point("product-axis", &product, &mu, r, true)?;
            }
            for &r in &grid {
                let mut mu = vec![0.0; n];
                mu[n - 1] = r;
                self.power_point("product-free", &product, &mu, r, true)?;
            }
        }
        Ok(())
    }

    fn lasso(&mut self) -> Result<()> {
        self.notes.push(format!(
            "X: orthonormal columns, p = n / {LASSO_ASPECT}; theta0 = 0; lambda = {LASSO_RADIUS_CONSTANT} sqrt(p log n / lambda_min(X'X)); mu = s p^(1/4) X e1"
        ));
        for (idx, &n) in self.config.n_grid.clone().iter().enumerate() {
            let p = n / LASSO_ASPECT;
            let x = orthonormal_design(n, p, mix64(self.config.master_seed, DESIGN_STREAM + idx as u64))?;
            let design = Arc::new(LassoDesign::new(x)?);
            let lambda = lasso_radius(&design);
            self.extras.insert(format!("n={n}/p"), p as f64);
            self.extras.insert(format!("n={n}/lambda"), lambda);
            let s = self.setting("l1image", ConstraintSet::l1_image_shared(design.clone(), lambda), NullSpec::zero(n))?;
            let scale = (p as f64).powf(0.25);
            for &t in &self.config.param_grid.clone() {
                let radius = t * scale;
                if radius > lambda {
                    return Err(Error::InvalidArgument(format!(
                        "alternative with ||theta||_1 = {radius} lies outside the l1 ball of radius {lambda}"
                    )));
                }
                let mut theta = vec![0.0; p];
                theta[0] = radius;
                let mu = design.apply(&theta);
                self.power_point("l1image", &s, &mu, t, true)?;
            }
        }
        Ok(())
    }

    fn iso(&mut self) -> Result<()> {
        self.notes.push(
            "K = monotone; mu = (i/n), mu0 = mu + rho delta(i/n), delta(t) = 2 sqrt(3) (t - 1/2), rho = param n^(-5/12); calibrated per point"
                .into(),
        );
        for &n in &self.config.n_grid.clone() {
            for &param in &self.config.param_grid.clone() {
                let rho = param * (n as f64).powf(-5.0 / 12.0);
                let (mu, mu0) = iso_alternative(n, rho);
                let s = self.setting(&format!("monotone rho={}", format_sig(rho)), ConstraintSet::monotone(n)?, NullSpec::Point(mu0))?;
                self.power_point("monotone", &s, &mu, param, true)?;
            }
        }
        Ok(())
    }

    fn manifest(&self, status: RunStatus, error: Option<String>, files: BTreeMap<String, String>) -> Manifest {
        Manifest {
            config: self.config.clone(),
            status,
            error,
            version: env!("CARGO_PKG_VERSION").to_string(),
            points: self.points.len(),
            calibrations: self.calibrations.clone(),
            extras: self.extras.clone(),
            notes: self.notes.clone(),
            files,
        }
    }

    fn write(dir: &Path, name: &str, text: &str, files: &mut BTreeMap<String, String>) -> Result<()> {
        std::fs::write(dir.join(name), text)?;
        files.insert(name.to_string(), git_blob_hash(text.as_bytes()));
        Ok(())
    }

    fn finish(self) -> Result<ScenarioRun> {
        let dir = &self.config.output_dir;
        std::fs::create_dir_all(dir)?;
        let mut files = BTreeMap::new();
        Self::write(dir, CSV_FILE, &csv_string(&self.points)?, &mut files)?;
        Self::write(dir, SVG_FILE, &svg_string(&self.points, self.config.scenario.slug()), &mut files)?;
        let manifest = self.manifest(RunStatus::Complete, None, files);
        std::fs::write(dir.join(MANIFEST_FILE), to_canonical_json(&manifest, true)? + "\n")?;
        Ok(ScenarioRun {
            points: self.points,
            manifest,
        })
    }

    fn flush_failed(&self, err: &Error) -> Result<()> {
        let dir = &self.config.output_dir;
        std::fs::create_dir_all(dir)?;
        let mut files = BTreeMap::new();
        Self::write(dir, PARTIAL_CSV_FILE, &csv_string(&self.points)?, &mut files)?;
        let manifest = self.manifest(RunStatus::Failed, Some(err.to_string()), files);
        std::fs::write(dir.join(MANIFEST_FILE), to_canonical_json(&manifest, true)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
