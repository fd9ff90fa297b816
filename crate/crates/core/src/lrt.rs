// SPDX-License-Identifier: Apache-2.0

//! The likelihood-ratio statistic, its calibration, the test decision and
//! the normal-approximation power function.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::conic_stats::{estimate_gamma, estimate_lrs_moments, estimate_shift, ConicSummary};
use crate::diagnostics::normal_bound_rhs;
use crate::error::{check_len, Error, Result};
use crate::geometry::{ConstraintSet, SetTag};
use crate::rng::mix64;
use crate::special::{normal_cdf, normal_pdf, normal_sf, upper_quantile};
use crate::stats::MomentEstimate;

/// Default Monte-Carlo calibration size.
pub const DEFAULT_CALIBRATION_REPS: usize = 20_000;
/// Smallest Monte-Carlo calibration accepted.
pub const MIN_CALIBRATION_REPS: usize = 1000;
/// Replications used for the Kolmogorov-bound term of a power prediction.
const BOUND_REPS: usize = 2000;

/// The null hypothesis.
#[derive(Debug, Clone)]
pub enum NullSpec {
    /// `H0: mu = mu0` with `mu0` in `K`.
    Point(Vec<f64>),
    /// `H0: mu in K0` for a subspace `K0` contained in `K`.
    Subspace(ConstraintSet),
}

impl NullSpec {
    pub fn zero(n: usize) -> Self {
        NullSpec::Point(vec![0.0; n])
    }

    /// Checks the null against `set`: `mu0` must be a fixed point of the
    /// projection, or `K0` must be a subspace inside `K`.
    pub fn validate(&self, set: &ConstraintSet) -> Result<()> {
        match self {
            NullSpec::Point(mu0) => {
                check_len(set.dim(), mu0.len())?;
                let p = set.project(mu0)?.point;
                let gap = p.iter().zip(mu0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if gap > 1e-8 {
                    return Err(Error::InvalidArgument(format!(
                        "null point is not in the constraint set (moves by {gap:.3e} under projection)"
                    )));
                }
            }
            NullSpec::Subspace(k0) => {
                check_len(set.dim(), k0.dim())?;
                if !k0.is_subspace() {
                    return Err(Error::InvalidArgument(format!(
                        "subspace null needs a subspace, got {}",
                        k0.tag()
                    )));
                }
                let mut rng = Pcg64Mcg::seed_from_u64(0x5eed);
                if !set.contains_subspace(k0, &mut rng)? {
                    return Err(Error::InvalidArgument(
                        "null subspace is not contained in the constraint set".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// A representative null mean: `mu0`, or the origin for subspace nulls.
    pub fn null_point(&self, n: usize) -> Vec<f64> {
        match self {
            NullSpec::Point(mu0) => mu0.clone(),
            NullSpec::Subspace(_) => vec![0.0; n],
        }
    }

    /// The null mean closest to `mu`: `mu0`, or `Π_{K0}(mu)`.
    pub fn nearest_null(&self, mu: &[f64]) -> Result<Vec<f64>> {
        match self {
            NullSpec::Point(mu0) => Ok(mu0.clone()),
            NullSpec::Subspace(k0) => Ok(k0.project(mu)?.point),
        }
    }
}

/// `T(y) = ||y - mu0||^2 - ||y - Π_K y||^2`, or with `Π_{K0} y` in place of `mu0`.
pub fn lrs(set: &ConstraintSet, null: &NullSpec, y: &[f64]) -> Result<f64> {
    check_len(set.dim(), y.len())?;
    let fit = set.project(y)?.point;
    let base = match null {
        NullSpec::Point(mu0) => {
            check_len(set.dim(), mu0.len())?;
            sq_dist(y, mu0)
        }
        NullSpec::Subspace(k0) => sq_dist(y, &k0.project(y)?.point),
    };
    Ok(base - sq_dist(y, &fit))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    MonteCarlo,
    ClosedForm,
}

/// Null mean and standard deviation of the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub m_hat: f64,
    pub sigma_hat: f64,
    /// Standard errors of the two estimates (zero in closed form).
    pub m_se: f64,
    pub sigma_se: f64,
    pub reps: usize,
    pub seed: u64,
    pub mode: CalibrationMode,
}

impl NullCalibration {
    pub fn from_moments(m: &MomentEstimate, seed: u64) -> Self {
        let sigma = m.variance.sqrt();
        NullCalibration {
            m_hat: m.mean,
            sigma_hat: sigma,
            m_se: m.se_mean,
            sigma_se: if sigma > 0.0 { m.se_variance / (2.0 * sigma) } else { 0.0 },
            reps: m.reps,
            seed,
            mode: CalibrationMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub sidedness: Sidedness,
    pub alpha: f64,
    pub calibration: NullCalibration,
}

impl TestPlan {
    pub fn new(sidedness: Sidedness, alpha: f64, calibration: NullCalibration) -> Result<Self> {
        check_alpha(alpha)?;
        if !(calibration.sigma_hat > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "null standard deviation must be positive, got {}",
                calibration.sigma_hat
            )));
        }
        Ok(TestPlan {
            sidedness,
            alpha,
            calibration,
        })
    }

    pub fn standardize(&self, t: f64) -> f64 {
        (t - self.calibration.m_hat) / self.calibration.sigma_hat
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Closed-form null moments where the law is known exactly: subspace `K`
/// (chi-squared with `dim K - dim K0` degrees of freedom) and the orthant
/// with `mu0 = 0` (independent coordinates with moments 1/2 and 5/4).
pub fn calibrate_closed_form(set: &ConstraintSet, null: &NullSpec, seed: u64) -> Result<NullCalibration> {
    null.validate(set)?;
    let (m, var) = match (set.tag(), null) {
        (SetTag::Subspace | SetTag::PolySubspace, NullSpec::Point(_)) => {
            let d = set.subspace_dim().expect("subspace") as f64;
            (d, 2.0 * d)
        }
        (SetTag::Subspace | SetTag::PolySubspace, NullSpec::Subspace(k0)) => {
            let d = (set.subspace_dim().expect("subspace") - k0.subspace_dim().expect("subspace")) as f64;
            (d, 2.0 * d)
        }
        (SetTag::Orthant, NullSpec::Point(mu0)) if mu0.iter().all(|&v| v == 0.0) => {
            let n = set.dim() as f64;
            (0.5 * n, 1.25 * n)
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "no closed-form null law for {} under this null",
                set.label()
            )))
        }
    };
    Ok(NullCalibration {
        m_hat: m,
        sigma_hat: var.sqrt(),
        m_se: 0.0,
        sigma_se: 0.0,
        reps: 0,
        seed,
        mode: CalibrationMode::ClosedForm,
    })
}

/// Monte-Carlo null calibration. For subspace nulls the invariance of the
/// null law along `K0` is spot-checked at a second null point.
pub fn calibrate_null(set: &ConstraintSet, null: &NullSpec, reps: usize, seed: u64) -> Result<NullCalibration> {
    if reps < MIN_CALIBRATION_REPS {
        return Err(Error::TooFewReplications {
            got: reps,
            min: MIN_CALIBRATION_REPS,
        });
    }
    let n = set.dim();
    let at = null.null_point(n);
    let m = estimate_lrs_moments(set, null, &at, reps, seed)?;
    if let NullSpec::Subspace(k0) = null {
        if k0.subspace_dim().unwrap_or(0) > 0 {
            let mut rng = Pcg64Mcg::seed_from_u64(mix64(seed, u64::MAX));
            let other: Vec<f64> = k0.sample_point(&mut rng).iter().map(|v| 3.0 * v).collect();
            let spot = reps.min(MIN_CALIBRATION_REPS);
            let a = estimate_lrs_moments(set, null, &at, spot, seed)?;
            let b = estimate_lrs_moments(set, null, &other, spot, seed)?;
            let se_m = (a.se_mean.powi(2) + b.se_mean.powi(2)).sqrt();
            let se_v = (a.se_variance.powi(2) + b.se_variance.powi(2)).sqrt();
            if (a.mean - b.mean).abs() > 4.0 * se_m + 1e-9 || (a.variance - b.variance).abs() > 4.0 * se_v + 1e-9 {
                return Err(Error::InvariantViolated(format!(
                    "null law moved along the null subspace: means {} vs {}, variances {} vs {}",
                    a.mean, b.mean, a.variance, b.variance
                )));
            }
        }
    }
    let cal = NullCalibration::from_moments(&m, seed);
    if !(cal.sigma_hat > 0.0) {
        return Err(Error::InvariantViolated(
            "null statistic is degenerate (zero variance)".into(),
        ));
    }
    Ok(cal)
}

/// Rejects when the standardized statistic leaves the acceptance region.
pub fn decide(t: f64, plan: &TestPlan) -> bool {
    let z = plan.standardize(t);
    match plan.sidedness {
        Sidedness::OneSided => z > upper_quantile(plan.alpha),
        Sidedness::TwoSided => z.abs() > upper_quantile(plan.alpha / 2.0),
    }
}

/// Power of the level-`alpha` test against a unit-variance normal shifted by `w`.
pub fn delta_power(sidedness: Sidedness, alpha: f64, w: f64) -> f64 {
    match sidedness {
        Sidedness::OneSided => {
            if w == f64::INFINITY {
                1.0
            } else if w == f64::NEG_INFINITY {
                0.0
            } else {
                normal_cdf(w - upper_quantile(alpha))
            }
        }
        Sidedness::TwoSided => {
            if w.is_infinite() {
                1.0
            } else {
                let z = upper_quantile(alpha / 2.0);
                normal_cdf(w - z) + normal_cdf(-w - z)
            }
        }
    }
}

/// `x sqrt(max(1, log(1/x)))`, with value 0 at 0.
pub fn ell(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (1.0f64).max((1.0 / x).ln()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPrediction {
    pub shift_w: f64,
    pub shift_se: f64,
    pub predicted_power: f64,
    /// Kolmogorov-bound right-hand side at the null; absent when the
    /// Jacobian estimate would exceed the cost cap.
    pub err_null_bound: Option<f64>,
    pub ell_term: f64,
    /// Heuristic: `ell_term + 2 err_null_bound < 0.5` (constants omitted).
    pub valid_regime: bool,
}

/// Estimate and standard error of `m_mu - m_{mu0}`: paired differences for a
/// point null, `Γ_{K,2}(mu - Π_{K0} mu)` for a subspace null.
pub fn mean_shift(set: &ConstraintSet, null: &NullSpec, mu: &[f64], reps: usize, seed: u64) -> Result<(f64, f64)> {
    check_len(set.dim(), mu.len())?;
    match null {
        NullSpec::Point(_) => {
            let s = estimate_shift(set, null, mu, reps, seed)?;
            Ok((s.mean, s.se_mean))
        }
        NullSpec::Subspace(k0) => {
            let base = k0.project(mu)?.point;
            let nu: Vec<f64> = mu.iter().zip(&base).map(|(a, b)| a - b).collect();
            let g = estimate_gamma(set, &nu, 2, reps, seed)?;
            Ok((g.value, g.se))
        }
    }
}

/// Normal-approximation power at `mu`. The shift is a paired (common random
/// numbers) estimate of `m_mu - m_{mu0}` scaled by the calibrated `sigma`.
pub fn predict_power(
    set: &ConstraintSet,
    null: &NullSpec,
    mu: &[f64],
    plan: &TestPlan,
    reps: usize,
    seed: u64,
) -> Result<PowerPrediction> {
    let sigma = plan.calibration.sigma_hat;
    let (diff, diff_se) = mean_shift(set, null, mu, reps, seed)?;
    let shift_w = diff / sigma;
    let predicted_power = delta_power(plan.sidedness, plan.alpha, shift_w);
    let err_null_bound = match normal_bound_rhs(set, null, reps.min(BOUND_REPS), mix64(seed, 1)) {
        Ok(r) => Some(r.rhs_value),
        Err(Error::CostCap(_)) => None,
        Err(e) => return Err(e),
    };
    let sep = sq_dist(mu, &null.nearest_null(mu)?).sqrt();
    let ell_term = ell((sep / diff.abs().max(sigma)).min(1.0));
    let valid_regime = err_null_bound.is_some_and(|e| ell_term + 2.0 * e < 0.5);
    Ok(PowerPrediction {
        shift_w,
        shift_se: diff_se / sigma,
        predicted_power,
        err_null_bound,
        ell_term,
        valid_regime,
    })
}

// ---- orthant closed forms ----

fn check_nonnegative(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("argument must be nonnegative, got {x}")))
    }
}

/// `Φ(x) + x φ(x) - x^2 (1 - Φ(x)) - 1/2`.
pub fn orthant_sbar(x: f64) -> Result<f64> {
    check_nonnegative(x)?;
    Ok(normal_cdf(x) + x * normal_pdf(x) - x * x * normal_sf(x) - 0.5)
}

/// `∫_{-∞}^x φ + x φ(x) - x^2 (1 - Φ(x))`; equals `orthant_sbar + 1/2`.
pub fn orthant_q(x: f64) -> Result<f64> {
    check_nonnegative(x)?;
    let lower = normal_cdf(x);
    Ok(lower + x * normal_pdf(x) - x * x * normal_sf(x))
}

/// Both orthant closed forms at `x`.
pub fn orthant_closed_forms(x: f64) -> Result<(f64, f64)> {
    Ok((orthant_sbar(x)?, orthant_q(x)?))
}

/// `F(c) = (c - 1)^2 + S̄₊(c) - S̄₊(1)`: the per-coordinate mean shift of the
/// statistic at `mu = c 1` under the null `mu0 = 1`.
pub fn counter_f(c: f64) -> Result<f64> {
    check_nonnegative(c)?;
    Ok((c - 1.0).powi(2) + orthant_sbar(c)? - orthant_sbar(1.0)?)
}

/// Root of `F` in `(0, 1)` by bisection on `[1e-6, 1 - 1e-6]`.
pub fn find_c0() -> Result<f64> {
    let f = |c: f64| counter_f(c).expect("positive argument");
    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::InvariantViolated(format!(
            "F does not change sign on the bracket: F(lo) = {flo}, F(hi) = {fhi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimizer of `F` on `[c0, 1]` (golden-section search). `F` is negative
/// there, so `mu = c1 1` lowers the mean of the statistic.
pub fn find_c1() -> Result<f64> {
    let f = |c: f64| counter_f(c).expect("positive argument");
    let c0 = find_c0()?;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (c0, 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    Ok(0.5 * (a + b))
}

/// Per-coordinate variance `ρ²(c) = var[(c + ξ - 1)^2 - (c + ξ)_-^2]`,
/// estimated by Monte Carlo.
pub fn counter_rho_sq(c: f64, reps: usize, seed: u64) -> Result<MomentEstimate> {
    let samples: Vec<f64> = crate::rng::replicate_records(reps, seed, |_, rng| {
        let x = c + rng.sample::<f64, _>(rand_distr::StandardNormal);
        let neg = x.min(0.0);
        Ok::<f64, Error>((x - 1.0).powi(2) - neg * neg)
    })?;
    let m = MomentEstimate::from_samples(&samples);
    Ok(m)
}

// ---- separation predicate ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `inf <η, E Π_K(ξ)>` over unit vectors `η` in `K`.
    pub inf_inner: f64,
    /// False when `inf_inner` is a sampled upper bound rather than exact.
    pub inf_exact: bool,
    pub satisfied: bool,
}

/// Compares `||mu - Π_{K0} mu||` with `δ^{1/4} ∧ δ^{1/2} / (0 ∨ inf <η, EΠ_K ξ>)`,
/// the infimum taken over unit vectors of `K`.
pub fn wwg_separation_check(
    set_k: &ConstraintSet,
    set_k0: &ConstraintSet,
    mu: &[f64],
    summary: &ConicSummary,
) -> Result<SeparationCheck> {
    check_len(set_k.dim(), mu.len())?;
    check_len(set_k.dim(), summary.mean_proj.len())?;
    let m = &summary.mean_proj;
    let (inf_inner, inf_exact) = match set_k.tag() {
        SetTag::Orthant => (m.iter().cloned().fold(f64::INFINITY, f64::min), true),
        SetTag::Subspace | SetTag::PolySubspace => {
            let p = set_k.project(m)?.point;
            (-p.iter().map(|v| v * v).sum::<f64>().sqrt(), true)
        }
        SetTag::Circular => {
            let alpha = set_k.alpha().expect("circular");
            let perp = m[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            // minimum over the boundary ray in span{e1, m_perp}
            let boundary = m[0] * alpha.cos() - perp * alpha.sin();
            (boundary.min(m[0]), true)
        }
        _ => {
            let mut rng = Pcg64Mcg::seed_from_u64(mix64(summary.seed, 0xC0));
            let mut best = f64::INFINITY;
            for _ in 0..10_000 {
                let v = set_k.sample_point(&mut rng);
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let ip: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
                    best = best.min(ip / norm);
                }
            }
            (best, false)
        }
    };
    let delta = summary.delta_hat.max(0.0);
    let denom = inf_inner.max(0.0);
    let second = if denom > 0.0 { delta.sqrt() / denom } else { f64::INFINITY };
    let rhs = delta.powf(0.25).min(second);
    let lhs = sq_dist(mu, &set_k0.project(mu)?.point).sqrt();
    Ok(SeparationCheck {
        lhs,
        rhs,
        inf_inner,
        inf_exact,
        satisfied: lhs > rhs,
    })
}
