// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo estimates of conic functionals: statistical dimension,
//! intrinsic volumes, shift functionals and moments of the statistic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::ConstraintSet;
use crate::lrt::{lrs, NullSpec};
use crate::rng::{fill_standard_normal, replicate, replicate_records};
use crate::stats::{jackknife_se, mean, se_mean, variance, MomentEstimate, JACKKNIFE_BATCHES};

/// Smallest replication count accepted by the estimators here.
pub const MIN_REPS: usize = 100;

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        Err(Error::TooFewReplications { got: reps, min: MIN_REPS })
    } else {
        Ok(())
    }
}

/// Raw per-replication draws of `||Π_K ξ||^2` and the face dimension.
#[derive(Debug, Clone)]
pub struct ConicSamples {
    pub norm_sq: Vec<f64>,
    pub face_dim: Option<Vec<usize>>,
    /// Sum over replications of `Π_K ξ`.
    pub proj_sum: Vec<f64>,
    pub seed: u64,
}

struct ConicAcc {
    norm_sq: Vec<f64>,
    face: Vec<usize>,
    has_face: bool,
    proj_sum: Vec<f64>,
}

pub fn sample_conic(set: &ConstraintSet, reps: usize, seed: u64) -> Result<ConicSamples> {
    let n = set.dim();
    let polyhedral = set.is_polyhedral();
    let acc = replicate(
        reps,
        seed,
        || ConicAcc {
            norm_sq: Vec::new(),
            face: Vec::new(),
            has_face: polyhedral,
            proj_sum: vec![0.0; n],
        },
        |acc: &mut ConicAcc, _, rng| {
            let mut xi = vec![0.0; n];
            fill_standard_normal(rng, &mut xi);
            let r = set.project(&xi)?;
            acc.norm_sq.push(r.point.iter().map(|v| v * v).sum());
            if acc.has_face {
                acc.face.push(r.face_dim.expect("polyhedral sets report faces"));
            }
            for (s, v) in acc.proj_sum.iter_mut().zip(&r.point) {
                *s += v;
            }
            Ok::<(), Error>(())
        },
        |into, from| {
            into.norm_sq.extend(from.norm_sq);
            into.face.extend(from.face);
            for (a, b) in into.proj_sum.iter_mut().zip(&from.proj_sum) {
                *a += b;
            }
        },
    )?;
    Ok(ConicSamples {
        norm_sq: acc.norm_sq,
        face_dim: polyhedral.then_some(acc.face),
        proj_sum: acc.proj_sum,
        seed,
    })
}

/// Difference between the mean face dimension and the mean squared norm,
/// with the standard error of the paired difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub difference: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSummary {
    pub delta_hat: f64,
    pub delta_se: f64,
    pub var_norm_sq_hat: f64,
    pub var_norm_sq_se: f64,
    /// Empirical law of the face dimension (polyhedral sets only).
    pub vj_hist: Option<BTreeMap<usize, f64>>,
    pub face_dim_mean: Option<f64>,
    pub face_dim_variance: Option<f64>,
    pub face_dim_agreement: Option<Agreement>,
    pub mean_proj: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl ConicSummary {
    pub fn from_samples(samples: &ConicSamples) -> Self {
        let reps = samples.norm_sq.len();
        let m = MomentEstimate::from_samples(&samples.norm_sq);
        let mut summary = ConicSummary {
            delta_hat: m.mean,
            delta_se: m.se_mean,
            var_norm_sq_hat: m.variance,
            var_norm_sq_se: m.se_variance,
            vj_hist: None,
            face_dim_mean: None,
            face_dim_variance: None,
            face_dim_agreement: None,
            mean_proj: samples.proj_sum.iter().map(|s| s / reps as f64).collect(),
            reps,
            seed: samples.seed,
        };
        if let Some(face) = &samples.face_dim {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &f in face {
                *counts.entry(f).or_default() += 1;
            }
            summary.vj_hist = Some(
                counts
                    .into_iter()
                    .map(|(k, c)| (k, c as f64 / reps as f64))
                    .collect(),
            );
            let v: Vec<f64> = face.iter().map(|&f| f as f64).collect();
            summary.face_dim_mean = Some(mean(&v));
            summary.face_dim_variance = Some(variance(&v));
            let diff: Vec<f64> = v.iter().zip(&samples.norm_sq).map(|(a, b)| a - b).collect();
            summary.face_dim_agreement = Some(Agreement {
                difference: mean(&diff),
                se: se_mean(&diff),
            });
        }
        summary
    }
}

pub fn estimate_conic_summary(set: &ConstraintSet, reps: usize, seed: u64) -> Result<ConicSummary> {
    check_reps(reps)?;
    Ok(ConicSummary::from_samples(&sample_conic(set, reps, seed)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub value: f64,
    pub se: f64,
    pub p: u32,
    pub nu: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Set when `nu` lies in the set and `value + 3 se < ||nu||^2`.
    pub below_quadratic_bound: bool,
}

/// `E||Π_K(ν+ξ)||^p - E||Π_K(ξ)||^p` from paired draws.
pub fn estimate_gamma(set: &ConstraintSet, nu: &[f64], p: u32, reps: usize, seed: u64) -> Result<GammaEstimate> {
    check_len(set.dim(), nu.len())?;
    if p != 1 && p != 2 {
        return Err(Error::InvalidArgument(format!("p must be 1 or 2, got {p}")));
    }
    check_reps(reps)?;
    let n = set.dim();
    let power = |v: &[f64]| {
        let sq: f64 = v.iter().map(|a| a * a).sum();
        if p == 2 { sq } else { sq.sqrt() }
    };
    let diffs = replicate_records(reps, seed, |_, rng| {
        let mut xi = vec![0.0; n];
        fill_standard_normal(rng, &mut xi);
        let base = set.project(&xi)?.point;
        let shifted: Vec<f64> = xi.iter().zip(nu).map(|(a, b)| a + b).collect();
        let moved = set.project(&shifted)?.point;
        Ok::<f64, Error>(power(&moved) - power(&base))
    })?;
    let value = mean(&diffs);
    let se = se_mean(&diffs);
    let nu_sq: f64 = nu.iter().map(|a| a * a).sum();
    let in_set = set.max_violation(nu)? <= 1e-8;
    Ok(GammaEstimate {
        value,
        se,
        p,
        nu: nu.to_vec(),
        reps,
        seed,
        below_quadratic_bound: p == 2 && in_set && value + 3.0 * se < nu_sq,
    })
}

/// Draws of `T(mu + ξ)` under the given null form.
pub fn sample_lrs(set: &ConstraintSet, null: &NullSpec, mu: &[f64], reps: usize, seed: u64) -> Result<Vec<f64>> {
    check_len(set.dim(), mu.len())?;
    let n = set.dim();
    replicate_records(reps, seed, |_, rng| {
        let mut y = vec![0.0; n];
        fill_standard_normal(rng, &mut y);
        for (a, b) in y.iter_mut().zip(mu) {
            *a += b;
        }
        lrs(set, null, &y)
    })
}

/// Mean and variance of `T(Y)`, `Y = mu + ξ`.
pub fn estimate_lrs_moments(
    set: &ConstraintSet,
    null: &NullSpec,
    mu: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check_reps(reps)?;
    null.validate(set)?;
    Ok(MomentEstimate::from_samples(&sample_lrs(set, null, mu, reps, seed)?))
}

/// Paired estimate of `m_mu - m_{mu0}` from `T(mu + ξ) - T(mu0 + ξ)` with
/// shared noise; for subspace nulls `mu0 = Π_{K0}(mu)`.
pub fn estimate_shift(
    set: &ConstraintSet,
    null: &NullSpec,
    mu: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check_len(set.dim(), mu.len())?;
    check_reps(reps)?;
    let base = null.nearest_null(mu)?;
    let n = set.dim();
    let diffs = replicate_records(reps, seed, |_, rng| {
        let mut xi = vec![0.0; n];
        fill_standard_normal(rng, &mut xi);
        let y1: Vec<f64> = xi.iter().zip(mu).map(|(a, b)| a + b).collect();
        let y0: Vec<f64> = xi.iter().zip(&base).map(|(a, b)| a + b).collect();
        Ok::<f64, Error>(lrs(set, null, &y1)? - lrs(set, null, &y0)?)
    })?;
    Ok(MomentEstimate::from_samples(&diffs))
}

/// `r(K, K0) = var(V) / E V` for `V` the face dimension of `K ∩ K0*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub se: f64,
    pub v_mean: f64,
    pub v_variance: f64,
    pub reps: usize,
    pub seed: u64,
}

pub fn estimate_r(set_k: &ConstraintSet, set_k0: &ConstraintSet, reps: usize, seed: u64) -> Result<RatioEstimate> {
    check_len(set_k.dim(), set_k0.dim())?;
    if !set_k.is_polyhedral() || !set_k.is_cone() {
        return Err(Error::NotPolyhedral(set_k.tag()));
    }
    check_reps(reps)?;
    let d0 = set_k0.subspace_dim().ok_or_else(|| {
        Error::InvalidArgument(format!("K0 must be a subspace, got {}", set_k0.tag()))
    })?;
    NullSpec::Subspace(set_k0.clone()).validate(set_k)?;
    let samples = sample_conic(set_k, reps, seed)?;
    let v: Vec<f64> = samples
        .face_dim
        .expect("polyhedral")
        .iter()
        .map(|&f| f as f64 - d0 as f64)
        .collect();
    let m = mean(&v);
    let s2 = variance(&v);
    let (value, se) = if s2 == 0.0 {
        (0.0, 0.0)
    } else {
        let nf = v.len() as f64;
        let mu3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / nf;
        let mu4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / nf;
        let var = (s2 * s2 / m.powi(4) * s2 - 2.0 * s2 / m.powi(3) * mu3 + (mu4 - s2 * s2) / (m * m)) / nf;
        (s2 / m, var.max(0.0).sqrt())
    };
    if value < -3.0 * se || value > 2.0 + 3.0 * se {
        return Err(Error::InvariantViolated(format!(
            "r estimate {value} (se {se}) outside [0, 2]"
        )));
    }
    Ok(RatioEstimate {
        value,
        se,
        v_mean: m,
        v_variance: s2,
        reps,
        seed,
    })
}

/// Residuals of the variance identities for polyhedral cones, each with a
/// jackknife standard error:
/// `var(N) - var(V) - 2 E N`, `var(N) - 2 E N`, `4 E N - var(N)`,
/// where `N = ||Π_K ξ||^2` and `V` is the face dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceIdentities {
    pub decomposition: f64,
    pub decomposition_se: f64,
    pub lower_margin: f64,
    pub lower_se: f64,
    pub upper_margin: f64,
    pub upper_se: f64,
}

pub fn variance_identities(samples: &ConicSamples) -> VarianceIdentities {
    let n = &samples.norm_sq;
    let reps = n.len();
    let face: Option<Vec<f64>> = samples
        .face_dim
        .as_ref()
        .map(|f| f.iter().map(|&v| v as f64).collect());
    let subset = |keep: &dyn Fn(usize) -> bool, xs: &[f64]| -> Vec<f64> {
        xs.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| *v).collect()
    };
    let decomposition_stat = |keep: &dyn Fn(usize) -> bool| {
        let a = subset(keep, n);
        let v = face.as_ref().map(|f| variance(&subset(keep, f))).unwrap_or(f64::NAN);
        variance(&a) - v - 2.0 * mean(&a)
    };
    let lower_stat = |keep: &dyn Fn(usize) -> bool| {
        let a = subset(keep, n);
        variance(&a) - 2.0 * mean(&a)
    };
    let upper_stat = |keep: &dyn Fn(usize) -> bool| {
        let a = subset(keep, n);
        4.0 * mean(&a) - variance(&a)
    };
    let all = |_: usize| true;
    VarianceIdentities {
        decomposition: decomposition_stat(&all),
        decomposition_se: jackknife_se(reps, JACKKNIFE_BATCHES, decomposition_stat),
        lower_margin: lower_stat(&all),
        lower_se: jackknife_se(reps, JACKKNIFE_BATCHES, lower_stat),
        upper_margin: upper_stat(&all),
        upper_se: jackknife_se(reps, JACKKNIFE_BATCHES, upper_stat),
    }
}
