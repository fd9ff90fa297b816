// SPDX-License-Identifier: Apache-2.0

//! Kolmogorov distances, the normal-approximation bound, and numerical
//! checks of the projection identities.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::conic_stats::{sample_conic, variance_identities};
use crate::error::{check_len, Error, Result};
use crate::geometry::{divergence, jacobian, moreau_split, ConstraintSet, SetTag};
use crate::lrt::{lrs, sq_dist, NullSpec};
use crate::rng::{fill_standard_normal, mix64, replicate, replicate_records};
use crate::special::{chi_squared_cdf, normal_cdf};
#[cfg(test)]
use crate::special::normal_pdf;
use crate::stats::{mean, se_mean};

/// Confidence level of the reported DKW envelope.
const DKW_CONFIDENCE: f64 = 0.99;
/// Largest dimension for finite-difference Jacobian averaging.
pub const FD_MAX_DIM: usize = 200;
/// Largest replication count for finite-difference Jacobian averaging.
pub const FD_MAX_REPS: usize = 2000;
/// Largest dimension for which a dense averaged Jacobian is kept.
pub const DENSE_MAX_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Reference {
    StdNormal,
    ChiSq { dof: f64 },
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Reference::StdNormal => normal_cdf(x),
            Reference::ChiSq { dof } => chi_squared_cdf(x, *dof),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub statistic: f64,
    pub reps: usize,
    pub reference: Reference,
    /// 99% Dvoretzky-Kiefer-Wolfowitz envelope `sqrt(log(2/0.01) / (2 reps))`.
    pub dkw_bound: f64,
}

pub fn dkw_bound(reps: usize) -> f64 {
    ((2.0 / (1.0 - DKW_CONFIDENCE)).ln() / (2.0 * reps as f64)).sqrt()
}

/// Exact sup distance between the empirical CDF of `samples` and `reference`.
pub fn ks_distance(samples: &[f64], reference: Reference) -> Result<DistanceReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("samples contain NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        // ties: the empirical CDF jumps once over the whole run
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = reference.cdf(xs[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    Ok(DistanceReport {
        statistic: d.clamp(0.0, 1.0),
        reps: xs.len(),
        reference,
        dkw_bound: dkw_bound(xs.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rhs_value: f64,
    /// `E||mu_hat - mu0||^2`.
    pub numerator: f64,
    /// `||E mu_hat - mu0||^2`.
    pub bias_sq: f64,
    /// `||E J||_F^2`.
    pub jac_frob_sq: f64,
    pub reps: usize,
}

impl BoundReport {
    fn assemble(numerator: f64, bias_sq: f64, jac_frob_sq: f64, reps: usize) -> Self {
        BoundReport {
            rhs_value: 8.0 * numerator.sqrt() / (2.0 * bias_sq + jac_frob_sq),
            numerator,
            bias_sq,
            jac_frob_sq,
            reps,
        }
    }
}

/// One replication's Jacobian in the cheapest exact form available.
enum JacRecord {
    Diagonal(Vec<bool>),
    Blocks(Vec<Range<usize>>),
    Dense(DMatrix<f64>),
}

enum JacSum {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl JacSum {
    fn add(&mut self, rec: &JacRecord) {
        match (self, rec) {
            (JacSum::Diagonal(s), JacRecord::Diagonal(d)) => {
                for (a, &b) in s.iter_mut().zip(d) {
                    if b {
                        *a += 1.0;
                    }
                }
            }
            (JacSum::Dense(s), JacRecord::Blocks(blocks)) => {
                for b in blocks {
                    let w = 1.0 / b.len() as f64;
                    for i in b.clone() {
                        for j in b.clone() {
                            s[(i, j)] += w;
                        }
                    }
                }
            }
            (JacSum::Dense(s), JacRecord::Dense(m)) => *s += m,
            _ => unreachable!("jacobian record kinds are fixed per set"),
        }
    }

    /// `||A||_F^2 - 2 sum_k q_k^T A q_k` for the averaged matrix `A`.
    fn frob_minus_basis(&self, scale: f64, q0: Option<&DMatrix<f64>>) -> f64 {
        match self {
            JacSum::Diagonal(s) => {
                let mut f: f64 = s.iter().map(|v| (v * scale).powi(2)).sum();
                if let Some(q) = q0 {
                    for k in 0..q.ncols() {
                        f -= 2.0 * s.iter().enumerate().map(|(i, v)| v * scale * q[(i, k)].powi(2)).sum::<f64>();
                    }
                }
                f
            }
            JacSum::Dense(s) => {
                let a = s * scale;
                let mut f = a.norm_squared();
                if let Some(q) = q0 {
                    for k in 0..q.ncols() {
                        let col = q.column(k);
                        f -= 2.0 * col.dot(&(&a * col));
                    }
                }
                f
            }
        }
    }
}

/// `||J||_F^2 - 2 sum_k q_k^T J q_k` for one replication.
fn record_frob_minus_basis(rec: &JacRecord, q0: Option<&DMatrix<f64>>) -> f64 {
    let (mut f, quad): (f64, Box<dyn Fn(usize) -> f64 + '_>) = match rec {
        JacRecord::Diagonal(d) => (
            d.iter().filter(|&&b| b).count() as f64,
            Box::new(move |k| {
                let q = q0.expect("checked");
                d.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| q[(i, k)].powi(2)).sum()
            }),
        ),
        JacRecord::Blocks(blocks) => (
            blocks.len() as f64,
            Box::new(move |k| {
                let q = q0.expect("checked");
                blocks
                    .iter()
                    .map(|b| b.clone().map(|i| q[(i, k)]).sum::<f64>().powi(2) / b.len() as f64)
                    .sum()
            }),
        ),
        JacRecord::Dense(m) => (
            m.norm_squared(),
            Box::new(move |k| {
                let col = q0.expect("checked").column(k);
                col.dot(&(m * col))
            }),
        ),
    };
    if let Some(q) = q0 {
        for k in 0..q.ncols() {
            f -= 2.0 * quad(k);
        }
    }
    f
}

fn jacobian_record(set: &ConstraintSet, y: &[f64]) -> Result<JacRecord> {
    match set.tag() {
        SetTag::Orthant => {
            jacobian(set, y)?; // kink detection
            Ok(JacRecord::Diagonal(y.iter().map(|&v| v > 0.0).collect()))
        }
        SetTag::Monotone => {
            jacobian_blocks(set, y).map(JacRecord::Blocks)
        }
        _ => Ok(JacRecord::Dense(jacobian(set, y)?.entries)),
    }
}

fn jacobian_blocks(set: &ConstraintSet, y: &[f64]) -> Result<Vec<Range<usize>>> {
    let r = set.project(y)?;
    let blocks = r.blocks.expect("monotone fits report blocks");
    for w in blocks.windows(2) {
        let gap = r.point[w[1].start] - r.point[w[0].start];
        if gap < crate::geometry::KINK_TOLERANCE {
            return Err(Error::Degenerate { coordinate: w[1].start, distance: gap });
        }
    }
    Ok(blocks)
}

fn has_closed_form_jacobian(set: &ConstraintSet) -> bool {
    match set.tag() {
        SetTag::Subspace | SetTag::PolySubspace | SetTag::Orthant | SetTag::Monotone => true,
        SetTag::Product => set.parts().expect("product").iter().all(has_closed_form_jacobian),
        _ => false,
    }
}

struct BoundAcc {
    sum_v: Vec<f64>,
    sum_vsq: f64,
    sum_frob: f64,
    count: usize,
    pending: Vec<JacRecord>,
    jsum: Option<JacSum>,
}

/// Right-hand side of the Kolmogorov bound for the standardized statistic
/// under the null. Subspace nulls use the estimator `Π_K - Π_{K0}`, which
/// is the projection onto `K ∩ K0*` for cones.
pub fn normal_bound_rhs(set: &ConstraintSet, null: &NullSpec, reps: usize, seed: u64) -> Result<BoundReport> {
    let n = set.dim();
    null.validate(set)?;
    if let Some(d) = set.subspace_dim() {
        let d0 = match null {
            NullSpec::Point(_) => 0,
            NullSpec::Subspace(k0) => k0.subspace_dim().expect("validated"),
        };
        let d = (d - d0) as f64;
        return Ok(BoundReport::assemble(d, 0.0, d, 0));
    }
    if reps < 2 {
        return Err(Error::TooFewReplications { got: reps, min: 2 });
    }
    let closed = has_closed_form_jacobian(set);
    if !closed && n > FD_MAX_DIM {
        return Err(Error::CostCap(format!(
            "finite-difference Jacobians limited to n <= {FD_MAX_DIM}, got {n}"
        )));
    }
    let diagonal = set.tag() == SetTag::Orthant;
    if !diagonal && n > DENSE_MAX_DIM {
        return Err(Error::CostCap(format!(
            "dense Jacobian averaging limited to n <= {DENSE_MAX_DIM}, got {n}"
        )));
    }
    let reps = if closed { reps } else { reps.min(FD_MAX_REPS) };
    let (mu0, k0) = match null {
        NullSpec::Point(m) => (m.clone(), None),
        NullSpec::Subspace(k0) => (vec![0.0; n], Some(k0)),
    };
    let q0 = k0.and_then(|k| k.basis()).filter(|b| b.ncols() > 0);
    let d0 = q0.map_or(0, |b| b.ncols()) as f64;

    let acc = replicate(
        reps,
        seed,
        || BoundAcc {
            sum_v: vec![0.0; n],
            sum_vsq: 0.0,
            sum_frob: 0.0,
            count: 0,
            pending: Vec::new(),
            jsum: None,
        },
        |acc: &mut BoundAcc, _, rng| {
            let mut y = vec![0.0; n];
            fill_standard_normal(rng, &mut y);
            for (a, b) in y.iter_mut().zip(&mu0) {
                *a += b;
            }
            let mut v = set.project(&y)?.point;
            for (a, b) in v.iter_mut().zip(&mu0) {
                *a -= b;
            }
            if let Some(k) = k0 {
                let p = k.project(&y)?.point;
                for (a, b) in v.iter_mut().zip(&p) {
                    *a -= b;
                }
            }
            let rec = jacobian_record(set, &y)?;
            acc.sum_frob += record_frob_minus_basis(&rec, q0) + d0;
            acc.sum_vsq += v.iter().map(|a| a * a).sum::<f64>();
            for (s, a) in acc.sum_v.iter_mut().zip(&v) {
                *s += a;
            }
            acc.count += 1;
            acc.pending.push(rec);
            Ok::<(), Error>(())
        },
        |into, from| {
            for (a, b) in into.sum_v.iter_mut().zip(&from.sum_v) {
                *a += b;
            }
            into.sum_vsq += from.sum_vsq;
            into.sum_frob += from.sum_frob;
            into.count += from.count;
            let jsum = into.jsum.get_or_insert_with(|| {
                if diagonal {
                    JacSum::Diagonal(vec![0.0; n])
                } else {
                    JacSum::Dense(DMatrix::zeros(n, n))
                }
            });
            for rec in &from.pending {
                jsum.add(rec);
            }
        },
    )?;

    let r = acc.count as f64;
    let numerator = acc.sum_vsq / r;
    let mean_sq: f64 = acc.sum_v.iter().map(|s| (s / r).powi(2)).sum();
    let bias_sq = (mean_sq - (numerator - mean_sq) / (r - 1.0)).max(0.0);
    let jbar_sq = acc.jsum.expect("at least one chunk").frob_minus_basis(1.0 / r, q0) + d0;
    let mean_frob = acc.sum_frob / r;
    let jac_frob_sq = (jbar_sq - (mean_frob - jbar_sq) / (r - 1.0)).max(0.0);
    Ok(BoundReport::assemble(numerator, bias_sq, jac_frob_sq, acc.count))
}

/// Kolmogorov bound `8 / sqrt(δ_K - δ_{K0})` for a cone against a subspace null.
pub fn subspace_cone_bound(delta_k: f64, delta_k0: f64) -> f64 {
    8.0 / (delta_k - delta_k0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub value: f64,
    pub se: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn statistical(value: f64, se: f64) -> Self {
        IdentityCheck {
            value,
            se: Some(se),
            threshold: 3.0 * se,
            passed: value.abs() <= 3.0 * se + 1e-9,
        }
    }

    fn one_sided(margin: f64, se: f64) -> Self {
        IdentityCheck {
            value: margin,
            se: Some(se),
            threshold: -3.0 * se,
            passed: margin >= -3.0 * se,
        }
    }

    fn deterministic(value: f64, threshold: f64) -> Self {
        IdentityCheck {
            value,
            se: None,
            threshold,
            passed: value <= threshold,
        }
    }
}

pub type IdentityReport = BTreeMap<String, IdentityCheck>;

/// Monte-Carlo checks of the Stein identity for the statistic's mean, the
/// Moreau decomposition, the variance bounds of the squared projection norm,
/// and translation invariance along the lineality space.
///
/// Checks that do not apply to `set` (Moreau and variance bounds need a
/// cone; Stein needs a point null; translation needs a lineality direction)
/// are omitted from the report.
pub fn identity_checks(
    set: &ConstraintSet,
    null: &NullSpec,
    mu: &[f64],
    reps: usize,
    seed: u64,
) -> Result<IdentityReport> {
    let n = set.dim();
    check_len(n, mu.len())?;
    null.validate(set)?;
    if reps < 2 {
        return Err(Error::TooFewReplications { got: reps, min: 2 });
    }
    let mut report = IdentityReport::new();
    let lineality = set.lineality_direction();
    let cone = set.is_cone();

    struct Rec {
        stein: f64,
        moreau: f64,
        translation: f64,
    }
    let records = replicate_records(reps, seed, |i, rng| {
        let mut y = vec![0.0; n];
        fill_standard_normal(rng, &mut y);
        for (a, b) in y.iter_mut().zip(mu) {
            *a += b;
        }
        let fit = set.project(&y)?.point;
        let stein = match null {
            NullSpec::Point(mu0) => {
                let t = lrs(set, null, &y)?;
                t - sq_dist(mu, mu0) - 2.0 * divergence(set, &y)? + sq_dist(&fit, mu)
            }
            NullSpec::Subspace(_) => f64::NAN,
        };
        let mut moreau = 0.0f64;
        if cone {
            let (p, q) = moreau_split(set, &y)?;
            let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().max(1.0);
            let ip: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
            moreau = moreau.max(ip.abs() / ny);
            let mut urng = Pcg64Mcg::seed_from_u64(mix64(seed ^ 0xA5A5, i as u64));
            for _ in 0..4 {
                let u = set.sample_point(&mut urng);
                let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
                let ip: f64 = q.iter().zip(&u).map(|(a, b)| a * b).sum();
                moreau = moreau.max(ip / (nu * ny.sqrt()));
            }
        }
        let mut translation = 0.0f64;
        if let Some(u) = &lineality {
            let shifted: Vec<f64> = y.iter().zip(u).map(|(a, b)| a + 5.0 * b).collect();
            let moved = set.project(&shifted)?.point;
            for ((m, f), b) in moved.iter().zip(&fit).zip(u) {
                translation = translation.max((m - 5.0 * b - f).abs());
            }
        }
        Ok::<Rec, Error>(Rec { stein, moreau, translation })
    })?;

    if matches!(null, NullSpec::Point(_)) {
        let d: Vec<f64> = records.iter().map(|r| r.stein).collect();
        report.insert("stein_residual".into(), IdentityCheck::statistical(mean(&d), se_mean(&d)));
    }
    if cone {
        let worst = records.iter().map(|r| r.moreau).fold(0.0, f64::max);
        report.insert("moreau_max_violation".into(), IdentityCheck::deterministic(worst, 1e-8));
        let samples = sample_conic(set, reps, mix64(seed, 2))?;
        let v = variance_identities(&samples);
        report.insert("var_bound_lower_margin".into(), IdentityCheck::one_sided(v.lower_margin, v.lower_se));
        report.insert("var_bound_upper_margin".into(), IdentityCheck::one_sided(v.upper_margin, v.upper_se));
        if samples.face_dim.is_some() {
            report.insert(
                "var_decomposition_residual".into(),
                IdentityCheck::statistical(v.decomposition, v.decomposition_se),
            );
        }
    }
    if lineality.is_some() {
        let worst = records.iter().map(|r| r.translation).fold(0.0, f64::max);
        report.insert("translation_residual".into(), IdentityCheck::deterministic(worst, 1e-8));
    }
    Ok(report)
}

/// Averaged Jacobian entries over the band `|i - j| <= κ n^{2/3}`,
/// `0.1 n <= i, j <= 0.9 n` (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub min_band_value: f64,
    pub min_band_se: f64,
    /// 0-based position of the minimizing entry.
    pub argmin: (usize, usize),
    pub half_width: usize,
    /// 0-based inclusive-exclusive row range of the band.
    pub rows: Range<usize>,
    /// Every row's averaged diagonal entry is at least its band entries.
    pub diagonal_dominant: bool,
    pub reps: usize,
}

struct BandAcc {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

pub fn jacobian_band_check(
    set: &ConstraintSet,
    mu0: &[f64],
    kappa: f64,
    reps: usize,
    seed: u64,
) -> Result<BandReport> {
    let n = set.dim();
    check_len(n, mu0.len())?;
    if reps < 2 {
        return Err(Error::TooFewReplications { got: reps, min: 2 });
    }
    let w = (kappa * (n as f64).powf(2.0 / 3.0)).floor() as usize;
    let lo = ((0.1 * n as f64).ceil() as usize).max(1) - 1;
    let hi = (0.9 * n as f64).floor() as usize; // exclusive, 0-based
    if lo >= hi {
        return Err(Error::InvalidArgument(format!("band is empty for n = {n}")));
    }
    let width = 2 * w + 1;
    let rows = hi - lo;
    // slot (r, c) holds entry (lo + r, lo + r + c - w)
    let in_range = |j: isize| j >= lo as isize && j < hi as isize;
    let monotone = set.tag() == SetTag::Monotone;

    let acc = replicate(
        reps,
        seed,
        || BandAcc { sum: vec![0.0; rows * width], sumsq: vec![0.0; rows * width] },
        |acc: &mut BandAcc, _, rng| {
            let mut y = vec![0.0; n];
            fill_standard_normal(rng, &mut y);
            for (a, b) in y.iter_mut().zip(mu0) {
                *a += b;
            }
            if monotone {
                let blocks = set.project(&y)?.blocks.expect("monotone");
                let mut owner = vec![0usize; n];
                for (k, b) in blocks.iter().enumerate() {
                    for i in b.clone() {
                        owner[i] = k;
                    }
                }
                for r in 0..rows {
                    let i = lo + r;
                    let b = &blocks[owner[i]];
                    let val = 1.0 / b.len() as f64;
                    let j0 = b.start.max(i.saturating_sub(w)).max(lo);
                    let j1 = b.end.min(i + w + 1).min(hi);
                    for j in j0..j1 {
                        let slot = r * width + (j + w - i);
                        acc.sum[slot] += val;
                        acc.sumsq[slot] += val * val;
                    }
                }
            } else {
                let j = jacobian(set, &y)?.entries;
                for r in 0..rows {
                    let i = lo + r;
                    for c in 0..width {
                        let jj = i as isize + c as isize - w as isize;
                        if in_range(jj) {
                            let v = j[(i, jj as usize)];
                            acc.sum[r * width + c] += v;
                            acc.sumsq[r * width + c] += v * v;
                        }
                    }
                }
            }
            Ok::<(), Error>(())
        },
        |into, from| {
            for (a, b) in into.sum.iter_mut().zip(&from.sum) {
                *a += b;
            }
            for (a, b) in into.sumsq.iter_mut().zip(&from.sumsq) {
                *a += b;
            }
        },
    )?;

    let r = reps as f64;
    let mut best = (f64::INFINITY, 0.0, (0, 0));
    let mut dominant = true;
    for row in 0..rows {
        let i = lo + row;
        let diag = acc.sum[row * width + w] / r;
        for c in 0..width {
            let jj = i as isize + c as isize - w as isize;
            if !in_range(jj) {
                continue;
            }
            let m = acc.sum[row * width + c] / r;
            if m > diag + 1e-12 {
                dominant = false;
            }
            if m < best.0 {
                let var = (acc.sumsq[row * width + c] / r - m * m).max(0.0) * r / (r - 1.0);
                best = (m, (var / r).sqrt(), (i, jj as usize));
            }
        }
    }
    Ok(BandReport {
        min_band_value: best.0,
        min_band_se: best.1,
        argmin: best.2,
        half_width: w,
        rows: lo..hi,
        diagonal_dominant: dominant,
        reps,
    })
}

/// Band check for the monotone cone at `mu0_i = slope * i / n`, `κ = 0.1`.
pub fn iso_jacobian_band_check(n: usize, slope: f64, reps: usize, seed: u64) -> Result<BandReport> {
    if n < 200 {
        return Err(Error::InvalidArgument(format!("band check needs n >= 200, got {n}")));
    }
    let set = ConstraintSet::monotone(n)?;
    let mu0: Vec<f64> = (1..=n).map(|i| slope * i as f64 / n as f64).collect();
    let report = jacobian_band_check(&set, &mu0, 0.1, reps, seed)?;
    if report.min_band_se > report.min_band_value {
        return Err(Error::TooFewReplications { got: reps, min: 4 * reps });
    }
    Ok(report)
}
