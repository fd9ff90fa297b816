// SPDX-License-Identifier: Apache-2.0

//! Constrained-form Lasso: `min 1/2 ||y - X theta||^2` s.t. `||theta||_1 <= lambda`.
//!
//! Solved by accelerated projected gradient (FISTA with adaptive restart)
//! on the l1 ball, followed by an exact polish on the detected face.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::l1::project_l1_ball;
use crate::error::{check_len, Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100_000;

/// Precomputed factorizations for a fixed full-column-rank design.
#[derive(Debug, Clone)]
pub struct LassoDesign {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lipschitz: f64,
    lambda_min_gram: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    /// True when the unconstrained least-squares fit was feasible.
    pub interior: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
}

impl LassoDesign {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || p > n {
            return Err(Error::InvalidSet(format!(
                "design must be n x p with 1 <= p <= n, got {n} x {p}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("design has non-finite entries".into()));
        }
        let sv = x.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > smax * 1e-10 * n as f64).count();
        if rank < p {
            return Err(Error::RankDeficient { rank, cols: p });
        }
        let gram = x.transpose() * &x;
        let chol = Cholesky::new(gram.clone()).ok_or(Error::RankDeficient { rank, cols: p })?;
        let lipschitz = power_iteration(&gram) * (1.0 + 1e-9);
        let smin = sv.min();
        Ok(LassoDesign {
            x,
            gram,
            chol,
            lipschitz,
            lambda_min_gram: smin * smin,
        })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Largest eigenvalue of `X^T X` (power-iteration estimate).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Smallest eigenvalue of `X^T X`.
    pub fn lambda_min_gram(&self) -> f64 {
        self.lambda_min_gram
    }

    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        (&self.x * DVector::from_column_slice(theta)).as_slice().to_vec()
    }

    /// Ordinary least squares coefficients `(X^T X)^{-1} X^T y`.
    pub fn least_squares(&self, y: &[f64]) -> Vec<f64> {
        let b = self.x.transpose() * DVector::from_column_slice(y);
        self.chol.solve(&b).as_slice().to_vec()
    }

    fn kkt_residual(&self, theta: &DVector<f64>, b: &DVector<f64>, radius: f64) -> f64 {
        let grad = &self.gram * theta - b;
        let step: Vec<f64> = theta
            .iter()
            .zip(grad.iter())
            .map(|(t, g)| t - g / self.lipschitz)
            .collect();
        let proj = project_l1_ball(&step, radius);
        let diff: f64 = theta
            .iter()
            .zip(&proj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff * self.lipschitz
    }

    pub fn fit(&self, y: &[f64], radius: f64) -> Result<LassoFit> {
        check_len(self.nrows(), y.len())?;
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "l1 radius must be positive, got {radius}"
            )));
        }
        let b = self.x.transpose() * DVector::from_column_slice(y);
        let ols = self.chol.solve(&b);
        if ols.iter().map(|v| v.abs()).sum::<f64>() <= radius {
            let theta = ols.as_slice().to_vec();
            let mu = self.apply(&theta);
            return Ok(LassoFit {
                theta,
                mu,
                interior: true,
                iterations: 0,
                kkt_residual: 0.0,
            });
        }

        let tol = KKT_TOLERANCE * b.norm().max(1.0);
        let l = self.lipschitz;
        let mut theta = DVector::from_vec(project_l1_ball(ols.as_slice(), radius));
        let mut z = theta.clone();
        let mut t = 1.0f64;
        let mut residual = self.kkt_residual(&theta, &b, radius);
        let mut iterations = 0;
        while residual > tol && iterations < MAX_ITERATIONS {
            iterations += 1;
            let grad = &self.gram * &z - &b;
            let step: Vec<f64> = z.iter().zip(grad.iter()).map(|(zi, g)| zi - g / l).collect();
            let next = DVector::from_vec(project_l1_ball(&step, radius));
            // gradient-based adaptive restart
            if (&z - &next).dot(&(&next - &theta)) > 0.0 {
                t = 1.0;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + (&next - &theta) * ((t - 1.0) / t_next);
            theta = next;
            t = t_next;
            residual = self.kkt_residual(&theta, &b, radius);
        }

        if let Some((polished, r)) = self.polish(&theta, &b, radius) {
            if r <= residual.max(tol) {
                theta = polished;
                residual = r;
            }
        }
        if residual > tol {
            return Err(Error::NotConverged {
                solver: "constrained lasso",
                iterations,
                residual,
            });
        }
        let theta = theta.as_slice().to_vec();
        let mu = self.apply(&theta);
        Ok(LassoFit {
            theta,
            mu,
            interior: false,
            iterations,
            kkt_residual: residual,
        })
    }

    /// Exact solve on the face `{supp = S, sign = s, s^T theta_S = radius}`.
    fn polish(
        &self,
        theta: &DVector<f64>,
        b: &DVector<f64>,
        radius: f64,
    ) -> Option<(DVector<f64>, f64)> {
        let scale = theta.amax().max(1e-300);
        let support: Vec<usize> = (0..theta.len())
            .filter(|&j| theta[j].abs() > 1e-12 * scale)
            .collect();
        if support.is_empty() {
            return None;
        }
        let k = support.len();
        let g = DMatrix::from_fn(k, k, |a, c| self.gram[(support[a], support[c])]);
        let s = DVector::from_fn(k, |a, _| theta[support[a]].signum());
        let bs = DVector::from_fn(k, |a, _| b[support[a]]);
        let chol = Cholesky::new(g)?;
        let ginv_b = chol.solve(&bs);
        let ginv_s = chol.solve(&s);
        let denom = s.dot(&ginv_s);
        if denom <= 0.0 {
            return None;
        }
        let tau = (s.dot(&ginv_b) - radius) / denom;
        if tau < 0.0 {
            return None;
        }
        let sol = ginv_b - ginv_s * tau;
        if sol.iter().zip(s.iter()).any(|(v, sg)| v * sg <= 0.0) {
            return None;
        }
        let mut full = DVector::zeros(theta.len());
        for (a, &j) in support.iter().enumerate() {
            full[j] = sol[a];
        }
        let r = self.kkt_residual(&full, b, radius);
        Some((full, r))
    }
}

fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..10_000 {
        let w = m * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - est).abs() <= 1e-14 * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Convenience wrapper returning `(theta_hat, mu_hat)`.
pub fn fit_constrained_lasso(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let design = LassoDesign::new(x.clone())?;
    let fit = design.fit(y, lambda)?;
    Ok((fit.theta, fit.mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_feasible_optimum() {
        let x = DMatrix::identity(2, 2);
        let (theta, mu) = fit_constrained_lasso(&x, &[0.5, 0.2], 1.0).unwrap();
        assert_eq!(theta, vec![0.5, 0.2]);
        assert_eq!(mu, vec![0.5, 0.2]);
    }

    #[test]
    fn identity_design_reduces_to_ball_projection() {
        let x = DMatrix::identity(2, 2);
        let (theta, _) = fit_constrained_lasso(&x, &[3.0, 1.0], 2.0).unwrap();
        assert!((theta[0] - 2.0).abs() < 1e-10);
        assert!(theta[1].abs() < 1e-10);
    }

    #[test]
    fn single_column_clamps() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let (theta, mu) = fit_constrained_lasso(&x, &[1.0, 3.0], 1.0).unwrap();
        assert!((theta[0] - 1.0).abs() < 1e-10);
        assert!((mu[0] - 1.0).abs() < 1e-10 && (mu[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            LassoDesign::new(x),
            Err(Error::RankDeficient { rank: 1, cols: 2 })
        ));
    }

    #[test]
    fn general_design_satisfies_kkt() {
        let x = DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + 0.1 * j as f64);
        let y = [3.0, -1.0, 2.0, 0.5, -2.0, 1.0];
        let design = LassoDesign::new(x.clone()).unwrap();
        let ols = design.least_squares(&y);
        let radius = 0.3 * ols.iter().map(|v| v.abs()).sum::<f64>();
        let fit = design.fit(&y, radius).unwrap();
        assert!(fit.kkt_residual <= 1e-8);
        let l1: f64 = fit.theta.iter().map(|v| v.abs()).sum();
        assert!((l1 - radius).abs() < 1e-9);
        // gradient in the normal cone: |grad_j| <= tau with equality on the support
        let resid = DVector::from_column_slice(&y) - &x * DVector::from_column_slice(&fit.theta);
        let corr = x.transpose() * resid;
        let tau = corr.amax();
        for (j, th) in fit.theta.iter().enumerate() {
            if th.abs() > 1e-10 {
                assert!((corr[j] - tau * th.signum()).abs() < 1e-7);
            }
        }
    }
}
