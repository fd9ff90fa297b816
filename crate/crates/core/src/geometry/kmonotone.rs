// SPDX-License-Identifier: Apache-2.0

//! Projection onto `{mu : D^{k+1} mu >= 0}` with `D` the forward difference.
//!
//! Every element is a polynomial of degree `<= k` plus a nonnegative
//! combination of generators `g_j = S^{k+1} e_j`, where `S` is the cumulative
//! sum with a leading zero. After removing the polynomial part the problem is
//! a nonnegative least squares in the generator weights, solved with the
//! Lawson-Hanson active-set method. The weights equal `D^{k+1} mu`, so the
//! passive set identifies the inactive constraints exactly.

use nalgebra::{DMatrix, DVector};

use super::pava::pava;
use super::poly::{forward_difference, poly_basis};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KMonotoneSolver {
    n: usize,
    k: usize,
    q0: DMatrix<f64>,
    /// Norms of the generators after removing their polynomial part.
    norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMonotoneFit {
    pub point: Vec<f64>,
    /// `n` minus the number of active difference constraints.
    pub face_dim: usize,
    pub iterations: usize,
}

impl KMonotoneSolver {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < k + 2 {
            return Err(Error::InvalidSet(format!(
                "k-monotone cone of order {k} needs n >= {}, got n = {n}",
                k + 2
            )));
        }
        let q0 = poly_basis(n, k);
        let m = n - k - 1;
        let mut norms = Vec::with_capacity(m);
        for j in 0..m {
            let g = residual_generator(&q0, &generator(n, k, j));
            norms.push(g.norm());
        }
        Ok(KMonotoneSolver { n, k, q0, norms })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn constraints(&self) -> usize {
        self.n - self.k - 1
    }

    pub fn poly_basis(&self) -> &DMatrix<f64> {
        &self.q0
    }

    /// Column `j` of the generator matrix: `S^{k+1} e_j`.
    pub fn generator(&self, j: usize) -> Vec<f64> {
        generator(self.n, self.k, j)
    }

    /// `G^T r` via `k+1` suffix-sum passes.
    fn adjoint(&self, r: &[f64]) -> Vec<f64> {
        let mut v = r.to_vec();
        for _ in 0..=self.k {
            // (S^T v)_l = sum_{i > l} v_i
            let len = v.len();
            let mut out = vec![0.0; len - 1];
            let mut acc = 0.0;
            for l in (0..len - 1).rev() {
                acc += v[l + 1];
                out[l] = acc;
            }
            v = out;
        }
        v
    }

    pub fn project(&self, y: &[f64]) -> Result<KMonotoneFit> {
        if self.k == 0 {
            let (point, blocks) = pava(y);
            return Ok(KMonotoneFit {
                point,
                face_dim: blocks.len(),
                iterations: 0,
            });
        }
        let n = self.n;
        let m = self.constraints();
        if forward_difference(y, self.k + 1).iter().all(|&d| d > 0.0) {
            return Ok(KMonotoneFit {
                point: y.to_vec(),
                face_dim: n,
                iterations: 0,
            });
        }

        let yv = DVector::from_column_slice(y);
        let y_res = residual_generator(&self.q0, y);
        let ynorm = yv.norm().max(1.0);
        let tol = 1e-11 * ynorm;
        let max_iter = 3 * m + 10;

        let mut passive: Vec<usize> = Vec::new();
        let mut weights = vec![0.0; m];
        let mut residual = y_res.clone();
        let mut iterations = 0;
        let mut columns: Vec<DVector<f64>> = Vec::new();

        loop {
            let grad = self.adjoint(residual.as_slice());
            let mut best = None;
            let mut best_val = tol;
            for j in 0..m {
                if passive.contains(&j) {
                    continue;
                }
                let w = grad[j] / self.norms[j];
                if w > best_val {
                    best_val = w;
                    best = Some(j);
                }
            }
            let Some(enter) = best else { break };
            if iterations >= max_iter {
                return Err(Error::NotConverged {
                    solver: "k-monotone active set",
                    iterations,
                    residual: best_val,
                });
            }
            iterations += 1;
            passive.push(enter);
            columns.push(residual_generator(&self.q0, &self.generator(enter)) / self.norms[enter]);

            let mut entered_ok = true;
            let mut first = true;
            loop {
                let z = least_squares(&columns, &y_res);
                if z.iter().all(|&v| v > 0.0) {
                    for (slot, &j) in passive.iter().enumerate() {
                        weights[j] = z[slot];
                    }
                    break;
                }
                if first && z[passive.len() - 1] <= 0.0 {
                    // only reachable through rounding: the entering column
                    // cannot reduce the residual, so the current point is optimal
                    entered_ok = false;
                    passive.pop();
                    columns.pop();
                    break;
                }
                first = false;
                let mut step = 1.0f64;
                for (slot, &j) in passive.iter().enumerate() {
                    if z[slot] <= 0.0 {
                        let c = weights[j];
                        let ratio = if c - z[slot] > 0.0 { c / (c - z[slot]) } else { 0.0 };
                        step = step.min(ratio);
                    }
                }
                for (slot, &j) in passive.iter().enumerate() {
                    weights[j] += step * (z[slot] - weights[j]);
                }
                let floor = 1e-14 * (1.0 + weights.iter().cloned().fold(0.0, f64::max));
                let mut slot = 0;
                while slot < passive.len() {
                    let j = passive[slot];
                    if weights[j] <= floor {
                        weights[j] = 0.0;
                        passive.remove(slot);
                        columns.remove(slot);
                    } else {
                        slot += 1;
                    }
                }
                if passive.is_empty() {
                    break;
                }
            }
            if !entered_ok {
                break;
            }
            residual = y_res.clone();
            for (slot, &j) in passive.iter().enumerate() {
                residual.axpy(-weights[j], &columns[slot], 1.0);
            }
        }

        let point: Vec<f64> = y.iter().zip(residual.iter()).map(|(a, r)| a - r).collect();
        Ok(KMonotoneFit {
            point,
            face_dim: self.k + 1 + passive.len(),
            iterations,
        })
    }
}

fn generator(n: usize, k: usize, j: usize) -> Vec<f64> {
    let m = n - k - 1;
    let mut v = vec![0.0; m];
    v[j] = 1.0;
    for _ in 0..=k {
        let mut out = Vec::with_capacity(v.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for x in &v {
            acc += x;
            out.push(acc);
        }
        v = out;
    }
    v
}

fn residual_generator(q0: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    let v = DVector::from_column_slice(v);
    let coef = q0.transpose() * &v;
    v - q0 * coef
}

fn least_squares(columns: &[DVector<f64>], y: &DVector<f64>) -> DVector<f64> {
    let a = DMatrix::from_columns(columns);
    let qr = a.qr();
    let qty = qr.q().transpose() * y;
    qr.r()
        .solve_upper_triangular(&qty)
        .unwrap_or_else(|| DVector::zeros(columns.len()))
}
