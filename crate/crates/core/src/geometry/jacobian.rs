// SPDX-License-Identifier: Apache-2.0

//! Jacobians of metric projections (defined almost everywhere).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ConstraintSet, Kind};
use crate::error::{check_len, Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Points closer than this to a kink are reported as degenerate.
pub const KINK_TOLERANCE: f64 = 1e-9;
/// Forward and backward quotients disagreeing by more than this indicate a
/// kink inside the stencil.
const ONE_SIDED_GAP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exactness {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub entries: DMatrix<f64>,
    pub exactness: Exactness,
}

impl JacobianMatrix {
    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.norm_squared()
    }

    pub fn spectral_norm(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.clone().singular_values().max()
    }
}

pub fn jacobian(set: &ConstraintSet, x: &[f64]) -> Result<JacobianMatrix> {
    check_len(set.dim, x.len())?;
    let n = set.dim;
    match &set.kind {
        Kind::Subspace(b) | Kind::PolySubspace { basis: b, .. } => Ok(JacobianMatrix {
            entries: b.as_ref() * b.transpose(),
            exactness: Exactness::ClosedForm,
        }),
        Kind::Orthant => {
            if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| v.abs() < KINK_TOLERANCE) {
                return Err(Error::Degenerate {
                    coordinate: i,
                    distance: v.abs(),
                });
            }
            Ok(JacobianMatrix {
                entries: DMatrix::from_fn(n, n, |i, j| f64::from(i == j && x[i] > 0.0)),
                exactness: Exactness::ClosedForm,
            })
        }
        Kind::Monotone => {
            let r = set.project(x)?;
            let blocks = r.blocks.expect("monotone fits report blocks");
            for w in blocks.windows(2) {
                let gap = r.point[w[1].start] - r.point[w[0].start];
                if gap < KINK_TOLERANCE {
                    return Err(Error::Degenerate {
                        coordinate: w[1].start,
                        distance: gap,
                    });
                }
            }
            let mut entries = DMatrix::zeros(n, n);
            for b in &blocks {
                let w = 1.0 / b.len() as f64;
                for i in b.clone() {
                    for j in b.clone() {
                        entries[(i, j)] = w;
                    }
                }
            }
            Ok(JacobianMatrix {
                entries,
                exactness: Exactness::ClosedForm,
            })
        }
        Kind::Product(parts) => {
            let mut entries = DMatrix::zeros(n, n);
            let mut exactness = Exactness::ClosedForm;
            let mut offset = 0;
            for p in parts {
                let j = jacobian(p, &x[offset..offset + p.dim])?;
                if j.exactness == Exactness::FiniteDifference {
                    exactness = Exactness::FiniteDifference;
                }
                entries
                    .view_mut((offset, offset), (p.dim, p.dim))
                    .copy_from(&j.entries);
                offset += p.dim;
            }
            Ok(JacobianMatrix { entries, exactness })
        }
        _ => finite_difference_jacobian(set, x),
    }
}

/// Central-difference Jacobian with kink detection and one retry at a
/// thousandfold smaller step.
pub fn finite_difference_jacobian(set: &ConstraintSet, x: &[f64]) -> Result<JacobianMatrix> {
    let n = set.dim;
    let center = set.project(x)?.point;
    let mut entries = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let col = fd_column(set, &mut xp, &center, j, FD_STEP)
            .or_else(|_| fd_column(set, &mut xp, &center, j, FD_STEP * 1e-3))?;
        entries.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    Ok(JacobianMatrix {
        entries,
        exactness: Exactness::FiniteDifference,
    })
}

fn fd_column(
    set: &ConstraintSet,
    xp: &mut [f64],
    center: &[f64],
    j: usize,
    h: f64,
) -> Result<Vec<f64>> {
    let orig = xp[j];
    xp[j] = orig + h;
    let plus = set.project(xp);
    xp[j] = orig - h;
    let minus = set.project(xp);
    xp[j] = orig;
    let (plus, minus) = (plus?.point, minus?.point);
    let mut col = Vec::with_capacity(center.len());
    let mut worst = 0.0f64;
    for i in 0..center.len() {
        let fwd = (plus[i] - center[i]) / h;
        let bwd = (center[i] - minus[i]) / h;
        worst = worst.max((fwd - bwd).abs());
        col.push((plus[i] - minus[i]) / (2.0 * h));
    }
    if worst > ONE_SIDED_GAP {
        return Err(Error::Degenerate {
            coordinate: j,
            distance: h,
        });
    }
    Ok(col)
}

/// `div Π_K(x)`: the trace of the Jacobian. Polyhedral sets use the face
/// dimension, which equals the trace almost everywhere.
pub fn divergence(set: &ConstraintSet, x: &[f64]) -> Result<f64> {
    check_len(set.dim, x.len())?;
    match &set.kind {
        Kind::Subspace(_) | Kind::PolySubspace { .. } | Kind::KMonotone(_) => {
            Ok(set.project(x)?.face_dim.expect("polyhedral") as f64)
        }
        Kind::Orthant | Kind::Monotone => Ok(jacobian(set, x)?.trace()),
        // interior least-squares fits are locally the column-space projection
        Kind::L1Image { design, lambda } if design.fit(x, *lambda)?.interior => Ok(design.ncols() as f64),
        Kind::Product(parts) => {
            let mut total = 0.0;
            let mut offset = 0;
            for p in parts {
                total += divergence(p, &x[offset..offset + p.dim])?;
                offset += p.dim;
            }
            Ok(total)
        }
        _ => {
            let center = set.project(x)?.point;
            let mut xp = x.to_vec();
            let mut total = 0.0;
            for j in 0..set.dim {
                let col = fd_column(set, &mut xp, &center, j, FD_STEP)
                    .or_else(|_| fd_column(set, &mut xp, &center, j, FD_STEP * 1e-3))?;
                total += col[j];
            }
            Ok(total)
        }
    }
}
