// SPDX-License-Identifier: Apache-2.0

//! Closed convex constraint sets and their metric projections.

mod circular;
mod jacobian;
mod kmonotone;
mod l1;
mod lasso;
mod pava;
mod poly;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use circular::project_circular;
pub use jacobian::{divergence, finite_difference_jacobian, jacobian, Exactness, JacobianMatrix, FD_STEP, KINK_TOLERANCE};
pub use kmonotone::{KMonotoneFit, KMonotoneSolver};
pub use l1::{l1_threshold, project_l1_ball, soft_threshold};
pub use lasso::{fit_constrained_lasso, LassoDesign, LassoFit};
pub use poly::{forward_difference, poly_basis};

use crate::error::{check_len, Error, Result};
use crate::rng::standard_normal;

/// Orthonormality tolerance for user-supplied subspace bases.
pub const BASIS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetTag {
    Subspace,
    PolySubspace,
    Orthant,
    Circular,
    ProductCircular,
    Monotone,
    KMonotone,
    L1Image,
    Product,
}

impl fmt::Display for SetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetTag::Subspace => "subspace",
            SetTag::PolySubspace => "poly",
            SetTag::Orthant => "orthant",
            SetTag::Circular => "circular",
            SetTag::ProductCircular => "product-circular",
            SetTag::Monotone => "monotone",
            SetTag::KMonotone => "kmonotone",
            SetTag::L1Image => "l1image",
            SetTag::Product => "product",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Subspace(Arc<DMatrix<f64>>),
    PolySubspace { degree: usize, basis: Arc<DMatrix<f64>> },
    Orthant,
    Circular(f64),
    ProductCircular(f64),
    Monotone,
    KMonotone(Arc<KMonotoneSolver>),
    L1Image { design: Arc<LassoDesign>, lambda: f64 },
    Product(Vec<ConstraintSet>),
}

/// A closed convex set in `R^n` together with its projection algorithm.
///
/// Cloning is cheap: factorizations and bases are shared.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    dim: usize,
    kind: Kind,
}

/// Output of a metric projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Dimension of the face whose relative interior contains `point`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_dim: Option<usize>,
    /// Constant pieces of a monotone fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Range<usize>>>,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidSet("ambient dimension must be positive".into()))
    } else {
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!(
            "circular half-angle must lie in (0, pi/2), got {alpha}"
        )))
    }
}

impl ConstraintSet {
    /// Subspace spanned by the orthonormal columns of `basis` (n x d, d may be 0).
    pub fn subspace(basis: DMatrix<f64>) -> Result<Self> {
        let (n, d) = basis.shape();
        check_dim(n)?;
        if d > n {
            return Err(Error::InvalidSet(format!("{d} basis vectors in dimension {n}")));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("basis has non-finite entries".into()));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(d, d)).amax();
        if d > 0 && err > BASIS_TOLERANCE {
            return Err(Error::InvalidSet(format!(
                "basis columns are not orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(ConstraintSet {
            dim: n,
            kind: Kind::Subspace(Arc::new(basis)),
        })
    }

    /// Subspace spanned by arbitrary columns; orthonormalized by SVD with a
    /// rank check.
    pub fn span(vectors: DMatrix<f64>) -> Result<Self> {
        let (n, d) = vectors.shape();
        check_dim(n)?;
        if d == 0 {
            return Self::zero(n);
        }
        let svd = vectors.clone().svd(true, false);
        let smax = svd.singular_values.max();
        let u = svd.u.expect("requested U");
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > smax * 1e-10 * n.max(d) as f64)
            .collect();
        if keep.len() < d {
            return Err(Error::InvalidSet(format!(
                "spanning vectors are linearly dependent (rank {} < {d})",
                keep.len()
            )));
        }
        let basis = DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])]);
        Self::subspace(basis)
    }

    /// The trivial subspace `{0}`.
    pub fn zero(n: usize) -> Result<Self> {
        Self::subspace(DMatrix::zeros(n, 0))
    }

    /// Polynomials of degree at most `degree` sampled on `0..n`.
    pub fn poly_subspace(n: usize, degree: usize) -> Result<Self> {
        check_dim(n)?;
        if degree >= n {
            return Err(Error::InvalidSet(format!(
                "degree {degree} polynomials need n > {degree}, got {n}"
            )));
        }
        Ok(ConstraintSet {
            dim: n,
            kind: Kind::PolySubspace {
                degree,
                basis: Arc::new(poly_basis(n, degree)),
            },
        })
    }

    pub fn orthant(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(ConstraintSet { dim: n, kind: Kind::Orthant })
    }

    /// `{v : v_1 >= ||v|| cos(alpha)}`.
    pub fn circular(n: usize, alpha: f64) -> Result<Self> {
        check_dim(n)?;
        check_alpha(alpha)?;
        Ok(ConstraintSet {
            dim: n,
            kind: Kind::Circular(alpha),
        })
    }

    /// Circular cone on the first `n - 1` coordinates times a free last coordinate.
    pub fn product_circular(n: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSet(format!(
                "product circular cone needs n >= 2, got {n}"
            )));
        }
        check_alpha(alpha)?;
        Ok(ConstraintSet {
            dim: n,
            kind: Kind::ProductCircular(alpha),
        })
    }

    /// Nondecreasing sequences.
    pub fn monotone(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(ConstraintSet { dim: n, kind: Kind::Monotone })
    }

    /// `{mu : D^{k+1} mu >= 0}`.
    pub fn kmonotone(n: usize, k: usize) -> Result<Self> {
        let solver = KMonotoneSolver::new(n, k)?;
        Ok(ConstraintSet {
            dim: n,
            kind: Kind::KMonotone(Arc::new(solver)),
        })
    }

    /// `{X theta : ||theta||_1 <= lambda}`.
    pub fn l1_image(x: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidSet(format!("l1 radius must be positive, got {lambda}")));
        }
        let design = LassoDesign::new(x)?;
        Ok(Self::l1_image_shared(Arc::new(design), lambda))
    }

    /// Same as [`ConstraintSet::l1_image`] but reuses a factorized design.
    pub fn l1_image_shared(design: Arc<LassoDesign>, lambda: f64) -> Self {
        ConstraintSet {
            dim: design.nrows(),
            kind: Kind::L1Image { design, lambda },
        }
    }

    /// Cartesian product; coordinates are concatenated in order.
    pub fn product(parts: Vec<ConstraintSet>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidSet("product of zero sets".into()));
        }
        let dim = parts.iter().map(|p| p.dim).sum();
        Ok(ConstraintSet {
            dim,
            kind: Kind::Product(parts),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> SetTag {
        match &self.kind {
            Kind::Subspace(_) => SetTag::Subspace,
            Kind::PolySubspace { .. } => SetTag::PolySubspace,
            Kind::Orthant => SetTag::Orthant,
            Kind::Circular(_) => SetTag::Circular,
            Kind::ProductCircular(_) => SetTag::ProductCircular,
            Kind::Monotone => SetTag::Monotone,
            Kind::KMonotone(_) => SetTag::KMonotone,
            Kind::L1Image { .. } => SetTag::L1Image,
            Kind::Product(_) => SetTag::Product,
        }
    }

    pub fn is_cone(&self) -> bool {
        match &self.kind {
            Kind::L1Image { .. } => false,
            Kind::Product(parts) => parts.iter().all(|p| p.is_cone()),
            _ => true,
        }
    }

    /// True when projections report a face dimension.
    pub fn is_polyhedral(&self) -> bool {
        match &self.kind {
            Kind::Subspace(_)
            | Kind::PolySubspace { .. }
            | Kind::Orthant
            | Kind::Monotone
            | Kind::KMonotone(_) => true,
            Kind::Product(parts) => parts.iter().all(|p| p.is_polyhedral()),
            _ => false,
        }
    }

    pub fn is_subspace(&self) -> bool {
        matches!(self.kind, Kind::Subspace(_) | Kind::PolySubspace { .. })
    }

    /// Orthonormal basis for subspace tags.
    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Subspace(b) => Some(b),
            Kind::PolySubspace { basis, .. } => Some(basis),
            _ => None,
        }
    }

    /// Dimension of a subspace tag.
    pub fn subspace_dim(&self) -> Option<usize> {
        self.basis().map(|b| b.ncols())
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            Kind::Circular(a) | Kind::ProductCircular(a) => Some(a),
            _ => None,
        }
    }

    /// Polynomial degree (PolySubspace) or monotonicity order (KMonotone).
    pub fn order(&self) -> Option<usize> {
        match &self.kind {
            Kind::PolySubspace { degree, .. } => Some(*degree),
            Kind::KMonotone(s) => Some(s.order()),
            _ => None,
        }
    }

    pub fn design(&self) -> Option<(&Arc<LassoDesign>, f64)> {
        match &self.kind {
            Kind::L1Image { design, lambda } => Some((design, *lambda)),
            _ => None,
        }
    }

    pub fn parts(&self) -> Option<&[ConstraintSet]> {
        match &self.kind {
            Kind::Product(p) => Some(p),
            _ => None,
        }
    }

    /// Short label such as `circular:0.5236` or `kmonotone:1`.
    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Subspace(b) => format!("subspace:{}", b.ncols()),
            Kind::PolySubspace { degree, .. } => format!("poly:{degree}"),
            Kind::Circular(a) => format!("circular:{a}"),
            Kind::ProductCircular(a) => format!("product-circular:{a}"),
            Kind::KMonotone(s) => format!("kmonotone:{}", s.order()),
            Kind::L1Image { design, lambda } => {
                format!("l1image:{}x{}:{lambda}", design.nrows(), design.ncols())
            }
            Kind::Product(parts) => {
                let inner: Vec<String> = parts.iter().map(|p| p.label()).collect();
                format!("product[{}]", inner.join(","))
            }
            _ => self.tag().to_string(),
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult> {
        check_len(self.dim, x.len())?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("coordinate {i} is not finite")));
        }
        let n = self.dim;
        Ok(match &self.kind {
            Kind::Subspace(b) | Kind::PolySubspace { basis: b, .. } => ProjectionResult {
                point: project_onto_basis(b, x),
                face_dim: Some(b.ncols()),
                blocks: None,
            },
            Kind::Orthant => {
                let point: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
                let face = point.iter().filter(|&&v| v > 0.0).count();
                ProjectionResult {
                    point,
                    face_dim: Some(face),
                    blocks: None,
                }
            }
            Kind::Circular(a) => ProjectionResult {
                point: project_circular(x, *a),
                face_dim: None,
                blocks: None,
            },
            Kind::ProductCircular(a) => {
                let mut point = project_circular(&x[..n - 1], *a);
                point.push(x[n - 1]);
                ProjectionResult {
                    point,
                    face_dim: None,
                    blocks: None,
                }
            }
            Kind::Monotone => {
                let (point, blocks) = pava::pava(x);
                ProjectionResult {
                    point,
                    face_dim: Some(blocks.len()),
                    blocks: Some(blocks),
                }
            }
            Kind::KMonotone(solver) => {
                let fit = solver.project(x)?;
                ProjectionResult {
                    point: fit.point,
                    face_dim: Some(fit.face_dim),
                    blocks: None,
                }
            }
            Kind::L1Image { design, lambda } => ProjectionResult {
                point: design.fit(x, *lambda)?.mu,
                face_dim: None,
                blocks: None,
            },
            Kind::Product(parts) => {
                let mut point = Vec::with_capacity(n);
                let mut face = Some(0);
                let mut offset = 0;
                for p in parts {
                    let r = p.project(&x[offset..offset + p.dim])?;
                    point.extend(r.point);
                    face = face.zip(r.face_dim).map(|(a, b)| a + b);
                    offset += p.dim;
                }
                ProjectionResult {
                    point,
                    face_dim: face,
                    blocks: None,
                }
            }
        })
    }

    /// Largest violation of any defining constraint at `v` (0 when `v` is in the set).
    pub fn max_violation(&self, v: &[f64]) -> Result<f64> {
        check_len(self.dim, v.len())?;
        let n = self.dim;
        Ok(match &self.kind {
            Kind::Subspace(b) | Kind::PolySubspace { basis: b, .. } => {
                let p = project_onto_basis(b, v);
                p.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            }
            Kind::Orthant => v.iter().map(|x| -x).fold(0.0, f64::max),
            Kind::Circular(a) => circular::circular_violation(v, *a),
            Kind::ProductCircular(a) => circular::circular_violation(&v[..n - 1], *a),
            Kind::Monotone => v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max),
            Kind::KMonotone(s) => forward_difference(v, s.order() + 1)
                .iter()
                .map(|d| -d)
                .fold(0.0, f64::max),
            Kind::L1Image { design, lambda } => {
                let theta = design.least_squares(v);
                let fitted = design.apply(&theta);
                let off = fitted.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let l1: f64 = theta.iter().map(|t| t.abs()).sum();
                off.max(l1 - lambda)
            }
            Kind::Product(parts) => {
                let mut worst = 0.0f64;
                let mut offset = 0;
                for p in parts {
                    worst = worst.max(p.max_violation(&v[offset..offset + p.dim])?);
                    offset += p.dim;
                }
                worst
            }
        })
    }

    /// Draws a point of the set from its generator description. Independent
    /// of the projection code, so it can serve as a test oracle.
    pub fn sample_point(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.dim;
        let z = standard_normal(rng, n);
        match &self.kind {
            Kind::Subspace(b) | Kind::PolySubspace { basis: b, .. } => {
                let c = DVector::from_vec(standard_normal(rng, b.ncols()));
                (b.as_ref() * c).as_slice().to_vec()
            }
            Kind::Orthant => z.iter().map(|v| v.abs()).collect(),
            Kind::Circular(a) => sample_circular(&z, *a, rng),
            Kind::ProductCircular(a) => {
                let mut v = sample_circular(&z[..n - 1], *a, rng);
                v.push(z[n - 1]);
                v
            }
            Kind::Monotone => {
                let mut acc = z[0];
                let mut out = vec![acc];
                for d in &z[1..] {
                    acc += d.abs();
                    out.push(acc);
                }
                out
            }
            Kind::KMonotone(s) => {
                let q = s.poly_basis();
                let c = DVector::from_vec(standard_normal(rng, q.ncols()));
                let mut v = (q * c).as_slice().to_vec();
                // a few random generators keep the sample well scaled
                for _ in 0..3 {
                    let j = rng.random_range(0..s.constraints());
                    let g = s.generator(j);
                    let gmax = g.iter().cloned().fold(0.0, f64::max).max(1.0);
                    let w: f64 = rng.random::<f64>() * 3.0 / gmax;
                    for (vi, gi) in v.iter_mut().zip(&g) {
                        *vi += w * gi;
                    }
                }
                v
            }
            Kind::L1Image { design, lambda } => {
                let p = design.ncols();
                let t = standard_normal(rng, p);
                let l1: f64 = t.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
                let r: f64 = rng.random();
                let theta: Vec<f64> = t.iter().map(|v| v * lambda * r / l1).collect();
                design.apply(&theta)
            }
            Kind::Product(parts) => parts.iter().flat_map(|p| p.sample_point(rng)).collect(),
        }
    }

    /// A nonzero direction `u` with `K + t u = K` for all real `t`, when one exists.
    pub fn lineality_direction(&self) -> Option<Vec<f64>> {
        let n = self.dim;
        match &self.kind {
            Kind::Subspace(b) | Kind::PolySubspace { basis: b, .. } => {
                (b.ncols() > 0).then(|| b.column(0).iter().cloned().collect())
            }
            Kind::Monotone => Some(vec![1.0; n]),
            Kind::KMonotone(s) => Some(s.poly_basis().column(s.order()).iter().cloned().collect()),
            Kind::ProductCircular(_) => {
                let mut e = vec![0.0; n];
                e[n - 1] = 1.0;
                Some(e)
            }
            Kind::Product(parts) => {
                let dirs: Vec<Option<Vec<f64>>> = parts.iter().map(|p| p.lineality_direction()).collect();
                if dirs.iter().all(|d| d.is_none()) {
                    return None;
                }
                Some(
                    parts
                        .iter()
                        .zip(dirs)
                        .flat_map(|(p, d)| d.unwrap_or_else(|| vec![0.0; p.dim]))
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Checks `other ⊆ self` for a subspace `other` by projecting random
    /// points of `other` and their negatives.
    pub fn contains_subspace(&self, other: &ConstraintSet, rng: &mut impl Rng) -> Result<bool> {
        check_len(self.dim, other.dim)?;
        if !other.is_subspace() {
            return Err(Error::InvalidArgument(format!(
                "expected a subspace, got {}",
                other.tag()
            )));
        }
        for _ in 0..8 {
            let v = other.sample_point(rng);
            for sign in [1.0, -1.0] {
                let w: Vec<f64> = v.iter().map(|x| sign * x).collect();
                let p = self.project(&w)?.point;
                let scale = 1.0 + w.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dist = p.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if dist > 1e-8 * scale {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn sample_circular(z: &[f64], alpha: f64, rng: &mut impl Rng) -> Vec<f64> {
    let t = z[0].abs() + 0.1;
    let rest = &z[1..];
    let s = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r: f64 = rng.random();
    let target = r * t * alpha.tan();
    let mut out = vec![t];
    if s > 0.0 {
        out.extend(rest.iter().map(|v| v * target / s));
    } else {
        out.extend(rest.iter().map(|_| 0.0));
    }
    out
}

fn project_onto_basis(b: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    if b.ncols() == 0 {
        return vec![0.0; x.len()];
    }
    let v = DVector::from_column_slice(x);
    let c = b.transpose() * &v;
    (b * c).as_slice().to_vec()
}

/// Free-function form of [`ConstraintSet::project`].
pub fn project(set: &ConstraintSet, x: &[f64]) -> Result<ProjectionResult> {
    set.project(x)
}

/// Pool-adjacent-violators fit with its blocks.
pub fn pava(y: &[f64]) -> Result<ProjectionResult> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("pava needs a nonempty vector".into()));
    }
    let (point, blocks) = pava::pava(y);
    Ok(ProjectionResult {
        point,
        face_dim: Some(blocks.len()),
        blocks: Some(blocks),
    })
}

/// `x = primal + polar` with `primal = Π_K(x)` and `polar = Π_{K*}(x)`.
pub fn moreau_split(set: &ConstraintSet, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !set.is_cone() {
        return Err(Error::NotACone(set.tag()));
    }
    let primal = set.project(x)?.point;
    let polar = x.iter().zip(&primal).map(|(a, b)| a - b).collect();
    Ok((primal, polar))
}

#[cfg(test)]
mod tests;
