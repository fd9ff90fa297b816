// SPDX-License-Identifier: Apache-2.0

//! Literal and file parsing for command-line values.

use std::path::Path;

use conelrt::geometry::{ConstraintSet, LassoDesign};
use conelrt::{NullSpec, Reference};
use nalgebra::DMatrix;

/// A usage error: reported on one line, exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn number(s: &str) -> Result<f64, Usage> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Usage(format!("not a finite number: {t:?}")))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, Usage> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(number).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(rows)
}

/// `1,2,3` or `@file.csv` (all numbers in the file, row by row).
pub fn vector(s: &str) -> Result<Vec<f64>, Usage> {
    let v = match s.strip_prefix('@') {
        Some(path) => read_rows(Path::new(path))?.concat(),
        None => s.split(',').map(number).collect::<Result<Vec<_>, _>>()?,
    };
    if v.is_empty() {
        return Err(Usage("empty vector".into()));
    }
    Ok(v)
}

/// `@file.csv` with one matrix row per line.
pub fn matrix(s: &str) -> Result<DMatrix<f64>, Usage> {
    let path = s
        .strip_prefix('@')
        .ok_or_else(|| Usage(format!("matrices are read from files, expected @file.csv, got {s:?}")))?;
    let rows = read_rows(Path::new(path))?;
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Usage(format!("{path}: rows must be nonempty and of equal length")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Options that describe a constraint set.
#[derive(Debug, Clone, Default)]
pub struct SetSpec {
    pub tag: String,
    pub dim: Option<usize>,
    pub angle: Option<f64>,
    pub order: Option<usize>,
    pub basis: Option<String>,
    pub rank: Option<usize>,
    pub design: Option<String>,
    pub lambda: Option<f64>,
}

impl SetSpec {
    fn need_dim(&self) -> Result<usize, Usage> {
        self.dim.ok_or_else(|| Usage(format!("--set {} requires --dim", self.tag)))
    }

    pub fn build(&self) -> Result<ConstraintSet, Usage> {
        let need = |what: &str| Usage(format!("--set {} requires --{what}", self.tag));
        let set = match self.tag.as_str() {
            "subspace" => match (&self.basis, self.rank) {
                (Some(b), _) => ConstraintSet::span(matrix(b)?)?,
                (None, Some(d)) => {
                    let n = self.need_dim()?;
                    ConstraintSet::subspace(DMatrix::from_fn(n, d, |i, j| f64::from(i == j)))?
                }
                (None, None) => return Err(Usage("--set subspace requires --basis @file.csv or --rank".into())),
            },
            "poly" => ConstraintSet::poly_subspace(self.need_dim()?, self.order.ok_or_else(|| need("order"))?)?,
            "orthant" => ConstraintSet::orthant(self.need_dim()?)?,
            "circular" => ConstraintSet::circular(self.need_dim()?, self.angle.ok_or_else(|| need("angle"))?)?,
            "product-circular" => {
                ConstraintSet::product_circular(self.need_dim()?, self.angle.ok_or_else(|| need("angle"))?)?
            }
            "monotone" => ConstraintSet::monotone(self.need_dim()?)?,
            "kmonotone" => ConstraintSet::kmonotone(self.need_dim()?, self.order.ok_or_else(|| need("order"))?)?,
            "l1image" => {
                let x = matrix(self.design.as_deref().ok_or_else(|| need("design"))?)?;
                let lambda = self.lambda.ok_or_else(|| need("lambda"))?;
                ConstraintSet::l1_image_shared(std::sync::Arc::new(LassoDesign::new(x)?), lambda)
            }
            other => {
                return Err(Usage(format!(
                    "unknown set {other:?}; expected one of subspace, poly, orthant, circular, product-circular, monotone, kmonotone, l1image"
                )))
            }
        };
        if let Some(n) = self.dim {
            if n != set.dim() {
                return Err(Usage(format!("--dim {n} does not match the set dimension {}", set.dim())));
            }
        }
        Ok(set)
    }
}

/// `point:<vector>` or `subspace:poly:<k>`; absent means the origin.
pub fn null(s: Option<&str>, n: usize) -> Result<NullSpec, Usage> {
    let Some(s) = s else {
        return Ok(NullSpec::zero(n));
    };
    if let Some(v) = s.strip_prefix("point:") {
        return Ok(NullSpec::Point(vector(v)?));
    }
    if let Some(k) = s.strip_prefix("subspace:poly:") {
        let k: usize = k.trim().parse().map_err(|_| Usage(format!("bad polynomial degree in {s:?}")))?;
        return Ok(NullSpec::Subspace(ConstraintSet::poly_subspace(n, k)?));
    }
    Err(Usage(format!("--null must be point:<vector> or subspace:poly:<k>, got {s:?}")))
}

/// `normal` or `chisq:<dof>`.
pub fn reference(s: &str) -> Result<Reference, Usage> {
    if s == "normal" {
        return Ok(Reference::StdNormal);
    }
    if let Some(d) = s.strip_prefix("chisq:") {
        let dof = number(d)?;
        if dof > 0.0 {
            return Ok(Reference::ChiSq { dof });
        }
    }
    Err(Usage(format!("--reference must be normal or chisq:<dof>, got {s:?}")))
}
