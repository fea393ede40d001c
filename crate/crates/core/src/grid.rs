//! Uniform node-centered Cartesian grids over the box `[-L, L]^n` and the
//! centered finite-difference operators every other module is built on.
//!
//! Nodes are stored in row-major axis order: axis 0 (`x1`) varies slowest.
//! The node count per axis is odd, so the origin is always a node.

use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

/// Largest supported base dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    InvalidDimension(usize),
    #[error("half width must be positive and finite (got {0})")]
    InvalidHalfWidth(f64),
    #[error("nodes per axis must be odd (got {0})")]
    EvenNodeCount(usize),
    #[error("nodes per axis must be at least 5 (got {0})")]
    TooFewNodes(usize),
    #[error("node count {0}^{1} is not representable")]
    TooManyNodes(usize, usize),
    #[error("margin {margin} must be below {limit}")]
    MarginTooLarge { margin: usize, limit: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("malformed field csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A uniform grid with `nodes_per_axis` nodes on each axis of `[-L, L]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
    spacing: f64,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize) -> Result<Self, GridError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GridError::InvalidDimension(dim));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::InvalidHalfWidth(half_width));
        }
        if nodes_per_axis % 2 == 0 {
            return Err(GridError::EvenNodeCount(nodes_per_axis));
        }
        if nodes_per_axis < 5 {
            return Err(GridError::TooFewNodes(nodes_per_axis));
        }
        let total = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(nodes_per_axis));
        if total.is_none() {
            return Err(GridError::TooManyNodes(nodes_per_axis, dim));
        }
        Ok(Self {
            dim,
            half_width,
            nodes_per_axis,
            spacing: 2.0 * half_width / (nodes_per_axis - 1) as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `m^n`.
    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of the `k`-th node along any axis.
    ///
    /// Evaluated as `(k - c) h` with `c` the center index, which equals
    /// `-L + k h` and keeps the origin and the `x -> -x` mirror exact.
    pub fn coord(&self, k: usize) -> f64 {
        let center = (self.nodes_per_axis - 1) / 2;
        (k as f64 - center as f64) * self.spacing
    }

    /// Index of the node at the origin.
    pub fn origin(&self) -> usize {
        let c = (self.nodes_per_axis - 1) / 2;
        self.flat_index(&[c, c, c][..self.dim])
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.nodes_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.nodes_per_axis;
            rest /= self.nodes_per_axis;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &k| acc * self.nodes_per_axis + k)
    }

    /// Base-point coordinates of node `idx`; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let multi = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coord(multi[axis]);
        }
        x
    }

    /// Squared Euclidean norm of the base point of node `idx`.
    pub fn radius_sq(&self, idx: usize) -> f64 {
        self.point(idx)[..self.dim].iter().map(|x| x * x).sum()
    }

    /// True if the node lies on a face of the box.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        self.multi_index(idx)[..self.dim]
            .iter()
            .any(|&k| k == 0 || k == last)
    }

    /// Distance (in node layers) from the node to the nearest face.
    pub fn depth(&self, idx: usize) -> usize {
        let last = self.nodes_per_axis - 1;
        self.multi_index(idx)[..self.dim]
            .iter()
            .map(|&k| k.min(last - k))
            .min()
            .unwrap_or(0)
    }

    /// Same box with the spacing halved.
    pub fn refined(&self) -> Self {
        Self::new(self.dim, self.half_width, 2 * self.nodes_per_axis - 1)
            .expect("refining a valid grid stays valid")
    }

    /// Same spacing on a box of different half width; the half width is
    /// rounded to a whole number of cells.
    pub fn with_half_width(&self, half_width: f64) -> Result<Self, GridError> {
        let cells = (half_width / self.spacing).round().max(2.0) as usize;
        Self::new(self.dim, cells as f64 * self.spacing, 2 * cells + 1)
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::LengthMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(bad));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Samples `f` at every node. `f` receives the first `dim` coordinates.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..spec.len())
            .map(|idx| f(&spec.point(idx)[..spec.dim()]))
            .collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        if self.spec != other.spec {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Multilinear interpolation at an arbitrary base point, or `None`
    /// outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let n = self.spec.dim;
        let m = self.spec.nodes_per_axis;
        let h = self.spec.spacing;
        let l = self.spec.half_width;
        let mut lower = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for axis in 0..n {
            let s = (x[axis] + l) / h;
            let tol = 1e-9 * (m as f64);
            if !(s >= -tol && s <= (m - 1) as f64 + tol) {
                return None;
            }
            let mut s = s.clamp(0.0, (m - 1) as f64);
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            let k = (s.floor() as usize).min(m - 2);
            lower[axis] = k;
            frac[axis] = s - k as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut multi = [0usize; MAX_DIM];
            for axis in 0..n {
                let up = (corner >> axis) & 1 == 1;
                multi[axis] = lower[axis] + up as usize;
                weight *= if up { frac[axis] } else { 1.0 - frac[axis] };
            }
            if weight != 0.0 {
                acc += weight * self.values[self.spec.flat_index(&multi)];
            }
        }
        Some(acc)
    }

    /// Writes the field as `x1,...,xn,value` rows in storage order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), GridError> {
        let header: Vec<String> = (1..=self.spec.dim)
            .map(|i| format!("x{i}"))
            .chain(std::iter::once("value".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (idx, value) in self.values.iter().enumerate() {
            let point = self.spec.point(idx);
            for x in &point[..self.spec.dim] {
                write!(out, "{},", fmt_f64(*x))?;
            }
            writeln!(out, "{}", fmt_f64(*value))?;
        }
        Ok(())
    }

    /// Reads a field written by [`ScalarField::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, GridError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| GridError::Csv("empty input".into()))??;
        let dim = header.split(',').count().saturating_sub(1);
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GridError::InvalidDimension(dim));
        }
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GridError::Csv(format!("row {}: {e}", lineno + 2)))?;
            if cols.len() != dim + 1 {
                return Err(GridError::Csv(format!("row {}: wrong column count", lineno + 2)));
            }
            coords.push(cols[0]);
            values.push(cols[dim]);
        }
        let m = (values.len() as f64).powf(1.0 / dim as f64).round() as usize;
        let half_width = -coords.first().copied().unwrap_or(0.0);
        let spec = GridSpec::new(dim, half_width, m)?;
        ScalarField::new(spec, values)
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A field of fixed-arity real tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    spec: GridSpec,
    arity: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(spec: GridSpec, arity: usize, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != spec.len() * arity {
            return Err(GridError::LengthMismatch {
                expected: spec.len() * arity,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(bad / arity));
        }
        Ok(Self { spec, arity, data })
    }

    /// Interleaves per-component fields.
    pub fn from_components(spec: GridSpec, components: &[Vec<f64>]) -> Self {
        let arity = components.len();
        let mut data = Vec::with_capacity(spec.len() * arity);
        for idx in 0..spec.len() {
            data.extend(components.iter().map(|c| c[idx]));
        }
        Self { spec, arity, data }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.arity..(idx + 1) * self.arity]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.arity).copied().collect()
    }
}

/// Symmetric `n x n` matrix per node, stored padded to 3x3.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    spec: GridSpec,
    data: Vec<[[f64; MAX_DIM]; MAX_DIM]>,
}

impl HessianField {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn at(&self, idx: usize) -> &[[f64; MAX_DIM]; MAX_DIM] {
        &self.data[idx]
    }
}

/// First derivative along `axis`: centered in the interior, second-order
/// one-sided at the two faces.
pub fn diff_axis(spec: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    let m = spec.nodes_per_axis;
    let s = spec.stride(axis);
    let inv = 1.0 / (2.0 * spec.spacing);
    (0..values.len())
        .map(|idx| {
            let k = spec.multi_index(idx)[axis];
            if k == 0 {
                (-3.0 * values[idx] + 4.0 * values[idx + s] - values[idx + 2 * s]) * inv
            } else if k == m - 1 {
                (3.0 * values[idx] - 4.0 * values[idx - s] + values[idx - 2 * s]) * inv
            } else {
                (values[idx + s] - values[idx - s]) * inv
            }
        })
        .collect()
}

/// Second derivative along `axis`: three-point centered in the interior,
/// four-point one-sided at the faces.
pub fn diff2_axis(spec: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    let m = spec.nodes_per_axis;
    let s = spec.stride(axis);
    let inv = 1.0 / (spec.spacing * spec.spacing);
    (0..values.len())
        .map(|idx| {
            let k = spec.multi_index(idx)[axis];
            if k == 0 {
                (2.0 * values[idx] - 5.0 * values[idx + s] + 4.0 * values[idx + 2 * s]
                    - values[idx + 3 * s])
                    * inv
            } else if k == m - 1 {
                (2.0 * values[idx] - 5.0 * values[idx - s] + 4.0 * values[idx - 2 * s]
                    - values[idx - 3 * s])
                    * inv
            } else {
                (values[idx + s] - 2.0 * values[idx] + values[idx - s]) * inv
            }
        })
        .collect()
}

pub fn gradient_fd(field: &ScalarField) -> VectorField {
    let spec = field.spec;
    let components: Vec<Vec<f64>> = (0..spec.dim)
        .map(|axis| diff_axis(&spec, &field.values, axis))
        .collect();
    VectorField::from_components(spec, &components)
}

/// Finite-difference Hessian. Mixed entries compose the first-derivative
/// operators along the two axes (the centered cross stencil in the
/// interior) and are mirrored, so the result is exactly symmetric.
pub fn hessian_fd(field: &ScalarField) -> HessianField {
    let spec = field.spec;
    let n = spec.dim;
    let mut data = vec![[[0.0; MAX_DIM]; MAX_DIM]; spec.len()];
    let first: Vec<Vec<f64>> = (0..n).map(|a| diff_axis(&spec, &field.values, a)).collect();
    for i in 0..n {
        let diag = diff2_axis(&spec, &field.values, i);
        for (idx, d) in diag.into_iter().enumerate() {
            data[idx][i][i] = d;
        }
        for j in (i + 1)..n {
            let mixed = diff_axis(&spec, &first[j], i);
            for (idx, d) in mixed.into_iter().enumerate() {
                data[idx][i][j] = d;
                data[idx][j][i] = d;
            }
        }
    }
    HessianField { spec, data }
}

/// Nodes at least `margin` layers away from every face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorMask {
    spec: GridSpec,
    margin: usize,
}

impl InteriorMask {
    pub fn new(spec: GridSpec, margin: usize) -> Result<Self, GridError> {
        let limit = (spec.nodes_per_axis - 1) / 2;
        if margin >= limit {
            return Err(GridError::MarginTooLarge { margin, limit });
        }
        Ok(Self { spec, margin })
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.spec.depth(idx) >= self.margin
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.spec.len()).filter(move |&idx| self.contains(idx))
    }

    pub fn count(&self) -> usize {
        (self.spec.nodes_per_axis - 2 * self.margin).pow(self.spec.dim as u32)
    }

    pub fn sup_abs(&self, values: &[f64]) -> f64 {
        self.indices().fold(0.0, |acc, idx| acc.max(values[idx].abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: usize, l: f64, m: usize) -> GridSpec {
        GridSpec::new(dim, l, m).unwrap()
    }

    #[test]
    fn make_grid_examples() {
        let g = grid(1, 1.0, 5);
        assert_eq!(g.spacing(), 0.5);
        let xs: Vec<f64> = (0..5).map(|k| g.coord(k)).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);

        let g = grid(2, 2.0, 9);
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.len(), 81);

        assert!(matches!(GridSpec::new(1, 1.0, 4), Err(GridError::EvenNodeCount(4))));
        assert!(matches!(GridSpec::new(1, 1.0, 3), Err(GridError::TooFewNodes(3))));
        assert!(GridSpec::new(1, 0.0, 5).is_err());
        assert!(GridSpec::new(4, 1.0, 5).is_err());
        assert!(GridSpec::new(0, 1.0, 5).is_err());
    }

    #[test]
    fn row_major_order() {
        let g = grid(2, 1.0, 5);
        // Second node varies the last axis.
        assert_eq!(g.point(1)[..2], [-1.0, -0.5]);
        assert_eq!(g.point(5)[..2], [-0.5, -1.0]);
        assert_eq!(g.point(g.origin())[..2], [0.0, 0.0]);
        for idx in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(idx)), idx);
        }
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = grid(2, 1.0, 9);
        let c = ScalarField::constant(g, 3.5);
        let grad = gradient_fd(&c);
        assert!((0..g.len()).all(|i| grad.at(i).iter().all(|&d| d == 0.0)));

        let lin = ScalarField::from_fn(g, |x| 2.0 * x[0] - 0.75 * x[1]);
        let grad = gradient_fd(&lin);
        for idx in 0..g.len() {
            assert!((grad.at(idx)[0] - 2.0).abs() < 1e-13);
            assert!((grad.at(idx)[1] + 0.75).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_exact_on_square() {
        let g = grid(2, 2.0, 9);
        let f = ScalarField::from_fn(g, |x| x[0] * x[0]);
        let grad = gradient_fd(&f);
        for idx in 0..g.len() {
            let x = g.point(idx);
            assert_eq!(grad.at(idx)[0], 2.0 * x[0]);
            assert_eq!(grad.at(idx)[1], 0.0);
        }
    }

    #[test]
    fn hessian_of_product() {
        let g = grid(2, 1.0, 9);
        let f = ScalarField::from_fn(g, |x| x[0] * x[1]);
        let hess = hessian_fd(&f);
        for idx in 0..g.len() {
            let m = hess.at(idx);
            assert!((m[0][1] - 1.0).abs() < 1e-13);
            assert_eq!(m[0][1], m[1][0]);
            assert!(m[0][0].abs() < 1e-12 && m[1][1].abs() < 1e-12);
        }
        let lin = ScalarField::from_fn(g, |x| 3.0 * x[0] + x[1]);
        let hess = hessian_fd(&lin);
        assert!((0..g.len()).all(|i| hess.at(i).iter().flatten().all(|v| v.abs() < 1e-12)));
        let hess = hessian_fd(&ScalarField::constant(g, 2.0));
        assert!((0..g.len()).all(|i| hess.at(i).iter().flatten().all(|&v| v == 0.0)));
    }

    #[test]
    fn hessian_exact_on_quadratics_3d() {
        let g = grid(3, 1.0, 7);
        let f = ScalarField::from_fn(g, |x| {
            0.5 * x[0] * x[0] - x[1] * x[2] + 2.0 * x[2] * x[2] + x[0] * x[1] + x[0]
        });
        let hess = hessian_fd(&f);
        let exact = [[1.0, 1.0, 0.0], [1.0, 0.0, -1.0], [0.0, -1.0, 4.0]];
        for idx in 0..g.len() {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((hess.at(idx)[i][j] - exact[i][j]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn second_order_convergence() {
        // sin(x) cos(y): errors should drop by ~4 per halving.
        let err = |m: usize| {
            let g = grid(2, 1.0, m);
            let f = ScalarField::from_fn(g, |x| x[0].sin() * (0.7 * x[1]).cos());
            let grad = gradient_fd(&f);
            let hess = hessian_fd(&f);
            let mask = InteriorMask::new(g, 1).unwrap();
            let mut eg: f64 = 0.0;
            let mut eh: f64 = 0.0;
            for idx in mask.indices() {
                let x = g.point(idx);
                let (s, c) = (x[0].sin(), x[0].cos());
                let (sy, cy) = ((0.7 * x[1]).sin(), (0.7 * x[1]).cos());
                eg = eg.max((grad.at(idx)[0] - c * cy).abs());
                eg = eg.max((grad.at(idx)[1] + 0.7 * s * sy).abs());
                eh = eh.max((hess.at(idx)[0][0] + s * cy).abs());
                eh = eh.max((hess.at(idx)[0][1] + 0.7 * c * sy).abs());
                eh = eh.max((hess.at(idx)[1][1] + 0.49 * s * cy).abs());
            }
            (eg, eh)
        };
        let (g1, h1) = err(21);
        let (g2, h2) = err(41);
        for ratio in [g1 / g2, h1 / h2] {
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn interior_mask_counts() {
        let g = grid(2, 1.0, 9);
        assert_eq!(InteriorMask::new(g, 0).unwrap().indices().count(), 81);
        let mask = InteriorMask::new(g, 1).unwrap();
        assert_eq!(mask.indices().count(), 49);
        assert_eq!(mask.count(), 49);
        assert!(InteriorMask::new(g, 4).is_err());
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let g = grid(2, 1.0, 9);
        let f = ScalarField::from_fn(g, |x| 1.0 + x[0] - 2.0 * x[1] + 0.5 * x[0] * x[1]);
        let v = f.interpolate(&[0.33, -0.71]).unwrap();
        assert!((v - (1.0 + 0.33 + 1.42 + 0.5 * 0.33 * -0.71)).abs() < 1e-13);
        assert_eq!(f.interpolate(&[1.0, 1.0]).unwrap(), f.at(g.len() - 1));
        assert!(f.interpolate(&[1.2, 0.0]).is_none());
    }

    #[test]
    fn csv_header_and_rows() {
        let g = grid(2, 1.0, 5);
        let f = ScalarField::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,value"));
        assert_eq!(
            lines.next(),
            Some("-1.0000000000000000e0,-1.0000000000000000e0,-1.1000000000000000e1")
        );
        assert_eq!(text.lines().count(), 26);
    }

    #[test]
    fn rejects_bad_values() {
        let g = grid(1, 1.0, 5);
        assert!(ScalarField::new(g, vec![0.0; 4]).is_err());
        assert!(ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
