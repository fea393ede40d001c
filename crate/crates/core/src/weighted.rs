//! Gaussian-weighted integrals over the graph: the weighted stability
//! inequality, cutoff energies, volume growth and the flatness certificate.
//!
//! Integrals over `Σ` are pulled back to the base domain,
//! `∫_Σ φ dμ = ∫ φ(x, u(x)) v(x) dx`, and evaluated by the tensor trapezoid
//! rule on grid cells. Cells cut by the boundary of a sublevel region are
//! subsampled with multilinear interpolation of both the integrand and the
//! level function.

use serde::Serialize;
use thiserror::Error;

use crate::flow::{sup_bound_check_field, FlowError, SupBoundReport};
use crate::geometry::GraphContext;
use crate::grid::{GridSpec, ScalarField, MAX_DIM};

#[derive(Debug, Error)]
pub enum WeightedError {
    #[error("cutoff support reaches the grid boundary (|η| = {0:.3e} there)")]
    SupportLeak(f64),
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Subsamples per axis in cells cut by a region boundary.
const SUBSAMPLES: usize = 8;

/// `∫ g dx` over `{level < 0}` (or the whole box when `level` is `None`).
pub fn sublevel_integral(spec: &GridSpec, integrand: &[f64], level: Option<&[f64]>) -> f64 {
    let n = spec.dim();
    let cells_per_axis = spec.nodes_per_axis() - 1;
    let corners = 1usize << n;
    let cell_volume = spec.cell_volume();
    let total_cells = cells_per_axis.pow(n as u32);
    let mut corner_idx = [0usize; 1 << MAX_DIM];
    let mut g = [0.0; 1 << MAX_DIM];
    let mut f = [0.0; 1 << MAX_DIM];
    let mut sum = 0.0;
    for cell in 0..total_cells {
        let mut lower = [0usize; MAX_DIM];
        let mut rest = cell;
        for axis in (0..n).rev() {
            lower[axis] = rest % cells_per_axis;
            rest /= cells_per_axis;
        }
        for c in 0..corners {
            let mut multi = lower;
            for axis in 0..n {
                multi[axis] += (c >> axis) & 1;
            }
            corner_idx[c] = spec.flat_index(&multi);
            g[c] = integrand[corner_idx[c]];
            f[c] = level.map_or(-1.0, |l| l[corner_idx[c]]);
        }
        let inside = f[..corners].iter().filter(|&&v| v < 0.0).count();
        if inside == corners {
            sum += cell_volume * g[..corners].iter().sum::<f64>() / corners as f64;
        } else if inside > 0 {
            sum += cell_volume * covered_mean(n, &g[..corners], &f[..corners]);
        }
    }
    sum
}

/// Mean of the multilinear interpolant of `g` over the part of the unit
/// cell where the interpolant of `f` is negative, by midpoint subsampling.
fn covered_mean(n: usize, g: &[f64], f: &[f64]) -> f64 {
    let subs = SUBSAMPLES.pow(n as u32);
    let mut acc = 0.0;
    for s in 0..subs {
        let mut t = [0.0; MAX_DIM];
        let mut rest = s;
        for coord in t.iter_mut().take(n) {
            *coord = ((rest % SUBSAMPLES) as f64 + 0.5) / SUBSAMPLES as f64;
            rest /= SUBSAMPLES;
        }
        let mut gi = 0.0;
        let mut fi = 0.0;
        for c in 0..g.len() {
            let mut w = 1.0;
            for (axis, &ta) in t.iter().enumerate().take(n) {
                w *= if (c >> axis) & 1 == 1 { ta } else { 1.0 - ta };
            }
            gi += w * g[c];
            fi += w * f[c];
        }
        if fi < 0.0 {
            acc += gi;
        }
    }
    acc / subs as f64
}

/// `∫_Σ φ e^{-|X|^2/4} dμ` over `Σ ∩ B_clip` (the whole grid when `clip`
/// is `None`).
pub fn gaussian_integral(ctx: &GraphContext, phi: &ScalarField, clip: Option<f64>) -> f64 {
    let geom = ctx.geometry();
    let spec = ctx.spec();
    let integrand: Vec<f64> = (0..spec.len())
        .map(|idx| phi.at(idx) * geom.gaussian_weight(idx) * geom.slope()[idx])
        .collect();
    let level = clip.map(|r| ball_level(ctx, r));
    sublevel_integral(spec, &integrand, level.as_deref())
}

/// `|X|^2 - r^2` at every node.
fn ball_level(ctx: &GraphContext, r: f64) -> Vec<f64> {
    let geom = ctx.geometry();
    (0..ctx.spec().len())
        .map(|idx| geom.ambient_radius_sq(idx) - r * r)
        .collect()
}

/// A Lipschitz function on the ambient space `R^{n+1}`.
pub trait Cutoff {
    fn value(&self, x: &[f64]) -> f64;
    /// Ambient gradient, written into `out[..x.len()]`.
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

/// `η(X) = clamp(R + 1 - |X|, 0, 1)`: one on `B_R`, zero outside `B_{R+1}`,
/// linear in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialCutoff {
    pub radius: f64,
}

impl Cutoff for RadialCutoff {
    fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        (self.radius + 1.0 - r).clamp(0.0, 1.0)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let active = r > self.radius && r < self.radius + 1.0;
        for (o, c) in out.iter_mut().zip(x) {
            *o = if active { -c / r } else { 0.0 };
        }
    }
}

/// Smooth bump in the base variables: one on `|x - c| <= inner`, zero for
/// `|x - c| >= outer`, joined by the quintic smoothstep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self, WeightedError> {
        if !(inner >= 0.0 && outer > inner) {
            return Err(WeightedError::Invalid(format!(
                "bump radii must satisfy 0 <= inner < outer (got {inner}, {outer})"
            )));
        }
        Ok(Self { center, inner, outer })
    }

    fn offset(&self, x: &[f64]) -> (f64, [f64; MAX_DIM]) {
        let mut d = [0.0; MAX_DIM];
        for (a, c) in self.center.iter().enumerate() {
            d[a] = x[a] - c;
        }
        (d.iter().map(|c| c * c).sum::<f64>().sqrt(), d)
    }

    fn ramp(&self, dist: f64) -> f64 {
        ((self.outer - dist) / (self.outer - self.inner)).clamp(0.0, 1.0)
    }
}

impl Cutoff for Bump {
    fn value(&self, x: &[f64]) -> f64 {
        let (dist, _) = self.offset(x);
        let s = self.ramp(dist);
        s * s * s * (10.0 + s * (6.0 * s - 15.0))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let (dist, d) = self.offset(x);
        if dist <= self.inner || dist >= self.outer {
            return;
        }
        let s = self.ramp(dist);
        let dsmooth = 30.0 * s * s * (s - 1.0) * (s - 1.0);
        let scale = -dsmooth / ((self.outer - self.inner) * dist);
        for a in 0..self.center.len() {
            out[a] = scale * d[a];
        }
    }
}

/// Nodal values of `η ∘ X` and of `|∇_Σ η|^2 = |Dη|^2 - <Dη, n>^2`.
pub fn pull_back(ctx: &GraphContext, cutoff: &dyn Cutoff) -> (Vec<f64>, Vec<f64>) {
    let geom = ctx.geometry();
    let n = ctx.spec().dim();
    let mut grad = [0.0; MAX_DIM + 1];
    let mut values = Vec::with_capacity(ctx.spec().len());
    let mut tangential = Vec::with_capacity(ctx.spec().len());
    for idx in 0..ctx.spec().len() {
        let x = geom.position().at(idx);
        values.push(cutoff.value(x));
        cutoff.gradient(x, &mut grad[..=n]);
        let normal = geom.normal().at(idx);
        let full: f64 = grad[..=n].iter().map(|g| g * g).sum();
        let along: f64 = grad[..=n].iter().zip(normal).map(|(g, m)| g * m).sum();
        tangential.push((full - along * along).max(0.0));
    }
    (values, tangential)
}

/// Both sides of `∫ η^2 |A|^2 e^{-|X|^2/4} <= ∫ |∇_Σ η|^2 e^{-|X|^2/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub h: f64,
    #[serde(skip)]
    pub domain_radius: f64,
    pub pass: bool,
}

/// Slack allowed on the stability inequality for quadrature rounding.
pub const STABILITY_SLACK: f64 = 1e-9;

pub fn stability_sides(ctx: &GraphContext, cutoff: &dyn Cutoff) -> Result<WeightedReport, WeightedError> {
    let spec = ctx.spec();
    let (eta, grad_sq) = pull_back(ctx, cutoff);
    let leak = (0..spec.len())
        .filter(|&idx| spec.is_boundary(idx))
        .map(|idx| eta[idx].abs().max(grad_sq[idx].sqrt()))
        .fold(0.0, f64::max);
    if leak > 0.0 {
        return Err(WeightedError::SupportLeak(leak));
    }
    let a2 = ctx.geometry().a_norm_sq();
    let lhs_field: Vec<f64> = eta.iter().zip(a2).map(|(e, a)| e * e * a).collect();
    let lhs = gaussian_integral(ctx, &ScalarField::new(*spec, lhs_field).expect("finite"), None);
    let rhs = gaussian_integral(ctx, &ScalarField::new(*spec, grad_sq).expect("finite"), None);
    let margin = rhs - lhs;
    Ok(WeightedReport {
        lhs,
        rhs,
        margin,
        h: spec.spacing(),
        domain_radius: spec.half_width(),
        pass: margin >= -STABILITY_SLACK,
    })
}

/// Increasing radii `R_j` of the cutoffs `clamp(R_j + 1 - |X|, 0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffFamily {
    radii: Vec<f64>,
}

impl CutoffFamily {
    pub fn new(radii: Vec<f64>) -> Result<Self, WeightedError> {
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(WeightedError::Invalid("radii must be positive".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(WeightedError::Invalid("radii must increase".into()));
        }
        Ok(Self { radii })
    }

    /// `R_j = j` for `j = 1..=count`.
    pub fn integers(count: usize) -> Self {
        Self {
            radii: (1..=count).map(|j| j as f64).collect(),
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn cutoffs(&self) -> impl Iterator<Item = RadialCutoff> + '_ {
        self.radii.iter().map(|&radius| RadialCutoff { radius })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffEnergy {
    pub radius: f64,
    /// `∫ |∇_Σ η_j|^2 e^{-|X|^2/4}`.
    pub energy: f64,
    /// `∫_{B_{R_j+1} \ B_{R_j}} 2 e^{-|X|^2/4}`.
    pub crude_bound: f64,
}

/// Errors unless every boundary node of the box lies outside `B_r`.
fn require_footprint(ctx: &GraphContext, r: f64) -> Result<(), WeightedError> {
    let spec = ctx.spec();
    let geom = ctx.geometry();
    let inside = (0..spec.len())
        .filter(|&idx| spec.is_boundary(idx))
        .any(|idx| geom.ambient_radius_sq(idx) < r * r);
    if inside {
        return Err(WeightedError::DomainTooSmall(format!(
            "Σ ∩ B_{r} reaches the boundary of the box of half width {}",
            spec.half_width()
        )));
    }
    Ok(())
}

pub fn cutoff_energy(ctx: &GraphContext, family: &CutoffFamily) -> Result<Vec<CutoffEnergy>, WeightedError> {
    if let Some(&largest) = family.radii.last() {
        require_footprint(ctx, largest + 1.0)?;
    }
    let spec = ctx.spec();
    let geom = ctx.geometry();
    let weight: Vec<f64> = (0..spec.len())
        .map(|idx| geom.gaussian_weight(idx) * geom.slope()[idx])
        .collect();
    Ok(family
        .cutoffs()
        .map(|cutoff| {
            let inner = cutoff.radius;
            let outer = inner + 1.0;
            let level: Vec<f64> = (0..spec.len())
                .map(|idx| {
                    let r2 = geom.ambient_radius_sq(idx);
                    (inner * inner - r2).max(r2 - outer * outer)
                })
                .collect();
            // On the annulus |∇_Σ η|^2 = 1 - <X/|X|, n>^2; use that smooth
            // extension so cut cells see no kink.
            let tangential: Vec<f64> = (0..spec.len())
                .map(|idx| {
                    let r2 = geom.ambient_radius_sq(idx);
                    let s = geom.support(idx);
                    let radial_normal_sq = if r2 > 0.0 { s * s / r2 } else { 0.0 };
                    (1.0 - radial_normal_sq).max(0.0) * weight[idx]
                })
                .collect();
            let doubled: Vec<f64> = weight.iter().map(|w| 2.0 * w).collect();
            CutoffEnergy {
                radius: inner,
                energy: sublevel_integral(spec, &tangential, Some(&level)),
                crude_bound: sublevel_integral(spec, &doubled, Some(&level)),
            }
        })
        .collect())
}

/// Half the area of the unit `n`-sphere in `R^{n+1}`: `π` for `n = 1`,
/// `2π` for `n = 2`.
pub fn omega(n: usize) -> f64 {
    use std::f64::consts::PI;
    // |S^k| = 2π |S^{k-2}| / (k - 1), |S^0| = 2, |S^1| = 2π.
    let mut area = if n % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut k = if n % 2 == 0 { 0 } else { 1 };
    while k < n {
        k += 2;
        area *= 2.0 * PI / (k - 1) as f64;
    }
    area / 2.0
}

/// `Vol(Σ ∩ B_R) = ∫_{|x|^2 + u^2 < R^2} v dx`.
pub fn graph_volume(ctx: &GraphContext, radius: f64) -> Result<f64, WeightedError> {
    if !(radius >= 0.0) {
        return Err(WeightedError::Invalid(format!("radius must be non-negative (got {radius})")));
    }
    require_footprint(ctx, radius)?;
    let level = ball_level(ctx, radius);
    Ok(sublevel_integral(ctx.spec(), ctx.geometry().slope(), Some(&level)))
}

/// Volume of `Σ ∩ B_R` against `2 ω_n R^n (1 + R^2 + M_R^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeReport {
    pub radius: f64,
    pub volume: f64,
    pub bound: f64,
    /// `2 ω_n R^n (1 + R^n + M_R^2)`, the form with `R^n` inside.
    pub statement_bound: f64,
    pub m_r: f64,
    pub omega_n: f64,
    pub pass: bool,
}

pub fn volume_check(ctx: &GraphContext, radius: f64) -> Result<VolumeReport, WeightedError> {
    let volume = graph_volume(ctx, radius)?;
    let spec = ctx.spec();
    let n = spec.dim();
    let m_r = (0..spec.len())
        .filter(|&idx| spec.radius_sq(idx) < radius * radius)
        .map(|idx| ctx.height().at(idx).abs())
        .fold(0.0, f64::max);
    let omega_n = omega(n);
    let rn = radius.powi(n as i32);
    let bound = 2.0 * omega_n * rn * (1.0 + radius * radius + m_r * m_r);
    let statement_bound = 2.0 * omega_n * rn * (1.0 + rn + m_r * m_r);
    Ok(VolumeReport {
        radius,
        volume,
        bound,
        statement_bound,
        m_r,
        omega_n,
        pass: volume <= bound,
    })
}

/// Linear height growth `M_R <= C1 R` at each radius.
pub fn height_growth_check(ctx: &GraphContext, radii: &[f64]) -> Result<Vec<SupBoundReport>, WeightedError> {
    radii
        .iter()
        .map(|&r| sup_bound_check_field(ctx.height(), r).map_err(WeightedError::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatnessThresholds {
    pub mass: f64,
    pub fit: f64,
}

impl Default for FlatnessThresholds {
    fn default() -> Self {
        Self { mass: 1e-6, fit: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Flat,
    NotFlat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub clip_radius: f64,
    /// `∫ |A|^2 e^{-|X|^2/4}` over `Σ ∩ B_clip`.
    pub weighted_a2_mass: f64,
    /// Least-squares slope of `u ≈ a·x`.
    pub slope: Vec<f64>,
    pub fit_residual: f64,
    pub verdict: Verdict,
}

/// Weighted curvature mass over the largest cutoff ball plus a linear fit
/// through the origin; `FLAT` iff both are below the thresholds.
pub fn flatness_certificate(
    ctx: &GraphContext,
    family: &CutoffFamily,
    thresholds: FlatnessThresholds,
) -> FlatnessReport {
    let spec = ctx.spec();
    let geom = ctx.geometry();
    let n = spec.dim();
    let clip = family.radii().last().map_or(f64::INFINITY, |r| r + 1.0);
    let a2 = geom.field(geom.a_norm_sq());
    let weighted_a2_mass = gaussian_integral(ctx, &a2, clip.is_finite().then_some(clip));

    let region: Vec<usize> = (0..spec.len())
        .filter(|&idx| geom.ambient_radius_sq(idx) < clip * clip)
        .collect();
    let nodes: Vec<usize> = if region.len() > n { region } else { (0..spec.len()).collect() };
    let mut normal = [[0.0; MAX_DIM]; MAX_DIM];
    let mut rhs = [0.0; MAX_DIM];
    for &idx in &nodes {
        let x = spec.point(idx);
        for i in 0..n {
            rhs[i] += x[i] * ctx.height().at(idx);
            for j in 0..n {
                normal[i][j] += x[i] * x[j];
            }
        }
    }
    let slope = solve_small(n, normal, rhs);
    let fit_residual = nodes
        .iter()
        .map(|&idx| {
            let x = spec.point(idx);
            let fit: f64 = (0..n).map(|i| slope[i] * x[i]).sum();
            (ctx.height().at(idx) - fit).abs()
        })
        .fold(0.0, f64::max);
    let verdict = if weighted_a2_mass < thresholds.mass && fit_residual < thresholds.fit {
        Verdict::Flat
    } else {
        Verdict::NotFlat
    };
    FlatnessReport {
        clip_radius: clip,
        weighted_a2_mass,
        slope: slope[..n].to_vec(),
        fit_residual,
        verdict,
    }
}

/// Gaussian elimination with partial pivoting for the tiny normal equations.
fn solve_small(n: usize, mut a: [[f64; MAX_DIM]; MAX_DIM], mut b: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, pivot);
        b.swap(col, pivot);
        if a[col][col] == 0.0 {
            continue;
        }
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; MAX_DIM];
    for row in (0..n).rev() {
        let tail: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = if a[row][row] == 0.0 { 0.0 } else { (b[row] - tail) / a[row][row] };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use std::f64::consts::PI;

    fn ctx(profile: Profile, dim: usize, l: f64, m: usize) -> GraphContext {
        let spec = GridSpec::new(dim, l, m).unwrap();
        GraphContext::new(profile.discretize(&spec).unwrap())
    }

    #[test]
    fn omega_values() {
        assert!((omega(1) - PI).abs() < 1e-15);
        assert!((omega(2) - 2.0 * PI).abs() < 1e-15);
        assert!((omega(3) - PI * PI).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral_1d() {
        let c = ctx(Profile::Plane(vec![0.0]), 1, 20.0, 401);
        let one = ScalarField::constant(*c.spec(), 1.0);
        let value = gaussian_integral(&c, &one, None);
        assert!((value - 2.0 * PI.sqrt()).abs() < 1e-10, "{value}");
        let zero = ScalarField::zeros(*c.spec());
        assert_eq!(gaussian_integral(&c, &zero, Some(5.0)), 0.0);
    }

    #[test]
    fn gaussian_integral_2d_clipped() {
        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 10.0, 201);
        let one = ScalarField::constant(*c.spec(), 1.0);
        let value = gaussian_integral(&c, &one, Some(10.0));
        let exact = 4.0 * PI * (1.0 - (-25.0f64).exp());
        assert!((value - exact).abs() < 1e-6 * exact, "{value} vs {exact}");
    }

    #[test]
    fn gaussian_quadrature_converges_on_cut_region() {
        // Clip at radius 1.5 where the weight is far from negligible; the
        // closed form is 4π (1 - e^{-r^2/4}).
        let exact = 4.0 * PI * (1.0 - (-1.5f64 * 1.5 / 4.0).exp());
        let err = |m: usize| {
            let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 2.0, m);
            let one = ScalarField::constant(*c.spec(), 1.0);
            (gaussian_integral(&c, &one, Some(1.5)) - exact).abs()
        };
        assert!(err(41) < 2e-3 * exact);
        assert!(err(161) < err(41));
    }

    #[test]
    fn bump_gradient_matches_finite_differences() {
        let bump = Bump::new(vec![0.1, -0.2], 0.3, 0.8).unwrap();
        let x = [0.4, 0.1, 1.7];
        let mut g = [0.0; 3];
        bump.gradient(&x, &mut g);
        let eps = 1e-6;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += eps;
            xm[a] -= eps;
            let fd = (bump.value(&xp) - bump.value(&xm)) / (2.0 * eps);
            assert!((fd - g[a]).abs() < 1e-8);
        }
        assert_eq!(bump.value(&[0.1, -0.2, 5.0]), 1.0);
        assert_eq!(bump.value(&[1.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn tangential_gradient_agrees_with_surface_calculus() {
        // Analytic projection of Dη versus g^{ij} η_i η_j of the pulled-back
        // nodal field.
        let bump = Bump::new(vec![0.1, 0.0], 0.2, 0.7).unwrap();
        let gap = |m: usize| {
            let c = ctx(Profile::SphereCap, 2, 1.2, m);
            let (eta, analytic) = pull_back(&c, &bump);
            let field = ScalarField::new(*c.spec(), eta).unwrap();
            let d = crate::geometry::laplace_beltrami(&c, &field);
            let scale = analytic.iter().cloned().fold(0.0, f64::max);
            let worst = analytic
                .iter()
                .zip(&d.gradient_norm_sq)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst / scale
        };
        let (coarse, fine) = (gap(161), gap(321));
        assert!(coarse < 1e-2, "{coarse}");
        assert!(coarse / fine > 3.4, "{coarse} {fine}");
    }

    #[test]
    fn plane_stability_sides() {
        let c = ctx(Profile::Plane(vec![0.5, -0.3]), 2, 2.0, 81);
        let bump = Bump::new(vec![0.0, 0.2], 0.5, 1.5).unwrap();
        let r = stability_sides(&c, &bump).unwrap();
        assert!(r.lhs < 1e-20);
        assert!(r.rhs > 0.0);
        assert!(r.pass);
    }

    #[test]
    fn zero_cutoff_gives_zero_sides() {
        struct Zero;
        impl Cutoff for Zero {
            fn value(&self, _: &[f64]) -> f64 {
                0.0
            }
            fn gradient(&self, _: &[f64], out: &mut [f64]) {
                out.iter_mut().for_each(|o| *o = 0.0);
            }
        }
        let c = ctx(Profile::SphereCap, 2, 1.0, 41);
        let r = stability_sides(&c, &Zero).unwrap();
        assert_eq!((r.lhs, r.rhs, r.margin), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_cap_stability_margin() {
        let bump = Bump::new(vec![0.0, 0.0], 0.4, 0.9).unwrap();
        let margin = |m: usize| {
            let c = ctx(Profile::SphereCap, 2, 1.2, m);
            let r = stability_sides(&c, &bump).unwrap();
            assert!(r.lhs > 0.0);
            r.margin
        };
        let (a, b) = (margin(81), margin(161));
        assert!(a >= -1e-9 && b >= -1e-9);
        assert!(((a - b) / b).abs() < 0.05);
    }

    #[test]
    fn support_leak_is_rejected() {
        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 1.0, 21);
        let bump = Bump::new(vec![0.0, 0.0], 0.5, 1.2).unwrap();
        assert!(matches!(stability_sides(&c, &bump), Err(WeightedError::SupportLeak(_))));
    }

    #[test]
    fn flat_cutoff_energy_matches_radial_formula() {
        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 10.0, 201);
        let energies = cutoff_energy(&c, &CutoffFamily::integers(8)).unwrap();
        for e in &energies {
            let r = e.radius;
            let exact = 4.0 * PI * ((-r * r / 4.0).exp() - (-(r + 1.0) * (r + 1.0) / 4.0).exp());
            assert!(((e.energy - exact) / exact).abs() < 0.02, "R = {r}");
            assert!((e.crude_bound - 2.0 * e.energy).abs() < 1e-12 * e.crude_bound);
        }
        assert!(cutoff_energy(&c, &CutoffFamily::new(vec![]).unwrap()).unwrap().is_empty());
        assert!(matches!(
            cutoff_energy(&c, &CutoffFamily::integers(10)),
            Err(WeightedError::DomainTooSmall(_))
        ));
    }

    #[test]
    fn tilted_plane_energy_decays() {
        let c = ctx(Profile::Plane(vec![0.3, 0.1]), 2, 10.0, 201);
        let e: Vec<f64> = cutoff_energy(&c, &CutoffFamily::integers(8))
            .unwrap()
            .iter()
            .map(|e| e.energy)
            .collect();
        assert!(e[2..].windows(2).all(|w| w[1] < w[0]));
        assert!(e[7] < 1e-5 * e[0]);
    }

    #[test]
    fn flat_and_tilted_disk_volumes() {
        for slope in [vec![0.0, 0.0], vec![1.0, 0.0]] {
            let c = ctx(Profile::Plane(slope), 2, 3.0, 121);
            let v = graph_volume(&c, 2.0).unwrap();
            assert!((v - 4.0 * PI).abs() < 0.01 * 4.0 * PI, "{v}");
        }
        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 3.0, 121);
        assert_eq!(graph_volume(&c, 0.0).unwrap(), 0.0);
        assert!(graph_volume(&c, 3.5).is_err());
    }

    #[test]
    fn volume_bound_examples() {
        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 3.0, 121);
        let r = volume_check(&c, 2.0).unwrap();
        assert!((r.bound - 80.0 * PI).abs() < 1e-12);
        assert!(r.pass);
        let c = ctx(Profile::Plane(vec![1.0, 0.0]), 2, 3.0, 121);
        let r = volume_check(&c, 2.0).unwrap();
        // The sup over the open ball approaches R from below on the grid.
        assert!(r.m_r < 2.0 && r.m_r > 1.9);
        assert!(r.pass);
        let r = volume_check(&c, 0.0).unwrap();
        assert_eq!((r.volume, r.bound), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn height_growth_has_teeth() {
        let spec = GridSpec::new(2, 30.0, 121).unwrap();
        let c = GraphContext::new(ScalarField::from_fn(spec, |x| x[0] * x[0]));
        let reports = height_growth_check(&c, &[2.0, 25.0]).unwrap();
        assert!(reports[0].pass);
        assert!(!reports[1].pass);
        assert!(height_growth_check(&c, &[0.5]).is_err());
    }

    #[test]
    fn flatness_verdicts() {
        let family = CutoffFamily::integers(3);
        let c = ctx(Profile::Plane(vec![0.4, -0.9]), 2, 2.0, 41);
        let r = flatness_certificate(&c, &family, FlatnessThresholds::default());
        assert_eq!(r.verdict, Verdict::Flat);
        assert!(r.weighted_a2_mass < 1e-12 && r.fit_residual < 1e-12);
        assert!((r.slope[0] - 0.4).abs() < 1e-12 && (r.slope[1] + 0.9).abs() < 1e-12);

        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 2.0, 41);
        let r = flatness_certificate(&c, &family, FlatnessThresholds::default());
        assert_eq!(r.verdict, Verdict::Flat);
        assert_eq!(r.slope, vec![0.0, 0.0]);

        let c = ctx(Profile::SphereCap, 2, 1.2, 81);
        let r = flatness_certificate(&c, &family, FlatnessThresholds::default());
        assert_eq!(r.verdict, Verdict::NotFlat);
        let one = ScalarField::constant(*c.spec(), 1.0);
        let area = gaussian_integral(&c, &one, None);
        assert!((r.weighted_a2_mass / area - 0.5).abs() < 0.01);
        assert!(r.fit_residual > 1.0);
    }
}
