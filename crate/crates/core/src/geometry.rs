//! Differential geometry of a graph `Σ = {(x, u(x))}` sampled on a grid:
//! normals, mean curvature, `|A|^2`, the shrinker residual, the
//! Laplace-Beltrami and stability operators, and the identity residuals
//! that hold on every self-shrinker.
//!
//! Conventions: `n = (-Du, 1)/v` is the upward normal, `v = sqrt(1+|Du|^2)`,
//! and `H = div(n)`, so the round sphere about the origin has `H > 0` on its
//! upper cap and a shrinker satisfies `H = <x, n>/2`.

use serde::Serialize;

use crate::grid::{
    diff_axis, gradient_fd, hessian_fd, GridError, GridSpec, HessianField, InteriorMask,
    ScalarField, VectorField, MAX_DIM,
};

/// Inverse induced metric `g^{ij} = δ_ij - p_i p_j / v^2`.
pub fn inverse_metric(p: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
    let v2 = 1.0 + p.iter().map(|q| q * q).sum::<f64>();
    let mut g = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..p.len() {
        for j in 0..p.len() {
            g[i][j] = if i == j { 1.0 } else { 0.0 } - p[i] * p[j] / v2;
        }
    }
    g
}

/// Per-node geometry of the graph of a height field.
#[derive(Debug, Clone)]
pub struct GraphGeometry {
    spec: GridSpec,
    gradient: VectorField,
    hessian: HessianField,
    slope: Vec<f64>,
    normal: VectorField,
    mean_curvature: Vec<f64>,
    a_norm_sq: Vec<f64>,
    vertical_normal: Vec<f64>,
    position: VectorField,
}

impl GraphGeometry {
    pub fn compute(u: &ScalarField) -> Self {
        let spec = *u.spec();
        let n = spec.dim();
        let gradient = gradient_fd(u);
        let hessian = hessian_fd(u);
        let len = spec.len();
        let mut slope = Vec::with_capacity(len);
        let mut normal = Vec::with_capacity(len * (n + 1));
        let mut position = Vec::with_capacity(len * (n + 1));
        let mut mean_curvature = Vec::with_capacity(len);
        let mut a_norm_sq = Vec::with_capacity(len);
        let mut vertical_normal = Vec::with_capacity(len);
        for idx in 0..len {
            let p = gradient.at(idx);
            let q = hessian.at(idx);
            let v = (1.0 + p.iter().map(|c| c * c).sum::<f64>()).sqrt();
            let g = inverse_metric(p);
            let mut trace = 0.0;
            let mut a2 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    trace += g[i][j] * q[i][j];
                    for k in 0..n {
                        for l in 0..n {
                            a2 += g[i][k] * g[j][l] * q[i][j] * q[k][l];
                        }
                    }
                }
            }
            slope.push(v);
            mean_curvature.push(-trace / v);
            a_norm_sq.push((a2 / (v * v)).max(0.0));
            vertical_normal.push(1.0 / v);
            normal.extend(p.iter().map(|c| -c / v));
            normal.push(1.0 / v);
            position.extend_from_slice(&spec.point(idx)[..n]);
            position.push(u.at(idx));
        }
        Self {
            spec,
            gradient,
            hessian,
            slope,
            normal: VectorField::new(spec, n + 1, normal).expect("normal arity"),
            mean_curvature,
            a_norm_sq,
            vertical_normal,
            position: VectorField::new(spec, n + 1, position).expect("position arity"),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// `Du` at every node.
    pub fn gradient(&self) -> &VectorField {
        &self.gradient
    }

    pub fn hessian(&self) -> &HessianField {
        &self.hessian
    }

    /// Slope factor `v`.
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn normal(&self) -> &VectorField {
        &self.normal
    }

    pub fn mean_curvature(&self) -> &[f64] {
        &self.mean_curvature
    }

    pub fn a_norm_sq(&self) -> &[f64] {
        &self.a_norm_sq
    }

    /// `f = <n, e_{n+1}> = 1/v`.
    pub fn vertical_normal(&self) -> &[f64] {
        &self.vertical_normal
    }

    /// Ambient position `(x, u(x))`.
    pub fn position(&self) -> &VectorField {
        &self.position
    }

    /// `|x|^2 + u^2` at node `idx`.
    pub fn ambient_radius_sq(&self, idx: usize) -> f64 {
        self.position.at(idx).iter().map(|c| c * c).sum()
    }

    /// Gaussian weight `exp(-|X|^2/4)` at node `idx`.
    pub fn gaussian_weight(&self, idx: usize) -> f64 {
        (-self.ambient_radius_sq(idx) / 4.0).exp()
    }

    /// `<X, n>` at node `idx`.
    pub fn support(&self, idx: usize) -> f64 {
        self.position
            .at(idx)
            .iter()
            .zip(self.normal.at(idx))
            .map(|(x, n)| x * n)
            .sum()
    }

    pub fn field(&self, values: &[f64]) -> ScalarField {
        ScalarField::new(self.spec, values.to_vec()).expect("geometry values are finite")
    }
}

/// A height field together with the geometry of its graph.
#[derive(Debug, Clone)]
pub struct GraphContext {
    u: ScalarField,
    geometry: GraphGeometry,
}

impl GraphContext {
    pub fn new(u: ScalarField) -> Self {
        let geometry = GraphGeometry::compute(&u);
        Self { u, geometry }
    }

    pub fn height(&self) -> &ScalarField {
        &self.u
    }

    pub fn geometry(&self) -> &GraphGeometry {
        &self.geometry
    }

    pub fn spec(&self) -> &GridSpec {
        self.u.spec()
    }
}

/// Both algebraic forms of the shrinker residual:
/// `div(Du/v) - (x.Du - u)/(2v)` with the divergence expanded by the
/// product rule, and `-H + <X, n>/2`.
pub fn shrinker_residual_forms(ctx: &GraphContext) -> (Vec<f64>, Vec<f64>) {
    let geom = &ctx.geometry;
    let spec = ctx.spec();
    let n = spec.dim();
    let mut divergence_form = Vec::with_capacity(spec.len());
    let mut normal_form = Vec::with_capacity(spec.len());
    for idx in 0..spec.len() {
        let p = geom.gradient.at(idx);
        let q = geom.hessian.at(idx);
        let v = geom.slope[idx];
        let x = spec.point(idx);
        let u = ctx.u.at(idx);
        let mut lap = 0.0;
        let mut pqp = 0.0;
        let mut x_dot_p = 0.0;
        for i in 0..n {
            lap += q[i][i];
            x_dot_p += x[i] * p[i];
            for j in 0..n {
                pqp += p[i] * p[j] * q[i][j];
            }
        }
        let div = (lap - pqp / (v * v)) / v;
        divergence_form.push(div - (x_dot_p - u) / (2.0 * v));
        normal_form.push(-geom.mean_curvature[idx] + 0.5 * geom.support(idx));
    }
    (divergence_form, normal_form)
}

/// Pointwise shrinker residual `S`; zero exactly on self-shrinkers.
pub fn shrinker_residual(ctx: &GraphContext) -> ScalarField {
    let (divergence_form, normal_form) = shrinker_residual_forms(ctx);
    for (a, b) in divergence_form.iter().zip(&normal_form) {
        assert!(
            (a - b).abs() <= 1e-10 * (1.0 + a.abs()),
            "shrinker residual forms disagree: {a} vs {b}"
        );
    }
    ctx.geometry.field(&normal_form)
}

/// Tangential calculus of a function pulled back to the graph.
#[derive(Debug, Clone)]
pub struct SurfaceDerivatives {
    /// `Δ_Σ φ`.
    pub laplacian: ScalarField,
    /// `|∇_Σ φ|^2 = g^{ij} φ_i φ_j`.
    pub gradient_norm_sq: Vec<f64>,
    /// `∇_Σ φ` as an ambient vector, `g^{ij} φ_j (e_i + u_i e_{n+1})`.
    pub tangential_gradient: VectorField,
    /// `<X, ∇_Σ φ>`.
    pub position_dot_gradient: Vec<f64>,
}

/// Laplace-Beltrami operator in divergence form,
/// `Δ_Σ φ = (1/v) ∂_i (v g^{ij} ∂_j φ)`, with the flux differentiated as a
/// field.
pub fn laplace_beltrami(ctx: &GraphContext, phi: &ScalarField) -> SurfaceDerivatives {
    let geom = &ctx.geometry;
    let spec = *ctx.spec();
    let n = spec.dim();
    let dphi = gradient_fd(phi);
    let mut flux = vec![Vec::with_capacity(spec.len()); n];
    let mut gradient_norm_sq = Vec::with_capacity(spec.len());
    let mut tangential = Vec::with_capacity(spec.len() * (n + 1));
    let mut position_dot_gradient = Vec::with_capacity(spec.len());
    for idx in 0..spec.len() {
        let p = geom.gradient.at(idx);
        let g = inverse_metric(p);
        let d = dphi.at(idx);
        let v = geom.slope[idx];
        let pos = geom.position.at(idx);
        let mut raised = [0.0; MAX_DIM];
        for i in 0..n {
            raised[i] = (0..n).map(|j| g[i][j] * d[j]).sum();
            flux[i].push(v * raised[i]);
        }
        let norm_sq: f64 = (0..n).map(|i| raised[i] * d[i]).sum();
        gradient_norm_sq.push(norm_sq);
        let mut vertical = 0.0;
        let mut x_dot = 0.0;
        for i in 0..n {
            tangential.push(raised[i]);
            vertical += raised[i] * p[i];
            x_dot += raised[i] * (pos[i] + pos[n] * p[i]);
        }
        tangential.push(vertical);
        position_dot_gradient.push(x_dot);
    }
    let mut laplacian = vec![0.0; spec.len()];
    for (axis, component) in flux.iter().enumerate() {
        for (acc, d) in laplacian.iter_mut().zip(diff_axis(&spec, component, axis)) {
            *acc += d;
        }
    }
    for (acc, v) in laplacian.iter_mut().zip(&geom.slope) {
        *acc /= v;
    }
    SurfaceDerivatives {
        laplacian: ScalarField::new(spec, laplacian).expect("finite laplacian"),
        gradient_norm_sq,
        tangential_gradient: VectorField::new(spec, n + 1, tangential).expect("arity"),
        position_dot_gradient,
    }
}

/// Stability operator `Lφ = Δ_Σ φ - <X, ∇_Σ φ>/2 + |A|^2 φ + φ/2`.
pub fn l_apply(ctx: &GraphContext, phi: &ScalarField) -> ScalarField {
    let d = laplace_beltrami(ctx, phi);
    let a2 = ctx.geometry.a_norm_sq();
    let values = (0..phi.values().len())
        .map(|idx| {
            d.laplacian.at(idx) - 0.5 * d.position_dot_gradient[idx]
                + (a2[idx] + 0.5) * phi.at(idx)
        })
        .collect();
    ScalarField::new(*ctx.spec(), values).expect("finite L")
}

/// Residual of the log-density identity for `g = log f`:
/// `Δ_Σ g - <X, ∇_Σ g>/2 + |∇_Σ g|^2 + |A|^2`.
pub fn log_density_residual(ctx: &GraphContext) -> ScalarField {
    let geom = &ctx.geometry;
    let log_f = geom.field(&geom.vertical_normal).map(f64::ln);
    let d = laplace_beltrami(ctx, &log_f);
    let values = (0..log_f.values().len())
        .map(|idx| {
            d.laplacian.at(idx) - 0.5 * d.position_dot_gradient[idx]
                + d.gradient_norm_sq[idx]
                + geom.a_norm_sq[idx]
        })
        .collect();
    ScalarField::new(*ctx.spec(), values).expect("finite residual")
}

/// Sup norm and Gaussian-weighted L2 norm of a residual over a mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub sup: f64,
    pub weighted_l2: f64,
}

impl ResidualNorms {
    pub fn measure(ctx: &GraphContext, mask: &InteriorMask, residual: &[f64]) -> Self {
        let geom = &ctx.geometry;
        let cell = ctx.spec().cell_volume();
        let mut sup: f64 = 0.0;
        let mut sum = 0.0;
        for idx in mask.indices() {
            let r = residual[idx];
            sup = sup.max(r.abs());
            sum += r * r * geom.gaussian_weight(idx) * geom.slope[idx] * cell;
        }
        Self {
            sup,
            weighted_l2: sum.sqrt(),
        }
    }
}

/// Residual norms of the shrinker equation and the three identities that
/// hold on every self-shrinker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub shrinker: ResidualNorms,
    /// `Lf - f/2`.
    pub vertical_normal: ResidualNorms,
    /// `LH - H`.
    pub mean_curvature: ResidualNorms,
    /// Log-density identity for `log f`.
    pub log_density: ResidualNorms,
    pub margin: usize,
    pub spacing: f64,
}

impl IdentityReport {
    pub fn norms(&self) -> [ResidualNorms; 4] {
        [
            self.shrinker,
            self.vertical_normal,
            self.mean_curvature,
            self.log_density,
        ]
    }
}

pub fn identity_report(u: &ScalarField, margin: usize) -> Result<IdentityReport, GridError> {
    let mask = InteriorMask::new(*u.spec(), margin)?;
    let ctx = GraphContext::new(u.clone());
    Ok(identity_report_for(&ctx, &mask))
}

pub fn identity_report_for(ctx: &GraphContext, mask: &InteriorMask) -> IdentityReport {
    let geom = ctx.geometry();
    let s = shrinker_residual(ctx);

    let f = geom.field(geom.vertical_normal());
    let lf = l_apply(ctx, &f);
    let lf_res: Vec<f64> = lf.values().iter().zip(f.values()).map(|(l, f)| l - 0.5 * f).collect();

    let h = geom.field(geom.mean_curvature());
    let lh = l_apply(ctx, &h);
    let lh_res: Vec<f64> = lh.values().iter().zip(h.values()).map(|(l, h)| l - h).collect();

    let log_res = log_density_residual(ctx);
    IdentityReport {
        shrinker: ResidualNorms::measure(ctx, mask, s.values()),
        vertical_normal: ResidualNorms::measure(ctx, mask, &lf_res),
        mean_curvature: ResidualNorms::measure(ctx, mask, &lh_res),
        log_density: ResidualNorms::measure(ctx, mask, log_res.values()),
        margin: mask.margin(),
        spacing: ctx.spec().spacing(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;

    fn ctx(profile: Profile, dim: usize, l: f64, m: usize) -> GraphContext {
        let spec = GridSpec::new(dim, l, m).unwrap();
        GraphContext::new(profile.discretize(&spec).unwrap())
    }

    #[test]
    fn plane_is_flat() {
        let c = ctx(Profile::Plane(vec![0.3, -1.1]), 2, 1.0, 11);
        let g = c.geometry();
        let v = (1.0f64 + 0.09 + 1.21).sqrt();
        for idx in 0..c.spec().len() {
            assert!((g.slope()[idx] - v).abs() < 1e-13);
            assert!(g.mean_curvature()[idx].abs() < 1e-12);
            assert!(g.a_norm_sq()[idx] < 1e-24);
            assert!((g.vertical_normal()[idx] - 1.0 / v).abs() < 1e-14);
        }
    }

    #[test]
    fn square_at_origin() {
        let spec = GridSpec::new(2, 1.0, 9).unwrap();
        let c = GraphContext::new(ScalarField::from_fn(spec, |x| x[0] * x[0]));
        let o = spec.origin();
        assert!((c.geometry().mean_curvature()[o] + 2.0).abs() < 1e-12);
        assert!((c.geometry().a_norm_sq()[o] - 4.0).abs() < 1e-12);
        let s = shrinker_residual(&c);
        assert!((s.at(o) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_cap_curvatures() {
        let c = ctx(Profile::SphereCap, 2, 1.0, 81);
        let mask = InteriorMask::new(*c.spec(), 4).unwrap();
        for idx in mask.indices() {
            assert!((c.geometry().mean_curvature()[idx] - 1.0).abs() < 2e-3);
            assert!((c.geometry().a_norm_sq()[idx] - 0.5).abs() < 2e-3);
        }
    }

    #[test]
    fn normal_is_unit_and_upward() {
        let c = ctx(
            Profile::Sinusoid {
                slope: 1.5,
                amplitude: 2.0,
                wavenumber: 3.0,
            },
            2,
            2.0,
            21,
        );
        let g = c.geometry();
        for idx in 0..c.spec().len() {
            let nrm: f64 = g.normal().at(idx).iter().map(|c| c * c).sum();
            assert!((nrm.sqrt() - 1.0).abs() < 1e-12);
            let f = g.vertical_normal()[idx];
            assert!(f > 0.0 && f <= 1.0);
            assert_eq!(g.normal().at(idx)[2], f);
            let h = g.mean_curvature()[idx];
            assert!(h * h <= 2.0 * g.a_norm_sq()[idx] + 1e-9);
        }
    }

    #[test]
    fn flat_laplacian_of_square() {
        let spec = GridSpec::new(2, 1.0, 9).unwrap();
        let c = GraphContext::new(ScalarField::zeros(spec));
        let phi = ScalarField::from_fn(spec, |x| x[0] * x[0]);
        let d = laplace_beltrami(&c, &phi);
        let mask = InteriorMask::new(spec, 1).unwrap();
        for idx in mask.indices() {
            assert!((d.laplacian.at(idx) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_no_surface_derivatives() {
        let c = ctx(Profile::SphereCap, 2, 1.0, 21);
        let phi = ScalarField::constant(*c.spec(), 3.0);
        let d = laplace_beltrami(&c, &phi);
        assert!(d.laplacian.values().iter().all(|&v| v == 0.0));
        assert!(d.gradient_norm_sq.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn height_laplacian_on_sphere() {
        // On the sphere of radius r about the origin Δ_Σ X = -H n, so the
        // height satisfies Δ_Σ u = -(n/r) f.
        let c = ctx(Profile::SphereCap, 2, 1.0, 81);
        let d = laplace_beltrami(&c, c.height());
        let mask = InteriorMask::new(*c.spec(), 4).unwrap();
        for idx in mask.indices() {
            let exact = -c.geometry().vertical_normal()[idx];
            assert!((d.laplacian.at(idx) - exact).abs() < 0.02 * exact.abs());
        }
    }

    #[test]
    fn stability_operator_on_constant() {
        let c = ctx(Profile::Plane(vec![0.0, 0.0]), 2, 1.0, 9);
        let phi = ScalarField::constant(*c.spec(), 4.0);
        let lphi = l_apply(&c, &phi);
        assert!(lphi.values().iter().all(|&v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn plane_identities_vanish() {
        let spec = GridSpec::new(2, 2.0, 21).unwrap();
        let u = Profile::Plane(vec![0.7, -0.2]).discretize(&spec).unwrap();
        let report = identity_report(&u, 1).unwrap();
        for norms in report.norms() {
            assert!(norms.sup < 1e-10 && norms.weighted_l2 < 1e-10, "{norms:?}");
        }
    }

    #[test]
    fn sphere_identities_converge() {
        let coarse = GridSpec::new(2, 1.0, 41).unwrap();
        let fine = coarse.refined();
        let a = identity_report(&Profile::SphereCap.discretize(&coarse).unwrap(), 4).unwrap();
        let b = identity_report(&Profile::SphereCap.discretize(&fine).unwrap(), 8).unwrap();
        for (x, y) in a.norms().iter().zip(b.norms()) {
            let ratio = x.weighted_l2 / y.weighted_l2;
            assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn paraboloid_is_flagged() {
        let spec = GridSpec::new(2, 1.0, 21).unwrap();
        let u = Profile::Paraboloid(1.0).discretize(&spec).unwrap();
        let report = identity_report(&u, 2).unwrap();
        assert!(report.shrinker.sup > 0.5);
    }

    #[test]
    fn square_violates_log_density_identity() {
        // At a critical point of u the residual vanishes for any graph, so
        // probe u = x^2 at x = 1/2 and use a refined grid as the oracle.
        let at_half = |m: usize| {
            let spec = GridSpec::new(1, 1.0, m).unwrap();
            let c = GraphContext::new(ScalarField::from_fn(spec, |x| x[0] * x[0]));
            let idx = (0..spec.len()).find(|&i| spec.point(i)[0] == 0.5).unwrap();
            log_density_residual(&c).at(idx)
        };
        let coarse = at_half(81);
        let oracle = at_half(641);
        assert!(oracle.abs() > 0.1, "{oracle}");
        assert!((coarse - oracle).abs() < 0.02 * oracle.abs());
    }
}
