//! Rescaled graphical mean curvature flow and shrinking-ball barriers.
//!
//! A shrinker `u` generates the self-similar family
//! `w(x, t) = sqrt(R^2 + 1 - t) u(x / sqrt(R^2 + 1 - t))`, `t ∈ [0, R^2]`,
//! which solves the graphical flow `w_t = sqrt(1+|Dw|^2) div(Dw / sqrt(1+|Dw|^2))`.
//! Balls of radius `sqrt(ρ^2 R^2 - 2nt)` placed above and below the initial
//! graph stay disjoint from it, which bounds `|u|` linearly in `R`.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::GraphGeometry;
use crate::grid::{GridError, GridSpec, ScalarField, MAX_DIM};
use crate::profile::{Profile, ProfileError};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("explicit scheme unstable at step {step} (t = {t}): {reason}")]
    Unstable { step: usize, t: f64, reason: String },
    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Inputs for [`FlowConfig::new`]; `None` selects the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub dim: usize,
    /// The scale `R > 1`.
    pub scale: f64,
    pub nodes_per_axis: usize,
    /// Barrier parameter, default `2 sqrt(n)`.
    pub rho: Option<f64>,
    /// Box half width over `ρR`, default `2.5`.
    pub box_factor: Option<f64>,
    /// Time step, default `h^2/(4n)`.
    pub dt: Option<f64>,
    /// Final time, default `R^2`.
    pub t_end: Option<f64>,
}

impl FlowParams {
    pub fn new(dim: usize, scale: f64, nodes_per_axis: usize) -> Self {
        Self {
            dim,
            scale,
            nodes_per_axis,
            rho: None,
            box_factor: None,
            dt: None,
            t_end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    spec: GridSpec,
    scale: f64,
    rho: f64,
    dt: f64,
    t_end: f64,
}

/// Frozen boundary data pins the far-field slope; at `2.5 ρR` doubling the
/// box moves values inside the barrier region by well under 1%.
pub const DEFAULT_BOX_FACTOR: f64 = 2.5;

/// Largest stable explicit step for the nondivergence flow operator.
pub fn stability_limit(spec: &GridSpec) -> f64 {
    spec.spacing().powi(2) / (2.0 * spec.dim() as f64)
}

impl FlowConfig {
    pub fn new(params: FlowParams) -> Result<Self, FlowError> {
        let n = params.dim as f64;
        let invalid = |msg: String| Err(FlowError::InvalidConfig(msg));
        if !(params.scale > 1.0) {
            return invalid(format!("scale R must exceed 1 (got {})", params.scale));
        }
        let rho = params.rho.unwrap_or(2.0 * n.sqrt());
        if !(rho * rho > 2.0 * n + 1.0) {
            return invalid(format!("rho^2 must exceed 2n+1 = {} (got rho = {rho})", 2.0 * n + 1.0));
        }
        let box_factor = params.box_factor.unwrap_or(DEFAULT_BOX_FACTOR);
        if !(box_factor > 1.0) {
            return invalid("box factor must exceed 1".into());
        }
        let spec = GridSpec::new(params.dim, box_factor * rho * params.scale, params.nodes_per_axis)?;
        let limit = stability_limit(&spec);
        let dt = params.dt.unwrap_or(limit / 2.0);
        if !(dt > 0.0) {
            return invalid("dt must be positive".into());
        }
        if dt > limit {
            return Err(FlowError::Unstable {
                step: 0,
                t: 0.0,
                reason: format!("dt = {dt} exceeds the explicit stability bound h^2/(2n) = {limit}"),
            });
        }
        let t_end = params.t_end.unwrap_or(params.scale * params.scale);
        if !(t_end > 0.0 && t_end <= params.scale * params.scale) {
            return invalid(format!("t_end must lie in (0, R^2] (got {t_end})"));
        }
        Ok(Self {
            spec,
            scale: params.scale,
            rho,
            dt,
            t_end,
        })
    }

    /// Replaces the time step without the stability check. Only useful for
    /// demonstrating the instability of oversized steps.
    #[doc(hidden)]
    pub fn with_unchecked_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Barrier extinction time `ρ^2 R^2 / (2n)`.
    pub fn extinction_time(&self) -> f64 {
        (self.rho * self.scale).powi(2) / (2.0 * self.spec.dim() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub w: ScalarField,
    pub t: f64,
    pub step_index: usize,
}

impl FlowState {
    pub fn initial(w: ScalarField) -> Self {
        Self {
            w,
            t: 0.0,
            step_index: 0,
        }
    }
}

/// `w(x, t) = sqrt(s) u(x / sqrt(s))` with `s = R^2 + 1 - t`.
pub fn self_similar_profile(
    u: &Profile,
    scale: f64,
    t: f64,
    spec: &GridSpec,
) -> Result<ScalarField, FlowError> {
    let horizon = scale * scale;
    if !(0.0..=horizon).contains(&t) {
        return Err(FlowError::TimeOutOfRange { t, lo: 0.0, hi: horizon });
    }
    let root = (horizon + 1.0 - t).sqrt();
    let n = spec.dim();
    let values = (0..spec.len())
        .map(|idx| {
            let x = spec.point(idx);
            let mut y = [0.0; MAX_DIM];
            for a in 0..n {
                y[a] = x[a] / root;
            }
            u.eval(&y[..n]).map(|v| root * v).ok_or_else(|| {
                FlowError::Profile(ProfileError::OutsideDomain(format!(
                    "rescaled node {idx} leaves the profile's domain"
                )))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScalarField::new(*spec, values)?)
}

/// Residual `w_t - sqrt(1+|Dw|^2) div(Dw/sqrt(1+|Dw|^2))` of the
/// self-similar family at time `t`. The time derivative is a centered
/// difference of the exact profile with step `h^2`, so the residual
/// measures spatial discretization error only.
pub fn flow_residual(
    u: &Profile,
    scale: f64,
    t: f64,
    spec: &GridSpec,
) -> Result<ScalarField, FlowError> {
    let delta = spec.spacing().powi(2);
    let horizon = scale * scale;
    if t - delta < 0.0 || t + delta > horizon {
        return Err(FlowError::TimeOutOfRange {
            t,
            lo: delta,
            hi: horizon - delta,
        });
    }
    let later = self_similar_profile(u, scale, t + delta, spec)?;
    let earlier = self_similar_profile(u, scale, t - delta, spec)?;
    let now = self_similar_profile(u, scale, t, spec)?;
    let geom = GraphGeometry::compute(&now);
    let values = (0..spec.len())
        .map(|idx| {
            let w_t = (later.at(idx) - earlier.at(idx)) / (2.0 * delta);
            w_t + geom.slope()[idx] * geom.mean_curvature()[idx]
        })
        .collect();
    Ok(ScalarField::new(*spec, values)?)
}

/// Interior rate `(δ_ij - w_i w_j/(1+|Dw|^2)) w_ij` with centered stencils.
fn interior_rate(spec: &GridSpec, w: &[f64], idx: usize) -> f64 {
    let n = spec.dim();
    let h = spec.spacing();
    let mut p = [0.0; MAX_DIM];
    let mut q = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        let si = spec.stride(i);
        p[i] = (w[idx + si] - w[idx - si]) / (2.0 * h);
        q[i][i] = (w[idx + si] - 2.0 * w[idx] + w[idx - si]) / (h * h);
        for j in (i + 1)..n {
            let sj = spec.stride(j);
            let cross = (w[idx + si + sj] - w[idx + si - sj] - w[idx - si + sj]
                + w[idx - si - sj])
                / (4.0 * h * h);
            q[i][j] = cross;
            q[j][i] = cross;
        }
    }
    let v2 = 1.0 + p[..n].iter().map(|c| c * c).sum::<f64>();
    let mut rate = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = if i == j { 1.0 } else { 0.0 } - p[i] * p[j] / v2;
            rate += g * q[i][j];
        }
    }
    rate
}

/// One forward-Euler step; boundary nodes keep their values.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState, FlowError> {
    step_by(state, config, config.dt)
}

fn step_by(state: &FlowState, config: &FlowConfig, dt: f64) -> Result<FlowState, FlowError> {
    let spec = state.w.spec();
    if spec != &config.spec {
        return Err(FlowError::Grid(GridError::GridMismatch));
    }
    let old = state.w.values();
    let mut new = old.to_vec();
    for (idx, slot) in new.iter_mut().enumerate() {
        if !spec.is_boundary(idx) {
            *slot += dt * interior_rate(spec, old, idx);
        }
    }
    let t = state.t + dt;
    let step_index = state.step_index + 1;
    let sup_old = state.w.sup_abs();
    let sup_new = new.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !sup_new.is_finite() || sup_new > 10.0 * sup_old.max(f64::MIN_POSITIVE) {
        return Err(FlowError::Unstable {
            step: step_index,
            t,
            reason: format!("sup|w| jumped from {sup_old:.3e} to {sup_new:.3e}"),
        });
    }
    Ok(FlowState {
        w: ScalarField::new(*spec, new)?,
        t,
        step_index,
    })
}

/// `sqrt(ρ^2 R^2 - 2nt)`, the radius of a sphere shrinking by mean
/// curvature from radius `ρR`.
pub fn barrier_radius(rho: f64, scale: f64, t: f64, dim: usize) -> Result<f64, FlowError> {
    let r0_sq = (rho * scale).powi(2);
    let extinction = r0_sq / (2.0 * dim as f64);
    if !(0.0..=extinction).contains(&t) {
        return Err(FlowError::TimeOutOfRange { t, lo: 0.0, hi: extinction });
    }
    Ok((r0_sq - 2.0 * dim as f64 * t).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierSide {
    Above,
    Below,
}

/// A ball centered on the vertical axis at `(0, ..., 0, center_height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierBall {
    pub side: BarrierSide,
    pub center_height: f64,
    pub initial_radius: f64,
}

impl BarrierBall {
    /// Places the ball `ρR + 1` beyond the extreme of `w0` over `|x| < ρR`.
    pub fn new(side: BarrierSide, w0: &ScalarField, config: &FlowConfig) -> Self {
        let radius = config.rho * config.scale;
        let spec = w0.spec();
        let inside = (0..spec.len()).filter(|&idx| spec.radius_sq(idx) < radius * radius);
        let center_height = match side {
            BarrierSide::Above => {
                inside.map(|idx| w0.at(idx)).fold(f64::NEG_INFINITY, f64::max) + radius + 1.0
            }
            BarrierSide::Below => {
                inside.map(|idx| w0.at(idx)).fold(f64::INFINITY, f64::min) - radius - 1.0
            }
        };
        Self {
            side,
            center_height,
            initial_radius: radius,
        }
    }
}

/// Smallest distance from a graph node to the barrier sphere; positive
/// means the graph avoids the ball.
pub fn clearance(state: &FlowState, barrier: &BarrierBall, config: &FlowConfig) -> Result<f64, FlowError> {
    let spec = state.w.spec();
    let radius = barrier_radius(config.rho, config.scale, state.t, spec.dim())?;
    let min_dist = (0..spec.len())
        .map(|idx| {
            let dz = state.w.at(idx) - barrier.center_height;
            (spec.radius_sq(idx) + dz * dz).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(min_dist - radius)
}

/// Linear height bound `sup_{|x|<R} |u| <= C1 R`,
/// `C1 = 2 (sup_{|x|<2 sqrt(n)} |u| + sqrt(2n + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupBoundReport {
    pub scale: f64,
    pub lhs: f64,
    pub inner_sup: f64,
    pub c1: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

fn sup_bound_from_samples(
    dim: usize,
    scale: f64,
    samples: impl Iterator<Item = (f64, f64)> + Clone,
) -> Result<SupBoundReport, FlowError> {
    if !(scale > 1.0) {
        return Err(FlowError::InvalidConfig(format!("R must exceed 1 (got {scale})")));
    }
    let inner = 2.0 * (dim as f64).sqrt();
    let sup_in = |r: f64| {
        samples
            .clone()
            .filter(|&(r2, _)| r2 < r * r)
            .fold(0.0f64, |acc, (_, v)| acc.max(v.abs()))
    };
    let lhs = sup_in(scale);
    let inner_sup = sup_in(inner);
    let c1 = 2.0 * (inner_sup + (2.0 * dim as f64 + 1.0).sqrt());
    let rhs = c1 * scale;
    Ok(SupBoundReport {
        scale,
        lhs,
        inner_sup,
        c1,
        rhs,
        margin: rhs - lhs,
        pass: lhs <= rhs,
    })
}

/// Height bound for grid data; the box must contain both balls.
pub fn sup_bound_check_field(u: &ScalarField, scale: f64) -> Result<SupBoundReport, FlowError> {
    let spec = u.spec();
    let needed = scale.max(2.0 * (spec.dim() as f64).sqrt());
    if spec.half_width() < needed {
        return Err(FlowError::DomainTooSmall(format!(
            "box half width {} does not contain the ball of radius {needed}",
            spec.half_width()
        )));
    }
    sup_bound_from_samples(
        spec.dim(),
        scale,
        (0..spec.len()).map(|idx| (spec.radius_sq(idx), u.at(idx))),
    )
}

/// Height bound for an analytic profile, sampled on a fine lattice over
/// each ball and restricted to the profile's domain.
pub fn sup_bound_check(u: &Profile, dim: usize, scale: f64) -> Result<SupBoundReport, FlowError> {
    if let Profile::Tabulated(field) = u {
        return sup_bound_check_field(field, scale);
    }
    let reach = scale.max(2.0 * (dim as f64).sqrt());
    let nodes = match dim {
        1 => 4001,
        2 => 401,
        _ => 81,
    };
    let lattice = GridSpec::new(dim, reach, nodes)?;
    let samples: Vec<(f64, f64)> = (0..lattice.len())
        .filter_map(|idx| {
            let x = lattice.point(idx);
            u.eval(&x[..dim]).map(|v| (lattice.radius_sq(idx), v))
        })
        .collect();
    sup_bound_from_samples(dim, scale, samples.into_iter())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowLogRow {
    pub step: usize,
    pub t: f64,
    pub sup_w: f64,
    pub max_grad: f64,
    pub max_a2: f64,
    pub clear_plus: f64,
    pub clear_minus: f64,
}

#[derive(Debug, Clone)]
pub struct FlowLog {
    pub rows: Vec<FlowLogRow>,
    pub final_state: FlowState,
    pub above: BarrierBall,
    pub below: BarrierBall,
}

impl FlowLog {
    pub fn min_clearance(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.clear_plus.min(r.clear_minus))
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff both barriers stayed disjoint from the graph at every
    /// logged time.
    pub fn barriers_clear(&self) -> bool {
        self.min_clearance() > 0.0
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,t,sup_w,max_grad,max_A2,clear_plus,clear_minus")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.step, r.t, r.sup_w, r.max_grad, r.max_a2, r.clear_plus, r.clear_minus
            )?;
        }
        Ok(())
    }
}

fn log_row(state: &FlowState, config: &FlowConfig, above: &BarrierBall, below: &BarrierBall) -> Result<FlowLogRow, FlowError> {
    let geom = GraphGeometry::compute(&state.w);
    let spec = state.w.spec();
    let mut max_grad: f64 = 0.0;
    let mut max_a2: f64 = 0.0;
    for idx in (0..spec.len()).filter(|&idx| !spec.is_boundary(idx)) {
        let v = geom.slope()[idx];
        max_grad = max_grad.max((v * v - 1.0).max(0.0).sqrt());
        max_a2 = max_a2.max(geom.a_norm_sq()[idx]);
    }
    Ok(FlowLogRow {
        step: state.step_index,
        t: state.t,
        sup_w: state.w.sup_abs(),
        max_grad,
        max_a2,
        clear_plus: clearance(state, above, config)?,
        clear_minus: clearance(state, below, config)?,
    })
}

/// Evolves `w0` to `t_end`, logging heights, slopes, curvature and both
/// barrier clearances after every step. The step is shrunk uniformly so
/// that the run lands exactly on `t_end`.
pub fn run(config: &FlowConfig, w0: ScalarField) -> Result<FlowLog, FlowError> {
    if w0.spec() != &config.spec {
        return Err(FlowError::Grid(GridError::GridMismatch));
    }
    let above = BarrierBall::new(BarrierSide::Above, &w0, config);
    let below = BarrierBall::new(BarrierSide::Below, &w0, config);
    let steps = (config.t_end / config.dt).ceil().max(1.0) as usize;
    let dt = config.t_end / steps as f64;
    let mut state = FlowState::initial(w0);
    let mut rows = vec![log_row(&state, config, &above, &below)?];
    for k in 1..=steps {
        state = step_by(&state, config, dt)?;
        // Land exactly on t_end despite rounding in the accumulated sum.
        state.t = if k == steps { config.t_end } else { k as f64 * dt };
        rows.push(log_row(&state, config, &above, &below)?);
    }
    Ok(FlowLog {
        rows,
        final_state: state,
        above,
        below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_1d(m: usize) -> FlowConfig {
        FlowConfig::new(FlowParams::new(1, 2.0, m)).unwrap()
    }

    #[test]
    fn config_defaults_and_rejections() {
        let c = config_1d(101);
        assert_eq!(c.rho(), 2.0);
        assert_eq!(c.spec().half_width(), 10.0);
        assert_eq!(c.t_end(), 4.0);
        assert!((c.dt() - 0.04 / 4.0).abs() < 1e-15);

        let mut p = FlowParams::new(2, 2.0, 41);
        p.rho = Some(1.0);
        assert!(matches!(FlowConfig::new(p), Err(FlowError::InvalidConfig(_))));
        let mut p = FlowParams::new(1, 2.0, 101);
        p.dt = Some(0.04);
        assert!(matches!(FlowConfig::new(p), Err(FlowError::Unstable { .. })));
        assert!(FlowConfig::new(FlowParams::new(1, 0.5, 101)).is_err());
    }

    #[test]
    fn linear_profile_is_scale_invariant() {
        let spec = GridSpec::new(2, 3.0, 13).unwrap();
        let plane = Profile::Plane(vec![0.4, -1.3]);
        let exact = plane.discretize(&spec).unwrap();
        for t in [0.0, 0.7, 2.5, 4.0] {
            let w = self_similar_profile(&plane, 2.0, t, &spec).unwrap();
            for (a, b) in w.values().iter().zip(exact.values()) {
                assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn profile_at_final_time_is_the_shrinker() {
        let spec = GridSpec::new(2, 1.2, 9).unwrap();
        let w = self_similar_profile(&Profile::SphereCap, 2.0, 4.0, &spec).unwrap();
        assert_eq!(w, Profile::SphereCap.discretize(&spec).unwrap());
        let w0 = self_similar_profile(&Profile::SphereCap, 2.0, 0.0, &spec).unwrap();
        assert!((w0.at(spec.origin()) - 5.0f64.sqrt() * 2.0).abs() < 1e-14);
        assert!(self_similar_profile(&Profile::SphereCap, 2.0, 4.5, &spec).is_err());
    }

    #[test]
    fn flow_residual_examples() {
        let spec = GridSpec::new(2, 1.0, 41).unwrap();
        let r = flow_residual(&Profile::Plane(vec![1.0, 0.5]), 2.0, 1.0, &spec).unwrap();
        assert!(r.sup_abs() < 1e-9);

        let sup = |m: usize| {
            let spec = GridSpec::new(2, 1.0, m).unwrap();
            let r = flow_residual(&Profile::SphereCap, 2.0, 1.0, &spec).unwrap();
            let mask = crate::grid::InteriorMask::new(spec, (m - 1) / 20).unwrap();
            mask.sup_abs(r.values())
        };
        let ratio = sup(41) / sup(81);
        assert!((3.4..=4.6).contains(&ratio), "{ratio}");

        let r = flow_residual(&Profile::Paraboloid(1.0), 2.0, 1.0, &spec).unwrap();
        assert!(r.at(spec.origin()).abs() > 0.1);

        assert!(flow_residual(&Profile::SphereCap, 2.0, 0.0, &spec).is_err());
    }

    #[test]
    fn linear_graphs_are_fixed_points() {
        let c = FlowConfig::new(FlowParams::new(2, 1.5, 21)).unwrap();
        let w = Profile::Plane(vec![0.3, -2.0]).discretize(c.spec()).unwrap();
        let next = step(&FlowState::initial(w.clone()), &c).unwrap();
        for (a, b) in next.w.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(next.step_index, 1);
        assert_eq!(next.t, c.dt());
    }

    #[test]
    fn single_step_matches_hand_stencil() {
        let c = config_1d(101);
        let spec = *c.spec();
        let w = ScalarField::from_fn(spec, |x| x[0].sin());
        let next = step(&FlowState::initial(w.clone()), &c).unwrap();
        let h = spec.spacing();
        let k = 37;
        let (wm, w0, wp) = (w.at(k - 1), w.at(k), w.at(k + 1));
        let p = (wp - wm) / (2.0 * h);
        let q = (wp - 2.0 * w0 + wm) / (h * h);
        let expected = w0 + c.dt() * q / (1.0 + p * p);
        assert!((next.w.at(k) - expected).abs() < 1e-12);
        assert_eq!(next.w.at(0), w.at(0));
        assert_eq!(next.w.at(100), w.at(100));
    }

    #[test]
    fn barrier_radius_identity() {
        assert_eq!(barrier_radius(2.0, 3.0, 0.0, 2).unwrap(), 6.0);
        let n = 3;
        let rho = 2.0 * (n as f64).sqrt();
        let ext = (rho * 1.5).powi(2) / (2.0 * n as f64);
        assert_eq!(barrier_radius(rho, 1.5, ext, n).unwrap(), 0.0);
        let r = barrier_radius(rho, 1.0, 1.0, n).unwrap();
        assert!((r - (2.0 * n as f64).sqrt()).abs() < 1e-14);
        assert!(barrier_radius(rho, 1.5, ext * 1.01, n).is_err());
        for t in [0.1, 0.5, 2.0] {
            let r = barrier_radius(2.5, 1.3, t, 2).unwrap();
            assert!((r * r + 4.0 * t - (2.5f64 * 1.3).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_clearance_and_violation() {
        let c = config_1d(201);
        let w0 = Profile::Sinusoid {
            slope: 0.5,
            amplitude: 0.4,
            wavenumber: 1.0,
        }
        .discretize(c.spec())
        .unwrap();
        let state = FlowState::initial(w0.clone());
        for side in [BarrierSide::Above, BarrierSide::Below] {
            let ball = BarrierBall::new(side, &w0, &c);
            assert!(clearance(&state, &ball, &c).unwrap() > 0.0);
        }
        // Lift the graph into the upper ball.
        let ball = BarrierBall::new(BarrierSide::Above, &w0, &c);
        let touched = FlowState::initial(ScalarField::constant(*c.spec(), ball.center_height));
        assert!(clearance(&touched, &ball, &c).unwrap() <= 0.0);
    }

    #[test]
    fn plane_run_keeps_clearance() {
        let c = FlowConfig::new(FlowParams::new(1, 1.5, 61)).unwrap();
        let w0 = Profile::Plane(vec![0.7]).discretize(c.spec()).unwrap();
        let log = run(&c, w0.clone()).unwrap();
        assert!(log.barriers_clear());
        let sup0 = log.rows[0].sup_w;
        assert!(log.rows.iter().all(|r| (r.sup_w - sup0).abs() < 1e-10));
        assert_eq!(log.final_state.t, c.t_end());
    }

    #[test]
    fn oversized_step_is_unstable() {
        let c = config_1d(101);
        let h = c.spec().spacing();
        let bad = c.with_unchecked_dt(10.0 * h * h);
        let w0 = Profile::Sinusoid {
            slope: 0.5,
            amplitude: 0.4,
            wavenumber: 1.0,
        }
        .discretize(bad.spec())
        .unwrap();
        assert!(matches!(run(&bad, w0), Err(FlowError::Unstable { .. })));
    }

    #[test]
    fn sup_bound_examples() {
        let r = sup_bound_check(&Profile::Plane(vec![0.8, -0.6]), 2, 4.0).unwrap();
        assert!(r.pass);
        assert!((r.lhs - 4.0).abs() < 0.02);
        let r = sup_bound_check(&Profile::SphereCap, 2, 1.2).unwrap();
        assert!(r.pass);
        assert!((r.lhs - 2.0).abs() < 1e-12);
        assert!(sup_bound_check(&Profile::Plane(vec![1.0]), 1, 0.5).is_err());

        let spec = GridSpec::new(2, 2.0, 21).unwrap();
        let u = ScalarField::zeros(spec);
        assert!(matches!(
            sup_bound_check_field(&u, 1.5),
            Err(FlowError::DomainTooSmall(_))
        ));
    }
}
