//! Damped Newton iteration for the Dirichlet problem of the shrinker
//! equation `div(Du/v) = (x.Du - u)/(2v)` on a grid box.
//!
//! Interior rows carry the discrete shrinker residual in expanded
//! divergence form; boundary rows carry `u - g`. The Jacobian is the exact
//! derivative of that discrete map.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{identity_report, inverse_metric, IdentityReport};
use crate::grid::{GridError, GridSpec, ScalarField, MAX_DIM};
use crate::profile::{Profile, ProfileError};
use crate::sparse::{bicgstab, CsrMatrix, LinearError};

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("Newton iteration did not converge: residual {:.3e} after {} iterations", .report.residual, .report.iterations)]
    NotConverged { best: ScalarField, report: SolveReport },
    #[error("linear solver failed: {0}")]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Relative tolerance for each linearized solve.
pub const LINEAR_TOL: f64 = 1e-12;
const LINEAR_MAX_ITER: usize = 5000;
/// Smallest damping factor tried before giving up.
pub const MIN_DAMPING: f64 = 1.0 / (1 << 20) as f64;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Discrete harmonic function with the boundary data.
    Harmonic,
    Field(ScalarField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletProblem {
    spec: GridSpec,
    boundary_nodes: Vec<usize>,
    boundary_values: Vec<f64>,
    initial: InitialGuess,
}

impl DirichletProblem {
    /// `values` lists the data on the boundary nodes in increasing flat
    /// index order.
    pub fn new(spec: GridSpec, values: Vec<f64>, initial: InitialGuess) -> Result<Self, NewtonError> {
        let boundary_nodes: Vec<usize> = (0..spec.len()).filter(|&i| spec.is_boundary(i)).collect();
        if values.len() != boundary_nodes.len() {
            return Err(GridError::LengthMismatch {
                expected: boundary_nodes.len(),
                got: values.len(),
            }
            .into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NewtonError::InvalidProblem("boundary data must be finite".into()));
        }
        if let InitialGuess::Field(f) = &initial {
            if f.spec() != &spec {
                return Err(GridError::GridMismatch.into());
            }
        }
        Ok(Self { spec, boundary_nodes, boundary_values: values, initial })
    }

    pub fn from_fn(spec: GridSpec, g: impl Fn(&[f64]) -> f64) -> Result<Self, NewtonError> {
        let values = (0..spec.len())
            .filter(|&i| spec.is_boundary(i))
            .map(|i| g(&spec.point(i)[..spec.dim()]))
            .collect();
        Self::new(spec, values, InitialGuess::Harmonic)
    }

    pub fn from_profile(spec: GridSpec, profile: &Profile) -> Result<Self, NewtonError> {
        let field = profile.discretize(&spec)?;
        Self::from_fn(spec, |x| {
            let idx = nearest_node(&spec, x);
            field.at(idx)
        })
    }

    pub fn with_initial(mut self, initial: InitialGuess) -> Result<Self, NewtonError> {
        if let InitialGuess::Field(f) = &initial {
            if f.spec() != &self.spec {
                return Err(GridError::GridMismatch.into());
            }
        }
        self.initial = initial;
        Ok(self)
    }

    /// The boundary data with the sign flipped.
    pub fn negated(&self) -> Self {
        Self {
            spec: self.spec,
            boundary_nodes: self.boundary_nodes.clone(),
            boundary_values: self.boundary_values.iter().map(|v| -v).collect(),
            initial: match &self.initial {
                InitialGuess::Harmonic => InitialGuess::Harmonic,
                InitialGuess::Field(f) => InitialGuess::Field(f.map(|v| -v)),
            },
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    fn boundary_data_full(&self) -> Vec<f64> {
        let mut full = vec![0.0; self.spec.len()];
        for (&i, &g) in self.boundary_nodes.iter().zip(&self.boundary_values) {
            full[i] = g;
        }
        full
    }
}

fn nearest_node(spec: &GridSpec, x: &[f64]) -> usize {
    let h = spec.spacing();
    let c = (spec.nodes_per_axis() - 1) / 2;
    let mut multi = [0usize; MAX_DIM];
    for (a, &xa) in x.iter().enumerate() {
        multi[a] = ((xa / h).round() as isize + c as isize) as usize;
    }
    spec.flat_index(&multi[..spec.dim()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final sup-norm of the residual.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Accepted damping factor of every step.
    pub damping_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub converged: bool,
}

/// First and second differences at an interior node.
struct Jet {
    p: [f64; MAX_DIM],
    q: [[f64; MAX_DIM]; MAX_DIM],
}

fn jet(spec: &GridSpec, u: &[f64], i: usize) -> Jet {
    let n = spec.dim();
    let h = spec.spacing();
    let mut p = [0.0; MAX_DIM];
    let mut q = [[0.0; MAX_DIM]; MAX_DIM];
    for a in 0..n {
        let sa = spec.stride(a);
        p[a] = (u[i + sa] - u[i - sa]) / (2.0 * h);
        q[a][a] = (u[i + sa] - 2.0 * u[i] + u[i - sa]) / (h * h);
        for b in (a + 1)..n {
            let sb = spec.stride(b);
            let mixed = (u[i + sa + sb] - u[i + sa - sb] - u[i - sa + sb] + u[i - sa - sb]) / (4.0 * h * h);
            q[a][b] = mixed;
            q[b][a] = mixed;
        }
    }
    Jet { p, q }
}

fn interior_residual(spec: &GridSpec, u: &[f64], i: usize) -> f64 {
    let n = spec.dim();
    let Jet { p, q } = jet(spec, u, i);
    let x = spec.point(i);
    let g = inverse_metric(&p[..n]);
    let v = (1.0 + p[..n].iter().map(|c| c * c).sum::<f64>()).sqrt();
    let mut trace = 0.0;
    let mut x_dot_p = 0.0;
    for a in 0..n {
        x_dot_p += x[a] * p[a];
        for b in 0..n {
            trace += g[a][b] * q[a][b];
        }
    }
    trace / v - (x_dot_p - u[i]) / (2.0 * v)
}

fn residual_values(problem: &DirichletProblem, u: &[f64]) -> Vec<f64> {
    let spec = &problem.spec;
    let mut out: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|i| if spec.is_boundary(i) { 0.0 } else { interior_residual(spec, u, i) })
        .collect();
    for (&i, &g) in problem.boundary_nodes.iter().zip(&problem.boundary_values) {
        out[i] = u[i] - g;
    }
    out
}

/// Interior shrinker residual with boundary rows `u - g`.
pub fn residual(u: &ScalarField, problem: &DirichletProblem) -> Result<ScalarField, NewtonError> {
    if u.spec() != &problem.spec {
        return Err(GridError::GridMismatch.into());
    }
    Ok(ScalarField::new(problem.spec, residual_values(problem, u.values()))?)
}

fn jacobian_row(spec: &GridSpec, u: &[f64], i: usize) -> Vec<(usize, f64)> {
    if spec.is_boundary(i) {
        return vec![(i, 1.0)];
    }
    let n = spec.dim();
    let h = spec.spacing();
    let Jet { p, q } = jet(spec, u, i);
    let x = spec.point(i);
    let g = inverse_metric(&p[..n]);
    let v2 = 1.0 + p[..n].iter().map(|c| c * c).sum::<f64>();
    let v = v2.sqrt();
    let mut trace = 0.0;
    let mut pqp = 0.0;
    let mut x_dot_p = 0.0;
    let mut qp = [0.0; MAX_DIM];
    for a in 0..n {
        x_dot_p += x[a] * p[a];
        for b in 0..n {
            trace += g[a][b] * q[a][b];
            pqp += p[a] * q[a][b] * p[b];
            qp[a] += q[a][b] * p[b];
        }
    }
    let drift = x_dot_p - u[i];
    let mut row = Vec::with_capacity(1 + 2 * n + 2 * n * (n - 1));
    let mut center = 1.0 / (2.0 * v);
    for a in 0..n {
        let sa = spec.stride(a);
        let dp = -p[a] * trace / (v2 * v)
            + (-2.0 * qp[a] / v2 + 2.0 * pqp * p[a] / (v2 * v2)) / v
            - x[a] / (2.0 * v)
            + drift * p[a] / (2.0 * v2 * v);
        let dq = g[a][a] / v;
        center -= 2.0 * dq / (h * h);
        row.push((i + sa, dp / (2.0 * h) + dq / (h * h)));
        row.push((i - sa, -dp / (2.0 * h) + dq / (h * h)));
        for b in (a + 1)..n {
            let sb = spec.stride(b);
            let w = 2.0 * g[a][b] / v / (4.0 * h * h);
            row.push((i + sa + sb, w));
            row.push((i - sa - sb, w));
            row.push((i + sa - sb, -w));
            row.push((i - sa + sb, -w));
        }
    }
    row.push((i, center));
    row
}

/// Exact Jacobian of [`residual`] at `u`.
pub fn jacobian(u: &ScalarField) -> CsrMatrix {
    let spec = *u.spec();
    let rows = (0..spec.len())
        .into_par_iter()
        .map(|i| jacobian_row(&spec, u.values(), i))
        .collect();
    CsrMatrix::from_rows(rows)
}

/// Discrete harmonic function (centred Laplacian) with the problem's
/// boundary data.
pub fn harmonic_extension(problem: &DirichletProblem) -> Result<ScalarField, NewtonError> {
    let spec = problem.spec;
    let n = spec.dim();
    let rows = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            if spec.is_boundary(i) {
                return vec![(i, 1.0)];
            }
            let mut row = vec![(i, -2.0 * n as f64)];
            for a in 0..n {
                let s = spec.stride(a);
                row.push((i + s, 1.0));
                row.push((i - s, 1.0));
            }
            row
        })
        .collect();
    let a = CsrMatrix::from_rows(rows);
    let b = problem.boundary_data_full();
    let (x, _) = bicgstab(&a, &b, LINEAR_TOL, LINEAR_MAX_ITER)?;
    Ok(ScalarField::new(spec, x)?)
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Newton iteration with backtracking: a step is accepted only if it
/// strictly lowers the sup-norm of the residual.
pub fn solve(problem: &DirichletProblem, config: SolveConfig) -> Result<(ScalarField, SolveReport), NewtonError> {
    if !(config.tol > 0.0) {
        return Err(NewtonError::InvalidProblem("tolerance must be positive".into()));
    }
    let spec = problem.spec;
    let mut u = match &problem.initial {
        InitialGuess::Harmonic => harmonic_extension(problem)?,
        InitialGuess::Field(f) => f.clone(),
    };
    let mut f = residual_values(problem, u.values());
    let mut norm = sup(&f);
    let mut report = SolveReport {
        iterations: 0,
        residual: norm,
        residual_history: vec![norm],
        damping_history: Vec::new(),
        linear_iterations: Vec::new(),
        converged: false,
    };
    if !norm.is_finite() {
        return Err(NewtonError::InvalidProblem("initial guess has non-finite residual".into()));
    }
    while norm >= config.tol {
        if report.iterations == config.max_iter {
            return Err(NewtonError::NotConverged { best: u, report });
        }
        let j = jacobian(&u);
        let rhs: Vec<f64> = f.iter().map(|r| -r).collect();
        let (delta, linear) = bicgstab(&j, &rhs, LINEAR_TOL, LINEAR_MAX_ITER)?;
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.values().iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let trial_f = residual_values(problem, &trial);
            let trial_norm = sup(&trial_f);
            if trial_norm < norm {
                break Some((trial, trial_f, trial_norm));
            }
            lambda /= 2.0;
            if lambda < MIN_DAMPING {
                break None;
            }
        };
        let Some((trial, trial_f, trial_norm)) = accepted else {
            return Err(NewtonError::NotConverged { best: u, report });
        };
        u = ScalarField::new(spec, trial)?;
        f = trial_f;
        norm = trial_norm;
        report.iterations += 1;
        report.residual = norm;
        report.residual_history.push(norm);
        report.damping_history.push(lambda);
        report.linear_iterations.push(linear.iterations);
    }
    report.converged = true;
    Ok((u, report))
}

/// Geometry identity residuals on a solved field.
pub fn cross_validate(u: &ScalarField, margin: usize) -> Result<IdentityReport, NewtonError> {
    Ok(identity_report(u, margin)?)
}
