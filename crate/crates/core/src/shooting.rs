//! One-dimensional shrinker curves shot from the origin.
//!
//! For `n = 1` the shrinker equation reads
//! `u'' = (1 + u'^2)(x u' - u)/2`. Expanding `div(u'/v) = u''/v^3` and
//! multiplying through by `v^3` gives this form. Integration is carried
//! out along arclength with the tangent angle `θ` (`u' = tan θ`), where the
//! same equation becomes
//!
//! ```text
//! x' = cos θ,   u' = sin θ,   θ' = (x sin θ - u cos θ)/2,
//! ```
//!
//! so a graph whose slope runs off to infinity stays a smooth curve and
//! the crossing of the slope cap can be located precisely. The support
//! quantity `σ = x sin θ - u cos θ` is carried as a fourth unknown with
//! `σ' = (x cos θ + u sin θ) σ/2`, so lines through the origin (`σ ≡ 0`)
//! are reproduced exactly instead of being destabilized by rounding.
//! Only lines through the origin extend to entire graphs; every other
//! initial condition reaches a vertical tangent at finite `x`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error("invalid shooting problem: {0}")]
    InvalidProblem(String),
    #[error("step size underflow at x = {x}, u = {u}, u' = {du}")]
    StepUnderflow { x: f64, u: f64, du: f64 },
    #[error("trajectories are sampled at different points")]
    MismatchedSamples,
}

/// Initial data `u(0) = a`, `u'(0) = b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingProblem {
    pub a: f64,
    pub b: f64,
    pub x_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub slope_cap: f64,
}

impl ShootingProblem {
    pub fn new(a: f64, b: f64, x_max: f64) -> Self {
        Self {
            a,
            b,
            x_max,
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            slope_cap: 1e8,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<(), ShootingError> {
        let bad = |what: &str| Err(ShootingError::InvalidProblem(what.into()));
        if !(self.a.is_finite() && self.b.is_finite()) {
            return bad("initial data must be finite");
        }
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return bad("x_max must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.slope_cap > 1.0) {
            return bad("slope cap must exceed 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Line,
    GradientBlowup,
    HorizonReached,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Line => "LINE",
            Classification::GradientBlowup => "GRADIENT_BLOWUP",
            Classification::HorizonReached => "HORIZON_REACHED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub x: f64,
    pub u: f64,
    pub du: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Samples for `x >= 0`, starting at the origin.
    pub forward: Vec<Sample>,
    /// Samples for `x <= 0`, starting at the origin.
    pub backward: Vec<Sample>,
    pub classification: Classification,
    pub blowup_x: Option<f64>,
    /// `sup |u - b x|` over all samples.
    pub deviation: f64,
}

impl Trajectory {
    /// Samples ordered by increasing `x`, origin once.
    pub fn ordered_samples(&self) -> Vec<Sample> {
        self.backward
            .iter()
            .rev()
            .chain(self.forward.iter().skip(1))
            .copied()
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,u,du")?;
        for s in self.ordered_samples() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", s.x, s.u, s.du)?;
        }
        Ok(())
    }
}

const LINE_THRESHOLD: f64 = 1e-7;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 0.05;
const MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    Horizon,
    Blowup,
}

type State = [f64; 4];

fn rhs(y: &State) -> State {
    let (s, c) = y[2].sin_cos();
    [c, s, 0.5 * y[3], 0.5 * (y[0] * c + y[1] * s) * y[3]]
}

// Dormand-Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order solution and the
/// embedded error estimate.
fn dopri_step(y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; 4]; 7];
    k[0] = rhs(y);
    for stage in 1..7 {
        let mut ys = *y;
        for (prev, kp) in k.iter().enumerate().take(stage) {
            let a = A[stage][prev];
            if a != 0.0 {
                for c in 0..4 {
                    ys[c] += h * a * kp[c];
                }
            }
        }
        k[stage] = rhs(&ys);
    }
    let mut high = *y;
    let mut err = [0.0; 4];
    for c in 0..4 {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for stage in 0..7 {
            d5 += B5[stage] * k[stage][c];
            d4 += B4[stage] * k[stage][c];
        }
        high[c] += h * d5;
        err[c] = h * (d5 - d4);
    }
    (high, err)
}

fn sample(y: &State) -> Sample {
    let (s, c) = y[2].sin_cos();
    Sample {
        x: y[0],
        u: y[1],
        du: s / c,
    }
}

/// Integrates towards `+x` from `(0, a, atan b)`.
fn integrate_forward(problem: &ShootingProblem, b: f64) -> Result<(Vec<Sample>, Stop), ShootingError> {
    let cap = problem.slope_cap;
    let event_horizon = |y: &State| problem.x_max - y[0];
    let event_slope = |y: &State| {
        let (s, c) = y[2].sin_cos();
        cap * c - s.abs()
    };
    let theta = b.atan();
    let mut y: State = [0.0, problem.a, theta, -problem.a * theta.cos()];
    let mut samples = vec![sample(&y)];
    let mut h = 1e-3;
    for _ in 0..MAX_STEPS {
        if h < MIN_STEP {
            let last = sample(&y);
            return Err(ShootingError::StepUnderflow {
                x: last.x,
                u: last.u,
                du: last.du,
            });
        }
        let (next, err) = dopri_step(&y, h);
        let mut norm: f64 = 0.0;
        for c in 0..4 {
            let scale = problem.abs_tol + problem.rel_tol * y[c].abs().max(next[c].abs());
            norm = norm.max(err[c].abs() / scale);
        }
        if !norm.is_finite() || norm > 1.0 {
            let shrink = if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= shrink;
            continue;
        }
        // Locate the first event crossed inside the accepted step.
        let crossed = if event_slope(&next) <= 0.0 {
            Some(Stop::Blowup)
        } else if event_horizon(&next) <= 0.0 {
            Some(Stop::Horizon)
        } else {
            None
        };
        if let Some(stop) = crossed {
            let g = |z: &State| match stop {
                Stop::Blowup => event_slope(z),
                Stop::Horizon => event_horizon(z),
            };
            let (mut lo, mut hi) = (0.0, h);
            let mut end = next;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (trial, _) = dopri_step(&y, mid);
                if g(&trial) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    end = trial;
                }
            }
            // A horizon crossing might also hide a slope crossing; the slope
            // event was checked first on the full step, so the bracketed end
            // state is final.
            if stop == Stop::Horizon {
                end[0] = problem.x_max;
            }
            samples.push(sample(&end));
            return Ok((samples, stop));
        }
        y = next;
        samples.push(sample(&y));
        let grow = if norm > 0.0 {
            (0.9 * norm.powf(-0.2)).min(5.0)
        } else {
            5.0
        };
        h = (h * grow).min(MAX_STEP);
    }
    let last = sample(&y);
    Err(ShootingError::StepUnderflow {
        x: last.x,
        u: last.u,
        du: last.du,
    })
}

/// Integrates the shrinker ODE in both directions from the origin and
/// classifies the solution.
pub fn integrate(problem: &ShootingProblem) -> Result<Trajectory, ShootingError> {
    problem.validate()?;
    let (forward, stop_fwd) = integrate_forward(problem, problem.b)?;
    // The equation is invariant under x -> -x, so the left half is the
    // forward solution for slope -b, mirrored.
    let (mirrored, stop_bwd) = integrate_forward(problem, -problem.b)?;
    let backward: Vec<Sample> = mirrored
        .into_iter()
        .map(|s| Sample {
            x: -s.x,
            u: s.u,
            du: -s.du,
        })
        .collect();

    let deviation = forward
        .iter()
        .chain(&backward)
        .map(|s| (s.u - problem.b * s.x).abs())
        .fold(0.0, f64::max);
    let blowup_x = match (stop_fwd, stop_bwd) {
        (Stop::Blowup, Stop::Blowup) => {
            let f = forward.last().unwrap().x;
            let b = backward.last().unwrap().x;
            Some(if b.abs() < f.abs() { b } else { f })
        }
        (Stop::Blowup, _) => Some(forward.last().unwrap().x),
        (_, Stop::Blowup) => Some(backward.last().unwrap().x),
        _ => None,
    };
    let classification = if blowup_x.is_some() {
        Classification::GradientBlowup
    } else if deviation < LINE_THRESHOLD {
        Classification::Line
    } else {
        Classification::HorizonReached
    };
    Ok(Trajectory {
        forward,
        backward,
        classification,
        blowup_x,
        deviation,
    })
}

/// True iff `mirror` is the image of `traj` under `u -> -u`.
pub fn symmetry_check(traj: &Trajectory, mirror: &Trajectory) -> Result<bool, ShootingError> {
    const TOL: f64 = 1e-9;
    let pairs = [(&traj.forward, &mirror.forward), (&traj.backward, &mirror.backward)];
    for (a, b) in pairs {
        if a.len() != b.len() || a.iter().zip(b.iter()).any(|(p, q)| (p.x - q.x).abs() > TOL) {
            return Err(ShootingError::MismatchedSamples);
        }
    }
    Ok(pairs.iter().all(|(a, b)| {
        a.iter().zip(b.iter()).all(|(p, q)| {
            (p.u + q.u).abs() <= TOL * (1.0 + p.u.abs())
                && (p.du + q.du).abs() <= TOL * (1.0 + p.du.abs())
        })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub a: f64,
    pub b: f64,
    pub classification: Option<Classification>,
    pub blowup_x: Option<f64>,
    pub deviation: Option<f64>,
    pub error: Option<String>,
}

/// Classifies every `(a, b)` pair; per-cell failures are recorded in the
/// row rather than aborting the scan.
pub fn scan(a_values: &[f64], b_values: &[f64], x_max: f64) -> Vec<ScanRow> {
    let cells: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| b_values.iter().map(move |&b| (a, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(a, b)| match integrate(&ShootingProblem::new(a, b, x_max)) {
            Ok(t) => ScanRow {
                a,
                b,
                classification: Some(t.classification),
                blowup_x: t.blowup_x,
                deviation: Some(t.deviation),
                error: None,
            },
            Err(e) => ScanRow {
                a,
                b,
                classification: None,
                blowup_x: None,
                deviation: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn write_scan_csv<W: std::io::Write>(rows: &[ScanRow], mut out: W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
    writeln!(out, "a,b,class,blowup_x,deviation")?;
    for row in rows {
        let class = row
            .classification
            .map(|c| c.to_string())
            .unwrap_or_else(|| "FAILED".into());
        writeln!(
            out,
            "{:.16e},{:.16e},{},{},{}",
            row.a,
            row.b,
            class,
            opt(row.blowup_x),
            opt(row.deviation)
        )?;
    }
    Ok(())
}
