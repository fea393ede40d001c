//! The acceptance suite: each check runs one experiment against its
//! analytic oracle and reports a pass flag and the smallest relative slack
//! among its conditions.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::flow::{flow_residual, run, self_similar_profile, step, FlowConfig, FlowParams, FlowState};
use crate::geometry::{identity_report, GraphContext, IdentityReport};
use crate::grid::{GridSpec, InteriorMask, ScalarField};
use crate::newton::{cross_validate, solve, DirichletProblem, InitialGuess, SolveConfig};
use crate::profile::Profile;
use crate::shooting::{integrate, scan, Classification, ShootingProblem};
use crate::weighted::{
    cutoff_energy, flatness_certificate, height_growth_check, stability_sides, volume_check, Bump,
    CutoffFamily, FlatnessThresholds, Verdict,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Smallest relative slack over the check's conditions; negative iff
    /// some condition fails.
    pub margin: f64,
    /// The statement the check exercises.
    pub citation: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckSummary {
    pub checks: Vec<Check>,
}

impl CheckSummary {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Collects the conditions of one check.
#[derive(Debug)]
pub struct Conditions {
    margin: f64,
    notes: Vec<String>,
}

impl Default for Conditions {
    fn default() -> Self {
        Self { margin: f64::INFINITY, notes: Vec::new() }
    }
}

fn relative(slack: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        slack
    } else {
        slack / scale.abs()
    }
}

impl Conditions {
    /// `value <= bound`.
    pub fn at_most(&mut self, label: &str, value: f64, bound: f64) {
        let slack = if value.is_nan() { -1.0 } else { relative(bound - value, bound) };
        self.record(label, format!("{value:.4e} <= {bound:.4e}"), slack);
    }

    /// `value >= bound`.
    pub fn at_least(&mut self, label: &str, value: f64, bound: f64) {
        let slack = if value.is_nan() { -1.0 } else { relative(value - bound, bound) };
        self.record(label, format!("{value:.4e} >= {bound:.4e}"), slack);
    }

    pub fn within(&mut self, label: &str, value: f64, lo: f64, hi: f64) {
        let slack = if value.is_nan() {
            -1.0
        } else {
            relative(value - lo, lo).min(relative(hi - value, hi))
        };
        self.record(label, format!("{value:.4e} in [{lo:.4e}, {hi:.4e}]"), slack);
    }

    /// A yes/no condition; it lowers the margin only when it fails.
    pub fn holds(&mut self, label: &str, ok: bool) {
        self.record(label, ok.to_string(), if ok { f64::INFINITY } else { -1.0 });
    }

    /// Wall-clock limit. Like [`Conditions::holds`] it only shows in the
    /// margin and detail when exceeded, which keeps reports reproducible.
    pub fn runtime(&mut self, label: &str, elapsed: Duration, limit: Duration) {
        if elapsed <= limit {
            self.record(label, format!("within {} s", limit.as_secs_f64()), f64::INFINITY);
        } else {
            self.record(
                label,
                format!("{:.3} s exceeds {} s", elapsed.as_secs_f64(), limit.as_secs_f64()),
                -1.0,
            );
        }
    }

    fn record(&mut self, label: &str, text: String, slack: f64) {
        self.margin = self.margin.min(slack);
        self.notes.push(format!("{label}: {text}"));
    }

    pub fn finish(self, name: &str, citation: &str) -> Check {
        let margin = if self.margin.is_finite() { self.margin } else { 0.0 };
        Check {
            name: name.to_string(),
            pass: margin >= 0.0,
            margin,
            citation: citation.to_string(),
            detail: self.notes.join("; "),
        }
    }
}

fn failed(name: &str, citation: &str, err: impl std::fmt::Display) -> Check {
    Check {
        name: name.to_string(),
        pass: false,
        margin: -1.0,
        citation: citation.to_string(),
        detail: format!("error: {err}"),
    }
}

type Outcome = Result<Conditions, Box<dyn std::error::Error>>;

fn conclude(name: &str, citation: &str, outcome: Outcome) -> Check {
    match outcome {
        Ok(c) => c.finish(name, citation),
        Err(e) => failed(name, citation, e),
    }
}

fn cap_identities(m: usize, margin: usize) -> Result<(IdentityReport, GraphContext), Box<dyn std::error::Error>> {
    let spec = GridSpec::new(2, 1.2, m)?;
    let u = Profile::SphereCap.discretize(&spec)?;
    let report = identity_report(&u, margin)?;
    Ok((report, GraphContext::new(u)))
}

pub fn shrinker_identity() -> Check {
    let outcome = (|| -> Outcome {
        let start = Instant::now();
        let (coarse, _) = cap_identities(161, 10)?;
        let (fine, _) = cap_identities(321, 20)?;
        let elapsed = start.elapsed();
        let mut c = Conditions::default();
        c.at_most("sup|S| at m=161", coarse.shrinker.sup, 5e-3);
        c.within("ratio m=161/m=321", coarse.shrinker.sup / fine.shrinker.sup, 3.4, 4.6);
        c.runtime("runtime", elapsed, Duration::from_secs(5));
        Ok(c)
    })();
    conclude("shrinker_identity", "shrinker equation, graph form and normal form", outcome)
}

pub fn curvature_values() -> Check {
    let outcome = (|| -> Outcome {
        let (_, ctx) = cap_identities(161, 10)?;
        let mask = InteriorMask::new(*ctx.spec(), 10)?;
        let geom = ctx.geometry();
        let h_err = mask
            .indices()
            .map(|i| (geom.mean_curvature()[i] - 1.0).abs())
            .fold(0.0, f64::max);
        let a_err = mask
            .indices()
            .map(|i| (geom.a_norm_sq()[i] / 0.5 - 1.0).abs())
            .fold(0.0, f64::max);
        let mut c = Conditions::default();
        c.at_most("max |H - 1|", h_err, 0.01);
        c.at_most("max ||A|^2/0.5 - 1|", a_err, 0.02);
        Ok(c)
    })();
    conclude("curvature_values", "round sphere of radius sqrt(2n): H = n/r, |A|^2 = n/r^2", outcome)
}

pub fn operator_identities() -> Check {
    let outcome = (|| -> Outcome {
        let (coarse, _) = cap_identities(161, 10)?;
        let (fine, _) = cap_identities(321, 20)?;
        let mut c = Conditions::default();
        let pairs = [
            ("Lf - f/2", coarse.vertical_normal, fine.vertical_normal),
            ("LH - H", coarse.mean_curvature, fine.mean_curvature),
            ("log-density", coarse.log_density, fine.log_density),
        ];
        for (label, a, b) in pairs {
            c.at_most(&format!("{label} weighted L2"), a.weighted_l2, 5e-2);
            c.at_least(&format!("{label} ratio"), a.weighted_l2 / b.weighted_l2, 3.0);
        }
        Ok(c)
    })();
    conclude("operator_identities", "stability operator eigen-identities Lf = f/2, LH = H", outcome)
}

pub fn one_dimensional_rigidity() -> Check {
    let outcome = (|| -> Outcome {
        let start = Instant::now();
        let mut c = Conditions::default();
        for row in scan(&[0.0], &[-2.0, -1.0, 0.0, 0.5, 2.0], 8.0) {
            let label = format!("b={}", row.b);
            c.holds(&format!("{label} LINE"), row.classification == Some(Classification::Line));
            c.at_most(&format!("{label} deviation"), row.deviation.unwrap_or(f64::NAN), 1e-7);
        }
        for a in [0.1, -0.1, 1.0, -1.0] {
            let problem = ShootingProblem::new(a, 0.0, 8.0);
            let loose = integrate(&problem)?;
            let tight = integrate(&problem.with_tolerances(problem.rel_tol / 10.0, problem.abs_tol / 10.0))?;
            let label = format!("a={a}");
            let blowup = loose.classification == Classification::GradientBlowup
                && tight.classification == Classification::GradientBlowup;
            c.holds(&format!("{label} GRADIENT_BLOWUP"), blowup);
            let (x0, x1) = (loose.blowup_x.unwrap_or(f64::NAN), tight.blowup_x.unwrap_or(f64::NAN));
            c.at_most(&format!("{label} blowup_x drift"), ((x0 - x1) / x1).abs(), 0.01);
        }
        c.runtime("runtime", start.elapsed(), Duration::from_secs(2));
        Ok(c)
    })();
    conclude("one_dimensional_rigidity", "entire shrinker graphs are linear, n = 1", outcome)
}

/// Deterministic bumps fitting inside the box of half width 1.2.
pub fn seeded_bumps(count: usize, seed: u64) -> Vec<Bump> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let center = vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
            let inner = rng.gen_range(0.05..0.25);
            let outer = inner + rng.gen_range(0.2..0.4);
            Bump::new(center, inner, outer).expect("ordered radii")
        })
        .collect()
}

pub const BUMP_SEED: u64 = 20_240_607;

pub fn stability_inequality() -> Check {
    let outcome = (|| -> Outcome {
        let bumps = seeded_bumps(20, BUMP_SEED);
        let mut c = Conditions::default();
        let profiles = [("plane", Profile::Plane(vec![0.5, -0.3])), ("sphere_cap", Profile::SphereCap)];
        for (label, profile) in profiles {
            let contexts: Vec<GraphContext> = [81, 161]
                .iter()
                .map(|&m| Ok(GraphContext::new(profile.discretize(&GridSpec::new(2, 1.2, m)?)?)))
                .collect::<Result<_, Box<dyn std::error::Error>>>()?;
            let mut worst_margin = f64::INFINITY;
            let mut worst_change: f64 = 0.0;
            for bump in &bumps {
                let coarse = stability_sides(&contexts[0], bump)?;
                let fine = stability_sides(&contexts[1], bump)?;
                worst_margin = worst_margin.min(coarse.margin).min(fine.margin);
                worst_change = worst_change.max(((coarse.margin - fine.margin) / fine.margin).abs());
            }
            c.at_least(&format!("{label} min margin"), worst_margin, -1e-9);
            c.at_most(&format!("{label} max margin change"), worst_change, 0.05);
        }
        Ok(c)
    })();
    conclude("stability_inequality", "weighted stability inequality for graphical shrinkers", outcome)
}

pub fn cutoff_energy_decay() -> Check {
    let outcome = (|| -> Outcome {
        let spec = GridSpec::new(2, 10.0, 201)?;
        let family = CutoffFamily::integers(8);
        let mut c = Conditions::default();
        let tilted = GraphContext::new(ScalarField::from_fn(spec, |x| 0.3 * x[0] + 0.1 * x[1]));
        let e: Vec<f64> = cutoff_energy(&tilted, &family)?.iter().map(|e| e.energy).collect();
        let monotone = e[2..].windows(2).all(|w| w[1] < w[0]);
        c.holds("monotone for j >= 3", monotone);
        c.at_most("value_8 / value_1", e[7] / e[0], 1e-5);
        let flat = GraphContext::new(ScalarField::zeros(spec));
        let worst = cutoff_energy(&flat, &family)?
            .iter()
            .map(|e| {
                let r = e.radius;
                let exact = 4.0 * std::f64::consts::PI * ((-r * r / 4.0).exp() - (-(r + 1.0).powi(2) / 4.0).exp());
                ((e.energy - exact) / exact).abs()
            })
            .fold(0.0, f64::max);
        c.at_most("flat relative error", worst, 0.02);
        Ok(c)
    })();
    conclude("cutoff_energy_decay", "Gaussian energy of radial cutoffs tends to zero", outcome)
}

pub fn volume_growth() -> Check {
    let outcome = (|| -> Outcome {
        let spec = GridSpec::new(2, 5.0, 201)?;
        let radii = [1.5, 2.0, 4.0];
        let mut c = Conditions::default();
        for (label, slope) in [("u=0", 0.0), ("u=x1", 1.0)] {
            let ctx = GraphContext::new(ScalarField::from_fn(spec, |x| slope * x[0]));
            for &r in &radii {
                let report = volume_check(&ctx, r)?;
                let disk = std::f64::consts::PI * r * r;
                c.at_most(&format!("{label} R={r} volume error"), ((report.volume - disk) / disk).abs(), 0.01);
                c.at_most(&format!("{label} R={r} volume bound"), report.volume, report.bound);
            }
            for report in height_growth_check(&ctx, &radii)? {
                c.at_most(&format!("{label} R={} height bound", report.scale), report.lhs, report.rhs);
            }
        }
        let wide = GridSpec::new(2, 30.0, 121)?;
        let parabola = GraphContext::new(ScalarField::from_fn(wide, |x| x[0] * x[0]));
        for report in height_growth_check(&parabola, &[22.0, 25.0, 28.0])? {
            c.holds(
                &format!("u=x1^2 R={} exceeds C1={:.3}", report.scale, report.c1),
                report.scale > report.c1 && !report.pass,
            );
        }
        Ok(c)
    })();
    conclude("volume_growth", "polynomial volume growth and linear height growth", outcome)
}

fn interior_change(a: &ScalarField, b: &ScalarField, radius: f64) -> f64 {
    let spec = a.spec();
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in (0..spec.len()).filter(|&i| spec.radius_sq(i) <= radius * radius) {
        let x = spec.point(i);
        let other = b.interpolate(&x[..spec.dim()]).unwrap_or(f64::NAN);
        diff = diff.max((a.at(i) - other).abs());
        scale = scale.max(a.at(i).abs());
    }
    diff / scale
}

pub fn flow_barriers() -> Check {
    let outcome = (|| -> Outcome {
        let start = Instant::now();
        let w0 = |x: &[f64]| 0.5 * x[0] + 0.4 * x[0].sin();
        let run_with = |box_factor: f64, m: usize| -> Result<_, Box<dyn std::error::Error>> {
            let mut params = FlowParams::new(1, 2.0, m);
            params.rho = Some(2.0);
            params.box_factor = Some(box_factor);
            let config = FlowConfig::new(params)?;
            let initial = ScalarField::from_fn(*config.spec(), w0);
            Ok(run(&config, initial)?)
        };
        let base = run_with(crate::flow::DEFAULT_BOX_FACTOR, 401)?;
        let doubled = run_with(2.0 * crate::flow::DEFAULT_BOX_FACTOR, 801)?;
        let mut c = Conditions::default();
        c.at_least("min clearance", base.min_clearance(), 0.0);
        c.holds("clear at every step", base.barriers_clear());
        c.at_most(
            "interior change (|x| <= rho R)",
            interior_change(&base.final_state.w, &doubled.final_state.w, 4.0),
            0.01,
        );
        c.runtime("runtime", start.elapsed(), Duration::from_secs(30));
        Ok(c)
    })();
    conclude("flow_barriers", "rescaled graphical flow stays between shrinking spheres", outcome)
}

pub fn self_similar_exactness() -> Check {
    let outcome = (|| -> Outcome {
        let mut c = Conditions::default();
        let slope = vec![0.7, -0.2];
        let plane = Profile::Plane(slope.clone());
        let spec = GridSpec::new(2, 3.0, 61)?;
        let exact = plane.discretize(&spec)?;
        let mut worst: f64 = 0.0;
        for t in [0.0, 1.0, 2.0, 3.0, 4.0] {
            let w = self_similar_profile(&plane, 2.0, t, &spec)?;
            worst = worst.max(w.zip_with(&exact, |a, b| a - b)?.sup_abs());
        }
        c.at_most("profile of a plane", worst, 1e-13);

        let mut params = FlowParams::new(1, 2.0, 101);
        params.t_end = Some(1.0);
        let config = FlowConfig::new(params)?;
        let line = ScalarField::from_fn(*config.spec(), |x| 0.7 * x[0]);
        let mut state = FlowState::initial(line.clone());
        while state.t < 1.0 {
            state = step(&state, &config)?;
        }
        let drift = state.w.zip_with(&line, |a, b| a - b)?.sup_abs() / line.sup_abs();
        c.at_most("evolved line", drift, 1e-12);

        let cap_spec = GridSpec::new(2, 1.2, 161)?;
        let mask = InteriorMask::new(cap_spec, 10)?;
        for t in [0.5, 2.0, 3.5] {
            let r = flow_residual(&Profile::SphereCap, 2.0, t, &cap_spec)?;
            c.at_most(&format!("flow residual t={t}"), mask.sup_abs(r.values()), 5e-3);
        }
        Ok(c)
    })();
    conclude("self_similar_exactness", "self-similar solutions of the rescaled graphical flow", outcome)
}

fn newton_cap(m: usize) -> Result<(ScalarField, ScalarField), Box<dyn std::error::Error>> {
    let spec = GridSpec::new(2, 1.0, m)?;
    let problem = DirichletProblem::from_profile(spec, &Profile::SphereCap)?;
    let (u, _) = solve(&problem, SolveConfig::default())?;
    Ok((u, Profile::SphereCap.discretize(&spec)?))
}

pub fn newton_cross_validation() -> Check {
    let outcome = (|| -> Outcome {
        let mut c = Conditions::default();
        let spec = GridSpec::new(2, 2.0, 41)?;
        let exact = ScalarField::from_fn(spec, |x| 0.5 * x[0] - 0.3 * x[1]);
        let problem = DirichletProblem::from_fn(spec, |x| 0.5 * x[0] - 0.3 * x[1])?;
        let perturbed = ScalarField::from_fn(spec, |x| 0.3 * (1.7 * x[0]).sin() * x[1].cos() + 0.2);
        for (label, initial) in [("harmonic", InitialGuess::Harmonic), ("perturbed", InitialGuess::Field(perturbed))] {
            let (u, _) = solve(&problem.clone().with_initial(initial)?, SolveConfig::default())?;
            c.at_most(&format!("linear data, {label} start"), u.zip_with(&exact, |a, b| a - b)?.sup_abs(), 1e-6);
        }
        let (coarse, cap) = newton_cap(81)?;
        c.at_most("cap error m=81", coarse.zip_with(&cap, |a, b| a - b)?.sup_abs(), 5e-3);
        let (fine, _) = newton_cap(161)?;
        let a = cross_validate(&coarse, 4)?;
        let b = cross_validate(&fine, 8)?;
        let pairs = [
            ("Lf - f/2", a.vertical_normal, b.vertical_normal),
            ("LH - H", a.mean_curvature, b.mean_curvature),
            ("log-density", a.log_density, b.log_density),
        ];
        for (label, x, y) in pairs {
            c.within(&format!("{label} ratio"), x.weighted_l2 / y.weighted_l2, 3.0, 5.0);
        }
        Ok(c)
    })();
    conclude("newton_cross_validation", "shrinker equation solved on a box; identities on the solution", outcome)
}

pub fn flatness() -> Check {
    let outcome = (|| -> Outcome {
        let mut c = Conditions::default();
        let family = CutoffFamily::integers(3);
        for l in [1.0, 2.0, 4.0] {
            let spec = GridSpec::new(2, l, 81)?;
            let problem = DirichletProblem::from_fn(spec, |x| 0.5 * x[0] - 0.3 * x[1])?;
            let (u, report) = solve(&problem, SolveConfig::default())?;
            c.holds(&format!("L={l} converged"), report.converged);
            let cert = flatness_certificate(&GraphContext::new(u), &family, FlatnessThresholds::default());
            c.at_most(&format!("L={l} weighted |A|^2 mass"), cert.weighted_a2_mass, 1e-6);
            c.holds(&format!("L={l} FLAT"), cert.verdict == Verdict::Flat);
        }
        let (cap, _) = newton_cap(81)?;
        let cert = flatness_certificate(&GraphContext::new(cap), &family, FlatnessThresholds::default());
        c.holds("sphere_cap NOT_FLAT", cert.verdict == Verdict::NotFlat);
        Ok(c)
    })();
    conclude("flatness", "entire graphical shrinkers are hyperplanes", outcome)
}

/// Every acceptance check, in order.
pub const ALL: [fn() -> Check; 11] = [
    shrinker_identity,
    curvature_values,
    operator_identities,
    one_dimensional_rigidity,
    stability_inequality,
    cutoff_energy_decay,
    volume_growth,
    flow_barriers,
    self_similar_exactness,
    newton_cross_validation,
    flatness,
];

pub fn run_all() -> CheckSummary {
    CheckSummary { checks: ALL.iter().map(|check| check()).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditions_margins() {
        let mut c = Conditions::default();
        c.at_most("a", 1.0, 2.0);
        c.at_least("b", 3.0, 2.0);
        let check = c.finish("x", "y");
        assert!(check.pass);
        assert!((check.margin - 0.5).abs() < 1e-15);

        let mut c = Conditions::default();
        c.within("r", 5.0, 3.4, 4.6);
        c.holds("ok", true);
        let check = c.finish("x", "y");
        assert!(!check.pass && check.margin < 0.0);

        let mut c = Conditions::default();
        c.at_most("nan", f64::NAN, 1.0);
        assert!(!c.finish("x", "y").pass);
        assert!(Conditions::default().finish("x", "y").pass);
    }

    #[test]
    fn seeded_bumps_are_reproducible_and_fit() {
        let a = seeded_bumps(20, BUMP_SEED);
        assert_eq!(a, seeded_bumps(20, BUMP_SEED));
        for b in &a {
            let reach = b.center.iter().map(|c| c * c).sum::<f64>().sqrt() + b.outer;
            assert!(reach < 1.2 - 0.05);
        }
    }

    #[test]
    fn errors_become_failing_checks() {
        let check = conclude("x", "y", Err("boom".into()));
        assert!(!check.pass);
        assert_eq!(check.detail, "error: boom");
    }
}
