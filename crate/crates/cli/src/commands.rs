//! One function per subcommand: resolve settings, run the modules, build
//! the checks and artifact files.

use std::io::BufReader;

use selfshrink::flow::{run as run_flow, FlowConfig, FlowError, FlowParams};
use selfshrink::geometry::{identity_report, GraphContext, IdentityReport};
use selfshrink::grid::{GridSpec, InteriorMask, ScalarField};
use selfshrink::newton::{cross_validate, solve, DirichletProblem, NewtonError, SolveConfig};
use selfshrink::profile::Profile;
use selfshrink::shooting::{integrate, scan, symmetry_check, write_scan_csv, Classification, ShootingProblem};
use selfshrink::verify::{self, Check, Conditions};
use selfshrink::weighted::{
    cutoff_energy, flatness_certificate, height_growth_check, stability_sides, volume_check, Bump,
    Cutoff, CutoffFamily, FlatnessThresholds, RadialCutoff,
};
use serde_json::json;

use crate::error::CliError;
use crate::report::Outcome;
use crate::settings::Settings;
use crate::{
    Command, FlowArgs, GeometryArgs, GridArgs, ProfileArgs, ScanArgs, ShootArgs, SolveArgs, StabilityArgs,
    VolumeArgs,
};

pub fn dispatch(command: Command, settings: Settings) -> Result<Outcome, CliError> {
    match command {
        Command::Shoot(args) => shoot(args, settings),
        Command::Scan(args) => scan_cmd(args, settings),
        Command::Geometry(args) => geometry(args, settings),
        Command::Solve(args) => solve_cmd(args, settings),
        Command::Flow(args) => flow(args, settings),
        Command::Stability(args) => stability(args, settings),
        Command::Volume(args) => volume(args, settings),
        Command::VerifyAll => verify_all(settings),
    }
}

fn csv_bytes(field: &ScalarField) -> Vec<u8> {
    let mut buf = Vec::new();
    field.write_csv(&mut buf).expect("writing to memory");
    buf
}

/// Reads the profile settings; a tabulated profile also supplies the grid
/// defaults.
fn resolve_profile(
    s: &mut Settings,
    args: ProfileArgs,
    default_name: Option<&str>,
) -> Result<(String, ProfileParts), CliError> {
    let name = match default_name {
        Some(d) => s.string_or("profile", args.profile, d)?,
        None => s
            .string_opt("profile", args.profile)?
            .ok_or_else(|| CliError::Usage("missing required setting `profile`".into()))?,
    };
    let parts = ProfileParts {
        slope: s.list_opt("slope", args.slope)?,
        coefficient: s.f64_opt("coefficient", args.coefficient)?,
        amplitude: s.f64_opt("amplitude", args.amplitude)?,
        wavenumber: s.f64_opt("wavenumber", args.wavenumber)?,
        input: s.string_opt("input", args.input)?,
    };
    Ok((name, parts))
}

struct ProfileParts {
    slope: Option<Vec<f64>>,
    coefficient: Option<f64>,
    amplitude: Option<f64>,
    wavenumber: Option<f64>,
    input: Option<String>,
}

impl ProfileParts {
    fn build(&self, name: &str, dim: usize) -> Result<Profile, CliError> {
        Ok(match name {
            "plane" => {
                let slope = self.slope.clone().unwrap_or_else(|| vec![0.0; dim]);
                if slope.len() != dim {
                    return Err(CliError::Usage(format!(
                        "plane slope has {} entries, dimension is {dim}",
                        slope.len()
                    )));
                }
                Profile::Plane(slope)
            }
            "sphere_cap" | "sphere-cap" => Profile::SphereCap,
            "paraboloid" => Profile::Paraboloid(self.coefficient.unwrap_or(1.0)),
            "sinusoid" => Profile::Sinusoid {
                slope: self.slope.as_ref().and_then(|s| s.first().copied()).unwrap_or(0.5),
                amplitude: self.amplitude.unwrap_or(0.4),
                wavenumber: self.wavenumber.unwrap_or(1.0),
            },
            "tabulated" => Profile::Tabulated(self.tabulated()?.expect("checked by caller")),
            other => return Err(CliError::Usage(format!("unknown profile `{other}`"))),
        })
    }

    fn tabulated(&self) -> Result<Option<ScalarField>, CliError> {
        let Some(path) = &self.input else {
            return Ok(None);
        };
        let file = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot open {path}: {e}")))?;
        ScalarField::read_csv(BufReader::new(file))
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{path}: {e}")))
    }
}

/// Grid and sampled profile for the commands that work on a fixed graph.
fn resolve_graph(
    s: &mut Settings,
    grid: GridArgs,
    profile: ProfileArgs,
    default_profile: Option<&str>,
    defaults: (usize, f64, usize),
) -> Result<(GridSpec, Profile), CliError> {
    let (name, parts) = resolve_profile(s, profile, default_profile)?;
    let table = if name == "tabulated" {
        Some(parts.tabulated()?.ok_or_else(|| CliError::Usage("tabulated profile needs `input`".into()))?)
    } else {
        None
    };
    let defaults = match &table {
        Some(f) => (f.spec().dim(), f.spec().half_width(), f.spec().nodes_per_axis()),
        None => defaults,
    };
    let dim = s.usize_or("dim", grid.dim, defaults.0)?;
    let half_width = s.f64_or("half-width", grid.half_width, defaults.1)?;
    let nodes = s.usize_or("nodes", grid.nodes, defaults.2)?;
    let spec = GridSpec::new(dim, half_width, nodes).map_err(CliError::usage)?;
    let profile = parts.build(&name, dim)?;
    profile.check_grid(&spec).map_err(CliError::usage)?;
    Ok((spec, profile))
}

fn sample(profile: &Profile, spec: &GridSpec) -> Result<ScalarField, CliError> {
    profile.discretize(spec).map_err(CliError::usage)
}

fn shoot(args: ShootArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let a = s.f64_required("a", args.a)?;
    let b = s.f64_required("b", args.b)?;
    let xmax = s.f64_or("xmax", args.xmax, 8.0)?;
    let rtol = s.f64_or("rtol", args.rtol, 1e-9)?;
    let atol = s.f64_or("atol", args.atol, 1e-9)?;
    let cap = s.f64_or("slope-cap", args.slope_cap, 1e8)?;
    let mut problem = ShootingProblem::new(a, b, xmax).with_tolerances(rtol, atol);
    problem.slope_cap = cap;
    problem.validate().map_err(CliError::usage)?;
    let mut out = Outcome::new("shoot", s.finish()?);

    let mut mirror = problem;
    mirror.a = -a;
    mirror.b = -b;
    let (traj, mirrored) = match (integrate(&problem), integrate(&mirror)) {
        (Ok(t), Ok(m)) => (t, m),
        (Err(e), _) | (_, Err(e)) => return Ok(out.failed("shooting", e)),
    };
    let mut c = Conditions::default();
    c.holds("u -> -u symmetry", symmetry_check(&traj, &mirrored).unwrap_or(false));
    out.check(c.finish("symmetry", "reflection symmetry of the shrinker equation"));
    let mut c = Conditions::default();
    c.holds(
        "LINE exactly when a = 0",
        (a == 0.0) == (traj.classification == Classification::Line),
    );
    out.check(c.finish("rigidity", "entire shrinker graphs are linear, n = 1"));

    out.result = json!({
        "classification": traj.classification,
        "blowup_x": traj.blowup_x,
        "deviation": traj.deviation,
        "samples": traj.forward.len() + traj.backward.len(),
    });
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).expect("writing to memory");
    out.file("trajectory.csv", buf);
    Ok(out)
}

fn scan_cmd(args: ScanArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let a_values = s.list_required("a-values", args.a_values)?;
    let b_values = s.list_required("b-values", args.b_values)?;
    let xmax = s.f64_or("xmax", args.xmax, 8.0)?;
    if !(xmax > 0.0) {
        return Err(CliError::Usage("xmax must be positive".into()));
    }
    let mut out = Outcome::new("scan", s.finish()?);
    let rows = scan(&a_values, &b_values, xmax);
    let count = |class: Classification| rows.iter().filter(|r| r.classification == Some(class)).count();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let mut c = Conditions::default();
    c.holds("every cell integrated", failed == 0);
    let contradictions = rows
        .iter()
        .filter(|r| match r.classification {
            Some(class) => (r.a == 0.0) != (class == Classification::Line),
            None => false,
        })
        .count();
    c.holds("LINE exactly when a = 0", contradictions == 0);
    out.check(c.finish("rigidity", "entire shrinker graphs are linear, n = 1"));
    out.result = json!({
        "cells": rows.len(),
        "line": count(Classification::Line),
        "gradient_blowup": count(Classification::GradientBlowup),
        "horizon_reached": count(Classification::HorizonReached),
        "failed": failed,
    });
    let mut buf = Vec::new();
    write_scan_csv(&rows, &mut buf).expect("writing to memory");
    out.file("scan.csv", buf);
    Ok(out)
}

fn identity_checks(out: &mut Outcome, report: &IdentityReport, tol: f64) {
    let mut c = Conditions::default();
    c.at_most("Lf - f/2 weighted L2", report.vertical_normal.weighted_l2, tol);
    c.at_most("LH - H weighted L2", report.mean_curvature.weighted_l2, tol);
    c.at_most("log-density weighted L2", report.log_density.weighted_l2, tol);
    out.check(c.finish("identities", "stability operator eigen-identities Lf = f/2, LH = H"));
}

fn geometry(args: GeometryArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let (spec, profile) = resolve_graph(&mut s, args.grid, args.profile, None, (2, 1.2, 161))?;
    let margin = s.usize_or("margin", args.margin, 10)?;
    let tol = s.f64_or("tol", args.tol, 5e-3)?;
    let identity_tol = s.f64_or("identity-tol", args.identity_tol, 5e-2)?;
    let mask = InteriorMask::new(spec, margin).map_err(CliError::usage)?;
    let u = sample(&profile, &spec)?;
    let mut out = Outcome::new("geometry", s.finish()?);

    let report = identity_report(&u, margin).map_err(|e| CliError::module("geometry", e))?;
    let ctx = GraphContext::new(u.clone());
    let geom = ctx.geometry();
    let range = |values: &[f64]| {
        let (lo, hi) = mask
            .indices()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| (lo.min(values[i]), hi.max(values[i])));
        json!({ "min": lo, "max": hi })
    };
    let mut c = Conditions::default();
    c.at_most("interior sup |S|", report.shrinker.sup, tol);
    out.check(c.finish("shrinker_residual", "shrinker equation, graph form and normal form"));
    identity_checks(&mut out, &report, identity_tol);
    out.result = json!({
        "identities": json!(report),
        "mean_curvature": range(geom.mean_curvature()),
        "a_norm_sq": range(geom.a_norm_sq()),
    });
    out.file("field.csv", csv_bytes(&u));
    Ok(out)
}

fn solve_cmd(args: SolveArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let (spec, profile) = resolve_graph(&mut s, args.grid, args.profile, Some("plane"), (2, 1.0, 81))?;
    let config = SolveConfig {
        tol: s.f64_or("tol", args.tol, 1e-10)?,
        max_iter: s.usize_or("max-iter", args.max_iter, 50)?,
    };
    let margin = s.usize_or("margin", args.margin, 4)?;
    let identity_tol = s.f64_or("identity-tol", args.identity_tol, 5e-2)?;
    let radii = s.list_or("radii", args.radii, &[1.0, 2.0, 3.0])?;
    let family = CutoffFamily::new(radii).map_err(CliError::usage)?;
    InteriorMask::new(spec, margin).map_err(CliError::usage)?;
    let problem = DirichletProblem::from_profile(spec, &profile).map_err(CliError::usage)?;
    let mut out = Outcome::new("solve", s.finish()?);

    let (u, report) = match solve(&problem, config) {
        Ok(ok) => ok,
        Err(NewtonError::NotConverged { best, report }) => {
            out.file("field.csv", csv_bytes(&best));
            let message = format!(
                "residual {:.3e} after {} iterations (tolerance {:.1e})",
                report.residual, report.iterations, config.tol
            );
            return Ok(out.failed("not_converged", message));
        }
        Err(NewtonError::Linear(e)) => return Ok(out.failed("linear_solver", e)),
        Err(e) => return Ok(out.failed("newton", e)),
    };
    let identities = cross_validate(&u, margin).map_err(|e| CliError::module("geometry", e))?;
    let flatness = flatness_certificate(&GraphContext::new(u.clone()), &family, FlatnessThresholds::default());
    let mut c = Conditions::default();
    c.holds("converged", report.converged);
    c.at_most("final residual", report.residual, config.tol);
    out.check(c.finish("converged", "shrinker equation solved on a box"));
    identity_checks(&mut out, &identities, identity_tol);
    out.result = json!({
        "solve": json!(&report),
        "identities": json!(identities),
        "flatness": json!(&flatness),
    });
    out.file("field.csv", csv_bytes(&u));
    Ok(out)
}

fn flow(args: FlowArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let mut params = FlowParams::new(
        s.usize_or("dim", args.dim, 1)?,
        s.f64_or("scale", args.scale, 2.0)?,
        s.usize_or("nodes", args.nodes, 401)?,
    );
    params.rho = s.f64_opt("rho", args.rho)?;
    params.box_factor = s.f64_opt("box-factor", args.box_factor)?;
    params.dt = s.f64_opt("dt", args.dt)?;
    params.t_end = s.f64_opt("t-end", args.t_end)?;
    let (name, parts) = resolve_profile(&mut s, args.profile, Some("sinusoid"))?;
    let profile = parts.build(&name, params.dim)?;
    let effective = s.finish()?;
    let config = match FlowConfig::new(params) {
        Ok(config) => config,
        Err(e @ FlowError::Unstable { .. }) => return Ok(Outcome::new("flow", effective).failed("instability", e)),
        Err(e) => return Err(CliError::usage(e)),
    };
    let w0 = sample(&profile, config.spec())?;
    let mut out = Outcome::new("flow", effective);
    let log = match run_flow(&config, w0) {
        Ok(log) => log,
        Err(e @ FlowError::Unstable { .. }) => return Ok(out.failed("instability", e)),
        Err(e) => return Ok(out.failed("flow", e)),
    };
    let mut c = Conditions::default();
    c.at_least("min clearance", log.min_clearance(), 0.0);
    c.holds("clear at every step", log.barriers_clear());
    out.check(c.finish("barriers", "rescaled graphical flow stays between shrinking spheres"));
    let last = log.rows.last().expect("initial row");
    out.result = json!({
        "steps": log.rows.len() - 1,
        "dt": config.t_end() / (log.rows.len() - 1).max(1) as f64,
        "t_end": config.t_end(),
        "rho": config.rho(),
        "half_width": config.spec().half_width(),
        "min_clearance": log.min_clearance(),
        "final_sup_w": last.sup_w,
        "final_max_grad": last.max_grad,
        "final_max_a2": last.max_a2,
    });
    let mut buf = Vec::new();
    log.write_csv(&mut buf).expect("writing to memory");
    out.file("flowlog.csv", buf);
    out.file("field.csv", csv_bytes(&log.final_state.w));
    Ok(out)
}

fn stability(args: StabilityArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let (spec, profile) = resolve_graph(&mut s, args.grid, args.profile, Some("sphere_cap"), (2, 1.2, 81))?;
    let kind = s.string_or("cutoff", args.cutoff, "bump")?;
    let center = s.list_opt("center", args.center)?;
    let inner = s.f64_or("inner", args.inner, 0.3)?;
    let outer = s.f64_or("outer", args.outer, 0.8)?;
    let radius = s.f64_opt("radius", args.radius)?;
    let energy_radii = s.list_opt("energy-radii", args.energy_radii)?;
    let cutoff: Box<dyn Cutoff> = match kind.as_str() {
        "bump" => {
            let center = center.unwrap_or_else(|| vec![0.0; spec.dim()]);
            if center.len() != spec.dim() {
                return Err(CliError::Usage("bump center must have one entry per dimension".into()));
            }
            Box::new(Bump::new(center, inner, outer).map_err(CliError::usage)?)
        }
        "radial" => {
            let radius = radius.ok_or_else(|| CliError::Usage("radial cutoff needs `radius`".into()))?;
            Box::new(RadialCutoff { radius })
        }
        other => return Err(CliError::Usage(format!("unknown cutoff `{other}`"))),
    };
    let family = energy_radii.map(CutoffFamily::new).transpose().map_err(CliError::usage)?;
    let u = sample(&profile, &spec)?;
    let mut out = Outcome::new("stability", s.finish()?);
    let ctx = GraphContext::new(u);
    let report = match stability_sides(&ctx, cutoff.as_ref()) {
        Ok(r) => r,
        Err(e) => return Ok(out.failed("weighted", e)),
    };
    out.check(Check {
        name: "stability".into(),
        pass: report.pass,
        margin: report.margin,
        citation: "weighted stability inequality for graphical shrinkers".into(),
        detail: format!("lhs {:.6e}; rhs {:.6e}", report.lhs, report.rhs),
    });
    let mut result = json!({ "stability": json!(report) });
    if let Some(family) = family {
        let energies = match cutoff_energy(&ctx, &family) {
            Ok(e) => e,
            Err(e) => return Ok(out.failed("weighted", e)),
        };
        let mut c = Conditions::default();
        for e in &energies {
            c.at_most(&format!("R={}", e.radius), e.energy, e.crude_bound);
        }
        out.check(c.finish("energy_bound", "Gaussian energy of radial cutoffs"));
        result["energies"] = json!(&energies);
    }
    out.result = result;
    Ok(out)
}

fn volume(args: VolumeArgs, mut s: Settings) -> Result<Outcome, CliError> {
    let (spec, profile) = resolve_graph(&mut s, args.grid, args.profile, Some("plane"), (2, 5.0, 201))?;
    let radii = s.list_or("radii", args.radii, &[1.5, 2.0, 4.0])?;
    let u = sample(&profile, &spec)?;
    let mut out = Outcome::new("volume", s.finish()?);
    let ctx = GraphContext::new(u);
    let mut volumes = Vec::new();
    let mut c = Conditions::default();
    for &r in &radii {
        match volume_check(&ctx, r) {
            Ok(report) => {
                c.at_most(&format!("R={r}"), report.volume, report.bound);
                volumes.push(report);
            }
            Err(e) => return Ok(out.failed("weighted", e)),
        }
    }
    out.check(c.finish("volume_growth", "polynomial volume growth"));
    let heights = match height_growth_check(&ctx, &radii) {
        Ok(h) => h,
        Err(e) => return Ok(out.failed("weighted", e)),
    };
    let mut c = Conditions::default();
    for h in &heights {
        c.at_most(&format!("R={}", h.scale), h.lhs, h.rhs);
    }
    out.check(c.finish("height_growth", "linear height growth"));
    out.result = json!({ "volume": json!(&volumes), "height": json!(&heights) });
    Ok(out)
}

fn verify_all(s: Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("verify-all", s.finish()?);
    out.summary = verify::run_all();
    out.result = json!({ "checks_run": out.summary.checks.len() });
    Ok(out)
}
