//! Command-line front end: `solve`, `derive`, `validate` and `sweep`, each
//! driven by a TOML [`RunConfig`] and writing CSV (17 significant digits)
//! plus a legacy VTK field file.
//!
//! Exit codes: 0 ok, 1 a validation check failed, 2 configuration or I/O
//! error, 3 unsupported combination of integrand, boundary data and field,
//! 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::{Deformation, Route, RunConfig};
use crate::error::{Error, Result};
use crate::mesh::{write_vtk, BoundaryTag, DeformationField, PointField};
use crate::shape::{field_c_at, CVariant, DerivativeReport, PointData, ShapeContext};
use crate::solver::{optimality_diagnostics, solve_state_with, StateSolution};
use crate::validation::{
    gamma_limit_check, log_log_slope, null_scale, report_for_state, FdSweep, ReportOptions, SpecialRoute,
};

#[derive(Parser, Debug)]
#[command(name = "shapehess", version, about = "Shape functionals and their first and second shape derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the finite-difference sweep.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the randomised checks of `validate`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve the state problem; writes state.csv, summary.csv, fields.vtk.
    Solve,
    /// All derivative routes; writes derivatives.csv and fields.vtk.
    Derive,
    /// Finite differences and invariant checks; writes fd_sweep.csv and
    /// invariants.csv and exits 1 if a check fails.
    Validate,
    /// `derive` on meshes h, h/2, …; writes convergence.csv.
    Sweep {
        /// Number of meshes; overrides `sweep.levels`.
        #[arg(long)]
        levels: Option<usize>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidParameter(_) | Error::InvalidMesh(_) | Error::MeshParse { .. } | Error::Io(_) => 2,
        Error::UnsupportedCombination(_)
        | Error::WrongPair { .. }
        | Error::NonNormalV(_)
        | Error::SupportViolation(_)
        | Error::ConjugateUnavailable => 3,
        Error::InvertedElement { .. }
        | Error::SolverBreakdown(_)
        | Error::NoConvergence { .. }
        | Error::DegenerateForm(_) => 4,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr as `error CODE: message`.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(failed_checks) => i32::from(failed_checks),
        Err(e) => {
            eprintln!("error {}: {e}", e.code());
            exit_code(&e)
        }
    }
}

/// Runs a parsed command; `Ok(true)` means a validation check failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config { key: "--config".into(), msg: "required".into() })?;
    let cfg = RunConfig::load(path)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config { key: "--threads".into(), msg: "must be at least 1".into() });
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out)?;
    match cli.command {
        Command::Solve => cmd_solve(&cfg, &out).map(|_| false),
        Command::Derive => cmd_derive(&cfg, &out).map(|_| false),
        Command::Validate => cmd_validate(&cfg, &out, cli.seed),
        Command::Sweep { levels } => cmd_sweep(&cfg, &out, levels.unwrap_or(cfg.sweep.levels)).map(|_| false),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<StateSolution<f64>> {
    let mesh = cfg.build_mesh()?;
    let pair = cfg.build_pair()?;
    solve_state_with(mesh, &pair, &cfg.solver_options())
}

/// Vertex fields for VTK: u, |∇u|, σ and, when `c_normal` is given, the
/// boundary normal trace of `C_D` / `C_N` (zero inside).
fn write_fields(state: &StateSolution<f64>, path: &Path, c_normal: Option<&[f64]>) -> Result<()> {
    let mesh = &state.mesh;
    let nv = mesh.n_vertices();
    let mut u = vec![0.0; nv];
    let mut grad = vec![0.0; nv];
    let mut sigma = vec![[0.0; 2]; nv];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for (k, &i) in tri.iter().enumerate() {
            let mut bary = [0.0; 3];
            bary[k] = 1.0;
            u[i] = state.value(t, bary);
            grad[i] = state.recovered_gradient(t, bary).norm();
            let s = state.sigma(t, bary);
            sigma[i] = [s.x, s.y];
        }
    }
    let mut fields = vec![PointField::Scalar("u", &u), PointField::Scalar("grad_u_norm", &grad), PointField::Vector("sigma", &sigma)];
    if let Some(c) = c_normal {
        fields.push(PointField::Scalar("C_normal", c));
    }
    fs::write(path, write_vtk(mesh.as_ref(), "shapehess fields", &fields))?;
    Ok(())
}

fn boundary_c_normal(ctx: &ShapeContext<'_, f64>, v: &DeformationField<f64>) -> Vec<f64> {
    let state = ctx.state;
    let mut c = vec![0.0; state.mesh.n_vertices()];
    for (k, e) in state.mesh.boundary().iter().enumerate() {
        let p = ctx.jets.evaluate(state, k, 0.0, 0.0);
        let variant = match e.tag {
            BoundaryTag::Dirichlet => CVariant::Dirichlet,
            BoundaryTag::Neumann => CVariant::Neumann,
        };
        let data = PointData { x: p.x, u: p.u, grad: p.grad_u, hess: p.hess_u };
        c[e.a] = field_c_at(&state.pair, &data, v, variant).dot(p.normal);
    }
    c
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<()> {
    let state = solve(cfg)?;
    let mesh = &state.mesh;
    let rows: Vec<Vec<String>> = (0..state.dofs.n_dofs)
        .map(|i| {
            let x = mesh.p2_node(i);
            let bc = if state.dofs.is_dirichlet(i) {
                "D"
            } else if state.dofs.is_on_boundary(i) {
                "N"
            } else {
                ""
            };
            vec![i.to_string(), num(x.x), num(x.y), num(state.u.values[i]), bc.to_string()]
        })
        .collect();
    write_csv(&out.join("state.csv"), &["dof", "x", "y", "u", "bc"], &rows)?;

    let d = optimality_diagnostics(&state)?;
    let rows = vec![
        vec!["J_value".into(), num(state.j_value)],
        vec!["el_residual".into(), num(d.el_residual)],
        vec!["duality_gap".into(), opt(d.duality_gap)],
        vec!["dual_feasibility".into(), opt(d.dual_feasibility)],
        vec!["neumann_flux".into(), num(d.neumann_flux)],
        vec!["newton_iterations".into(), state.report.iterations.to_string()],
        vec!["n_dofs".into(), state.dofs.n_dofs.to_string()],
        vec!["n_triangles".into(), mesh.n_triangles().to_string()],
        vec!["h".into(), num(mesh.max_edge_length())],
    ];
    write_csv(&out.join("summary.csv"), &["quantity", "value"], &rows)?;
    if cfg.output.vtk {
        write_fields(&state, &out.join("fields.vtk"), None)?;
    }
    Ok(())
}

fn report_options(cfg: &RunConfig, state: &StateSolution<f64>, with_fd: bool) -> ReportOptions<f64> {
    let has_special = state.pair.is_torsion_class() || state.pair.p_exponent().is_some();
    ReportOptions {
        solver: cfg.solver_options(),
        eps_list: with_fd.then(|| cfg.routes.eps_list.clone()),
        special: if cfg.routes.has(Route::Special) && has_special { SpecialRoute::Required } else { SpecialRoute::Skip },
    }
}

fn derive_rows(cfg: &RunConfig, r: &DerivativeReport, sweep: Option<&FdSweep<f64>>) -> Vec<Vec<String>> {
    let notes = |prefix: &str| r.notes.iter().filter(|n| n.starts_with(prefix)).cloned().collect::<Vec<_>>().join("; ");
    let row = |route: &str, order: u8, value: Option<f64>, residual: Option<f64>, note: String| {
        vec![route.to_string(), order.to_string(), opt(value), opt(residual), num(r.h), note]
    };
    let mut rows = vec![row("J_value", 0, Some(r.j_value), None, String::new())];
    let routes = &cfg.routes;
    if routes.has(Route::Volume) {
        rows.push(row("J1_volume", 1, Some(r.j1_volume), Some(r.div_a_residual), "residual: div A".into()));
    }
    if routes.has(Route::Boundary) {
        let res = r.j1_boundary.map(|b| (b - r.j1_volume).abs());
        let mut note = notes("J1_boundary");
        if note.is_empty() {
            note = "residual: |J1_volume - J1_boundary|".into();
        }
        rows.push(row("J1_boundary", 1, r.j1_boundary, res, note));
    }
    if routes.has(Route::Volume) {
        rows.push(row("J2_volume", 2, Some(r.j2_volume), Some(r.div_b_residual), "residual: div B".into()));
    }
    if routes.has(Route::Boundary) {
        rows.push(row("J2_boundary", 2, Some(r.j2_boundary), Some(r.route_disagreement), "residual: |J2_volume - J2_boundary|".into()));
    }
    if routes.has(Route::Special) {
        match (&r.special_route, r.j2_special) {
            (Some(name), Some(x)) => rows.push(row(
                &format!("J2_{name}"),
                2,
                Some(x),
                Some((x - r.j2_volume).abs()),
                format!("residual: |J2_volume - J2_{name}|"),
            )),
            _ => rows.push(row("J2_special", 2, None, None, format!("not available for {}", cfg.build_pair().map(|p| p.name()).unwrap_or("?")))),
        }
    }
    if let Some(s) = sweep {
        let n = format!("Richardson over {} steps; residual: extrapolation error", s.eps_list.len());
        rows.push(row("fd_first", 1, Some(s.first.value), Some(s.first.error), n.clone()));
        rows.push(row("fd_second", 2, Some(s.second.value), Some(s.second.error), n));
    }
    rows
}

const DERIVE_HEADER: [&str; 6] = ["route", "order", "value", "residual", "h", "notes"];

pub fn cmd_derive(cfg: &RunConfig, out: &Path) -> Result<()> {
    let state = solve(cfg)?;
    let v = cfg.build_field();
    let (report, sweep) = report_for_state(&state, &v, &report_options(cfg, &state, cfg.routes.has(Route::Fd)))?;
    write_csv(&out.join("derivatives.csv"), &DERIVE_HEADER, &derive_rows(cfg, &report, sweep.as_ref()))?;
    if cfg.output.vtk {
        let ctx = ShapeContext::new(&state)?;
        write_fields(&state, &out.join("fields.vtk"), Some(&boundary_c_normal(&ctx, &v)))?;
    }
    Ok(())
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
    /// `true`: pass iff value ≥ threshold.
    at_least: bool,
}

impl Check {
    fn max(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, at_least: false }
    }

    fn min(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, at_least: true }
    }

    fn pass(&self) -> bool {
        if self.at_least {
            self.value >= self.threshold
        } else {
            self.value <= self.threshold
        }
    }
}

pub const DIV_RESIDUAL_MAX: f64 = 1e-2;
pub const NEUMANN_FLUX_MAX: f64 = 1e-2;
pub const DUALITY_GAP_MAX: f64 = 1e-3;
pub const J1_AGREEMENT_MAX: f64 = 1e-2;
pub const J2_AGREEMENT_MAX: f64 = 2e-2;
pub const FD_AGREEMENT_MAX: f64 = 1e-2;
pub const RESIDUAL_SLOPE_MIN: f64 = 0.8;
pub const FLUX_SLOPE_MIN: f64 = 1.0;
pub const GAMMA_SLOPE_MIN: f64 = 0.9;
pub const NULL_FACTOR: f64 = 1e-6;
pub const HOMOGENEITY_MAX: f64 = 1e-8;

/// Relative difference with the denominator floored at `floor`.
fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor).max(f64::MIN_POSITIVE)
}

pub fn cmd_validate(cfg: &RunConfig, out: &Path, seed: u64) -> Result<bool> {
    let state = solve(cfg)?;
    let v = cfg.build_field();
    let (report, sweep) = report_for_state(&state, &v, &report_options(cfg, &state, true))?;
    let sweep = sweep.expect("validate always runs the finite-difference sweep");
    let diag = optimality_diagnostics(&state)?;
    let has_neumann = state.mesh.boundary().iter().any(|e| e.tag == BoundaryTag::Neumann);
    let null_direction = matches!(cfg.deformation, Deformation::Zero | Deformation::Translation { .. })
        || v.support().is_some();
    let floor = NULL_FACTOR * null_scale(&state, &v);

    let mut checks = vec![
        Check::max("el_residual", diag.el_residual, cfg.solver.tol),
        Check::max("div_a_residual", report.div_a_residual, DIV_RESIDUAL_MAX),
        Check::max("div_b_residual", report.div_b_residual, DIV_RESIDUAL_MAX),
    ];
    if has_neumann {
        checks.push(Check::max("neumann_flux", diag.neumann_flux, NEUMANN_FLUX_MAX));
    }
    if let Some(gap) = diag.duality_gap {
        checks.push(Check::max("duality_gap_relative", rel(gap, 0.0, state.j_value.abs()), DUALITY_GAP_MAX));
    }
    if let Some(h) = cfg.h() {
        // residual decay on the halved mesh
        let fine_cfg = cfg.with_h(h / 2.0);
        let fine = solve(&fine_cfg)?;
        let hs = [state.mesh.max_edge_length(), fine.mesh.max_edge_length()];
        let slope = |a: f64, b: f64| log_log_slope(&hs, &[a, b]).unwrap_or(f64::NAN);
        let fine_a = crate::shape::check_div_a(&fine)?;
        let fine_b = crate::shape::check_div_b(&fine, &v)?;
        if report.div_a_residual > 0.0 {
            checks.push(Check::min("div_a_slope", slope(report.div_a_residual, fine_a), RESIDUAL_SLOPE_MIN));
        }
        if report.div_b_residual > 0.0 {
            checks.push(Check::min("div_b_slope", slope(report.div_b_residual, fine_b), RESIDUAL_SLOPE_MIN));
        }
        if has_neumann {
            let fine_flux = optimality_diagnostics(&fine)?.neumann_flux;
            checks.push(Check::min("neumann_flux_slope", slope(diag.neumann_flux, fine_flux), FLUX_SLOPE_MIN));
        }
    }
    if null_direction {
        checks.push(Check::max("null_J1_volume", report.j1_volume.abs(), floor));
        checks.push(Check::max("null_J2_volume", report.j2_volume.abs(), floor));
    }
    if let Some(b) = report.j1_boundary {
        checks.push(Check::max("J1_route_disagreement", rel(b, report.j1_volume, floor), J1_AGREEMENT_MAX));
    }
    checks.push(Check::max("J2_route_disagreement", rel(report.j2_boundary, report.j2_volume, floor), J2_AGREEMENT_MAX));
    if let (Some(name), Some(x)) = (&report.special_route, report.j2_special) {
        checks.push(Check::max(format!("J2_{name}_disagreement"), rel(x, report.j2_volume, floor), J2_AGREEMENT_MAX));
    }
    checks.push(Check::max("fd_first_vs_J1_volume", rel(sweep.first.value, report.j1_volume, floor), FD_AGREEMENT_MAX));
    checks.push(Check::max("fd_second_vs_J2_volume", rel(sweep.second.value, report.j2_volume, floor), FD_AGREEMENT_MAX));

    let ctx = ShapeContext::new(&state)?;
    for t in [-1.0, 2.0, 5.0] {
        let tv = v.scaled(t);
        let scale = NULL_FACTOR * floor;
        checks.push(Check::max(
            format!("J1_homogeneity_t={t}"),
            rel(ctx.first_derivative_volume(&tv)?, t * report.j1_volume, scale),
            HOMOGENEITY_MAX,
        ));
        checks.push(Check::max(
            format!("J2_homogeneity_t={t}"),
            rel(ctx.second_derivative_volume(&tv)?, t * t * report.j2_volume, scale),
            HOMOGENEITY_MAX,
        ));
    }

    // the volume minimiser against seeded random competitors
    let problem = ctx.volume_problem(&v)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let amplitude = problem.minimizer.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0) * 1e-2;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let w: Vec<f64> = problem
            .minimizer
            .iter()
            .enumerate()
            .map(|(i, &m)| if state.dofs.is_dirichlet(i) { 0.0 } else { m + amplitude * rng.random_range(-1.0..1.0) })
            .collect();
        worst = worst.max(problem.min_value - ctx.e_value(&problem, &w));
    }
    checks.push(Check::max("volume_minimizer_excess", worst, 1e-10 * (1.0 + problem.min_value.abs())));

    if v.support().is_some() {
        let eps = &cfg.routes.eps_list;
        let dist = gamma_limit_check(&state, &v, eps)?;
        for (k, (&e, &d)) in eps.iter().zip(&dist).enumerate() {
            let threshold = if k == 0 { f64::INFINITY } else { dist[k - 1] };
            checks.push(Check::max(format!("gamma_check_eps={e}"), d, threshold));
        }
        checks.push(Check::min("gamma_check_slope", log_log_slope(eps, &dist).unwrap_or(f64::NAN), GAMMA_SLOPE_MIN));
    }

    write_fd_sweep(&out.join("fd_sweep.csv"), &sweep)?;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), num(c.value), num(c.threshold), c.pass().to_string()])
        .collect();
    write_csv(&out.join("invariants.csv"), &["check_name", "value", "threshold", "pass"], &rows)?;
    Ok(checks.iter().any(|c| !c.pass()))
}

fn write_fd_sweep(path: &Path, s: &FdSweep<f64>) -> Result<()> {
    let mut rows: Vec<Vec<String>> = (0..s.eps_list.len())
        .map(|k| {
            vec![
                num(s.eps_list[k]),
                num(s.j_plus[k]),
                num(s.j_minus[k]),
                num(s.r1_values[k]),
                num(s.r2_values[k]),
                num(s.r_eps_plus[k]),
                num(s.r_eps_minus[k]),
                "ok".into(),
            ]
        })
        .collect();
    for &e in &s.dropped {
        let mut r = vec![num(e)];
        r.extend(std::iter::repeat_n(String::new(), 6));
        r.push("dropped: inverted element".into());
        rows.push(r);
    }
    write_csv(path, &["eps", "J_plus", "J_minus", "r1", "r2", "r_eps_plus", "r_eps_minus", "status"], &rows)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::Config { key: "--levels".into(), msg: "must be at least 1".into() });
    }
    let Some(h0) = cfg.h() else {
        return Err(Error::UnsupportedCombination("sweep needs a generated geometry with a mesh size".into()));
    };
    let mut reports = Vec::with_capacity(levels);
    let mut h = h0;
    for _ in 0..levels {
        let level = cfg.with_h(h);
        let state = solve(&level)?;
        let v = level.build_field();
        reports.push((h, report_for_state(&state, &v, &report_options(&level, &state, level.routes.has(Route::Fd)))?.0));
        h /= 2.0;
    }
    // values converge through successive differences, residuals directly
    type Pick = fn(&DerivativeReport) -> Option<f64>;
    let quantities: [(&str, Pick, bool); 11] = [
        ("J_value", |r| Some(r.j_value), false),
        ("J1_volume", |r| Some(r.j1_volume), false),
        ("J1_boundary", |r| r.j1_boundary, false),
        ("J2_volume", |r| Some(r.j2_volume), false),
        ("J2_boundary", |r| Some(r.j2_boundary), false),
        ("J2_special", |r| r.j2_special, false),
        ("fd_second", |r| r.fd_second, false),
        ("J1_route_disagreement", |r| r.j1_boundary.map(|b| (b - r.j1_volume).abs()), true),
        ("J2_route_disagreement", |r| Some(r.route_disagreement), true),
        ("div_a_residual", |r| Some(r.div_a_residual), true),
        ("div_b_residual", |r| Some(r.div_b_residual), true),
    ];
    let mut rows = Vec::new();
    for (name, pick, residual) in quantities {
        let vals: Vec<Option<f64>> = reports.iter().map(|(_, r)| pick(r)).collect();
        if vals.iter().all(Option::is_none) {
            continue;
        }
        for (k, (h, _)) in reports.iter().enumerate() {
            let order = if residual {
                match (k.checked_sub(1).and_then(|j| vals[j]), vals[k]) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
                    _ => None,
                }
            } else if k >= 2 {
                match (vals[k - 2], vals[k - 1], vals[k]) {
                    (Some(a), Some(b), Some(c)) if a != b && b != c => Some(((a - b) / (b - c)).abs().log2()),
                    _ => None,
                }
            } else {
                None
            };
            rows.push(vec![name.to_string(), k.to_string(), num(*h), opt(vals[k]), opt(order)]);
        }
    }
    write_csv(&out.join("convergence.csv"), &["quantity", "level", "h", "value", "order"], &rows)
}
