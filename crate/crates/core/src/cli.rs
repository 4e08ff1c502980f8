//! Command-line front end: benchmark runs, CSV tables, SVG plots and VTK output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    inf_sup_test, patch_rank_test, run_beam, run_cook, solve_beam, solve_cook, unit_square_sequence, BeamBoundary,
    BeamConfig, BeamParams, ConvergenceReport, CookConfig, Discretization, InfSupReport, PatchRankReport, TipPoint,
};
use crate::error::FemError;
use crate::fespace::{DofMap, Enrichment};
use crate::mesh::{Mesh, VtkField};
use crate::solve::SolveOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "DUALPRESS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dualpress", version, about = "Mixed FEM with dual-mesh pressure: benchmarks and stability tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bending beam convergence study against the exact solution.
    Beam(BeamArgs),
    /// Cook's membrane tip displacement study.
    Cook(CookArgs),
    /// Numerical inf-sup constant on uniform unit-square meshes.
    Infsup(InfSupArgs),
    /// Rank of the divergence matrix on a single vertex patch.
    Patch(PatchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mixed,
    Standard,
    Both,
}

impl ModeArg {
    fn discretizations(self) -> Vec<Discretization> {
        match self {
            ModeArg::Mixed => vec![Discretization::Mixed],
            ModeArg::Standard => vec![Discretization::Standard],
            ModeArg::Both => vec![Discretization::Mixed, Discretization::Standard],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TipArg {
    Corner,
    Midedge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    Dirichlet,
    Clamped,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG plot destination.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BeamArgs {
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.4999, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long = "E", default_value_t = 1500.0, allow_negative_numbers = true)]
    pub young: f64,
    /// Couple magnitude `f`.
    #[arg(long, default_value_t = 3000.0, allow_negative_numbers = true)]
    pub load: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Mixed)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = BcArg::Dirichlet)]
    pub bc: BcArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
    /// VTK file with the finest-level solution.
    #[arg(long)]
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CookArgs {
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.49999, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long = "E", default_value_t = 250.0, allow_negative_numbers = true)]
    pub young: f64,
    /// Total shear force on the right edge.
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    pub load: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Mixed)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = TipArg::Corner)]
    pub tip: TipArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
    #[arg(long)]
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InfSupArgs {
    /// Meshes with h = 1/4, 1/8, ...
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct PatchArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Assertion(String),
    Solver(FemError),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Assertion(_) => EXIT_ASSERTION,
            CliError::Solver(_) | CliError::Io(_) => EXIT_SOLVER,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn check_levels(levels: usize, max: usize) -> CliResult<()> {
    if !(2..=max).contains(&levels) {
        return Err(CliError::Usage(format!("--levels must be between 2 and {max}, got {levels}")));
    }
    Ok(())
}

fn check_material(nu: f64, young: f64) -> CliResult<()> {
    if !(0.0..0.5).contains(&nu) {
        return Err(CliError::Usage(format!("--nu must lie in [0, 0.5), got {nu}")));
    }
    if !(young > 0.0 && young.is_finite()) {
        return Err(CliError::Usage(format!("--E must be positive, got {young}")));
    }
    Ok(())
}

fn check_tol(tol: f64) -> CliResult<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn check_load(load: f64) -> CliResult<()> {
    if !load.is_finite() {
        return Err(CliError::Usage(format!("--load must be finite, got {load}")));
    }
    Ok(())
}

fn suffix(name: &str, tag: Option<&str>) -> String {
    match tag {
        Some(t) => format!("{name}_{t}"),
        None => name.to_string(),
    }
}

fn mode_tag(d: Discretization) -> &'static str {
    match d {
        Discretization::Mixed => "mixed",
        Discretization::Standard => "standard",
    }
}

/// Beam table `level,n_elems,h,err_u_L2,err_u_H1,err_p_L2,rate_u_L2,rate_u_H1,rate_p_L2`.
/// With several runs the error and rate columns repeat with a `_mixed` /
/// `_standard` suffix.
pub fn beam_csv(runs: &[(Discretization, ConvergenceReport)]) -> String {
    let tagged = runs.len() > 1;
    let mut s = String::from("level,n_elems,h");
    for (d, _) in runs {
        let t = tagged.then(|| mode_tag(*d));
        for c in ["err_u_L2", "err_u_H1", "err_p_L2", "rate_u_L2", "rate_u_H1", "rate_p_L2"] {
            s.push(',');
            s.push_str(&suffix(c, t));
        }
    }
    s.push('\n');
    let Some((_, first)) = runs.first() else {
        return s;
    };
    let rates: Vec<_> = runs
        .iter()
        .map(|(_, r)| (r.rates_u_l2(), r.rates_u_h1(), r.rates_p_l2()))
        .collect();
    for (k, lvl) in first.levels.iter().enumerate() {
        let _ = write!(s, "{},{},{}", lvl.level, lvl.n_elems, fmt_num(lvl.h));
        for ((_, rep), (rl2, rh1, rp)) in runs.iter().zip(&rates) {
            let e = rep.levels[k].errors;
            let _ = write!(
                s,
                ",{},{},{},{},{},{}",
                fmt_opt(e.map(|e| e.u_l2)),
                fmt_opt(e.map(|e| e.u_h1)),
                fmt_opt(e.map(|e| e.p_l2)),
                fmt_opt(rl2[k]),
                fmt_opt(rh1[k]),
                fmt_opt(rp[k]),
            );
        }
        s.push('\n');
    }
    s
}

/// Cook table `level,n,n_elems,h,tip_<mode>...`.
pub fn cook_csv(runs: &[(Discretization, ConvergenceReport)]) -> String {
    let mut s = String::from("level,n,n_elems,h");
    for (d, _) in runs {
        let _ = write!(s, ",tip_{}", mode_tag(*d));
    }
    s.push('\n');
    let Some((_, first)) = runs.first() else {
        return s;
    };
    for (k, lvl) in first.levels.iter().enumerate() {
        let _ = write!(s, "{},{},{},{}", lvl.level, lvl.n, lvl.n_elems, fmt_num(lvl.h));
        for (_, rep) in runs {
            let _ = write!(s, ",{}", fmt_opt(rep.levels[k].tip));
        }
        s.push('\n');
    }
    s
}

pub fn infsup_csv(report: &InfSupReport) -> String {
    let mut s = String::from("level,h,beta_h\n");
    for (k, l) in report.levels.iter().enumerate() {
        let _ = writeln!(s, "{k},{},{}", fmt_num(l.h), fmt_num(l.beta));
    }
    s
}

pub fn patch_lines(reports: &[(&str, PatchRankReport)]) -> String {
    let mut s = String::new();
    if let Some((_, r)) = reports.first() {
        let _ = writeln!(s, "dim={}", r.dim);
        let _ = writeln!(s, "pressures={}", r.n_pressure);
    }
    for (name, r) in reports {
        let _ = writeln!(s, "{name}_velocities={}", r.n_velocity);
        let _ = writeln!(s, "{name}_rank={}", r.rank);
        let _ = writeln!(s, "{name}_kernel={}", r.kernel_dim);
        let _ = writeln!(s, "{name}_constants_in_kernel={}", r.constants_in_kernel);
        let smin = r.singular_values.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        let _ = writeln!(s, "{name}_sigma_max={}", fmt_num(r.singular_values.first().copied().unwrap_or(0.0)));
        let _ = writeln!(s, "{name}_sigma_min_nonzero={}", fmt_num(smin));
    }
    s
}

/// One curve of a plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal SVG line plot; logarithmic axes where requested.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let (w, h) = (640.0, 440.0);
    let (l, r, t, b) = (80.0, 160.0, 40.0, 60.0);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
        .map(|&(x, y)| (tx(x), ty(y)))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, (w - r + l) / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - l - r,
        h - t - b
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xl = if log_x { 10f64.powf(xv) } else { xv };
        let yl = if log_y { 10f64.powf(yv) } else { yv };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), h - b + 18.0, tick(xl));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, py(yv) + 4.0, tick(yl));
        let _ = writeln!(
            s,
            r##"<line x1="{l}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##,
            w - r,
            y = py(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (w - r + l) / 2.0, h - 16.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (h - b + t) / 2.0,
        escape(ylabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(tx(x)), py(ty(y))))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for p in &path {
            let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = t + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - r + 10.0,
            w - r + 30.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - r + 36.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_vtk(path: &Path, mesh: &Mesh, dofmap: &DofMap, u: &[f64], p: &[f64]) -> CliResult<()> {
    let dim = mesh.dim();
    let mut disp = Vec::with_capacity(dim * mesh.n_vertices());
    for v in 0..mesh.n_vertices() {
        for a in 0..dim {
            disp.push(u[dofmap.vertex_dof(v, a)]);
        }
    }
    let mut fields = vec![("displacement", VtkField::Vector { dim, data: &disp })];
    if !p.is_empty() {
        fields.push(("pressure", VtkField::Scalar(p)));
    }
    let mut w = BufWriter::new(File::create(path)?);
    mesh.write_vtk(&mut w, &fields, &[])?;
    w.flush()?;
    Ok(())
}

pub fn cmd_beam(args: &BeamArgs) -> CliResult<()> {
    check_levels(args.levels, 7)?;
    check_material(args.nu, args.young)?;
    check_tol(args.tol)?;
    check_load(args.load)?;
    let base = BeamConfig {
        params: BeamParams {
            young: args.young,
            poisson: args.nu,
            load: args.load,
            ..BeamParams::default()
        },
        levels: args.levels,
        boundary: match args.bc {
            BcArg::Dirichlet => BeamBoundary::Dirichlet,
            BcArg::Clamped => BeamBoundary::Clamped,
        },
        solve: SolveOptions {
            tol: args.tol,
            ..SolveOptions::default()
        },
        ..BeamConfig::default()
    };
    let mut runs = Vec::new();
    for d in args.mode.discretizations() {
        let cfg = BeamConfig {
            discretization: d,
            ..base
        };
        runs.push((d, run_beam(&cfg)?));
    }
    emit(args.output.out.as_deref(), &beam_csv(&runs))?;
    if let Some(path) = &args.output.plot {
        let mut series = Vec::new();
        for (d, rep) in &runs {
            for (name, f) in [
                ("u L2", (|e: &crate::analysis::ErrorNorms| e.u_l2) as fn(&crate::analysis::ErrorNorms) -> f64),
                ("u H1", |e| e.u_h1),
            ] {
                series.push(Series {
                    label: format!("{} {name}", mode_tag(*d)),
                    points: rep
                        .levels
                        .iter()
                        .filter_map(|l| l.errors.map(|e| (l.n_elems as f64, f(&e))))
                        .collect(),
                });
            }
        }
        std::fs::write(path, svg_plot("Rectangular beam", "number of elements", "error", &series, true, true))?;
    }
    if let Some(path) = &args.vtk {
        let cfg = BeamConfig {
            discretization: runs[0].0,
            ..base
        };
        let run = solve_beam(&cfg, args.levels - 1)?;
        write_vtk(path, &run.mesh, &run.dofmap, &run.solution.u, &run.solution.p)?;
    }
    Ok(())
}

pub fn cmd_cook(args: &CookArgs) -> CliResult<()> {
    check_levels(args.levels, 8)?;
    check_material(args.nu, args.young)?;
    check_tol(args.tol)?;
    check_load(args.load)?;
    let base = CookConfig {
        young: args.young,
        poisson: args.nu,
        load: args.load,
        levels: args.levels,
        tip: match args.tip {
            TipArg::Corner => TipPoint::Corner,
            TipArg::Midedge => TipPoint::MidEdge,
        },
        solve: SolveOptions {
            tol: args.tol,
            ..SolveOptions::default()
        },
        ..CookConfig::default()
    };
    let mut runs = Vec::new();
    for d in args.mode.discretizations() {
        let cfg = CookConfig {
            discretization: d,
            ..base
        };
        runs.push((d, run_cook(&cfg)?));
    }
    emit(args.output.out.as_deref(), &cook_csv(&runs))?;
    if let Some(path) = &args.output.plot {
        let series: Vec<Series> = runs
            .iter()
            .map(|(d, rep)| Series {
                label: mode_tag(*d).to_string(),
                points: rep.levels.iter().filter_map(|l| l.tip.map(|t| (l.n as f64, t))).collect(),
            })
            .collect();
        std::fs::write(
            path,
            svg_plot("Cook's membrane", "elements per edge", "vertical tip displacement", &series, true, false),
        )?;
    }
    if let Some(path) = &args.vtk {
        let cfg = CookConfig {
            discretization: runs[0].0,
            ..base
        };
        let (mesh, dofmap, sol) = solve_cook(&cfg, 2 << (args.levels - 1))?;
        write_vtk(path, &mesh, &dofmap, &sol.u, &sol.p)?;
    }
    Ok(())
}

/// Bounds asserted by `infsup`: `0 < β_h ≤ √2`, and `min β_h ≥ 0.75 max β_h`
/// over the last three levels.
pub fn check_infsup(report: &InfSupReport) -> std::result::Result<(), String> {
    for (k, l) in report.levels.iter().enumerate() {
        if l.spurious_modes {
            return Err(format!("level {k}: {} zero modes (spurious pressures)", l.zero_modes));
        }
        if !(l.beta > 0.0 && l.beta <= 2f64.sqrt()) {
            return Err(format!("level {k}: beta_h = {} outside (0, sqrt 2]", l.beta));
        }
    }
    let n = report.levels.len();
    if n >= 3 {
        let tail = &report.levels[n - 3..];
        let min = tail.iter().map(|l| l.beta).fold(f64::INFINITY, f64::min);
        let max = tail.iter().map(|l| l.beta).fold(0.0, f64::max);
        if min < 0.75 * max {
            return Err(format!("beta_h not uniform: min {min} < 0.75 * max {max}"));
        }
    }
    Ok(())
}

pub fn cmd_infsup(args: &InfSupArgs) -> CliResult<()> {
    if !(1..=5).contains(&args.levels) {
        return Err(CliError::Usage(format!("--levels must be between 1 and 5, got {}", args.levels)));
    }
    let meshes = unit_square_sequence(args.levels)?;
    let report = inf_sup_test(&meshes)?;
    emit(args.output.out.as_deref(), &infsup_csv(&report))?;
    if let Some(path) = &args.output.plot {
        let series = [Series {
            label: "beta_h".into(),
            points: report.levels.iter().map(|l| (l.h, l.beta)).collect(),
        }];
        std::fs::write(path, svg_plot("Discrete inf-sup constant", "h", "beta_h", &series, true, false))?;
    }
    check_infsup(&report).map_err(CliError::Assertion)
}

pub fn cmd_patch(args: &PatchArgs) -> CliResult<()> {
    if !(2..=3).contains(&args.dim) {
        return Err(CliError::Usage(format!("--dim must be 2 or 3, got {}", args.dim)));
    }
    let grad = patch_rank_test(args.dim, Enrichment::GradientWeighted)?;
    let plain = patch_rank_test(args.dim, Enrichment::PlainBubble)?;
    let text = patch_lines(&[("gradient", grad.clone()), ("plain", plain.clone())]);
    emit(args.out.as_deref(), &text)?;
    if args.out.is_some() {
        print!("{text}");
    }
    if grad.kernel_dim != 1 || !grad.constants_in_kernel {
        return Err(CliError::Assertion(format!(
            "gradient-weighted kernel dimension {} (rank {}), expected constants only",
            grad.kernel_dim, grad.rank
        )));
    }
    if plain.rank >= grad.rank {
        return Err(CliError::Assertion(format!(
            "plain bubble rank {} does not drop below {}",
            plain.rank, grad.rank
        )));
    }
    Ok(())
}

/// Parse `DUALPRESS_THREADS`; `None` when unset.
pub fn thread_cap(value: Option<&str>) -> CliResult<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Beam(a) => cmd_beam(a),
        Command::Cook(a) => cmd_cook(a),
        Command::Infsup(a) => cmd_infsup(a),
        Command::Patch(a) => cmd_patch(a),
    }
}

/// Full program: parse arguments, configure threads, run, map errors to exit codes.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let env = std::env::var(THREADS_ENV).ok();
    match thread_cap(env.as_deref()) {
        Ok(Some(n)) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    }
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
