//! Command-line front end shared by the `hstv` binary and the tests.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 for
//! numeric failures (degenerate geometry, failed audits, solver breakdown).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::approx::{self, DeltaRule, FieldChoice, Target};
use crate::cpwl::{self, CpwlFunction};
use crate::delaunay::delaunay_triangulate;
use crate::error::{Error, Result};
use crate::fit2d::{self, Exterior, FitProblem, FitSolution};
use crate::io::{fmt12, parse_extended, parse_list, parse_rational, read_csv_rows};
use crate::mesh::{self, AxisBox, Triangulation, VertexSet};
use crate::oriented_grid::{oriented_triangulation, GridParams, OrientationField};
use crate::radial::{self, RadialProfile};
use crate::schatten::PExponent;

#[derive(Parser, Debug)]
#[command(name = "hstv", about = "Hessian–Schatten total variation toolkit", version)]
struct Cli {
    /// JSON file mirroring the flags: {"command": "mesh gen", "eps": "1/64", ...}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// HTV of a radial profile: prints `total,jump_part,ac_part`.
    Radial(RadialArgs),
    /// Generate or audit meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Interpolate targets and measure CPWL variation.
    #[command(subcommand)]
    Cpwl(CpwlCommand),
    /// Density experiment: adapted interpolants over refining grids.
    Approx(ApproxArgs),
    /// HTV-regularised fit of scattered data on a planar mesh.
    Fit(FitArgs),
}

#[derive(Args, Debug)]
struct RadialArgs {
    /// Profile JSON, or `cone:D` / `bump:EPS` for the built-in profiles.
    #[arg(long)]
    profile: String,
    #[arg(long, default_value = "1")]
    p: String,
    #[arg(long, default_value = "inf")]
    r: String,
}

#[derive(Subcommand, Debug)]
enum MeshCommand {
    Gen(MeshGenArgs),
    Check(MeshCheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MeshKind {
    /// Delaunay triangulation of `εZ^d` clipped to `--box`.
    Lattice,
    /// Delaunay triangulation of the points in `--points`.
    Delaunay,
    /// Orientation-adapted grid for the field in `--field`.
    Oriented,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Preset {
    Practical,
    Conservative,
}

#[derive(Args, Debug)]
struct MeshGenArgs {
    #[arg(long, value_enum)]
    kind: MeshKind,
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    field: Option<PathBuf>,
    /// Grid scale, e.g. `1/64`.
    #[arg(long)]
    eps: Option<String>,
    /// Box corners `x0 y0 [z0] x1 y1 [z1]`.
    #[arg(long = "box", num_args = 1.., allow_negative_numbers = true)]
    bbox: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "practical")]
    preset: Preset,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the audit JSON.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeshCheckArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long = "box", num_args = 1.., allow_negative_numbers = true)]
    bbox: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CpwlCommand {
    Interp(InterpArgs),
    Htv(HtvArgs),
}

#[derive(Args, Debug)]
struct InterpArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// One of quad_iso, quad_saddle, gauss, cone, or `affine:a1,..,ad,b`.
    #[arg(long)]
    target: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HtvArgs {
    #[arg(long = "fn")]
    function: PathBuf,
    #[arg(long = "box", num_args = 1.., allow_negative_numbers = true)]
    bbox: Vec<String>,
    #[arg(long, default_value = "1")]
    p: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FieldArg {
    Adapted,
    Identity,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long)]
    target: String,
    /// Decreasing scales, e.g. `1/16,1/32,1/64`.
    #[arg(long)]
    eps: String,
    /// Ω corners; the default keeps ∂Ω off the lattice lines of (0,1)².
    #[arg(long = "box", num_args = 1.., allow_negative_numbers = true)]
    bbox: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "adapted")]
    field: FieldArg,
    /// Constant in `δ ≈ c·√ε`.
    #[arg(long, default_value_t = DeltaRule::default().c)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExteriorArg {
    Free,
    Zero,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// CSV rows `x,y,value`.
    #[arg(long)]
    points: PathBuf,
    /// Fidelity weight or `inf`.
    #[arg(long, default_value = "inf")]
    lambda: String,
    #[arg(long, default_value = "1")]
    p: String,
    #[arg(long, default_value = "1")]
    q: String,
    #[arg(long, value_enum, default_value = "free")]
    exterior: ExteriorArg,
    /// Run the λ sweep with threshold checks instead of a single solve.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the tool with process stdout/stderr and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(ParseFailure::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
        Err(ParseFailure::Config(e)) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let Some(command) = cli.command else {
        let _ = writeln!(err, "error: no subcommand given; see `hstv --help`");
        return 2;
    };
    match execute(command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Config(Error),
}

fn parse(argv: &[OsString]) -> std::result::Result<Cli, ParseFailure> {
    let cli = Cli::try_parse_from(argv).map_err(ParseFailure::Clap)?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    if cli.command.is_some() {
        return Err(ParseFailure::Config(Error::invalid("--config cannot be combined with a subcommand")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| ParseFailure::Config(e.into()))?;
    let expanded = config_to_argv(&text).map_err(ParseFailure::Config)?;
    let mut full = vec![argv.first().cloned().unwrap_or_else(|| "hstv".into())];
    full.extend(expanded.into_iter().map(OsString::from));
    Cli::try_parse_from(full).map_err(ParseFailure::Clap)
}

/// Expands a config object into command-line words.
///
/// `"command"` holds the subcommand path. Other keys become `--key` flags:
/// strings and numbers are single values, arrays are repeated values and
/// `true` is a bare switch. `"seed"` must be an unsigned integer; every
/// audit is deterministic, so it is validated but otherwise unused.
pub fn config_to_argv(text: &str) -> Result<Vec<String>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value.as_object().ok_or_else(|| Error::invalid("config must be a JSON object"))?;
    let command = obj
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| Error::invalid("config needs a string \"command\""))?;
    let mut words: Vec<String> = command.split_whitespace().map(str::to_string).collect();
    for (key, v) in obj {
        match key.as_str() {
            "command" => continue,
            "seed" => {
                if !v.is_u64() {
                    return Err(Error::invalid("\"seed\" must be an unsigned integer"));
                }
                continue;
            }
            _ => {}
        }
        let flag = format!("--{key}");
        let scalar = |v: &serde_json::Value| -> Result<String> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                _ => Err(Error::invalid(format!("config key \"{key}\" has an unsupported value"))),
            }
        };
        match v {
            serde_json::Value::Bool(true) => words.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                words.push(flag);
                for item in items {
                    words.push(scalar(item)?);
                }
            }
            other => {
                words.push(flag);
                words.push(scalar(other)?);
            }
        }
    }
    Ok(words)
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Radial(a) => radial_cmd(a, out),
        Command::Mesh(MeshCommand::Gen(a)) => mesh_gen(a, out),
        Command::Mesh(MeshCommand::Check(a)) => mesh_check(a, out),
        Command::Cpwl(CpwlCommand::Interp(a)) => cpwl_interp(a, out),
        Command::Cpwl(CpwlCommand::Htv(a)) => cpwl_htv(a, out, err),
        Command::Approx(a) => approx_cmd(a, out),
        Command::Fit(a) => fit_cmd(a, out, err),
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn parse_p(s: &str) -> Result<PExponent> {
    PExponent::new(parse_extended(s)?)
}

fn parse_box(words: &[String]) -> Result<AxisBox> {
    if words.len() % 2 != 0 || words.is_empty() {
        return Err(Error::invalid("--box needs 2d numbers: the low corner then the high corner"));
    }
    let nums: Vec<f64> = words.iter().map(|w| parse_rational(w)).collect::<Result<_>>()?;
    let d = nums.len() / 2;
    AxisBox::new(nums[..d].to_vec(), nums[d..].to_vec())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

fn radial_cmd(a: RadialArgs, out: &mut dyn Write) -> Result<()> {
    let profile = if let Some(d) = a.profile.strip_prefix("cone:") {
        let d: usize = d.parse().map_err(|_| Error::invalid("cone:D needs an integer D"))?;
        if d < 2 {
            return Err(Error::invalid(format!("cone:D needs D >= 2, got {d}")));
        }
        RadialProfile::cone(d)
    } else if let Some(e) = a.profile.strip_prefix("bump:") {
        radial::bump_profile(parse_rational(e)?)?
    } else {
        RadialProfile::from_json(&read(Path::new(&a.profile))?)?
    };
    let v = radial::radial_htv(&profile, parse_p(&a.p)?, parse_extended(&a.r)?)?;
    writeln!(out, "{},{},{}", fmt12(v.value), fmt12(v.jump_part), fmt12(v.ac_part))?;
    Ok(())
}

/// `εZ^d ∩ box`, with coordinates `k·ε` computed from integers.
fn lattice_points(eps: f64, b: &AxisBox) -> Result<VertexSet> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive and finite, got {eps}")));
    }
    let d = b.dim();
    let lo: Vec<i64> = b.lo.iter().map(|v| (v / eps).ceil() as i64).collect();
    let hi: Vec<i64> = b.hi.iter().map(|v| (v / eps).floor() as i64).collect();
    let count: f64 = lo.iter().zip(&hi).map(|(l, h)| (*h as f64 - *l as f64 + 1.0).max(0.0)).product();
    if count > 5e6 {
        return Err(Error::invalid(format!("lattice would hold {count} points")));
    }
    let mut coords = Vec::new();
    let mut idx = lo.clone();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(Error::invalid("box holds no lattice points"));
    }
    loop {
        coords.extend(idx.iter().map(|&k| k as f64 * eps));
        let mut k = 0;
        loop {
            if k == d {
                return VertexSet::new(d, coords);
            }
            idx[k] += 1;
            if idx[k] <= hi[k] {
                break;
            }
            idx[k] = lo[k];
            k += 1;
        }
    }
}

fn require<T>(v: Option<T>, flag: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("--kind {kind} needs {flag}")))
}

fn mesh_gen(a: MeshGenArgs, out: &mut dyn Write) -> Result<()> {
    let (mesh, audit_json) = match a.kind {
        MeshKind::Lattice => {
            let eps = parse_rational(&require(a.eps, "--eps", "lattice")?)?;
            let b = parse_box(&require(a.bbox, "--box", "lattice")?)?;
            let t = delaunay_triangulate(&lattice_points(eps, &b)?)?;
            let report = mesh::audit(&t, Some(eps), Some(&b))?;
            (t, to_json(&report))
        }
        MeshKind::Delaunay => {
            let rows = read_csv_rows(&require(a.points, "--points", "delaunay")?)?;
            let d = rows.first().map(Vec::len).ok_or_else(|| Error::invalid("no points"))?;
            let t = delaunay_triangulate(&VertexSet::from_points(d, &rows)?)?;
            let report = mesh::audit(&t, None, None)?;
            (t, to_json(&report))
        }
        MeshKind::Oriented => {
            let field = OrientationField::from_json(&read(&require(a.field, "--field", "oriented")?)?)?;
            let eps = parse_rational(&require(a.eps, "--eps", "oriented")?)?;
            let domain = match a.bbox {
                Some(w) => parse_box(&w)?,
                None => field_hull(&field)?,
            };
            let params = match a.preset {
                Preset::Practical => GridParams::practical(eps, field.delta(), domain)?,
                Preset::Conservative => GridParams::conservative(eps, field.delta(), domain)?,
            };
            let (t, report) = oriented_triangulation(&field, &params)?;
            (t, to_json(&report))
        }
    };
    std::fs::write(&a.out, mesh.to_json())?;
    match a.audit {
        Some(p) => std::fs::write(p, audit_json)?,
        None => writeln!(out, "{} vertices, {} elements", mesh.vertices().len(), mesh.elements().len())?,
    }
    Ok(())
}

/// Union of the field's cells.
fn field_hull(field: &OrientationField) -> Result<AxisBox> {
    let d = field.dim();
    let h = field.delta() / 2.0;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in field.cells() {
        for k in 0..d {
            lo[k] = lo[k].min(c.z[k] - h);
            hi[k] = hi[k].max(c.z[k] + h);
        }
    }
    AxisBox::new(lo, hi)
}

fn mesh_check(a: MeshCheckArgs, out: &mut dyn Write) -> Result<()> {
    let t = Triangulation::from_json(&read(&a.mesh)?)?;
    let eps = a.eps.as_deref().map(parse_rational).transpose()?;
    let b = a.bbox.as_deref().map(parse_box).transpose()?;
    let report = mesh::audit(&t, eps, b.as_ref())?;
    emit(&to_json(&report), a.out.as_deref(), out)
}

fn parse_target(name: &str, dim: usize) -> Result<Target> {
    if let Some(rest) = name.strip_prefix("affine:") {
        let mut nums = parse_list(rest)?;
        if nums.len() != dim + 1 {
            return Err(Error::invalid(format!("affine target needs {} numbers", dim + 1)));
        }
        let b = nums.pop().expect("nonempty");
        return Ok(Target::affine(nums, b));
    }
    Target::builtin(name, dim)
}

fn cpwl_interp(a: InterpArgs, out: &mut dyn Write) -> Result<()> {
    let t = Triangulation::from_json(&read(&a.mesh)?)?;
    let w = parse_target(&a.target, t.dim())?;
    let f = cpwl::interpolate(&t, |x| w.value(x))?;
    emit(&f.to_json(), a.out.as_deref(), out)
}

fn cpwl_htv(a: HtvArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let f = CpwlFunction::from_json(&read(&a.function)?)?;
    let omega = parse_box(&a.bbox)?;
    let on_boundary = cpwl::faces_on_box_boundary(&f, &omega)?;
    if !on_boundary.is_empty() {
        writeln!(
            err,
            "warning: {} face(s) with a gradient jump lie in the box boundary and are not counted",
            on_boundary.len()
        )?;
    }
    let report = cpwl::htv(&f, &omega, parse_p(&a.p)?)?;
    emit(&to_json(&report), a.out.as_deref(), out)
}

fn approx_cmd(a: ApproxArgs, out: &mut dyn Write) -> Result<()> {
    let omega = match a.bbox {
        Some(w) => parse_box(&w)?,
        None => AxisBox::new(vec![0.0001; 2], vec![0.9999; 2])?,
    };
    let w = parse_target(&a.target, omega.dim())?;
    let eps = parse_list(&a.eps)?;
    if !(a.c > 0.0) {
        return Err(Error::invalid("--c must be positive"));
    }
    let field = match a.field {
        FieldArg::Adapted => FieldChoice::Adapted,
        FieldArg::Identity => FieldChoice::Identity,
    };
    let rows = approx::density_experiment(&w, &eps, DeltaRule { c: a.c }, &omega, field)?;
    emit(&approx::rows_to_csv(&rows), a.out.as_deref(), out)
}

/// Solution file: a CPWL function (readable by `cpwl htv`) plus the fit report.
#[derive(Serialize)]
struct FitFile<'a> {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    elements: &'a [Vec<usize>],
    #[serde(flatten)]
    solution: &'a FitSolution,
    #[serde(with = "crate::io::extended_f64")]
    p: f64,
    q: f64,
    note: &'static str,
}

fn fit_cmd(a: FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mesh = Triangulation::from_json(&read(&a.mesh)?)?;
    let rows = read_csv_rows(&a.points)?;
    let points: Vec<[f64; 3]> = rows
        .iter()
        .map(|r| match r.as_slice() {
            [x, y, v] => Ok([*x, *y, *v]),
            _ => Err(Error::invalid("points CSV rows must be x,y,value")),
        })
        .collect::<Result<_>>()?;
    let p = parse_p(&a.p)?;
    let q = parse_p(&a.q)?;
    if q != PExponent::ONE {
        return Err(Error::invalid("only --q 1 is supported: other fidelities do not reduce to a linear program"));
    }
    let (sites, targets, dists) = fit2d::snap_points(&mesh, &points)?;
    let lambda = parse_extended(&a.lambda)?;
    let mut prob = FitProblem::new(mesh, sites, targets, lambda)?.with_exterior(match a.exterior {
        ExteriorArg::Free => Exterior::Free,
        ExteriorArg::Zero => Exterior::Zero,
    });
    prob.p = p;
    if p != PExponent::ONE {
        writeln!(err, "note: the HTV of a CPWL function does not depend on p; solving the same LP")?;
    }
    if let Some(list) = a.sweep {
        let lambdas: Vec<f64> = list.split(',').map(parse_extended).collect::<Result<_>>()?;
        let report = fit2d::lambda_threshold_experiment(&prob, &lambdas)?;
        return emit(&to_json(&report), a.out.as_deref(), out);
    }
    let mut sol = fit2d::solve(&prob)?;
    sol.snap_distances = dists;
    let p_value = match p {
        PExponent::Finite(v) => v,
        PExponent::Infinity => f64::INFINITY,
    };
    let file = FitFile {
        dim: 2,
        vertices: prob.mesh.vertices().iter().map(|x| x.to_vec()).collect(),
        elements: prob.mesh.elements(),
        solution: &sol,
        p: p_value,
        q: 1.0,
        note: "CPWL HTV is independent of p",
    };
    emit(&to_json(&file), a.out.as_deref(), out)
}
