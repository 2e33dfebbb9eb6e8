//! The `harmorse` command line: argument and config parsing, dispatch to the
//! library, and report emission.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation breaks down, 2 for usage and configuration errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use harmorse::family::{self, FamilyMode};
use harmorse::jacobi;
use harmorse::quadrature::Resolution;
use harmorse::verify::{self, Suite, VerifyConfig};
use harmorse::{QuadratureGrid, SingularPolicy, SphereMap, Vector3};
use serde::Serialize;

pub mod config;
pub mod report;

use config::ConfigFile;
use report::{cell, float, Format, Table};

#[derive(Debug)]
pub enum CliError {
    /// bad flags, config, map or grid text
    Usage(String),
    /// the computation ran and failed
    Failure(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<harmorse::Error> for CliError {
    fn from(e: harmorse::Error) -> CliError {
        use harmorse::Error as E;
        match e {
            E::Syntax { .. } | E::Config(_) | E::Domain(_) | E::Unsupported(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "harmorse", version, about = "Identity checks, Morse index and topology of harmonic maps S³ → S²")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an identity suite: frames, killing, jacobi-field, balance, ii44 or all
    Verify(VerifyArgs),
    /// Galerkin Morse index of a smooth map
    Index(IndexArgs),
    /// Balancing integrals ∫ x_k |du|²
    Balance(BalanceArgs),
    /// Energy and average direction along a conformal family
    Family(FamilyArgs),
    /// Hopf invariant by preimage linking
    HopfInvariant(HopfArgs),
    /// Dirichlet energy
    Energy(EnergyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// key = value file with defaults for any long flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// write the report here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: Option<String>,
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub refine: Option<u32>,
    /// Laplacian step
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub degree: Option<i64>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol_neg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol_null: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub refine: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub refine: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct HopfArgs {
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub mesh: Option<usize>,
    /// first regular value, `x,y,z`
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    /// second regular value, `x,y,z`
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub refine: Option<u32>,
    #[command(flatten)]
    pub common: Common,
}

fn load(common: &Common) -> Result<ConfigFile, CliError> {
    match &common.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

/// Fill each `field` of `args` from the config file, then reject leftovers.
macro_rules! merge {
    ($args:expr, $($key:literal => $field:ident),* $(,)?) => {{
        let mut cfg = load(&$args.common)?;
        $(cfg.apply($key, &mut $args.$field)?;)*
        cfg.apply("output", &mut $args.common.output)?;
        cfg.apply("format", &mut $args.common.format)?;
        cfg.finish()?;
    }};
}

const DEFAULT_MAP: &str = "hopf";

fn parse_map(text: Option<&str>) -> Result<SphereMap, CliError> {
    Ok(SphereMap::parse(text.unwrap_or(DEFAULT_MAP))?)
}

fn parse_grid(text: Option<&str>) -> Result<Resolution, CliError> {
    match text {
        None => Ok(Resolution::DEFAULT),
        Some(t) => t.parse::<Resolution>().map_err(CliError::from),
    }
}

fn parse_unit(text: &str) -> Result<Vector3<f64>, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad vector `{text}`: {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("expected three components, got `{text}`")));
    }
    let v = Vector3::new(parts[0], parts[1], parts[2]);
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(CliError::Usage(format!("vector `{text}` cannot be normalised")));
    }
    Ok(v / n)
}

/// A finished report: JSON rows, the CSV table, and whether every check passed.
pub struct Output {
    json: Vec<u8>,
    table: Table,
    pub pass: bool,
}

impl Output {
    fn new<T: Serialize>(rows: &[T], table: Table, pass: bool) -> Result<Output, CliError> {
        let mut json = Vec::new();
        report::write_json(rows, &mut json).map_err(|e| CliError::Failure(e.to_string()))?;
        Ok(Output { json, table, pass })
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Json => Ok(self.json.clone()),
            Format::Csv => {
                let mut out = Vec::new();
                report::write_csv(&self.table, &mut out).map_err(|e| CliError::Failure(e.to_string()))?;
                Ok(out)
            }
        }
    }
}

fn check_table(reports: &[verify::CheckReport]) -> Table {
    Table {
        header: vec!["name", "paper_ref", "residual", "tolerance", "pass", "points_sampled", "seed"],
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.paper_ref.clone(),
                    cell(Some(r.residual)),
                    cell(Some(r.tolerance)),
                    r.pass.to_string(),
                    r.points_sampled.to_string(),
                    r.seed.to_string(),
                ]
            })
            .collect(),
    }
}

fn checks(reports: Vec<verify::CheckReport>) -> Result<Output, CliError> {
    let pass = reports.iter().all(|r| r.pass);
    Output::new(&reports, check_table(&reports), pass)
}

fn run_verify(mut a: VerifyArgs) -> Result<(Output, Common), CliError> {
    merge!(a, "suite" => suite, "map" => map, "seed" => seed, "points" => points, "grid" => grid, "refine" => refine, "h" => h);
    let suite: Suite = a.suite.as_deref().unwrap_or("all").parse()?;
    let mut cfg = VerifyConfig::new(parse_map(a.map.as_deref())?);
    cfg.grid = parse_grid(a.grid.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = a.points {
        cfg.points = p;
    }
    if let Some(r) = a.refine {
        cfg.refine = r;
    }
    if let Some(h) = a.h {
        cfg.h = h;
    }
    Ok((checks(verify::run_suite(suite, &cfg)?)?, a.common))
}

#[derive(Serialize)]
struct IndexRow {
    map: String,
    degree: u32,
    grid: String,
    basis_size: usize,
    filtered_dims: usize,
    index_count: usize,
    near_null_count: usize,
    tol_neg: f64,
    tol_null: f64,
    eigenvalues: Vec<f64>,
}

pub const MAX_DEGREE: i64 = 8;

fn run_index(mut a: IndexArgs) -> Result<(Output, Common), CliError> {
    merge!(a, "map" => map, "degree" => degree, "grid" => grid, "tol-neg" => tol_neg, "tol-null" => tol_null);
    let degree = a.degree.unwrap_or(3);
    if !(0..=MAX_DEGREE).contains(&degree) {
        return Err(CliError::Usage(format!("degree must lie in 0..={MAX_DEGREE}, got {degree}")));
    }
    let u = parse_map(a.map.as_deref())?;
    let res = parse_grid(a.grid.as_deref())?;
    let tol_neg = a.tol_neg.unwrap_or(jacobi::DEFAULT_TOL_NEG);
    let tol_null = a.tol_null.unwrap_or(jacobi::DEFAULT_TOL_NULL);
    let basis = jacobi::build_basis(&u, degree as u32)?;
    let pencil = jacobi::assemble(&basis, &QuadratureGrid::for_map(res, &u)?)?;
    let s = jacobi::spectrum(&pencil, tol_neg, tol_null)?;
    let table = Table {
        header: vec!["rank", "eigenvalue"],
        rows: s.eigenvalues.iter().enumerate().map(|(k, l)| vec![k.to_string(), cell(Some(*l))]).collect(),
    };
    let row = IndexRow {
        map: u.spec().to_string(),
        degree: degree as u32,
        grid: res.to_string(),
        basis_size: basis.len(),
        filtered_dims: pencil.filtered_dims(),
        index_count: s.index_count,
        near_null_count: s.near_null_count,
        tol_neg,
        tol_null,
        eigenvalues: s.eigenvalues.clone(),
    };
    Ok((Output::new(&[row], table, true)?, a.common))
}

fn run_balance(mut a: BalanceArgs) -> Result<(Output, Common), CliError> {
    merge!(a, "map" => map, "grid" => grid, "refine" => refine, "seed" => seed);
    let u = parse_map(a.map.as_deref())?;
    let grid = QuadratureGrid::for_map(parse_grid(a.grid.as_deref())?, &u)?;
    let reports = verify::run_balance_suite(&u, &grid, a.refine.unwrap_or(3), a.seed.unwrap_or(1))?;
    Ok((checks(reports)?, a.common))
}

#[derive(Serialize)]
struct FamilyRow {
    a: [f64; 4],
    energy: Option<f64>,
    avg: Option<[f64; 3]>,
    avg_norm: Option<f64>,
    error: Option<String>,
}

fn run_family(mut a: FamilyArgs) -> Result<(Output, Common), CliError> {
    merge!(a, "map" => map, "mode" => mode, "samples" => samples, "eps" => eps, "grid" => grid, "refine" => refine, "seed" => seed);
    let u = parse_map(a.map.as_deref())?;
    let mode: FamilyMode = a.mode.as_deref().unwrap_or("A").parse()?;
    let res = parse_grid(a.grid.as_deref())?;
    let params = family::family_parameters(mode, a.samples.unwrap_or(16), a.eps.unwrap_or(0.05), a.seed.unwrap_or(1))?;
    let profile = family::energy_profile(&u, mode, &params, res, a.refine.unwrap_or(3))?;
    let rows: Vec<FamilyRow> = profile
        .samples
        .iter()
        .map(|s| FamilyRow {
            a: s.a.into(),
            energy: s.energy,
            avg: s.average.map(Into::into),
            avg_norm: s.average.map(|v| v.norm()),
            error: s.error.clone(),
        })
        .collect();
    let table = Table {
        header: vec!["a1", "a2", "a3", "a4", "energy", "avg1", "avg2", "avg3", "avg_norm"],
        rows: rows
            .iter()
            .map(|r| {
                let mut c: Vec<String> = r.a.iter().map(|x| cell(Some(*x))).collect();
                c.push(cell(r.energy));
                c.extend((0..3).map(|k| cell(r.avg.map(|v| v[k]))));
                c.push(cell(r.avg_norm));
                c
            })
            .collect(),
    };
    let pass = rows.iter().all(|r| r.error.is_none());
    Ok((Output::new(&rows, table, pass)?, a.common))
}

#[derive(Serialize)]
struct HopfRow {
    map: String,
    mesh: usize,
    p: [f64; 3],
    q: [f64; 3],
    hopf_invariant: i64,
    linking: f64,
    loops_p: usize,
    loops_q: usize,
    resamples: usize,
}

fn run_hopf(mut a: HopfArgs) -> Result<(Output, Common), CliError> {
    merge!(a, "map" => map, "mesh" => mesh, "p" => p, "q" => q);
    let u = parse_map(a.map.as_deref())?;
    if !u.is_smooth() {
        return Err(CliError::Usage("the Hopf invariant needs a smooth map".into()));
    }
    let p = parse_unit(a.p.as_deref().unwrap_or("0,0,1"))?;
    let q = parse_unit(a.q.as_deref().unwrap_or("0,0,-1"))?;
    let mesh = a.mesh.unwrap_or(8);
    let h = family::hopf_invariant(&u, p, q, mesh)?;
    let row = HopfRow {
        map: u.spec().to_string(),
        mesh,
        p: h.p.into(),
        q: h.q.into(),
        hopf_invariant: h.value,
        linking: h.linking,
        loops_p: h.loops_p,
        loops_q: h.loops_q,
        resamples: h.resamples,
    };
    let table = Table {
        header: vec!["map", "mesh", "hopf_invariant", "linking", "loops_p", "loops_q", "resamples"],
        rows: vec![vec![
            row.map.clone(),
            mesh.to_string(),
            row.hopf_invariant.to_string(),
            float(row.linking),
            row.loops_p.to_string(),
            row.loops_q.to_string(),
            row.resamples.to_string(),
        ]],
    };
    Ok((Output::new(&[row], table, true)?, a.common))
}

#[derive(Serialize)]
struct EnergyRow {
    map: String,
    grid: String,
    refine: u32,
    energy: f64,
    error_estimate: f64,
}

fn run_energy(mut a: EnergyArgs) -> Result<(Output, Common), CliError> {
    merge!(a, "map" => map, "grid" => grid, "refine" => refine);
    let u = parse_map(a.map.as_deref())?;
    let res = parse_grid(a.grid.as_deref())?;
    let refine = if u.is_smooth() { 0 } else { a.refine.unwrap_or(3) };
    let policy = if refine == 0 { SingularPolicy::None } else { SingularPolicy::Refine(refine) };
    let r = QuadratureGrid::for_map(res, &u)?.integrate_with(|x| u.energy_density(x), policy)?;
    let (mut value, mut error) = (r.value, r.error_estimate);
    if !u.is_smooth() {
        // the angular rule is first order at the poles: extrapolate in ξ
        let fine = Resolution::new(res.n_eta, 2 * res.n_xi1, 2 * res.n_xi2)?;
        let f = QuadratureGrid::for_map(fine, &u)?.integrate_with(|x| u.energy_density(x), policy)?;
        value = 2.0 * f.value - r.value;
        error = error.max((f.value - r.value).abs());
    }
    let row = EnergyRow {
        map: u.spec().to_string(),
        grid: res.to_string(),
        refine,
        energy: 0.5 * value,
        error_estimate: 0.5 * error,
    };
    let table = Table {
        header: vec!["map", "grid", "refine", "energy", "error_estimate"],
        rows: vec![vec![
            row.map.clone(),
            row.grid.clone(),
            refine.to_string(),
            float(row.energy),
            float(row.error_estimate),
        ]],
    };
    Ok((Output::new(&[row], table, true)?, a.common))
}

pub fn dispatch(command: Command) -> Result<(Output, Common), CliError> {
    match command {
        Command::Verify(a) => run_verify(a),
        Command::Index(a) => run_index(a),
        Command::Balance(a) => run_balance(a),
        Command::Family(a) => run_family(a),
        Command::HopfInvariant(a) => run_hopf(a),
        Command::Energy(a) => run_energy(a),
    }
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("usage error");
                    let _ = writeln!(stderr, "{first}");
                    2
                }
            };
        }
    };
    let (out, common) = match dispatch(cli.command) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return match e {
                CliError::Usage(_) => 2,
                CliError::Failure(_) => 1,
            };
        }
    };
    let bytes = match out.render(common.format.unwrap_or(Format::Json)) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    let written = match &common.output {
        Some(path) => std::fs::write(path, &bytes),
        None => stdout.write_all(&bytes).and_then(|_| stdout.flush()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write report: {e}");
        return 1;
    }
    if out.pass {
        0
    } else {
        1
    }
}
