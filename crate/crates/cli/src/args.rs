use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inflap::problems::ExtensionMode;
use inflap::solver::ObstacleBoundary;

#[derive(Debug, Parser)]
#[command(name = "inflap", version, about = "Monotone two-scale solver for the normalized infinity Laplacian")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for the sweeps (INFLAP_THREADS takes precedence).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Flat `key = value` file whose keys mirror the long flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a built-in Dirichlet problem at one scale triple.
    Solve(SolveArgs),
    /// Run a convergence study and emit the CSV table.
    Study(StudyArgs),
    /// Compare the discrete operator with the exact one on a scale ladder.
    Consistency(ConsistencyArgs),
    /// Solve a built-in problem above a constant obstacle.
    Obstacle(ObstacleArgs),
    /// Solve a built-in problem on a lattice or user point cloud.
    Cloud(CloudArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryMode {
    Exact,
    #[value(name = "linf_radial", alias = "linf-radial")]
    LinfRadial,
    #[value(name = "closest_point", alias = "closest-point")]
    ClosestPoint,
}

impl From<BoundaryMode> for ExtensionMode {
    fn from(m: BoundaryMode) -> Self {
        match m {
            BoundaryMode::Exact => ExtensionMode::Exact,
            BoundaryMode::LinfRadial => ExtensionMode::LinfRadial,
            BoundaryMode::ClosestPoint => ExtensionMode::ClosestPoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryPolicy {
    Strict,
    Project,
    Keep,
}

impl From<BoundaryPolicy> for ObstacleBoundary {
    fn from(p: BoundaryPolicy) -> Self {
        match p {
            BoundaryPolicy::Strict => ObstacleBoundary::Strict,
            BoundaryPolicy::Project => ObstacleBoundary::Project,
            BoundaryPolicy::Keep => ObstacleBoundary::Keep,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// aronsson, paraboloid, affine or cone.
    #[arg(long)]
    pub problem: String,

    /// Boundary extension.
    #[arg(long, value_enum, default_value = "exact")]
    pub bc: BoundaryMode,

    /// Finsler ellipse entries `a11,a12,a22`.
    #[arg(long, value_name = "A11,A12,A22")]
    pub finsler: Option<String>,

    /// Divisor for the first Euclidean base set of a Finsler direction set.
    #[arg(long, default_value_t = 1.0)]
    pub finsler_refinement: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    /// Generated mesh resolution: cells per side (square) or rings (disk).
    #[arg(long, conflicts_with = "mesh")]
    pub n: Option<usize>,

    /// Mesh file.
    #[arg(long, value_name = "PATH")]
    pub mesh: Option<PathBuf>,

    #[arg(long)]
    pub eps: f64,

    #[arg(long)]
    pub theta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Sweep limit; defaults to 200·(diam/ε)².
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Write nodal values as `x,y,u` rows.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ObstacleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub solver: SolverArgs,

    /// Constant obstacle level χ.
    #[arg(long, allow_hyphen_values = true)]
    pub obstacle: f64,

    /// Boundary nodes where χ is not below g̃.
    #[arg(long, value_enum, default_value = "strict")]
    pub obstacle_boundary: BoundaryPolicy,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[arg(long)]
    pub beta: f64,

    /// Comma separated, e.g. `2^-5,2^-6,2^-7`.
    #[arg(long, value_name = "LIST")]
    pub h: String,

    /// Defaults to the value giving ε = 2⁻⁴ at h = 2⁻⁵.
    #[arg(long)]
    pub c_eps: Option<f64>,

    #[arg(long, default_value_t = 1.0)]
    pub c_theta: f64,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Rows used by the order fit.
    #[arg(long, default_value_t = 3)]
    pub fit_rows: usize,

    /// CSV destination; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Write zero in the seconds column.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestFunction {
    /// x + 2y + x², smooth with nonvanishing gradient.
    Smooth,
    /// −|x|²/2, gradient vanishing at the origin.
    Bowl,
    /// 3x − 2y + 1.
    Affine,
}

#[derive(Debug, Clone, Args)]
pub struct ConsistencyArgs {
    #[arg(long, value_enum, default_value = "smooth")]
    pub function: TestFunction,

    /// Probe point `x,y`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub point: String,

    #[arg(long, default_value_t = 0.25)]
    pub eps0: f64,

    #[arg(long, default_value_t = 0.0625)]
    pub h_over_eps: f64,

    #[arg(long, default_value_t = 1.0)]
    pub theta_over_eps: f64,

    #[arg(long, default_value_t = 5)]
    pub levels: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CloudArgs {
    #[arg(long)]
    pub problem: String,

    #[arg(long, value_enum, default_value = "exact")]
    pub bc: BoundaryMode,

    /// Lattice spacing of a generated cloud.
    #[arg(long, conflicts_with = "cloud", required_unless_present = "cloud")]
    pub spacing: Option<f64>,

    /// Cloud file.
    #[arg(long, value_name = "PATH")]
    pub cloud: Option<PathBuf>,

    #[arg(long)]
    pub eps: f64,

    /// Solve f ≡ 0 problems on clouds without a symmetry certificate.
    #[arg(long)]
    pub allow_unsymmetric: bool,

    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Splices `key = value` lines of the file named by `--config` into `argv`
/// right after the subcommand, so flags given on the command line win.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let extra = config_args(&text)?;
    let sub = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| SUBCOMMANDS.contains(&a.as_str()))
        .map(|(k, _)| k);
    let Some(sub) = sub else {
        return Ok(argv);
    };
    let mut out = argv[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

const SUBCOMMANDS: [&str; 5] = ["solve", "study", "consistency", "obstacle", "cloud"];

fn config_path(argv: &[String]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn config_args(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", k + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if matches!(key.as_str(), "config" | "threads") {
            return Err(format!("config line {}: `{key}` is not allowed in a config file", k + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}

/// Parses a comma separated list of `2^-k`, `2^k` or decimal values.
/// Powers of two are built exactly.
pub fn parse_h_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| parse_h(t.trim())).collect()
}

pub fn parse_h(token: &str) -> Result<f64, String> {
    if let Some(exp) = token.strip_prefix("2^") {
        let k: i32 = exp.parse().map_err(|_| format!("bad exponent in `{token}`"))?;
        return Ok(2f64.powi(k));
    }
    token.parse::<f64>().map_err(|_| format!("cannot parse h value `{token}`"))
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

pub fn parse_floats(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse `{t}` as a number")))
        .collect::<Result<_, _>>()?;
    if v.len() != count {
        return Err(format!("expected {count} comma separated numbers, got `{s}`"));
    }
    Ok(v)
}
