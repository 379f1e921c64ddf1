//! Convergence studies under the scalings `ε = C_ε·h^β`, `θ = C_θ·h/ε`,
//! least-squares order fits, predicted rates, consistency probes and the
//! study CSV format.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{DomainDescriptor, DomainKind, Mesh};
use crate::problems::ProblemSpec;
use crate::real::{Point2, Real, ScalarField};
use crate::scheme::{build_stencils, inf_laplacian, GridFunction, SchemeParams};
use crate::directions::build_circle_directions;
use crate::solver::{solve_dirichlet, solve_obstacle, SolveOptions};

/// Exact header of the study CSV.
pub const CSV_HEADER: &str = "h,eps,theta,error,iters,seconds";

/// Rows used by default for the fitted order (the finest ones).
pub const DEFAULT_FIT_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `f ≢ 0`, rate `α²/(2+α)`.
    Inhomogeneous,
    /// `f ≡ 0`, rate `α/(2(α+1))`.
    Homogeneous,
}

/// Predicted convergence order for Hölder exponent `alpha ∈ (0, 1]`.
pub fn theoretical_rate(alpha: f64, regime: Regime) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    Ok(match regime {
        Regime::Inhomogeneous => alpha * alpha / (2.0 + alpha),
        Regime::Homogeneous => alpha / (2.0 * (alpha + 1.0)),
    })
}

/// Least-squares slope of `log₂ error` against `log₂ h`.
pub fn fit_order(rows: &[(f64, f64)]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "an order fit needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    if let Some(&(h, e)) = rows.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "order fit needs positive h and error, got ({h}, {e})"
        )));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(h, e)| (h.log2(), e.log2())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all h values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// `C_ε` making `ε = 2⁻⁴` at `h = 2⁻⁵`.
pub fn normalized_c_eps(beta: f64) -> f64 {
    (5.0 * beta - 4.0).exp2()
}

#[derive(Debug, Clone)]
pub struct StudySpec<T> {
    /// The problem, with any obstacle or Finsler decoration attached.
    pub problem: ProblemSpec<T>,
    /// Strictly decreasing.
    pub h_levels: Vec<f64>,
    pub beta: f64,
    pub c_eps: f64,
    pub c_theta: f64,
    pub solve: SolveOptions<T>,
    pub alpha: f64,
    pub fit_rows: usize,
}

impl<T: Real> StudySpec<T> {
    /// Defaults: `C_ε` normalized, `C_θ = 1`, `α` from the problem.
    pub fn new(problem: ProblemSpec<T>, h_levels: Vec<f64>, beta: f64) -> Self {
        let alpha = problem.holder_alpha;
        Self {
            problem,
            h_levels,
            beta,
            c_eps: normalized_c_eps(beta),
            c_theta: 1.0,
            solve: SolveOptions::default(),
            alpha,
            fit_rows: DEFAULT_FIT_ROWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_levels.is_empty() {
            return Err(Error::InvalidArgument("empty h list".into()));
        }
        if self.h_levels.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidArgument("h values must be positive".into()));
        }
        if self.h_levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("h list must be strictly decreasing".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta = {} must be >= 0", self.beta)));
        }
        if !(self.c_eps > 0.0 && self.c_theta > 0.0) {
            return Err(Error::InvalidArgument("C_eps and C_theta must be positive".into()));
        }
        if self.fit_rows < 2 {
            return Err(Error::InvalidArgument("fit_rows must be at least 2".into()));
        }
        self.solve.validate()
    }

    pub fn regime(&self) -> Regime {
        if self.problem.rhs_class.is_homogeneous() {
            Regime::Homogeneous
        } else {
            Regime::Inhomogeneous
        }
    }

    /// `(ε, θ)` at level `h`; θ is clamped to 1.
    pub fn scales(&self, h: f64) -> (f64, f64) {
        let eps = self.c_eps * h.powf(self.beta);
        let theta = self.c_theta * h / eps;
        if theta > 1.0 {
            log::warn!("theta = {theta} at h = {h} clamped to 1");
        }
        (eps, theta.min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub h: f64,
    pub eps: f64,
    pub theta: f64,
    pub error: f64,
    pub iters: usize,
    pub seconds: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    /// Ordered by `h` descending.
    pub rows: Vec<StudyRow>,
    pub fitted_order: Option<f64>,
    pub theoretical_order: f64,
}

impl StudyReport {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Whether every row's error is below the previous one.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// The coarsest built-in mesh of `domain` whose mesh size is at most `h`.
pub fn study_mesh<T: Real>(domain: &DomainDescriptor<T>, h: f64) -> Result<Mesh<T>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive")));
    }
    match domain.kind {
        DomainKind::Square => {
            let n = (2.0 * std::f64::consts::SQRT_2 / h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            Mesh::square(n)
        }
        DomainKind::UnitDisk => {
            let mut rings = ((1.5 / h).floor() as usize).max(1);
            loop {
                let mesh = Mesh::<T>::disk(rings)?;
                if mesh.mesh_size().as_f64() <= h {
                    return Ok(mesh);
                }
                rings += 1;
            }
        }
        DomainKind::Custom => Err(Error::InvalidArgument(
            "studies need a built-in domain to generate meshes".into(),
        )),
    }
}

/// `max` over all nodes of `|w − u|`.
pub fn nodal_error<T: Real>(mesh: &Mesh<T>, w: &GridFunction<T>, exact: &ScalarField<T>) -> f64 {
    mesh.vertices()
        .iter()
        .zip(w.values())
        .map(|(&x, &v)| (v - exact(x)).abs().as_f64())
        .fold(0.0, f64::max)
}

/// Solves at every level and fits the order over the finest converged rows.
pub fn run_study<T: Real>(spec: &StudySpec<T>) -> Result<StudyReport> {
    spec.validate()?;
    let exact = spec
        .problem
        .exact_solution
        .clone()
        .ok_or_else(|| Error::NoExactSolution(spec.problem.name.clone()))?;
    let theoretical_order = theoretical_rate(spec.alpha, spec.regime())?;
    let mut rows = Vec::with_capacity(spec.h_levels.len());
    for &h in &spec.h_levels {
        let start = Instant::now();
        let (eps, theta) = spec.scales(h);
        let mesh = study_mesh(&spec.problem.domain, h)?;
        let params = SchemeParams {
            h: mesh.mesh_size(),
            eps: T::lit(eps),
            theta: T::lit(theta),
        };
        let report = if spec.problem.obstacle.is_some() {
            solve_obstacle(&spec.problem, &mesh, &params, &spec.solve)?
        } else {
            solve_dirichlet(&spec.problem, &mesh, &params, &spec.solve)?
        };
        if !report.converged {
            log::warn!("level h = {h} did not converge (residual {})", report.final_residual);
        }
        let row = StudyRow {
            h,
            eps,
            theta,
            error: nodal_error(&mesh, &report.solution, &exact),
            iters: report.iterations,
            seconds: start.elapsed().as_secs_f64(),
            converged: report.converged,
        };
        log::info!(
            "h = {h:.6e} eps = {eps:.6e} theta = {theta:.6e}: error {:.6e} after {} sweeps",
            row.error,
            row.iters
        );
        rows.push(row);
    }
    let converged: Vec<(f64, f64)> = rows.iter().filter(|r| r.converged).map(|r| (r.h, r.error)).collect();
    let tail = &converged[converged.len().saturating_sub(spec.fit_rows)..];
    let fitted_order = if tail.len() >= 2 && tail.iter().all(|&(_, e)| e > 0.0) {
        Some(fit_order(tail)?)
    } else {
        None
    };
    Ok(StudyReport {
        rows,
        fitted_order,
        theoretical_order,
    })
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the study CSV. With `omit_timing` the seconds column is zero,
/// making output independent of run time.
pub fn format_csv(report: &StudyReport, omit_timing: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let seconds = if omit_timing { 0.0 } else { r.seconds };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sci(r.h),
            sci(r.eps),
            sci(r.theta),
            sci(r.error),
            r.iters,
            sci(seconds)
        );
    }
    let fitted = report.fitted_order.map_or_else(|| "none".to_string(), sci);
    let _ = writeln!(
        out,
        "# fitted_order={} theoretical_order={}",
        fitted,
        sci(report.theoretical_order)
    );
    out
}

/// Parses a study CSV. Rows are marked converged; the format does not
/// carry that flag.
pub fn parse_csv(text: &str) -> Result<StudyReport> {
    let bad = |msg: String| Error::InvalidArgument(format!("study csv: {msg}"));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        other => return Err(bad(format!("expected header `{CSV_HEADER}`, got {other:?}"))),
    }
    let mut rows = Vec::new();
    let mut footer = None;
    for (k, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            footer = Some(parse_footer(rest).map_err(|m| bad(m.to_string()))?);
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(bad(format!("row {} has {} fields", k + 1, cells.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("row {}: `{s}`: {e}", k + 1)));
        rows.push(StudyRow {
            h: num(cells[0])?,
            eps: num(cells[1])?,
            theta: num(cells[2])?,
            error: num(cells[3])?,
            iters: cells[4]
                .trim()
                .parse()
                .map_err(|e| bad(format!("row {}: `{}`: {e}", k + 1, cells[4])))?,
            seconds: num(cells[5])?,
            converged: true,
        });
    }
    let (fitted_order, theoretical_order) = footer.ok_or_else(|| bad("missing footer".into()))?;
    Ok(StudyReport {
        rows,
        fitted_order,
        theoretical_order,
    })
}

fn parse_footer(rest: &str) -> std::result::Result<(Option<f64>, f64), &'static str> {
    let mut fitted = None;
    let mut theoretical = None;
    for item in rest.split_whitespace() {
        match item.split_once('=') {
            Some(("fitted_order", "none")) => fitted = Some(None),
            Some(("fitted_order", v)) => fitted = Some(Some(v.parse().map_err(|_| "bad fitted_order")?)),
            Some(("theoretical_order", v)) => theoretical = Some(v.parse().map_err(|_| "bad theoretical_order")?),
            _ => return Err("unrecognized footer item"),
        }
    }
    match (fitted, theoretical) {
        (Some(f), Some(t)) => Ok((f, t)),
        _ => Err("footer needs fitted_order and theoretical_order"),
    }
}

pub fn write_csv(path: &Path, report: &StudyReport, omit_timing: bool) -> Result<()> {
    std::fs::write(path, format_csv(report, omit_timing)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<StudyReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Scheme triples with `ε` halved `levels − 1` times from `eps0` and the
/// ratios `h/ε`, `θ/ε` held fixed.
pub fn probe_ladder(eps0: f64, h_over_eps: f64, theta_over_eps: f64, levels: usize) -> Vec<SchemeParams<f64>> {
    (0..levels)
        .map(|k| {
            let eps = eps0 / f64::from(1u32 << k.min(31));
            SchemeParams {
                h: h_over_eps * eps,
                eps,
                theta: (theta_over_eps * eps).min(1.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub discrepancies: Vec<f64>,
    /// Least-squares slope in `ε`; `None` when some discrepancy vanishes.
    pub slope: Option<f64>,
}

/// Compares `Δ∞,ℌ◇φ(point)` with the exact value `oracle = Δ∞◇φ(point)`
/// on each rung. Each rung uses a uniform patch mesh centered at `point`
/// with mesh size at most the rung's `h`.
pub fn consistency_probe<T: Real>(
    phi: &ScalarField<T>,
    oracle: T,
    point: Point2<T>,
    domain: &DomainDescriptor<T>,
    ladder: &[SchemeParams<T>],
) -> Result<ProbeResult> {
    if ladder.is_empty() {
        return Err(Error::InsufficientData("empty ladder".into()));
    }
    let depth = domain.distance_to_boundary(point);
    let mut discrepancies = Vec::with_capacity(ladder.len());
    for (rung, params) in ladder.iter().enumerate() {
        params.validate()?;
        if !(depth > T::lit(2.0) * params.eps) {
            return Err(Error::NotInteriorNode(rung));
        }
        let half = params.eps + T::lit(2.0) * params.h;
        let cells = (T::lit(2.0) * T::SQRT_2() * half / params.h).ceil().as_f64() as usize;
        let cells = cells + cells % 2;
        let mesh = Mesh::rectangle(point, half, cells)?;
        let center = (cells / 2) * (cells + 1) + cells / 2;
        let dirs = build_circle_directions(params.theta)?;
        let table = build_stencils(&mesh, &[center], &dirs, params.eps)?;
        let w = GridFunction::sample(&mesh, |x| phi(x));
        let value = inf_laplacian(&table, &w, center)?;
        discrepancies.push((value - oracle).abs().as_f64());
    }
    let slope = if ladder.len() >= 2 && discrepancies.iter().all(|&d| d > 0.0) {
        let pts: Vec<(f64, f64)> = ladder
            .iter()
            .zip(&discrepancies)
            .map(|(p, &d)| (p.eps.as_f64(), d))
            .collect();
        Some(fit_order(&pts)?)
    } else {
        None
    };
    Ok(ProbeResult {
        discrepancies,
        slope,
    })
}
