mod args;

use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use inflap::cloud::{build_lattice_cloud, load_cloud, solve_cloud_with, CloudPolicy};
use inflap::directions::FinslerNorm;
use inflap::geometry::{load_mesh, DomainDescriptor, DomainKind, Mesh};
use inflap::problems::{builtin_problem, ProblemSpec};
use inflap::scheme::SchemeParams;
use inflap::solver::{solve_dirichlet, solve_obstacle, SolveOptions, SolveReport};
use inflap::study::{consistency_probe, format_csv, normalized_c_eps, probe_ladder, run_study, StudySpec};
use inflap::{field, Error, Point64};

use args::{
    expand_config, parse_floats, parse_h_list, parse_pair, Cli, CloudArgs, Command, ConsistencyArgs, MeshArgs,
    ObstacleArgs, ProblemArgs, SolveArgs, SolverArgs, StudyArgs, TestFunction,
};

/// A failed run with its exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    NotConverged(String),
    Breakdown(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Breakdown(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) | Failure::Breakdown(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalBreakdown { .. } => Failure::Breakdown(e.to_string()),
            Error::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("inflap: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("inflap: {msg}");
            return ExitCode::from(2);
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("inflap: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("inflap: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    let n = match std::env::var("INFLAP_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            Some(v.trim().parse::<usize>().map_err(|_| format!("INFLAP_THREADS = `{v}` is not a count"))?)
        }
        _ => flag,
    };
    if n == Some(0) {
        return Err("thread count must be at least 1".into());
    }
    Ok(n)
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Solve(a) => solve(a),
        Command::Study(a) => study(a),
        Command::Consistency(a) => consistency(a),
        Command::Obstacle(a) => obstacle(a),
        Command::Cloud(a) => cloud(a),
    }
}

fn load_problem(a: &ProblemArgs) -> Result<ProblemSpec<f64>, Failure> {
    let mut p = builtin_problem::<f64>(&a.problem)?.with_extension(a.bc.into());
    if let Some(entries) = &a.finsler {
        let v = parse_floats(entries, 3).map_err(Failure::Usage)?;
        let norm = FinslerNorm::ellipse(v[0], v[1], v[2])?.with_refinement(a.finsler_refinement)?;
        p = p.with_finsler(norm);
    }
    Ok(p)
}

fn build_mesh(a: &MeshArgs, domain: &DomainDescriptor<f64>) -> Result<Mesh<f64>, Failure> {
    if let Some(path) = &a.mesh {
        return Ok(load_mesh(path)?);
    }
    let n = a
        .n
        .ok_or_else(|| Failure::Usage("one of --n or --mesh is required".into()))?;
    Ok(match domain.kind {
        DomainKind::UnitDisk => Mesh::disk(n)?,
        _ => Mesh::square(n)?,
    })
}

fn solver_options(a: &SolverArgs) -> SolveOptions<f64> {
    let mut opts = SolveOptions::default().with_tol(a.tol);
    if let Some(m) = a.max_iters {
        opts = opts.with_max_iters(m);
    }
    opts
}

fn solve(a: SolveArgs) -> Outcome {
    let problem = load_problem(&a.problem)?;
    let mesh = build_mesh(&a.mesh, &problem.domain)?;
    let params = SchemeParams::for_mesh(&mesh, a.mesh.eps, a.mesh.theta)?;
    let report = solve_dirichlet(&problem, &mesh, &params, &solver_options(&a.solver))?;
    finish(&problem, mesh.vertices(), &params_line(&params), &report, a.solver.out.as_deref())
}

fn obstacle(a: ObstacleArgs) -> Outcome {
    let problem = load_problem(&a.problem)?.with_constant_obstacle(a.obstacle);
    let mesh = build_mesh(&a.mesh, &problem.domain)?;
    let params = SchemeParams::for_mesh(&mesh, a.mesh.eps, a.mesh.theta)?;
    let opts = solver_options(&a.solver).with_obstacle_boundary(a.obstacle_boundary.into());
    let report = solve_obstacle(&problem, &mesh, &params, &opts)?;
    let contact = report.solution.values().iter().filter(|&&u| u <= a.obstacle).count();
    println!("obstacle {} touched at {contact} nodes", a.obstacle);
    finish(&problem, mesh.vertices(), &params_line(&params), &report, a.solver.out.as_deref())
}

fn cloud(a: CloudArgs) -> Outcome {
    let problem = builtin_problem::<f64>(&a.problem)?.with_extension(a.bc.into());
    let cloud = match (&a.cloud, a.spacing) {
        (Some(path), _) => load_cloud(path)?.with_domain(problem.domain.clone()),
        (None, Some(s)) => build_lattice_cloud(&problem.domain, s)?,
        (None, None) => return Err(Failure::Usage("one of --spacing or --cloud is required".into())),
    };
    let policy = CloudPolicy {
        allow_unsymmetric: a.allow_unsymmetric,
    };
    let report = solve_cloud_with(&problem, &cloud, a.eps, &solver_options(&a.solver), policy)?;
    let line = format!("points {} h {:.6e} eps {:.6e}", cloud.len(), cloud.h(), a.eps);
    finish(&problem, cloud.points(), &line, &report, a.solver.out.as_deref())
}

fn params_line(p: &SchemeParams<f64>) -> String {
    format!("h {:.6e} eps {:.6e} theta {:.6e}", p.h, p.eps, p.theta)
}

fn finish(problem: &ProblemSpec<f64>, points: &[Point64], scales: &str, r: &SolveReport<f64>, out: Option<&Path>) -> Outcome {
    println!("problem {} ({} boundary) {scales}", problem.name, problem.extension);
    println!(
        "converged {} after {} sweeps, residual {:.3e}, {:.2} s",
        r.converged, r.iterations, r.final_residual, r.wall_seconds
    );
    if let Some(u) = &problem.exact_solution {
        let err = points
            .iter()
            .zip(r.solution.values())
            .map(|(p, v)| (v - u(*p)).abs())
            .fold(0.0, f64::max);
        println!("max nodal error {err:.6e}");
    }
    if let Some(path) = out {
        let mut text = String::from("x,y,u\n");
        for (p, v) in points.iter().zip(r.solution.values()) {
            let _ = writeln!(text, "{:.16e},{:.16e},{:.16e}", p.x, p.y, v);
        }
        std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    if r.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "no convergence within {} sweeps (residual {:.3e})",
            r.iterations, r.final_residual
        )))
    }
}

fn study(a: StudyArgs) -> Outcome {
    let problem = load_problem(&a.problem)?;
    let h_levels = parse_h_list(&a.h).map_err(Failure::Usage)?;
    let mut spec = StudySpec::new(problem, h_levels, a.beta);
    spec.c_eps = a.c_eps.unwrap_or_else(|| normalized_c_eps(a.beta));
    spec.c_theta = a.c_theta;
    spec.fit_rows = a.fit_rows;
    spec.solve = SolveOptions::default().with_tol(a.tol);
    if let Some(m) = a.max_iters {
        spec.solve = spec.solve.with_max_iters(m);
    }
    let report = run_study(&spec)?;
    let csv = format_csv(&report, a.omit_timing);
    match &a.out {
        Some(path) => std::fs::write(path, &csv).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    if let Some(stalled) = report.rows.iter().find(|r| !r.converged) {
        return Err(Failure::NotConverged(format!("level h = {} did not converge", stalled.h)));
    }
    Ok(())
}

fn consistency(a: ConsistencyArgs) -> Outcome {
    let (x, y) = parse_pair(&a.point).map_err(Failure::Usage)?;
    let point = Point64::new(x, y);
    let (phi, oracle) = match a.function {
        TestFunction::Smooth => {
            let gx = 1.0 + 2.0 * x;
            (field(|p: Point64| p.x + 2.0 * p.y + p.x * p.x), 2.0 * gx * gx / (gx * gx + 4.0))
        }
        TestFunction::Bowl => (field(|p: Point64| -0.5 * p.norm_squared()), -1.0),
        TestFunction::Affine => (field(|p: Point64| 3.0 * p.x - 2.0 * p.y + 1.0), 0.0),
    };
    let ladder = probe_ladder(a.eps0, a.h_over_eps, a.theta_over_eps, a.levels);
    let result = consistency_probe(&phi, oracle, point, &DomainDescriptor::square(), &ladder)?;
    println!("h,eps,theta,discrepancy");
    for (p, d) in ladder.iter().zip(&result.discrepancies) {
        println!("{:.16e},{:.16e},{:.16e},{:.16e}", p.h, p.eps, p.theta, d);
    }
    match result.slope {
        Some(s) => println!("# slope={s:.16e}"),
        None => println!("# slope=none"),
    }
    Ok(())
}
