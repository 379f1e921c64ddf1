//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Positional arguments select criteria (`cargo test --test acceptance -- 4 6`).
//! Failures are reported but only abort the run when
//! `INFLAP_ACCEPTANCE_STRICT=1` is set.

use std::time::Instant;

use inflap::cloud::{build_lattice_cloud, check_connectivity, solve_cloud, PointCloud};
use inflap::directions::{build_circle_directions, build_finsler_directions, FinslerNorm};
use inflap::geometry::{classify_nodes, DomainDescriptor, Mesh};
use inflap::problems::{builtin_problem, ExtensionMode, ProblemSpec};
use inflap::scheme::{build_stencils, inf_laplacian, s_minus, s_plus, GridFunction, SchemeParams};
use inflap::solver::{
    discretize, solve_dirichlet, solve_obstacle, BarrierSide, Init, Monotonicity, ObstacleBoundary, SolveOptions,
};
use inflap::study::{consistency_probe, probe_ladder, run_study, StudyReport, StudySpec};
use inflap::{field, Point64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STUDY_LEVELS: [f64; 3] = [0.03125, 0.015625, 0.0078125];
const STUDY_TOL: f64 = 1e-7;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn study(name: &str, beta: f64, extension: ExtensionMode) -> StudyReport {
    let problem = builtin_problem::<f64>(name).unwrap().with_extension(extension);
    let mut spec = StudySpec::new(problem, STUDY_LEVELS.to_vec(), beta);
    spec.solve = SolveOptions::default().with_tol(STUDY_TOL);
    let start = Instant::now();
    let report = run_study(&spec).unwrap();
    eprintln!(
        "  {name} beta={beta:.4} {extension}: errors {:?} order {:?} ({:.0} s)",
        report.errors(),
        report.fitted_order,
        start.elapsed().as_secs_f64()
    );
    report
}

fn all_converged(r: &StudyReport) -> bool {
    r.rows.iter().all(|row| row.converged)
}

fn stagnates(r: &StudyReport) -> (bool, f64) {
    let e = r.errors();
    let (a, b) = (e[e.len() - 2], e[e.len() - 1]);
    let ratio = a.max(b) / a.min(b);
    (ratio <= 1.25, ratio)
}

fn fmt_errors(r: &StudyReport) -> String {
    r.errors().iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
}

fn criterion_1(exact_third: &StudyReport) -> Outcome {
    let order = exact_third.fitted_order.unwrap_or(f64::NAN);
    let third_ok = all_converged(exact_third) && exact_third.strictly_decreasing() && order >= 0.9;
    let zero = study("aronsson", 0.0, ExtensionMode::Exact);
    let one = study("aronsson", 1.0, ExtensionMode::Exact);
    let (zero_ok, zero_ratio) = stagnates(&zero);
    let (one_ok, one_ratio) = stagnates(&one);
    let zero_ok = zero_ok && all_converged(&zero);
    let one_ok = one_ok && all_converged(&one);
    Outcome::new(
        third_ok && zero_ok && one_ok,
        format!(
            "beta=1/3 errors [{}] order {order:.3} (need decreasing, >= 0.9) {}; \
             beta=0 last ratio {zero_ratio:.3} (need <= 1.25) {}; beta=1 last ratio {one_ratio:.3} {}",
            fmt_errors(exact_third),
            verdict(third_ok),
            verdict(zero_ok),
            verdict(one_ok)
        ),
    )
}

fn criterion_2() -> Outcome {
    let third = study("paraboloid", 1.0 / 3.0, ExtensionMode::Exact);
    let half = study("paraboloid", 0.5, ExtensionMode::Exact);
    let o3 = third.fitted_order.unwrap_or(f64::NAN);
    let o2 = half.fitted_order.unwrap_or(f64::NAN);
    let third_ok = all_converged(&third) && third.strictly_decreasing() && (0.25..=0.9).contains(&o3);
    let half_ok = all_converged(&half) && (0.35..=1.0).contains(&o2);
    Outcome::new(
        third_ok && half_ok,
        format!(
            "beta=1/3 errors [{}] order {o3:.3} (need decreasing, in [0.25, 0.9]) {}; \
             beta=1/2 errors [{}] order {o2:.3} (need [0.35, 1.0]) {}",
            fmt_errors(&third),
            verdict(third_ok),
            fmt_errors(&half),
            verdict(half_ok)
        ),
    )
}

fn criterion_3(exact_third: &StudyReport) -> Outcome {
    let inexact = study("aronsson", 1.0 / 3.0, ExtensionMode::LinfRadial);
    let order = inexact.fitted_order.unwrap_or(f64::NAN);
    let order_ok = all_converged(&inexact) && (0.4..=1.1).contains(&order);
    let larger = inexact
        .rows
        .iter()
        .zip(&exact_third.rows)
        .all(|(a, b)| a.h == b.h && a.error > b.error);
    Outcome::new(
        order_ok && larger,
        format!(
            "errors [{}] order {order:.3} (need [0.4, 1.1]) {}; larger than exact boundary at every h {}",
            fmt_errors(&inexact),
            verdict(order_ok),
            verdict(larger)
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let checks = [
        ("monotonicity", monotonicity_pairs()),
        ("stability", stability_bound()),
        ("comparison", comparison_pairs()),
        ("fixed point", fixed_point_orderings()),
        ("affine exactness", affine_exactness()),
        ("consistency", consistency_probes()),
    ];
    let elapsed = start.elapsed().as_secs_f64();
    let time_ok = elapsed < 120.0;
    let pass = time_ok && checks.iter().all(|(_, c)| c.pass);
    let detail = checks
        .iter()
        .map(|(name, c)| format!("{name}: {} {}", c.detail, verdict(c.pass)))
        .chain(std::iter::once(format!("runtime {elapsed:.1} s (< 120 s) {}", verdict(time_ok))))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(pass, detail)
}

fn monotonicity_pairs() -> Outcome {
    let mesh = Mesh::<f64>::square(16).unwrap();
    let nodes = classify_nodes(&mesh, &DomainDescriptor::square(), 0.25).unwrap();
    let dirs = build_circle_directions(0.5).unwrap();
    let table = build_stencils(&mesh, &nodes.interior, &dirs, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = mesh.num_nodes();
    let mut violations = 0;
    for _ in 0..1000 {
        let z = nodes.interior[rng.gen_range(0..nodes.interior.len())];
        let v_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w_vals: Vec<f64> = v_vals
            .iter()
            .enumerate()
            .map(|(k, &x)| if k == z { x } else { x - rng.gen_range(0.0..1.0) })
            .collect();
        let v = GridFunction::on_mesh(&mesh, v_vals).unwrap();
        let w = GridFunction::on_mesh(&mesh, w_vals).unwrap();
        let ok = s_plus(&table, &w, z).unwrap() <= s_plus(&table, &v, z).unwrap()
            && s_minus(&table, &w, z).unwrap() >= s_minus(&table, &v, z).unwrap()
            && -inf_laplacian(&table, &w, z).unwrap() >= -inf_laplacian(&table, &v, z).unwrap();
        if !ok {
            violations += 1;
        }
    }
    Outcome::new(violations == 0, format!("{violations} violations in 1000 pairs"))
}

fn smooth_problem(domain: DomainDescriptor<f64>, sign: f64, a: f64, k: f64, c: f64) -> ProblemSpec<f64> {
    ProblemSpec::new(
        "random",
        domain,
        field(move |p: Point64| sign * (1.0 + a * (k * p.x + p.y).sin().powi(2))),
        field(move |p: Point64| c + (k * p.y).cos() * p.x),
        ExtensionMode::Exact,
    )
}

fn stability_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for trial in 0..10 {
        let (mesh, domain) = if trial % 2 == 0 {
            (Mesh::square(14).unwrap(), DomainDescriptor::square())
        } else {
            (Mesh::disk(12).unwrap(), DomainDescriptor::unit_disk())
        };
        let sign = [-1.0, 0.0, 1.0][trial % 3];
        let problem = smooth_problem(domain.clone(), sign, rng.gen_range(0.0..2.0), rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0));
        let params = SchemeParams::for_mesh(&mesh, 0.3, 0.5).unwrap();
        let disc = discretize(&problem, &mesh, &params).unwrap();
        let report = disc.solve(&SolveOptions::default().with_tol(1e-9)).unwrap();
        let f_max = disc.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let g_max = disc.nodes.boundary.iter().fold(0.0f64, |m, &i| m.max(disc.g_tilde[i].abs()));
        let bound = 5.0 * domain.diameter * domain.diameter * f_max + g_max;
        ok &= report.converged && report.solution.max_abs() <= bound;
        worst = worst.max(report.solution.max_abs() / bound);
    }
    Outcome::new(ok, format!("10 solves, max |u|/bound = {worst:.3}"))
}

fn comparison_pairs() -> Outcome {
    let tol = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = Mesh::<f64>::square(14).unwrap();
    let params = SchemeParams::for_mesh(&mesh, 0.3, 0.5).unwrap();
    let g = field(|p: Point64| p.x * p.x - p.y);
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let (a, k, b, m): (f64, f64, f64, f64) =
            (rng.gen_range(0.0..2.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..2.0), rng.gen_range(0.5..3.0));
        let f2 = move |p: Point64| 1.0 + a * (k * p.x + p.y).sin().powi(2);
        let f1 = move |p: Point64| f2(p) + b * (1.0 + (m * p.x * p.y).cos());
        let solve = |f: ScalarFn| {
            let problem = ProblemSpec::new("pair", DomainDescriptor::square(), f, g.clone(), ExtensionMode::Exact);
            solve_dirichlet(&problem, &mesh, &params, &SolveOptions::default().with_tol(tol)).unwrap()
        };
        let u1 = solve(field(f1));
        let u2 = solve(field(f2));
        let gap = u1
            .solution
            .values()
            .iter()
            .zip(u2.solution.values())
            .map(|(x, y)| x - y)
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(gap);
    }
    Outcome::new(
        worst >= -2.0 * tol,
        format!("f1 >= f2 >= 1 gives min(u1 - u2) = {worst:.3e} (need >= -2 tol) over 10 pairs"),
    )
}

type ScalarFn = inflap::ScalarField<f64>;

fn fixed_point_orderings() -> Outcome {
    let tol = 1e-9;
    let mesh = Mesh::<f64>::square(14).unwrap();
    let params = SchemeParams::for_mesh(&mesh, 0.3, 0.5).unwrap();
    let mut ok = true;
    let mut gap: f64 = 0.0;
    for name in ["aronsson", "cone"] {
        let disc = discretize(&builtin_problem(name).unwrap(), &mesh, &params).unwrap();
        let down = disc.solve(&SolveOptions::default().with_tol(tol).with_init(Init::SupersolutionBarrier)).unwrap();
        let up = disc.solve(&SolveOptions::default().with_tol(tol).with_init(Init::SubsolutionBarrier)).unwrap();
        ok &= down.monotone_flag == Some(Monotonicity::Decreasing) && up.monotone_flag == Some(Monotonicity::Increasing);
        gap = gap.max(down.solution.max_abs_diff(up.solution.values()));
        let barrier = disc.barrier(BarrierSide::Super);
        ok &= barrier.values().iter().zip(down.solution.values()).all(|(b, u)| u <= b);
    }
    let problem = smooth_problem(DomainDescriptor::square(), 1.0, 1.0, 2.0, 0.0);
    let disc = discretize(&problem, &mesh, &params).unwrap();
    let down = disc.solve(&SolveOptions::default().with_tol(tol).with_init(Init::SupersolutionBarrier)).unwrap();
    let up = disc.solve(&SolveOptions::default().with_tol(tol).with_init(Init::SubsolutionBarrier)).unwrap();
    ok &= down.monotone_flag == Some(Monotonicity::Decreasing) && up.monotone_flag == Some(Monotonicity::Increasing);
    gap = gap.max(down.solution.max_abs_diff(up.solution.values()));
    let pass = ok && gap <= 2.0 * tol;
    Outcome::new(pass, format!("monotone iterates {ok}, limit gap {gap:.2e} (need <= 2 tol)"))
}

fn affine_exactness() -> Outcome {
    let problem = builtin_problem::<f64>("affine").unwrap();
    let exact = problem.exact_solution.clone().unwrap();
    let mut worst: f64 = 0.0;
    for (n, eps, theta) in [(8, 0.4, 1.0), (16, 0.25, 0.5), (24, 0.3, 0.2), (32, 0.15, 0.7), (20, 0.45, 0.05)] {
        let mesh = Mesh::<f64>::square(n).unwrap();
        let params = SchemeParams::for_mesh(&mesh, eps, theta).unwrap();
        let opts = SolveOptions::default().with_tol(1e-12).with_init(Init::ZeroFill);
        let report = solve_dirichlet(&problem, &mesh, &params, &opts).unwrap();
        for (p, u) in mesh.vertices().iter().zip(report.solution.values()) {
            worst = worst.max((u - exact(*p)).abs());
        }
    }
    Outcome::new(worst <= 1e-10, format!("max error {worst:.2e} over 5 (h, eps, theta)"))
}

fn consistency_probes() -> Outcome {
    let domain = DomainDescriptor::<f64>::square();
    let origin = Point64::default();
    let smooth = field(|p: Point64| p.x + 2.0 * p.y + p.x * p.x);
    let ladder = probe_ladder(0.25, 1.0 / 16.0, 1.0, 5);
    let probe = consistency_probe(&smooth, 0.4, origin, &domain, &ladder).unwrap();
    let slope = probe.slope.unwrap_or(f64::NAN);
    let slope_ok = slope >= 0.8;
    let bowl = field(|p: Point64| -0.5 * p.norm_squared());
    let ladder = probe_ladder(0.25, 1.0 / 8.0, 1.0, 3);
    let mut value_ok = true;
    let mut values = Vec::new();
    for (rung, params) in ladder.iter().enumerate() {
        // the probe reports |Δ − oracle|; with oracle 0 that is the value itself
        let d = consistency_probe(&bowl, 0.0, origin, &domain, &ladder[rung..=rung]).unwrap().discrepancies[0];
        let slack = 0.05 + (params.h / params.eps).powi(2);
        value_ok &= (d - 0.5).abs() <= slack;
        values.push(d);
    }
    Outcome::new(
        slope_ok && value_ok,
        format!(
            "x+2y+x^2 slope {slope:.3} (need >= 0.8) {}; -|x|^2/2 gives -Δ = {:?} (need 1/2 ± 0.05 + (h/eps)^2)",
            verdict(slope_ok),
            values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_5() -> Outcome {
    let tol = 1e-8;
    let mesh = Mesh::<f64>::square(64).unwrap();
    let params = SchemeParams::for_mesh(&mesh, 0.0625, 0.0442 / 0.0625).unwrap();
    let base = builtin_problem::<f64>("aronsson").unwrap();
    let opts = SolveOptions::default().with_tol(tol);
    let plain = solve_dirichlet(&base, &mesh, &params, &opts).unwrap();
    let low = solve_obstacle(&base.clone().with_constant_obstacle(-1e6), &mesh, &params, &opts).unwrap();
    let diff = plain.solution.max_abs_diff(low.solution.values());
    let low_ok = plain.converged && low.converged && diff <= 2.0 * tol;

    let problem = base.with_constant_obstacle(-0.1);
    let projected = opts.clone().with_obstacle_boundary(ObstacleBoundary::Project);
    let report = solve_obstacle(&problem, &mesh, &params, &projected).unwrap();
    let mut disc = discretize(&problem, &mesh, &params).unwrap();
    let above = report.solution.values().iter().all(|&u| u >= -0.1);
    for k in disc.nodes.boundary.clone() {
        disc.g_tilde[k] = disc.g_tilde[k].max(-0.1);
    }
    let residual = disc.residual(&report.solution).unwrap();
    let chi_ok = report.converged && above && residual <= tol;
    Outcome::new(
        low_ok && chi_ok,
        format!(
            "chi=-1e6 deviates by {diff:.2e} (need <= 2 tol) {}; chi=-0.1: u >= chi everywhere {above}, \
             complementarity residual {residual:.2e} (need <= tol) {}",
            verdict(low_ok),
            verdict(chi_ok)
        ),
    )
}

fn criterion_6() -> Outcome {
    let mesh = Mesh::<f64>::square(32).unwrap();
    let params = SchemeParams::for_mesh(&mesh, 0.125, 0.5).unwrap();
    let base = builtin_problem::<f64>("aronsson").unwrap();
    let opts = SolveOptions::default().with_tol(1e-9);
    let plain = solve_dirichlet(&base, &mesh, &params, &opts).unwrap();
    let finsler = solve_dirichlet(&base.with_finsler(FinslerNorm::euclidean()), &mesh, &params, &opts).unwrap();
    let identical = plain.iterations == finsler.iterations
        && plain
            .solution
            .values()
            .iter()
            .zip(finsler.solution.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let norm = FinslerNorm::<f64>::ellipse(1.0, 0.0, 4.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut symmetric = true;
    for theta in [1.0, 0.5, 0.2, 0.05] {
        let set = build_finsler_directions(&norm, theta).unwrap();
        symmetric &= set.is_symmetric();
        for &v in set.vectors() {
            worst = worst.max((norm.f_dual(v) - 1.0).abs());
        }
    }
    let ellipse_ok = worst <= 1e-12 && symmetric;
    Outcome::new(
        identical && ellipse_ok,
        format!(
            "euclidean norm path bit-identical {identical}; ellipse diag(1,4) max |F*(v) - 1| = {worst:.2e}, symmetric {symmetric} {}",
            verdict(ellipse_ok)
        ),
    )
}

fn criterion_7() -> Outcome {
    let affine = builtin_problem::<f64>("affine").unwrap();
    let cloud = build_lattice_cloud(&affine.domain, 0.0625).unwrap();
    let opts = SolveOptions::default().with_tol(1e-11).with_init(Init::ZeroFill);
    let report = solve_cloud(&affine, &cloud, 0.2, &opts).unwrap();
    let exact = affine.exact_solution.clone().unwrap();
    let affine_err = cloud
        .points()
        .iter()
        .zip(report.solution.values())
        .map(|(p, u)| (u - exact(*p)).abs())
        .fold(0.0, f64::max);
    let affine_ok = report.converged && affine_err <= 1e-10;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..60);
        let pts: Vec<Point64> = (0..n).map(|_| Point64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let eps = rng.gen_range(0.05..0.6);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        if check_connectivity(&cloud, eps) == union_find_connected(&pts, eps) {
            agree += 1;
        }
    }
    let uf_ok = agree == 100;

    let parab = builtin_problem::<f64>("paraboloid").unwrap();
    let exact = parab.exact_solution.clone().unwrap();
    let mut errors = Vec::new();
    let mut converged = true;
    for (spacing, eps) in [(0.03125, 0.125), (0.015625, 0.0625)] {
        let cloud = build_lattice_cloud(&parab.domain, spacing).unwrap();
        let report = solve_cloud(&parab, &cloud, eps, &SolveOptions::default().with_tol(1e-8)).unwrap();
        converged &= report.converged;
        errors.push(
            cloud
                .points()
                .iter()
                .zip(report.solution.values())
                .map(|(p, u)| (u - exact(*p)).abs())
                .fold(0.0, f64::max),
        );
    }
    let decrease_ok = converged && errors[1] < errors[0];
    Outcome::new(
        affine_ok && uf_ok && decrease_ok,
        format!(
            "affine error {affine_err:.2e} (need <= 1e-10) {}; union-find agreement {agree}/100 {}; \
             paraboloid errors [{:.3e}, {:.3e}] {}",
            verdict(affine_ok),
            verdict(uf_ok),
            errors[0],
            errors[1],
            verdict(decrease_ok)
        ),
    )
}

fn union_find_connected(points: &[Point64], eps: f64) -> bool {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].distance(points[j]) <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let root = find(&mut parent, 0);
    (0..points.len()).all(|k| find(&mut parent, k) == root)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "[ok]"
    } else {
        "[miss]"
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |k: usize| selected.is_empty() || selected.contains(&k);
    let strict = std::env::var("INFLAP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let needs_exact = wanted(1) || wanted(3);
    let exact_third = needs_exact.then(|| study("aronsson", 1.0 / 3.0, ExtensionMode::Exact));

    let mut results = Vec::new();
    let mut run = |k: usize, title: &str, f: &dyn Fn() -> Outcome| {
        if wanted(k) {
            let start = Instant::now();
            let outcome = f();
            let status = if outcome.pass { "PASS" } else { "FAIL" };
            println!(
                "criterion {k} {status} {title} ({:.0} s): {}",
                start.elapsed().as_secs_f64(),
                outcome.detail
            );
            results.push(outcome.pass);
        }
    };
    run(1, "aronsson study, exact boundary", &|| criterion_1(exact_third.as_ref().unwrap()));
    run(2, "paraboloid study", &criterion_2);
    run(3, "aronsson study, inexact boundary", &|| criterion_3(exact_third.as_ref().unwrap()));
    run(4, "property suite", &criterion_4);
    run(5, "obstacle", &criterion_5);
    run(6, "finsler", &criterion_6);
    run(7, "point cloud", &criterion_7);

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
