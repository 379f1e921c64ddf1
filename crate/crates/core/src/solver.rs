//! The globally convergent Jacobi fixed-point iteration for the Dirichlet
//! and obstacle problems, residuals and barrier initializations.

use std::time::Instant;

use rayon::prelude::*;

use crate::directions::{build_circle_directions, build_finsler_directions, DirectionSet, NormKind};
use crate::error::{Error, Result};
use crate::geometry::{classify_nodes_with_reach, DomainDescriptor, Mesh, NodeClassification};
use crate::problems::{extend_boundary, ProblemSpec};
use crate::real::{Point2, Real};
use crate::scheme::{build_stencils, GridFunction, MaxMinStencil, SchemeParams, StencilTable};

/// Sweeps between non-finite checks.
pub const NAN_GUARD_PERIOD: usize = 64;

/// Starting iterate of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<T> {
    /// `g̃_ε` evaluated at every node.
    BoundaryFill,
    /// Zero at interior nodes.
    ZeroFill,
    Given(GridFunction<T>),
    SupersolutionBarrier,
    SubsolutionBarrier,
}

/// Treatment of boundary nodes where the obstacle is not below `g̃_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObstacleBoundary {
    /// Refuse with [`Error::InadmissibleObstacle`].
    #[default]
    Strict,
    /// Pin boundary nodes to `max(g̃_ε, χ)`.
    Project,
    /// Keep `g̃_ε` on the boundary layer; `χ` acts at interior nodes only.
    Keep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions<T> {
    pub tol: T,
    /// Defaults to `200·(diam/ε)²`.
    pub max_iters: Option<usize>,
    pub init: Init<T>,
    pub parallel_sweep: bool,
    pub obstacle_boundary: ObstacleBoundary,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iters: None,
            init: Init::BoundaryFill,
            parallel_sweep: true,
            obstacle_boundary: ObstacleBoundary::Strict,
        }
    }
}

impl<T: Real> SolveOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Init<T>) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel_sweep = parallel;
        self
    }

    pub fn with_obstacle_boundary(mut self, mode: ObstacleBoundary) -> Self {
        self.obstacle_boundary = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Decreasing,
    Increasing,
    /// The expected ordering was violated at some sweep.
    None,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub solution: GridFunction<T>,
    pub iterations: usize,
    pub final_residual: T,
    pub converged: bool,
    pub wall_seconds: f64,
    /// Observed ordering of the iterates, when started from a barrier.
    pub monotone_flag: Option<Monotonicity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierSide {
    Super,
    Sub,
}

/// Everything the iteration needs, assembled once: node classification,
/// stencils, and the nodal data `g̃_ε`, `f` and `χ`.
#[derive(Debug, Clone)]
pub struct Discretization<T, S> {
    pub owner: u64,
    pub points: Vec<Point2<T>>,
    pub nodes: NodeClassification,
    pub stencil: S,
    pub eps: T,
    pub domain: DomainDescriptor<T>,
    pub g_tilde: Vec<T>,
    pub rhs: Vec<T>,
    pub obstacle: Option<Vec<T>>,
}

pub type MeshDiscretization<T> = Discretization<T, StencilTable<T>>;

/// The direction set a problem calls for: Euclidean, or on `{F* = 1}`
/// when a Finsler norm is attached.
pub fn problem_directions<T: Real>(problem: &ProblemSpec<T>, theta: T) -> Result<DirectionSet<T>> {
    match &problem.finsler {
        Some(norm) => build_finsler_directions(norm, theta),
        None => build_circle_directions(theta),
    }
}

/// Classifies nodes, builds stencils and samples the problem data.
pub fn discretize<T: Real>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh<T>,
    params: &SchemeParams<T>,
) -> Result<MeshDiscretization<T>> {
    params.validate_for(&problem.domain)?;
    let dirs = problem_directions(problem, params.theta)?;
    let reach = match &problem.finsler {
        Some(norm) if norm.kind != NormKind::Euclidean => dirs.reach().max(T::one()),
        _ => T::one(),
    };
    let nodes = classify_nodes_with_reach(mesh, &problem.domain, params.eps, reach)?;
    let stencil = build_stencils(mesh, &nodes.interior, &dirs, params.eps)?;
    Discretization::assemble(problem, mesh.id(), mesh.vertices().to_vec(), nodes, stencil, params.eps)
}

impl<T: Real, S: MaxMinStencil<T>> Discretization<T, S> {
    pub(crate) fn assemble(
        problem: &ProblemSpec<T>,
        owner: u64,
        points: Vec<Point2<T>>,
        nodes: NodeClassification,
        stencil: S,
        eps: T,
    ) -> Result<Self> {
        let g = extend_boundary(problem, eps)?;
        let g_tilde = points.iter().map(|&p| g(p)).collect();
        let rhs = points.iter().map(|&p| (problem.rhs)(p)).collect();
        let obstacle = problem
            .obstacle
            .as_ref()
            .map(|chi| points.iter().map(|&p| chi(p)).collect());
        Ok(Self {
            owner,
            points,
            nodes,
            stencil,
            eps,
            domain: problem.domain.clone(),
            g_tilde,
            rhs,
            obstacle,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.points.len()
    }

    /// ℓ∞ norm over interior nodes of `−Δw − f`, or of the obstacle
    /// residual `min{−Δw − f, w − χ}` when an obstacle is present.
    pub fn residual(&self, w: &GridFunction<T>) -> Result<T> {
        self.stencil.check_owner(w)?;
        if w.len() != self.num_nodes() {
            return Err(Error::GridMismatch);
        }
        let u = w.values();
        let eps2 = self.eps * self.eps;
        let mut worst = T::zero();
        for (row, &z) in self.stencil.centers().iter().enumerate() {
            let (hi, lo) = self.stencil.extrema(row, u);
            let pde = -(hi + lo - (u[z] + u[z])) / eps2 - self.rhs[z];
            let r = match &self.obstacle {
                Some(chi) => pde.min(u[z] - chi[z]),
                None => pde,
            };
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    /// The stability barrier `±‖f‖∞·φ + max/min g̃_ε`, with
    /// `φ(x) = pᵀ(x − c) − ½|x − c|² + A`, `|p| = 2D`, `A = 2.5D²`.
    pub fn barrier(&self, side: BarrierSide) -> GridFunction<T> {
        let d = self.domain.diameter;
        let c = self.domain.center;
        let p = Point2::new(T::lit(2.0) * d, T::zero());
        let a = T::lit(2.5) * d * d;
        let f_max = self.rhs.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        let boundary = self.nodes.boundary.iter().map(|&k| self.g_tilde[k]);
        let (sign, level) = match side {
            BarrierSide::Super => (T::one(), boundary.fold(T::neg_infinity(), T::max)),
            BarrierSide::Sub => (-T::one(), boundary.fold(T::infinity(), T::min)),
        };
        let values = self
            .points
            .iter()
            .map(|&x| {
                let y = x - c;
                let phi = p.dot(y) - y.norm_squared() / T::lit(2.0) + a;
                sign * f_max * phi + level
            })
            .collect();
        GridFunction::new(self.owner, values)
    }

    fn initial_values(&self, init: &Init<T>) -> Result<Vec<T>> {
        let mut u = match init {
            Init::BoundaryFill => self.g_tilde.clone(),
            Init::ZeroFill => vec![T::zero(); self.num_nodes()],
            Init::Given(w) => {
                self.stencil.check_owner(w)?;
                if w.len() != self.num_nodes() {
                    return Err(Error::GridMismatch);
                }
                w.values().to_vec()
            }
            Init::SupersolutionBarrier => self.barrier(BarrierSide::Super).into_values(),
            Init::SubsolutionBarrier => self.barrier(BarrierSide::Sub).into_values(),
        };
        for &k in &self.nodes.boundary {
            u[k] = self.g_tilde[k];
        }
        Ok(u)
    }

    /// Runs the fixed-point iteration on this discretization.
    pub fn solve(&self, opts: &SolveOptions<T>) -> Result<SolveReport<T>> {
        opts.validate()?;
        let start = Instant::now();
        let init = self.initial_values(&opts.init)?;
        let expected = match opts.init {
            Init::SupersolutionBarrier => Some(Monotonicity::Decreasing),
            Init::SubsolutionBarrier => Some(Monotonicity::Increasing),
            _ => None,
        };
        let max_iters = opts.max_iters.unwrap_or_else(|| default_max_iters(self.domain.diameter, self.eps));
        let mut it = FixedPointIteration::new(
            &self.stencil,
            &self.rhs,
            self.obstacle.as_deref(),
            init,
            opts.parallel_sweep,
        );
        let mut flag = expected;
        let (converged, residual) = loop {
            if it.iterations() % NAN_GUARD_PERIOD == 0 && !it.current().iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalBreakdown {
                    iteration: it.iterations(),
                });
            }
            let r = it.evaluate();
            if r.is_nan() {
                return Err(Error::NumericalBreakdown {
                    iteration: it.iterations(),
                });
            }
            if r < opts.tol {
                break (true, r);
            }
            if it.iterations() >= max_iters {
                log::warn!(
                    "fixed-point iteration stopped at max_iters = {max_iters} with residual {r}"
                );
                break (false, r);
            }
            let change = it.commit();
            if let Some(expect) = flag {
                if !change.agrees_with(expect, it.scale()) {
                    flag = Some(Monotonicity::None);
                }
            }
        };
        let iterations = it.iterations();
        Ok(SolveReport {
            solution: GridFunction::new(self.owner, it.into_values()),
            iterations,
            final_residual: residual,
            converged,
            wall_seconds: start.elapsed().as_secs_f64(),
            monotone_flag: flag,
        })
    }
}

/// `200·(diam/ε)²`.
pub fn default_max_iters<T: Real>(diameter: T, eps: T) -> usize {
    let ratio = (diameter / eps).as_f64();
    (200.0 * ratio * ratio).ceil().min(usize::MAX as f64) as usize
}

/// Largest upward and downward nodal moves of one committed sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepChange<T> {
    pub max_increase: T,
    pub max_decrease: T,
}

impl<T: Real> SweepChange<T> {
    /// Whether the sweep moved in the `expect` direction only, up to
    /// round-off relative to `scale`.
    pub fn agrees_with(&self, expect: Monotonicity, scale: T) -> bool {
        let slack = T::lit(64.0) * T::epsilon() * (T::one() + scale);
        match expect {
            Monotonicity::Decreasing => self.max_increase <= slack,
            Monotonicity::Increasing => self.max_decrease <= slack,
            Monotonicity::None => true,
        }
    }
}

/// Jacobi iteration `u ← ½[ε²f + max_N u + min_N u]` at stencil centers
/// (followed by `max{χ, ·}` with an obstacle); other nodes stay fixed.
///
/// [`evaluate`](Self::evaluate) computes the next iterate and the residual
/// of the current one; [`commit`](Self::commit) makes the next iterate
/// current.
pub struct FixedPointIteration<'a, T: Real, S: MaxMinStencil<T>> {
    stencil: &'a S,
    eps2_f: Vec<T>,
    f: Vec<T>,
    chi: Option<Vec<T>>,
    current: Vec<T>,
    next_rows: Vec<T>,
    parallel: bool,
    iterations: usize,
}

/// Rows per rayon task.
const MIN_ROWS_PER_TASK: usize = 512;

impl<'a, T: Real, S: MaxMinStencil<T>> FixedPointIteration<'a, T, S> {
    /// `rhs` and `obstacle` are nodal arrays; `init` is the full iterate,
    /// whose non-center entries act as boundary values.
    pub fn new(stencil: &'a S, rhs: &[T], obstacle: Option<&[T]>, init: Vec<T>, parallel: bool) -> Self {
        let eps = stencil.eps();
        let centers = stencil.centers();
        let f: Vec<T> = centers.iter().map(|&z| rhs[z]).collect();
        Self {
            stencil,
            eps2_f: f.iter().map(|&v| eps * eps * v).collect(),
            f,
            chi: obstacle.map(|chi| centers.iter().map(|&z| chi[z]).collect()),
            current: init,
            next_rows: vec![T::zero(); centers.len()],
            parallel,
            iterations: 0,
        }
    }

    #[inline]
    pub fn current(&self) -> &[T] {
        &self.current
    }

    pub fn into_values(self) -> Vec<T> {
        self.current
    }

    /// Number of committed sweeps.
    #[inline]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn scale(&self) -> T {
        self.current.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }

    /// Fills the next iterate and returns the ℓ∞ residual of the current one.
    pub fn evaluate(&mut self) -> T {
        let stencil = self.stencil;
        let u = &self.current[..];
        let eps2 = stencil.eps() * stencil.eps();
        let two = T::lit(2.0);
        let eps2_f = &self.eps2_f;
        let f = &self.f;
        let chi = self.chi.as_deref();
        let centers = stencil.centers();
        let update = |row: usize, out: &mut T| -> T {
            let (hi, lo) = stencil.extrema(row, u);
            let z = u[centers[row]];
            let half = (eps2_f[row] + hi + lo) / two;
            let pde = -(hi + lo - (z + z)) / eps2 - f[row];
            match chi {
                Some(chi) => {
                    *out = half.max(chi[row]);
                    pde.min(z - chi[row]).abs()
                }
                None => {
                    *out = half;
                    pde.abs()
                }
            }
        };
        if self.parallel {
            self.next_rows
                .par_iter_mut()
                .with_min_len(MIN_ROWS_PER_TASK)
                .enumerate()
                .map(|(row, out)| update(row, out))
                .reduce(T::zero, max_keep_nan)
        } else {
            self.next_rows
                .iter_mut()
                .enumerate()
                .map(|(row, out)| update(row, out))
                .fold(T::zero(), max_keep_nan)
        }
    }

    /// Makes the iterate computed by the last [`evaluate`](Self::evaluate)
    /// current.
    pub fn commit(&mut self) -> SweepChange<T> {
        let mut change = SweepChange {
            max_increase: T::zero(),
            max_decrease: T::zero(),
        };
        for (&z, &new) in self.stencil.centers().iter().zip(&self.next_rows) {
            let old = self.current[z];
            change.max_increase = change.max_increase.max(new - old);
            change.max_decrease = change.max_decrease.max(old - new);
            self.current[z] = new;
        }
        self.iterations += 1;
        change
    }

    /// `evaluate` followed by `commit`; returns the pre-sweep residual.
    pub fn step(&mut self) -> (T, SweepChange<T>) {
        let r = self.evaluate();
        (r, self.commit())
    }
}

#[inline]
fn max_keep_nan<T: Real>(a: T, b: T) -> T {
    if a.is_nan() || b.is_nan() {
        T::nan()
    } else {
        a.max(b)
    }
}

/// Solves the Dirichlet problem (any obstacle on `problem` is ignored).
pub fn solve_dirichlet<T: Real>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh<T>,
    params: &SchemeParams<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    opts.validate()?;
    let mut disc = discretize(problem, mesh, params)?;
    disc.obstacle = None;
    disc.solve(opts)
}

/// Solves `min{−Δu − f, u − χ} = 0` with `u = g̃_ε` on the boundary layer.
pub fn solve_obstacle<T: Real>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh<T>,
    params: &SchemeParams<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    if problem.obstacle.is_none() {
        return Err(Error::ObstacleRequired);
    }
    opts.validate()?;
    let mut disc = discretize(problem, mesh, params)?;
    apply_obstacle_boundary(&mut disc, opts.obstacle_boundary)?;
    disc.solve(opts)
}

pub(crate) fn apply_obstacle_boundary<T: Real, S>(
    disc: &mut Discretization<T, S>,
    mode: ObstacleBoundary,
) -> Result<()> {
    let Some(chi) = &disc.obstacle else {
        return Err(Error::ObstacleRequired);
    };
    for &k in &disc.nodes.boundary {
        let g = disc.g_tilde[k];
        if chi[k] >= g {
            match mode {
                ObstacleBoundary::Strict => {
                    return Err(Error::InadmissibleObstacle {
                        node: k,
                        chi: chi[k].as_f64(),
                        g: g.as_f64(),
                    })
                }
                ObstacleBoundary::Project => disc.g_tilde[k] = chi[k],
                ObstacleBoundary::Keep => {}
            }
        }
    }
    Ok(())
}

/// ℓ∞ residual of `w` over interior nodes (obstacle residual if the
/// problem has an obstacle).
pub fn residual_linf<T: Real>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh<T>,
    params: &SchemeParams<T>,
    w: &GridFunction<T>,
) -> Result<T> {
    discretize(problem, mesh, params)?.residual(w)
}

/// Discrete super- or subsolution used as a monotone starting point.
pub fn make_barrier_init<T: Real>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh<T>,
    params: &SchemeParams<T>,
    side: BarrierSide,
) -> Result<GridFunction<T>> {
    Ok(discretize(problem, mesh, params)?.barrier(side))
}
