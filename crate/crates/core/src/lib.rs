//! Two-scale monotone finite element discretization of the normalized
//! infinity Laplacian on planar domains.
//!
//! A discrete solution lives on the nodes of a simplicial mesh (or of a
//! point cloud). At each interior node the operator compares the nodal value
//! with the extrema of the piecewise linear interpolant over a sphere of
//! radius `ε` sampled along a direction set of angular resolution `θ`. The
//! resulting monotone system is solved by a Jacobi style fixed point
//! iteration that converges from any initial guess.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common choice.
//!
//! ```
//! use inflap::problems::builtin_problem;
//! use inflap::scheme::SchemeParams;
//! use inflap::solver::{solve_dirichlet, SolveOptions};
//! use inflap::Mesh64;
//!
//! let problem = builtin_problem::<f64>("affine").unwrap();
//! let mesh = Mesh64::square(16).unwrap();
//! let params = SchemeParams::for_mesh(&mesh, 0.25, 0.5).unwrap();
//! let opts = SolveOptions::default().with_tol(1e-10);
//! let report = solve_dirichlet(&problem, &mesh, &params, &opts).unwrap();
//! assert!(report.converged);
//! ```

pub mod cloud;
pub mod directions;
pub mod error;
pub mod geometry;
pub mod problems;
pub mod real;
pub mod scheme;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
pub use real::{field, Point2, Real, ScalarField};

pub type Point64 = Point2<f64>;
pub type Point32 = Point2<f32>;
pub type Mesh64 = geometry::Mesh<f64>;
pub type Mesh32 = geometry::Mesh<f32>;
pub type Domain64 = geometry::DomainDescriptor<f64>;
pub type Domain32 = geometry::DomainDescriptor<f32>;
pub type DirectionSet64 = directions::DirectionSet<f64>;
pub type DirectionSet32 = directions::DirectionSet<f32>;
pub type FinslerNorm64 = directions::FinslerNorm<f64>;
pub type FinslerNorm32 = directions::FinslerNorm<f32>;
pub type SchemeParams64 = scheme::SchemeParams<f64>;
pub type SchemeParams32 = scheme::SchemeParams<f32>;
pub type GridFunction64 = scheme::GridFunction<f64>;
pub type GridFunction32 = scheme::GridFunction<f32>;
pub type Problem64 = problems::ProblemSpec<f64>;
pub type Problem32 = problems::ProblemSpec<f32>;
pub type SolveOptions64 = solver::SolveOptions<f64>;
pub type SolveOptions32 = solver::SolveOptions<f32>;
pub type SolveReport64 = solver::SolveReport<f64>;
pub type SolveReport32 = solver::SolveReport<f32>;
pub type PointCloud64 = cloud::PointCloud<f64>;
pub type PointCloud32 = cloud::PointCloud<f32>;
pub type StudySpec64 = study::StudySpec<f64>;
pub type StudySpec32 = study::StudySpec<f32>;
