//! Problem data: right-hand side, boundary datum and its extension to the
//! boundary layer, optional exact solution, obstacle and anisotropic norm.

use std::fmt;
use std::str::FromStr;

use crate::directions::FinslerNorm;
use crate::error::{Error, Result};
use crate::geometry::{DomainDescriptor, DomainKind};
use crate::real::{field, Point2, Real, ScalarField};

/// How the boundary datum is extended into the layer of non-interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionMode {
    /// `g` is defined on the closed domain and used as is.
    Exact,
    /// Square only: `g(x / ‖x‖∞)`.
    LinfRadial,
    /// Unit disk only: `g(x / |x|)`.
    ClosestPoint,
}

impl FromStr for ExtensionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" => Ok(Self::Exact),
            "linf_radial" | "linf" => Ok(Self::LinfRadial),
            "closest_point" | "closest" => Ok(Self::ClosestPoint),
            other => Err(Error::InvalidArgument(format!("unknown extension mode `{other}`"))),
        }
    }
}

impl fmt::Display for ExtensionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::LinfRadial => "linf_radial",
            Self::ClosestPoint => "closest_point",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsClass {
    StrictlyPositive,
    StrictlyNegative,
    IdenticallyZero,
    Other,
}

impl RhsClass {
    /// Classifies sampled values of `f`.
    pub fn of_samples<T: Real>(values: impl IntoIterator<Item = T>) -> Self {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > T::zero() {
            Self::StrictlyPositive
        } else if hi < T::zero() {
            Self::StrictlyNegative
        } else if lo == T::zero() && hi == T::zero() {
            Self::IdenticallyZero
        } else {
            Self::Other
        }
    }

    pub fn is_homogeneous(self) -> bool {
        self == Self::IdenticallyZero
    }
}

/// A boundary value problem for the normalized infinity Laplacian.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub name: String,
    pub domain: DomainDescriptor<T>,
    pub rhs: ScalarField<T>,
    pub boundary: ScalarField<T>,
    pub extension: ExtensionMode,
    pub exact_solution: Option<ScalarField<T>>,
    pub obstacle: Option<ScalarField<T>>,
    pub finsler: Option<FinslerNorm<T>>,
    pub rhs_class: RhsClass,
    /// Hölder exponent of the solution, consumed by rate predictions.
    pub holder_alpha: f64,
}

impl<T: fmt::Debug> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("extension", &self.extension)
            .field("has_exact", &self.exact_solution.is_some())
            .field("has_obstacle", &self.obstacle.is_some())
            .field("finsler", &self.finsler)
            .field("rhs_class", &self.rhs_class)
            .field("holder_alpha", &self.holder_alpha)
            .finish()
    }
}

pub const BUILTIN_PROBLEMS: [&str; 4] = ["aronsson", "paraboloid", "affine", "cone"];

/// Samples per axis of the bounding-box grid used for data checks.
const SAMPLE_AXIS: usize = 32;

impl<T: Real> ProblemSpec<T> {
    /// A custom problem; `rhs_class` is inferred from samples of `rhs`.
    pub fn new(
        name: impl Into<String>,
        domain: DomainDescriptor<T>,
        rhs: ScalarField<T>,
        boundary: ScalarField<T>,
        extension: ExtensionMode,
    ) -> Self {
        let mut spec = Self {
            name: name.into(),
            domain,
            rhs,
            boundary,
            extension,
            exact_solution: None,
            obstacle: None,
            finsler: None,
            rhs_class: RhsClass::Other,
            holder_alpha: 1.0,
        };
        spec.rhs_class = RhsClass::of_samples(spec.sample_points().into_iter().map(|p| (spec.rhs)(p)));
        spec
    }

    pub fn with_exact_solution(mut self, u: ScalarField<T>) -> Self {
        self.exact_solution = Some(u);
        self
    }

    pub fn with_obstacle(mut self, chi: ScalarField<T>) -> Self {
        self.obstacle = Some(chi);
        self
    }

    /// Constant obstacle `χ ≡ level`.
    pub fn with_constant_obstacle(self, level: T) -> Self {
        self.with_obstacle(field(move |_| level))
    }

    pub fn with_finsler(mut self, norm: FinslerNorm<T>) -> Self {
        self.finsler = Some(norm);
        self
    }

    pub fn with_extension(mut self, mode: ExtensionMode) -> Self {
        self.extension = mode;
        self
    }

    pub fn with_holder_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    /// Points of a regular grid over the bounding box that lie in the
    /// closed domain (about 10³ for the built-in domains).
    pub fn sample_points(&self) -> Vec<Point2<T>> {
        let (lo, hi) = self.domain.bbox;
        let n = SAMPLE_AXIS;
        let t = |k: usize| T::from_usize_lossy(k) / T::from_usize_lossy(n - 1);
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = Point2::new(lo.x + (hi.x - lo.x) * t(i), lo.y + (hi.y - lo.y) * t(j));
                if self.domain.distance_to_boundary(p) >= T::zero() {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Checks the declared right-hand-side class against samples and,
    /// when an obstacle is present, `χ < g` on sampled boundary points.
    pub fn validate(&self) -> Result<()> {
        let observed = RhsClass::of_samples(self.sample_points().into_iter().map(|p| (self.rhs)(p)));
        let consistent = match self.rhs_class {
            RhsClass::Other => true,
            declared => declared == observed,
        };
        if !consistent {
            return Err(Error::InvalidArgument(format!(
                "problem `{}` declares rhs class {:?} but samples give {:?}",
                self.name, self.rhs_class, observed
            )));
        }
        if let (Some(chi), Some(samples)) = (&self.obstacle, self.domain.boundary_samples(256)) {
            for (node, p) in samples.into_iter().enumerate() {
                let (c, g) = (chi(p), (self.boundary)(p));
                if !(c < g) {
                    return Err(Error::InadmissibleObstacle {
                        node,
                        chi: c.as_f64(),
                        g: g.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The extended boundary datum `g̃_ε` on the closed domain.
pub fn extend_boundary<T: Real>(problem: &ProblemSpec<T>, _eps: T) -> Result<ScalarField<T>> {
    let g = problem.boundary.clone();
    match (problem.extension, problem.domain.kind) {
        (ExtensionMode::Exact, _) => Ok(g),
        (ExtensionMode::LinfRadial, DomainKind::Square) => Ok(field(move |p: Point2<T>| {
            let r = p.norm_max();
            if r == T::zero() {
                g(Point2::new(T::one(), T::zero()))
            } else {
                g(p * (T::one() / r))
            }
        })),
        (ExtensionMode::ClosestPoint, DomainKind::UnitDisk) => Ok(field(move |p: Point2<T>| {
            let r = p.norm();
            if r == T::zero() {
                g(Point2::new(T::one(), T::zero()))
            } else {
                g(Point2::new(p.x / r, p.y / r))
            }
        })),
        (mode, kind) => Err(Error::ExtensionUnavailable(format!(
            "{mode} extension is not available on a {kind:?} domain"
        ))),
    }
}

/// The built-in test problems: `aronsson`, `paraboloid`, `affine`, `cone`.
pub fn builtin_problem<T: Real>(name: &str) -> Result<ProblemSpec<T>> {
    let zero = || field(|_: Point2<T>| T::zero());
    let (domain, rhs, u, class): (_, _, ScalarField<T>, _) = match name {
        "aronsson" => {
            let e = T::lit(4.0 / 3.0);
            (
                DomainDescriptor::square(),
                zero(),
                field(move |p: Point2<T>| p.x.abs().powf(e) - p.y.abs().powf(e)),
                RhsClass::IdenticallyZero,
            )
        }
        "paraboloid" => (
            DomainDescriptor::unit_disk(),
            field(|_: Point2<T>| T::one()),
            field(|p: Point2<T>| (T::one() - p.x * p.x) / T::lit(2.0)),
            RhsClass::StrictlyPositive,
        ),
        "affine" => (
            DomainDescriptor::square(),
            zero(),
            field(|p: Point2<T>| T::lit(3.0) * p.x - T::lit(2.0) * p.y + T::one()),
            RhsClass::IdenticallyZero,
        ),
        "cone" => {
            let vertex = Point2::new(T::lit(3.0), T::zero());
            (
                DomainDescriptor::square(),
                zero(),
                field(move |p: Point2<T>| (p - vertex).norm()),
                RhsClass::IdenticallyZero,
            )
        }
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(ProblemSpec {
        name: name.to_string(),
        domain,
        rhs,
        boundary: u.clone(),
        extension: ExtensionMode::Exact,
        exact_solution: Some(u),
        obstacle: None,
        finsler: None,
        rhs_class: class,
        holder_alpha: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_PROBLEMS {
            let p = builtin_problem::<f64>(name).unwrap();
            p.validate().unwrap();
            assert_eq!(p.holder_alpha, 1.0);
        }
        assert_eq!(builtin_problem::<f64>("aronsson").unwrap().rhs_class, RhsClass::IdenticallyZero);
        assert_eq!(
            builtin_problem::<f64>("paraboloid").unwrap().rhs_class,
            RhsClass::StrictlyPositive
        );
        assert!(matches!(builtin_problem::<f64>("nope"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn extensions() {
        let aronsson = builtin_problem::<f64>("aronsson").unwrap();
        let g = extend_boundary(&aronsson, 0.1).unwrap();
        let u = aronsson.exact_solution.clone().unwrap();
        for p in aronsson.sample_points() {
            assert_eq!(g(p), u(p));
        }

        let radial = aronsson.clone().with_extension(ExtensionMode::LinfRadial);
        let g = extend_boundary(&radial, 0.1).unwrap();
        assert_eq!(g(Point2::new(0.5, 0.25)), u(Point2::new(1.0, 0.5)));
        assert_eq!(g(Point2::default()), u(Point2::new(1.0, 0.0)));

        let disk = builtin_problem::<f64>("paraboloid")
            .unwrap()
            .with_extension(ExtensionMode::ClosestPoint);
        let g = extend_boundary(&disk, 0.1).unwrap();
        let u = disk.exact_solution.clone().unwrap();
        assert!((g(Point2::new(0.3, 0.4)) - u(Point2::new(0.6, 0.8))).abs() < 1e-15);

        assert!(matches!(
            extend_boundary(&radial.clone().with_extension(ExtensionMode::ClosestPoint), 0.1),
            Err(Error::ExtensionUnavailable(_))
        ));
        let disk_linf = disk.with_extension(ExtensionMode::LinfRadial);
        assert!(matches!(extend_boundary(&disk_linf, 0.1), Err(Error::ExtensionUnavailable(_))));
    }

    #[test]
    fn extensions_agree_with_g_on_the_boundary() {
        for (name, mode) in [
            ("aronsson", ExtensionMode::LinfRadial),
            ("cone", ExtensionMode::LinfRadial),
            ("paraboloid", ExtensionMode::ClosestPoint),
            ("aronsson", ExtensionMode::Exact),
        ] {
            let p = builtin_problem::<f64>(name).unwrap().with_extension(mode);
            let g = extend_boundary(&p, 0.05).unwrap();
            for x in p.domain.boundary_samples(400).unwrap() {
                assert!((g(x) - (p.boundary)(x)).abs() <= 1e-12, "{name} {mode} at {x}");
            }
        }
    }

    #[test]
    fn aronsson_exact_solution_is_the_boundary_datum() {
        let p = builtin_problem::<f64>("aronsson").unwrap();
        let u = p.exact_solution.clone().unwrap();
        for x in p.domain.boundary_samples(100).unwrap() {
            assert_eq!(u(x), (p.boundary)(x));
        }
    }

    #[test]
    fn cone_is_distance_to_vertex() {
        let p = builtin_problem::<f64>("cone").unwrap();
        let u = p.exact_solution.unwrap();
        for k in 0..16 {
            let t = k as f64 * 0.3;
            let r = 0.5 + 0.1 * k as f64;
            let x = Point2::new(3.0 + r * t.cos(), r * t.sin());
            assert!((u(x) - r).abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_class_mismatch_and_obstacle_admissibility() {
        let mut p = builtin_problem::<f64>("aronsson").unwrap();
        p.rhs = field(|q: Point2<f64>| q.x);
        assert!(p.validate().is_err());
        assert_eq!(RhsClass::of_samples([1.0, -1.0]), RhsClass::Other);
        assert_eq!(RhsClass::of_samples([-2.0, -1.0]), RhsClass::StrictlyNegative);

        let affine = builtin_problem::<f64>("affine").unwrap();
        let g = affine.boundary.clone();
        let bad = affine.clone().with_obstacle(field(move |q| g(q) + 1.0));
        assert!(matches!(bad.validate(), Err(Error::InadmissibleObstacle { .. })));
        affine.with_constant_obstacle(-1e6).validate().unwrap();
    }

    #[test]
    fn custom_problem_infers_class() {
        let p = ProblemSpec::<f64>::new(
            "bump",
            DomainDescriptor::unit_disk(),
            field(|q: Point2<f64>| 2.0 + q.x),
            field(|_| 0.0),
            ExtensionMode::Exact,
        );
        assert_eq!(p.rhs_class, RhsClass::StrictlyPositive);
        assert!(p.sample_points().len() > 700);
        assert!("linf-radial".parse::<ExtensionMode>().unwrap() == ExtensionMode::LinfRadial);
    }
}
