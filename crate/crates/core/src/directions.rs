//! Finite symmetric direction sets covering the unit sphere of the
//! Euclidean norm or of the dual of a symmetric Finsler norm.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::real::{field, Point2, Real, ScalarField};

/// Probes used when certifying a covering during construction.
pub const COVERING_PROBES: usize = 100_000;

/// Refinements tried by [`build_finsler_directions`] after the first attempt.
pub const FINSLER_RETRIES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum NormKind<T> {
    Euclidean,
    /// `F(v) = √(vᵀAv)` for a symmetric positive definite `A` (row major).
    Ellipse([[T; 2]; 2]),
    Custom,
}

/// A symmetric Finsler norm `F` together with its dual `F*`.
///
/// `lower`/`upper` are the sampled equivalence constants
/// `lower·|v| ≤ F*(v) ≤ upper·|v|`.
#[derive(Clone)]
pub struct FinslerNorm<T> {
    pub kind: NormKind<T>,
    pub primal: ScalarField<T>,
    pub dual: ScalarField<T>,
    /// Gradient of `F`; diagnostics only.
    pub gradient: Option<Arc<dyn Fn(Point2<T>) -> Point2<T> + Send + Sync>>,
    lower: T,
    upper: T,
    refinement: T,
}

impl<T: fmt::Debug> fmt::Debug for FinslerNorm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinslerNorm")
            .field("kind", &self.kind)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("refinement", &self.refinement)
            .finish_non_exhaustive()
    }
}

impl<T: Real> FinslerNorm<T> {
    pub fn euclidean() -> Self {
        let mut norm = Self {
            kind: NormKind::Euclidean,
            primal: field(|v: Point2<T>| v.norm()),
            dual: field(|v: Point2<T>| v.norm()),
            gradient: Some(Arc::new(|v: Point2<T>| v * (T::one() / v.norm()))),
            lower: T::one(),
            upper: T::one(),
            refinement: T::one(),
        };
        norm.estimate_constants();
        norm
    }

    /// The quadratic norm of the SPD matrix `[[a11, a12], [a12, a22]]`;
    /// its dual is the quadratic norm of the inverse matrix.
    pub fn ellipse(a11: T, a12: T, a22: T) -> Result<Self> {
        let det = a11 * a22 - a12 * a12;
        if !(a11 > T::zero() && det > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "ellipse matrix [[{a11}, {a12}], [{a12}, {a22}]] is not positive definite"
            )));
        }
        let (i11, i12, i22) = (a22 / det, -a12 / det, a11 / det);
        let quad = move |m11: T, m12: T, m22: T| {
            field(move |v: Point2<T>| {
                (m11 * v.x * v.x + T::lit(2.0) * m12 * v.x * v.y + m22 * v.y * v.y).sqrt()
            })
        };
        let primal = quad(a11, a12, a22);
        let f = primal.clone();
        let mut norm = Self {
            kind: NormKind::Ellipse([[a11, a12], [a12, a22]]),
            primal,
            dual: quad(i11, i12, i22),
            gradient: Some(Arc::new(move |v: Point2<T>| {
                let n = f(v);
                Point2::new((a11 * v.x + a12 * v.y) / n, (a12 * v.x + a22 * v.y) / n)
            })),
            lower: T::one(),
            upper: T::one(),
            refinement: T::one(),
        };
        norm.estimate_constants();
        Ok(norm)
    }

    /// A user supplied norm pair. Homogeneity and duality are the caller's
    /// responsibility; [`FinslerNorm::homogeneity_defect`] samples the former.
    pub fn custom(primal: ScalarField<T>, dual: ScalarField<T>) -> Self {
        let mut norm = Self {
            kind: NormKind::Custom,
            primal,
            dual,
            gradient: None,
            lower: T::one(),
            upper: T::one(),
            refinement: T::one(),
        };
        norm.estimate_constants();
        norm
    }

    /// Divisor applied to `θ·c₁/c₂` for the first Euclidean base set.
    /// Must be at least 1; the default is 1.
    pub fn with_refinement(mut self, factor: T) -> Result<Self> {
        if !(factor >= T::one()) || !factor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "finsler refinement factor {factor} must be a finite number >= 1"
            )));
        }
        self.refinement = factor;
        Ok(self)
    }

    pub fn refinement(&self) -> T {
        self.refinement
    }

    fn estimate_constants(&mut self) {
        let samples = 1 << 14;
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for k in 0..samples {
            let (s, c) = (2.0 * PI * k as f64 / samples as f64).sin_cos();
            let d = (self.dual)(Point2::from_f64(c, s));
            lo = lo.min(d);
            hi = hi.max(d);
        }
        self.lower = lo;
        self.upper = hi;
    }

    #[inline]
    pub fn f(&self, v: Point2<T>) -> T {
        (self.primal)(v)
    }

    #[inline]
    pub fn f_dual(&self, w: Point2<T>) -> T {
        (self.dual)(w)
    }

    /// Sampled `(lower, upper)` with `lower·|v| ≤ F*(v) ≤ upper·|v|`.
    pub fn equivalence_constants(&self) -> (T, T) {
        (self.lower, self.upper)
    }

    /// Largest relative violation of `F(λv) = |λ|F(v)` (and the same for the
    /// dual) over the given vectors and λ ∈ {−2, −1, ½, 3}.
    pub fn homogeneity_defect(&self, vectors: &[Point2<T>]) -> T {
        let mut worst = T::zero();
        for &v in vectors {
            for lambda in [-2.0, -1.0, 0.5, 3.0].map(T::lit) {
                for norm in [&self.primal, &self.dual] {
                    let lhs = norm(v * lambda);
                    let rhs = lambda.abs() * norm(v);
                    worst = worst.max((lhs - rhs).abs() / rhs.max(T::min_positive_value()));
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub enum Metric<T> {
    Euclidean,
    /// Directions on the unit sphere of the dual norm `F*`.
    Finsler(FinslerNorm<T>),
}

impl<T: Real> Metric<T> {
    #[inline]
    pub fn norm(&self, v: Point2<T>) -> T {
        match self {
            Metric::Euclidean => v.norm(),
            Metric::Finsler(n) => n.f_dual(v),
        }
    }
}

/// A finite, symmetric set of unit directions with covering radius `theta`.
#[derive(Debug, Clone)]
pub struct DirectionSet<T> {
    vectors: Vec<Point2<T>>,
    theta: T,
    metric: Metric<T>,
}

impl<T: Real> DirectionSet<T> {
    /// Wraps an explicit vector list. Requires exact symmetry: `v` present
    /// implies `-v` present.
    pub fn from_vectors(vectors: Vec<Point2<T>>, theta: T, metric: Metric<T>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("empty direction set".into()));
        }
        if let Some(v) = vectors.iter().find(|&&v| !vectors.contains(&-v)) {
            return Err(Error::InvalidArgument(format!(
                "direction set is not symmetric: {v} has no opposite"
            )));
        }
        Ok(Self {
            vectors,
            theta,
            metric,
        })
    }

    #[inline]
    pub fn vectors(&self) -> &[Point2<T>] {
        &self.vectors
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[inline]
    pub fn theta(&self) -> T {
        self.theta
    }

    #[inline]
    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    /// Longest Euclidean length among the members (1 for Euclidean sets).
    pub fn reach(&self) -> T {
        self.vectors
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.vectors.iter().all(|&v| self.vectors.contains(&-v))
    }
}

/// Number of equispaced directions needed for covering radius θ: the
/// smallest even `m` whose half-gap chord `2·sin(π/(2m))` is at most θ.
pub fn circle_direction_count(theta: f64) -> usize {
    let m = (PI / (2.0 * (theta / 2.0).asin())).ceil() as usize;
    m + m % 2
}

/// `m` equispaced unit vectors, `m` the smallest even integer with
/// `m ≥ π / (2·asin(θ/2))`, so that every unit vector is within chord θ of
/// a member. The second half is the exact negation of the first.
pub fn build_circle_directions<T: Real>(theta: T) -> Result<DirectionSet<T>> {
    let t = theta.as_f64();
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in (0, 1]"
        )));
    }
    let m = circle_direction_count(t);
    let half: Vec<Point2<T>> = (0..m / 2)
        .map(|k| {
            let (s, c) = (2.0 * PI * k as f64 / m as f64).sin_cos();
            Point2::from_f64(c, s)
        })
        .collect();
    let mut vectors = half.clone();
    vectors.extend(half.into_iter().map(|v| -v));
    Ok(DirectionSet {
        vectors,
        theta,
        metric: Metric::Euclidean,
    })
}

/// Directions on `{F* = 1}` covering it within θ in the `F*` metric.
///
/// Euclidean sets of radius θ' are mapped radially onto `{F* = 1}` and the
/// result is certified by probing. θ' starts at `θ·c₁/(r·c₂)` with `r` the
/// norm's refinement factor, then halves up to [`FINSLER_RETRIES`] + 1 times.
pub fn build_finsler_directions<T: Real>(norm: &FinslerNorm<T>, theta: T) -> Result<DirectionSet<T>> {
    let t = theta.as_f64();
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in (0, 1]"
        )));
    }
    let (c1, c2) = norm.equivalence_constants();
    let mut schedule = vec![theta * c1 / (norm.refinement * c2)];
    for k in 0..=FINSLER_RETRIES {
        schedule.push(schedule[k] / T::lit(2.0));
    }
    let metric = Metric::Finsler(norm.clone());
    let mut last_gap = T::infinity();
    for base_theta in schedule {
        let base = build_circle_directions(base_theta)?;
        let m = base.len();
        let vectors = if norm.kind == NormKind::Euclidean {
            // the radial map is the identity on the unit circle
            base.vectors
        } else {
            let half: Vec<Point2<T>> = base.vectors[..m / 2]
                .iter()
                .map(|&w| w * (T::one() / norm.f_dual(w)))
                .collect();
            let mut v = half.clone();
            v.extend(half.into_iter().map(|w| -w));
            v
        };
        let set = DirectionSet {
            vectors,
            theta,
            metric: metric.clone(),
        };
        last_gap = covering_check(&set, COVERING_PROBES);
        if last_gap <= theta {
            return Ok(set);
        }
        log::debug!("finsler covering at base theta {base_theta} has gap {last_gap}; refining");
    }
    Err(Error::CoveringFailure {
        gap: last_gap.as_f64(),
        theta: t,
    })
}

/// Largest metric distance from `probes` equispaced points of the metric
/// unit sphere to their nearest member of `set`.
pub fn covering_check<T: Real>(set: &DirectionSet<T>, probes: usize) -> T {
    let probes = probes.max(1);
    let metric = set.metric();
    let mut worst = T::zero();
    for k in 0..probes {
        let (s, c) = (2.0 * PI * k as f64 / probes as f64).sin_cos();
        let w = Point2::from_f64(c, s);
        let p = w * (T::one() / metric.norm(w));
        let nearest = set
            .vectors()
            .iter()
            .map(|&v| metric.norm(p - v))
            .fold(T::infinity(), T::min);
        worst = worst.max(nearest);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_from_chord_formula() {
        assert_eq!(circle_direction_count(1.0), 4);
        assert_eq!(circle_direction_count(0.1), 32);
        let d = build_circle_directions(1.0f64).unwrap();
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (v, (x, y)) in d.vectors().iter().zip(expect) {
            assert!((v.x - x).abs() < 1e-15 && (v.y - y).abs() < 1e-15);
        }
    }

    #[test]
    fn covering_gaps_match_chords() {
        let d = build_circle_directions(1.0f64).unwrap();
        let gap = covering_check(&d, 100_000);
        assert!((gap - 2.0 * (PI / 8.0).sin()).abs() < 1e-9, "{gap}");

        let d = build_circle_directions(0.1f64).unwrap();
        let gap = covering_check(&d, 100_000);
        assert!((gap - 2.0 * (PI / 64.0).sin()).abs() < 1e-4, "{gap}");
        assert!(gap <= 0.1);
    }

    #[test]
    fn pair_set_gap_is_sqrt_two() {
        let e1 = Point2::new(1.0f64, 0.0);
        let set = DirectionSet::from_vectors(vec![e1, -e1], 2.0, Metric::Euclidean).unwrap();
        assert!((covering_check(&set, 100_000) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn probes_as_members_give_zero_gap() {
        let probes = 64;
        let half: Vec<Point2<f64>> = (0..probes / 2)
            .map(|k| {
                let (s, c) = (2.0 * PI * k as f64 / probes as f64).sin_cos();
                Point2::new(c, s)
            })
            .collect();
        let mut v = half.clone();
        v.extend(half.iter().map(|&w| -w));
        let set = DirectionSet::from_vectors(v, 0.1, Metric::Euclidean).unwrap();
        assert!(covering_check(&set, probes) < 1e-15);
    }

    #[test]
    fn invalid_theta() {
        for t in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(build_circle_directions(t), Err(Error::InvalidArgument(_))));
            assert!(matches!(
                build_finsler_directions(&FinslerNorm::euclidean(), t),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn cardinality_scales_inversely_with_theta() {
        for k in 0..=200 {
            let theta = 0.01 * (100f64).powf(k as f64 / 200.0);
            let m = circle_direction_count(theta) as f64;
            let p = m * theta;
            assert!(p >= PI / 2.0 - 1.0 && p <= PI + 2.0, "theta {theta}: m·θ = {p}");
        }
    }

    #[test]
    fn euclidean_finsler_is_identical() {
        for theta in [0.5, 0.3, 0.07] {
            let a = build_circle_directions(theta).unwrap();
            let b = build_finsler_directions(&FinslerNorm::euclidean(), theta).unwrap();
            assert_eq!(a.vectors(), b.vectors());
        }
    }

    #[test]
    fn ellipse_dual_closed_form() {
        let norm = FinslerNorm::<f64>::ellipse(1.0, 0.0, 4.0).unwrap();
        let w = Point2::new(0.0, 1.0);
        let mapped = w * (1.0 / norm.f_dual(w));
        assert!((mapped.x).abs() < 1e-15 && (mapped.y - 2.0).abs() < 1e-15);
        assert!((norm.f_dual(Point2::new(0.0, 2.0)) - 1.0).abs() < 1e-15);
        assert!((norm.f(Point2::new(0.0, 1.0)) - 2.0).abs() < 1e-15);
        let (c1, c2) = norm.equivalence_constants();
        assert!((c1 - 0.5).abs() < 1e-12 && (c2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ellipse_directions_on_dual_sphere() {
        let norm = FinslerNorm::<f64>::ellipse(1.0, 0.0, 4.0).unwrap();
        for theta in [1.0, 0.5, 0.2] {
            let set = build_finsler_directions(&norm, theta).unwrap();
            assert!(set.is_symmetric());
            for &v in set.vectors() {
                assert!((norm.f_dual(v) - 1.0).abs() < 1e-12);
            }
            assert!(covering_check(&set, 100_000) <= theta);
            assert!(set.reach() <= 2.0 + 1e-12 && set.reach() >= 1.0, "{}", set.reach());
        }
    }

    #[test]
    fn non_spd_ellipse_rejected() {
        assert!(FinslerNorm::<f64>::ellipse(1.0, 2.0, 1.0).is_err());
        assert!(FinslerNorm::<f64>::ellipse(-1.0, 0.0, 1.0).is_err());
    }
}
