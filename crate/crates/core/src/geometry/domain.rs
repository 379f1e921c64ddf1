use std::fmt;

use crate::real::{field, Point2, Real, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    /// The open square (−1, 1)².
    Square,
    /// The open unit disk.
    UnitDisk,
    Custom,
}

/// A bounded planar domain described by its distance to the boundary.
///
/// `signed_distance` is positive inside, zero on the boundary and negative
/// outside. `center` is any interior point; barrier constructions measure
/// positions relative to it, so every point of the domain lies within
/// `diameter` of it.
#[derive(Clone)]
pub struct DomainDescriptor<T> {
    pub kind: DomainKind,
    pub signed_distance: ScalarField<T>,
    pub diameter: T,
    pub center: Point2<T>,
    /// Axis-aligned bounding box `(lower-left, upper-right)`.
    pub bbox: (Point2<T>, Point2<T>),
}

impl<T: Real> DomainDescriptor<T> {
    pub fn square() -> Self {
        let one = T::one();
        Self {
            kind: DomainKind::Square,
            signed_distance: field(|p: Point2<T>| T::one() - p.norm_max()),
            diameter: T::lit(2.0) * T::SQRT_2(),
            center: Point2::default(),
            bbox: (Point2::new(-one, -one), Point2::new(one, one)),
        }
    }

    pub fn unit_disk() -> Self {
        let one = T::one();
        Self {
            kind: DomainKind::UnitDisk,
            signed_distance: field(|p: Point2<T>| T::one() - p.norm()),
            diameter: T::lit(2.0),
            center: Point2::default(),
            bbox: (Point2::new(-one, -one), Point2::new(one, one)),
        }
    }

    /// A user domain. Regularity of the boundary is not verified.
    pub fn custom(
        signed_distance: ScalarField<T>,
        diameter: T,
        center: Point2<T>,
        bbox: (Point2<T>, Point2<T>),
    ) -> Self {
        Self {
            kind: DomainKind::Custom,
            signed_distance,
            diameter,
            center,
            bbox,
        }
    }

    #[inline]
    pub fn distance_to_boundary(&self, p: Point2<T>) -> T {
        (self.signed_distance)(p)
    }

    pub fn contains_closed(&self, p: Point2<T>, tol: T) -> bool {
        self.distance_to_boundary(p) >= -tol
    }

    /// `count` points spread along the boundary, used for sampled checks of
    /// boundary-only conditions. `None` for custom domains.
    pub fn boundary_samples(&self, count: usize) -> Option<Vec<Point2<T>>> {
        let count = count.max(4);
        match self.kind {
            DomainKind::UnitDisk => Some(
                (0..count)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                        Point2::from_f64(t.cos(), t.sin())
                    })
                    .collect(),
            ),
            DomainKind::Square => {
                let per_side = count.div_ceil(4);
                let mut out = Vec::with_capacity(4 * per_side);
                for k in 0..per_side {
                    let s = -1.0 + 2.0 * k as f64 / per_side as f64;
                    out.push(Point2::from_f64(s, -1.0));
                    out.push(Point2::from_f64(1.0, s));
                    out.push(Point2::from_f64(-s, 1.0));
                    out.push(Point2::from_f64(-1.0, -s));
                }
                Some(out)
            }
            DomainKind::Custom => None,
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for DomainDescriptor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainDescriptor")
            .field("kind", &self.kind)
            .field("diameter", &self.diameter)
            .field("center", &self.center)
            .finish_non_exhaustive()
    }
}
