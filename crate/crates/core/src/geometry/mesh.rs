use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::real::{geom_tol, Point2, Real};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Identity stamp shared by meshes, clouds and the grid functions living on them.
pub(crate) fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Marker for meshes built as a uniform grid triangulation.
///
/// Cell `(i, j)` spans `origin + spacing·[i, i+1] × [j, j+1]` and is split
/// along its lower-left to upper-right diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridTag<T> {
    pub origin: Point2<T>,
    pub spacing: T,
    pub cells: usize,
}

/// A simplex containing a query point and the point's barycentric weights
/// with respect to the simplex vertices (in simplex order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location<T> {
    pub simplex: usize,
    pub weights: [T; 3],
}

#[derive(Debug, Clone)]
enum Locator {
    Structured,
    Buckets(BucketGrid),
}

/// Uniform bucket grid over the mesh bounding box; each bucket lists the
/// simplices whose bounding box touches it (CSR layout).
#[derive(Debug, Clone)]
struct BucketGrid {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<usize>,
    items: Vec<u32>,
}

/// A conforming triangulation in the plane.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    id: u64,
    vertices: Vec<Point2<T>>,
    simplices: Vec<[usize; 3]>,
    mesh_size: T,
    grid: Option<GridTag<T>>,
    /// Per simplex: first vertex and the inverse of the edge matrix, giving
    /// the affine map x ↦ (λ1, λ2).
    affine: Vec<[T; 6]>,
    locator: Locator,
}

impl<T: Real> Mesh<T> {
    /// Validates `simplices` against `vertices` and builds a bucket locator.
    pub fn new(vertices: Vec<Point2<T>>, simplices: Vec<[usize; 3]>) -> Result<Self> {
        Self::assemble(vertices, simplices, None)
    }

    fn assemble(
        vertices: Vec<Point2<T>>,
        simplices: Vec<[usize; 3]>,
        grid: Option<GridTag<T>>,
    ) -> Result<Self> {
        if simplices.is_empty() {
            return Err(Error::MeshFormat("mesh has no simplices".into()));
        }
        if let Some((k, _)) = vertices.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::MeshFormat(format!("vertex {k} is not finite")));
        }
        let mut mesh_size = T::zero();
        let mut affine = Vec::with_capacity(simplices.len());
        for (s, tri) in simplices.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::MeshFormat(format!(
                    "simplex {s} references vertex {bad} but only {} vertices exist",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let e1 = b - a;
            let e2 = c - a;
            let det = e1.x * e2.y - e1.y * e2.x;
            let diam = e1.norm().max(e2.norm()).max((c - b).norm());
            if !(det.abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) * diam * diam) {
                return Err(Error::DegenerateMesh {
                    simplex: s,
                    area: (det / T::lit(2.0)).as_f64(),
                });
            }
            mesh_size = mesh_size.max(diam);
            affine.push([a.x, a.y, e2.y / det, -e2.x / det, -e1.y / det, e1.x / det]);
        }
        let locator = match grid {
            Some(_) => Locator::Structured,
            None => Locator::Buckets(BucketGrid::build(&vertices, &simplices, mesh_size)),
        };
        Ok(Self {
            id: fresh_id(),
            vertices,
            simplices,
            mesh_size,
            grid,
            affine,
            locator,
        })
    }

    #[inline]
    pub fn id(&self) -> u64 {
        self.id
    }

    #[inline]
    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    #[inline]
    pub fn simplices(&self) -> &[[usize; 3]] {
        &self.simplices
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.vertices.len()
    }

    /// Maximum simplex diameter.
    #[inline]
    pub fn mesh_size(&self) -> T {
        self.mesh_size
    }

    #[inline]
    pub fn grid_tag(&self) -> Option<&GridTag<T>> {
        self.grid.as_ref()
    }

    /// Finds a simplex containing `x` (up to the geometric tolerance) and the
    /// barycentric weights of `x` in it. Weights are clamped to be
    /// nonnegative and renormalized to sum to one.
    pub fn locate(&self, x: Point2<T>) -> Result<Location<T>> {
        let found = match &self.locator {
            Locator::Structured => self.locate_structured(x),
            Locator::Buckets(b) => self.locate_buckets(b, x),
        };
        found.ok_or(Error::PointOutsideMesh {
            x: x.x.as_f64(),
            y: x.y.as_f64(),
        })
    }

    fn locate_structured(&self, x: Point2<T>) -> Option<Location<T>> {
        let tag = self.grid.as_ref()?;
        let n = tag.cells;
        let nf = T::from_usize_lossy(n);
        let tol = geom_tol::<T>() / tag.spacing;
        let tx = (x.x - tag.origin.x) / tag.spacing;
        let ty = (x.y - tag.origin.y) / tag.spacing;
        if !(tx >= -tol && tx <= nf + tol && ty >= -tol && ty <= nf + tol) {
            return None;
        }
        let i = tx.floor().max(T::zero()).min(nf - T::one());
        let j = ty.floor().max(T::zero()).min(nf - T::one());
        let a = (tx - i).max(T::zero()).min(T::one());
        let b = (ty - j).max(T::zero()).min(T::one());
        let (i, j) = (i.to_usize()?, j.to_usize()?);
        let cell = j * n + i;
        // lower-right triangle (i,j),(i+1,j),(i+1,j+1); upper-left (i,j),(i+1,j+1),(i,j+1)
        Some(if a >= b {
            Location {
                simplex: 2 * cell,
                weights: [T::one() - a, a - b, b],
            }
        } else {
            Location {
                simplex: 2 * cell + 1,
                weights: [T::one() - b, a, b - a],
            }
        })
    }

    #[inline]
    fn barycentric(&self, s: usize, x: Point2<T>) -> [T; 3] {
        let [ax, ay, m0, m1, m2, m3] = self.affine[s];
        let dx = x.x - ax;
        let dy = x.y - ay;
        let l1 = m0 * dx + m1 * dy;
        let l2 = m2 * dx + m3 * dy;
        [T::one() - l1 - l2, l1, l2]
    }

    fn locate_buckets(&self, grid: &BucketGrid, x: Point2<T>) -> Option<Location<T>> {
        let tol = geom_tol::<T>();
        let bucket = grid.bucket_of(x.x.as_f64(), x.y.as_f64(), tol.as_f64())?;
        let mut best: Option<(T, usize, [T; 3])> = None;
        for &s in grid.bucket(bucket) {
            let s = s as usize;
            let w = self.barycentric(s, x);
            let worst = w[0].min(w[1]).min(w[2]);
            if worst >= -tol && best.is_none_or(|(b, _, _)| worst > b) {
                best = Some((worst, s, w));
                if worst >= T::zero() {
                    break;
                }
            }
        }
        best.map(|(_, simplex, w)| Location {
            simplex,
            weights: clamp_weights(w),
        })
    }

    /// Evaluates the piecewise linear interpolant of `nodal` at `x`.
    pub fn interpolate(&self, nodal: &[T], x: Point2<T>) -> Result<T> {
        if nodal.len() != self.vertices.len() {
            return Err(Error::GridMismatch);
        }
        let loc = self.locate(x)?;
        Ok(self.evaluate(&loc, nodal))
    }

    #[inline]
    pub fn evaluate(&self, loc: &Location<T>, nodal: &[T]) -> T {
        let [a, b, c] = self.simplices[loc.simplex];
        loc.weights[0] * nodal[a] + loc.weights[1] * nodal[b] + loc.weights[2] * nodal[c]
    }

    /// Uniform triangulation of [−1, 1]² with `n` cells per axis.
    pub fn square(n: usize) -> Result<Self> {
        Self::rectangle(Point2::default(), T::one(), n)
    }

    /// Uniform triangulation of the square `center + [−half, half]²` with `n`
    /// cells per axis, each cell cut along the same diagonal.
    pub fn rectangle(center: Point2<T>, half: T, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one subdivision".into()));
        }
        if !(half > T::zero()) {
            return Err(Error::InvalidArgument("half width must be positive".into()));
        }
        let nf = T::from_usize_lossy(n);
        let spacing = T::lit(2.0) * half / nf;
        let origin = Point2::new(center.x - half, center.y - half);
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // pin the far edge exactly
                let coord = |k: usize, o: T| {
                    if k == n {
                        o + T::lit(2.0) * half
                    } else {
                        o + T::from_usize_lossy(k) * spacing
                    }
                };
                vertices.push(Point2::new(coord(i, origin.x), coord(j, origin.y)));
            }
        }
        let v = |i: usize, j: usize| j * (n + 1) + i;
        let mut simplices = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                simplices.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                simplices.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
        let tag = GridTag {
            origin,
            spacing,
            cells: n,
        };
        Self::assemble(vertices, simplices, Some(tag))
    }

    /// Polar triangulation of the unit disk: a center vertex plus `rings`
    /// concentric rings, ring `k` at radius `k/rings` carrying `⌈2πk⌉`
    /// equispaced vertices. Outer vertices lie on the unit circle.
    pub fn disk(rings: usize) -> Result<Self> {
        if rings == 0 {
            return Err(Error::InvalidArgument("need at least one ring".into()));
        }
        let tau = 2.0 * std::f64::consts::PI;
        let counts: Vec<usize> = (0..=rings)
            .map(|k| if k == 0 { 1 } else { (tau * k as f64).ceil() as usize })
            .collect();
        let mut starts = Vec::with_capacity(rings + 1);
        let mut vertices = Vec::with_capacity(counts.iter().sum());
        for (k, &m) in counts.iter().enumerate() {
            starts.push(vertices.len());
            if k == 0 {
                vertices.push(Point2::default());
                continue;
            }
            let r = k as f64 / rings as f64;
            for j in 0..m {
                let t = tau * j as f64 / m as f64;
                let (s, c) = t.sin_cos();
                vertices.push(if k == rings {
                    Point2::from_f64(c, s)
                } else {
                    Point2::from_f64(r * c, r * s)
                });
            }
        }
        let mut simplices = Vec::new();
        // center fan
        let m1 = counts[1];
        for j in 0..m1 {
            simplices.push([0, starts[1] + j, starts[1] + (j + 1) % m1]);
        }
        // zipper between consecutive rings, merging the two angle sequences
        for k in 2..=rings {
            let (mi, mo) = (counts[k - 1], counts[k]);
            let (si, so) = (starts[k - 1], starts[k]);
            let (mut i, mut j) = (0usize, 0usize);
            while i < mi || j < mo {
                let next_inner = (i + 1) as f64 / mi as f64;
                let next_outer = (j + 1) as f64 / mo as f64;
                if j == mo || (i < mi && next_inner < next_outer) {
                    simplices.push([si + i, si + (i + 1) % mi, so + j % mo]);
                    i += 1;
                } else {
                    simplices.push([si + i % mi, so + (j + 1) % mo, so + j]);
                    j += 1;
                }
            }
        }
        Self::assemble(vertices, simplices, None)
    }
}

fn clamp_weights<T: Real>(w: [T; 3]) -> [T; 3] {
    if w.iter().all(|&x| x >= T::zero()) {
        return w;
    }
    let c = w.map(|x| x.max(T::zero()));
    let s = c[0] + c[1] + c[2];
    c.map(|x| x / s)
}

impl BucketGrid {
    fn build<T: Real>(vertices: &[Point2<T>], simplices: &[[usize; 3]], mesh_size: T) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in vertices {
            let (x, y) = (v.x.as_f64(), v.y.as_f64());
            lo = [lo[0].min(x), lo[1].min(y)];
            hi = [hi[0].max(x), hi[1].max(y)];
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        // about one simplex diameter per bucket, capped at ~4 buckets per simplex
        let max_cells = (4 * simplices.len()).max(1) as f64;
        let mut cell = mesh_size.as_f64().max(extent / max_cells.sqrt());
        if !(cell > 0.0) {
            cell = extent;
        }
        let nx = (((hi[0] - lo[0]) / cell).floor() as usize + 1).max(1);
        let ny = (((hi[1] - lo[1]) / cell).floor() as usize + 1).max(1);
        let mut counts = vec![0usize; nx * ny + 1];
        let span = |s: &[usize; 3]| {
            let xs = s.map(|i| vertices[i].x.as_f64());
            let ys = s.map(|i| vertices[i].y.as_f64());
            let x0 = ((xs.iter().cloned().fold(f64::INFINITY, f64::min) - lo[0]) / cell).floor();
            let x1 = ((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lo[0]) / cell).floor();
            let y0 = ((ys.iter().cloned().fold(f64::INFINITY, f64::min) - lo[1]) / cell).floor();
            let y1 = ((ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lo[1]) / cell).floor();
            let c = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
            (c(x0, nx), c(x1, nx), c(y0, ny), c(y1, ny))
        };
        for s in simplices {
            let (x0, x1, y0, y1) = span(s);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    counts[by * nx + bx + 1] += 1;
                }
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[nx * ny]];
        for (si, s) in simplices.iter().enumerate() {
            let (x0, x1, y0, y1) = span(s);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    let b = by * nx + bx;
                    items[fill[b]] = si as u32;
                    fill[b] += 1;
                }
            }
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            offsets: counts,
            items,
        }
    }

    fn bucket_of(&self, x: f64, y: f64, tol: f64) -> Option<usize> {
        let tx = (x - self.origin[0]) / self.cell;
        let ty = (y - self.origin[1]) / self.cell;
        let t = tol / self.cell;
        let (nx, ny) = (self.nx as f64, self.ny as f64);
        if !(tx >= -t && ty >= -t && tx < nx + t && ty < ny + t) {
            return None;
        }
        let bx = (tx.floor().max(0.0) as usize).min(self.nx - 1);
        let by = (ty.floor().max(0.0) as usize).min(self.ny - 1);
        Some(by * self.nx + bx)
    }

    fn bucket(&self, b: usize) -> &[u32] {
        &self.items[self.offsets[b]..self.offsets[b + 1]]
    }
}
