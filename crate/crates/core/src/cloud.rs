//! Meshless variant: the operator over closed ball neighborhoods
//! `C_ε(z) = C ∩ B̄_ε(z)` of a point cloud, using nodal values only.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{data_lines, fresh_id, parse_fields, DomainDescriptor, NodeClassification};
use crate::problems::ProblemSpec;
use crate::real::{geom_tol, Point2, Real};
use crate::scheme::{laplacian_row, GridFunction, MaxMinStencil};
use crate::solver::{Discretization, SolveOptions, SolveReport};

/// Marks a cloud built as `offset + spacing·ℤ²` clipped to a domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeTag<T> {
    pub spacing: T,
    pub offset: Point2<T>,
}

/// Uniform bucket grid for radius queries.
#[derive(Debug, Clone)]
struct BucketGrid<T> {
    origin: Point2<T>,
    cell: T,
    dims: (usize, usize),
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<T: Real> BucketGrid<T> {
    fn new(points: &[Point2<T>], cell: T) -> Self {
        let (lo, hi) = bounds(points);
        let span = |a: T, b: T| ((b - a) / cell).floor().to_usize().unwrap_or(0) + 1;
        let dims = (span(lo.x, hi.x), span(lo.y, hi.y));
        let mut grid = Self {
            origin: lo,
            cell,
            dims,
            starts: vec![0; dims.0 * dims.1 + 1],
            items: vec![0; points.len()],
        };
        let keys: Vec<usize> = points.iter().map(|&p| grid.key(grid.cell_of(p))).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for k in 0..grid.starts.len() - 1 {
            grid.starts[k + 1] += grid.starts[k];
        }
        let mut fill = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        grid
    }

    fn cell_of(&self, p: Point2<T>) -> (usize, usize) {
        let c = |v: T, o: T, n: usize| ((v - o) / self.cell).floor().to_isize().unwrap_or(0).clamp(0, n as isize - 1) as usize;
        (c(p.x, self.origin.x, self.dims.0), c(p.y, self.origin.y, self.dims.1))
    }

    fn key(&self, (i, j): (usize, usize)) -> usize {
        j * self.dims.0 + i
    }

    /// Calls `visit` on every point in cells within `rings` of `p`'s cell.
    fn scan(&self, p: Point2<T>, rings: usize, mut visit: impl FnMut(usize)) {
        let (ci, cj) = self.cell_of(p);
        for j in cj.saturating_sub(rings)..=(cj + rings).min(self.dims.1 - 1) {
            for i in ci.saturating_sub(rings)..=(ci + rings).min(self.dims.0 - 1) {
                let k = self.key((i, j));
                for &item in &self.items[self.starts[k] as usize..self.starts[k + 1] as usize] {
                    visit(item as usize);
                }
            }
        }
    }

    fn within(&self, points: &[Point2<T>], p: Point2<T>, radius: T, out: &mut Vec<usize>) {
        let r2 = radius * radius * (T::one() + geom_tol::<T>());
        let rings = (radius / self.cell).ceil().to_usize().unwrap_or(0);
        self.scan(p, rings, |k| {
            if (points[k] - p).norm_squared() <= r2 {
                out.push(k);
            }
        });
    }

    /// Distance from `p` to the nearest point other than `skip`.
    fn nearest(&self, points: &[Point2<T>], p: Point2<T>, skip: Option<usize>) -> T {
        let mut best = T::infinity();
        let max_rings = self.dims.0.max(self.dims.1);
        let mut rings = 1;
        loop {
            self.scan(p, rings, |k| {
                if Some(k) != skip {
                    best = best.min((points[k] - p).norm());
                }
            });
            // every point outside the scanned block is farther than rings·cell
            if best <= T::from_usize_lossy(rings) * self.cell || rings >= max_rings {
                return best;
            }
            rings = (rings * 2).min(max_rings);
        }
    }
}

fn bounds<T: Real>(points: &[Point2<T>]) -> (Point2<T>, Point2<T>) {
    let mut lo = Point2::new(T::infinity(), T::infinity());
    let mut hi = Point2::new(T::neg_infinity(), T::neg_infinity());
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// An immutable point cloud with its resolution `h` (largest
/// nearest-neighbor distance) and quasiuniformity ratio `σ`.
#[derive(Debug, Clone)]
pub struct PointCloud<T> {
    id: u64,
    points: Vec<Point2<T>>,
    h: T,
    sigma: T,
    lattice: Option<LatticeTag<T>>,
    domain: Option<DomainDescriptor<T>>,
    index: BucketGrid<T>,
}

impl<T: Real> PointCloud<T> {
    /// Needs at least two distinct points.
    pub fn new(points: Vec<Point2<T>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a cloud needs at least two points".into()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite cloud point {p}")));
        }
        let (lo, hi) = bounds(&points);
        let extent = (hi.x - lo.x).max(hi.y - lo.y);
        let cell = (extent / T::from_usize_lossy(points.len()).sqrt()).max(extent * T::lit(1e-6));
        if !(cell > T::zero()) {
            return Err(Error::InvalidArgument("cloud points coincide".into()));
        }
        let index = BucketGrid::new(&points, cell);
        let (mut h, mut min_nn) = (T::zero(), T::infinity());
        for (k, &p) in points.iter().enumerate() {
            let d = index.nearest(&points, p, Some(k));
            h = h.max(d);
            min_nn = min_nn.min(d);
        }
        if !(min_nn > T::zero()) {
            return Err(Error::InvalidArgument("cloud contains duplicate points".into()));
        }
        Ok(Self {
            id: fresh_id(),
            points,
            h,
            sigma: min_nn / h,
            lattice: None,
            domain: None,
            index,
        })
    }

    /// Attaches the domain used to classify interior points.
    pub fn with_domain(mut self, domain: DomainDescriptor<T>) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest nearest-neighbor distance.
    pub fn h(&self) -> T {
        self.h
    }

    /// `min nearest-neighbor distance / h`.
    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn lattice_tag(&self) -> Option<&LatticeTag<T>> {
        self.lattice.as_ref()
    }

    pub fn domain(&self) -> Option<&DomainDescriptor<T>> {
        self.domain.as_ref()
    }

    /// Distance to the boundary of the attached domain, or of the cloud's
    /// bounding box when none is attached.
    pub fn depth(&self, k: usize) -> T {
        let p = self.points[k];
        match &self.domain {
            Some(d) => d.distance_to_boundary(p),
            None => {
                let (lo, hi) = bounds(&self.points);
                (p.x - lo.x).min(hi.x - p.x).min(p.y - lo.y).min(hi.y - p.y)
            }
        }
    }

    /// Covering radius the cloud is certified for: `spacing·√2/2` on
    /// lattices, `h/2` otherwise.
    pub fn certified_covering_radius(&self) -> T {
        match &self.lattice {
            Some(tag) => tag.spacing * T::SQRT_2() / T::lit(2.0),
            None => self.h / T::lit(2.0),
        }
    }

    /// Largest distance from a `samples × samples` grid of domain points to
    /// the nearest cloud point.
    pub fn covering_gap(&self, domain: &DomainDescriptor<T>, samples: usize) -> T {
        let (lo, hi) = domain.bbox;
        let n = samples.max(2);
        let t = |k: usize| T::from_usize_lossy(k) / T::from_usize_lossy(n - 1);
        let mut gap = T::zero();
        for j in 0..n {
            for i in 0..n {
                let p = Point2::new(lo.x + (hi.x - lo.x) * t(i), lo.y + (hi.y - lo.y) * t(j));
                if domain.distance_to_boundary(p) >= T::zero() {
                    gap = gap.max(self.index.nearest(&self.points, p, None));
                }
            }
        }
        gap
    }
}

/// The lattice `c + spacing·ℤ²` (`c` the domain center) clipped to the
/// closed domain.
pub fn build_lattice_cloud<T: Real>(domain: &DomainDescriptor<T>, spacing: T) -> Result<PointCloud<T>> {
    if !(spacing > T::zero()) {
        return Err(Error::InvalidArgument(format!("spacing = {spacing} must be positive")));
    }
    if spacing >= domain.diameter {
        return Err(Error::CloudTooCoarse {
            spacing: spacing.as_f64(),
            diameter: domain.diameter.as_f64(),
        });
    }
    let c = domain.center;
    let (lo, hi) = domain.bbox;
    let index_range = |a: T, b: T, o: T| {
        let first = ((a - o) / spacing - geom_tol::<T>()).ceil().to_i64().unwrap_or(0);
        let last = ((b - o) / spacing + geom_tol::<T>()).floor().to_i64().unwrap_or(0);
        first..=last
    };
    let tol = geom_tol::<T>();
    let mut points = Vec::new();
    for j in index_range(lo.y, hi.y, c.y) {
        for i in index_range(lo.x, hi.x, c.x) {
            let p = Point2::new(c.x + T::lit(i as f64) * spacing, c.y + T::lit(j as f64) * spacing);
            if domain.distance_to_boundary(p) >= -tol {
                points.push(p);
            }
        }
    }
    let mut cloud = PointCloud::new(points)?;
    cloud.lattice = Some(LatticeTag { spacing, offset: c });
    Ok(cloud.with_domain(domain.clone()))
}

/// Indices of all points within closed distance `eps` of point `z`,
/// including `z`, in ascending order.
pub fn cloud_neighbors<T: Real>(cloud: &PointCloud<T>, z: usize, eps: T) -> Vec<usize> {
    let mut out = Vec::new();
    cloud.index.within(&cloud.points, cloud.points[z], eps, &mut out);
    out.sort_unstable();
    out
}

/// Whether the graph joining points at distance at most `eps` is connected.
pub fn check_connectivity<T: Real>(cloud: &PointCloud<T>, eps: T) -> bool {
    let n = cloud.len();
    if n <= 1 {
        return true;
    }
    if !(eps > T::zero()) {
        return false;
    }
    let grid = BucketGrid::new(&cloud.points, eps);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    let mut scratch = Vec::new();
    while let Some(k) = queue.pop_front() {
        scratch.clear();
        grid.within(&cloud.points, cloud.points[k], eps, &mut scratch);
        for &m in &scratch {
            if !seen[m] {
                seen[m] = true;
                reached += 1;
                queue.push_back(m);
            }
        }
    }
    reached == n
}

/// Ball neighborhoods of the interior points in CSR layout; the center
/// itself is not stored.
#[derive(Debug, Clone)]
pub struct CloudStencil<T> {
    owner: u64,
    eps: T,
    centers: Vec<usize>,
    rows: Vec<u32>,
    starts: Vec<usize>,
    neighbors: Vec<u32>,
}

const NO_ROW: u32 = u32::MAX;

impl<T: Real> CloudStencil<T> {
    pub fn build(cloud: &PointCloud<T>, interior: &[usize], eps: T) -> Self {
        let grid = BucketGrid::new(&cloud.points, eps);
        let mut rows = vec![NO_ROW; cloud.len()];
        let mut starts = vec![0];
        let mut neighbors = Vec::new();
        let mut scratch = Vec::new();
        for (row, &z) in interior.iter().enumerate() {
            rows[z] = row as u32;
            scratch.clear();
            grid.within(&cloud.points, cloud.points[z], eps, &mut scratch);
            scratch.sort_unstable();
            neighbors.extend(scratch.iter().filter(|&&k| k != z).map(|&k| k as u32));
            starts.push(neighbors.len());
        }
        Self {
            owner: cloud.id,
            eps,
            centers: interior.to_vec(),
            rows,
            starts,
            neighbors,
        }
    }

    pub fn neighbors_of_row(&self, row: usize) -> &[u32] {
        &self.neighbors[self.starts[row]..self.starts[row + 1]]
    }
}

impl<T: Real> MaxMinStencil<T> for CloudStencil<T> {
    fn owner(&self) -> u64 {
        self.owner
    }

    fn eps(&self) -> T {
        self.eps
    }

    fn centers(&self) -> &[usize] {
        &self.centers
    }

    fn row_of(&self, node: usize) -> Option<usize> {
        match self.rows.get(node) {
            Some(&r) if r != NO_ROW => Some(r as usize),
            _ => None,
        }
    }

    #[inline]
    fn extrema(&self, row: usize, u: &[T]) -> (T, T) {
        let center = u[self.centers[row]];
        let (mut hi, mut lo) = (center, center);
        for &k in self.neighbors_of_row(row) {
            let v = u[k as usize];
            if v > hi {
                hi = v;
            }
            if v < lo {
                lo = v;
            }
        }
        (hi, lo)
    }
}

/// Points deeper than `2ε` are interior.
pub fn classify_cloud<T: Real>(cloud: &PointCloud<T>, eps: T) -> NodeClassification {
    let depth = T::lit(2.0) * eps;
    NodeClassification::by_depth((0..cloud.len()).map(|k| cloud.depth(k)), depth)
}

/// `(max_{C_ε(z)} w − 2w(z) + min_{C_ε(z)} w) / ε²`.
pub fn cloud_inf_laplacian<T: Real>(cloud: &PointCloud<T>, w: &GridFunction<T>, z: usize, eps: T) -> Result<T> {
    if w.owner() != cloud.id || w.len() != cloud.len() {
        return Err(Error::GridMismatch);
    }
    if z >= cloud.len() || !(cloud.depth(z) > T::lit(2.0) * eps) {
        return Err(Error::NotInteriorNode(z));
    }
    let stencil = CloudStencil::build(cloud, &[z], eps);
    Ok(laplacian_row(&stencil, 0, w.values()))
}

/// Requirements enforced by [`solve_cloud_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CloudPolicy {
    /// Solve homogeneous problems on clouds without a symmetry certificate.
    pub allow_unsymmetric: bool,
}

/// The fixed-point iteration on ball neighborhoods of a lattice cloud.
pub fn solve_cloud<T: Real>(
    problem: &ProblemSpec<T>,
    cloud: &PointCloud<T>,
    eps: T,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    solve_cloud_with(problem, cloud, eps, opts, CloudPolicy::default())
}

pub fn solve_cloud_with<T: Real>(
    problem: &ProblemSpec<T>,
    cloud: &PointCloud<T>,
    eps: T,
    opts: &SolveOptions<T>,
    policy: CloudPolicy,
) -> Result<SolveReport<T>> {
    opts.validate()?;
    if !(eps >= cloud.h() && eps <= problem.domain.diameter) {
        return Err(Error::InvalidScale(format!(
            "need h <= eps <= diam, got h = {}, eps = {eps}",
            cloud.h()
        )));
    }
    let homogeneous = problem.rhs_class.is_homogeneous();
    if homogeneous && !check_connectivity(cloud, eps) {
        return Err(Error::DisconnectedCloud { eps: eps.as_f64() });
    }
    if homogeneous && cloud.lattice.is_none() && !policy.allow_unsymmetric {
        return Err(Error::CloudNotSymmetric);
    }
    let depth = T::lit(2.0) * eps;
    let nodes = NodeClassification::by_depth(
        cloud.points.iter().map(|&p| problem.domain.distance_to_boundary(p)),
        depth,
    );
    if nodes.interior.is_empty() {
        return Err(Error::ScaleTooCoarse { depth: depth.as_f64() });
    }
    if nodes.boundary.is_empty() {
        return Err(Error::InvalidScale("no cloud point lies in the boundary layer".into()));
    }
    let stencil = CloudStencil::build(cloud, &nodes.interior, eps);
    let mut disc = Discretization::assemble(problem, cloud.id, cloud.points.clone(), nodes, stencil, eps)?;
    disc.obstacle = None;
    disc.solve(opts)
}

/// Parses the cloud text format: `2 <num_points>`, then `x y` per line.
pub fn parse_cloud<T: Real>(text: &str) -> Result<PointCloud<T>> {
    let mut lines = data_lines(text);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::MeshFormat("empty cloud file".into()))?;
    let head: Vec<usize> = parse_fields(line_no, header, 2, "the cloud header").map_err(Error::MeshFormat)?;
    if head[0] != 2 {
        return Err(Error::MeshFormat(format!("unsupported dimension {}", head[0])));
    }
    let mut points = Vec::with_capacity(head[1]);
    for (line_no, line) in lines {
        let xy: Vec<f64> = parse_fields(line_no, line, 2, "a point").map_err(Error::MeshFormat)?;
        points.push(Point2::from_f64(xy[0], xy[1]));
    }
    if points.len() != head[1] {
        return Err(Error::MeshFormat(format!(
            "header announces {} points, found {}",
            head[1],
            points.len()
        )));
    }
    PointCloud::new(points)
}

pub fn format_cloud<T: Real>(cloud: &PointCloud<T>) -> String {
    let mut out = format!("2 {}\n", cloud.len());
    for p in cloud.points() {
        out.push_str(&format!("{} {}\n", p.x, p.y));
    }
    out
}

pub fn load_cloud<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text)
}

pub fn save_cloud<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    std::fs::write(path, format_cloud(cloud)).map_err(|e| Error::io(path, e))
}
