//! Two-scale stencils and the discrete normalized infinity Laplacian.
//!
//! For an interior node `z` the stencil is `{z} ∪ {z + ε·v : v ∈ S}` with `S`
//! a symmetric direction set; off-node points are evaluated through the
//! piecewise linear interpolant. Location and interpolation weights are
//! computed once per `(mesh, ε, S)`.
//!
//! Sign convention: [`inf_laplacian`] returns the operator *without* the
//! leading minus, `(max + min − 2w(z)) / ε²`. Residuals negate explicitly.

use crate::directions::DirectionSet;
use crate::error::{Error, Result};
use crate::geometry::{DomainDescriptor, Mesh};
use crate::real::{Point2, Real};

/// The discretization triple: fine scale `h`, coarse scale `ε`, direction
/// resolution `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams<T> {
    pub h: T,
    pub eps: T,
    pub theta: T,
}

impl<T: Real> SchemeParams<T> {
    /// Takes `h` from the mesh and checks `h ≤ ε` and `0 < θ ≤ 1`.
    pub fn for_mesh(mesh: &Mesh<T>, eps: T, theta: T) -> Result<Self> {
        let params = Self {
            h: mesh.mesh_size(),
            eps,
            theta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > T::zero() && self.theta <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "theta = {} must lie in (0, 1]",
                self.theta
            )));
        }
        if !(self.eps >= self.h && self.h > T::zero()) {
            return Err(Error::InvalidScale(format!(
                "need 0 < h <= eps, got h = {}, eps = {}",
                self.h, self.eps
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, domain: &DomainDescriptor<T>) -> Result<()> {
        self.validate()?;
        if self.eps > domain.diameter {
            return Err(Error::InvalidScale(format!(
                "eps = {} exceeds the domain diameter {}",
                self.eps, domain.diameter
            )));
        }
        Ok(())
    }
}

/// Nodal values on a mesh or point cloud, stamped with its owner's id.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    values: Vec<T>,
    owner: u64,
}

impl<T: Real> GridFunction<T> {
    pub fn new(owner: u64, values: Vec<T>) -> Self {
        Self { values, owner }
    }

    pub fn on_mesh(mesh: &Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::GridMismatch);
        }
        Ok(Self::new(mesh.id(), values))
    }

    /// Samples `f` at every mesh vertex.
    pub fn sample(mesh: &Mesh<T>, f: impl Fn(Point2<T>) -> T) -> Self {
        Self::new(mesh.id(), mesh.vertices().iter().map(|&p| f(p)).collect())
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn owner(&self) -> u64 {
        self.owner
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `max |self − other|` over all nodes.
    pub fn max_abs_diff(&self, other: &[T]) -> T {
        self.values
            .iter()
            .zip(other)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<usize> for GridFunction<T> {
    type Output = T;
    #[inline]
    fn index(&self, k: usize) -> &T {
        &self.values[k]
    }
}

/// Anything that provides, for each of its center nodes, the extreme
/// values of a nodal function over the node's stencil (center included).
///
/// The fixed-point solver and the residuals are written against this
/// trait so that mesh stencils and cloud neighborhoods share them.
pub trait MaxMinStencil<T: Real>: Sync {
    fn owner(&self) -> u64;
    fn eps(&self) -> T;
    /// Center node of each row.
    fn centers(&self) -> &[usize];
    /// Row index of `node`, if it is a center.
    fn row_of(&self, node: usize) -> Option<usize>;
    /// `(max, min)` over the stencil of row `row`, including the center.
    fn extrema(&self, row: usize, u: &[T]) -> (T, T);

    fn check_owner(&self, w: &GridFunction<T>) -> Result<()> {
        if w.owner() != self.owner() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn row_checked(&self, node: usize) -> Result<usize> {
        self.row_of(node).ok_or(Error::NotInteriorNode(node))
    }
}

/// An interpolated stencil point: the containing simplex's vertices and
/// their barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilPoint<T> {
    pub nodes: [u32; 3],
    pub weights: [T; 3],
}

impl<T: Real> StencilPoint<T> {
    #[inline(always)]
    fn eval(&self, u: &[T]) -> T {
        let [a, b, c] = self.nodes;
        self.weights[0] * u[a as usize] + self.weights[1] * u[b as usize] + self.weights[2] * u[c as usize]
    }
}

const NO_ROW: u32 = u32::MAX;

/// Precomputed interpolation records for every interior node and direction.
#[derive(Debug, Clone)]
pub struct StencilTable<T> {
    owner: u64,
    eps: T,
    directions: usize,
    centers: Vec<usize>,
    rows: Vec<u32>,
    points: Vec<StencilPoint<T>>,
}

/// Locates `z + ε·v` for every `z` in `interior` and `v` in `dirs`.
pub fn build_stencils<T: Real>(
    mesh: &Mesh<T>,
    interior: &[usize],
    dirs: &DirectionSet<T>,
    eps: T,
) -> Result<StencilTable<T>> {
    if mesh.num_nodes() >= NO_ROW as usize {
        return Err(Error::InvalidArgument("mesh too large for 32-bit node indices".into()));
    }
    let mut rows = vec![NO_ROW; mesh.num_nodes()];
    let mut points = Vec::with_capacity(interior.len() * dirs.len());
    for (row, &z) in interior.iter().enumerate() {
        let center = *mesh
            .vertices()
            .get(z)
            .ok_or_else(|| Error::InvalidArgument(format!("node {z} out of range")))?;
        rows[z] = row as u32;
        for &v in dirs.vectors() {
            let p = center + v * eps;
            let loc = mesh.locate(p).map_err(|_| Error::StencilOutsideMesh {
                node: z,
                x: p.x.as_f64(),
                y: p.y.as_f64(),
            })?;
            let tri = mesh.simplices()[loc.simplex];
            points.push(StencilPoint {
                nodes: tri.map(|i| i as u32),
                weights: loc.weights,
            });
        }
    }
    Ok(StencilTable {
        owner: mesh.id(),
        eps,
        directions: dirs.len(),
        centers: interior.to_vec(),
        rows,
        points,
    })
}

impl<T: Real> StencilTable<T> {
    #[inline]
    pub fn num_directions(&self) -> usize {
        self.directions
    }

    /// Interpolation records of the stencil of `node`, one per direction.
    pub fn points(&self, node: usize) -> Result<&[StencilPoint<T>]> {
        let row = self.row_checked(node)?;
        Ok(self.row_points(row))
    }

    #[inline]
    fn row_points(&self, row: usize) -> &[StencilPoint<T>] {
        &self.points[row * self.directions..(row + 1) * self.directions]
    }

    /// Nodes on which the stencil values at `node` depend: the node itself
    /// and every vertex carrying a nonzero interpolation weight. Sorted.
    pub fn dependency_set(&self, node: usize) -> Result<Vec<usize>> {
        let mut deps = vec![node];
        for p in self.points(node)? {
            for (k, &w) in p.nodes.iter().zip(&p.weights) {
                if w > T::zero() {
                    deps.push(*k as usize);
                }
            }
        }
        deps.sort_unstable();
        deps.dedup();
        Ok(deps)
    }
}

impl<T: Real> MaxMinStencil<T> for StencilTable<T> {
    fn owner(&self) -> u64 {
        self.owner
    }

    fn eps(&self) -> T {
        self.eps
    }

    fn centers(&self) -> &[usize] {
        &self.centers
    }

    #[inline]
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
        for p in self.row_points(row) {
            let v = p.eval(u);
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

/// `(max_{N(z)} w − w(z)) / ε`.
pub fn s_plus<T: Real, S: MaxMinStencil<T>>(stencil: &S, w: &GridFunction<T>, z: usize) -> Result<T> {
    stencil.check_owner(w)?;
    let row = stencil.row_checked(z)?;
    let (hi, _) = stencil.extrema(row, w.values());
    Ok((hi - w[z]) / stencil.eps())
}

/// `(w(z) − min_{N(z)} w) / ε`.
pub fn s_minus<T: Real, S: MaxMinStencil<T>>(stencil: &S, w: &GridFunction<T>, z: usize) -> Result<T> {
    stencil.check_owner(w)?;
    let row = stencil.row_checked(z)?;
    let (_, lo) = stencil.extrema(row, w.values());
    Ok((w[z] - lo) / stencil.eps())
}

/// The discrete operator `(S⁺w(z) − S⁻w(z)) / ε = (max + min − 2w(z)) / ε²`.
pub fn inf_laplacian<T: Real, S: MaxMinStencil<T>>(stencil: &S, w: &GridFunction<T>, z: usize) -> Result<T> {
    stencil.check_owner(w)?;
    let row = stencil.row_checked(z)?;
    Ok(laplacian_row(stencil, row, w.values()))
}

#[inline]
pub(crate) fn laplacian_row<T: Real, S: MaxMinStencil<T> + ?Sized>(stencil: &S, row: usize, u: &[T]) -> T {
    let (hi, lo) = stencil.extrema(row, u);
    let z = stencil.centers()[row];
    let eps = stencil.eps();
    (hi + lo - (u[z] + u[z])) / (eps * eps)
}

/// `min{ −Δw(z) − f(z), w(z) − χ(z) }`.
pub fn obstacle_residual<T: Real, S: MaxMinStencil<T>>(
    stencil: &S,
    w: &GridFunction<T>,
    z: usize,
    point: Point2<T>,
    f: impl Fn(Point2<T>) -> T,
    chi: impl Fn(Point2<T>) -> T,
) -> Result<T> {
    let lap = inf_laplacian(stencil, w, z)?;
    Ok((-lap - f(point)).min(w[z] - chi(point)))
}
