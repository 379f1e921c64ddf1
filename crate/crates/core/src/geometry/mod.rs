//! Meshes of the computational domain, point location, piecewise linear
//! interpolation and node classification.

mod domain;
mod io;
mod mesh;

pub use domain::{DomainDescriptor, DomainKind};
pub use io::{format_mesh, load_mesh, parse_mesh, save_mesh};
pub(crate) use io::{data_lines, parse_fields};
pub(crate) use mesh::fresh_id;
pub use mesh::{GridTag, Location, Mesh};

use crate::error::{Error, Result};
use crate::real::{geom_tol, Point2, Real};

/// Partition of the nodes into the interior set, where the scheme is
/// imposed, and the boundary layer, where the extended boundary datum is.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClassification {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    is_interior: Vec<bool>,
}

impl NodeClassification {
    /// Splits `0..distances.len()` by `distance > depth`.
    pub(crate) fn by_depth<T: Real>(distances: impl Iterator<Item = T>, depth: T) -> Self {
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut is_interior = Vec::new();
        for (k, d) in distances.enumerate() {
            let inside = d > depth;
            is_interior.push(inside);
            if inside {
                interior.push(k);
            } else {
                boundary.push(k);
            }
        }
        Self {
            interior,
            boundary,
            is_interior,
        }
    }

    #[inline]
    pub fn is_interior(&self, node: usize) -> bool {
        self.is_interior.get(node).copied().unwrap_or(false)
    }

    pub fn num_nodes(&self) -> usize {
        self.is_interior.len()
    }
}

/// Nodes at distance greater than `2ε` from the boundary are interior, the
/// rest form the boundary layer.
pub fn classify_nodes<T: Real>(
    mesh: &Mesh<T>,
    domain: &DomainDescriptor<T>,
    eps: T,
) -> Result<NodeClassification> {
    classify_nodes_with_reach(mesh, domain, eps, T::one())
}

/// As [`classify_nodes`], for stencils reaching `reach·ε` from their center
/// (`reach > 1` for anisotropic direction sets). Interior nodes are those at
/// distance greater than `2·reach·ε`.
pub fn classify_nodes_with_reach<T: Real>(
    mesh: &Mesh<T>,
    domain: &DomainDescriptor<T>,
    eps: T,
    reach: T,
) -> Result<NodeClassification> {
    if !(eps > T::zero()) || eps > domain.diameter {
        return Err(Error::InvalidScale(format!(
            "eps = {eps} must lie in (0, diam] with diam = {}",
            domain.diameter
        )));
    }
    let depth = T::lit(2.0) * reach * eps;
    let nodes = NodeClassification::by_depth(
        mesh.vertices().iter().map(|&v| domain.distance_to_boundary(v)),
        depth,
    );
    if nodes.interior.is_empty() {
        return Err(Error::ScaleTooCoarse {
            depth: depth.as_f64(),
        });
    }
    if eps < mesh.mesh_size() {
        return Err(Error::InvalidScale(format!(
            "eps = {eps} is below the mesh size h = {}",
            mesh.mesh_size()
        )));
    }
    if nodes.boundary.is_empty() {
        return Err(Error::InvalidScale("no node lies in the boundary layer".into()));
    }
    Ok(nodes)
}

/// Sampled check of `Ω^{(h)} ⊂ Ω_h ⊂ Ω̄`: simplex vertices and barycenters
/// must lie in the closed domain, and every point of a `samples × samples`
/// grid over the bounding box lying deeper than `h` must be located.
pub fn check_domain_fit<T: Real>(
    mesh: &Mesh<T>,
    domain: &DomainDescriptor<T>,
    samples: usize,
) -> Result<()> {
    let tol = geom_tol::<T>();
    for (s, tri) in mesh.simplices().iter().enumerate() {
        let [a, b, c] = tri.map(|i| mesh.vertices()[i]);
        let g = (a + b + c) * (T::one() / T::lit(3.0));
        for p in [a, b, c, g] {
            if !domain.contains_closed(p, tol) {
                return Err(Error::InvalidArgument(format!(
                    "simplex {s} reaches outside the domain at {p}"
                )));
            }
        }
    }
    let (lo, hi) = domain.bbox;
    let n = samples.max(2);
    for j in 0..n {
        for i in 0..n {
            let t = |k: usize| T::from_usize_lossy(k) / T::from_usize_lossy(n - 1);
            let p = Point2::new(lo.x + (hi.x - lo.x) * t(i), lo.y + (hi.y - lo.y) * t(j));
            if domain.distance_to_boundary(p) > mesh.mesh_size() {
                mesh.locate(p)?;
            }
        }
    }
    Ok(())
}
