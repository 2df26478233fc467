//! Random Delaunay meshes and the piecewise-constant subspaces they span.

mod basis;
mod delaunay;
mod gaussian;

pub use basis::{rasterize, StackedBasis, SubspaceBasis};
pub use delaunay::{
    delaunay_triangulate, mesh_with_k_triangles, sample_poisson_points, TriMesh, Triangulation,
    CORNERS,
};
pub use gaussian::gaussian_subspace_projector;
