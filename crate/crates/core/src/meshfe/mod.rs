//! Mesh, finite element spaces and operator assembly.

pub(crate) mod assembly;
mod dirichlet;
mod extension;
mod mesh;
mod quadrature;
mod space;

pub use assembly::{
    assemble, assemble_by_id, interface_load, interface_pressure_load, pressure_load,
    traction_load, velocity_load, Form,
};
pub use dirichlet::{apply_dirichlet, DirichletSolver};
pub use extension::HarmonicExtension;
pub use mesh::{build_mesh, BoundaryEdge, BoundaryTag, Mesh};
pub use quadrature::{EdgeRule, TriangleRule, EDGE_GAUSS3, TRIANGLE_DEG4};
pub use space::{
    build_system, p2_1d_derivatives, p2_1d_values, p2_gradients, p2_values, Element, FeSystem,
    Field, FieldVector,
};
