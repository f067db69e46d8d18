//! Meshes, isoparametric elements, boundary conditions and the assembly
//! primitives shared by the solvers.

mod assembly;
mod bc;
mod element;
mod linsolve;
mod mesh;
mod mesh_io;

pub use assembly::{
    assemble_external_force, assemble_scaled_laplacian, deformation_gradient, gradient_of_field,
    integrate_gradient_form,
};
pub use bc::{BoundaryConditions, Dirichlet, DofMap, FieldDofs, Traction};
pub use element::{ElementType, ShapeEval};
pub use linsolve::{count_null_modes, node_ordering, BandedLu, LinearSolverKind, ReducedSystem};
pub use mesh::{Mesh, QuadraturePointData};
pub use mesh_io::{format_mesh, parse_mesh, read_mesh, write_mesh};
