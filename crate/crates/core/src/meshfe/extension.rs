//! Harmonic extension of an interface displacement into the fluid domain.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::assembly::{assemble, Form};
use super::dirichlet::DirichletSolver;
use super::mesh::BoundaryTag;
use super::space::FeSystem;
use crate::error::Result;
use crate::problem::PhysicalParams;

/// Solves `-Laplace w = 0` with `w = eta` on the interface and `w = 0` on the
/// rest of the boundary. The Laplacian is factored once.
#[derive(Debug)]
pub struct HarmonicExtension {
    solver: DirichletSolver,
    n_interface: usize,
    solves: AtomicUsize,
}

impl HarmonicExtension {
    pub fn new(fe: &FeSystem, params: &PhysicalParams) -> Result<Self> {
        let k = assemble(Form::ScalarLaplacian, fe, params);
        let mut dofs = fe.interface_nodes.clone();
        let mut seen = vec![false; fe.n_nodes()];
        for &n in &dofs {
            seen[n] = true;
        }
        for tag in [
            BoundaryTag::Inlet,
            BoundaryTag::Outlet,
            BoundaryTag::Symmetry,
        ] {
            for n in fe.nodes_on(tag) {
                if !seen[n] {
                    seen[n] = true;
                    dofs.push(n);
                }
            }
        }
        Ok(Self {
            solver: DirichletSolver::new(&k, &dofs)?,
            n_interface: fe.interface_nodes.len(),
            solves: AtomicUsize::new(0),
        })
    }

    /// Scalar P2 extension of `eta`.
    pub fn extend(&self, eta: &[f64]) -> Vec<f64> {
        assert_eq!(eta.len(), self.n_interface);
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut values = vec![0.0; self.solver.dofs().len()];
        values[..self.n_interface].copy_from_slice(eta);
        self.solver.solve(&vec![0.0; self.solver.dim()], &values)
    }

    /// Velocity-space field `(0, w)` with `w` the extension of `eta`.
    pub fn extend_vertical(&self, fe: &FeSystem, eta: &[f64]) -> Vec<f64> {
        fe.vertical(&self.extend(eta))
    }

    /// Number of extension solves performed so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}
