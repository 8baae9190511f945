//! Assembly of every bilinear form used by the solver and the reduced models.
//!
//! Volume terms use the degree-4 triangle rule and interface terms the
//! 3-point Gauss rule, so all constant-coefficient P2 x P2 forms are exact.
//! Elements are visited in index order, which fixes the summation order.

use std::str::FromStr;

use super::mesh::BoundaryTag;
use super::quadrature::{EDGE_GAUSS3, TRIANGLE_DEG4};
use super::space::{p2_1d_derivatives, p2_1d_values, p2_gradients, p2_values, FeSystem};
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::problem::PhysicalParams;

/// Identifier of an assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Form {
    /// `rho_f / dt (u, v)`, velocity x velocity.
    VelocityMass,
    /// `(2 mu_f eps(u), grad v)`, velocity x velocity.
    Viscous,
    /// `(grad p, v)`, velocity rows x pressure columns.
    PressureGradient,
    /// `(div u, q)`, pressure rows x velocity columns.
    Divergence,
    /// `(grad p, grad q)`.
    PressureStiffness,
    /// `(p, q)` on the interface, pressure x pressure.
    InterfacePressureMass,
    /// `(eta, zeta)` on the interface.
    DisplacementMass,
    /// `(d_x eta, d_x zeta)` on the interface.
    DisplacementStiffness,
    /// `(zeta, q)` on the interface, pressure rows x displacement columns.
    InterfaceMixedMass,
    /// `(lambda, v . n)` on the interface, velocity rows x interface columns.
    NormalCoupling,
    /// `(grad w, grad v)` for scalar P2 fields.
    ScalarLaplacian,
    /// `(p, q)` on the fluid domain.
    PressureMass,
    /// `(grad u, grad v)` for vector P2 fields (H1 seminorm weight).
    VelocityH1,
    /// `-(2 mu_f d_y u_y, zeta)` on the interface, displacement rows x velocity columns.
    NormalViscousTraction,
}

impl Form {
    pub const ALL: [Form; 14] = [
        Form::VelocityMass,
        Form::Viscous,
        Form::PressureGradient,
        Form::Divergence,
        Form::PressureStiffness,
        Form::InterfacePressureMass,
        Form::DisplacementMass,
        Form::DisplacementStiffness,
        Form::InterfaceMixedMass,
        Form::NormalCoupling,
        Form::ScalarLaplacian,
        Form::PressureMass,
        Form::VelocityH1,
        Form::NormalViscousTraction,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Form::VelocityMass => "M_u",
            Form::Viscous => "A_visc",
            Form::PressureGradient => "G",
            Form::Divergence => "B",
            Form::PressureStiffness => "K_p",
            Form::InterfacePressureMass => "M_Sigma_p",
            Form::DisplacementMass => "M_E",
            Form::DisplacementStiffness => "K_E",
            Form::InterfaceMixedMass => "M_Sigma_E",
            Form::NormalCoupling => "C_n",
            Form::ScalarLaplacian => "K_Omega",
            Form::PressureMass => "M_p",
            Form::VelocityH1 => "H1_u",
            Form::NormalViscousTraction => "T_u",
        }
    }
}

impl FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s
            .replace('Σ', "Sigma_")
            .replace('Ω', "Omega")
            .replace("__", "_");
        let normalized = normalized.trim_end_matches('_');
        Form::ALL
            .iter()
            .copied()
            .find(|f| f.id() == normalized || f.id().replace("Sigma_", "Sigma") == normalized)
            .ok_or_else(|| Error::Usage(format!("unknown form id '{s}'")))
    }
}

/// Assembles the named form by id (`"M_u"`, `"A_visc"`, `"K_Ω"`, ...).
pub fn assemble_by_id(id: &str, fe: &FeSystem, params: &PhysicalParams) -> Result<SparseMatrix> {
    Ok(assemble(id.parse()?, fe, params))
}

pub fn assemble(form: Form, fe: &FeSystem, params: &PhysicalParams) -> SparseMatrix {
    let nu = fe.n_velocity();
    let np = fe.n_pressure();
    let ne = fe.n_displacement();
    let nn = fe.n_nodes();
    match form {
        Form::VelocityMass => volume(fe, nu, nu, |q, b| {
            let s = params.rho_f / params.dt;
            for a in 0..6 {
                for c in 0..6 {
                    let m = s * q.w * q.phi[a] * q.phi[c];
                    for d in 0..2 {
                        b.add(2 * q.nodes[a] + d, 2 * q.nodes[c] + d, m);
                    }
                }
            }
        }),
        Form::Viscous => volume(fe, nu, nu, |q, b| {
            // mu * (delta_cd grad N_a . grad N_b + d_d N_a d_c N_b), trial (a, c), test (b, d)
            let mu = params.mu_f;
            for tb in 0..6 {
                for ta in 0..6 {
                    let (ga, gb) = (q.grad[ta], q.grad[tb]);
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    for d in 0..2 {
                        for c in 0..2 {
                            let mut v = ga[d] * gb[c];
                            if c == d {
                                v += dot;
                            }
                            b.add(2 * q.nodes[tb] + d, 2 * q.nodes[ta] + c, mu * q.w * v);
                        }
                    }
                }
            }
        }),
        Form::PressureGradient => volume(fe, nu, np, |q, b| {
            for tb in 0..6 {
                for a in 0..3 {
                    for d in 0..2 {
                        b.add(
                            2 * q.nodes[tb] + d,
                            q.verts[a],
                            q.w * q.glam[a][d] * q.phi[tb],
                        );
                    }
                }
            }
        }),
        Form::Divergence => volume(fe, np, nu, |q, b| {
            for r in 0..3 {
                for ta in 0..6 {
                    for c in 0..2 {
                        b.add(
                            q.verts[r],
                            2 * q.nodes[ta] + c,
                            q.w * q.grad[ta][c] * q.lam[r],
                        );
                    }
                }
            }
        }),
        Form::PressureStiffness => volume(fe, np, np, |q, b| {
            for r in 0..3 {
                for a in 0..3 {
                    let g = q.glam[a][0] * q.glam[r][0] + q.glam[a][1] * q.glam[r][1];
                    b.add(q.verts[r], q.verts[a], q.w * g);
                }
            }
        }),
        Form::PressureMass => volume(fe, np, np, |q, b| {
            for r in 0..3 {
                for a in 0..3 {
                    b.add(q.verts[r], q.verts[a], q.w * q.lam[a] * q.lam[r]);
                }
            }
        }),
        Form::ScalarLaplacian => volume(fe, nn, nn, |q, b| {
            for tb in 0..6 {
                for ta in 0..6 {
                    let (ga, gb) = (q.grad[ta], q.grad[tb]);
                    b.add(
                        q.nodes[tb],
                        q.nodes[ta],
                        q.w * (ga[0] * gb[0] + ga[1] * gb[1]),
                    );
                }
            }
        }),
        Form::VelocityH1 => volume(fe, nu, nu, |q, b| {
            for tb in 0..6 {
                for ta in 0..6 {
                    let (ga, gb) = (q.grad[ta], q.grad[tb]);
                    let v = q.w * (ga[0] * gb[0] + ga[1] * gb[1]);
                    for d in 0..2 {
                        b.add(2 * q.nodes[tb] + d, 2 * q.nodes[ta] + d, v);
                    }
                }
            }
        }),
        Form::InterfacePressureMass => interface(fe, np, np, |q, b| {
            for r in 0..2 {
                for a in 0..2 {
                    b.add(q.verts[r], q.verts[a], q.w * q.lin[a] * q.lin[r]);
                }
            }
        }),
        Form::DisplacementMass => interface(fe, ne, ne, |q, b| {
            for r in 0..3 {
                for a in 0..3 {
                    b.add(q.dofs[r], q.dofs[a], q.w * q.quad[a] * q.quad[r]);
                }
            }
        }),
        Form::DisplacementStiffness => interface(fe, ne, ne, |q, b| {
            for r in 0..3 {
                for a in 0..3 {
                    b.add(q.dofs[r], q.dofs[a], q.w * q.dquad[a] * q.dquad[r]);
                }
            }
        }),
        Form::InterfaceMixedMass => interface(fe, np, ne, |q, b| {
            for r in 0..2 {
                for a in 0..3 {
                    b.add(q.verts[r], q.dofs[a], q.w * q.quad[a] * q.lin[r]);
                }
            }
        }),
        Form::NormalCoupling => interface(fe, nu, ne, |q, b| {
            for r in 0..3 {
                for a in 0..3 {
                    b.add(
                        fe.trace_dof(q.dofs[r]),
                        q.dofs[a],
                        q.w * q.quad[a] * q.quad[r],
                    );
                }
            }
        }),
        Form::NormalViscousTraction => interface(fe, ne, nu, |q, b| {
            for r in 0..3 {
                for ta in 0..6 {
                    let v = -2.0 * params.mu_f * q.w * q.quad[r] * q.grad[ta][1];
                    b.add(q.dofs[r], 2 * q.nodes[ta] + 1, v);
                }
            }
        }),
    }
}

/// Per-quadrature-point data of a volume integral.
pub(crate) struct VolumePoint<'a> {
    /// weight times area
    pub w: f64,
    pub lam: [f64; 3],
    pub glam: [[f64; 2]; 3],
    pub phi: [f64; 6],
    pub grad: [[f64; 2]; 6],
    pub nodes: &'a [usize; 6],
    pub verts: &'a [usize; 3],
    pub x: [f64; 2],
}

pub(crate) fn for_each_volume_point(fe: &FeSystem, mut f: impl FnMut(&VolumePoint)) {
    for t in 0..fe.mesh.triangles.len() {
        let el = fe.element(t);
        for (l, &w) in TRIANGLE_DEG4.points.iter().zip(TRIANGLE_DEG4.weights) {
            let q = VolumePoint {
                w: w * el.area,
                lam: *l,
                glam: el.grad_lambda,
                phi: p2_values(*l),
                grad: p2_gradients(*l, &el.grad_lambda),
                nodes: &fe.p2_triangles[t],
                verts: &fe.mesh.triangles[t],
                x: fe.point(t, *l),
            };
            f(&q);
        }
    }
}

fn volume(
    fe: &FeSystem,
    rows: usize,
    cols: usize,
    mut f: impl FnMut(&VolumePoint, &mut TripletBuilder),
) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(rows, cols, fe.mesh.triangles.len() * 6 * 144);
    for_each_volume_point(fe, |q| f(q, &mut b));
    b.build()
}

/// Per-quadrature-point data of an interface integral.
pub(crate) struct InterfacePoint {
    /// weight times edge length
    pub w: f64,
    pub x: f64,
    /// P1 traces of the two edge vertices
    pub lin: [f64; 2],
    pub verts: [usize; 2],
    /// 1D P2 values and x-derivatives
    pub quad: [f64; 3],
    pub dquad: [f64; 3],
    pub dofs: [usize; 3],
    /// gradients of the adjacent triangle's P2 functions
    pub grad: [[f64; 2]; 6],
    pub nodes: [usize; 6],
}

pub(crate) fn for_each_interface_point(
    fe: &FeSystem,
    points: &[f64],
    weights: &[f64],
    mut f: impl FnMut(&InterfacePoint),
) {
    let ny = fe.mesh.ny;
    for edge in fe.mesh.edges_with(BoundaryTag::Interface) {
        let [v0, v1] = edge.vertices;
        let i0 = v0 / (ny + 1);
        let (p0, p1) = (fe.mesh.vertices[v0], fe.mesh.vertices[v1]);
        let h = p1[0] - p0[0];
        let tri = fe.mesh.triangles[edge.triangle];
        let la = tri
            .iter()
            .position(|&v| v == v0)
            .expect("edge vertex in triangle");
        let lb = tri
            .iter()
            .position(|&v| v == v1)
            .expect("edge vertex in triangle");
        let el = fe.element(edge.triangle);
        for (&s, &w) in points.iter().zip(weights) {
            let mut l = [0.0; 3];
            l[la] = 1.0 - s;
            l[lb] = s;
            let d = p2_1d_derivatives(s);
            let q = InterfacePoint {
                w: w * h,
                x: p0[0] + s * h,
                lin: [1.0 - s, s],
                verts: [v0, v1],
                quad: p2_1d_values(s),
                dquad: [d[0] / h, d[1] / h, d[2] / h],
                dofs: [2 * i0, 2 * i0 + 1, 2 * i0 + 2],
                grad: p2_gradients(l, &el.grad_lambda),
                nodes: fe.p2_triangles[edge.triangle],
            };
            f(&q);
        }
    }
}

fn interface(
    fe: &FeSystem,
    rows: usize,
    cols: usize,
    mut f: impl FnMut(&InterfacePoint, &mut TripletBuilder),
) -> SparseMatrix {
    let mut b = TripletBuilder::new(rows, cols);
    for_each_interface_point(fe, EDGE_GAUSS3.points, EDGE_GAUSS3.weights, |q| {
        f(q, &mut b)
    });
    b.build()
}

/// Wall load `int_Sigma (p - 2 mu_f d_y u_y) zeta_i ds`, i.e. minus the normal
/// fluid stress, evaluated from the fluid triangle adjacent to each interface facet.
pub fn traction_load(u: &[f64], p: &[f64], fe: &FeSystem, params: &PhysicalParams) -> Vec<f64> {
    traction_load_with_rule(u, p, fe, params, EDGE_GAUSS3.points, EDGE_GAUSS3.weights)
}

pub(crate) fn traction_load_with_rule(
    u: &[f64],
    p: &[f64],
    fe: &FeSystem,
    params: &PhysicalParams,
    points: &[f64],
    weights: &[f64],
) -> Vec<f64> {
    assert_eq!(u.len(), fe.n_velocity());
    assert_eq!(p.len(), fe.n_pressure());
    let mut load = vec![0.0; fe.n_displacement()];
    for_each_interface_point(fe, points, weights, |q| {
        let pv = q.lin[0] * p[q.verts[0]] + q.lin[1] * p[q.verts[1]];
        let dyuy: f64 = (0..6).map(|a| q.grad[a][1] * u[2 * q.nodes[a] + 1]).sum();
        let traction = pv - 2.0 * params.mu_f * dyuy;
        for r in 0..3 {
            load[q.dofs[r]] += q.w * traction * q.quad[r];
        }
    });
    load
}

/// `int f . v` for every velocity test function.
pub fn velocity_load(fe: &FeSystem, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_velocity()];
    for_each_volume_point(fe, |q| {
        let v = f(q.x[0], q.x[1]);
        for a in 0..6 {
            out[2 * q.nodes[a]] += q.w * v[0] * q.phi[a];
            out[2 * q.nodes[a] + 1] += q.w * v[1] * q.phi[a];
        }
    });
    out
}

/// `int f q` for every pressure test function.
pub fn pressure_load(fe: &FeSystem, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_pressure()];
    for_each_volume_point(fe, |q| {
        let v = f(q.x[0], q.x[1]);
        for a in 0..3 {
            out[q.verts[a]] += q.w * v * q.lam[a];
        }
    });
    out
}

/// `int_Sigma g q ds` for every pressure test function.
pub fn interface_pressure_load(fe: &FeSystem, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_pressure()];
    for_each_interface_point(fe, EDGE_GAUSS3.points, EDGE_GAUSS3.weights, |q| {
        let v = g(q.x);
        for a in 0..2 {
            out[q.verts[a]] += q.w * v * q.lin[a];
        }
    });
    out
}

/// `int_Sigma g zeta ds` for every interface test function.
pub fn interface_load(fe: &FeSystem, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_displacement()];
    for_each_interface_point(fe, EDGE_GAUSS3.points, EDGE_GAUSS3.weights, |q| {
        let v = g(q.x);
        for a in 0..3 {
            out[q.dofs[a]] += q.w * v * q.quad[a];
        }
    });
    out
}
