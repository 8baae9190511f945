//! Manufactured-solution convergence studies for the explicit viscous step
//! and the Robin pressure-Poisson step.

use std::f64::consts::PI;

use crate::error::Result;
use crate::hifi::HfSolver;
use crate::linalg::sparse_solve;
use crate::meshfe::{
    apply_dirichlet, build_mesh, build_system, interface_pressure_load, p2_gradients,
    pressure_load, velocity_load, BoundaryTag, FeSystem, TRIANGLE_DEG4,
};
use crate::problem::{default_params, BoundaryData, PhysicalParams};

/// Mesh resolutions `(nx, ny)` of the study, each halving the mesh size.
pub const LEVELS: [(usize, usize); 3] = [(15, 2), (30, 4), (60, 8)];

fn system(nx: usize, ny: usize) -> Result<FeSystem> {
    let p = default_params();
    Ok(build_system(build_mesh(nx, ny, p.length, p.h_f)?))
}

fn short_params() -> PhysicalParams {
    let mut p = default_params();
    p.steps = 5;
    p.t_final = 5.0 * p.dt;
    p
}

fn h1_error(fe: &FeSystem, u: &[f64], grad: impl Fn(f64, f64) -> [[f64; 2]; 2]) -> f64 {
    let mut err = 0.0;
    for t in 0..fe.mesh.triangles.len() {
        let el = fe.element(t);
        let nodes = fe.p2_triangles[t];
        for (lam, w) in TRIANGLE_DEG4.points.iter().zip(TRIANGLE_DEG4.weights) {
            let x = fe.point(t, *lam);
            let g = p2_gradients(*lam, &el.grad_lambda);
            let exact = grad(x[0], x[1]);
            for c in 0..2 {
                for d in 0..2 {
                    let gh: f64 = (0..6).map(|a| g[a][d] * u[2 * nodes[a] + c]).sum();
                    err += w * el.area * (gh - exact[c][d]).powi(2);
                }
            }
        }
    }
    err.sqrt()
}

/// H¹-seminorm errors of the explicit viscous solve on each mesh of `levels`.
///
/// The exact field `u = (cos(kx) f(y), -sin(kx) f'(y)/k)` has zero normal
/// viscous stress on `x = 0, L` and zero shear on `y = 0`; it is imposed as
/// Dirichlet data on the interface.
pub fn explicit_operator_errors(levels: &[(usize, usize)]) -> Result<Vec<f64>> {
    let params = default_params();
    let (mu, s) = (params.mu_f, params.rho_f / params.dt);
    let k = PI / params.length;
    let a = PI / (2.0 * params.h_f) * 0.8;
    let f = move |y: f64| (a * y).cos();
    let fp = move |y: f64| -a * (a * y).sin();
    let fpp = move |y: f64| -a * a * (a * y).cos();
    let fppp = move |y: f64| a * a * a * (a * y).sin();
    let ux = move |x: f64, y: f64| (k * x).cos() * f(y);
    let uy = move |x: f64, y: f64| -(k * x).sin() * fp(y) / k;
    let grad = move |x: f64, y: f64| {
        [
            [-k * (k * x).sin() * f(y), (k * x).cos() * fp(y)],
            [-(k * x).cos() * fp(y), -(k * x).sin() * fpp(y) / k],
        ]
    };
    // s u - div(2 mu eps(u)) = s u - mu (lap u + grad div u)
    let force = move |x: f64, y: f64| {
        let (c, sn) = ((k * x).cos(), (k * x).sin());
        let lap_x = -k * k * c * f(y) + c * fpp(y);
        let lap_y = k * sn * fp(y) - sn * fppp(y) / k;
        let gdiv_x = -k * k * c * f(y) - c * fpp(y);
        let gdiv_y = -k * sn * fp(y) - sn * fppp(y) / k;
        [
            s * ux(x, y) - mu * (lap_x + gdiv_x),
            s * uy(x, y) - mu * (lap_y + gdiv_y),
        ]
    };
    let mut errors = Vec::new();
    for &(nx, ny) in levels {
        let fe = system(nx, ny)?;
        let solver = HfSolver::new(&fe, short_params(), BoundaryData::zero())?;
        let rhs = velocity_load(&fe, force);
        let top = params.h_f;
        let bx: Vec<f64> = (0..fe.n_displacement())
            .map(|e| ux(fe.interface_x(e), top))
            .collect();
        let by: Vec<f64> = (0..fe.n_displacement())
            .map(|e| uy(fe.interface_x(e), top))
            .collect();
        let u = solver.solve_explicit(&rhs, &bx, &by);
        errors.push(h1_error(&fe, &u, grad));
    }
    Ok(errors)
}

/// L² errors of the pressure solve with a Robin condition on the interface
/// and Dirichlet data on inlet and outlet, on each mesh of `levels`.
pub fn pressure_operator_errors(levels: &[(usize, usize)]) -> Result<Vec<f64>> {
    let params = default_params();
    let alpha = params.alpha_rob;
    let b = PI / (3.0 * params.h_f);
    let l = params.length;
    let exact = move |x: f64, y: f64| (x / l).exp() * (b * y).cos();
    let source = move |x: f64, y: f64| -(1.0 / (l * l) - b * b) * exact(x, y);
    let top = params.h_f;
    let robin = move |x: f64| (x / l).exp() * (-b * (b * top).sin() + alpha * (b * top).cos());
    let mut errors = Vec::new();
    for &(nx, ny) in levels {
        let fe = system(nx, ny)?;
        let solver = HfSolver::new(&fe, short_params(), BoundaryData::zero())?;
        let mut rhs = pressure_load(&fe, source);
        let g = interface_pressure_load(&fe, robin);
        rhs.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        let dofs: Vec<usize> = fe
            .mesh
            .vertices_on(BoundaryTag::Inlet)
            .into_iter()
            .chain(fe.mesh.vertices_on(BoundaryTag::Outlet))
            .collect();
        let values: Vec<f64> = dofs
            .iter()
            .map(|&v| exact(fe.mesh.vertices[v][0], fe.mesh.vertices[v][1]))
            .collect();
        let (m, r) = apply_dirichlet(&solver.operators().pressure_lhs, &rhs, &dofs, &values)?;
        let p = sparse_solve(&m, &r)?;
        let mut err = 0.0;
        for t in 0..fe.mesh.triangles.len() {
            let el = fe.element(t);
            let vs = fe.mesh.triangles[t];
            for (lam, w) in TRIANGLE_DEG4.points.iter().zip(TRIANGLE_DEG4.weights) {
                let x = fe.point(t, *lam);
                let ph: f64 = (0..3).map(|a| lam[a] * p[vs[a]]).sum();
                err += w * el.area * (ph - exact(x[0], x[1])).powi(2);
            }
        }
        errors.push(err.sqrt());
    }
    Ok(errors)
}

/// Observed orders `log2(e_i / e_{i+1})` between consecutive halvings.
pub fn observed_rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
