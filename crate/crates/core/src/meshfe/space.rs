use super::mesh::{BoundaryTag, Mesh};

/// Field carried by a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    /// Fluid velocity, vector P2.
    Velocity,
    /// Fluid pressure, P1.
    Pressure,
    /// Wall displacement, P2 on the interface.
    Displacement,
    /// Auxiliary velocity of the change-of-variable model, vector P2.
    Auxiliary,
    /// Interface multiplier, P2 on the interface.
    Multiplier,
    /// Scalar P2 field on the fluid domain.
    Scalar,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Velocity => "u",
            Field::Pressure => "p",
            Field::Displacement => "eta",
            Field::Auxiliary => "z",
            Field::Multiplier => "lambda",
            Field::Scalar => "scalar",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Some(match name {
            "u" => Field::Velocity,
            "p" => Field::Pressure,
            "eta" => Field::Displacement,
            "z" => Field::Auxiliary,
            "lambda" => Field::Multiplier,
            "scalar" => Field::Scalar,
            _ => return None,
        })
    }
}

/// FE coefficient vector tagged with its field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub field: Field,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn new(field: Field, values: Vec<f64>) -> Self {
        Self { field, values }
    }

    pub fn zeros(field: Field, len: usize) -> Self {
        Self {
            field,
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Affine triangle geometry: area and barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let a2 =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grad_lambda = [
            [(p[1][1] - p[2][1]) / a2, (p[2][0] - p[1][0]) / a2],
            [(p[2][1] - p[0][1]) / a2, (p[0][0] - p[2][0]) / a2],
            [(p[0][1] - p[1][1]) / a2, (p[1][0] - p[0][0]) / a2],
        ];
        Self {
            area: 0.5 * a2,
            grad_lambda,
        }
    }
}

/// P2 shape functions at barycentric point `l`; order: vertices, then edge
/// midpoints 01, 12, 20.
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for d in 0..2 {
        out[0][d] = (4.0 * l[0] - 1.0) * g[0][d];
        out[1][d] = (4.0 * l[1] - 1.0) * g[1][d];
        out[2][d] = (4.0 * l[2] - 1.0) * g[2][d];
        out[3][d] = 4.0 * (l[0] * g[1][d] + l[1] * g[0][d]);
        out[4][d] = 4.0 * (l[1] * g[2][d] + l[2] * g[1][d]);
        out[5][d] = 4.0 * (l[2] * g[0][d] + l[0] * g[2][d]);
    }
    out
}

/// 1D quadratic shape functions on `[0, 1]` with nodes at 0, 1/2, 1.
#[inline]
pub fn p2_1d_values(s: f64) -> [f64; 3] {
    [
        (1.0 - s) * (1.0 - 2.0 * s),
        4.0 * s * (1.0 - s),
        s * (2.0 * s - 1.0),
    ]
}

/// Derivatives with respect to the reference coordinate `s`.
#[inline]
pub fn p2_1d_derivatives(s: f64) -> [f64; 3] {
    [4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0]
}

/// Mesh plus the DOF layout of every discrete space.
///
/// * velocity: P2 node `n` carries DOFs `2n` (x) and `2n + 1` (y);
///   P2 node `(I, J)` of the refined grid has index `I (2 ny + 1) + J`
/// * pressure: one DOF per mesh vertex
/// * displacement / multiplier: one DOF per P2 node on the interface, left to right
#[derive(Debug, Clone)]
pub struct FeSystem {
    pub mesh: Mesh,
    pub nodes: Vec<[f64; 2]>,
    /// P2 node indices per triangle, ordered as in [`p2_values`].
    pub p2_triangles: Vec<[usize; 6]>,
    /// P2 node of each interface DOF.
    pub interface_nodes: Vec<usize>,
}

pub fn build_system(mesh: Mesh) -> FeSystem {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let rows = 2 * ny + 1;
    let mut nodes = Vec::with_capacity((2 * nx + 1) * rows);
    for i in 0..=2 * nx {
        for j in 0..=2 * ny {
            nodes.push([
                mesh.length * i as f64 / (2 * nx) as f64,
                mesh.height * j as f64 / (2 * ny) as f64,
            ]);
        }
    }
    let grid = |v: usize| (2 * (v / (ny + 1)), 2 * (v % (ny + 1)));
    let node_of = |a: (usize, usize)| a.0 * rows + a.1;
    let mid = |a: (usize, usize), b: (usize, usize)| ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
    let p2_triangles = mesh
        .triangles
        .iter()
        .map(|&[a, b, c]| {
            let (ga, gb, gc) = (grid(a), grid(b), grid(c));
            [
                node_of(ga),
                node_of(gb),
                node_of(gc),
                node_of(mid(ga, gb)),
                node_of(mid(gb, gc)),
                node_of(mid(gc, ga)),
            ]
        })
        .collect();
    let interface_nodes = (0..=2 * nx).map(|i| i * rows + 2 * ny).collect();
    FeSystem {
        mesh,
        nodes,
        p2_triangles,
        interface_nodes,
    }
}

impl FeSystem {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `N_h^u`
    pub fn n_velocity(&self) -> usize {
        2 * self.nodes.len()
    }

    /// `N_h^p`
    pub fn n_pressure(&self) -> usize {
        self.mesh.vertices.len()
    }

    /// `N_h^eta`
    pub fn n_displacement(&self) -> usize {
        self.interface_nodes.len()
    }

    pub fn dim(&self, field: Field) -> usize {
        match field {
            Field::Velocity | Field::Auxiliary => self.n_velocity(),
            Field::Pressure => self.n_pressure(),
            Field::Displacement | Field::Multiplier => self.n_displacement(),
            Field::Scalar => self.n_nodes(),
        }
    }

    #[inline]
    pub fn velocity_dof(node: usize, component: usize) -> usize {
        2 * node + component
    }

    /// Velocity DOF (y component) that interface DOF `e` maps to.
    #[inline]
    pub fn trace_dof(&self, e: usize) -> usize {
        Self::velocity_dof(self.interface_nodes[e], 1)
    }

    /// Interface vector -> velocity vector with `u_y = eta` on the interface, zero elsewhere.
    pub fn inject(&self, eta: &[f64]) -> Vec<f64> {
        assert_eq!(eta.len(), self.n_displacement());
        let mut u = vec![0.0; self.n_velocity()];
        for (e, &v) in eta.iter().enumerate() {
            u[self.trace_dof(e)] = v;
        }
        u
    }

    /// Velocity vector -> `u_y` on the interface.
    pub fn trace(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_velocity());
        (0..self.n_displacement())
            .map(|e| u[self.trace_dof(e)])
            .collect()
    }

    /// Scalar P2 field -> vertical vector field `(0, w)`.
    pub fn vertical(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n_nodes());
        let mut u = vec![0.0; self.n_velocity()];
        for (n, &v) in w.iter().enumerate() {
            u[Self::velocity_dof(n, 1)] = v;
        }
        u
    }

    /// P2 nodes on a boundary portion, in arc order (corners included).
    pub fn nodes_on(&self, tag: BoundaryTag) -> Vec<usize> {
        let (nx, ny) = (self.mesh.nx, self.mesh.ny);
        let rows = 2 * ny + 1;
        match tag {
            BoundaryTag::Interface => self.interface_nodes.clone(),
            BoundaryTag::Symmetry => (0..=2 * nx).map(|i| i * rows).collect(),
            BoundaryTag::Inlet => (0..rows).collect(),
            BoundaryTag::Outlet => (0..rows).map(|j| 2 * nx * rows + j).collect(),
        }
    }

    /// x coordinate of interface DOF `e`.
    pub fn interface_x(&self, e: usize) -> f64 {
        self.nodes[self.interface_nodes[e]][0]
    }

    pub fn element(&self, t: usize) -> Element {
        let [a, b, c] = self.mesh.triangles[t];
        let v = &self.mesh.vertices;
        Element::new([v[a], v[b], v[c]])
    }

    /// Physical point of barycentric coordinates `l` in triangle `t`.
    pub fn point(&self, t: usize, l: [f64; 3]) -> [f64; 2] {
        let [a, b, c] = self.mesh.triangles[t];
        let v = &self.mesh.vertices;
        [
            l[0] * v[a][0] + l[1] * v[b][0] + l[2] * v[c][0],
            l[0] * v[a][1] + l[1] * v[b][1] + l[2] * v[c][1],
        ]
    }

    /// Evaluates a scalar P2 field inside triangle `t`.
    pub fn eval_p2(&self, w: &[f64], t: usize, l: [f64; 3]) -> f64 {
        let phi = p2_values(l);
        self.p2_triangles[t]
            .iter()
            .zip(phi)
            .map(|(&n, p)| w[n] * p)
            .sum()
    }

    /// Nodal interpolant of `f` in the scalar P2 space.
    pub fn interpolate_p2(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Nodal interpolant of a vector function in the velocity space.
    pub fn interpolate_velocity(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_velocity()];
        for (n, p) in self.nodes.iter().enumerate() {
            let v = f(p[0], p[1]);
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        u
    }

    /// Nodal interpolant in the pressure space.
    pub fn interpolate_p1(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.vertices.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Nodal interpolant in the interface space.
    pub fn interpolate_interface(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_displacement())
            .map(|e| f(self.interface_x(e)))
            .collect()
    }
}
