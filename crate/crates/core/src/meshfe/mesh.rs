use crate::error::{Error, Result};

/// Boundary portions of the rectangular channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Compliant wall, `y = h_f`.
    Interface,
    /// `x = 0`.
    Inlet,
    /// `x = L`.
    Outlet,
    /// Symmetry line, `y = 0`.
    Symmetry,
}

/// A boundary edge with the triangle it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Vertices ordered by increasing arc parameter (x on horizontal edges, y on vertical ones).
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    pub triangle: usize,
}

/// Structured triangulation of `[0, L] x [0, h_f]`.
///
/// Vertex `(i, j)` has index `i * (ny + 1) + j`; each cell is split along the
/// diagonal from its lower-left to its upper-right corner into two
/// counter-clockwise triangles.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub height: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

pub fn build_mesh(nx: usize, ny: usize, length: f64, height: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Parameter(format!(
            "cell counts must be at least 1 (got {nx} x {ny})"
        )));
    }
    if !(length > 0.0 && height > 0.0) {
        return Err(Error::Parameter(format!(
            "domain sizes must be positive (got {length} x {height})"
        )));
    }
    let vid = |i: usize, j: usize| i * (ny + 1) + j;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            vertices.push([length * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    // cell (i, j) owns triangles 2 (i ny + j) (lower) and 2 (i ny + j) + 1 (upper)
    let lower = |i: usize, j: usize| 2 * (i * ny + j);
    let upper = |i: usize, j: usize| 2 * (i * ny + j) + 1;
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary.push(BoundaryEdge {
            vertices: [vid(i, ny), vid(i + 1, ny)],
            tag: BoundaryTag::Interface,
            triangle: upper(i, ny - 1),
        });
    }
    for i in 0..nx {
        boundary.push(BoundaryEdge {
            vertices: [vid(i, 0), vid(i + 1, 0)],
            tag: BoundaryTag::Symmetry,
            triangle: lower(i, 0),
        });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge {
            vertices: [vid(0, j), vid(0, j + 1)],
            tag: BoundaryTag::Inlet,
            triangle: upper(0, j),
        });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge {
            vertices: [vid(nx, j), vid(nx, j + 1)],
            tag: BoundaryTag::Outlet,
            triangle: lower(nx - 1, j),
        });
    }
    Ok(Mesh {
        nx,
        ny,
        length,
        height,
        vertices,
        triangles,
        boundary,
    })
}

impl Mesh {
    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    /// Twice the signed area of triangle `t`.
    pub fn signed_area2(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])
    }

    pub fn edges_with(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary.iter().filter(move |e| e.tag == tag)
    }

    /// Vertices lying on the boundary portion `tag`, in arc order.
    pub fn vertices_on(&self, tag: BoundaryTag) -> Vec<usize> {
        match tag {
            BoundaryTag::Interface => (0..=self.nx)
                .map(|i| self.vertex_index(i, self.ny))
                .collect(),
            BoundaryTag::Symmetry => (0..=self.nx).map(|i| self.vertex_index(i, 0)).collect(),
            BoundaryTag::Inlet => (0..=self.ny).map(|j| self.vertex_index(0, j)).collect(),
            BoundaryTag::Outlet => (0..=self.ny)
                .map(|j| self.vertex_index(self.nx, j))
                .collect(),
        }
    }
}
