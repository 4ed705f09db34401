//! Triangulated unit disk, its boundary loop, and the P1 finite-element
//! matrices for the bulk and for the closed boundary curve.
//!
//! The coarsest mesh is a fan of six triangles around the origin. Each
//! refinement splits every triangle into four through its edge midpoints;
//! midpoints of boundary edges are pushed radially onto the unit circle, so
//! all boundary vertices lie on the circle and the boundary edges are
//! chords. The surface operators live on that polygonal loop.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::{Error, Result};

/// Largest refinement level accepted by [`build_disk_mesh`].
pub const MAX_REFINEMENT_LEVEL: u32 = 8;

/// Triangle areas below this fraction of the mean area are rejected by
/// [`assemble_fem`].
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_loop: Vec<usize>,
    node_weights_bulk: Vec<f64>,
    node_weights_surface: Vec<f64>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

impl TriMesh {
    /// Builds a mesh from raw vertices and counter-clockwise triangles,
    /// extracting the boundary loop and the lumped node weights.
    ///
    /// The boundary must form a single closed curve traversed
    /// counter-clockwise.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }
        let boundary_loop = extract_boundary_loop(vertices.len(), &triangles)?;

        let mut node_weights_bulk = vec![0.0; vertices.len()];
        for tri in &triangles {
            let third = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) / 3.0;
            for &v in tri {
                node_weights_bulk[v] += third;
            }
        }
        if let Some(v) = node_weights_bulk.iter().position(|&w| w == 0.0) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }

        let k = boundary_loop.len();
        let mut node_weights_surface = vec![0.0; k];
        for e in 0..k {
            let h = distance(vertices[boundary_loop[e]], vertices[boundary_loop[(e + 1) % k]]);
            node_weights_surface[e] += 0.5 * h;
            node_weights_surface[(e + 1) % k] += 0.5 * h;
        }

        Ok(Self {
            vertices,
            triangles,
            boundary_loop,
            node_weights_bulk,
            node_weights_surface,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary vertices in counter-clockwise order. The loop is closed:
    /// the last vertex connects back to the first.
    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    /// Lumped area per vertex (one third of each incident triangle).
    pub fn node_weights_bulk(&self) -> &[f64] {
        &self.node_weights_bulk
    }

    /// Lumped arclength per boundary-loop position.
    pub fn node_weights_surface(&self) -> &[f64] {
        &self.node_weights_surface
    }

    pub fn n_bulk(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_surface(&self) -> usize {
        self.boundary_loop.len()
    }

    pub fn boundary_points(&self) -> Vec<[f64; 2]> {
        self.boundary_loop.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Length of the closed boundary polygon.
    pub fn boundary_length(&self) -> f64 {
        let k = self.boundary_loop.len();
        (0..k)
            .map(|e| {
                distance(
                    self.vertices[self.boundary_loop[e]],
                    self.vertices[self.boundary_loop[(e + 1) % k]],
                )
            })
            .sum()
    }

    /// Maximum edge length.
    pub fn mesh_size(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .map(|(a, b)| distance(self.vertices[a], self.vertices[b]))
            })
            .fold(0.0, f64::max)
    }

    /// Restricts a bulk nodal field to the boundary loop.
    pub fn trace(&self, bulk: &[f64]) -> Vec<f64> {
        self.boundary_loop.iter().map(|&v| bulk[v]).collect()
    }
}

/// Boundary edges are the edges used by exactly one triangle; their
/// orientation inside that triangle gives the counter-clockwise loop.
fn extract_boundary_loop(n_vertices: usize, triangles: &[[usize; 3]]) -> Result<Vec<usize>> {
    let mut edges: BTreeMap<(usize, usize), (usize, usize, usize)> = BTreeMap::new();
    for tri in triangles {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            let key = (a.min(b), a.max(b));
            let entry = edges.entry(key).or_insert((0, a, b));
            entry.0 += 1;
        }
    }
    let mut next = vec![usize::MAX; n_vertices];
    let mut n_boundary = 0;
    for (&(a, b), &(count, from, to)) in &edges {
        match count {
            1 => {
                if next[from] != usize::MAX {
                    return Err(Error::InvalidMesh(format!(
                        "boundary vertex {from} starts two boundary edges"
                    )));
                }
                next[from] = to;
                n_boundary += 1;
            }
            2 => {}
            _ => {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) is shared by {count} triangles"
                )))
            }
        }
    }
    let start = next
        .iter()
        .position(|&n| n != usize::MAX)
        .ok_or_else(|| Error::InvalidMesh("mesh has no boundary".into()))?;
    let mut loop_ = Vec::with_capacity(n_boundary);
    let mut v = start;
    loop {
        loop_.push(v);
        v = next[v];
        if v == usize::MAX {
            return Err(Error::InvalidMesh("boundary is not closed".into()));
        }
        if v == start {
            break;
        }
        if loop_.len() > n_boundary {
            return Err(Error::InvalidMesh("boundary traversal does not return to its start".into()));
        }
    }
    if loop_.len() != n_boundary {
        return Err(Error::InvalidMesh(format!(
            "boundary has several components ({} of {} edges in the first loop)",
            loop_.len(),
            n_boundary
        )));
    }
    Ok(loop_)
}

/// Triangulation of the unit disk at the given refinement level.
///
/// Level 0 is the regular hexagon fan (7 vertices, 6 triangles); each level
/// multiplies the triangle count by four and doubles the boundary vertices.
pub fn build_disk_mesh(refinement_level: u32) -> Result<TriMesh> {
    if refinement_level > MAX_REFINEMENT_LEVEL {
        return Err(Error::Capacity {
            what: "refinement level",
            requested: refinement_level as usize,
            limit: MAX_REFINEMENT_LEVEL as usize,
        });
    }
    let mut vertices = vec![[0.0, 0.0]];
    for k in 0..6 {
        let theta = k as f64 * PI / 3.0;
        vertices.push([libm::cos(theta), libm::sin(theta)]);
    }
    let mut triangles: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    let mut boundary: Vec<usize> = (1..=6).collect();

    for _ in 0..refinement_level {
        let is_boundary_edge = {
            let k = boundary.len();
            let mut set = BTreeMap::new();
            for e in 0..k {
                let (a, b) = (boundary[e], boundary[(e + 1) % k]);
                set.insert((a.min(b), a.max(b)), ());
            }
            set
        };
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                if is_boundary_edge.contains_key(&key) {
                    let r = libm::hypot(m[0], m[1]);
                    m = [m[0] / r, m[1] / r];
                }
                vertices.push(m);
                vertices.len() - 1
            })
        };
        let mut refined = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            refined.push([a, ab, ca]);
            refined.push([ab, b, bc]);
            refined.push([ca, bc, c]);
            refined.push([ab, bc, ca]);
        }
        let k = boundary.len();
        let mut new_boundary = Vec::with_capacity(2 * k);
        for e in 0..k {
            let (a, b) = (boundary[e], boundary[(e + 1) % k]);
            new_boundary.push(a);
            new_boundary.push(midpoints[&(a.min(b), a.max(b))]);
        }
        triangles = refined;
        boundary = new_boundary;
    }

    let mesh = TriMesh::from_parts(vertices, triangles)?;
    debug_assert_eq!(mesh.boundary_loop.len(), boundary.len());
    Ok(mesh)
}

/// Boundary trace as an index selection in boundary-loop order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    indices: Vec<usize>,
    n_bulk: usize,
}

impl Trace {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n_bulk(&self) -> usize {
        self.n_bulk
    }

    pub fn n_surface(&self) -> usize {
        self.indices.len()
    }

    /// `T v`.
    pub fn apply(&self, bulk: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&v| bulk[v]).collect()
    }

    /// `Tᵀ s`: scatters surface values back onto the bulk nodes.
    pub fn apply_transpose(&self, surf: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_bulk];
        for (&v, &s) in self.indices.iter().zip(surf) {
            out[v] += s;
        }
        out
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.indices.len(), self.n_bulk);
        for (k, &v) in self.indices.iter().enumerate() {
            b.push(k, v, 1.0);
        }
        b.build()
    }
}

/// Assembled P1 matrices.
///
/// `mass_*` are the consistent mass matrices; `lumped_*` are their row
/// sums, which coincide with the mesh node weights.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub mass_bulk: CsrMatrix,
    pub stiffness_bulk: CsrMatrix,
    pub mass_surf: CsrMatrix,
    pub stiffness_surf: CsrMatrix,
    pub trace: Trace,
    pub lumped_bulk: Vec<f64>,
    pub lumped_surf: Vec<f64>,
}

pub fn assemble_fem(mesh: &TriMesh) -> Result<FemMatrices> {
    let n = mesh.n_bulk();
    let n_tri = mesh.triangles.len();
    let mean_area = mesh.area() / n_tri as f64;
    let threshold = DEGENERATE_AREA_FRACTION * mean_area;

    let mut mass = TripletBuilder::new(n, n);
    let mut stiff = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        let area = signed_area(p[0], p[1], p[2]);
        if area < threshold {
            return Err(Error::DegenerateTriangle {
                index: t,
                area,
                threshold,
            });
        }
        // gradient of the i-th barycentric coordinate is (b_i, c_i) / (2 area)
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        for i in 0..3 {
            for j in 0..3 {
                stiff.push(tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mass.push(tri[i], tri[j], m);
            }
        }
    }

    let k = mesh.n_surface();
    let mut mass_s = TripletBuilder::new(k, k);
    let mut stiff_s = TripletBuilder::new(k, k);
    for e in 0..k {
        let (a, b) = (e, (e + 1) % k);
        let h = distance(
            mesh.vertices[mesh.boundary_loop[a]],
            mesh.vertices[mesh.boundary_loop[b]],
        );
        for (i, j, sign) in [(a, a, 1.0), (a, b, -1.0), (b, a, -1.0), (b, b, 1.0)] {
            stiff_s.push(i, j, sign / h);
            mass_s.push(i, j, if i == j { h / 3.0 } else { h / 6.0 });
        }
    }

    Ok(FemMatrices {
        mass_bulk: mass.build(),
        stiffness_bulk: stiff.build(),
        mass_surf: mass_s.build(),
        stiffness_surf: stiff_s.build(),
        trace: Trace {
            indices: mesh.boundary_loop.clone(),
            n_bulk: n,
        },
        lumped_bulk: mesh.node_weights_bulk.clone(),
        lumped_surf: mesh.node_weights_surface.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regular_polygon_area(n: usize) -> f64 {
        0.5 * n as f64 * libm::sin(2.0 * PI / n as f64)
    }

    #[test]
    fn level_zero_is_the_hexagon_fan() {
        let m = build_disk_mesh(0).unwrap();
        assert_eq!(m.n_bulk(), 7);
        assert_eq!(m.triangles().len(), 6);
        assert_eq!(m.n_surface(), 6);
        let hexagon = 1.5 * libm::sqrt(3.0);
        assert!((m.area() - hexagon).abs() < 1e-14);
        assert!((m.boundary_length() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn counts_grow_by_four() {
        let mut prev = build_disk_mesh(0).unwrap();
        for level in 1..=4 {
            let m = build_disk_mesh(level).unwrap();
            assert_eq!(m.triangles().len(), 4 * prev.triangles().len());
            assert_eq!(m.n_surface(), 2 * prev.n_surface());
            let ratio = m.n_bulk() as f64 / prev.n_bulk() as f64;
            assert!(ratio > 2.7 && ratio < 4.0, "vertex growth {ratio}");
            prev = m;
        }
    }

    #[test]
    fn mesh_area_is_inscribed_polygon_area() {
        for level in 0..=5 {
            let m = build_disk_mesh(level).unwrap();
            let k = 6 << level;
            assert!((m.area() - regular_polygon_area(k)).abs() < 1e-12);
            assert!((m.area() - PI).abs() < 10.0 / 4f64.powi(level as i32));
        }
    }

    #[test]
    fn boundary_length_increases_below_two_pi() {
        let mut last = 0.0;
        for level in 0..=6 {
            let len = build_disk_mesh(level).unwrap().boundary_length();
            assert!(len < 2.0 * PI);
            assert!(len > last);
            last = len;
        }
    }

    #[test]
    fn weights_sum_to_area_and_length() {
        let m = build_disk_mesh(3).unwrap();
        let a: f64 = m.node_weights_bulk().iter().sum();
        let l: f64 = m.node_weights_surface().iter().sum();
        assert!((a - m.area()).abs() < 1e-13);
        assert!((l - m.boundary_length()).abs() < 1e-13);
    }

    #[test]
    fn boundary_loop_is_closed_counter_clockwise() {
        let m = build_disk_mesh(3).unwrap();
        let pts = m.boundary_points();
        let k = pts.len();
        for p in &pts {
            assert!((libm::hypot(p[0], p[1]) - 1.0).abs() < 1e-14);
        }
        let shoelace: f64 = (0..k)
            .map(|i| {
                let (p, q) = (pts[i], pts[(i + 1) % k]);
                0.5 * (p[0] * q[1] - q[0] * p[1])
            })
            .sum();
        assert!((shoelace - m.area()).abs() < 1e-12);
    }

    #[test]
    fn refinement_level_is_capped() {
        assert!(matches!(
            build_disk_mesh(MAX_REFINEMENT_LEVEL + 1),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn rejects_inverted_and_open_meshes() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(TriMesh::from_parts(v.clone(), vec![[0, 2, 1]]).is_err());
        assert!(TriMesh::from_parts(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn degenerate_triangle_is_named() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 0.5]];
        // triangle 2 is a sliver with area far below the mean
        let tris = vec![[0, 1, 2], [0, 2, 3], [1, 4, 2]];
        let mut mesh = TriMesh::from_parts(v, tris).unwrap();
        mesh.vertices[4] = [1.0 + 1e-17, 0.5];
        let err = assemble_fem(&mesh).unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { index: 2, .. }), "{err:?}");
    }
}
