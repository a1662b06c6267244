use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

/// Electrical role of an electrode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectrodeRole {
    Rf,
    Dc,
    Ground,
}

impl ElectrodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ElectrodeRole::Rf => "rf",
            ElectrodeRole::Dc => "dc",
            ElectrodeRole::Ground => "ground",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Some(ElectrodeRole::Rf),
            "dc" => Some(ElectrodeRole::Dc),
            "ground" | "gnd" => Some(ElectrodeRole::Ground),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Electrode {
    pub id: String,
    pub role: ElectrodeRole,
}

impl Electrode {
    pub fn new(id: impl Into<String>, role: ElectrodeRole) -> Self {
        Self { id: id.into(), role }
    }
}

/// Indexed triangle mesh; `face_electrode[f]` indexes the owning geometry's
/// electrode table.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[usize; 3]>,
    pub face_electrode: Vec<usize>,
}

impl<T: Real> Default for TriangleMesh<T> {
    fn default() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            face_electrode: Vec::new(),
        }
    }
}

impl<T: Real> TriangleMesh<T> {
    pub fn triangle(&self, f: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, f: usize) -> T {
        triangle_area(&self.triangle(f))
    }

    pub fn surface_area(&self) -> T {
        let areas: Vec<T> = (0..self.faces.len()).map(|f| self.face_area(f)).collect();
        pairwise_sum(&areas)
    }

    /// Checks index validity and rejects degenerate faces.
    pub fn validate(&self, electrode_count: usize) -> Result<()> {
        if self.faces.len() != self.face_electrode.len() {
            return Err(TrapError::Geometry(format!(
                "{} faces but {} electrode labels",
                self.faces.len(),
                self.face_electrode.len()
            )));
        }
        let scale = self.bounding_radius();
        let min_area = scale * scale * T::lit(1e-24);
        for (f, face) in self.faces.iter().enumerate() {
            if face.iter().any(|&i| i >= self.vertices.len()) {
                return Err(TrapError::Geometry(format!("face {f} references a missing vertex")));
            }
            if self.face_electrode[f] >= electrode_count {
                return Err(TrapError::Geometry(format!("face {f} has unknown electrode")));
            }
            if self.face_area(f) <= min_area {
                return Err(TrapError::Geometry(format!("face {f} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn bounding_radius(&self) -> T {
        let c = self.centroid_of_vertices();
        self.vertices
            .iter()
            .map(|v| v.distance(c))
            .fold(T::zero(), T::max)
    }

    fn centroid_of_vertices(&self) -> Vec3<T> {
        if self.vertices.is_empty() {
            return Vec3::zero();
        }
        let mut s = Vec3::zero();
        for &v in &self.vertices {
            s += v;
        }
        s / T::lit(self.vertices.len() as f64)
    }

    /// Appends a triangle with fresh vertices.
    pub fn push_triangle(&mut self, tri: [Vec3<T>; 3], electrode: usize) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&tri);
        self.faces.push([base, base + 1, base + 2]);
        self.face_electrode.push(electrode);
    }

    /// Number of edges shared by more than two faces (exact vertex-index match).
    pub fn non_manifold_edge_count(&self) -> usize {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for face in &self.faces {
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c > 2).count()
    }
}

pub fn triangle_area<T: Real>(t: &[Vec3<T>; 3]) -> T {
    (t[1] - t[0]).cross(t[2] - t[0]).norm() * T::lit(0.5)
}

pub fn triangle_normal<T: Real>(t: &[Vec3<T>; 3]) -> Vec3<T> {
    (t[1] - t[0]).cross(t[2] - t[0]).normalized()
}

pub fn triangle_centroid<T: Real>(t: &[Vec3<T>; 3]) -> Vec3<T> {
    (t[0] + t[1] + t[2]) / T::lit(3.0)
}

/// Planar surface primitive produced by the generators.
///
/// Quads are parallelograms or trapezoids given counter-clockwise as seen
/// from outside the conductor; triangles likewise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelShape<T> {
    Quad([Vec3<T>; 4]),
    Tri([Vec3<T>; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel<T> {
    pub shape: PanelShape<T>,
    pub electrode: usize,
}

impl<T: Real> Panel<T> {
    pub fn quad(corners: [Vec3<T>; 4], electrode: usize) -> Self {
        Self {
            shape: PanelShape::Quad(corners),
            electrode,
        }
    }

    pub fn tri(corners: [Vec3<T>; 3], electrode: usize) -> Self {
        Self {
            shape: PanelShape::Tri(corners),
            electrode,
        }
    }

    pub fn corners(&self) -> &[Vec3<T>] {
        match &self.shape {
            PanelShape::Quad(c) => c,
            PanelShape::Tri(c) => c,
        }
    }

    pub fn area(&self) -> T {
        match &self.shape {
            PanelShape::Quad(c) => {
                triangle_area(&[c[0], c[1], c[2]]) + triangle_area(&[c[0], c[2], c[3]])
            }
            PanelShape::Tri(c) => triangle_area(c),
        }
    }

    pub fn centroid(&self) -> Vec3<T> {
        let c = self.corners();
        let mut s = Vec3::zero();
        for &p in c {
            s += p;
        }
        s / T::lit(c.len() as f64)
    }

    /// Coarse triangulation used for export and exact distance queries.
    pub fn triangles(&self) -> Vec<[Vec3<T>; 3]> {
        match &self.shape {
            PanelShape::Quad(c) => vec![[c[0], c[1], c[2]], [c[0], c[2], c[3]]],
            PanelShape::Tri(c) => vec![*c],
        }
    }

    /// Same panel with reversed orientation.
    pub fn flipped(&self) -> Self {
        let shape = match self.shape {
            PanelShape::Quad([a, b, c, d]) => PanelShape::Quad([a, d, c, b]),
            PanelShape::Tri([a, b, c]) => PanelShape::Tri([a, c, b]),
        };
        Self {
            shape,
            electrode: self.electrode,
        }
    }

    pub fn map_points(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        let shape = match self.shape {
            PanelShape::Quad(c) => PanelShape::Quad(c.map(&f)),
            PanelShape::Tri(c) => PanelShape::Tri(c.map(&f)),
        };
        Self {
            shape,
            electrode: self.electrode,
        }
    }
}

/// Builds the coarse mesh of a panel list.
pub fn mesh_from_panels<T: Real>(panels: &[Panel<T>]) -> TriangleMesh<T> {
    let mut mesh = TriangleMesh::default();
    for p in panels {
        for t in p.triangles() {
            mesh.push_triangle(t, p.electrode);
        }
    }
    weld_vertices(&mut mesh);
    mesh
}

/// Merges bit-identical vertices.
pub fn weld_vertices<T: Real>(mesh: &mut TriangleMesh<T>) {
    use std::collections::HashMap;
    let mut map: HashMap<[u64; 3], usize> = HashMap::new();
    let mut verts = Vec::with_capacity(mesh.vertices.len());
    let mut remap = Vec::with_capacity(mesh.vertices.len());
    for v in &mesh.vertices {
        let key = v.to_f64().map(|c| (c + 0.0).to_bits());
        let idx = *map.entry(key).or_insert_with(|| {
            verts.push(*v);
            verts.len() - 1
        });
        remap.push(idx);
    }
    for f in mesh.faces.iter_mut() {
        for i in f.iter_mut() {
            *i = remap[*i];
        }
    }
    mesh.vertices = verts;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn quad_area_and_flip() {
        let p = Panel::quad([v(0., 0., 0.), v(2., 0., 0.), v(2., 1., 0.), v(0., 1., 0.)], 0);
        assert!((p.area() - 2.0).abs() < 1e-15);
        let n = triangle_normal(&p.triangles()[0]);
        let nf = triangle_normal(&p.flipped().triangles()[0]);
        assert!((n + nf).norm() < 1e-15);
    }

    #[test]
    fn validate_rejects_degenerate_face() {
        let mut m = TriangleMesh::<f64>::default();
        m.push_triangle([v(0., 0., 0.), v(1., 0., 0.), v(2., 0., 0.)], 0);
        assert!(m.validate(1).is_err());
    }

    #[test]
    fn validate_rejects_bad_index() {
        let mut m = TriangleMesh::<f64>::default();
        m.push_triangle([v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)], 0);
        m.faces[0][2] = 7;
        assert!(m.validate(1).is_err());
    }

    #[test]
    fn weld_merges_shared_corners() {
        let p = Panel::quad([v(0., 0., 0.), v(1., 0., 0.), v(1., 1., 0.), v(0., 1., 0.)], 0);
        let mesh = mesh_from_panels(&[p]);
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.non_manifold_edge_count(), 0);
    }
}
