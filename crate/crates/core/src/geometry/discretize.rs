//! Structured subdivision of generator panels into collocation patches.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

use super::distance::min_distance;
use super::mesh::{triangle_area, triangle_centroid, triangle_normal, Electrode, Panel, PanelShape};
use super::params::GeometryParams;
use super::symmetry::{detect_symmetry, PatchSymmetry};
use super::TrapGeometry;

/// Distance-dependent coarsening. A panel whose nearest point lies `r` from
/// the ion is meshed at `target_edge · clamp((r / d)^exponent, 1, max_factor)`
/// with `d` the nominal ion-electrode distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grading {
    pub exponent: f64,
    pub max_factor: f64,
}

impl Default for Grading {
    fn default() -> Self {
        Self {
            exponent: 1.0,
            max_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizeOptions {
    pub target_edge: f64,
    #[serde(default)]
    pub grading: Option<Grading>,
}

impl DiscretizeOptions {
    pub fn uniform(target_edge: f64) -> Self {
        Self {
            target_edge,
            grading: None,
        }
    }

    pub fn graded(target_edge: f64, grading: Grading) -> Self {
        Self {
            target_edge,
            grading: Some(grading),
        }
    }
}

/// Flat-triangle patches over which every surface integral runs.
#[derive(Debug, Clone)]
pub struct PatchSet<T> {
    pub triangles: Vec<[Vec3<T>; 3]>,
    pub centroids: Vec<Vec3<T>>,
    pub areas: Vec<T>,
    pub normals: Vec<Vec3<T>>,
    pub electrode: Vec<usize>,
    pub distance_to_ion: Vec<T>,
    pub electrodes: Vec<Electrode>,
    pub ion: Vec3<T>,
    pub axial_direction: Vec3<T>,
    pub nominal_distance: T,
    pub options: DiscretizeOptions,
    pub symmetry: Option<PatchSymmetry<T>>,
}

impl<T: Real> PatchSet<T> {
    /// Builds a patch set from explicit triangles (no symmetry search).
    pub fn from_triangles(
        triangles: Vec<[Vec3<T>; 3]>,
        electrode: Vec<usize>,
        electrodes: Vec<Electrode>,
        ion: Vec3<T>,
    ) -> Self {
        let centroids: Vec<_> = triangles.iter().map(triangle_centroid).collect();
        let distance_to_ion = centroids.iter().map(|c| c.distance(ion)).collect();
        let nominal = min_distance(ion, triangles.iter().copied()).0;
        Self {
            areas: triangles.iter().map(triangle_area).collect(),
            normals: triangles.iter().map(triangle_normal).collect(),
            centroids,
            distance_to_ion,
            triangles,
            electrode,
            electrodes,
            ion,
            axial_direction: Vec3::unit_z(),
            nominal_distance: nominal,
            options: DiscretizeOptions::uniform(0.0),
            symmetry: None,
        }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn total_area(&self) -> T {
        pairwise_sum(&self.areas)
    }

    pub fn max_edge(&self) -> T {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| t[k].distance(t[(k + 1) % 3])))
            .fold(T::zero(), T::max)
    }

    /// Longest edge of patch `i`.
    pub fn patch_size(&self, i: usize) -> T {
        let t = &self.triangles[i];
        (0..3).map(|k| t[k].distance(t[(k + 1) % 3])).fold(T::zero(), T::max)
    }

    /// Signed axial coordinate of each centroid relative to the ion.
    pub fn axial_offset(&self, i: usize) -> T {
        (self.centroids[i] - self.ion).dot(self.axial_direction)
    }

    pub fn electrode_index(&self, id: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.id == id)
    }

    /// Moves the reference point used for distances (e.g. to a solved trap centre).
    pub fn with_ion(mut self, ion: Vec3<T>) -> Self {
        self.ion = ion;
        self.distance_to_ion = self.centroids.iter().map(|c| c.distance(ion)).collect();
        self
    }

    /// Rigid translation of every patch and the ion.
    pub fn translated(&self, shift: Vec3<T>) -> Self {
        let mut out = self.clone();
        for t in out.triangles.iter_mut() {
            for p in t.iter_mut() {
                *p += shift;
            }
        }
        for c in out.centroids.iter_mut() {
            *c += shift;
        }
        out.ion += shift;
        out.symmetry = None;
        out
    }

    /// Searches the given mirror planes for symmetries of the patch set.
    pub fn detect_symmetry(&mut self, mirrors: &[super::symmetry::MirrorPlane<T>]) {
        let min_edge = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| t[k].distance(t[(k + 1) % 3])))
            .fold(T::infinity(), T::min);
        let scale = self
            .centroids
            .iter()
            .map(|c| c.distance(self.ion))
            .fold(T::zero(), T::max);
        let tol = (min_edge * T::lit(1e-3)).max(scale * T::epsilon() * T::lit(1e3));
        self.symmetry = detect_symmetry(&self.triangles, mirrors, tol);
    }
}

/// Nearest distance below which the local grading factor stays at 1.
fn local_edge<T: Real>(panel: &Panel<T>, ion: Vec3<T>, nominal: f64, opts: &DiscretizeOptions) -> f64 {
    match opts.grading {
        None => opts.target_edge,
        Some(g) => {
            let r = min_distance(ion, panel.triangles()).0.as_f64();
            let factor = (r / nominal).powf(g.exponent).clamp(1.0, g.max_factor.max(1.0));
            opts.target_edge * factor
        }
    }
}

/// Subdivision count; always even so mirror images of a panel triangulate
/// identically, and stable against last-bit differences between images.
fn even_count(length: f64, h: f64) -> usize {
    let n = ((length / h) * (1.0 - 1e-9)).ceil().max(1.0) as usize;
    n + n % 2
}

fn subdivide_quad<T: Real>(c: &[Vec3<T>; 4], nu: usize, nv: usize, out: &mut Vec<[Vec3<T>; 3]>) {
    let point = |i: usize, j: usize| -> Vec3<T> {
        let u = T::lit(i as f64 / nu as f64);
        let v = T::lit(j as f64 / nv as f64);
        let one = T::one();
        c[0] * ((one - u) * (one - v)) + c[1] * (u * (one - v)) + c[2] * (u * v) + c[3] * ((one - u) * v)
    };
    for j in 0..nv {
        for i in 0..nu {
            let (p00, p10, p11, p01) = (point(i, j), point(i + 1, j), point(i + 1, j + 1), point(i, j + 1));
            // Union-jack pattern: alternating diagonals, invariant under any
            // symmetry of the cell grid when both counts are even.
            if (i + j) % 2 == 0 {
                out.push([p00, p10, p11]);
                out.push([p00, p11, p01]);
            } else {
                out.push([p00, p10, p01]);
                out.push([p10, p11, p01]);
            }
        }
    }
}

fn subdivide_tri<T: Real>(c: &[Vec3<T>; 3], n: usize, out: &mut Vec<[Vec3<T>; 3]>) {
    let point = |i: usize, j: usize| -> Vec3<T> {
        let a = T::lit(i as f64 / n as f64);
        let b = T::lit(j as f64 / n as f64);
        c[0] + (c[1] - c[0]) * a + (c[2] - c[0]) * b
    };
    for j in 0..n {
        for i in 0..(n - j) {
            out.push([point(i, j), point(i + 1, j), point(i, j + 1)]);
            if i + j + 1 < n {
                out.push([point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)]);
            }
        }
    }
}

/// Triangulates one panel at local edge length `h`.
pub fn subdivide_panel<T: Real>(panel: &Panel<T>, h: f64, out: &mut Vec<[Vec3<T>; 3]>) {
    match &panel.shape {
        PanelShape::Quad(c) => {
            let lu = c[0].distance(c[1]).max(c[3].distance(c[2])).as_f64();
            let lv = c[0].distance(c[3]).max(c[1].distance(c[2])).as_f64();
            subdivide_quad(c, even_count(lu, h), even_count(lv, h), out);
        }
        PanelShape::Tri(c) => {
            let l = (0..3).map(|k| c[k].distance(c[(k + 1) % 3]).as_f64()).fold(0.0, f64::max);
            let n = ((l / h) * (1.0 - 1e-9)).ceil().max(1.0) as usize;
            subdivide_tri(c, n, out);
        }
    }
}

fn resolved_feature(params: &GeometryParams) -> Option<f64> {
    match params {
        GeometryParams::Skeleton(p) => Some(p.tooth_gap),
        GeometryParams::Blade(p) => Some(p.segment_gap),
        GeometryParams::Custom { .. } => None,
    }
}

/// Subdivides every panel of `geom` and detects the mesh's mirror group.
pub fn discretize<T: Real>(geom: &TrapGeometry<T>, opts: &DiscretizeOptions) -> Result<PatchSet<T>> {
    if !(opts.target_edge > 0.0 && opts.target_edge.is_finite()) {
        return Err(TrapError::param("target_edge", "must be positive"));
    }
    if let Some(feature) = resolved_feature(&geom.params) {
        if opts.target_edge >= feature {
            return Err(TrapError::FeatureResolution {
                target_edge: opts.target_edge,
                feature,
            });
        }
    }
    if let Some(g) = opts.grading {
        if !(g.exponent >= 0.0 && g.max_factor >= 1.0) {
            return Err(TrapError::param("grading", "exponent must be ≥ 0 and max_factor ≥ 1"));
        }
    }
    let nominal = geom.nominal_distance.as_f64();
    let mut triangles = Vec::new();
    let mut electrode = Vec::new();
    for panel in &geom.panels {
        let h = local_edge(panel, geom.ion_nominal, nominal, opts);
        let before = triangles.len();
        subdivide_panel(panel, h, &mut triangles);
        electrode.extend(std::iter::repeat_n(panel.electrode, triangles.len() - before));
    }
    let mut set = PatchSet::from_triangles(triangles, electrode, geom.electrodes.clone(), geom.ion_nominal);
    set.axial_direction = geom.axial_direction;
    set.nominal_distance = geom.nominal_distance;
    set.options = *opts;
    if !geom.mirrors.is_empty() {
        set.detect_symmetry(&geom.mirrors);
    }
    log::info!(
        "discretized into {} patches (target edge {:.3} µm{})",
        set.len(),
        opts.target_edge * 1e6,
        if opts.grading.is_some() { ", graded" } else { "" }
    );
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Panel<f64> {
        Panel::quad(
            [
                Vec3::new(0., 0., 0.),
                Vec3::new(1., 0., 0.),
                Vec3::new(1., 1., 0.),
                Vec3::new(0., 1., 0.),
            ],
            0,
        )
    }

    #[test]
    fn quad_counts_and_area() {
        let mut out = Vec::new();
        subdivide_panel(&square(), 0.1, &mut out);
        assert_eq!(out.len(), 200);
        let area: f64 = out.iter().map(triangle_area).sum();
        assert!((area - 1.0).abs() < 1e-12);
        for t in &out {
            assert!(triangle_normal(t).z > 0.0);
        }
    }

    #[test]
    fn tri_subdivision_preserves_orientation() {
        let t = Panel::tri([Vec3::new(0., 0., 0.), Vec3::new(1., 0., 0.), Vec3::new(0., 1., 0.)], 0);
        let mut out = Vec::new();
        subdivide_panel(&t, 0.36, &mut out);
        assert_eq!(out.len(), 16);
        assert!(out.iter().all(|t| triangle_normal(t).z > 0.0));
        let area: f64 = out.iter().map(triangle_area).sum();
        assert!((area - 0.5).abs() < 1e-14);
    }

    #[test]
    fn counts_are_even() {
        assert_eq!(even_count(1.0, 0.3), 4);
        assert_eq!(even_count(1.0, 0.25), 4);
        assert_eq!(even_count(0.2, 1.0), 2);
    }
}
