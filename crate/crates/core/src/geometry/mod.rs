//! Electrode geometry: generators, mesh I/O, discretization and distances.

pub mod builders;
pub mod discretize;
pub mod distance;
pub mod io;
pub mod mesh;
pub mod params;
pub mod shapes;
pub mod symmetry;

pub use builders::{build_blade, build_skeleton, quadrupole_mirrors};
pub use discretize::{discretize, DiscretizeOptions, Grading, PatchSet};
pub use mesh::{Electrode, ElectrodeRole, Panel, PanelShape, TriangleMesh};
pub use params::{BladeParams, GeometryParams, SkeletonParams};
pub use symmetry::{Character, MirrorPlane, Parity, PatchSymmetry};

use crate::error::{Result, TrapError};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// A labelled electrode surface with its nominal ion position.
///
/// `panels` are the planar primitives the mesh was built from; they are what
/// [`discretize`] subdivides.
#[derive(Debug, Clone)]
pub struct TrapGeometry<T> {
    pub mesh: TriangleMesh<T>,
    pub panels: Vec<Panel<T>>,
    pub electrodes: Vec<Electrode>,
    pub ion_nominal: Vec3<T>,
    pub params: GeometryParams,
    pub axial_direction: Vec3<T>,
    /// Candidate mirror planes used to block-diagonalise the solver.
    pub mirrors: Vec<MirrorPlane<T>>,
    pub nominal_distance: T,
}

impl<T: Real> TrapGeometry<T> {
    /// Assembles and validates a geometry. For generated traps the measured
    /// ion-electrode distance must match `nominal_distance` within 1%.
    pub fn from_panels(
        panels: Vec<Panel<T>>,
        electrodes: Vec<Electrode>,
        ion_nominal: Vec3<T>,
        params: GeometryParams,
        axial_direction: Vec3<T>,
        mirrors: Vec<MirrorPlane<T>>,
        nominal_distance: T,
    ) -> Result<Self> {
        let mesh = mesh::mesh_from_panels(&panels);
        let geom = Self {
            mesh,
            panels,
            electrodes,
            ion_nominal,
            params,
            axial_direction: axial_direction.normalized(),
            mirrors,
            nominal_distance,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Geometry whose nominal distance is whatever the mesh gives.
    pub fn custom(
        name: impl Into<String>,
        panels: Vec<Panel<T>>,
        electrodes: Vec<Electrode>,
        ion_nominal: Vec3<T>,
        mirrors: Vec<MirrorPlane<T>>,
    ) -> Result<Self> {
        let mesh = mesh::mesh_from_panels(&panels);
        let nominal = distance::min_distance(ion_nominal, (0..mesh.face_count()).map(|f| mesh.triangle(f))).0;
        Self::from_panels(
            panels,
            electrodes,
            ion_nominal,
            GeometryParams::Custom { name: name.into() },
            Vec3::unit_z(),
            mirrors,
            nominal,
        )
    }

    /// Geometry from an imported mesh; every face becomes its own panel.
    pub fn from_mesh(name: impl Into<String>, mesh: TriangleMesh<T>, electrodes: Vec<Electrode>, ion: Vec3<T>) -> Result<Self> {
        let panels = (0..mesh.face_count())
            .map(|f| Panel::tri(mesh.triangle(f), mesh.face_electrode[f]))
            .collect();
        Self::custom(name, panels, electrodes, ion, Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate(self.electrodes.len())?;
        for (i, e) in self.electrodes.iter().enumerate() {
            if self.electrodes[..i].iter().any(|o| o.id == e.id) {
                return Err(TrapError::Geometry(format!("duplicate electrode id `{}`", e.id)));
            }
        }
        let measured = min_ion_electrode_distance(self).as_f64();
        let scale = self.mesh.bounding_radius().as_f64();
        if measured <= scale * 1e-9 {
            return Err(TrapError::Geometry("ion position lies on an electrode surface".into()));
        }
        if !matches!(self.params, GeometryParams::Custom { .. }) {
            let nominal = self.nominal_distance.as_f64();
            if ((measured - nominal) / nominal).abs() > 0.01 {
                return Err(TrapError::Geometry(format!(
                    "ion-electrode distance {measured:e} m differs from nominal {nominal:e} m"
                )));
            }
        }
        Ok(())
    }

    pub fn electrode_index(&self, id: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.id == id)
    }

    pub fn surface_area(&self) -> T {
        self.mesh.surface_area()
    }

    /// Image of the geometry under an arbitrary point map (mirror, rotation).
    /// Panels whose orientation the map reverses must be flipped by the caller.
    pub fn map_panels(&self, f: impl Fn(Vec3<T>) -> Vec3<T>, flip: bool) -> Vec<Panel<T>> {
        self.panels
            .iter()
            .map(|p| {
                let q = p.map_points(&f);
                if flip {
                    q.flipped()
                } else {
                    q
                }
            })
            .collect()
    }
}

/// Exact point-to-triangle minimum over every mesh face.
pub fn min_ion_electrode_distance<T: Real>(geom: &TrapGeometry<T>) -> T {
    distance::min_distance(geom.ion_nominal, (0..geom.mesh.face_count()).map(|f| geom.mesh.triangle(f))).0
}
