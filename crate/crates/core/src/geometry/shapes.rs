//! Reference shapes with closed-form electrostatics, used as solver oracles
//! and as proxies for scaling studies.

use crate::error::Result;
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::mesh::{Electrode, ElectrodeRole, Panel};
use super::symmetry::MirrorPlane;
use super::{PatchSet, TrapGeometry};

fn axis_mirrors<T: Real>(centre: Vec3<T>) -> Vec<MirrorPlane<T>> {
    (0..3).map(|i| MirrorPlane::new(centre, Vec3::axis(i))).collect()
}

/// Icosphere: each icosahedron face split into `n²` triangles, projected
/// onto the sphere (`20 n²` faces). One panel per face.
pub fn sphere<T: Real>(centre: Vec3<T>, radius: f64, n: usize, ion: Vec3<T>) -> Result<TrapGeometry<T>> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let faces = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let n = n.max(1);
    let project = |p: [f64; 3]| -> Vec3<T> {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        centre + Vec3::from_f64([p[0] / r * radius, p[1] / r * radius, p[2] / r * radius])
    };
    let mut panels = Vec::with_capacity(20 * n * n);
    for f in faces {
        let [a, b, c] = f.map(|i| raw[i]);
        let point = |i: usize, j: usize| -> Vec3<T> {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            project([0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * u + (c[k] - a[k]) * v))
        };
        for j in 0..n {
            for i in 0..(n - j) {
                panels.push(Panel::tri([point(i, j), point(i + 1, j), point(i, j + 1)], 0));
                if i + j + 1 < n {
                    panels.push(Panel::tri([point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)], 0));
                }
            }
        }
    }
    TrapGeometry::custom(
        "sphere",
        panels,
        vec![Electrode::new("shell", ElectrodeRole::Dc)],
        ion,
        axis_mirrors(centre),
    )
}

/// Two zero-thickness square plates of side `side`, `separation` apart along
/// z and centred on the origin. Electrodes: `top`, `bottom`.
pub fn parallel_plates<T: Real>(side: f64, separation: f64) -> Result<TrapGeometry<T>> {
    let h = side / 2.0;
    let z = separation / 2.0;
    let sq = |z: f64| -> [Vec3<T>; 4] {
        [
            Vec3::from_f64([-h, -h, z]),
            Vec3::from_f64([h, -h, z]),
            Vec3::from_f64([h, h, z]),
            Vec3::from_f64([-h, h, z]),
        ]
    };
    let top = Panel::quad(sq(z), 0);
    let bottom = Panel::quad(sq(-z), 1).flipped();
    TrapGeometry::custom(
        "parallel_plates",
        vec![top, bottom],
        vec![Electrode::new("top", ElectrodeRole::Dc), Electrode::new("bottom", ElectrodeRole::Dc)],
        Vec3::zero(),
        axis_mirrors(Vec3::zero()),
    )
}

/// Single square plate in the plane z = 0 with the ion at height `height`.
pub fn square_plate<T: Real>(side: f64, height: f64) -> Result<TrapGeometry<T>> {
    let h = side / 2.0;
    let p = Panel::quad(
        [
            Vec3::from_f64([-h, -h, 0.0]),
            Vec3::from_f64([h, -h, 0.0]),
            Vec3::from_f64([h, h, 0.0]),
            Vec3::from_f64([-h, h, 0.0]),
        ],
        0,
    );
    TrapGeometry::custom(
        "square_plate",
        vec![p],
        vec![Electrode::new("plate", ElectrodeRole::Dc)],
        Vec3::from_f64([0.0, 0.0, height]),
        vec![MirrorPlane::new(Vec3::zero(), Vec3::unit_x()), MirrorPlane::new(Vec3::zero(), Vec3::unit_y())],
    )
}

/// Closed rectangular box `[0, size]` with each face a separate electrode,
/// normals outward. The ion may sit anywhere inside.
pub fn closed_box<T: Real>(size: [f64; 3], ion: Vec3<T>) -> Result<TrapGeometry<T>> {
    let [a, b, c] = size;
    let p = |x: f64, y: f64, z: f64| Vec3::<T>::from_f64([x, y, z]);
    let quads = [
        ("x_neg", [p(0., 0., 0.), p(0., 0., c), p(0., b, c), p(0., b, 0.)]),
        ("x_pos", [p(a, 0., 0.), p(a, b, 0.), p(a, b, c), p(a, 0., c)]),
        ("y_neg", [p(0., 0., 0.), p(a, 0., 0.), p(a, 0., c), p(0., 0., c)]),
        ("y_pos", [p(0., b, 0.), p(0., b, c), p(a, b, c), p(a, b, 0.)]),
        ("z_neg", [p(0., 0., 0.), p(0., b, 0.), p(a, b, 0.), p(a, 0., 0.)]),
        ("z_pos", [p(0., 0., c), p(a, 0., c), p(a, b, c), p(0., b, c)]),
    ];
    let electrodes = quads.iter().map(|(id, _)| Electrode::new(*id, ElectrodeRole::Dc)).collect();
    let panels = quads.iter().enumerate().map(|(i, (_, q))| Panel::quad(*q, i)).collect();
    TrapGeometry::custom("closed_box", panels, electrodes, ion, Vec::new())
}

/// Zero-thickness disc of radius `radius` in z = 0 on a polar grid graded
/// geometrically outward from `inner` (one patch per cell). Electrode `disc`.
pub fn polar_disc<T: Real>(radius: f64, inner: f64, sectors: usize, ion: Vec3<T>) -> PatchSet<T> {
    let sectors = sectors.max(8);
    let growth = 1.0 + std::f64::consts::TAU / sectors as f64;
    let mut radii = vec![inner];
    while *radii.last().unwrap() < radius {
        let next = radii.last().unwrap() * growth;
        radii.push(if next > radius / growth.sqrt() { radius } else { next });
    }
    let at = |r: f64, k: usize| -> Vec3<T> {
        let t = std::f64::consts::TAU * k as f64 / sectors as f64;
        Vec3::from_f64([r * t.cos(), r * t.sin(), 0.0])
    };
    let mut tris = Vec::new();
    for k in 0..sectors {
        tris.push([Vec3::zero(), at(inner, k), at(inner, k + 1)]);
    }
    for w in radii.windows(2) {
        for k in 0..sectors {
            let (a, b, c, d) = (at(w[0], k), at(w[1], k), at(w[1], k + 1), at(w[0], k + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let n = tris.len();
    PatchSet::from_triangles(tris, vec![0; n], vec![Electrode::new("disc", ElectrodeRole::Dc)], ion)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_face_count_and_area() {
        let g = sphere::<f64>(Vec3::zero(), 1.0, 4, Vec3::zero()).unwrap();
        assert_eq!(g.panels.len(), 320);
        let area = g.surface_area();
        assert!((area - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI) < 0.03);
    }

    #[test]
    fn box_normals_point_outward() {
        let g = closed_box::<f64>([1.0, 1.0, 1.0], Vec3::new(0.3, 0.4, 0.5)).unwrap();
        let c = Vec3::new(0.5, 0.5, 0.5);
        for p in &g.panels {
            let t = p.triangles()[0];
            let n = super::super::mesh::triangle_normal(&t);
            assert!(n.dot(p.centroid() - c) > 0.0);
        }
    }

    #[test]
    fn disc_area() {
        let d = polar_disc::<f64>(1.0, 0.01, 32, Vec3::new(0.0, 0.0, 0.1));
        let exact = std::f64::consts::PI;
        assert!((d.total_area() - exact).abs() / exact < 0.01);
    }
}
