//! Parametric trap generators.
//!
//! Both traps share one frame: ion at the origin, trap axis along z, the
//! four electrode rails on the diagonals of the xy-plane. RF rails sit at
//! 45° and 225°, DC rails at 135° and 315°.

use crate::error::Result;
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::mesh::{Electrode, ElectrodeRole, Panel};
use super::params::{BladeParams, GeometryParams, SkeletonParams};
use super::symmetry::MirrorPlane;
use super::TrapGeometry;

pub(crate) const RAIL_COUNT: usize = 4;

fn rail_angle(k: usize) -> f64 {
    std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2
}

/// Mirrors shared by every generated trap: the two diagonal planes and z = 0.
pub fn quadrupole_mirrors<T: Real>() -> Vec<MirrorPlane<T>> {
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    vec![
        MirrorPlane::new(Vec3::zero(), Vec3::new(s, -s, T::zero())),
        MirrorPlane::new(Vec3::zero(), Vec3::new(s, s, T::zero())),
        MirrorPlane::new(Vec3::zero(), Vec3::unit_z()),
    ]
}

fn trap_electrodes() -> Vec<Electrode> {
    vec![
        Electrode::new("rf", ElectrodeRole::Rf),
        Electrode::new("dc_a", ElectrodeRole::Dc),
        Electrode::new("dc_b", ElectrodeRole::Dc),
        Electrode::new("endcap_pos", ElectrodeRole::Dc),
        Electrode::new("endcap_neg", ElectrodeRole::Dc),
    ]
}

const E_RF: usize = 0;
const E_ENDCAP_POS: usize = 3;
const E_ENDCAP_NEG: usize = 4;

fn rail_electrode(k: usize) -> usize {
    match k {
        0 | 2 => E_RF,
        1 => 1,
        _ => 2,
    }
}

/// Regular polygonal prism with outward-oriented faces.
///
/// The cross-section lies in the (`u`, `w`) plane with `u × w = axis`;
/// vertex `j` sits at angle `phase + 2πj/sides` from `u`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn prism<T: Real>(
    start: Vec3<T>,
    axis: Vec3<T>,
    u: Vec3<T>,
    w: Vec3<T>,
    radius: T,
    length: T,
    sides: usize,
    phase: f64,
    caps: (bool, bool),
    electrode: usize,
    out: &mut Vec<Panel<T>>,
) {
    let end = start + axis * length;
    let ring = |c: Vec3<T>| -> Vec<Vec3<T>> {
        (0..sides)
            .map(|j| {
                let phi = phase + std::f64::consts::TAU * j as f64 / sides as f64;
                c + (u * T::lit(phi.cos()) + w * T::lit(phi.sin())) * radius
            })
            .collect()
    };
    let r0 = ring(start);
    let r1 = ring(end);
    for j in 0..sides {
        let k = (j + 1) % sides;
        out.push(Panel::quad([r0[j], r0[k], r1[k], r1[j]], electrode));
    }
    if caps.0 {
        for j in 0..sides {
            let k = (j + 1) % sides;
            out.push(Panel::tri([start, r0[k], r0[j]], electrode));
        }
    }
    if caps.1 {
        for j in 0..sides {
            let k = (j + 1) % sides;
            out.push(Panel::tri([end, r1[j], r1[k]], electrode));
        }
    }
}

/// Wire-frame quadrupole: four rails of hexagonal teeth, optionally carried
/// by radial struts. The outermost teeth of the DC rails are the endcaps.
pub fn build_skeleton<T: Real>(params: &SkeletonParams) -> Result<TrapGeometry<T>> {
    params.validate()?;
    let d = params.ion_electrode_distance();
    let a = params.wire_diameter / 2.0;
    let n = params.teeth_count;
    let period = params.tooth_width + params.tooth_gap;
    let mut panels = Vec::new();
    for k in 0..RAIL_COUNT {
        let theta = rail_angle(k);
        let er = Vec3::<T>::new(T::lit(theta.cos()), T::lit(theta.sin()), T::zero());
        let et = Vec3::<T>::new(T::lit(-theta.sin()), T::lit(theta.cos()), T::zero());
        let dc = rail_electrode(k) != E_RF;
        for i in 0..n {
            let zc = (i as f64 - (n as f64 - 1.0) / 2.0) * period;
            let electrode = if dc && i < params.endcap_teeth {
                E_ENDCAP_NEG
            } else if dc && i >= n - params.endcap_teeth {
                E_ENDCAP_POS
            } else {
                rail_electrode(k)
            };
            let centre = er * T::lit(d + a);
            let z0 = T::lit(zc - params.tooth_width / 2.0);
            prism(
                centre + Vec3::unit_z() * z0,
                Vec3::unit_z(),
                er,
                et,
                T::lit(a),
                T::lit(params.tooth_width),
                6,
                0.0,
                (true, true),
                electrode,
                &mut panels,
            );
            if params.strut_length > 0.0 {
                // Flat-to-flat the hexagon spans a·√3; the strut starts on the
                // outer vertex and its cross-section is symmetric in ±z and ±et.
                let base = er * T::lit(d + 2.0 * a) + Vec3::unit_z() * T::lit(zc);
                prism(
                    base,
                    er,
                    et,
                    Vec3::unit_z(),
                    T::lit(a),
                    T::lit(params.strut_length),
                    6,
                    std::f64::consts::FRAC_PI_6,
                    (false, true),
                    electrode,
                    &mut panels,
                );
            }
        }
    }
    Ok(TrapGeometry::from_panels(
        panels,
        trap_electrodes(),
        Vec3::zero(),
        GeometryParams::Skeleton(params.clone()),
        Vec3::unit_z(),
        quadrupole_mirrors(),
        T::lit(d),
    )?)
}

/// Breakpoints on `[0, length]` refining geometrically towards 0.
pub(crate) fn graded_breaks(length: f64, first: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut step = first;
    let mut s = 0.0;
    while s + step < length * (1.0 - 1e-9) {
        s += step;
        // Avoid a sliver at the far end.
        if length - s < 0.5 * step {
            break;
        }
        out.push(s);
        step *= ratio;
    }
    out.push(length);
    out
}

/// Four wedge blades with sharp tips on the diagonals. Each blade is cut into
/// three axial segments; on the DC blades the outer segments are endcaps.
pub fn build_blade<T: Real>(params: &BladeParams) -> Result<TrapGeometry<T>> {
    params.validate()?;
    let d = params.ion_electrode_distance;
    let depth = params.blade_depth;
    let half_w = depth * (params.blade_tip_angle.to_radians() / 2.0).tan();
    let half_len = params.blade_length / 2.0;
    let inner = params.endcap_separation / 2.0;
    let seg = [
        (-half_len, -inner, 2usize),
        (-inner + params.segment_gap, inner - params.segment_gap, 1),
        (inner, half_len, 0),
    ];
    // Axial breakpoints, symmetric about z = 0 and graded towards it.
    let mut zs: Vec<f64> = Vec::new();
    for b in graded_breaks(half_len, 0.25 * d, 1.6) {
        zs.push(b);
        zs.push(-b);
    }
    for &(lo, hi, _) in &seg {
        zs.push(lo);
        zs.push(hi);
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * half_len);

    let flank_len = (depth * depth + half_w * half_w).sqrt();
    let flank_breaks: Vec<f64> = graded_breaks(flank_len, 0.125 * d, 1.6)
        .into_iter()
        .map(|s| s / flank_len)
        .collect();
    let back_breaks: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();

    let mut panels = Vec::new();
    for k in 0..RAIL_COUNT {
        let theta = rail_angle(k);
        let er = [theta.cos(), theta.sin()];
        let et = [-theta.sin(), theta.cos()];
        let at = |r: f64, t: f64, z: f64| -> Vec3<T> {
            Vec3::new(
                T::lit(r * er[0] + t * et[0]),
                T::lit(r * er[1] + t * et[1]),
                T::lit(z),
            )
        };
        // Cross-section, counter-clockwise seen from +z.
        let tip = (d, 0.0);
        let back_neg = (d + depth, -half_w);
        let back_pos = (d + depth, half_w);
        let lerp = |p: (f64, f64), q: (f64, f64), s: f64| (p.0 + (q.0 - p.0) * s, p.1 + (q.1 - p.1) * s);
        // Edge polylines in traversal order; flanks graded from the tip.
        let mut ring: Vec<(f64, f64)> = Vec::new();
        for &s in &flank_breaks[..flank_breaks.len() - 1] {
            ring.push(lerp(tip, back_neg, s));
        }
        for &s in &back_breaks[..back_breaks.len() - 1] {
            ring.push(lerp(back_neg, back_pos, s));
        }
        for &s in flank_breaks[1..].iter().rev() {
            ring.push(lerp(tip, back_pos, s));
        }
        let dc = rail_electrode(k) != E_RF;
        for &(lo, hi, which) in &seg {
            let electrode = match (dc, which) {
                (true, 0) => E_ENDCAP_POS,
                (true, 2) => E_ENDCAP_NEG,
                _ => rail_electrode(k),
            };
            let local: Vec<f64> = zs
                .iter()
                .copied()
                .filter(|&z| z >= lo - 1e-12 && z <= hi + 1e-12)
                .collect();
            for win in local.windows(2) {
                let (z0, z1) = (win[0], win[1]);
                for j in 0..ring.len() {
                    let p = ring[j];
                    let q = ring[(j + 1) % ring.len()];
                    panels.push(Panel::quad(
                        [at(p.0, p.1, z0), at(q.0, q.1, z0), at(q.0, q.1, z1), at(p.0, p.1, z1)],
                        electrode,
                    ));
                }
            }
            // End faces: tip triangle plus trapezoids graded away from the tip.
            for (z, outward_up) in [(lo, false), (hi, true)] {
                let mut push = |pts: Vec<(f64, f64)>| {
                    let mut v: Vec<Vec3<T>> = pts.iter().map(|p| at(p.0, p.1, z)).collect();
                    if !outward_up {
                        v.reverse();
                    }
                    let panel = if v.len() == 3 {
                        Panel::tri([v[0], v[1], v[2]], electrode)
                    } else {
                        Panel::quad([v[0], v[1], v[2], v[3]], electrode)
                    };
                    panels.push(panel);
                };
                let s1 = flank_breaks[1];
                push(vec![tip, lerp(tip, back_neg, s1), lerp(tip, back_pos, s1)]);
                for win in flank_breaks[1..].windows(2) {
                    push(vec![
                        lerp(tip, back_neg, win[0]),
                        lerp(tip, back_neg, win[1]),
                        lerp(tip, back_pos, win[1]),
                        lerp(tip, back_pos, win[0]),
                    ]);
                }
            }
        }
    }
    Ok(TrapGeometry::from_panels(
        panels,
        trap_electrodes(),
        Vec3::zero(),
        GeometryParams::Blade(params.clone()),
        Vec3::unit_z(),
        quadrupole_mirrors(),
        T::lit(d),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::triangle_normal;

    #[test]
    fn breaks_are_monotone_and_closed() {
        let b = graded_breaks(1.0, 0.1, 1.5);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 1.0);
        assert!(b.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn generated_faces_point_away_from_wire_axis() {
        let g = build_skeleton::<f64>(&SkeletonParams::default()).unwrap();
        for p in &g.panels {
            for t in p.triangles() {
                let n = triangle_normal(&t);
                let c = (t[0] + t[1] + t[2]) / 3.0;
                // Offset of the centroid from the axis of its rail.
                let ang = c.y.atan2(c.x);
                let k = ((ang - std::f64::consts::FRAC_PI_4) / std::f64::consts::FRAC_PI_2).round();
                let theta = std::f64::consts::FRAC_PI_4 + k * std::f64::consts::FRAC_PI_2;
                let axis_r = 200e-6 + 10e-6;
                let foot = Vec3::new(theta.cos(), theta.sin(), 0.0) * axis_r;
                let out = Vec3::new(c.x - foot.x, c.y - foot.y, 0.0);
                if out.norm() > 1e-7 {
                    assert!(n.dot(out) >= -1e-9, "inward normal at {c:?}");
                }
            }
        }
    }

    #[test]
    fn blade_faces_point_away_from_blade_interior() {
        let p = BladeParams::default();
        let g = build_blade::<f64>(&p).unwrap();
        for panel in &g.panels {
            for t in panel.triangles() {
                let n = triangle_normal(&t);
                let c = (t[0] + t[1] + t[2]) / 3.0;
                // Interior reference: cross-section centroid of the nearest blade.
                let ang = c.y.atan2(c.x);
                let k = ((ang - std::f64::consts::FRAC_PI_4) / std::f64::consts::FRAC_PI_2).round();
                let theta = std::f64::consts::FRAC_PI_4 + k * std::f64::consts::FRAC_PI_2;
                let rr = p.ion_electrode_distance + 2.0 * p.blade_depth / 3.0;
                let inside = Vec3::new(rr * theta.cos(), rr * theta.sin(), c.z);
                // End caps use the axial direction instead.
                let to_face = c - inside;
                if n.z.abs() > 0.99 {
                    continue;
                }
                assert!(n.dot(to_face) > 0.0, "inward normal at {c:?}");
            }
        }
    }
}
