use crate::scalar::Real;
use crate::vec3::Vec3;

/// Closest point on triangle `t` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle<T: Real>(p: Vec3<T>, t: &[Vec3<T>; 3]) -> Vec3<T> {
    let [a, b, c] = *t;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= T::zero() && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= T::zero() && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = T::one() / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn point_triangle_distance<T: Real>(p: Vec3<T>, t: &[Vec3<T>; 3]) -> T {
    p.distance(closest_point_on_triangle(p, t))
}

/// Minimum distance from `p` to a set of triangles, with the index attaining it.
pub fn min_distance<T: Real>(p: Vec3<T>, tris: impl IntoIterator<Item = [Vec3<T>; 3]>) -> (T, usize) {
    let mut best = (T::infinity(), usize::MAX);
    for (i, t) in tris.into_iter().enumerate() {
        let d = point_triangle_distance(p, &t);
        if d < best.0 {
            best = (d, i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri() -> [Vec3<f64>; 3] {
        [Vec3::new(0., 0., 0.), Vec3::new(1., 0., 0.), Vec3::new(0., 1., 0.)]
    }

    #[test]
    fn regions() {
        let t = tri();
        assert_eq!(point_triangle_distance(Vec3::new(0.2, 0.2, 0.5), &t), 0.5);
        assert!((point_triangle_distance(Vec3::new(-1., -1., 0.), &t) - 2f64.sqrt()).abs() < 1e-15);
        assert!((point_triangle_distance(Vec3::new(0.5, -2., 0.), &t) - 2.0).abs() < 1e-15);
        assert!((point_triangle_distance(Vec3::new(1., 1., 0.), &t) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn never_beaten_by_sampled_points(px in -2.0..2.0f64, py in -2.0..2.0f64, pz in -2.0..2.0f64) {
            let t = tri();
            let p = Vec3::new(px, py, pz);
            let d = point_triangle_distance(p, &t);
            for i in 0..=20 {
                for j in 0..=(20 - i) {
                    let q = t[0] + (t[1] - t[0]) * (i as f64 / 20.0) + (t[2] - t[0]) * (j as f64 / 20.0);
                    prop_assert!(d <= p.distance(q) + 1e-12);
                }
            }
        }
    }
}
