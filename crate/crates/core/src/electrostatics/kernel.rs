//! Single-layer integrals over flat triangles with unit density.
//!
//! `potential` returns ∫ 1/|x − y| dA and `gradient_kernel` returns
//! ∫ (x − y)/|x − y|³ dA (= −∇ₓ of the former). Both are evaluated in
//! closed form from edge logarithms and the signed solid angle; beyond
//! [`FAR_FIELD_RATIO`] triangle diameters a centroid rule is used.

use crate::scalar::Real;
use crate::vec3::Vec3;

/// Distance, in triangle diameters, beyond which the one-point rule is used.
pub const FAR_FIELD_RATIO: f64 = 6.0;

/// Precomputed per-triangle data for repeated kernel evaluations.
#[derive(Debug, Clone, Copy)]
pub struct TriangleKernel<T> {
    pub vertices: [Vec3<T>; 3],
    pub centroid: Vec3<T>,
    pub normal: Vec3<T>,
    pub area: T,
    pub diameter: T,
    /// Unit edge directions (edge k runs from vertex k to k+1).
    edge_dir: [Vec3<T>; 3],
    /// In-plane outward edge normals.
    edge_normal: [Vec3<T>; 3],
}

impl<T: Real> TriangleKernel<T> {
    pub fn new(v: [Vec3<T>; 3]) -> Self {
        let cr = (v[1] - v[0]).cross(v[2] - v[0]);
        let twice_area = cr.norm();
        let normal = cr / twice_area;
        let mut edge_dir = [Vec3::zero(); 3];
        let mut edge_normal = [Vec3::zero(); 3];
        let mut diameter = T::zero();
        for k in 0..3 {
            let e = v[(k + 1) % 3] - v[k];
            diameter = diameter.max(e.norm());
            edge_dir[k] = e.normalized();
            edge_normal[k] = edge_dir[k].cross(normal);
        }
        Self {
            vertices: v,
            centroid: (v[0] + v[1] + v[2]) / T::lit(3.0),
            normal,
            area: twice_area * T::lit(0.5),
            diameter,
            edge_dir,
            edge_normal,
        }
    }

    #[inline]
    fn is_far(&self, x: Vec3<T>) -> Option<(Vec3<T>, T)> {
        let r = x - self.centroid;
        let d2 = r.norm_squared();
        let lim = self.diameter * T::lit(FAR_FIELD_RATIO);
        if d2 > lim * lim {
            Some((r, d2))
        } else {
            None
        }
    }

    /// Line integral ∫ dl / |x − y| over edge `k`.
    #[inline]
    fn edge_log(&self, k: usize, x: Vec3<T>) -> T {
        let a = self.vertices[k] - x;
        let b = self.vertices[(k + 1) % 3] - x;
        let l = self.edge_dir[k];
        let (sa, sb) = (a.dot(l), b.dot(l));
        let (ra, rb) = (a.norm(), b.norm());
        // Pick the cancellation-free form: (R+s) for s ≥ 0 side, (R−s) otherwise.
        if sa + sb >= T::zero() {
            ((rb + sb) / (ra + sa)).ln()
        } else {
            ((ra - sa) / (rb - sb)).ln()
        }
    }

    /// Signed solid angle subtended at `x` (negative on the normal side).
    #[inline]
    fn solid_angle(&self, x: Vec3<T>) -> T {
        let a = self.vertices[0] - x;
        let b = self.vertices[1] - x;
        let c = self.vertices[2] - x;
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(b.cross(c));
        let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
        T::lit(2.0) * num.atan2(den)
    }

    /// ∫_T 1/|x − y| dA.
    pub fn potential(&self, x: Vec3<T>) -> T {
        if let Some((_, d2)) = self.is_far(x) {
            return self.area / d2.sqrt();
        }
        self.potential_exact(x)
    }

    pub fn potential_exact(&self, x: Vec3<T>) -> T {
        let h = (x - self.vertices[0]).dot(self.normal);
        let mut acc = T::zero();
        for k in 0..3 {
            let t0 = (self.vertices[k] - x).dot(self.edge_normal[k]);
            let scale = self.diameter * T::epsilon() * T::lit(16.0);
            if t0.abs() > scale {
                acc = acc + t0 * self.edge_log(k, x);
            }
        }
        let omega = if h.abs() > self.diameter * T::epsilon() {
            self.solid_angle(x)
        } else {
            T::zero()
        };
        acc + h * omega
    }

    /// ∫_T (x − y)/|x − y|³ dA; the field of unit density is this times 1/(4πε₀).
    pub fn gradient_kernel(&self, x: Vec3<T>) -> Vec3<T> {
        if let Some((r, d2)) = self.is_far(x) {
            return r * (self.area / (d2 * d2.sqrt()));
        }
        self.gradient_kernel_exact(x)
    }

    pub fn gradient_kernel_exact(&self, x: Vec3<T>) -> Vec3<T> {
        let mut acc = Vec3::zero();
        for k in 0..3 {
            acc += self.edge_normal[k] * self.edge_log(k, x);
        }
        acc - self.normal * self.solid_angle(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri() -> TriangleKernel<f64> {
        TriangleKernel::new([Vec3::new(0.1, -0.2, 0.05), Vec3::new(1.0, 0.1, -0.1), Vec3::new(0.2, 0.9, 0.2)])
    }

    /// Brute-force Gauss product rule on a Duffy-mapped square.
    fn brute(t: &TriangleKernel<f64>, x: Vec3<f64>) -> (f64, Vec3<f64>) {
        let n = 400;
        let mut pot = 0.0;
        let mut grad = Vec3::zero();
        let [a, b, c] = t.vertices;
        for i in 0..n {
            for j in 0..n {
                let u = (i as f64 + 0.5) / n as f64;
                let v = (j as f64 + 0.5) / n as f64;
                // (u, v) ∈ [0,1]² → triangle, Jacobian 2A·u.
                let y = a + (b - a) * u * (1.0 - v) + (c - a) * u * v;
                let w = 2.0 * t.area * u / (n * n) as f64;
                let r = x - y;
                let d = r.norm();
                pot += w / d;
                grad += r * (w / (d * d * d));
            }
        }
        (pot, grad)
    }

    #[test]
    fn matches_quadrature_off_surface() {
        let t = tri();
        for x in [Vec3::new(0.4, 0.3, 0.6), Vec3::new(-0.5, 1.2, -0.4), Vec3::new(1.5, 1.5, 0.0)] {
            let (p, g) = brute(&t, x);
            assert!((t.potential_exact(x) - p).abs() / p < 1e-4);
            assert!((t.gradient_kernel_exact(x) - g).norm() / g.norm() < 1e-3);
        }
    }

    #[test]
    fn equilateral_centroid_closed_form() {
        // ∫ 1/r over an equilateral triangle of side s at its centroid:
        // s·√3·ln(2+√3) / ... computed via three copies of the edge integral.
        let s = 1.0;
        let t = TriangleKernel::new([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(s, 0.0, 0.0),
            Vec3::new(s / 2.0, s * 3f64.sqrt() / 2.0, 0.0),
        ]);
        let inradius = s / (2.0 * 3f64.sqrt());
        // Each edge: t0 · 2·asinh(s/2 / t0).
        let expected = 3.0 * inradius * 2.0 * ((s / 2.0) / inradius).asinh();
        assert!((t.potential(t.centroid) - expected).abs() < 1e-13);
    }

    #[test]
    fn far_rule_is_continuous() {
        let t = tri();
        let dir = Vec3::new(0.3, 0.5, 0.8).normalized();
        let d = t.diameter * FAR_FIELD_RATIO;
        let inside = t.centroid + dir * (d * 0.999);
        let outside = t.centroid + dir * (d * 1.001);
        let rel = (t.potential(inside) - t.potential(outside)).abs() / t.potential(inside);
        assert!(rel < 5e-3);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_difference(x in -1.0..2.0f64, y in -1.0..2.0f64, z in 0.05..1.0f64) {
            let t = tri();
            let p = Vec3::new(x, y, z + 0.3);
            let h = 1e-6;
            let g = t.gradient_kernel_exact(p);
            for k in 0..3 {
                let e = Vec3::axis(k) * h;
                let fd = -(t.potential_exact(p + e) - t.potential_exact(p - e)) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() <= 1e-5 * g.norm().max(1e-3));
            }
        }

        #[test]
        fn homogeneous_of_degree_one(s in 0.1..10.0f64) {
            let t = tri();
            let ts = TriangleKernel::new(t.vertices.map(|v| v * s));
            let x = Vec3::new(0.3, 0.2, 0.4);
            let rel = (ts.potential(x * s) - s * t.potential(x)).abs() / (s * t.potential(x));
            prop_assert!(rel < 1e-12);
        }
    }
}
