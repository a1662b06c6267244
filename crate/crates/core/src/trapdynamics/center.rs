use crate::error::{Result, TrapError};
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::TrapPotential;

/// Search budget for [`find_center`].
#[derive(Debug, Clone, Copy)]
pub struct CenterSearch {
    pub simplex_iterations: usize,
    pub newton_iterations: usize,
    /// Gradient-norm tolerance, eV/m.
    pub tolerance: f64,
}

impl Default for CenterSearch {
    fn default() -> Self {
        Self {
            simplex_iterations: 200,
            newton_iterations: 50,
            // 1e-9 eV/µm
            tolerance: 1e-3,
        }
    }
}

/// Local minimiser of the pseudopotential near `guess`.
pub fn find_center<T: Real>(pot: &TrapPotential<T>, guess: Vec3<T>, search: CenterSearch) -> Result<Vec3<T>> {
    let x = nelder_mead(|p| pot.energy(p), guess, pot.length_scale * T::lit(0.05), search.simplex_iterations);
    newton(pot, x, search)
}

fn nelder_mead<T: Real>(f: impl Fn(Vec3<T>) -> T, x0: Vec3<T>, size: T, iterations: usize) -> Vec3<T> {
    let mut s: Vec<(Vec3<T>, T)> = std::iter::once(x0)
        .chain((0..3).map(|k| x0 + Vec3::axis(k) * size))
        .map(|p| (p, f(p)))
        .collect();
    let half = T::lit(0.5);
    for _ in 0..iterations {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let centroid = (s[0].0 + s[1].0 + s[2].0) / T::lit(3.0);
        let worst = s[3];
        let xr = centroid + (centroid - worst.0);
        let fr = f(xr);
        if fr < s[0].1 {
            let xe = centroid + (centroid - worst.0) * T::lit(2.0);
            let fe = f(xe);
            s[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < s[2].1 {
            s[3] = (xr, fr);
        } else {
            let xc = centroid + (worst.0 - centroid) * half;
            let fc = f(xc);
            if fc < worst.1 {
                s[3] = (xc, fc);
            } else {
                let best = s[0].0;
                for v in s.iter_mut().skip(1) {
                    let p = best + (v.0 - best) * half;
                    *v = (p, f(p));
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    s[0].0
}

fn solve3<T: Real>(m: &[[T; 3]; 3], b: Vec3<T>) -> Option<Vec3<T>> {
    let det = |a: &[[T; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut out = [T::zero(); 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut a = *m;
        for i in 0..3 {
            a[i][k] = b[i];
        }
        *o = det(&a) / d;
    }
    Some(Vec3::from_array(out))
}

fn newton<T: Real>(pot: &TrapPotential<T>, mut x: Vec3<T>, search: CenterSearch) -> Result<Vec3<T>> {
    let tol = T::lit(search.tolerance);
    let floor = pot.length_scale * T::epsilon() * T::lit(64.0);
    let h = pot.length_scale * T::lit(0.01);
    let mut g = pot.gradient(x);
    let mut trace = vec![g.norm().as_f64()];
    for _ in 0..search.newton_iterations {
        if g.norm() < tol {
            return Ok(x);
        }
        let (hess, _) = pot.hessian(x, h);
        let step = match solve3(&hess, -g) {
            Some(s) => s,
            None => break,
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let xn = x + step * t;
            let gn = pot.gradient(xn);
            if gn.norm() < g.norm() {
                x = xn;
                g = gn;
                accepted = true;
                break;
            }
            t = t * T::lit(0.5);
        }
        trace.push(g.norm().as_f64());
        if !accepted {
            // Gradient is at its evaluation-noise floor.
            if step.norm() <= floor * T::lit(1e3) {
                return Ok(x);
            }
            break;
        }
        if (step * t).norm() <= floor {
            return Ok(x);
        }
    }
    if g.norm() < tol {
        return Ok(x);
    }
    Err(TrapError::NonConvergence {
        iterations: trace.len() - 1,
        trace: format!(
            "gradient norms (eV/m): {}",
            trace.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use std::sync::Arc;

    struct Shifted;
    impl BasisField<f64> for Shifted {
        fn field(&self, x: Vec3<f64>) -> Vec3<f64> {
            let c = Vec3::new(3e-6, -2e-6, 5e-6);
            let r = x - c;
            Vec3::new(r.x, r.y * 1.3, r.z * 0.4) * 1e7
        }
        fn potential(&self, _: Vec3<f64>) -> f64 {
            0.0
        }
    }

    #[test]
    fn converges_from_offset_guess() {
        let pot = TrapPotential::new(Arc::new(Shifted), None, DriveConfig::new(100.0, 10e6), IonSpecies::yb171(), 200e-6).unwrap();
        let c = find_center(&pot, Vec3::new(30e-6, 10e-6, -20e-6), CenterSearch::default()).unwrap();
        assert!(c.distance(Vec3::new(3e-6, -2e-6, 5e-6)) < 1e-10);
        assert!(pot.gradient(c).norm() < 1e-3);
    }
}
