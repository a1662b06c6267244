use std::sync::Arc;

use rayon::prelude::*;

use crate::constants::COULOMB;
use crate::error::{Result, TrapError};
use crate::geometry::PatchSet;
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

use super::kernel::TriangleKernel;
use super::operator::BemOperator;

/// Surface charge densities of a Dirichlet solve, evaluable off-surface.
#[derive(Debug, Clone)]
pub struct DirichletSolution<T> {
    /// C/m² per patch.
    pub sigma: Vec<T>,
    /// Boundary voltage per electrode that produced `sigma`.
    pub voltages: Vec<T>,
    pub patches: Arc<PatchSet<T>>,
    pub kernels: Arc<Vec<TriangleKernel<T>>>,
}

/// Boundary values at the collocation points for per-electrode voltages.
pub fn boundary_values<T: Real>(patches: &PatchSet<T>, voltages: &[T]) -> Vec<T> {
    patches.electrode.iter().map(|&e| voltages[e]).collect()
}

/// Solves for the densities that hold each electrode at `voltages[e]`.
pub fn solve_dirichlet<T: Real>(op: &BemOperator<T>, voltages: &[T]) -> Result<DirichletSolution<T>> {
    if voltages.len() != op.patches.electrodes.len() {
        return Err(TrapError::Config(format!(
            "{} voltages given for {} electrodes",
            voltages.len(),
            op.patches.electrodes.len()
        )));
    }
    let rhs = boundary_values(&op.patches, voltages);
    let sigma = op.solve(&rhs)?;
    Ok(DirichletSolution::from_density(op, sigma, voltages.to_vec()))
}

impl<T: Real> DirichletSolution<T> {
    pub fn from_density(op: &BemOperator<T>, sigma: Vec<T>, voltages: Vec<T>) -> Self {
        Self {
            sigma,
            voltages,
            patches: op.patches.clone(),
            kernels: op.kernels.clone(),
        }
    }

    /// Total charge on the surface, C.
    pub fn total_charge(&self) -> T {
        let q: Vec<T> = self.sigma.iter().zip(&self.patches.areas).map(|(s, a)| *s * *a).collect();
        pairwise_sum(&q)
    }

    /// Distance from `x` to the nearest patch centroid relative to that patch's size.
    pub fn proximity(&self, x: Vec3<T>) -> (T, T) {
        let mut best = (T::infinity(), T::zero());
        for (i, k) in self.kernels.iter().enumerate() {
            let d = crate::geometry::distance::point_triangle_distance(x, &k.vertices);
            if d < best.0 {
                best = (d, self.patches.patch_size(i));
            }
        }
        best
    }

    fn warn_if_close(&self, x: Vec3<T>) {
        let (d, size) = self.proximity(x);
        if d < size * T::lit(0.1) {
            log::warn!(
                "evaluation point {:?} lies {:e} m from the surface (patch size {:e} m); accuracy degraded",
                x.to_f64(),
                d.as_f64(),
                size.as_f64()
            );
        }
    }

    /// Returns a `TooClose` error instead of a warning.
    pub fn check_clearance(&self, x: Vec3<T>) -> Result<()> {
        let (d, size) = self.proximity(x);
        if d < size * T::lit(0.1) {
            return Err(TrapError::TooClose {
                point: x.to_f64(),
                distance: d.as_f64(),
                panel: size.as_f64(),
            });
        }
        Ok(())
    }

    pub fn potential_at(&self, x: Vec3<T>) -> T {
        self.warn_if_close(x);
        self.potential_unchecked(x)
    }

    pub fn potential_unchecked(&self, x: Vec3<T>) -> T {
        let terms: Vec<T> = self.kernels.iter().zip(&self.sigma).map(|(k, &s)| k.potential(x) * s).collect();
        T::lit(COULOMB) * pairwise_sum(&terms)
    }

    pub fn field_at(&self, x: Vec3<T>) -> Vec3<T> {
        self.warn_if_close(x);
        self.field_unchecked(x)
    }

    /// Analytic gradient of the single-layer sum (no finite differencing).
    pub fn field_unchecked(&self, x: Vec3<T>) -> Vec3<T> {
        field_of_density(&self.kernels, &self.sigma, x)
    }

    /// Field at many points, evaluated in parallel; output order matches input.
    pub fn fields_at(&self, xs: &[Vec3<T>]) -> Vec<Vec3<T>> {
        xs.par_iter().map(|&x| self.field_unchecked(x)).collect()
    }

    /// Linear combination a·self + b·other (same patch set).
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        Self {
            sigma: self.sigma.iter().zip(&other.sigma).map(|(x, y)| a * *x + b * *y).collect(),
            voltages: self.voltages.iter().zip(&other.voltages).map(|(x, y)| a * *x + b * *y).collect(),
            patches: self.patches.clone(),
            kernels: self.kernels.clone(),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            sigma: self.sigma.iter().map(|x| a * *x).collect(),
            voltages: self.voltages.iter().map(|x| a * *x).collect(),
            patches: self.patches.clone(),
            kernels: self.kernels.clone(),
        }
    }
}

/// E(x) = (1/4πε₀) Σ_j σ_j ∫_{T_j} (x − y)/|x − y|³ dA with a fixed reduction tree.
pub fn field_of_density<T: Real>(kernels: &[TriangleKernel<T>], sigma: &[T], x: Vec3<T>) -> Vec3<T> {
    let n = kernels.len();
    let mut cx = Vec::with_capacity(n);
    let mut cy = Vec::with_capacity(n);
    let mut cz = Vec::with_capacity(n);
    for (k, &s) in kernels.iter().zip(sigma) {
        let g = k.gradient_kernel(x) * s;
        cx.push(g.x);
        cy.push(g.y);
        cz.push(g.z);
    }
    Vec3::new(pairwise_sum(&cx), pairwise_sum(&cy), pairwise_sum(&cz)) * T::lit(COULOMB)
}
