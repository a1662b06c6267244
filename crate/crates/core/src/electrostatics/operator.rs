//! Collocation operator M_ij = (1/4πε₀) ∫_{T_j} 1/|x_i − y| dA.
//!
//! When the patch set carries a mirror group the operator commutes with it
//! and splits into one block per character. Each right-hand side is
//! projected onto the characters, the blocks it touches are assembled and
//! factored on first use, and the partial solutions are recombined. With no
//! symmetry there is a single block equal to M.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::COULOMB;
use crate::error::{Result, TrapError};
use crate::geometry::{Character, PatchSet, PatchSymmetry};
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::kernel::TriangleKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Upper bound on dense storage (matrix + factor) over all blocks.
    pub memory_cap_bytes: usize,
    /// Blocks larger than this are solved iteratively instead of factored.
    pub dense_cap: usize,
    /// Required relative residual max|Mσ − v| / max|v|.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            memory_cap_bytes: 3 << 30,
            dense_cap: 20_000,
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

enum BlockSolver<T: Real> {
    Dense(T::Lu),
    Iterative,
}

struct Block<T: Real> {
    /// Orbit ids carried by this block, in local order.
    orbits: Vec<usize>,
    /// Column-major block matrix.
    matrix: Vec<T>,
    solver: BlockSolver<T>,
    condition: f64,
}

/// Dense single-layer operator over a patch set.
pub struct BemOperator<T: Real> {
    pub patches: Arc<PatchSet<T>>,
    pub kernels: Arc<Vec<TriangleKernel<T>>>,
    pub config: SolverConfig,
    group: PatchSymmetry<T>,
    characters: Vec<Character>,
    members: Vec<Vec<(usize, usize)>>,
    blocks: Vec<OnceLock<std::result::Result<Arc<Block<T>>, String>>>,
}

fn trivial_group<T: Real>(n: usize) -> PatchSymmetry<T> {
    PatchSymmetry {
        mirrors: Vec::new(),
        images: vec![(0..n).collect()],
        representatives: (0..n).collect(),
        orbit_of: (0..n).map(|i| (i, 0)).collect(),
    }
}

/// Builds the operator for `patches`. Fails before allocating if the dense
/// storage estimate exceeds the configured cap.
pub fn assemble<T: Real>(patches: Arc<PatchSet<T>>, config: SolverConfig) -> Result<BemOperator<T>> {
    let n = patches.len();
    if n == 0 {
        return Err(TrapError::Geometry("no patches to assemble".into()));
    }
    let group = patches.symmetry.clone().unwrap_or_else(|| trivial_group(n));
    let characters = Character::all(group.mirrors.len());
    let members: Vec<_> = (0..group.representatives.len()).map(|o| group.orbit_members(o)).collect();
    // Worst case: every block assembled, matrix plus factor.
    let elem = std::mem::size_of::<T>();
    let mut bytes = 0usize;
    for chi in &characters {
        let m = (0..members.len()).filter(|&o| group.orbit_admits(o, chi)).count();
        bytes = bytes.saturating_add(2 * m * m * elem);
    }
    if bytes > config.memory_cap_bytes {
        return Err(TrapError::Size {
            patches: n,
            required_bytes: bytes,
            cap_bytes: config.memory_cap_bytes,
        });
    }
    let kernels: Vec<_> = patches.triangles.iter().map(|t| TriangleKernel::new(*t)).collect();
    let blocks = characters.iter().map(|_| OnceLock::new()).collect();
    Ok(BemOperator {
        patches,
        kernels: Arc::new(kernels),
        config,
        group,
        characters,
        members,
        blocks,
    })
}

impl<T: Real> BemOperator<T> {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn symmetry_order(&self) -> usize {
        self.group.order()
    }

    /// Number of blocks factored so far.
    pub fn factored_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| matches!(b.get(), Some(Ok(_)))).count()
    }

    /// Single matrix entry M_ij (V per C/m²).
    pub fn entry(&self, i: usize, j: usize) -> T {
        T::lit(COULOMB) * self.kernels[j].potential(self.patches.centroids[i])
    }

    /// Full dense matrix, row-major. Intended for small problems and debugging.
    pub fn dense_matrix(&self) -> Vec<T> {
        let n = self.len();
        let mut out = vec![T::zero(); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.entry(i, j);
            }
        });
        out
    }

    /// Writes the dense matrix: `u64` dimension, then row-major `f64` values (little endian).
    pub fn dump_matrix<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let n = self.len();
        w.write_all(&(n as u64).to_le_bytes())?;
        for v in self.dense_matrix() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    fn block(&self, c: usize) -> Result<Arc<Block<T>>> {
        let res = self.blocks[c].get_or_init(|| self.build_block(c).map(Arc::new).map_err(|e| e.to_string()));
        res.clone().map_err(|reason| TrapError::Solver { reason, condition: f64::NAN })
    }

    fn build_block(&self, c: usize) -> Result<Block<T>> {
        let chi = &self.characters[c];
        let orbits: Vec<usize> = (0..self.members.len()).filter(|&o| self.group.orbit_admits(o, chi)).collect();
        let m = orbits.len();
        let signs: Vec<Vec<(usize, T)>> = orbits
            .iter()
            .map(|&o| self.members[o].iter().map(|&(j, mask)| (j, T::lit(chi.value(mask)))).collect())
            .collect();
        let k = T::lit(COULOMB);
        let mut rows = vec![T::zero(); m * m];
        rows.par_chunks_mut(m).enumerate().for_each(|(r, row)| {
            let x = self.patches.centroids[self.group.representatives[orbits[r]]];
            for (s, v) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for &(j, sign) in &signs[s] {
                    acc = acc + sign * self.kernels[j].potential(x);
                }
                *v = k * acc;
            }
        });
        let mut matrix = vec![T::zero(); m * m];
        for r in 0..m {
            for s in 0..m {
                matrix[s * m + r] = rows[r * m + s];
            }
        }
        drop(rows);
        for r in 0..m {
            let d = matrix[r * m + r];
            if !(d.is_finite() && d != T::zero()) {
                return Err(TrapError::Solver {
                    reason: format!("non-finite or zero diagonal in block {c}"),
                    condition: f64::INFINITY,
                });
            }
        }
        log::debug!("factoring symmetry block {c} of size {m}");
        let (solver, condition) = if m <= self.config.dense_cap {
            let lu = T::lu_factor(&matrix, m);
            let diag = T::lu_u_diagonal(&lu);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for d in diag {
                let a = d.as_f64().abs();
                lo = lo.min(a);
                hi = hi.max(a);
            }
            let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            if !cond.is_finite() || cond * T::epsilon().as_f64() > 1.0 {
                return Err(TrapError::Solver {
                    reason: format!("singular block {c}"),
                    condition: cond,
                });
            }
            (BlockSolver::Dense(lu), cond)
        } else {
            (BlockSolver::Iterative, f64::NAN)
        };
        Ok(Block {
            orbits,
            matrix,
            solver,
            condition,
        })
    }

    fn tolerance(&self) -> f64 {
        self.config.tolerance.max(1e3 * T::epsilon().as_f64())
    }

    fn block_residual(block: &Block<T>, x: &[T], b: &[T], ncols: usize) -> f64 {
        let m = block.orbits.len();
        let mut worst = 0.0f64;
        for col in 0..ncols {
            let (xc, bc) = (&x[col * m..(col + 1) * m], &b[col * m..(col + 1) * m]);
            let bmax = bc.iter().fold(0.0f64, |a, v| a.max(v.as_f64().abs()));
            if bmax == 0.0 {
                continue;
            }
            let mut r = bc.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
            for s in 0..m {
                let xs = xc[s].as_f64();
                let colm = &block.matrix[s * m..(s + 1) * m];
                for (ri, a) in r.iter_mut().zip(colm) {
                    *ri -= a.as_f64() * xs;
                }
            }
            let rmax = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(rmax / bmax);
        }
        worst
    }

    fn block_solve(&self, c: usize, block: &Block<T>, b: &[T], ncols: usize) -> Result<Vec<T>> {
        let m = block.orbits.len();
        let mut x = b.to_vec();
        match &block.solver {
            BlockSolver::Dense(lu) => {
                T::lu_solve_many(lu, &mut x, ncols);
                let mut res = Self::block_residual(block, &x, b, ncols);
                if res > self.tolerance() {
                    // One step of iterative refinement.
                    let mut r = b.to_vec();
                    for col in 0..ncols {
                        for s in 0..m {
                            let xs = x[col * m + s];
                            for i in 0..m {
                                r[col * m + i] = r[col * m + i] - block.matrix[s * m + i] * xs;
                            }
                        }
                    }
                    T::lu_solve_many(lu, &mut r, ncols);
                    for (xi, ri) in x.iter_mut().zip(&r) {
                        *xi = *xi + *ri;
                    }
                    res = Self::block_residual(block, &x, b, ncols);
                }
                if res > self.tolerance() {
                    return Err(TrapError::Solver {
                        reason: format!("block {c} residual {res:e} above tolerance"),
                        condition: block.condition,
                    });
                }
            }
            BlockSolver::Iterative => {
                for col in 0..ncols {
                    let sol = gmres(&block.matrix, m, &b[col * m..(col + 1) * m], self.tolerance(), self.config.max_iterations)?;
                    x[col * m..(col + 1) * m].copy_from_slice(&sol);
                }
            }
        }
        Ok(x)
    }

    /// Solves M σ = v for each column of `rhs` (each of length N).
    pub fn solve_many(&self, rhs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let n = self.len();
        let ncols = rhs.len();
        let mut out = vec![vec![T::zero(); n]; ncols];
        if ncols == 0 {
            return Ok(out);
        }
        for r in rhs {
            if r.len() != n {
                return Err(TrapError::Config(format!("right-hand side of length {} for {} patches", r.len(), n)));
            }
        }
        let order = self.group.order();
        let inv = T::one() / T::lit(order as f64);
        let skip = T::epsilon() * T::lit(64.0);
        for (c, chi) in self.characters.iter().enumerate() {
            let orbits: Vec<usize> = (0..self.members.len()).filter(|&o| self.group.orbit_admits(o, chi)).collect();
            let m = orbits.len();
            if m == 0 {
                continue;
            }
            let signs: Vec<T> = (0..order).map(|g| T::lit(chi.value(g))).collect();
            let mut b = vec![T::zero(); m * ncols];
            let mut any = false;
            for (col, r) in rhs.iter().enumerate() {
                let rmax = r.iter().fold(T::zero(), |a, v| a.max(v.abs()));
                let mut bmax = T::zero();
                for (pos, &o) in orbits.iter().enumerate() {
                    let rep = self.group.representatives[o];
                    let mut acc = T::zero();
                    for g in 0..order {
                        acc = acc + signs[g] * r[self.group.images[g][rep]];
                    }
                    let v = acc * inv;
                    bmax = bmax.max(v.abs());
                    b[col * m + pos] = v;
                }
                if bmax <= skip * rmax {
                    b[col * m..(col + 1) * m].iter_mut().for_each(|v| *v = T::zero());
                } else {
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let block = self.block(c)?;
            let x = self.block_solve(c, &block, &b, ncols)?;
            for col in 0..ncols {
                let dst = &mut out[col];
                for (pos, &o) in block.orbits.iter().enumerate() {
                    let v = x[col * m + pos];
                    for &(j, mask) in &self.members[o] {
                        dst[j] = dst[j] + signs[mask] * v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        Ok(self.solve_many(std::slice::from_ref(&rhs.to_vec()))?.pop().unwrap())
    }

    /// Applies the full operator: (Mσ)_i.
    pub fn apply(&self, sigma: &[T]) -> Vec<T> {
        let k = T::lit(COULOMB);
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let x = self.patches.centroids[i];
                let terms: Vec<T> = self.kernels.iter().zip(sigma).map(|(kern, &s)| kern.potential(x) * s).collect();
                k * crate::scalar::pairwise_sum(&terms)
            })
            .collect()
    }

    /// Potential at every collocation point from point charges.
    pub fn point_charge_potential(&self, charges: &[(Vec3<T>, T)]) -> Vec<T> {
        let k = T::lit(COULOMB);
        self.patches
            .centroids
            .iter()
            .map(|&x| {
                let mut acc = T::zero();
                for &(p, q) in charges {
                    acc = acc + q / x.distance(p);
                }
                k * acc
            })
            .collect()
    }
}

/// Restarted GMRES with Jacobi preconditioning on a column-major matrix.
fn gmres<T: Real>(a: &[T], m: usize, b: &[T], tol: f64, max_iter: usize) -> Result<Vec<T>> {
    let diag: Vec<f64> = (0..m).map(|i| a[i * m + i].as_f64()).collect();
    let matvec = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; m];
        for (s, &xs) in x.iter().enumerate() {
            for (yi, av) in y.iter_mut().zip(&a[s * m..(s + 1) * m]) {
                *yi += av.as_f64() * xs;
            }
        }
        y
    };
    let bf: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    let bnorm = bf.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return Ok(vec![T::zero(); m]);
    }
    let restart = 60.min(m);
    let mut iters = 0;
    let mut trace = String::new();
    while iters < max_iter {
        let ax = matvec(&x);
        let r: Vec<f64> = (0..m).map(|i| (bf[i] - ax[i]) / diag[i]).collect();
        let beta = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let true_res = (0..m).map(|i| (bf[i] - ax[i]).abs()).fold(0.0, f64::max)
            / bf.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        trace = format!("residual {true_res:e} after {iters} iterations");
        if true_res <= tol {
            return Ok(x.into_iter().map(T::lit).collect());
        }
        let mut v = vec![r.iter().map(|ri| ri / beta).collect::<Vec<f64>>()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            iters += 1;
            let mut w: Vec<f64> = matvec(&v[k]).iter().zip(&diag).map(|(a, d)| a / d).collect();
            for (j, vj) in v.iter().enumerate() {
                let hjk: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if wn == 0.0 || g[k + 1].abs() / bnorm < tol * 1e-2 || iters >= max_iter {
                break;
            }
            v.push(w.into_iter().map(|wi| wi / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
    }
    Err(TrapError::NonConvergence {
        iterations: iters,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmres_solves_small_system() {
        let m = 5;
        let mut a = vec![0.0f64; m * m];
        for i in 0..m {
            for j in 0..m {
                a[j * m + i] = if i == j { 4.0 } else { 1.0 / (1.0 + (i + j) as f64) };
            }
        }
        let b: Vec<f64> = (0..m).map(|i| i as f64 + 1.0).collect();
        let x = gmres(&a, m, &b, 1e-12, 100).unwrap();
        for i in 0..m {
            let r: f64 = (0..m).map(|j| a[j * m + i] * x[j]).sum::<f64>() - b[i];
            assert!(r.abs() < 1e-10);
        }
    }
}
