//! Mirror symmetries of a patch set.
//!
//! Up to three mutually orthogonal mirror planes through a common point
//! generate an abelian group of order `2^k`. Group elements are bit masks
//! over the mirror list; every element is its own inverse.

use std::collections::HashMap;

use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorPlane<T> {
    pub point: Vec3<T>,
    /// Unit normal.
    pub normal: Vec3<T>,
}

impl<T: Real> MirrorPlane<T> {
    pub fn new(point: Vec3<T>, normal: Vec3<T>) -> Self {
        Self {
            point,
            normal: normal.normalized(),
        }
    }

    #[inline]
    pub fn reflect(&self, p: Vec3<T>) -> Vec3<T> {
        let s = (p - self.point).dot(self.normal);
        p - self.normal * (s + s)
    }

    #[inline]
    pub fn reflect_direction(&self, v: Vec3<T>) -> Vec3<T> {
        let s = v.dot(self.normal);
        v - self.normal * (s + s)
    }
}

/// Parity of a field or source under one mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// One-dimensional representation of the mirror group: a parity per mirror.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Character(pub Vec<Parity>);

impl Character {
    /// χ(g) for the element encoded by `mask`.
    pub fn value(&self, mask: usize) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, p)| p.sign())
            .product()
    }

    /// All `2^k` characters of a group with `k` mirrors.
    pub fn all(k: usize) -> Vec<Character> {
        (0..1usize << k)
            .map(|bits| {
                Character(
                    (0..k)
                        .map(|i| if bits & (1 << i) != 0 { Parity::Odd } else { Parity::Even })
                        .collect(),
                )
            })
            .collect()
    }
}

/// Mirror group acting on a patch set by index permutation.
#[derive(Debug, Clone)]
pub struct PatchSymmetry<T> {
    pub mirrors: Vec<MirrorPlane<T>>,
    /// `images[mask][i]` = index of the image of patch `i` under element `mask`.
    pub images: Vec<Vec<usize>>,
    /// One representative per orbit (smallest index).
    pub representatives: Vec<usize>,
    /// For each patch: (orbit position in `representatives`, a group element
    /// mapping the representative onto it).
    pub orbit_of: Vec<(usize, usize)>,
}

impl<T: Real> PatchSymmetry<T> {
    pub fn order(&self) -> usize {
        self.images.len()
    }

    /// Members of orbit `o` with the element mapping the representative to each.
    pub fn orbit_members(&self, o: usize) -> Vec<(usize, usize)> {
        let rep = self.representatives[o];
        let mut seen: Vec<(usize, usize)> = Vec::new();
        for mask in 0..self.order() {
            let j = self.images[mask][rep];
            if !seen.iter().any(|&(k, _)| k == j) {
                seen.push((j, mask));
            }
        }
        seen
    }

    /// Whether the representative of orbit `o` can carry a nonzero
    /// χ-symmetric value (its stabiliser lies in the kernel of χ).
    pub fn orbit_admits(&self, o: usize, chi: &Character) -> bool {
        let rep = self.representatives[o];
        (0..self.order()).all(|mask| self.images[mask][rep] != rep || chi.value(mask) > 0.0)
    }
}

/// Builds the patch permutation for each mirror; mirrors that do not map the
/// patch set onto itself (vertex positions matched within `tol`) are dropped.
pub fn detect_symmetry<T: Real>(
    triangles: &[[Vec3<T>; 3]],
    candidates: &[MirrorPlane<T>],
    tol: T,
) -> Option<PatchSymmetry<T>> {
    if triangles.is_empty() || candidates.is_empty() {
        return None;
    }
    let centroids: Vec<Vec3<T>> = triangles
        .iter()
        .map(|t| (t[0] + t[1] + t[2]) / T::lit(3.0))
        .collect();
    let centroids = &centroids[..];
    let index = SpatialHash::new(centroids, tol * T::lit(4.0));
    let mut mirrors = Vec::new();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    for m in candidates {
        let mut perm = Vec::with_capacity(centroids.len());
        let mut ok = true;
        for (i, &c) in centroids.iter().enumerate() {
            match index.find(centroids, m.reflect(c), tol) {
                Some(j) if same_vertices(&triangles[j], &triangles[i].map(|p| m.reflect(p)), tol) => {
                    perm.push(j)
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            mirrors.push(*m);
            perms.push(perm);
        } else {
            log::warn!("mirror plane with normal {:?} is not a symmetry of the mesh; ignored", m.normal.to_f64());
        }
    }
    if mirrors.is_empty() {
        return None;
    }
    let n = centroids.len();
    let order = 1usize << mirrors.len();
    let mut images = vec![(0..n).collect::<Vec<usize>>()];
    for mask in 1..order {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << low);
        let prev = &images[rest];
        let img: Vec<usize> = (0..n).map(|i| perms[low][prev[i]]).collect();
        images.push(img);
    }
    let mut orbit_of = vec![(usize::MAX, 0usize); n];
    let mut representatives = Vec::new();
    for i in 0..n {
        if orbit_of[i].0 != usize::MAX {
            continue;
        }
        let o = representatives.len();
        representatives.push(i);
        for (mask, img) in images.iter().enumerate() {
            let j = img[i];
            if orbit_of[j].0 == usize::MAX {
                orbit_of[j] = (o, mask);
            }
        }
    }
    Some(PatchSymmetry {
        mirrors,
        images,
        representatives,
        orbit_of,
    })
}

fn same_vertices<T: Real>(a: &[Vec3<T>; 3], b: &[Vec3<T>; 3], tol: T) -> bool {
    b.iter().all(|q| a.iter().any(|p| p.distance(*q) <= tol))
}

struct SpatialHash {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialHash {
    fn new<T: Real>(points: &[Vec3<T>], cell: T) -> Self {
        let cell = cell.as_f64().max(f64::MIN_POSITIVE);
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p.to_f64(), cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: [f64; 3], cell: f64) -> [i64; 3] {
        p.map(|c| (c / cell).floor() as i64)
    }

    fn find<T: Real>(&self, points: &[Vec3<T>], q: Vec3<T>, tol: T) -> Option<usize> {
        let k = Self::key(q.to_f64(), self.cell);
        let mut best: Option<(usize, T)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in list {
                            let d = points[i].distance(q);
                            if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
                                best = Some((i, d));
                            }
                        }
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }
}
