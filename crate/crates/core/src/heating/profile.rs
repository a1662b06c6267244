use serde::Serialize;

use crate::error::{Result, TrapError};

use super::HeatingReport;

/// Bin width of axial profiles, m.
pub const PROFILE_BIN: f64 = 5e-6;
/// Gaussian smoothing width, m.
pub const PROFILE_SMOOTHING: f64 = 10e-6;

/// Heating of one mode binned by |axial offset| from the ion.
#[derive(Debug, Clone, Serialize)]
pub struct AxialProfile {
    pub mode: usize,
    pub bin_width: f64,
    /// Bin centres, m.
    pub offsets: Vec<f64>,
    /// Γ per unit axial length, quanta/s/m.
    pub gamma_per_m: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// Peak of the smoothed curve (parabolic refinement), m.
    pub peak: f64,
    /// Centre of the largest raw bin, m.
    pub raw_peak: f64,
    /// Full width at half maximum of the smoothed peak, m.
    pub fwhm: f64,
}

/// Profile of mode `k`, optionally restricted to some electrodes.
pub fn axial_profile(report: &HeatingReport, k: usize, electrodes: Option<&[usize]>) -> Result<AxialProfile> {
    axial_profile_with(report, k, electrodes, PROFILE_BIN, PROFILE_SMOOTHING, |_| true)
}

/// As [`axial_profile`] with explicit binning and an extra patch filter on
/// the signed axial offset.
pub fn axial_profile_with(
    report: &HeatingReport,
    k: usize,
    electrodes: Option<&[usize]>,
    bin: f64,
    sigma: f64,
    keep: impl Fn(f64) -> bool,
) -> Result<AxialProfile> {
    if k > 2 {
        return Err(TrapError::Config(format!("mode index {k} out of range")));
    }
    let recs: Vec<_> = report
        .records
        .iter()
        .filter(|r| electrodes.is_none_or(|e| e.contains(&r.electrode)) && keep(r.axial))
        .collect();
    let zmax = recs
        .iter()
        .map(|r| r.axial_extent[0].abs().max(r.axial_extent[2].abs()))
        .fold(0.0, f64::max);
    let nbins = (zmax / bin).floor() as usize + 1;
    let mut raw = vec![0.0; nbins];
    for r in &recs {
        // Spread each patch over its axial footprint, folded at zero offset.
        let [z0, _, z2] = r.axial_extent;
        let lo = if z0 <= 0.0 && z2 >= 0.0 { 0 } else { (z0.abs().min(z2.abs()) / bin).floor() as usize };
        let hi = ((z0.abs().max(z2.abs()) / bin).floor() as usize).min(nbins - 1);
        for (b, slot) in raw.iter_mut().enumerate().take(hi + 1).skip(lo.min(hi)) {
            let (a, c) = (b as f64 * bin, (b + 1) as f64 * bin);
            let c = if b == nbins - 1 { f64::INFINITY } else { c };
            let m = tent_cdf(&r.axial_extent, c) - tent_cdf(&r.axial_extent, a) + tent_cdf(&r.axial_extent, -a)
                - tent_cdf(&r.axial_extent, -c);
            *slot += r.gamma[k] * m;
        }
    }
    let filled = raw.iter().filter(|v| **v > 0.0).count();
    if filled < 3 {
        return Err(TrapError::Resolution(format!("axial profile has only {filled} nonempty bins")));
    }
    let gamma_per_m: Vec<f64> = raw.iter().map(|v| v / bin).collect();
    let smoothed = smooth(&gamma_per_m, bin, sigma);
    let imax = argmax(&smoothed);
    let irawmax = argmax(&gamma_per_m);
    let offsets: Vec<f64> = (0..nbins).map(|i| (i as f64 + 0.5) * bin).collect();
    let peak = refine_peak(&smoothed, imax, bin);
    let fwhm = half_max_width(&smoothed, imax, bin);
    Ok(AxialProfile {
        mode: k,
        bin_width: bin,
        offsets,
        gamma_per_m,
        smoothed,
        peak,
        raw_peak: (irawmax as f64 + 0.5) * bin,
        fwhm,
    })
}

/// Heating of one mode binned by centroid distance from the ion, starting at
/// the nearest patch.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceProfile {
    pub mode: usize,
    pub bin_width: f64,
    /// Lower edge of the first bin, m.
    pub start: f64,
    /// Γ per bin, quanta/s.
    pub gamma: Vec<f64>,
    /// Index of the largest bin.
    pub peak_bin: usize,
}

pub fn distance_profile(report: &HeatingReport, k: usize, bin: f64) -> Result<DistanceProfile> {
    if k > 2 {
        return Err(TrapError::Config(format!("mode index {k} out of range")));
    }
    if !(bin > 0.0) || report.records.is_empty() {
        return Err(TrapError::Resolution("distance profile needs patches and a positive bin".into()));
    }
    let start = report.records.iter().map(|r| r.distance_to_ion).fold(f64::INFINITY, f64::min);
    let end = report.records.iter().map(|r| r.distance_to_ion).fold(0.0, f64::max);
    let n = ((end - start) / bin).floor() as usize + 1;
    let mut gamma = vec![0.0; n];
    for r in &report.records {
        gamma[(((r.distance_to_ion - start) / bin).floor() as usize).min(n - 1)] += r.gamma[k];
    }
    let peak_bin = argmax(&gamma);
    Ok(DistanceProfile {
        mode: k,
        bin_width: bin,
        start,
        gamma,
        peak_bin,
    })
}

/// Cumulative axial distribution of a uniform triangle with sorted vertex
/// coordinates `z` (piecewise-quadratic).
fn tent_cdf(z: &[f64; 3], x: f64) -> f64 {
    let [a, b, c] = *z;
    if x <= a {
        return 0.0;
    }
    if x >= c {
        return 1.0;
    }
    let w = c - a;
    if x <= b {
        (x - a) * (x - a) / (w * (b - a))
    } else {
        1.0 - (c - x) * (c - x) / (w * (c - b))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Gaussian smoothing with the folded axis reflected at zero offset.
fn smooth(v: &[f64], bin: f64, sigma: f64) -> Vec<f64> {
    let n = v.len() as isize;
    let reach = (4.0 * sigma / bin).ceil() as isize;
    let w: Vec<f64> = (-reach..=reach)
        .map(|j| {
            let x = j as f64 * bin / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for j in -reach..=reach {
                let mut src = i + j;
                if src < 0 {
                    src = -src - 1;
                }
                if src >= n {
                    continue;
                }
                let wj = w[(j + reach) as usize];
                acc += wj * v[src as usize];
                norm += wj;
            }
            acc / norm
        })
        .collect()
}

fn refine_peak(v: &[f64], i: usize, bin: f64) -> f64 {
    let centre = (i as f64 + 0.5) * bin;
    if i == 0 || i + 1 >= v.len() {
        return centre;
    }
    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return centre;
    }
    centre + 0.5 * (a - c) / den * bin
}

fn half_max_width(v: &[f64], i: usize, bin: f64) -> f64 {
    let half = 0.5 * v[i];
    let cross = |a: usize, b: usize| -> f64 {
        // Linear interpolation between bin centres a and b.
        let t = (v[a] - half) / (v[a] - v[b]);
        (a as f64 + 0.5 + t * (b as f64 - a as f64)) * bin
    };
    let mut hi = None;
    for j in i..v.len() - 1 {
        if v[j + 1] < half {
            hi = Some(cross(j, j + 1));
            break;
        }
    }
    let mut lo = None;
    for j in (1..=i).rev() {
        if v[j - 1] < half {
            lo = Some(cross(j, j - 1));
            break;
        }
    }
    let hi = hi.unwrap_or(v.len() as f64 * bin);
    // A peak touching zero offset is symmetric about it.
    let lo = lo.unwrap_or(-hi.min(v.len() as f64 * bin));
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn report(points: &[(f64, f64)]) -> HeatingReport {
        HeatingReport {
            modes: ModeFrame {
                frequencies: [1e6; 3],
                axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            },
            noise: NoiseModel::default(),
            species: crate::trapdynamics::IonSpecies::yb171(),
            records: points
                .iter()
                .enumerate()
                .map(|(i, &(z, g))| PatchHeatingRecord {
                    patch: i,
                    gamma: [g, g, g],
                    coupling: [0.0; 3],
                    area: 1.0,
                    distance_to_ion: z.abs(),
                    axial: z,
                    axial_extent: [z; 3],
                    electrode: 0,
                })
                .collect(),
            totals: [0.0; 3],
            spectral_density: [0.0; 3],
            electrodes: vec!["a".into()],
        }
    }

    #[test]
    fn gaussian_bump_peak_and_width() {
        let s = 20e-6;
        let pts: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let z = (i as f64 + 0.5) * 1e-6;
                (z, (-0.5 * ((z - 110e-6) / s).powi(2)).exp())
            })
            .collect();
        let p = axial_profile(&report(&pts), 0, None).unwrap();
        assert!((p.peak - 110e-6).abs() < 1e-6);
        // Smoothing broadens σ to √(20² + 10²) µm.
        let expected = 2.0 * (2.0 * 2f64.ln()).sqrt() * (s * s + 1e-10).sqrt();
        assert!((p.fwhm - expected).abs() / expected < 0.03, "{} vs {}", p.fwhm, expected);
    }

    #[test]
    fn tent_distribution_integrates_to_one() {
        let z = [-3e-6, 1e-6, 8e-6];
        assert_eq!(tent_cdf(&z, -1.0), 0.0);
        assert_eq!(tent_cdf(&z, 1.0), 1.0);
        // Continuous at the middle vertex.
        let left = tent_cdf(&z, 1e-6 - 1e-15);
        let right = tent_cdf(&z, 1e-6 + 1e-15);
        assert!((left - right).abs() < 1e-8);
        assert!((left - 4.0 / 11.0).abs() < 1e-8);
    }

    #[test]
    fn too_few_bins_is_an_error() {
        let r = report(&[(1e-6, 1.0), (2e-6, 1.0)]);
        assert!(matches!(axial_profile(&r, 0, None), Err(TrapError::Resolution(_))));
    }

    #[test]
    fn distance_bins_start_at_nearest_patch() {
        let r = report(&[(10e-6, 1.0), (12e-6, 2.0), (31e-6, 0.5)]);
        let p = distance_profile(&r, 0, PROFILE_BIN).unwrap();
        assert_eq!(p.start, 10e-6);
        assert_eq!(p.gamma.len(), 5);
        assert_eq!(p.gamma[0], 3.0);
        assert_eq!(p.peak_bin, 0);
    }

    #[test]
    fn decaying_profile_peaks_at_zero() {
        let pts: Vec<(f64, f64)> = (0..300).map(|i| (i as f64 * 1e-6 - 150e-6, (-(i as f64 - 150.0).abs() / 30.0).exp())).collect();
        let p = axial_profile(&report(&pts), 2, None).unwrap();
        assert!(p.peak < PROFILE_BIN);
    }
}
