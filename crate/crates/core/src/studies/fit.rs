use serde::Serialize;

use crate::error::{Result, TrapError};

/// Least-squares line y = slope·x + intercept.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: Vec<(f64, f64)>,
    /// Slopes with each sample left out in turn.
    pub leave_one_out_slopes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    /// y ∝ x^(−alpha)
    pub alpha: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

fn ols(samples: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let syy: f64 = samples.iter().map(|s| (s.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

pub fn fit_line(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 3 {
        return Err(TrapError::Resolution(format!("line fit needs at least 3 samples, got {}", samples.len())));
    }
    let x0 = samples[0].0;
    if samples.iter().all(|s| s.0 == x0) {
        return Err(TrapError::Resolution("line fit needs distinct abscissae".into()));
    }
    let (slope, intercept, r_squared) = ols(samples);
    let leave_one_out_slopes = if samples.len() > 3 {
        (0..samples.len())
            .map(|i| {
                let rest: Vec<_> = samples.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| *s).collect();
                ols(&rest).0
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        samples: samples.to_vec(),
        leave_one_out_slopes,
    })
}

/// Fits y = A·x^(−α) on log–log axes; all values must be positive.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerLawFit> {
    if samples.iter().any(|s| !(s.0 > 0.0 && s.1 > 0.0)) {
        return Err(TrapError::Domain("power-law fit needs positive samples".into()));
    }
    let logs: Vec<(f64, f64)> = samples.iter().map(|s| (s.0.ln(), s.1.ln())).collect();
    let f = fit_line(&logs)?;
    Ok(PowerLawFit {
        alpha: -f.slope,
        prefactor: f.intercept.exp(),
        r_squared: f.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_and_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 150.0, 200.0, 300.0, 400.0].iter().map(|&x| (x, 0.6 * x - 10.0)).collect();
        let f = fit_line(&pts).unwrap();
        assert!((f.slope - 0.6).abs() < 1e-12 && (f.intercept + 10.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.leave_one_out_slopes.len(), 5);
        let p: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-4.0))).collect();
        let g = fit_power_law(&p).unwrap();
        assert!((g.alpha - 4.0).abs() < 1e-12 && (g.prefactor - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_line(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }
}
