use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};

/// Build parameters of the wire-frame ("skeleton") trap. Lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkeletonParams {
    /// Diameter of the cylinder each hexagonal wire approximates.
    pub wire_diameter: f64,
    /// Axial length of one electrode tooth.
    pub tooth_width: f64,
    /// Axial gap between adjacent teeth.
    pub tooth_gap: f64,
    /// Distance between opposing electrode surfaces (2 × ion-electrode distance).
    pub opposing_distance: f64,
    /// Nominal axial span of a rail; used when a tooth count is derived from
    /// a tooth width.
    pub axial_extent: f64,
    /// Teeth per rail. Even counts centre a gap on the ion, odd counts a tooth.
    pub teeth_count: usize,
    /// Outermost teeth of each DC rail wired as endcaps, per end.
    pub endcap_teeth: usize,
    /// Length of the radial support strut attached to each tooth (0 = none).
    pub strut_length: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            wire_diameter: 20e-6,
            tooth_width: 170e-6,
            tooth_gap: 9e-6,
            opposing_distance: 400e-6,
            axial_extent: 1.5e-3,
            teeth_count: 8,
            endcap_teeth: 1,
            strut_length: 0.0,
        }
    }
}

impl SkeletonParams {
    pub fn ion_electrode_distance(&self) -> f64 {
        self.opposing_distance / 2.0
    }

    /// Axial length from the first tooth's outer face to the last one's.
    pub fn rail_span(&self) -> f64 {
        self.teeth_count as f64 * self.tooth_width
            + (self.teeth_count.saturating_sub(1)) as f64 * self.tooth_gap
    }

    /// Tooth count of the requested parity whose span is closest to `axial_extent`.
    pub fn count_for_extent(&self, tooth_centered: bool) -> usize {
        let period = self.tooth_width + self.tooth_gap;
        let ideal = (self.axial_extent + self.tooth_gap) / period;
        let parity = if tooth_centered { 1 } else { 0 };
        let mut best = if tooth_centered { 1 } else { 2 };
        let mut best_err = f64::INFINITY;
        let upper = (ideal.ceil() as usize + 3).max(4);
        for n in (1..=upper).filter(|n| n % 2 == parity) {
            let err = (n as f64 - ideal).abs();
            if err < best_err {
                best_err = err;
                best = n;
            }
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        positive("wire_diameter", self.wire_diameter)?;
        positive("tooth_width", self.tooth_width)?;
        positive("tooth_gap", self.tooth_gap)?;
        positive("opposing_distance", self.opposing_distance)?;
        positive("axial_extent", self.axial_extent)?;
        if self.tooth_gap >= self.tooth_width {
            return Err(TrapError::param("tooth_gap", "must be smaller than tooth_width"));
        }
        if self.teeth_count < 2 * self.endcap_teeth + 1 {
            return Err(TrapError::param(
                "teeth_count",
                format!("need at least {} teeth for {} endcap teeth per end", 2 * self.endcap_teeth + 1, self.endcap_teeth),
            ));
        }
        if self.wire_diameter >= self.opposing_distance / 2.0 {
            return Err(TrapError::param("wire_diameter", "wire would enclose the trap centre"));
        }
        if !(self.strut_length >= 0.0 && self.strut_length.is_finite()) {
            return Err(TrapError::param("strut_length", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Build parameters of the conventional four-blade trap. Lengths in metres,
/// angle in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BladeParams {
    pub ion_electrode_distance: f64,
    /// Axial blade length.
    pub blade_length: f64,
    /// Full opening angle of the blade tip.
    pub blade_tip_angle: f64,
    /// Radial depth from tip to back face.
    pub blade_depth: f64,
    /// Axial distance between the inner faces of the two DC endcap segments.
    pub endcap_separation: f64,
    /// Gap between the central and endcap segments.
    pub segment_gap: f64,
}

impl Default for BladeParams {
    fn default() -> Self {
        Self {
            ion_electrode_distance: 200e-6,
            blade_length: 2e-3,
            blade_tip_angle: 45.0,
            blade_depth: 0.5e-3,
            endcap_separation: 1e-3,
            segment_gap: 20e-6,
        }
    }
}

impl BladeParams {
    pub fn validate(&self) -> Result<()> {
        positive("ion_electrode_distance", self.ion_electrode_distance)?;
        positive("blade_length", self.blade_length)?;
        positive("blade_depth", self.blade_depth)?;
        positive("endcap_separation", self.endcap_separation)?;
        positive("segment_gap", self.segment_gap)?;
        if !(self.blade_tip_angle > 0.0 && self.blade_tip_angle < 90.0) {
            return Err(TrapError::param("blade_tip_angle", "must lie in (0, 90) degrees"));
        }
        if self.endcap_separation / 2.0 - self.segment_gap <= 0.0 {
            return Err(TrapError::param("segment_gap", "central segment would vanish"));
        }
        if self.endcap_separation >= self.blade_length {
            return Err(TrapError::param("endcap_separation", "must be shorter than blade_length"));
        }
        Ok(())
    }
}

/// Provenance of a geometry, recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GeometryParams {
    Skeleton(SkeletonParams),
    Blade(BladeParams),
    Custom { name: String },
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(TrapError::param(field, format!("must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SkeletonParams::default().validate().unwrap();
        BladeParams::default().validate().unwrap();
    }

    #[test]
    fn zero_gap_names_field() {
        let p = SkeletonParams {
            tooth_gap: 0.0,
            ..Default::default()
        };
        match p.validate() {
            Err(TrapError::Parameter { field, .. }) => assert_eq!(field, "tooth_gap"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blade_angle_domain() {
        let p = BladeParams {
            blade_tip_angle: 90.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn tooth_count_parity() {
        let p = SkeletonParams {
            tooth_width: 211e-6,
            ..Default::default()
        };
        assert_eq!(p.count_for_extent(true), 7);
        assert_eq!(SkeletonParams::default().count_for_extent(false), 8);
    }
}
