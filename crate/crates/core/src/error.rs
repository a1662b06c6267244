use thiserror::Error;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Error)]
pub enum TrapError {
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("mesh resolution {target_edge:e} m cannot resolve feature of size {feature:e} m")]
    FeatureResolution { target_edge: f64, feature: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("operator of {patches} patches needs ~{required_bytes} bytes, cap is {cap_bytes}")]
    Size {
        patches: usize,
        required_bytes: usize,
        cap_bytes: usize,
    },

    #[error("linear solve failed: {reason} (condition estimate {condition:e})")]
    Solver { reason: String, condition: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("point {point:?} lies {distance:e} m from the surface (panel size {panel:e} m)")]
    TooClose {
        point: [f64; 3],
        distance: f64,
        panel: f64,
    },

    #[error("did not converge after {iterations} iterations: {trace}")]
    NonConvergence { iterations: usize, trace: String },

    #[error("unconfined direction along axis {axis:?} (curvature {eigenvalue:e})")]
    Unconfined { axis: [f64; 3], eigenvalue: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("{tag}: {source}")]
    Tagged {
        tag: String,
        #[source]
        source: Box<TrapError>,
    },
}

impl TrapError {
    pub fn param(field: &'static str, reason: impl Into<String>) -> Self {
        TrapError::Parameter {
            field,
            reason: reason.into(),
        }
    }

    pub fn tagged(self, tag: impl Into<String>) -> Self {
        TrapError::Tagged {
            tag: tag.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = TrapError> = std::result::Result<T, E>;
