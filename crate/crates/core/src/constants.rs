//! CODATA 2018 physical constants (SI).

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Atomic mass constant, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Coulomb constant 1/(4π ε₀), m/F.
pub const COULOMB: f64 = 1.0 / (4.0 * std::f64::consts::PI * EPSILON_0);

/// Metres per micrometre.
pub const MICRON: f64 = 1e-6;
