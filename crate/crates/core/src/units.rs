//! Physical constants and the internal unit system.
//!
//! All solver arithmetic runs in (ns, um) units: time in nanoseconds, length
//! in micrometers, Rabi frequencies and detunings in rad/ns, particle density
//! in um^-3. With these units the propagation coefficient N k mu^2 / (hbar
//! eps0) stays at O(1e4..1e5) (um ns)^-1 for realistic dense-medium presets,
//! so grid quantities remain near unity instead of spanning SI exponent
//! ranges. Conversions from SI-flavoured inputs (eV, Debye, nm, mm) happen
//! exactly once, when the domain types are constructed.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Reduced Planck constant, J s.
pub const HBAR_J_S: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, C^2 J^-1 m^-1.
pub const EPSILON0_SI: f64 = 8.854_187_812_8e-12;
/// Speed of light, m/s.
pub const C_M_PER_S: f64 = 2.997_924_58e8;
/// One Debye in C m, at the precision quoted with the level-scheme data.
pub const DEBYE_TO_C_M: f64 = 3.33e-30;
/// One electronvolt in J.
pub const EV_TO_J: f64 = 1.602_176_634e-19;

/// Photon wavelength-energy product h c / e, in nm eV.
pub const EV_NM: f64 = 1e9 * 2.0 * std::f64::consts::PI * HBAR_J_S * C_M_PER_S / EV_TO_J;

/// Angular frequency of a 1 eV quantum, rad/ns.
pub const EV_TO_RAD_PER_NS: f64 = EV_TO_J / HBAR_J_S * 1e-9;

/// Speed of light in internal units, um/ns.
pub const C_UM_PER_NS: f64 = C_M_PER_S * 1e-3;

/// (m s)^-1 to (um ns)^-1.
pub const PER_M_S_TO_PER_UM_NS: f64 = 1e-15;
/// m^-1 to um^-1.
pub const PER_M_TO_PER_UM: f64 = 1e-6;

/// Energy gap in eV to vacuum wavelength in nm.
pub fn ev_to_lambda_nm(energy_ev: f64) -> f64 {
    EV_NM / energy_ev
}

/// Vacuum wavelength in nm to wavenumber in um^-1.
pub fn lambda_nm_to_k_um_inv(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI / (lambda_nm * 1e-3)
}

/// Energy gap in eV to wavenumber in um^-1.
pub fn ev_to_k_um_inv(energy_ev: f64) -> f64 {
    lambda_nm_to_k_um_inv(ev_to_lambda_nm(energy_ev))
}

/// The fundamental constants entering the propagation and coupling
/// coefficients. Kept as a value type so nonstandard values can be injected
/// in tests; [`PhysicalConstants::default`] is what every pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar_j_s: f64,
    /// Vacuum permittivity, C^2 J^-1 m^-1.
    pub epsilon0_si: f64,
    /// Speed of light, m/s.
    pub c_m_per_s: f64,
    /// Debye to C m conversion.
    pub debye_to_c_m: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar_j_s: HBAR_J_S,
            epsilon0_si: EPSILON0_SI,
            c_m_per_s: C_M_PER_S,
            debye_to_c_m: DEBYE_TO_C_M,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("hbar_j_s", self.hbar_j_s),
            ("epsilon0_si", self.epsilon0_si),
            ("c_m_per_s", self.c_m_per_s),
            ("debye_to_c_m", self.debye_to_c_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    "PhysicalConstants",
                    format!("{name} must be strictly positive, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Dipole moment in Debye to C m.
    pub fn debye(&self, mu_debye: f64) -> f64 {
        mu_debye * self.debye_to_c_m
    }
}
