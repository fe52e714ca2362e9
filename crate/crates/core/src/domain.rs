//! Domain types shared by every stage: the three-level scheme, pulse and
//! medium parameters, simulation grids, and the validity report for the
//! adiabatic coherence-preparation regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Level scheme of the lambda system: ground |1>, dipole-linked upper |2>,
/// metastable |3>, with the two transition dipole moments and the derived
/// pump/Stokes wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub e1_ev: f64,
    pub e2_ev: f64,
    pub e3_ev: f64,
    pub mu12_debye: f64,
    pub mu23_debye: f64,
    lambda_p_nm: f64,
    lambda_s_nm: f64,
    k_p_um_inv: f64,
    k_s_um_inv: f64,
}

impl LevelScheme {
    /// Builds the scheme from state energies and dipole moments. Explicit
    /// wavelengths are optional; when supplied they must agree with the
    /// level-energy differences to 1e-6 relative.
    pub fn new(
        e1_ev: f64,
        e2_ev: f64,
        e3_ev: f64,
        mu12_debye: f64,
        mu23_debye: f64,
        lambda_p_nm: Option<f64>,
        lambda_s_nm: Option<f64>,
    ) -> Result<Self> {
        if !(e1_ev < e3_ev && e3_ev < e2_ev) {
            return Err(Error::invalid(
                "LevelScheme",
                format!("energies must satisfy e1 < e3 < e2, got ({e1_ev}, {e3_ev}, {e2_ev}) eV"),
            ));
        }
        if !(mu12_debye > 0.0) || !(mu23_debye > 0.0) {
            return Err(Error::invalid(
                "LevelScheme",
                format!("dipole moments must be positive, got mu12 = {mu12_debye} D, mu23 = {mu23_debye} D"),
            ));
        }
        let lp = units::ev_to_lambda_nm(e2_ev - e1_ev);
        let ls = units::ev_to_lambda_nm(e2_ev - e3_ev);
        for (name, given, derived) in [
            ("lambda_p_nm", lambda_p_nm, lp),
            ("lambda_s_nm", lambda_s_nm, ls),
        ] {
            if let Some(given) = given {
                let rel = (given / derived - 1.0).abs();
                if rel > 1e-6 {
                    return Err(Error::invalid(
                        "LevelScheme",
                        format!(
                            "{name} = {given} nm disagrees with the level energies \
                             ({derived:.6} nm) by {rel:.2e} relative (tolerance 1e-6)"
                        ),
                    ));
                }
            }
        }
        let lambda_p_nm = lambda_p_nm.unwrap_or(lp);
        let lambda_s_nm = lambda_s_nm.unwrap_or(ls);
        Ok(Self {
            e1_ev,
            e2_ev,
            e3_ev,
            mu12_debye,
            mu23_debye,
            lambda_p_nm,
            lambda_s_nm,
            k_p_um_inv: units::lambda_nm_to_k_um_inv(lambda_p_nm),
            k_s_um_inv: units::lambda_nm_to_k_um_inv(lambda_s_nm),
        })
    }

    pub fn lambda_p_nm(&self) -> f64 {
        self.lambda_p_nm
    }

    pub fn lambda_s_nm(&self) -> f64 {
        self.lambda_s_nm
    }

    pub fn k_p_um_inv(&self) -> f64 {
        self.k_p_um_inv
    }

    pub fn k_s_um_inv(&self) -> f64 {
        self.k_s_um_inv
    }

    /// Gap between the metastable and ground state, eV.
    pub fn e31_ev(&self) -> f64 {
        self.e3_ev - self.e1_ev
    }
}

/// Analytic Gaussian pulse: peak Rabi frequency, FWHM duration, envelope
/// center and one-photon detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub omega0_ns_inv: f64,
    pub tau_ns: f64,
    pub t_center_ns: f64,
    pub detuning_ns_inv: f64,
}

impl PulseSpec {
    pub fn new(
        omega0_ns_inv: f64,
        tau_ns: f64,
        t_center_ns: f64,
        detuning_ns_inv: f64,
    ) -> Result<Self> {
        if !(omega0_ns_inv >= 0.0) || !omega0_ns_inv.is_finite() {
            return Err(Error::invalid(
                "PulseSpec",
                format!("omega0 must be finite and >= 0, got {omega0_ns_inv} ns^-1"),
            ));
        }
        if !(tau_ns > 0.0) || !tau_ns.is_finite() {
            return Err(Error::invalid(
                "PulseSpec",
                format!("tau must be finite and > 0, got {tau_ns} ns"),
            ));
        }
        if !t_center_ns.is_finite() || !detuning_ns_inv.is_finite() {
            return Err(Error::invalid(
                "PulseSpec",
                "t_center and detuning must be finite",
            ));
        }
        Ok(Self {
            omega0_ns_inv,
            tau_ns,
            t_center_ns,
            detuning_ns_inv,
        })
    }

    /// Envelope value at time `t_ns`.
    pub fn envelope(&self, t_ns: f64) -> f64 {
        gaussian_envelope(t_ns, self)
    }

    /// Same pulse with the peak Rabi frequency scaled by `factor` (transverse
    /// beam-profile weighting).
    pub fn scaled(&self, factor: f64) -> PulseSpec {
        PulseSpec {
            omega0_ns_inv: self.omega0_ns_inv * factor,
            ..*self
        }
    }
}

/// omega0 * exp(-4 ln2 (t - t_center)^2 / tau^2): a Gaussian whose full width
/// at half maximum is exactly `tau`.
pub fn gaussian_envelope(t_ns: f64, spec: &PulseSpec) -> f64 {
    let x = (t_ns - spec.t_center_ns) / spec.tau_ns;
    spec.omega0_ns_inv * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
}

/// Target density and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub density_per_um3: f64,
    pub length_um: f64,
}

impl MediumSpec {
    pub fn new(density_per_um3: f64, length_um: f64) -> Result<Self> {
        if !(density_per_um3 >= 0.0) || !density_per_um3.is_finite() {
            return Err(Error::invalid(
                "MediumSpec",
                format!("density must be finite and >= 0, got {density_per_um3} um^-3"),
            ));
        }
        if !(length_um > 0.0) || !length_um.is_finite() {
            return Err(Error::invalid(
                "MediumSpec",
                format!("length must be finite and > 0, got {length_um} um"),
            ));
        }
        Ok(Self {
            density_per_um3,
            length_um,
        })
    }
}

/// Uniform time grid for the Bloch stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min_ns: f64,
    pub t_max_ns: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(t_min_ns: f64, t_max_ns: f64, n_t: usize) -> Result<Self> {
        if !(t_min_ns < t_max_ns) {
            return Err(Error::invalid(
                "TimeGrid",
                format!("need t_min < t_max, got [{t_min_ns}, {t_max_ns}] ns"),
            ));
        }
        if n_t < 2 {
            return Err(Error::invalid(
                "TimeGrid",
                format!("need n_t >= 2, got {n_t}"),
            ));
        }
        Ok(Self {
            t_min_ns,
            t_max_ns,
            n_t,
        })
    }

    pub fn dt_ns(&self) -> f64 {
        (self.t_max_ns - self.t_min_ns) / (self.n_t - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt_ns();
        (0..self.n_t)
            .map(|i| self.t_min_ns + i as f64 * dt)
            .collect()
    }

    /// Grid with the step halved (shared nodes at the original points), for
    /// convergence diagnostics.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            t_min_ns: self.t_min_ns,
            t_max_ns: self.t_max_ns,
            n_t: 2 * self.n_t - 1,
        }
    }
}

/// Full simulation grid: the time window plus the z-march step and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub time: TimeGrid,
    pub dz_um: f64,
    pub n_z: usize,
}

impl SimGrid {
    pub fn new(time: TimeGrid, dz_um: f64, n_z: usize) -> Result<Self> {
        if !(dz_um > 0.0) || !dz_um.is_finite() {
            return Err(Error::invalid(
                "SimGrid",
                format!("need dz > 0, got {dz_um} um"),
            ));
        }
        if n_z < 1 {
            return Err(Error::invalid("SimGrid", "need n_z >= 1"));
        }
        Ok(Self { time, dz_um, n_z })
    }

    /// Builds the z-grid covering `medium.length_um`, checking that the step
    /// count matches the length within one step.
    pub fn for_medium(time: TimeGrid, dz_um: f64, medium: &MediumSpec) -> Result<Self> {
        if !(dz_um > 0.0) || !dz_um.is_finite() {
            return Err(Error::invalid(
                "SimGrid",
                format!("need dz > 0, got {dz_um} um"),
            ));
        }
        let n_z = (medium.length_um / dz_um).round() as usize;
        if n_z < 1 {
            return Err(Error::invalid(
                "SimGrid",
                format!(
                    "medium length {} um is below one z step {} um",
                    medium.length_um, dz_um
                ),
            ));
        }
        let grid = Self { time, dz_um, n_z };
        grid.check_against(medium)?;
        Ok(grid)
    }

    pub fn check_against(&self, medium: &MediumSpec) -> Result<()> {
        let covered = self.dz_um * self.n_z as f64;
        if (covered - medium.length_um).abs() > self.dz_um * (1.0 + 1e-9) {
            return Err(Error::invalid(
                "SimGrid",
                format!(
                    "dz * n_z = {covered} um does not match the medium length {} um within one step",
                    medium.length_um
                ),
            ));
        }
        Ok(())
    }

    pub fn length_um(&self) -> f64 {
        self.dz_um * self.n_z as f64
    }
}

/// Outcome of checking the adiabatic coherence-preparation conditions
/// 1/tau_P < Delta_P < Delta_S with matched peak Rabi frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// 1/tau_P < Delta_P.
    pub bandwidth_ok: bool,
    /// Delta_P - 1/tau_P, ns^-1.
    pub bandwidth_margin_ns_inv: f64,
    /// Delta_P < Delta_S.
    pub ordering_ok: bool,
    /// Delta_S - Delta_P, ns^-1.
    pub ordering_margin_ns_inv: f64,
    /// |omega0_P - omega0_S| / max within the threshold.
    pub amplitude_ok: bool,
    pub amplitude_rel_diff: f64,
    pub amplitude_threshold: f64,
    pub pass: bool,
}

impl ConditionReport {
    pub fn summary(&self) -> String {
        format!(
            "1/tau_P < Delta_P: {} (margin {:+.4} ns^-1); Delta_P < Delta_S: {} (margin {:+.4} ns^-1); \
             Omega0_P ~ Omega0_S: {} (rel diff {:.3} vs {:.3}); overall: {}",
            if self.bandwidth_ok { "ok" } else { "FAIL" },
            self.bandwidth_margin_ns_inv,
            if self.ordering_ok { "ok" } else { "FAIL" },
            self.ordering_margin_ns_inv,
            if self.amplitude_ok { "ok" } else { "FAIL" },
            self.amplitude_rel_diff,
            self.amplitude_threshold,
            if self.pass { "PASS" } else { "FAIL" },
        )
    }
}

pub const DEFAULT_AMPLITUDE_THRESHOLD: f64 = 0.10;

/// Checks the parameter region that produces a robust transient coherence:
/// a report, never a failure.
pub fn validate_cpr_conditions(pump: &PulseSpec, stokes: &PulseSpec) -> ConditionReport {
    validate_cpr_conditions_with(pump, stokes, DEFAULT_AMPLITUDE_THRESHOLD)
}

pub fn validate_cpr_conditions_with(
    pump: &PulseSpec,
    stokes: &PulseSpec,
    amplitude_threshold: f64,
) -> ConditionReport {
    let bandwidth_margin = pump.detuning_ns_inv - 1.0 / pump.tau_ns;
    let ordering_margin = stokes.detuning_ns_inv - pump.detuning_ns_inv;
    let peak = pump.omega0_ns_inv.max(stokes.omega0_ns_inv);
    let amplitude_rel_diff = if peak > 0.0 {
        (pump.omega0_ns_inv - stokes.omega0_ns_inv).abs() / peak
    } else {
        0.0
    };
    let bandwidth_ok = bandwidth_margin > 0.0;
    let ordering_ok = ordering_margin > 0.0;
    let amplitude_ok = amplitude_rel_diff <= amplitude_threshold;
    ConditionReport {
        bandwidth_ok,
        bandwidth_margin_ns_inv: bandwidth_margin,
        ordering_ok,
        ordering_margin_ns_inv: ordering_margin,
        amplitude_ok,
        amplitude_rel_diff,
        amplitude_threshold,
        pass: bandwidth_ok && ordering_ok && amplitude_ok,
    }
}
