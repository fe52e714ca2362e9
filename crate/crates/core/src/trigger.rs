//! Externally triggered two-photon emission over a prepared coherence map:
//! the weak trigger and generated envelopes obey a 2x2 linear system in z for
//! every time column, with no back-action on the medium.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{LevelScheme, MediumSpec, SimGrid};
use crate::error::{Error, Result};
use crate::propagation::CoherenceMap;
use crate::units::{PhysicalConstants, EV_TO_J, EV_TO_RAD_PER_NS, PER_M_TO_PER_UM};

/// Relative tolerance on the photon-flux (Manley-Rowe) invariant.
pub const MANLEY_ROWE_TOL: f64 = 1e-6;
/// Default floor on |delta|, ns^-1: the trigger must stay far detuned from
/// the one-photon resonance (pulse bandwidths here are well below 1 ns^-1).
pub const DEFAULT_DELTA_FLOOR_NS_INV: f64 = 1e2;

/// Trigger pulse: Gaussian envelope, photon energy (defaults to half the
/// |3>-|1> gap) and the detuning from the intermediate state |2>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub omega0_ns_inv: f64,
    pub tau_ns: f64,
    pub t_center_ns: f64,
    pub photon_energy_ev: f64,
    pub delta_ns_inv: f64,
}

impl TriggerSpec {
    /// Builds the spec against a level scheme. `photon_energy_ev` defaults to
    /// E31/2; `delta_ns_inv` defaults to (E2 - E1 - photon_energy)/hbar.
    pub fn resolve(
        omega0_ns_inv: f64,
        tau_ns: f64,
        t_center_ns: f64,
        photon_energy_ev: Option<f64>,
        delta_ns_inv: Option<f64>,
        delta_floor_ns_inv: f64,
        scheme: &LevelScheme,
    ) -> Result<Self> {
        if !(omega0_ns_inv >= 0.0) || !(tau_ns > 0.0) {
            return Err(Error::invalid(
                "TriggerSpec",
                format!("need omega0 >= 0 and tau > 0, got ({omega0_ns_inv}, {tau_ns})"),
            ));
        }
        let photon_energy_ev = photon_energy_ev.unwrap_or(scheme.e31_ev() / 2.0);
        if !(photon_energy_ev > 0.0) {
            return Err(Error::invalid(
                "TriggerSpec",
                format!("photon energy must be positive, got {photon_energy_ev} eV"),
            ));
        }
        let delta_ns_inv = delta_ns_inv
            .unwrap_or((scheme.e2_ev - scheme.e1_ev - photon_energy_ev) * EV_TO_RAD_PER_NS);
        let spec = Self {
            omega0_ns_inv,
            tau_ns,
            t_center_ns,
            photon_energy_ev,
            delta_ns_inv,
        };
        spec.check_far_detuned(delta_floor_ns_inv)?;
        Ok(spec)
    }

    pub fn check_far_detuned(&self, floor_ns_inv: f64) -> Result<()> {
        if self.delta_ns_inv.abs() < floor_ns_inv {
            return Err(Error::FarDetuning {
                delta_abs: self.delta_ns_inv.abs(),
                floor: floor_ns_inv,
            });
        }
        Ok(())
    }

    pub fn envelope(&self, t_ns: f64) -> f64 {
        let x = (t_ns - self.t_center_ns) / self.tau_ns;
        self.omega0_ns_inv * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
    }

    pub fn scaled(&self, factor: f64) -> TriggerSpec {
        TriggerSpec {
            omega0_ns_inv: self.omega0_ns_inv * factor,
            ..*self
        }
    }

    /// Wavenumber of the trigger/generated photons, um^-1 (degenerate case).
    pub fn k_um_inv(&self) -> f64 {
        crate::units::ev_to_k_um_inv(self.photon_energy_ev)
    }
}

/// Parametric coupling constants xi_t = k_t N mu23^2 / (2 eps0 hbar Delta)
/// and xi_g = k_g N mu12^2 / (2 eps0 hbar Delta), in um^-1. Their signs
/// follow the sign of Delta.
pub fn coupling_constants(
    scheme: &LevelScheme,
    medium: &MediumSpec,
    trig: &TriggerSpec,
    constants: &PhysicalConstants,
) -> (f64, f64) {
    let n_si = medium.density_per_um3 * 1e18;
    let delta_si = trig.delta_ns_inv * 1e9;
    let k_si = trig.k_um_inv() * 1e6;
    let xi = |mu_debye: f64| {
        let mu = constants.debye(mu_debye);
        k_si * n_si * mu * mu / (2.0 * constants.epsilon0_si * constants.hbar_j_s * delta_si)
            * PER_M_TO_PER_UM
    };
    (xi(scheme.mu23_debye), xi(scheme.mu12_debye))
}

/// Trigger and generated envelopes on the stored (z, t) grid.
#[derive(Debug, Clone)]
pub struct GeneratedFieldMap {
    pub z_um: Vec<f64>,
    pub t_ns: Vec<f64>,
    pub omega_t: Vec<Vec<C64>>,
    pub omega_g: Vec<Vec<C64>>,
    pub xi_t_um_inv: f64,
    pub xi_g_um_inv: f64,
}

impl GeneratedFieldMap {
    /// Worst relative drift of xi_g |Omega_t|^2 + xi_t |Omega_g|^2 along z,
    /// per time column, against its z = 0 value.
    pub fn manley_rowe_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let n_t = self.t_ns.len();
        for ti in 0..n_t {
            let reference = self.xi_g_um_inv * self.omega_t[0][ti].norm_sqr()
                + self.xi_t_um_inv * self.omega_g[0][ti].norm_sqr();
            if reference.abs() < 1e-300 {
                continue;
            }
            for zi in 1..self.z_um.len() {
                let value = self.xi_g_um_inv * self.omega_t[zi][ti].norm_sqr()
                    + self.xi_t_um_inv * self.omega_g[zi][ti].norm_sqr();
                worst = worst.max(((value - reference) / reference).abs());
            }
        }
        worst
    }

    /// |Omega_g|^2 maximized over the stored (z, t) grid.
    pub fn peak_generated_intensity(&self) -> f64 {
        self.omega_g
            .iter()
            .flatten()
            .map(|v| v.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// |Omega_g| maximized over t, for every stored z.
    pub fn peak_generated_per_z(&self) -> Vec<f64> {
        self.omega_g
            .iter()
            .map(|row| row.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .collect()
    }
}

/// Linear interpolation of the stored coherence onto an arbitrary z. The z
/// march is monotone, so a per-column cursor replaces repeated searches.
struct ZInterp<'a> {
    z: &'a [f64],
    rows: &'a [Vec<C64>],
}

impl<'a> ZInterp<'a> {
    fn column(&self, ti: usize, z: f64, cursor: &mut usize) -> C64 {
        let n = self.z.len();
        if z <= self.z[0] {
            return self.rows[0][ti];
        }
        if z >= self.z[n - 1] {
            return self.rows[n - 1][ti];
        }
        while *cursor + 1 < n && z > self.z[*cursor + 1] {
            *cursor += 1;
        }
        while *cursor > 0 && z < self.z[*cursor] {
            *cursor -= 1;
        }
        let lo = *cursor;
        let hi = lo + 1;
        let w = (z - self.z[lo]) / (self.z[hi] - self.z[lo]);
        self.rows[lo][ti] * (1.0 - w) + self.rows[hi][ti] * w
    }
}

/// Observer variant of the column solve: for every time column, RK4 marches
/// (Omega_t, Omega_g) over the full z grid and reports the pair at each
/// stored plane.
fn solve_columns<R: Send>(
    map: &CoherenceMap,
    trig: &TriggerSpec,
    xi_t: f64,
    xi_g: f64,
    grid: &SimGrid,
    per_column: impl Fn(usize, &[(C64, C64)]) -> R + Sync,
) -> Result<Vec<R>> {
    let n_t = map.t_ns.len();
    let dz = grid.dz_um;
    let interp = ZInterp {
        z: &map.z_um,
        rows: &map.rho13,
    };
    let stored: Vec<f64> = map.z_um.clone();
    let results: Vec<Result<R>> = (0..n_t)
        .into_par_iter()
        .map(|ti| {
            let mut omega_t = C64::new(trig.envelope(map.t_ns[ti]), 0.0);
            let mut omega_g = C64::new(0.0, 0.0);
            let mut out = Vec::with_capacity(stored.len());
            let mut next_store = 0usize;
            let mut cursor = 0usize;
            let mut rhs = |z: f64, ot: C64, og: C64| {
                let r13 = interp.column(ti, z, &mut cursor);
                let r31 = r13.conj();
                (
                    C64::new(0.0, -xi_t) * r31 * og,
                    C64::new(0.0, -xi_g) * r13 * ot,
                )
            };
            for k in 0..=grid.n_z {
                let z = k as f64 * dz;
                if next_store < stored.len() && (z - stored[next_store]).abs() <= 0.5 * dz {
                    out.push((omega_t, omega_g));
                    next_store += 1;
                }
                if k == grid.n_z {
                    break;
                }
                let zm = z + 0.5 * dz;
                let z1 = z + dz;
                let (kt1, kg1) = rhs(z, omega_t, omega_g);
                let (kt2, kg2) = rhs(
                    zm,
                    omega_t + kt1.scale(0.5 * dz),
                    omega_g + kg1.scale(0.5 * dz),
                );
                let (kt3, kg3) = rhs(
                    zm,
                    omega_t + kt2.scale(0.5 * dz),
                    omega_g + kg2.scale(0.5 * dz),
                );
                let (kt4, kg4) = rhs(z1, omega_t + kt3.scale(dz), omega_g + kg3.scale(dz));
                omega_t += (kt1 + (kt2 + kt3).scale(2.0) + kt4).scale(dz / 6.0);
                omega_g += (kg1 + (kg2 + kg3).scale(2.0) + kg4).scale(dz / 6.0);
                if !omega_t.re.is_finite()
                    || !omega_t.im.is_finite()
                    || !omega_g.re.is_finite()
                    || !omega_g.im.is_finite()
                {
                    return Err(Error::NonFinite {
                        quantity: "trigger/generated envelope",
                        z_index: k + 1,
                        t_index: ti,
                    });
                }
            }
            debug_assert_eq!(out.len(), stored.len());
            Ok(per_column(ti, &out))
        })
        .collect();
    results.into_iter().collect()
}

/// Integrates the coupled trigger/generated system over the prepared
/// coherence map and returns both envelopes on the stored grid.
pub fn solve_trigger(
    map: &CoherenceMap,
    trig: &TriggerSpec,
    scheme: &LevelScheme,
    medium: &MediumSpec,
    grid: &SimGrid,
) -> Result<GeneratedFieldMap> {
    let constants = PhysicalConstants::default();
    let (xi_t, xi_g) = coupling_constants(scheme, medium, trig, &constants);
    let columns = solve_columns(map, trig, xi_t, xi_g, grid, |_, col| col.to_vec())?;
    let n_z = map.z_um.len();
    let n_t = map.t_ns.len();
    let mut omega_t = vec![vec![C64::new(0.0, 0.0); n_t]; n_z];
    let mut omega_g = vec![vec![C64::new(0.0, 0.0); n_t]; n_z];
    for (ti, col) in columns.iter().enumerate() {
        for (zi, (ot, og)) in col.iter().enumerate() {
            omega_t[zi][ti] = *ot;
            omega_g[zi][ti] = *og;
        }
    }
    Ok(GeneratedFieldMap {
        z_um: map.z_um.clone(),
        t_ns: map.t_ns.clone(),
        omega_t,
        omega_g,
        xi_t_um_inv: xi_t,
        xi_g_um_inv: xi_g,
    })
}

/// Per-z reductions of a trigger solve, computed without keeping the full
/// envelope maps in memory.
#[derive(Debug, Clone)]
pub struct TriggerProfile {
    pub z_um: Vec<f64>,
    /// Generated-field fluence per stored z plane, J/m^2.
    pub fluence_j_m2: Vec<f64>,
    /// max_t |Omega_g| per stored z plane, ns^-1.
    pub peak_generated_per_z: Vec<f64>,
    /// max_{z,t} |Omega_g|^2, (ns^-1)^2.
    pub peak_generated_intensity: f64,
    /// Worst relative drift of the photon-flux invariant.
    pub manley_rowe_residual: f64,
}

/// Streams the column solves into per-z fluence and peak profiles plus the
/// Manley-Rowe residual.
pub fn trigger_profile(
    map: &CoherenceMap,
    trig: &TriggerSpec,
    scheme: &LevelScheme,
    medium: &MediumSpec,
    grid: &SimGrid,
) -> Result<TriggerProfile> {
    let constants = PhysicalConstants::default();
    let (xi_t, xi_g) = coupling_constants(scheme, medium, trig, &constants);
    let dt = grid.time.dt_ns();
    let columns = solve_columns(map, trig, xi_t, xi_g, grid, |_, col| {
        let reference = xi_g * col[0].0.norm_sqr() + xi_t * col[0].1.norm_sqr();
        let mut residual = 0.0f64;
        let mut gen_sq = Vec::with_capacity(col.len());
        for (ot, og) in col {
            if reference.abs() > 1e-300 {
                let value = xi_g * ot.norm_sqr() + xi_t * og.norm_sqr();
                residual = residual.max(((value - reference) / reference).abs());
            }
            gen_sq.push(og.norm_sqr());
        }
        (gen_sq, residual)
    })?;
    let n_z = map.z_um.len();
    let mut fluence_sums = vec![0.0f64; n_z];
    let mut peak_sq = vec![0.0f64; n_z];
    let mut residual = 0.0f64;
    for (gen_sq, col_residual) in &columns {
        residual = residual.max(*col_residual);
        for (zi, v) in gen_sq.iter().enumerate() {
            fluence_sums[zi] += v;
            peak_sq[zi] = peak_sq[zi].max(*v);
        }
    }
    let scale = fluence_scale(scheme, &constants) * dt;
    Ok(TriggerProfile {
        z_um: map.z_um.clone(),
        fluence_j_m2: fluence_sums.into_iter().map(|s| s * scale).collect(),
        peak_generated_intensity: peak_sq.iter().cloned().fold(0.0, f64::max),
        peak_generated_per_z: peak_sq.into_iter().map(f64::sqrt).collect(),
        manley_rowe_residual: residual,
    })
}

/// Fluence of the generated field, J/m^2 per stored z plane (used by the
/// transverse sweep).
pub fn generated_fluence_profile(
    map: &CoherenceMap,
    trig: &TriggerSpec,
    scheme: &LevelScheme,
    medium: &MediumSpec,
    grid: &SimGrid,
) -> Result<Vec<f64>> {
    Ok(trigger_profile(map, trig, scheme, medium, grid)?.fluence_j_m2)
}

/// J/m^2 per (ns^-1)^2 per ns of integrated |Omega_g|^2: field amplitude
/// E = hbar Omega / mu12, intensity (c eps0 / 2) |E|^2.
fn fluence_scale(scheme: &LevelScheme, constants: &PhysicalConstants) -> f64 {
    let mu = constants.debye(scheme.mu12_debye);
    let field_per_rabi = constants.hbar_j_s * 1e9 / mu; // V/m per ns^-1
    0.5 * constants.c_m_per_s * constants.epsilon0_si * field_per_rabi * field_per_rabi * 1e-9
}

/// Per-z fluence integral of an already solved map, J/m^2.
pub fn fluence_per_z(gen: &GeneratedFieldMap, scheme: &LevelScheme, dt_ns: f64) -> Vec<f64> {
    let constants = PhysicalConstants::default();
    let scale = fluence_scale(scheme, &constants) * dt_ns;
    gen.omega_g
        .iter()
        .map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>() * scale)
        .collect()
}

/// Photon count of the generated beam through `beam_area_mm2`, evaluated at
/// the stored plane where it peaks.
pub fn photon_yield(
    gen: &GeneratedFieldMap,
    scheme: &LevelScheme,
    trig: &TriggerSpec,
    beam_area_mm2: f64,
    constants: &PhysicalConstants,
) -> f64 {
    let dt = if gen.t_ns.len() > 1 {
        gen.t_ns[1] - gen.t_ns[0]
    } else {
        0.0
    };
    let scale = fluence_scale(scheme, constants) * dt;
    let photon_j = trig.photon_energy_ev * EV_TO_J;
    let area_m2 = beam_area_mm2 * 1e-6;
    gen.omega_g
        .iter()
        .map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>() * scale)
        .fold(0.0f64, f64::max)
        * area_m2
        / photon_j
}
