//! Couples the density-matrix solver to the slowly-varying-envelope equations,
//! marching pump and Stokes envelopes through the medium and recording the
//! two-photon coherence on the (z, t) grid.
//!
//! The scheme is the two-step iteration: at each z the Liouville equation is
//! integrated over the full time window with the current envelopes, then both
//! envelopes advance by one explicit first-order z step driven by Im of their
//! coherences, and the iteration restarts at z + dz.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bloch::{self, ConservationStats, DensityMatrix, SampledFields};
use crate::domain::{LevelScheme, MediumSpec, PulseSpec, SimGrid};
use crate::error::{Error, Result};
use crate::units::{PhysicalConstants, PER_M_S_TO_PER_UM_NS};

/// Default fraction of z planes persisted in the output maps.
pub const DEFAULT_Z_STRIDE: usize = 100;
/// Bookkeeping bound on the total |Omega|^2 gain relative to the entrance
/// plane for the reference presets. The first-order z advance puts an O(dz)
/// spurious gain on the reactive field-medium exchange, which stays under
/// this bound at the calibrated drive strengths but not in the weak-drive
/// wings of a beam sweep; the march itself only aborts at
/// [`ENERGY_GAIN_ABORT`], and the recorded diagnostic carries the number.
pub const ENERGY_GAIN_TOL: f64 = 1e-4;
/// Hard abort threshold for a genuinely unstable march.
pub const ENERGY_GAIN_ABORT: f64 = 1e-2;

/// Reference step of the z march at the reference density; other densities
/// scale the step to keep steps-per-saturation-length fixed.
pub const REFERENCE_DZ_UM: f64 = 1e-6;
pub const REFERENCE_DENSITY_PER_UM3: f64 = 1e7;

/// dz for a given density under the 1/N scaling rule.
pub fn scaled_dz_um(density_per_um3: f64) -> f64 {
    REFERENCE_DZ_UM * (REFERENCE_DENSITY_PER_UM3 / density_per_um3)
}

/// SVEA coupling coefficients c = N k mu^2 / (hbar eps0) for the pump and
/// Stokes transitions, in (um ns)^-1. Linear in the density.
pub fn propagation_coefficients(
    scheme: &LevelScheme,
    medium: &MediumSpec,
    constants: &PhysicalConstants,
) -> (f64, f64) {
    let n_si = medium.density_per_um3 * 1e18; // um^-3 -> m^-3
    let coeff = |k_um_inv: f64, mu_debye: f64| {
        let k_si = k_um_inv * 1e6;
        let mu = constants.debye(mu_debye);
        n_si * k_si * mu * mu / (constants.hbar_j_s * constants.epsilon0_si) * PER_M_S_TO_PER_UM_NS
    };
    (
        coeff(scheme.k_p_um_inv(), scheme.mu12_debye),
        coeff(scheme.k_s_um_inv(), scheme.mu23_debye),
    )
}

/// Complex pump/Stokes envelopes on the stored (z, t) grid.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    pub z_um: Vec<f64>,
    pub t_ns: Vec<f64>,
    /// Row per stored z plane, column per time sample.
    pub omega_p: Vec<Vec<C64>>,
    pub omega_s: Vec<Vec<C64>>,
}

/// Two-photon coherence rho_13 on the stored (z, t) grid.
#[derive(Debug, Clone)]
pub struct CoherenceMap {
    pub z_um: Vec<f64>,
    pub t_ns: Vec<f64>,
    pub rho13: Vec<Vec<C64>>,
}

impl CoherenceMap {
    /// max_t |rho_13| for every stored z plane.
    pub fn peak_coherence_per_z(&self) -> Vec<f64> {
        self.rho13
            .iter()
            .map(|row| row.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (zi, row) in self.rho13.iter().enumerate() {
            for (ti, v) in row.iter().enumerate() {
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFinite {
                        quantity: "rho13",
                        z_index: zi,
                        t_index: ti,
                    });
                }
                if v.norm() > 0.5 + 1e-9 {
                    return Err(Error::invalid(
                        "CoherenceMap",
                        format!(
                            "|rho13| = {} exceeds 1/2 at z index {zi}, t index {ti}",
                            v.norm()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Aggregated invariant checks over a whole propagation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub conservation: ConservationStats,
    /// max over z of (total field energy integral) / (z = 0 value) - 1.
    pub max_energy_gain: f64,
    /// max over stored samples of |rho13| - 1/2 overshoot (rounding scale).
    pub max_coherence_overshoot: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PropagationOptions {
    /// Persist every `z_stride`-th plane (plus the entrance and exit planes).
    pub z_stride: usize,
    /// Keep the full field history; the coherence map is always kept.
    pub store_fields: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            z_stride: DEFAULT_Z_STRIDE,
            store_fields: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationOutput {
    pub fields: Option<FieldHistory>,
    pub coherence: CoherenceMap,
    pub diagnostics: RunDiagnostics,
    /// Conservation stats of the embedded Bloch solve at each stored plane.
    pub slice_conservation: Vec<ConservationStats>,
}

/// Marches the envelopes from z = 0 through `grid.n_z` steps of `grid.dz_um`,
/// solving the Bloch stage at every plane.
pub fn run_propagation(
    pump: &PulseSpec,
    stokes: &PulseSpec,
    scheme: &LevelScheme,
    medium: &MediumSpec,
    grid: &SimGrid,
    initial: &DensityMatrix,
    opts: &PropagationOptions,
) -> Result<PropagationOutput> {
    let constants = PhysicalConstants::default();
    let (c_p, c_s) = propagation_coefficients(scheme, medium, &constants);
    let time = &grid.time;
    let n_t = time.n_t;
    let dt = time.dt_ns();
    let dz = grid.dz_um;
    let stride = opts.z_stride.max(1);

    let mut omega_p = bloch::sample_envelope(pump, time);
    let mut omega_s = bloch::sample_envelope(stokes, time);

    let stored_planes = grid.n_z / stride + 2;
    let mut z_um = Vec::with_capacity(stored_planes);
    let mut rho13_rows = Vec::with_capacity(stored_planes);
    let mut field_rows_p = Vec::new();
    let mut field_rows_s = Vec::new();
    let mut slice_conservation = Vec::with_capacity(stored_planes);

    let mut diagnostics = RunDiagnostics::default();
    let mut energy0 = 0.0;

    let mut rho12 = vec![C64::new(0.0, 0.0); n_t];
    let mut rho23 = vec![C64::new(0.0, 0.0); n_t];
    let mut rho13 = vec![C64::new(0.0, 0.0); n_t];

    for k in 0..=grid.n_z {
        let fields = SampledFields {
            omega_p: &omega_p,
            omega_s: &omega_s,
        };
        let stats = bloch::integrate_with(
            &fields,
            pump.detuning_ns_inv,
            stokes.detuning_ns_inv,
            time,
            initial,
            |i, rho| {
                rho12[i] = rho.get(0, 1);
                rho23[i] = rho.get(1, 2);
                rho13[i] = rho.get(0, 2);
            },
        );
        diagnostics.conservation.merge(&stats);

        // total |Omega|^2 integral over both pulses, relative to z = 0
        let energy: f64 = omega_p
            .iter()
            .zip(&omega_s)
            .map(|(p, s)| p.norm_sqr() + s.norm_sqr())
            .sum::<f64>()
            * dt;
        if k == 0 {
            energy0 = energy;
        } else if energy0 > 0.0 {
            diagnostics.max_energy_gain = diagnostics.max_energy_gain.max(energy / energy0 - 1.0);
        }

        if k % stride == 0 || k == grid.n_z {
            z_um.push(k as f64 * dz);
            let overshoot = rho13
                .iter()
                .map(|v| v.norm() - 0.5)
                .fold(f64::NEG_INFINITY, f64::max);
            diagnostics.max_coherence_overshoot =
                diagnostics.max_coherence_overshoot.max(overshoot.max(0.0));
            rho13_rows.push(rho13.clone());
            slice_conservation.push(stats);
            if opts.store_fields {
                field_rows_p.push(omega_p.clone());
                field_rows_s.push(omega_s.clone());
            }
        }

        if k == grid.n_z {
            break;
        }

        // explicit first-order z advance of both envelopes
        for ti in 0..n_t {
            omega_p[ti] -= C64::new(dz * c_p * rho12[ti].im, 0.0);
            omega_s[ti] -= C64::new(dz * c_s * rho23[ti].im, 0.0);
            if !omega_p[ti].re.is_finite() || !omega_p[ti].im.is_finite() {
                return Err(Error::NonFinite {
                    quantity: "pump envelope",
                    z_index: k + 1,
                    t_index: ti,
                });
            }
            if !omega_s[ti].re.is_finite() || !omega_s[ti].im.is_finite() {
                return Err(Error::NonFinite {
                    quantity: "Stokes envelope",
                    z_index: k + 1,
                    t_index: ti,
                });
            }
        }
    }

    if diagnostics.max_energy_gain > ENERGY_GAIN_ABORT {
        return Err(Error::invalid(
            "propagation energy bookkeeping",
            format!(
                "total field energy grew by {:.3e} relative to the entrance plane (limit {ENERGY_GAIN_ABORT:.1e})",
                diagnostics.max_energy_gain
            ),
        ));
    }

    let t_ns = time.times();
    let fields = opts.store_fields.then(|| FieldHistory {
        z_um: z_um.clone(),
        t_ns: t_ns.clone(),
        omega_p: field_rows_p,
        omega_s: field_rows_s,
    });
    Ok(PropagationOutput {
        fields,
        coherence: CoherenceMap {
            z_um,
            t_ns,
            rho13: rho13_rows,
        },
        diagnostics,
        slice_conservation,
    })
}

/// Default tolerance for the z-step-halving probe: the first-order march at
/// the reference step leaves a few 1e-6 relative on the first hundred planes,
/// so the probe flags step choices an order of magnitude worse than that.
pub const Z_CONVERGENCE_TOL: f64 = 1e-4;

/// Marches the first `probe_steps` z steps at dz and at dz/2 and compares the
/// envelopes on the shared planes, relative to the peak input amplitude.
/// Fails with a convergence diagnostic above `tol`.
#[allow(clippy::too_many_arguments)]
pub fn check_z_convergence(
    pump: &PulseSpec,
    stokes: &PulseSpec,
    scheme: &LevelScheme,
    medium: &MediumSpec,
    grid: &SimGrid,
    initial: &DensityMatrix,
    probe_steps: usize,
    tol: f64,
) -> Result<f64> {
    let steps = probe_steps.min(grid.n_z).max(1);
    let opts = PropagationOptions {
        z_stride: 1,
        store_fields: true,
    };
    let coarse_grid = SimGrid::new(grid.time, grid.dz_um, steps)?;
    let fine_grid = SimGrid::new(grid.time, grid.dz_um / 2.0, 2 * steps)?;
    let coarse = run_propagation(pump, stokes, scheme, medium, &coarse_grid, initial, &opts)?;
    let fine = run_propagation(pump, stokes, scheme, medium, &fine_grid, initial, &opts)?;
    let scale = pump.omega0_ns_inv.max(stokes.omega0_ns_inv).max(1e-300);
    let cf = coarse.fields.as_ref().unwrap();
    let ff = fine.fields.as_ref().unwrap();
    let mut worst = 0.0f64;
    for k in 0..=steps {
        for (a, b) in cf.omega_p[k].iter().zip(&ff.omega_p[2 * k]) {
            worst = worst.max((a - b).norm() / scale);
        }
        for (a, b) in cf.omega_s[k].iter().zip(&ff.omega_s[2 * k]) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    if worst > tol {
        return Err(Error::Convergence {
            what: "z march",
            observed: worst,
            tolerance: tol,
        });
    }
    Ok(worst)
}

/// Largest stored z at which max_t |rho_13| still reaches `threshold`;
/// zero if it never does.
pub fn saturation_distance(map: &CoherenceMap, threshold: f64) -> f64 {
    map.z_um
        .iter()
        .zip(map.peak_coherence_per_z())
        .filter(|(_, peak)| *peak >= threshold)
        .map(|(z, _)| *z)
        .fold(0.0, f64::max)
}

pub const DEFAULT_SATURATION_THRESHOLD: f64 = 0.45;
