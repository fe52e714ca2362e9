//! Two-dimensional sweep over the transverse Gaussian beam profile: each
//! radial sample runs an independent one-dimensional pipeline with its Rabi
//! amplitudes scaled by the local beam factor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::DensityMatrix;
use crate::domain::{LevelScheme, MediumSpec, PulseSpec, SimGrid};
use crate::error::{Error, Result};
use crate::propagation::{run_propagation, PropagationOptions, RunDiagnostics};
use crate::trigger::{generated_fluence_profile, TriggerSpec};
use crate::units::EV_TO_J;

pub const DEFAULT_RADIAL_SAMPLES: usize = 41;
pub const DEFAULT_R_MAX_FACTOR: f64 = 1.5;

/// Dimensionless amplitude factor of the beam at radius `r_mm` for a profile
/// of the given FWHM: exp(-4 ln2 r^2 / fwhm^2).
pub fn beam_scale(r_mm: f64, fwhm_mm: f64) -> f64 {
    let x = r_mm / fwhm_mm;
    (-4.0 * std::f64::consts::LN_2 * x * x).exp()
}

/// Whether the stated Gaussian describes the Rabi amplitude directly or the
/// intensity (amplitude = sqrt of the profile).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSemantics {
    Amplitude,
    Intensity,
}

impl ProfileSemantics {
    pub fn amplitude_factor(&self, r_mm: f64, fwhm_mm: f64) -> f64 {
        match self {
            ProfileSemantics::Amplitude => beam_scale(r_mm, fwhm_mm),
            ProfileSemantics::Intensity => beam_scale(r_mm, fwhm_mm).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseSample {
    pub r_mm: f64,
    /// Annular quadrature weight, mm^2.
    pub weight_mm2: f64,
}

/// Radial sampling of the beam cross-section with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    pub fwhm_mm: f64,
    pub profile: ProfileSemantics,
    pub samples: Vec<TransverseSample>,
}

impl TransverseGrid {
    /// Uniform radial samples on [0, r_max_factor * fwhm] with trapezoidal
    /// annular weights 2 pi r dr.
    pub fn radial(
        fwhm_mm: f64,
        n: usize,
        r_max_factor: f64,
        profile: ProfileSemantics,
    ) -> Result<Self> {
        if !(fwhm_mm > 0.0) {
            return Err(Error::invalid(
                "TransverseGrid",
                format!("need fwhm > 0, got {fwhm_mm} mm"),
            ));
        }
        if n < 2 {
            return Err(Error::invalid(
                "TransverseGrid",
                "need at least 2 radial samples",
            ));
        }
        let r_max = r_max_factor * fwhm_mm;
        let dr = r_max / (n - 1) as f64;
        let samples = (0..n)
            .map(|i| {
                let r = i as f64 * dr;
                let edge = i == 0 || i == n - 1;
                let w = 2.0 * std::f64::consts::PI * r * dr * if edge { 0.5 } else { 1.0 };
                TransverseSample {
                    r_mm: r,
                    weight_mm2: w,
                }
            })
            .collect();
        let grid = Self {
            fwhm_mm,
            profile,
            samples,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn r_max_mm(&self) -> f64 {
        self.samples.iter().map(|s| s.r_mm).fold(0.0, f64::max)
    }

    /// Weights must be non-negative and integrate the beam cross-section:
    /// trapezoidal annular weights reproduce pi r_max^2 exactly.
    pub fn validate(&self) -> Result<()> {
        if self.samples.iter().any(|s| s.weight_mm2 < 0.0) {
            return Err(Error::invalid(
                "TransverseGrid",
                "negative quadrature weight",
            ));
        }
        let total: f64 = self.samples.iter().map(|s| s.weight_mm2).sum();
        let area = std::f64::consts::PI * self.r_max_mm().powi(2);
        if area > 0.0 && ((total - area) / area).abs() > 1e-6 {
            return Err(Error::invalid(
                "TransverseGrid",
                format!("weights sum to {total} mm^2, beam integration area is {area} mm^2"),
            ));
        }
        Ok(())
    }
}

/// Per-sample reductions over the (r, z) plane.
#[derive(Debug, Clone)]
pub struct TransverseResult {
    pub r_mm: Vec<f64>,
    pub weights_mm2: Vec<f64>,
    pub beam_factors: Vec<f64>,
    pub z_um: Vec<f64>,
    /// max_t |rho13(z, t; r)| indexed [sample][z].
    pub peak_coherence: Vec<Vec<f64>>,
    /// Generated-field fluence J/m^2, indexed [sample][z]; present when a
    /// trigger is configured.
    pub fluence_j_m2: Option<Vec<Vec<f64>>>,
    pub diagnostics: RunDiagnostics,
}

impl TransverseResult {
    /// Trigger photons per shot integrated over the beam profile, evaluated
    /// at the stored plane where the weighted total peaks. Returns the count
    /// and that plane's index.
    pub fn total_photons(&self, photon_energy_ev: f64) -> Option<(f64, usize)> {
        let fluence = self.fluence_j_m2.as_ref()?;
        let photon_j = photon_energy_ev * EV_TO_J;
        let mut best = (0.0f64, 0usize);
        for (zi, _) in self.z_um.iter().enumerate() {
            let total: f64 = self
                .weights_mm2
                .iter()
                .zip(fluence)
                .map(|(w, per_z)| w * 1e-6 * per_z[zi])
                .sum();
            let photons = total / photon_j;
            if photons > best.0 {
                best = (photons, zi);
            }
        }
        Some(best)
    }
}

/// Regrids a radial profile onto a square (x, y) raster (axisymmetric
/// problem): `n` points per axis over [-r_max, r_max], linear interpolation
/// in radius, zero outside the sampled disc. Rows are (x_mm, y_mm, value).
pub fn radial_to_xy_raster(r_mm: &[f64], values: &[f64], n: usize) -> Vec<(f64, f64, f64)> {
    assert_eq!(r_mm.len(), values.len());
    let r_max = r_mm.iter().cloned().fold(0.0, f64::max);
    let lookup = |r: f64| -> f64 {
        if r > r_max {
            return 0.0;
        }
        let hi = match r_mm.partition_point(|&probe| probe < r) {
            0 => return values[0],
            i if i >= r_mm.len() => return *values.last().unwrap(),
            i => i,
        };
        let lo = hi - 1;
        let w = (r - r_mm[lo]) / (r_mm[hi] - r_mm[lo]);
        values[lo] * (1.0 - w) + values[hi] * w
    };
    let mut rows = Vec::with_capacity(n * n);
    for yi in 0..n {
        let y = -r_max + 2.0 * r_max * yi as f64 / (n - 1) as f64;
        for xi in 0..n {
            let x = -r_max + 2.0 * r_max * xi as f64 / (n - 1) as f64;
            rows.push((x, y, lookup((x * x + y * y).sqrt())));
        }
    }
    rows
}

type SampleReduction = (Vec<f64>, Option<Vec<f64>>, RunDiagnostics);

/// Runs the 1D pipeline once per radial sample, in parallel, and assembles
/// the (r, z) maps in sample order.
#[allow(clippy::too_many_arguments)]
pub fn run_transverse(
    pump: &PulseSpec,
    stokes: &PulseSpec,
    trig: Option<&TriggerSpec>,
    scheme: &LevelScheme,
    medium: &MediumSpec,
    grid: &SimGrid,
    tgrid: &TransverseGrid,
    initial: &DensityMatrix,
    opts: &PropagationOptions,
) -> Result<TransverseResult> {
    tgrid.validate()?;
    let inner_opts = PropagationOptions {
        store_fields: false,
        ..*opts
    };
    let per_sample: Vec<Result<SampleReduction>> = tgrid
        .samples
        .par_iter()
        .enumerate()
        .map(|(index, sample)| {
            let factor = tgrid.profile.amplitude_factor(sample.r_mm, tgrid.fwhm_mm);
            let tag = |e: Error| Error::Sample {
                index,
                r_mm: sample.r_mm,
                source: Box::new(e),
            };
            let out = run_propagation(
                &pump.scaled(factor),
                &stokes.scaled(factor),
                scheme,
                medium,
                grid,
                initial,
                &inner_opts,
            )
            .map_err(tag)?;
            let peaks = out.coherence.peak_coherence_per_z();
            let fluence = match trig {
                Some(t) => Some(
                    generated_fluence_profile(
                        &out.coherence,
                        &t.scaled(factor),
                        scheme,
                        medium,
                        grid,
                    )
                    .map_err(|e| Error::Sample {
                        index,
                        r_mm: sample.r_mm,
                        source: Box::new(e),
                    })?,
                ),
                None => None,
            };
            Ok((peaks, fluence, out.diagnostics))
        })
        .collect();

    let mut peak_coherence = Vec::with_capacity(tgrid.samples.len());
    let mut fluences = Vec::with_capacity(tgrid.samples.len());
    let mut diagnostics = RunDiagnostics::default();
    for res in per_sample {
        let (peaks, fluence, diag) = res?;
        diagnostics.conservation.merge(&diag.conservation);
        diagnostics.max_energy_gain = diagnostics.max_energy_gain.max(diag.max_energy_gain);
        diagnostics.max_coherence_overshoot = diagnostics
            .max_coherence_overshoot
            .max(diag.max_coherence_overshoot);
        peak_coherence.push(peaks);
        if let Some(f) = fluence {
            fluences.push(f);
        }
    }
    let stride = opts.z_stride.max(1);
    let z_um: Vec<f64> = (0..=grid.n_z)
        .filter(|k| k % stride == 0 || *k == grid.n_z)
        .map(|k| k as f64 * grid.dz_um)
        .collect();
    let fluence_j_m2 = if trig.is_some() { Some(fluences) } else { None };
    Ok(TransverseResult {
        r_mm: tgrid.samples.iter().map(|s| s.r_mm).collect(),
        weights_mm2: tgrid.samples.iter().map(|s| s.weight_mm2).collect(),
        beam_factors: tgrid
            .samples
            .iter()
            .map(|s| tgrid.profile.amplitude_factor(s.r_mm, tgrid.fwhm_mm))
            .collect(),
        z_um,
        peak_coherence,
        fluence_j_m2,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TimeGrid;
    use proptest::prelude::*;

    #[test]
    fn beam_scale_reference_points() {
        assert_eq!(beam_scale(0.0, 10.0), 1.0);
        assert!((beam_scale(5.0, 10.0) - 0.5).abs() < 1e-12);
        assert!((beam_scale(10.0, 10.0) - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn intensity_semantics_takes_sqrt() {
        let amp = ProfileSemantics::Intensity.amplitude_factor(5.0, 10.0);
        assert!((amp - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn radial_weights_integrate_the_disc() {
        let grid = TransverseGrid::radial(10.0, 41, 1.5, ProfileSemantics::Amplitude).unwrap();
        let total: f64 = grid.samples.iter().map(|s| s.weight_mm2).sum();
        let area = std::f64::consts::PI * 15.0 * 15.0;
        assert!(((total - area) / area).abs() < 1e-12);
        assert_eq!(grid.samples.len(), 41);
        assert_eq!(grid.samples[0].r_mm, 0.0);
    }

    #[test]
    fn single_axis_sample_matches_1d_pipeline() {
        let scheme = LevelScheme::new(0.0, 2.2393, 1.4128, 8.0, 2.0, None, None).unwrap();
        let time = TimeGrid::new(-20.0, 20.0, 401).unwrap();
        let medium = MediumSpec::new(1e6, 1e-4).unwrap();
        let grid = SimGrid::for_medium(time, 1e-5, &medium).unwrap();
        let pump = PulseSpec::new(10.0, 7.0, 0.0, 2.0).unwrap();
        let stokes = PulseSpec::new(10.0, 7.0, 0.0, 4.0).unwrap();
        let initial = DensityMatrix::ground_state();
        let opts = PropagationOptions {
            z_stride: 2,
            store_fields: false,
        };
        let tgrid = TransverseGrid {
            fwhm_mm: 10.0,
            profile: ProfileSemantics::Amplitude,
            samples: vec![TransverseSample {
                r_mm: 0.0,
                weight_mm2: 1.0,
            }],
        };
        // weights don't integrate a disc here; bypass the quadrature check by
        // calling the per-sample path directly through run_transverse with a
        // grid that validates: a single r = 0 sample has area 0.
        let result = run_transverse(
            &pump, &stokes, None, &scheme, &medium, &grid, &tgrid, &initial, &opts,
        )
        .unwrap();
        let direct =
            run_propagation(&pump, &stokes, &scheme, &medium, &grid, &initial, &opts).unwrap();
        assert_eq!(
            result.peak_coherence[0],
            direct.coherence.peak_coherence_per_z()
        );
        assert_eq!(result.z_um, direct.coherence.z_um);
    }

    #[test]
    fn xy_raster_preserves_axis_and_symmetry() {
        let r = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 0.5, 0.25, 0.125];
        let rows = radial_to_xy_raster(&r, &v, 7);
        assert_eq!(rows.len(), 49);
        // center point carries the on-axis value
        let center = rows.iter().find(|(x, y, _)| *x == 0.0 && *y == 0.0).unwrap();
        assert_eq!(center.2, 1.0);
        // four-fold symmetry
        let at = |x: f64, y: f64| rows.iter().find(|(a, b, _)| *a == x && *b == y).unwrap().2;
        assert_eq!(at(1.0, 0.0), at(-1.0, 0.0));
        assert_eq!(at(1.0, 0.0), at(0.0, 1.0));
        // corners are outside the sampled disc
        assert_eq!(at(3.0, 3.0), 0.0);
    }

    #[test]
    fn results_independent_of_worker_count() {
        let scheme = LevelScheme::new(0.0, 2.2393, 1.4128, 8.0, 2.0, None, None).unwrap();
        let time = TimeGrid::new(-15.0, 15.0, 201).unwrap();
        let medium = MediumSpec::new(1e6, 5e-5).unwrap();
        let grid = SimGrid::for_medium(time, 1e-5, &medium).unwrap();
        let pump = PulseSpec::new(12.0, 7.0, 0.0, 2.0).unwrap();
        let stokes = PulseSpec::new(12.0, 7.0, 0.0, 4.0).unwrap();
        let initial = DensityMatrix::ground_state();
        let opts = PropagationOptions {
            z_stride: 1,
            store_fields: false,
        };
        let tgrid = TransverseGrid::radial(10.0, 5, 1.5, ProfileSemantics::Amplitude).unwrap();
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_transverse(
                        &pump, &stokes, None, &scheme, &medium, &grid, &tgrid, &initial, &opts,
                    )
                    .unwrap()
                })
        };
        let serial = run_with(1);
        let parallel = run_with(4);
        assert_eq!(serial.peak_coherence, parallel.peak_coherence);
        assert_eq!(serial.z_um, parallel.z_um);
    }

    proptest! {
        #[test]
        fn beam_scale_strictly_decreasing(
            fwhm in 1.0f64..20.0,
            r in 0.0f64..30.0,
            step in 0.01f64..5.0,
        ) {
            let near = beam_scale(r, fwhm);
            let far = beam_scale(r + step, fwhm);
            // strictly decreasing until the tail underflows
            prop_assert!(far < near || near < 1e-290);
        }
    }
}
