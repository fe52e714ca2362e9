//! Density scans, the inverse-density saturation-distance law, and the
//! pair-emission photon-energy thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::DensityMatrix;
use crate::domain::{LevelScheme, MediumSpec, PulseSpec, SimGrid, TimeGrid};
use crate::error::{Error, Result};
use crate::propagation::{
    run_propagation, saturation_distance, scaled_dz_um, PropagationOptions, RunDiagnostics,
};
use crate::trigger::{trigger_profile, TriggerSpec};

/// One scan point: density, saturation distance, peak generated intensity
/// max_{z,t} |Omega_g|^2 (zero when no trigger is configured).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub density_per_um3: f64,
    pub saturation_um: f64,
    pub peak_generated_intensity: f64,
}

/// Fit of d = C / N with the log-log slope pinned at -1, plus a free-slope
/// diagnostic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseLawFit {
    /// C in units of um * um^-3.
    pub constant: f64,
    pub max_rel_residual: f64,
    pub free_slope: f64,
    pub free_intercept_constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
    pub fit: InverseLawFit,
    pub saturation_threshold: f64,
    #[serde(skip)]
    pub diagnostics: RunDiagnostics,
}

/// Everything a scan point needs besides the density.
#[derive(Debug, Clone)]
pub struct ScanPreset {
    pub pump: PulseSpec,
    pub stokes: PulseSpec,
    pub trigger: Option<TriggerSpec>,
    pub scheme: LevelScheme,
    pub time: TimeGrid,
    /// Medium length at the reference density; rescaled as 1/N.
    pub reference_length_um: f64,
    pub reference_density_per_um3: f64,
    pub z_stride: usize,
    pub initial: DensityMatrix,
    pub saturation_threshold: f64,
}

/// Runs the full pipeline per density, with the z step and target length
/// rescaled as 1/N so every point resolves its own saturation length equally.
pub fn density_scan(preset: &ScanPreset, densities: &[f64]) -> Result<ScanResult> {
    if densities.len() < 3 {
        return Err(Error::invalid("density_scan", "need at least 3 densities"));
    }
    if densities.windows(2).any(|w| !(w[0] > 0.0) || w[1] <= w[0]) {
        return Err(Error::invalid(
            "density_scan",
            "densities must be strictly positive and strictly increasing",
        ));
    }
    let points: Vec<Result<(ScanEntry, RunDiagnostics)>> = densities
        .par_iter()
        .map(|&density| {
            scan_point(preset, density).map_err(|e| Error::ScanPoint {
                density,
                source: Box::new(e),
            })
        })
        .collect();
    let mut entries = Vec::with_capacity(densities.len());
    let mut diagnostics = RunDiagnostics::default();
    for p in points {
        let (entry, diag) = p?;
        diagnostics.conservation.merge(&diag.conservation);
        diagnostics.max_energy_gain = diagnostics.max_energy_gain.max(diag.max_energy_gain);
        entries.push(entry);
    }
    let fit = fit_inverse_law(&entries)?;
    Ok(ScanResult {
        entries,
        fit,
        saturation_threshold: preset.saturation_threshold,
        diagnostics,
    })
}

fn scan_point(preset: &ScanPreset, density: f64) -> Result<(ScanEntry, RunDiagnostics)> {
    let scale = preset.reference_density_per_um3 / density;
    let medium = MediumSpec::new(density, preset.reference_length_um * scale)?;
    let grid = SimGrid::for_medium(preset.time, scaled_dz_um(density), &medium)?;
    let opts = PropagationOptions {
        z_stride: preset.z_stride,
        store_fields: false,
    };
    let out = run_propagation(
        &preset.pump,
        &preset.stokes,
        &preset.scheme,
        &medium,
        &grid,
        &preset.initial,
        &opts,
    )?;
    let saturation = saturation_distance(&out.coherence, preset.saturation_threshold);
    let peak_generated = match &preset.trigger {
        Some(trig) => {
            trigger_profile(&out.coherence, trig, &preset.scheme, &medium, &grid)?
                .peak_generated_intensity
        }
        None => 0.0,
    };
    Ok((
        ScanEntry {
            density_per_um3: density,
            saturation_um: saturation,
            peak_generated_intensity: peak_generated,
        },
        out.diagnostics,
    ))
}

/// Least-squares fit of d = C/N in log-log space with the slope pinned at -1:
/// ln C is the mean of ln(d_i N_i). Also reports an unconstrained-slope fit
/// so deviations from the 1/N form are visible.
pub fn fit_inverse_law(entries: &[ScanEntry]) -> Result<InverseLawFit> {
    if entries.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 entries, got {}",
            entries.len()
        )));
    }
    for e in entries {
        if !(e.saturation_um > 0.0) || !(e.density_per_um3 > 0.0) {
            return Err(Error::DegenerateFit(format!(
                "non-positive point (N = {}, d = {})",
                e.density_per_um3, e.saturation_um
            )));
        }
    }
    let n = entries.len() as f64;
    let ln_c = entries
        .iter()
        .map(|e| (e.saturation_um * e.density_per_um3).ln())
        .sum::<f64>()
        / n;
    let constant = ln_c.exp();
    let max_rel_residual = entries
        .iter()
        .map(|e| {
            let model = constant / e.density_per_um3;
            ((e.saturation_um - model) / model).abs()
        })
        .fold(0.0, f64::max);

    // unconstrained ordinary least squares on (ln N, ln d)
    let xs: Vec<f64> = entries.iter().map(|e| e.density_per_um3.ln()).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.saturation_um.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all densities identical".into()));
    }
    let free_slope = sxy / sxx;
    let free_intercept_constant = (y_mean - free_slope * x_mean).exp();

    Ok(InverseLawFit {
        constant,
        max_rel_residual,
        free_slope,
        free_intercept_constant,
    })
}

/// Energy gap and neutrino mass values for the threshold calculator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub e31_ev: f64,
    pub masses_ev: Vec<f64>,
}

impl ThresholdQuery {
    pub fn new(e31_ev: f64, masses_ev: Vec<f64>) -> Result<Self> {
        if !(e31_ev > 0.0) {
            return Err(Error::invalid(
                "ThresholdQuery",
                format!("E31 must be positive, got {e31_ev} eV"),
            ));
        }
        if masses_ev.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::invalid(
                "ThresholdQuery",
                "masses must be finite and >= 0",
            ));
        }
        Ok(Self { e31_ev, masses_ev })
    }
}

/// Photon energy at the (i, j) pair-emission threshold:
/// E31/2 - (m_i + m_j)^2 / (2 E31). Errors when the pair mass exceeds E31.
pub fn renp_photon_energy(q: &ThresholdQuery, i: usize, j: usize) -> Result<f64> {
    let mass_sum = q.masses_ev[i] + q.masses_ev[j];
    if mass_sum * mass_sum > q.e31_ev * q.e31_ev {
        return Err(Error::KinematicallyForbidden {
            mass_sum,
            e31: q.e31_ev,
        });
    }
    Ok(q.e31_ev / 2.0 - mass_sum * mass_sum / (2.0 * q.e31_ev))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub i: usize,
    pub j: usize,
    pub mass_sum_ev: f64,
    pub photon_energy_ev: f64,
}

/// All unordered (i, j) thresholds, sorted by decreasing pair mass (so the
/// photon energies come out ascending). Kinematically closed pairs error.
pub fn threshold_table(q: &ThresholdQuery) -> Result<Vec<ThresholdEntry>> {
    let n = q.masses_ev.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            out.push(ThresholdEntry {
                i,
                j,
                mass_sum_ev: q.masses_ev[i] + q.masses_ev[j],
                photon_energy_ev: renp_photon_energy(q, i, j)?,
            });
        }
    }
    out.sort_by(|a, b| b.mass_sum_ev.partial_cmp(&a.mass_sum_ev).unwrap());
    Ok(out)
}
