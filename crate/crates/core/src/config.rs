//! Run configuration: a single JSON document with sections for the level
//! scheme, medium, pulses, grids and scans. Every physical key carries its
//! unit in the name, and unknown keys are rejected so a typo in a physics
//! parameter cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{ScanPreset, ThresholdQuery};
use crate::bloch::DensityMatrix;
use crate::domain::{LevelScheme, MediumSpec, PulseSpec, SimGrid, TimeGrid};
use crate::error::{Error, Result};
use crate::propagation::DEFAULT_Z_STRIDE;
use crate::transverse::{
    ProfileSemantics, TransverseGrid, DEFAULT_RADIAL_SAMPLES, DEFAULT_R_MAX_FACTOR,
};
use crate::trigger::{TriggerSpec, DEFAULT_DELTA_FLOOR_NS_INV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_scheme: Option<LevelSchemeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium: Option<MediumConfig>,
    pub pulses: PulsesConfig,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transverse: Option<TransverseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdsConfig>,
    /// Diagonal initial state, defaults to all population in |1>.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_populations: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSchemeConfig {
    pub e1_ev: f64,
    pub e2_ev: f64,
    pub e3_ev: f64,
    pub mu12_debye: f64,
    pub mu23_debye: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_p_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_s_nm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub density_per_um3: f64,
    pub length_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsesConfig {
    pub pump: PulseConfig,
    pub stokes: PulseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<TriggerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub omega0_ns_inv: f64,
    pub tau_ns: f64,
    #[serde(default)]
    pub t_center_ns: f64,
    pub detuning_ns_inv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerConfig {
    pub omega0_ns_inv: f64,
    pub tau_ns: f64,
    #[serde(default)]
    pub t_center_ns: f64,
    /// Defaults to half the |3>-|1> gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_energy_ev: Option<f64>,
    /// Defaults to (E2 - E1 - photon_energy)/hbar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_ns_inv: Option<f64>,
    #[serde(default = "default_delta_floor")]
    pub detuning_floor_ns_inv: f64,
    /// Beam area used by the scalar photon-yield summary, mm^2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_area_mm2: Option<f64>,
}

fn default_delta_floor() -> f64 {
    DEFAULT_DELTA_FLOOR_NS_INV
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_min_ns: f64,
    pub t_max_ns: f64,
    pub n_t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_um: Option<f64>,
    #[serde(default = "default_z_stride")]
    pub z_stride: usize,
}

fn default_z_stride() -> usize {
    DEFAULT_Z_STRIDE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransverseConfig {
    pub fwhm_mm: f64,
    #[serde(default = "default_n_radial")]
    pub n_radial: usize,
    #[serde(default = "default_r_max_factor")]
    pub r_max_factor: f64,
    #[serde(default = "default_profile")]
    pub profile: ProfileSemantics,
}

fn default_n_radial() -> usize {
    DEFAULT_RADIAL_SAMPLES
}

fn default_r_max_factor() -> f64 {
    DEFAULT_R_MAX_FACTOR
}

fn default_profile() -> ProfileSemantics {
    ProfileSemantics::Amplitude
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub densities_per_um3: Vec<f64>,
    #[serde(default = "default_saturation_threshold")]
    pub saturation_threshold: f64,
}

fn default_saturation_threshold() -> f64 {
    crate::propagation::DEFAULT_SATURATION_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    pub e31_ev: f64,
    pub masses_ev: Vec<f64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    // ---- resolved pieces -------------------------------------------------

    pub fn pump(&self) -> Result<PulseSpec> {
        let p = &self.pulses.pump;
        PulseSpec::new(p.omega0_ns_inv, p.tau_ns, p.t_center_ns, p.detuning_ns_inv)
    }

    pub fn stokes(&self) -> Result<PulseSpec> {
        let p = &self.pulses.stokes;
        PulseSpec::new(p.omega0_ns_inv, p.tau_ns, p.t_center_ns, p.detuning_ns_inv)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.t_min_ns, self.grid.t_max_ns, self.grid.n_t)
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        match self.initial_populations {
            Some(p) => DensityMatrix::from_populations(p),
            None => Ok(DensityMatrix::ground_state()),
        }
    }

    pub fn level_scheme(&self) -> Result<LevelScheme> {
        let s = self
            .level_scheme
            .as_ref()
            .ok_or_else(|| Error::config("level_scheme", "section required for this command"))?;
        LevelScheme::new(
            s.e1_ev,
            s.e2_ev,
            s.e3_ev,
            s.mu12_debye,
            s.mu23_debye,
            s.lambda_p_nm,
            s.lambda_s_nm,
        )
    }

    pub fn medium(&self) -> Result<MediumSpec> {
        let m = self
            .medium
            .as_ref()
            .ok_or_else(|| Error::config("medium", "section required for this command"))?;
        MediumSpec::new(m.density_per_um3, m.length_um)
    }

    pub fn sim_grid(&self) -> Result<SimGrid> {
        let dz = self
            .grid
            .dz_um
            .ok_or_else(|| Error::config("grid.dz_um", "key required for propagation commands"))?;
        SimGrid::for_medium(self.time_grid()?, dz, &self.medium()?)
    }

    pub fn trigger(&self) -> Result<TriggerSpec> {
        let t =
            self.pulses.trigger.as_ref().ok_or_else(|| {
                Error::config("pulses.trigger", "section required for this command")
            })?;
        TriggerSpec::resolve(
            t.omega0_ns_inv,
            t.tau_ns,
            t.t_center_ns,
            t.photon_energy_ev,
            t.detuning_ns_inv,
            t.detuning_floor_ns_inv,
            &self.level_scheme()?,
        )
    }

    pub fn trigger_optional(&self) -> Result<Option<TriggerSpec>> {
        match self.pulses.trigger {
            Some(_) => Ok(Some(self.trigger()?)),
            None => Ok(None),
        }
    }

    pub fn transverse_grid(&self) -> Result<TransverseGrid> {
        let t = self
            .transverse
            .as_ref()
            .ok_or_else(|| Error::config("transverse", "section required for this command"))?;
        TransverseGrid::radial(t.fwhm_mm, t.n_radial, t.r_max_factor, t.profile)
    }

    pub fn scan_preset(&self) -> Result<(ScanPreset, Vec<f64>)> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| Error::config("scan", "section required for this command"))?;
        let medium = self.medium()?;
        let preset = ScanPreset {
            pump: self.pump()?,
            stokes: self.stokes()?,
            trigger: self.trigger_optional()?,
            scheme: self.level_scheme()?,
            time: self.time_grid()?,
            reference_length_um: medium.length_um,
            reference_density_per_um3: medium.density_per_um3,
            z_stride: self.grid.z_stride,
            initial: self.initial_state()?,
            saturation_threshold: scan.saturation_threshold,
        };
        Ok((preset, scan.densities_per_um3.clone()))
    }

    pub fn threshold_query(&self) -> Result<ThresholdQuery> {
        let t = self
            .thresholds
            .as_ref()
            .ok_or_else(|| Error::config("thresholds", "section required for this command"))?;
        ThresholdQuery::new(t.e31_ev, t.masses_ev.clone())
    }
}

/// Directories searched for `<name>.json` preset files: the
/// `LAMBDAPROP_PRESETS` environment variable, `./presets`, then the presets
/// directory shipped next to this workspace.
pub fn preset_search_dirs() -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Ok(env_dir) = std::env::var("LAMBDAPROP_PRESETS") {
        dirs.push(PathBuf::from(env_dir));
    }
    dirs.push(PathBuf::from("presets"));
    dirs.push(PathBuf::from(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../presets"
    )));
    dirs
}

pub fn list_presets() -> Vec<String> {
    let mut names = Vec::new();
    for dir in preset_search_dirs() {
        if let Ok(entries) = std::fs::read_dir(&dir) {
            for entry in entries.flatten() {
                let path = entry.path();
                if path.extension().map(|e| e == "json").unwrap_or(false) {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        if !names.contains(&stem.to_string()) {
                            names.push(stem.to_string());
                        }
                    }
                }
            }
        }
    }
    names.sort();
    names
}

/// Loads a preset by name.
pub fn load_preset(name: &str) -> Result<Config> {
    for dir in preset_search_dirs() {
        let path = dir.join(format!("{name}.json"));
        if path.is_file() {
            return Config::from_path(&path);
        }
    }
    let available = list_presets();
    Err(Error::config(
        format!("preset `{name}`"),
        format!("not found; available presets: {}", available.join(", ")),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "pulses": {
            "pump":   { "omega0_ns_inv": 10.0, "tau_ns": 7.0, "detuning_ns_inv": 2.0 },
            "stokes": { "omega0_ns_inv": 10.0, "tau_ns": 7.0, "detuning_ns_inv": 4.0 }
        },
        "grid": { "t_min_ns": -28.0, "t_max_ns": 28.0, "n_t": 801 }
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = Config::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.pump().unwrap().omega0_ns_inv, 10.0);
        assert_eq!(cfg.time_grid().unwrap().n_t, 801);
        assert!(cfg.level_scheme().is_err());
        assert!(cfg.initial_state().is_ok());
    }

    #[test]
    fn unknown_key_is_rejected_with_its_path() {
        let text = MINIMAL.replace("\"tau_ns\": 7.0,", "\"tau_nss\": 7.0,");
        let err = Config::from_json(&text).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert!(path.contains("pulses.pump"), "path was {path}");
                assert!(message.contains("tau_nss"), "message was {message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn missing_key_is_reported() {
        let text = MINIMAL.replace("\"tau_ns\": 7.0,", "");
        let err = Config::from_json(&text).unwrap_err();
        match err {
            Error::Config { message, .. } => {
                assert!(message.contains("tau_ns"), "message was {message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_snapshot_round_trips() {
        let cfg = Config::from_json(MINIMAL).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back = Config::from_json(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn initial_populations_override() {
        let text = MINIMAL.replace(
            "\"grid\":",
            "\"initial_populations\": [0.2, 0.3, 0.5], \"grid\":",
        );
        let cfg = Config::from_json(&text).unwrap();
        let state = cfg.initial_state().unwrap();
        assert_eq!(state.population(0), 0.2);
        assert_eq!(state.population(1), 0.3);
        assert_eq!(state.population(2), 0.5);

        let bad = MINIMAL.replace(
            "\"grid\":",
            "\"initial_populations\": [0.9, 0.3, 0.5], \"grid\":",
        );
        assert!(Config::from_json(&bad).unwrap().initial_state().is_err());
    }

    #[test]
    fn shipped_presets_parse_and_resolve() {
        for name in ["fig2", "fig4", "fig5", "fig7", "fig8", "fig9", "fig10"] {
            let cfg = load_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.pump().unwrap();
            cfg.stokes().unwrap();
            cfg.time_grid().unwrap();
            if name != "fig2" {
                cfg.level_scheme().unwrap();
                cfg.medium().unwrap();
                cfg.sim_grid().unwrap();
            }
            if ["fig7", "fig8", "fig10"].contains(&name) {
                cfg.trigger().unwrap();
            }
            if ["fig9", "fig10"].contains(&name) {
                cfg.transverse_grid().unwrap();
            }
            if name == "fig8" {
                cfg.scan_preset().unwrap();
            }
        }
    }
}
