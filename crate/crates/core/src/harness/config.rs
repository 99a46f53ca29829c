use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::io::read_json;
use crate::quantifiers::SearchOptions;
use crate::reconstruction::{Acceleration, EmOptions};
use crate::state::{Truncation, TwinBeamSpec};

/// Photocount noise grid used when none is configured: 36 points, step 0.5.
pub fn default_noise_grid() -> Vec<f64> {
    (0..36).map(|i| 0.5 * i as f64).collect()
}

/// Settings of the bootstrap error estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    /// 0 disables the bootstrap.
    pub resamples: usize,
    /// EM budget per resample; each resample starts from the point's
    /// reconstruction.
    pub em_iterations: usize,
    /// Largest tolerated fraction of failed resamples.
    pub max_failure_fraction: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 0,
            em_iterations: 50,
            max_failure_fraction: 0.2,
        }
    }
}

/// How the photon-number branch reconstructs each point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub em: EmOptions,
    pub search: SearchOptions,
    /// Photon grid bound per arm; derived from the photocount means when absent.
    pub photon_grid: Option<(usize, usize)>,
    /// Mode count for the single-mode reduction; estimated when absent.
    pub modes: Option<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            em: EmOptions {
                max_iterations: 200,
                acceleration: Acceleration::Squarem,
                ..EmOptions::default()
            },
            search: SearchOptions {
                negativity_clamp: 1e-6,
                ..SearchOptions::default()
            },
            photon_grid: None,
            modes: None,
        }
    }
}

/// The synthetic noise-sweep experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub twin_beam: TwinBeamSpec,
    pub detector_signal: DetectorModel,
    pub detector_idler: DetectorModel,
    /// Mean noise photocounts per arm, one sweep point each. Photon-level
    /// noise is this divided by the mean of the two efficiencies.
    pub noise_photocount_means: Vec<f64>,
    /// Relative noise weight of (signal, idler); (1, 1) splits it equally.
    pub noise_arm_weights: (f64, f64),
    /// Mode count of the noise actually added to the synthetic beam.
    pub source_noise_modes: f64,
    /// Noise mode count of the photocount-branch model curve.
    pub model_noise_modes_photocount: f64,
    /// Noise mode count of the photon-number-branch model curve.
    pub model_noise_modes_photon: f64,
    pub frames: u64,
    pub seed: u64,
    /// Analyze the exact photocount distribution instead of sampled frames.
    pub exact: bool,
    pub workers: usize,
    pub truncation: Truncation,
    pub analysis: AnalysisOptions,
    pub bootstrap: BootstrapConfig,
    pub output_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            twin_beam: TwinBeamSpec {
                pair_mean: 24.4,
                paired_modes: 50.0,
            },
            detector_signal: DetectorModel::calibrated_signal(),
            detector_idler: DetectorModel::calibrated_idler(),
            noise_photocount_means: default_noise_grid(),
            noise_arm_weights: (1.0, 1.0),
            source_noise_modes: 110.0,
            model_noise_modes_photocount: 110.0,
            model_noise_modes_photon: 90.0,
            frames: 10_000,
            seed: 1,
            exact: false,
            workers: 1,
            truncation: Truncation::default(),
            analysis: AnalysisOptions::default(),
            bootstrap: BootstrapConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: SweepConfig = read_json(path).map_err(|e| match e {
            Error::Parse { path, message } => Error::Config(format!("{path}: {message}")),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Err(e) = self.twin_beam.validate() {
            return bad(format!("twin beam: {e}"));
        }
        for (name, d) in [("signal", &self.detector_signal), ("idler", &self.detector_idler)] {
            if let Err(e) = d.validate() {
                return bad(format!("{name} detector: {e}"));
            }
            if !(d.efficiency > 0.0) {
                return bad(format!("{name} detector efficiency must be positive"));
            }
        }
        let grid = &self.noise_photocount_means;
        if grid.is_empty() {
            return bad("noise grid is empty".into());
        }
        if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("noise means must be finite and >= 0".into());
        }
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return bad("noise grid must be non-decreasing".into());
        }
        let (ws, wi) = self.noise_arm_weights;
        if !(ws >= 0.0 && wi >= 0.0 && ws.is_finite() && wi.is_finite()) {
            return bad("noise arm weights must be finite and >= 0".into());
        }
        for (name, k) in [
            ("source_noise_modes", self.source_noise_modes),
            ("model_noise_modes_photocount", self.model_noise_modes_photocount),
            ("model_noise_modes_photon", self.model_noise_modes_photon),
        ] {
            if !(k >= 1.0 && k.is_finite()) {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self.frames == 0 {
            return bad("frames must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if let Err(e) = self.analysis.em.validate() {
            return bad(format!("EM options: {e}"));
        }
        if !(self.analysis.search.tolerance > 0.0 && self.analysis.search.negativity_clamp >= 0.0) {
            return bad("search tolerance must be positive and clamp non-negative".into());
        }
        if self.bootstrap.resamples > 0 && self.bootstrap.resamples < 10 {
            return bad("bootstrap needs at least 10 resamples".into());
        }
        if self.bootstrap.resamples > 0 && self.exact {
            return bad("bootstrap needs sampled frames; disable exact mode".into());
        }
        Ok(())
    }

    /// η̄ = (η_s + η_i)/2, converting photocount noise to photons.
    pub fn mean_efficiency(&self) -> f64 {
        0.5 * (self.detector_signal.efficiency + self.detector_idler.efficiency)
    }

    /// Photocount-level noise mean per arm at a grid value.
    pub fn photocount_noise(&self, grid_value: f64) -> (f64, f64) {
        let (ws, wi) = self.noise_arm_weights;
        (grid_value * ws, grid_value * wi)
    }

    /// Photon-level noise mean per arm at a grid value.
    pub fn photon_noise(&self, grid_value: f64) -> (f64, f64) {
        let (cs, ci) = self.photocount_noise(grid_value);
        let eta = self.mean_efficiency();
        (cs / eta, ci / eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = SweepConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.noise_photocount_means.len(), 36);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SweepConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let mut cfg = SweepConfig::default();
        cfg.noise_photocount_means = vec![1.0, 0.5];
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let mut cfg = SweepConfig::default();
        cfg.noise_photocount_means.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = SweepConfig::default();
        cfg.frames = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::default();
        cfg.bootstrap.resamples = 5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_and_malformed_files_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\"frames\": 3, \"speed\": 1}").unwrap();
        assert_eq!(SweepConfig::load(&path).unwrap_err().exit_code(), 2);
        std::fs::write(&path, "{\"frames\": 0}").unwrap();
        assert_eq!(SweepConfig::load(&path).unwrap_err().exit_code(), 2);
        std::fs::write(&path, "{\"frames\": 3, \"analysis\": {\"modes\": 2.0}}").unwrap();
        let cfg = SweepConfig::load(&path).unwrap();
        assert_eq!((cfg.frames, cfg.analysis.modes), (3, Some(2.0)));
        assert_eq!(cfg.analysis.em.max_iterations, 200);
        std::fs::write(&path, "{").unwrap();
        assert_eq!(SweepConfig::load(&path).unwrap_err().exit_code(), 2);
        assert_eq!(SweepConfig::load(&dir.path().join("missing.json")).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn photon_noise_uses_mean_efficiency() {
        let cfg = SweepConfig::default();
        let (s, i) = cfg.photon_noise(4.5);
        assert!((s - 4.5 / 0.225).abs() < 1e-12 && s == i);
    }
}
