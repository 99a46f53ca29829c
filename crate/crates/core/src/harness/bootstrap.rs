use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::harness::analyze::analyze_with_start;
use crate::harness::config::{AnalysisOptions, BootstrapConfig};
use crate::harness::report_scalars;
use crate::state::{sample_histogram, JointDistribution, JointHistogram};

/// Standard errors per figure and branch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub resamples: usize,
    pub failures: usize,
    pub photocount: BTreeMap<String, f64>,
    pub photon: BTreeMap<String, f64>,
}

/// Multinomial resampling of `hist` with the full analysis repeated on every
/// resample. `start` seeds each reconstruction (typically the estimate from
/// the original histogram).
pub fn bootstrap_errors(
    hist: &JointHistogram,
    cfg: &BootstrapConfig,
    seed: u64,
    signal: &DetectorModel,
    idler: &DetectorModel,
    opts: &AnalysisOptions,
    start: Option<&JointDistribution>,
) -> Result<BootstrapResult> {
    if cfg.resamples < 10 {
        return Err(Error::domain("bootstrap needs at least 10 resamples"));
    }
    let hist = hist.trimmed_to_support();
    let freq = hist.to_distribution()?;
    let mut opts = opts.clone();
    opts.em.max_iterations = cfg.em_iterations.max(1);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut samples_c: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut samples_n: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut failures = 0;
    for _ in 0..cfg.resamples {
        let resample = sample_histogram(&freq, hist.frames(), rng.next_u64())?;
        let run = resample
            .trimmed_to_support()
            .to_distribution()
            .and_then(|f| analyze_with_start(&f, signal, idler, &opts, start));
        match run {
            Ok(a) => {
                for (k, v) in report_scalars(&a.photocount) {
                    samples_c.entry(k).or_default().push(v);
                }
                for (k, v) in report_scalars(&a.photon) {
                    samples_n.entry(k).or_default().push(v);
                }
            }
            Err(e) => {
                log::debug!("bootstrap resample failed: {e}");
                failures += 1;
            }
        }
    }
    if failures as f64 > cfg.max_failure_fraction * cfg.resamples as f64 {
        return Err(Error::Convergence(format!(
            "bootstrap: {failures} of {} resamples failed",
            cfg.resamples
        )));
    }
    Ok(BootstrapResult {
        resamples: cfg.resamples,
        failures,
        photocount: std_devs(&samples_c),
        photon: std_devs(&samples_n),
    })
}

fn std_devs(samples: &BTreeMap<&'static str, Vec<f64>>) -> BTreeMap<String, f64> {
    samples
        .iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(k, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (k.to_string(), var.sqrt())
        })
        .collect()
}

/// Mean relative declination of neighboring points around a reference curve:
/// for residuals d_j = value_j − model_j, the average over neighbor pairs of
/// |d_{j+1} − d_j| / (|value_j| + |value_{j+1}|). Pairs with two zero values
/// are skipped; `None` when no pair remains.
pub fn neighbor_pair_scatter(values: &[f64], model: &[f64]) -> Option<f64> {
    let n = values.len().min(model.len());
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for j in 1..n {
        let (a, b) = (values[j - 1], values[j]);
        let scale = a.abs() + b.abs();
        if !(scale > 0.0) || !scale.is_finite() {
            continue;
        }
        let d0 = a - model[j - 1];
        let d1 = b - model[j];
        sum += (d1 - d0).abs() / scale;
        pairs += 1;
    }
    (pairs > 0).then(|| sum / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{forward_detect, povm_matrix};
    use crate::state::{ideal_twb, Truncation, TwinBeamSpec};

    #[test]
    fn scatter_of_a_curve_against_itself_is_zero() {
        let v: Vec<f64> = (0..10).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(neighbor_pair_scatter(&v, &v), Some(0.0));
        assert_eq!(neighbor_pair_scatter(&[0.0, 0.0], &[0.0, 0.0]), None);
        let noisy = [1.0, 1.2, 1.0];
        let flat = [1.0, 1.0, 1.0];
        let s = neighbor_pair_scatter(&noisy, &flat).unwrap();
        assert!((s - 0.2 / 2.2).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_is_deterministic_and_rejects_few_resamples() {
        let (ms, mi) = (DetectorModel::calibrated_signal(), DetectorModel::calibrated_idler());
        let p = ideal_twb(&TwinBeamSpec::new(2.0, 4.0).unwrap(), &Truncation::default()).unwrap();
        let n = p.dims().0 - 1;
        let f = forward_detect(&p, &povm_matrix(&ms, n, n).unwrap(), &povm_matrix(&mi, n, n).unwrap())
            .unwrap();
        let hist = sample_histogram(&f, 2000, 9).unwrap();
        let cfg = BootstrapConfig {
            resamples: 10,
            em_iterations: 5,
            max_failure_fraction: 0.2,
        };
        let opts = AnalysisOptions::default();
        let a = bootstrap_errors(&hist, &cfg, 4, &ms, &mi, &opts, None).unwrap();
        let b = bootstrap_errors(&hist, &cfg, 4, &ms, &mi, &opts, None).unwrap();
        assert_eq!(a, b);
        assert!(a.photocount["r"] > 0.0);
        let few = BootstrapConfig {
            resamples: 9,
            ..cfg
        };
        assert!(bootstrap_errors(&hist, &few, 4, &ms, &mi, &opts, None).is_err());
    }
}
