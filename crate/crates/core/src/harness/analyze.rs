use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{povm_matrix, DetectorModel};
use crate::error::{Error, Result};
use crate::harness::config::AnalysisOptions;
use crate::io::read_histogram_csv;
use crate::moments::{intensity_moments_of, DEFAULT_ORDER};
use crate::quantifiers::{quantify, QuantifierReport};
use crate::reconstruction::{em_reconstruct, photon_grid_bound, EmDiagnostics, EmInit, StopReason};
use crate::state::{AxisKind, JointDistribution, JointHistogram};

/// Short record of an EM run for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmSummary {
    pub iterations: usize,
    pub em_steps: usize,
    pub stop_reason: StopReason,
    pub final_log_likelihood: f64,
    pub photon_grid: (usize, usize),
}

impl EmSummary {
    fn new(d: &EmDiagnostics, grid: (usize, usize)) -> Self {
        EmSummary {
            iterations: d.iterations,
            em_steps: d.em_steps,
            stop_reason: d.stop_reason,
            final_log_likelihood: d.final_log_likelihood,
            photon_grid: grid,
        }
    }
}

/// Both analysis branches of one photocount distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub photocount: QuantifierReport,
    pub photon: QuantifierReport,
    pub em: EmSummary,
    pub reconstruction: JointDistribution,
}

/// Photocount-branch figures straight from f, photon-branch figures from
/// its EM reconstruction.
pub fn analyze_distribution(
    f: &JointDistribution,
    signal: &DetectorModel,
    idler: &DetectorModel,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    analyze_with_start(f, signal, idler, opts, None)
}

/// [`analyze_distribution`] with the EM started from `start` instead of the
/// configured initialization.
pub fn analyze_with_start(
    f: &JointDistribution,
    signal: &DetectorModel,
    idler: &DetectorModel,
    opts: &AnalysisOptions,
    start: Option<&JointDistribution>,
) -> Result<Analysis> {
    if f.axes() != AxisKind::Photocount {
        return Err(Error::Dimension("analysis expects a photocount distribution".into()));
    }
    if !(f.total() > 0.0) {
        return Err(Error::domain("photocount distribution has no mass"));
    }
    let counts = intensity_moments_of(f, DEFAULT_ORDER)?;
    let photocount = quantify(&counts, opts.modes, &opts.search)?;

    let grid = match (opts.photon_grid, start) {
        (Some(g), _) => g,
        (None, Some(s)) => (s.dims().0 - 1, s.dims().1 - 1),
        (None, None) => {
            let (ms, mi) = f.means();
            (
                photon_grid_bound(ms, signal.efficiency)?,
                photon_grid_bound(mi, idler.efficiency)?,
            )
        }
    };
    let (cs, ci) = f.dims();
    let ts = povm_matrix(signal, (cs - 1).min(signal.pixels), grid.0)?;
    let ti = povm_matrix(idler, (ci - 1).min(idler.pixels), grid.1)?;
    let mut em = opts.em.clone();
    if let Some(s) = start {
        em.init = EmInit::Custom(s.clone());
    }
    let (p, diag) = em_reconstruct(f, &ts, &ti, &em)?;
    let photons = intensity_moments_of(&p, DEFAULT_ORDER)?;
    let photon = quantify(&photons, opts.modes, &opts.search)?;
    Ok(Analysis {
        photocount,
        photon,
        em: EmSummary::new(&diag, grid),
        reconstruction: p,
    })
}

/// Analysis of a measured or simulated histogram.
pub fn analyze_histogram_data(
    hist: &JointHistogram,
    signal: &DetectorModel,
    idler: &DetectorModel,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let f = hist.trimmed_to_support().to_distribution()?;
    analyze_distribution(&f, signal, idler, opts)
}

/// Reads a (row, col, count) CSV histogram and analyzes it.
pub fn analyze_histogram(
    path: &Path,
    signal: &DetectorModel,
    idler: &DetectorModel,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let hist = read_histogram_csv(path)?;
    analyze_histogram_data(&hist, signal, idler, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn vacuum_histogram_is_classical() {
        let mut counts = Array2::zeros((1, 1));
        counts[[0, 0]] = 100;
        let hist = JointHistogram::from_counts(counts).unwrap();
        let a = analyze_histogram_data(
            &hist,
            &DetectorModel::calibrated_signal(),
            &DetectorModel::calibrated_idler(),
            &AnalysisOptions::default(),
        )
        .unwrap();
        for r in [&a.photocount, &a.photon] {
            assert!(r.whole_beam.tau.m == 0.0 && r.whole_beam.nu.e2 == 0.0);
            let sm = r.single_mode.as_ref().unwrap();
            assert!(!sm.negativity.entangled && sm.tau_en == 0.0);
        }
    }

    #[test]
    fn empty_histogram_is_rejected() {
        let hist = JointHistogram::from_counts(Array2::zeros((3, 3))).unwrap();
        let r = analyze_histogram_data(
            &hist,
            &DetectorModel::calibrated_signal(),
            &DetectorModel::calibrated_idler(),
            &AnalysisOptions::default(),
        );
        assert!(r.is_err());
    }
}
