use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{forward_detect, povm_matrix};
use crate::error::{Error, Result};
use crate::harness::analyze::{analyze_distribution, EmSummary};
use crate::harness::bootstrap::{bootstrap_errors, neighbor_pair_scatter};
use crate::harness::config::SweepConfig;
use crate::harness::report_scalars;
use crate::moments::{add_thermal_noise_to_moments, intensity_moments_of, IntensityMomentSet, DEFAULT_ORDER};
use crate::quantifiers::{quantify, QuantifierReport};
use crate::state::{
    convolve_noise, ideal_twb, sample_histogram, JointDistribution, JointHistogram, ThermalFieldSpec,
    RNG_NAME,
};

pub const SOFTWARE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Figures of one branch at one noise level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    /// From the simulated measurement.
    pub measured: Option<QuantifierReport>,
    /// From the noiseless baseline with model noise added to its moments.
    pub model: Option<QuantifierReport>,
    /// Bootstrap standard errors of the measured figures.
    pub errors: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    /// Grid value: mean noise photocounts per arm before weighting.
    pub noise_photocount_mean: f64,
    pub noise_photocounts: (f64, f64),
    pub noise_photons: (f64, f64),
    /// Mean photocounts of the analyzed distribution.
    pub mean_counts: Option<(f64, f64)>,
    pub photocount: BranchRecord,
    pub photon: BranchRecord,
    pub em: Option<EmSummary>,
    pub sample_seed: Option<u64>,
    pub bootstrap_failures: Option<usize>,
    /// Errors met at this point; the sweep carries on.
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub software_version: String,
    pub generator: String,
    /// Marks the baseline as the synthetic ideal twin beam.
    pub baseline: String,
    pub config: SweepConfig,
    pub points: Vec<PointRecord>,
    /// Neighbor-pair relative scatter of each measured figure around its
    /// model curve, keyed "<branch>.<figure>".
    pub scatter: BTreeMap<String, f64>,
}

/// Seed of the sampling stream of grid point `index`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

struct Baseline {
    photons: JointDistribution,
    photon_moments: IntensityMomentSet,
    count_moments: IntensityMomentSet,
}

/// Runs every grid point (concurrently, up to `workers`) and assembles the
/// report in grid order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let photons = ideal_twb(&cfg.twin_beam, &cfg.truncation)?;
    let n = photons.dims().0.max(photons.dims().1) - 1;
    let ts = povm_matrix(&cfg.detector_signal, n.min(cfg.detector_signal.pixels), n)?;
    let ti = povm_matrix(&cfg.detector_idler, n.min(cfg.detector_idler.pixels), n)?;
    let counts = forward_detect(&photons, &ts, &ti)?;
    let base = Baseline {
        photon_moments: intensity_moments_of(&photons, DEFAULT_ORDER)?,
        count_moments: intensity_moments_of(&counts, DEFAULT_ORDER)?,
        photons,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let points: Vec<PointRecord> = pool.install(|| {
        cfg.noise_photocount_means
            .par_iter()
            .enumerate()
            .map(|(i, &c)| run_point(cfg, &base, i, c))
            .collect()
    });

    let mut scatter = BTreeMap::new();
    for (name, pick) in [
        ("photocount", (|p: &PointRecord| &p.photocount) as fn(&PointRecord) -> &BranchRecord),
        ("photon", |p: &PointRecord| &p.photon),
    ] {
        let keys: Vec<&str> = points
            .iter()
            .find_map(|p| pick(p).measured.as_ref())
            .map(|r| report_scalars(r).into_iter().map(|(k, _)| k).collect())
            .unwrap_or_default();
        for key in keys {
            let mut values = Vec::new();
            let mut model = Vec::new();
            for p in &points {
                let b = pick(p);
                let v = b.measured.as_ref().and_then(|r| lookup(r, key));
                let m = b.model.as_ref().and_then(|r| lookup(r, key));
                if let (Some(v), Some(m)) = (v, m) {
                    values.push(v);
                    model.push(m);
                }
            }
            if let Some(s) = neighbor_pair_scatter(&values, &model) {
                scatter.insert(format!("{name}.{key}"), s);
            }
        }
    }

    Ok(SweepReport {
        software_version: SOFTWARE_VERSION.to_string(),
        generator: RNG_NAME.to_string(),
        baseline: format!(
            "synthetic ideal twin beam (pair_mean {}, paired_modes {})",
            cfg.twin_beam.pair_mean, cfg.twin_beam.paired_modes
        ),
        config: cfg.clone(),
        points,
        scatter,
    })
}

fn lookup(r: &QuantifierReport, key: &str) -> Option<f64> {
    report_scalars(r).into_iter().find(|(k, _)| *k == key).map(|(_, v)| v)
}

fn run_point(cfg: &SweepConfig, base: &Baseline, index: usize, grid_value: f64) -> PointRecord {
    let noise_photocounts = cfg.photocount_noise(grid_value);
    let noise_photons = cfg.photon_noise(grid_value);
    let mut rec = PointRecord {
        index,
        noise_photocount_mean: grid_value,
        noise_photocounts,
        noise_photons,
        mean_counts: None,
        photocount: BranchRecord::default(),
        photon: BranchRecord::default(),
        em: None,
        sample_seed: None,
        bootstrap_failures: None,
        failures: Vec::new(),
    };
    let search = &cfg.analysis.search;

    let model_c = add_thermal_noise_to_moments(
        &base.count_moments,
        noise_photocounts.0,
        noise_photocounts.1,
        cfg.model_noise_modes_photocount,
    )
    .and_then(|m| quantify(&m, cfg.analysis.modes, search));
    match model_c {
        Ok(r) => rec.photocount.model = Some(r),
        Err(e) => rec.failures.push(format!("photocount model: {e}")),
    }
    let model_n = add_thermal_noise_to_moments(
        &base.photon_moments,
        noise_photons.0,
        noise_photons.1,
        cfg.model_noise_modes_photon,
    )
    .and_then(|m| quantify(&m, cfg.analysis.modes, search));
    match model_n {
        Ok(r) => rec.photon.model = Some(r),
        Err(e) => rec.failures.push(format!("photon model: {e}")),
    }

    if let Err(e) = measure_point(cfg, base, &mut rec) {
        log::warn!("grid point {index} (noise {grid_value}): {e}");
        rec.failures.push(format!("measurement: {e}"));
    }
    rec
}

/// One simulated measurement: the noisy photon field, its exact photocount
/// distribution and, unless exact, a sampled histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub photons: JointDistribution,
    pub counts: JointDistribution,
    pub histogram: Option<JointHistogram>,
}

/// Builds the configured twin beam with the noise of `grid_value` and
/// detects it; samples `cfg.frames` frames with `seed` unless `cfg.exact`.
pub fn simulate_point(cfg: &SweepConfig, grid_value: f64, seed: u64) -> Result<Simulation> {
    let photons = ideal_twb(&cfg.twin_beam, &cfg.truncation)?;
    simulate_from(cfg, &photons, grid_value, seed)
}

fn simulate_from(
    cfg: &SweepConfig,
    beam: &JointDistribution,
    grid_value: f64,
    seed: u64,
) -> Result<Simulation> {
    let (ns, ni) = cfg.photon_noise(grid_value);
    let photons = convolve_noise(
        beam,
        &ThermalFieldSpec::new(ns, cfg.source_noise_modes)?,
        &ThermalFieldSpec::new(ni, cfg.source_noise_modes)?,
        &cfg.truncation,
    )?;
    let (ds, di) = (&cfg.detector_signal, &cfg.detector_idler);
    let (rows, cols) = photons.dims();
    let ts = povm_matrix(ds, (rows - 1).min(ds.pixels / 4), rows - 1)?;
    let ti = povm_matrix(di, (cols - 1).min(di.pixels / 4), cols - 1)?;
    let counts = forward_detect(&photons, &ts, &ti)?;
    let counts = counts.trimmed(counts.tail_mass() + cfg.truncation.budget);
    let histogram = if cfg.exact {
        None
    } else {
        Some(sample_histogram(&counts, cfg.frames, seed)?.trimmed_to_support())
    };
    Ok(Simulation {
        photons,
        counts,
        histogram,
    })
}

fn measure_point(cfg: &SweepConfig, base: &Baseline, rec: &mut PointRecord) -> Result<()> {
    let seed = point_seed(cfg.seed, rec.index);
    let sim = simulate_from(cfg, &base.photons, rec.noise_photocount_mean, seed)?;
    let (ds, di) = (&cfg.detector_signal, &cfg.detector_idler);
    let (f, hist) = match sim.histogram {
        None => (sim.counts, None),
        Some(h) => {
            rec.sample_seed = Some(seed);
            (h.to_distribution()?, Some(h))
        }
    };
    rec.mean_counts = Some(f.means());
    let analysis = analyze_distribution(&f, ds, di, &cfg.analysis)?;
    rec.em = Some(analysis.em.clone());
    rec.photocount.measured = Some(analysis.photocount);
    rec.photon.measured = Some(analysis.photon);

    if let (Some(hist), true) = (hist, cfg.bootstrap.resamples > 0) {
        let seed = point_seed(cfg.seed ^ 0xB007_5742_u64, rec.index);
        let b = bootstrap_errors(
            &hist,
            &cfg.bootstrap,
            seed,
            ds,
            di,
            &cfg.analysis,
            Some(&analysis.reconstruction),
        )?;
        rec.bootstrap_failures = Some(b.failures);
        rec.photocount.errors = Some(b.photocount);
        rec.photon.errors = Some(b.photon);
    }
    Ok(())
}
