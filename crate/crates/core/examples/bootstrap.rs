//! Multinomial bootstrap error bars for one sampled histogram.

use twinbeam::detector::{forward_detect, povm_matrix, DetectorModel};
use twinbeam::harness::{analyze_histogram_data, bootstrap_errors, AnalysisOptions, BootstrapConfig};
use twinbeam::state::{ideal_twb, sample_histogram, Truncation, TwinBeamSpec};

fn main() -> twinbeam::Result<()> {
    let (ds, di) = (DetectorModel::calibrated_signal(), DetectorModel::calibrated_idler());
    let p = ideal_twb(&TwinBeamSpec::new(6.0, 10.0)?, &Truncation::default())?;
    let n = p.dims().0 - 1;
    let f = forward_detect(&p, &povm_matrix(&ds, n, n)?, &povm_matrix(&di, n, n)?)?;
    let hist = sample_histogram(&f, 10_000, 11)?;

    let mut opts = AnalysisOptions::default();
    opts.em.max_iterations = 200;
    let a = analyze_histogram_data(&hist, &ds, &di, &opts)?;
    let cfg = BootstrapConfig {
        resamples: 30,
        ..BootstrapConfig::default()
    };
    let b = bootstrap_errors(&hist, &cfg, 12, &ds, &di, &opts, Some(&a.reconstruction))?;
    println!("{} resamples, {} failed", b.resamples, b.failures);
    println!("figure        photocount ± err        photon ± err");
    for (key, value) in twinbeam::harness::report_scalars(&a.photocount) {
        let photon = twinbeam::harness::report_scalars(&a.photon)
            .into_iter()
            .find(|(k, _)| *k == key)
            .map_or(f64::NAN, |(_, v)| v);
        println!(
            "{key:<13} {value:9.5} ± {:.5}    {photon:9.5} ± {:.5}",
            b.photocount.get(key).copied().unwrap_or(f64::NAN),
            b.photon.get(key).copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
