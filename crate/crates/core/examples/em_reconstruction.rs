//! Photon-number reconstruction of simulated photocount frames.

use twinbeam::detector::{forward_detect, povm_matrix, DetectorModel};
use twinbeam::reconstruction::{em_reconstruct, photon_grid_bound, EmOptions};
use twinbeam::state::{ideal_twb, sample_histogram, Truncation, TwinBeamSpec};

fn main() -> twinbeam::Result<()> {
    let truth = ideal_twb(&TwinBeamSpec::new(3.0, 4.0)?, &Truncation::default())?;
    let (ds, di) = (DetectorModel::calibrated_signal(), DetectorModel::calibrated_idler());
    let n = truth.dims().0 - 1;
    let counts = forward_detect(&truth, &povm_matrix(&ds, n, n)?, &povm_matrix(&di, n, n)?)?;
    let hist = sample_histogram(&counts, 50_000, 3)?.trimmed_to_support();
    let f = hist.to_distribution()?;

    let (ms, mi) = f.means();
    let grid = (photon_grid_bound(ms, ds.efficiency)?, photon_grid_bound(mi, di.efficiency)?);
    let (cs, ci) = f.dims();
    let ts = povm_matrix(&ds, cs - 1, grid.0)?;
    let ti = povm_matrix(&di, ci - 1, grid.1)?;
    let (p, diag) = em_reconstruct(&f, &ts, &ti, &EmOptions::default())?;

    println!(
        "{} iterations ({} EM steps), stop {:?}, log L {:.6}",
        diag.iterations, diag.em_steps, diag.stop_reason, diag.final_log_likelihood
    );
    println!("photon means {:?}, true {:?}", p.means(), truth.means());
    println!("diagonal mass {:.4}", p.diagonal_mass() / p.total());
    Ok(())
}
