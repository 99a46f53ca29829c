//! Identifiers, depths and counting parameters of a noisy twin beam.

use twinbeam::moments::{add_thermal_noise_to_moments, intensity_moments_of};
use twinbeam::quantifiers::{quantify, NiId, SearchOptions};
use twinbeam::state::{ideal_twb, Truncation, TwinBeamSpec};

fn main() -> twinbeam::Result<()> {
    let base = intensity_moments_of(&ideal_twb(&TwinBeamSpec::new(6.0, 20.0)?, &Truncation::default())?, 3)?;
    println!("noise   R       tau_M   tau_E2  tau_E3  nu_M    nu_E2   nu_E3");
    for noise in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let m = add_thermal_noise_to_moments(&base, noise, noise, 40.0)?;
        let r = quantify(&m, None, &SearchOptions::default())?;
        let w = &r.whole_beam;
        let ids = [NiId::M, NiId::E2, NiId::E3];
        let taus: Vec<String> = ids.iter().map(|id| format!("{:.4}", w.tau.get(*id))).collect();
        let nus: Vec<String> = ids.iter().map(|id| format!("{:.4}", w.nu.get(*id))).collect();
        println!("{noise:<7} {:.4}  {}  {}", r.r.unwrap_or(f64::NAN), taus.join("  "), nus.join("  "));
    }
    Ok(())
}
