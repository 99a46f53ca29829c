//! Normally ordered intensity moments, ordering shifts and single-mode reduction.

use twinbeam::moments::{
    add_thermal_noise_to_moments, intensity_moments_of, reduce_to_single_mode, s_ordered_moments,
};
use twinbeam::state::{convolve_noise, ideal_twb, ThermalFieldSpec, Truncation, TwinBeamSpec};

fn main() -> twinbeam::Result<()> {
    let tr = Truncation::default();
    let p = ideal_twb(&TwinBeamSpec::new(5.0, 10.0)?, &tr)?;
    let noise = ThermalFieldSpec::new(1.0, 20.0)?;
    let noisy = convolve_noise(&p, &noise, &noise, &tr)?;

    let m = intensity_moments_of(&noisy, 3)?;
    let shortcut = add_thermal_noise_to_moments(&intensity_moments_of(&p, 3)?, 1.0, 1.0, 20.0)?;
    println!("k l   <W_s^k W_i^l>      from moments");
    for (k, l, v) in m.moments.entries() {
        println!("{k} {l}   {v:14.6}   {:14.6}", shortcut.get(k, l));
    }

    let sym = s_ordered_moments(&m, 0.0)?;
    println!("symmetric ordering: <W_s> {:.4}, <W_s W_i> {:.4}", sym.get(1, 0), sym.get(1, 1));
    let single = reduce_to_single_mode(&m, 10.0)?;
    println!("per mode: <W_s> {:.4}, <W_s W_i> {:.4}", single.get(1, 0), single.get(1, 1));
    Ok(())
}
