//! Gaussian negativity of one paired mode.

use twinbeam::moments::{intensity_moments_of, reduce_to_single_mode};
use twinbeam::quantifiers::negativity;
use twinbeam::state::{convolve_noise, ideal_twb, ThermalFieldSpec, Truncation, TwinBeamSpec};

fn main() -> twinbeam::Result<()> {
    let tr = Truncation::new(1e-13, 1024)?;
    let k = 10.0;
    println!("B     noise  b_p      b_s      E_N      closed form (noiseless)");
    for b in [0.25, 1.0, 2.0] {
        let p = ideal_twb(&TwinBeamSpec::new(b * k, k)?, &tr)?;
        for noise in [0.0, 1.0, 5.0] {
            let d = if noise > 0.0 {
                let n = ThermalFieldSpec::new(noise, k)?;
                convolve_noise(&p, &n, &n, &tr)?
            } else {
                p.clone()
            };
            let single = reduce_to_single_mode(&intensity_moments_of(&d, 2)?, k)?;
            let e = negativity(&single)?;
            println!(
                "{b:<5} {noise:<6} {:.6} {:.6} {:.6} {:.6}",
                e.b_p,
                e.b_s,
                e.value(),
                b + (b * (b + 1.0)).sqrt()
            );
        }
    }
    Ok(())
}
