//! Mandel-Rice statistics of a multi-mode thermal arm and the twin beam built from it.

use twinbeam::moments::{estimate_modes, intensity_moments_of};
use twinbeam::state::{ideal_twb, mandel_rice_pmf, Truncation, TwinBeamSpec};

fn main() -> twinbeam::Result<()> {
    let spec = TwinBeamSpec::new(8.0, 4.0)?;
    println!("n   p(n), K = 4, <n> = 8");
    for n in (0..=24).step_by(3) {
        println!("{n:<3} {:.6}", mandel_rice_pmf(n, spec.marginal().per_mode_mean(), 4.0)?);
    }

    let p = ideal_twb(&spec, &Truncation::default())?;
    let (ms, mi) = p.means();
    println!("grid {:?}, tail {:.1e}, means ({ms:.6}, {mi:.6})", p.dims(), p.tail_mass());
    let k = estimate_modes(&intensity_moments_of(&p, 2)?)?;
    println!("mode estimate: signal {:.4}, idler {:.4}", k.signal, k.idler);
    Ok(())
}
