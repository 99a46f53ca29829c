//! Click statistics of the pixelated detector.

use twinbeam::detector::{povm_matrix, DetectorModel};

fn main() -> twinbeam::Result<()> {
    let model = DetectorModel::calibrated_signal();
    println!(
        "efficiency {}, {} pixels, dark {:.3} per frame",
        model.efficiency,
        model.pixels,
        model.total_dark()
    );
    let t = povm_matrix(&model, 60, 200)?;
    for n in [0, 10, 50, 200] {
        let mean: f64 = (0..=60).map(|c| c as f64 * t.get(c, n)).sum();
        let mass: f64 = (0..=60).map(|c| t.get(c, n)).sum();
        println!("n = {n:<4} <c> = {mean:8.4}  captured {mass:.12}");
    }

    // a small detector saturates
    let small = DetectorModel::new(0.5, 8, 0.0)?;
    let t = povm_matrix(&small, 8, 100)?;
    for n in [1, 10, 100] {
        let row: Vec<String> = (0..=8).map(|c| format!("{:.3}", t.get(c, n))).collect();
        println!("N = 8, n = {n:<3}: {}", row.join(" "));
    }
    Ok(())
}
