use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

use twinbeam::detector::{
    forward_detect, povm_element, povm_element_occupancy, povm_matrix, DetectorModel,
};
use twinbeam::state::{ideal_twb, Truncation, TwinBeamSpec};

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn binom(n: usize, k: usize) -> BigRational {
    let mut r = BigRational::one();
    for j in 0..k {
        r = r * ratio((n - j) as i64, (j + 1) as i64);
    }
    r
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    BigRational::new_raw(x.numer().pow(e as u32), x.denom().pow(e as u32))
}

/// The alternating-sum POVM element in exact rational arithmetic.
fn povm_rational(pixels: usize, eta: &BigRational, dark: &BigRational, c: usize, n: usize) -> BigRational {
    // (1−D)^N (1−η)^n (1 + (l/N) η/(1−η))^n (1−D)^{−l} = (1−D)^{N−l} (1 − η + lη/N)^n
    let one = BigRational::one();
    let keep = &one - dark;
    let mut sum = BigRational::zero();
    for l in 0..=c {
        let base = &one - eta + ratio(l as i64, pixels as i64) * eta;
        let term = binom(c, l) * pow(&keep, pixels - l) * pow(&base, n);
        if (c - l) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    binom(pixels, c) * sum
}

/// Direct enumeration: every photon is lost (1 − η) or lands on one of the
/// pixels (η/N each); a pixel fires if hit or, independently, by a dark count.
fn povm_enumerated(pixels: usize, eta: &BigRational, dark: &BigRational, n: usize) -> Vec<BigRational> {
    let one = BigRational::one();
    let lost = &one - eta;
    let hit = eta / BigRational::from_integer(BigInt::from(pixels));
    let mut out = vec![BigRational::zero(); pixels + 1];
    let outcomes = (pixels + 1).pow(n as u32);
    for code in 0..outcomes {
        let mut x = code;
        let mut weight = BigRational::one();
        let mut lit = vec![false; pixels];
        for _ in 0..n {
            let o = x % (pixels + 1);
            x /= pixels + 1;
            if o == pixels {
                weight *= &lost;
            } else {
                weight *= &hit;
                lit[o] = true;
            }
        }
        let h = lit.iter().filter(|v| **v).count();
        let silent = pixels - h;
        for d in 0..=silent {
            let p = binom(silent, d) * pow(dark, d) * pow(&(&one - dark), silent - d);
            out[h + d] += &weight * p;
        }
    }
    out
}

#[test]
fn rational_formula_matches_photon_by_photon_enumeration() {
    let (eta, dark) = (ratio(1, 5), ratio(1, 20));
    for pixels in [1, 2, 4] {
        for n in 0..=5 {
            let direct = povm_enumerated(pixels, &eta, &dark, n);
            for (c, d) in direct.iter().enumerate() {
                assert_eq!(&povm_rational(pixels, &eta, &dark, c, n), d, "N={pixels} c={c} n={n}");
            }
        }
    }
}

#[test]
fn elements_match_exact_rational_values() {
    let (eta, dark) = (ratio(23, 100), ratio(1, 1000));
    let model = DetectorModel::new(0.23, 12, 0.001).unwrap();
    let table = povm_matrix(&model, 12, 25).unwrap();
    for c in 0..=12 {
        for n in 0..=25 {
            let exact = povm_rational(12, &eta, &dark, c, n).to_f64().unwrap();
            let got = table.get(c, n);
            assert!((got - exact).abs() <= 1e-14 + 1e-12 * exact, "c={c} n={n}: {got:e} vs {exact:e}");
            let single = povm_element(&model, c, n).unwrap();
            assert!((single - exact).abs() <= 1e-14 + 1e-9 * exact, "c={c} n={n}: {single:e} vs {exact:e}");
        }
    }
}

#[test]
fn calibrated_elements_match_rational_values_at_small_counts() {
    // N = 4096 with rational η = 23/100 and D = 1/102400 (D·N = 0.04)
    let (eta, dark) = (ratio(23, 100), ratio(1, 102_400));
    let model = DetectorModel::calibrated_signal();
    for (c, n) in [(0, 0), (0, 10), (1, 1), (2, 5), (3, 20), (5, 30), (8, 40)] {
        let exact = povm_rational(4096, &eta, &dark, c, n).to_f64().unwrap();
        let got = povm_element(&model, c, n).unwrap();
        assert!((got - exact).abs() <= 1e-13 + 1e-9 * exact, "c={c} n={n}: {got} vs {exact}");
    }
}

#[test]
fn calibrated_columns_are_complete() {
    let model = DetectorModel::calibrated_idler();
    let t = povm_matrix(&model, model.pixels, 100).unwrap();
    for n in [0, 1, 10, 100] {
        let s: f64 = (0..=model.pixels).map(|c| t.get(c, n)).sum();
        assert!((s - 1.0).abs() < 1e-9, "n={n}: {s}");
    }
}

#[test]
fn forward_detection_conserves_mass() {
    let p = ideal_twb(&TwinBeamSpec::new(3.0, 5.0).unwrap(), &Truncation::default()).unwrap();
    let n = p.dims().0 - 1;
    let ts = povm_matrix(&DetectorModel::calibrated_signal(), n + 10, n).unwrap();
    let ti = povm_matrix(&DetectorModel::calibrated_idler(), n + 10, n).unwrap();
    let f = forward_detect(&p, &ts, &ti).unwrap();
    assert!((f.total() + f.tail_mass() - 1.0).abs() < 1e-12);
    let (ms, mi) = f.means();
    let (ps, pi) = p.means();
    // mean photocounts: η⟨n⟩ plus dark counts, less pixel saturation
    assert!(ms < 0.23 * ps + 0.04 + 1e-9 && ms > 0.23 * ps * 0.99);
    assert!(mi < 0.22 * pi + 0.04 + 1e-9 && mi > 0.22 * pi * 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elements_are_probabilities(
        eta in 0.0f64..=1.0,
        pixels in 1usize..64,
        dark in 0.0f64..0.05,
        n in 0usize..60,
    ) {
        let model = DetectorModel::new(eta, pixels, dark).unwrap();
        let t = povm_matrix(&model, pixels, n).unwrap();
        for nn in 0..=n {
            let col: f64 = (0..=pixels).map(|c| t.get(c, nn)).sum();
            prop_assert!((col - 1.0).abs() < 1e-10, "column {nn} sums to {col}");
            for c in 0..=pixels {
                let v = t.get(c, nn);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn occupancy_route_agrees_with_dispatcher(
        eta in 0.05f64..0.95,
        pixels in 1usize..200,
        c in 0usize..20,
        n in 0usize..40,
    ) {
        let c = c.min(pixels);
        let model = DetectorModel::new(eta, pixels, 1e-4).unwrap();
        let a = povm_element(&model, c, n).unwrap();
        let b = povm_element_occupancy(&model, c, n).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 + 1e-9 * b, "{a} vs {b}");
    }
}
