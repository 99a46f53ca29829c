//! Pixelated photon-counting camera.
//!
//! A detection region of `N` pixels registers `c` photocounts when `c`
//! distinct pixels fire. Each of `n` incident photons is detected with
//! efficiency η and lands on a uniformly random pixel; every pixel also fires
//! on its own with dark-count probability D per frame.
//!
//! The closed-form response is an alternating sum over silent-pixel subsets.
//! At N = 4096 its terms agree to 14+ digits and cancel, so double precision
//! cannot evaluate it beyond the first couple of photocounts. Two routes are
//! therefore provided:
//!
//! - [`povm_element_alternating`]: the alternating sum with sign-split
//!   log-sum-exp and a cancellation estimate that refuses to return digits it
//!   cannot vouch for;
//! - an occupancy recurrence (binomial thinning, then the distribution of
//!   occupied pixels, then dark counts) built from positive terms only, used
//!   for whole tables and as the fallback of [`povm_element`].

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{binomial_pmf, log_sum_exp, LnFactorials};
use crate::state::{AxisKind, JointDistribution};

/// Estimated relative error above which the alternating sum is rejected.
pub const CANCELLATION_LIMIT: f64 = 1e-10;

/// Negative round-off accepted (and clamped to zero) in tabulated entries.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub pixels: usize,
    pub dark_mean_per_pixel: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, pixels: usize, dark_mean_per_pixel: f64) -> Result<Self> {
        let model = DetectorModel {
            efficiency,
            pixels,
            dark_mean_per_pixel,
        };
        model.validate()?;
        Ok(model)
    }

    /// Model specified by its total dark-count mean D·N per frame.
    pub fn with_total_dark(efficiency: f64, pixels: usize, total_dark: f64) -> Result<Self> {
        if pixels == 0 {
            return Err(Error::domain("pixel count must be >= 1"));
        }
        Self::new(efficiency, pixels, total_dark / pixels as f64)
    }

    /// Calibrated signal region: η = 0.230, N = 4096, D·N = 0.040.
    pub fn calibrated_signal() -> Self {
        DetectorModel {
            efficiency: 0.230,
            pixels: 4096,
            dark_mean_per_pixel: 0.040 / 4096.0,
        }
    }

    /// Calibrated idler region: η = 0.220, N = 4096, D·N = 0.040.
    pub fn calibrated_idler() -> Self {
        DetectorModel {
            efficiency: 0.220,
            ..Self::calibrated_signal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::domain(format!("efficiency {} not in [0, 1]", self.efficiency)));
        }
        if self.pixels == 0 {
            return Err(Error::domain("pixel count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.dark_mean_per_pixel) {
            return Err(Error::domain(format!(
                "dark count per pixel {} not in [0, 1]",
                self.dark_mean_per_pixel
            )));
        }
        Ok(())
    }

    pub fn total_dark(&self) -> f64 {
        self.dark_mean_per_pixel * self.pixels as f64
    }
}

/// Alternating-sum evaluation of T(c, n).
///
/// Terms are accumulated as two log-sum-exps (positive and negative). The
/// result is accepted only when ε · (P + Q) / |P − Q| stays below
/// [`CANCELLATION_LIMIT`]; otherwise a [`Error::Precision`] is returned.
pub fn povm_element_alternating(model: &DetectorModel, c: usize, n: usize) -> Result<f64> {
    model.validate()?;
    let big_n = model.pixels;
    if c > big_n {
        return Err(Error::domain(format!("photocount {c} exceeds pixel count {big_n}")));
    }
    let lnf = LnFactorials::new(big_n);
    let ln_keep = (-model.dark_mean_per_pixel).ln_1p();
    let ln_prefactor = lnf.ln_binom(big_n, c);
    let mut pos = Vec::with_capacity(c / 2 + 1);
    let mut neg = Vec::with_capacity(c / 2 + 1);
    for j in 0..=c {
        // silent set of size m = N − c + j
        let m = big_n - c + j;
        let miss = 1.0 - model.efficiency * m as f64 / big_n as f64;
        let ln_miss_n = if n == 0 {
            0.0
        } else if miss <= 0.0 {
            f64::NEG_INFINITY
        } else {
            n as f64 * miss.ln()
        };
        let ln_dark = if m == 0 {
            0.0
        } else if ln_keep == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            m as f64 * ln_keep
        };
        let term = ln_prefactor + lnf.ln_binom(c, j) + ln_dark + ln_miss_n;
        if j % 2 == 0 {
            pos.push(term);
        } else {
            neg.push(term);
        }
    }
    let p = log_sum_exp(&pos);
    let q = log_sum_exp(&neg);
    let (pv, qv) = (p.exp(), q.exp());
    let value = pv - qv;
    let magnitude = pv + qv;
    if magnitude == 0.0 {
        return Ok(0.0);
    }
    let relative_error = f64::EPSILON * (c as f64 + 1.0) * magnitude / value.abs();
    if !(relative_error <= CANCELLATION_LIMIT) {
        return Err(Error::Precision {
            context: format!("alternating POVM sum at c={c}, n={n}"),
            relative_error,
        });
    }
    if value < 0.0 {
        if value >= -NEGATIVE_CLAMP {
            return Ok(0.0);
        }
        return Err(Error::Precision {
            context: format!("negative POVM element at c={c}, n={n}"),
            relative_error,
        });
    }
    Ok(value)
}

/// T(c, n): the alternating sum when it is trustworthy, otherwise the
/// occupancy recurrence.
pub fn povm_element(model: &DetectorModel, c: usize, n: usize) -> Result<f64> {
    match povm_element_alternating(model, c, n) {
        Ok(v) => Ok(v),
        Err(Error::Precision { .. }) => povm_element_occupancy(model, c, n),
        Err(e) => Err(e),
    }
}

/// T(c, n) from the occupancy recurrence alone.
pub fn povm_element_occupancy(model: &DetectorModel, c: usize, n: usize) -> Result<f64> {
    model.validate()?;
    if c > model.pixels {
        return Err(Error::domain(format!(
            "photocount {c} exceeds pixel count {}",
            model.pixels
        )));
    }
    Ok(occupancy_table(model, c, n)[[c, n]])
}

/// Tabulated response T(c, n), 0 ≤ c ≤ c_max, 0 ≤ n ≤ n_max.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmMatrix {
    model: DetectorModel,
    entries: Array2<f64>,
    captured_mass: Vec<f64>,
    beyond_quarter: bool,
}

impl PovmMatrix {
    pub fn model(&self) -> &DetectorModel {
        &self.model
    }

    /// Rows are photocounts, columns photon numbers.
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn c_max(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn n_max(&self) -> usize {
        self.entries.ncols() - 1
    }

    pub fn get(&self, c: usize, n: usize) -> f64 {
        self.entries[[c, n]]
    }

    /// Σ_{c ≤ c_max} T(c, n) per photon number.
    pub fn captured_mass(&self) -> &[f64] {
        &self.captured_mass
    }

    /// Set when c_max exceeds N/4, outside the range the model is
    /// usually trusted in.
    pub fn beyond_quarter(&self) -> bool {
        self.beyond_quarter
    }

    /// Rebuilds a matrix from stored entries (e.g. read back from disk).
    pub fn from_entries(model: DetectorModel, entries: Array2<f64>) -> Result<Self> {
        model.validate()?;
        if entries.is_empty() {
            return Err(Error::Dimension("empty POVM table".into()));
        }
        if entries.iter().any(|v| !(0.0..=1.0 + 1e-9).contains(v)) {
            return Err(Error::domain("POVM entries must lie in [0, 1]"));
        }
        let captured_mass = entries.sum_axis(Axis(0)).to_vec();
        let beyond_quarter = entries.nrows() - 1 > model.pixels / 4;
        Ok(PovmMatrix {
            model,
            entries,
            captured_mass,
            beyond_quarter,
        })
    }
}

/// Tabulates T(c, n) for 0 ≤ c ≤ c_max, 0 ≤ n ≤ n_max.
pub fn povm_matrix(model: &DetectorModel, c_max: usize, n_max: usize) -> Result<PovmMatrix> {
    model.validate()?;
    if c_max > model.pixels {
        return Err(Error::domain(format!(
            "c_max {c_max} exceeds pixel count {}",
            model.pixels
        )));
    }
    let beyond_quarter = c_max > model.pixels / 4;
    if beyond_quarter {
        log::warn!(
            "POVM requested up to c = {c_max}, beyond N/4 = {}",
            model.pixels / 4
        );
    }
    let mut entries = occupancy_table(model, c_max, n_max);
    for v in entries.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_CLAMP {
                return Err(Error::Precision {
                    context: "negative POVM entry".into(),
                    relative_error: v.abs(),
                });
            }
            *v = 0.0;
        }
        if *v > 1.0 {
            *v = 1.0;
        }
    }
    let captured_mass = entries.sum_axis(Axis(0)).to_vec();
    Ok(PovmMatrix {
        model: *model,
        entries,
        captured_mass,
        beyond_quarter,
    })
}

/// Occupancy recurrence for the whole (c_max + 1) × (n_max + 1) table.
///
/// q_m(r): probability that m detected photons occupy exactly r pixels,
///   q_{m+1}(r) = q_m(r)·r/N + q_m(r−1)·(N−r+1)/N.
/// occ_n(r) = Σ_m Binom(m; n, η) q_m(r).
/// T(c, n)  = Σ_r occ_n(r) · Binom(c − r; N − r, D).
fn occupancy_table(model: &DetectorModel, c_max: usize, n_max: usize) -> Array2<f64> {
    let big_n = model.pixels;
    let nf = big_n as f64;
    let r_max = c_max.min(n_max).min(big_n);

    // q[m][r], r ≤ min(m, r_max); mass with r > r_max can only feed c > c_max
    let mut q = vec![vec![0.0; r_max + 1]; n_max + 1];
    q[0][0] = 1.0;
    for m in 0..n_max {
        let (head, tail) = q.split_at_mut(m + 1);
        let cur = &head[m];
        let next = &mut tail[0];
        for r in 0..=r_max.min(m + 1) {
            let stay = if r <= m { cur[r] * r as f64 / nf } else { 0.0 };
            let grow = if r >= 1 && r - 1 <= m {
                cur[r - 1] * (nf - (r - 1) as f64) / nf
            } else {
                0.0
            };
            next[r] = stay + grow;
        }
    }

    let lnf = LnFactorials::new(n_max);
    let mut occ = Array2::<f64>::zeros((n_max + 1, r_max + 1));
    for n in 0..=n_max {
        let thin = binomial_pmf(n, model.efficiency, &lnf);
        let mut row = occ.row_mut(n);
        for (m, w) in thin.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for r in 0..=r_max.min(m) {
                row[r] += w * q[m][r];
            }
        }
    }

    // dark[r][k] = Binom(k; N − r, D) for k ≤ c_max − r
    let d = model.dark_mean_per_pixel;
    let dark: Vec<Vec<f64>> = (0..=r_max)
        .map(|r| {
            let trials = big_n - r;
            let len = c_max - r + 1;
            let mut v = vec![0.0; len];
            if d <= 0.0 {
                v[0] = 1.0;
                return v;
            }
            if d >= 1.0 {
                if trials < len {
                    v[trials] = 1.0;
                }
                return v;
            }
            let odds = d / (1.0 - d);
            let mut ln_p = trials as f64 * (-d).ln_1p();
            v[0] = ln_p.exp();
            for k in 1..len.min(trials + 1) {
                ln_p += ((trials - k + 1) as f64 / k as f64).ln() + odds.ln();
                v[k] = ln_p.exp();
            }
            v
        })
        .collect();

    let mut t = Array2::<f64>::zeros((c_max + 1, n_max + 1));
    for n in 0..=n_max {
        let o = occ.row(n);
        for (r, dr) in dark.iter().enumerate() {
            let w = o[r];
            if w == 0.0 {
                continue;
            }
            for (k, dk) in dr.iter().enumerate() {
                t[[r + k, n]] += w * dk;
            }
        }
    }
    t
}

/// Photocount distribution f(c_s, c_i) = Σ T_s(c_s, n_s) T_i(c_i, n_i) p(n_s, n_i).
///
/// The returned tail mass is everything not captured on the photocount grid.
pub fn forward_detect(
    dist: &JointDistribution,
    povm_s: &PovmMatrix,
    povm_i: &PovmMatrix,
) -> Result<JointDistribution> {
    if dist.axes() != AxisKind::PhotonNumber {
        return Err(Error::Dimension("forward detection needs a photon-number distribution".into()));
    }
    let (rows, cols) = dist.dims();
    if povm_s.entries.ncols() < rows || povm_i.entries.ncols() < cols {
        return Err(Error::Dimension(format!(
            "POVM photon grids ({}, {}) smaller than distribution grid ({rows}, {cols})",
            povm_s.entries.ncols(),
            povm_i.entries.ncols()
        )));
    }
    let ts = povm_s.entries.slice(s![.., ..rows]);
    let ti = povm_i.entries.slice(s![.., ..cols]);
    let f = ts.dot(dist.table()).dot(&ti.t());
    JointDistribution::from_table(f, AxisKind::Photocount)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_model() -> DetectorModel {
        DetectorModel::new(0.6, 8, 0.01).unwrap()
    }

    #[test]
    fn vacuum_element_is_all_pixels_silent() {
        for m in [DetectorModel::calibrated_signal(), small_model()] {
            let expected = (m.pixels as f64 * (-m.dark_mean_per_pixel).ln_1p()).exp();
            assert_abs_diff_eq!(povm_element(&m, 0, 0).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn blind_detector() {
        let m = DetectorModel::new(0.0, 64, 0.0).unwrap();
        for n in [0, 1, 7, 30] {
            for c in 0..5 {
                let want = if c == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(povm_element(&m, c, n).unwrap(), want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn photocount_beyond_pixels_is_rejected() {
        let m = small_model();
        assert!(matches!(povm_element(&m, 9, 3), Err(Error::Domain(_))));
        assert!(povm_matrix(&m, 9, 3).is_err());
    }

    #[test]
    fn alternating_and_occupancy_agree_on_small_detector() {
        let m = small_model();
        for c in 0..=8 {
            for n in 0..12 {
                let occ = povm_element_occupancy(&m, c, n).unwrap();
                if let Ok(alt) = povm_element_alternating(&m, c, n) {
                    assert!(
                        (alt - occ).abs() <= 1e-9 * occ.max(1e-300) || (alt - occ).abs() < 1e-15,
                        "c={c} n={n}: {alt} vs {occ}"
                    );
                }
            }
        }
    }

    #[test]
    fn alternating_sum_flags_cancellation_at_calibration() {
        let m = DetectorModel::calibrated_signal();
        let r = povm_element_alternating(&m, 8, 20);
        assert!(matches!(r, Err(Error::Precision { .. })));
        // and the public evaluator still answers
        let v = povm_element(&m, 8, 20).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn single_row_table_is_all_silent_probability() {
        let m = DetectorModel::calibrated_idler();
        let t = povm_matrix(&m, 0, 30).unwrap();
        for n in 0..=30 {
            let want = (m.pixels as f64 * (-m.dark_mean_per_pixel).ln_1p()).exp()
                * (1.0 - m.efficiency).powi(n as i32);
            assert_abs_diff_eq!(t.get(0, n), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn vacuum_input_gives_dark_counts_only() {
        let ms = DetectorModel::calibrated_signal();
        let mi = DetectorModel::calibrated_idler();
        let ps = povm_matrix(&ms, 6, 4).unwrap();
        let pi = povm_matrix(&mi, 6, 4).unwrap();
        let vac = JointDistribution::point_mass(0, 0, AxisKind::PhotonNumber);
        let f = forward_detect(&vac, &ps, &pi).unwrap();
        for cs in 0..=6 {
            for ci in 0..=6 {
                assert_abs_diff_eq!(f.get(cs, ci), ps.get(cs, 0) * pi.get(ci, 0), epsilon = 1e-18);
            }
        }
    }

    #[test]
    fn forward_detect_shape_errors() {
        let p = povm_matrix(&small_model(), 4, 2).unwrap();
        let d = JointDistribution::point_mass(3, 0, AxisKind::PhotonNumber);
        assert!(matches!(forward_detect(&d, &p, &p), Err(Error::Dimension(_))));
        let counts = JointDistribution::point_mass(0, 0, AxisKind::Photocount);
        assert!(forward_detect(&counts, &p, &p).is_err());
    }

    #[test]
    fn quarter_flag() {
        let m = DetectorModel::new(0.5, 16, 0.0).unwrap();
        assert!(!povm_matrix(&m, 4, 4).unwrap().beyond_quarter());
        assert!(povm_matrix(&m, 5, 4).unwrap().beyond_quarter());
    }
}
