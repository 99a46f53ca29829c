//! Intensity-moment algebra.
//!
//! Raw photon-number (or photocount) moments are turned into normally
//! ordered intensity moments with Stirling numbers of the first kind; these
//! equal the factorial moments ⟨n(n−1)…(n−k+1)⟩ arm by arm. From there:
//! s-ordering, mode counting, reduction to one typical paired mode and
//! moment-level thermal noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{binom, factorial};
use crate::state::{AxisKind, JointDistribution, JointHistogram};

/// Highest total order accepted anywhere in this module.
pub const MAX_SUPPORTED_ORDER: usize = 6;

/// Default total order; everything the identifiers need.
pub const DEFAULT_ORDER: usize = 3;

/// Whether moments come from photocounts or photon numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Photocount,
    PhotonNumber,
}

impl From<AxisKind> for Branch {
    fn from(axes: AxisKind) -> Self {
        match axes {
            AxisKind::Photocount => Branch::Photocount,
            AxisKind::PhotonNumber => Branch::PhotonNumber,
        }
    }
}

/// Whole beam (W) or one typical paired mode (w).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeScale {
    WholeBeam,
    SingleMode,
}

/// Moments indexed by (k, l) with k + l ≤ max_order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    max_order: usize,
    values: Vec<f64>,
}

fn slot(k: usize, l: usize) -> usize {
    let d = k + l;
    d * (d + 1) / 2 + l
}

impl MomentTable {
    pub fn zeros(max_order: usize) -> Self {
        let len = slot(0, max_order) + 1;
        MomentTable {
            max_order,
            values: vec![0.0; len],
        }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// ⟨a^k b^l⟩; panics if k + l exceeds the table order.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        assert!(k + l <= self.max_order, "moment ({k}, {l}) beyond order {}", self.max_order);
        self.values[slot(k, l)]
    }

    pub fn set(&mut self, k: usize, l: usize, v: f64) {
        assert!(k + l <= self.max_order);
        self.values[slot(k, l)] = v;
    }

    /// (k, l, value) in order of increasing total order, then l.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.max_order).flat_map(move |d| (0..=d).map(move |l| (d - l, l, self.get(d - l, l))))
    }

    pub fn from_entries(max_order: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut t = MomentTable::zeros(max_order);
        let mut seen = vec![false; t.values.len()];
        for &(k, l, v) in entries {
            if k + l > max_order {
                return Err(Error::domain(format!("moment ({k}, {l}) beyond order {max_order}")));
            }
            t.set(k, l, v);
            seen[slot(k, l)] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::domain("incomplete moment table"));
        }
        Ok(t)
    }

    /// Central moments ⟨(Δa)^k (Δb)^l⟩ of the same order.
    pub fn central(&self) -> MomentTable {
        let (ms, mi) = (self.get(1, 0), self.get(0, 1));
        let mut out = MomentTable::zeros(self.max_order);
        for d in 0..=self.max_order {
            for l in 0..=d {
                let k = d - l;
                let mut acc = 0.0;
                for a in 0..=k {
                    for b in 0..=l {
                        acc += binom(k, a)
                            * binom(l, b)
                            * self.get(a, b)
                            * (-ms).powi((k - a) as i32)
                            * (-mi).powi((l - b) as i32);
                    }
                }
                out.set(k, l, acc);
            }
        }
        out
    }

    /// Inverse of [`MomentTable::central`] for the given means.
    pub fn from_central(central: &MomentTable, mean_s: f64, mean_i: f64) -> MomentTable {
        let order = central.max_order;
        let mut out = MomentTable::zeros(order);
        for d in 0..=order {
            for l in 0..=d {
                let k = d - l;
                let mut acc = 0.0;
                for a in 0..=k {
                    for b in 0..=l {
                        // the first central moments vanish by definition
                        let c = match (a, b) {
                            (1, 0) | (0, 1) => 0.0,
                            _ => central.get(a, b),
                        };
                        acc += binom(k, a)
                            * binom(l, b)
                            * c
                            * mean_s.powi((k - a) as i32)
                            * mean_i.powi((l - b) as i32);
                    }
                }
                out.set(k, l, acc);
            }
        }
        out
    }
}

/// ⟨a^i b^j⟩ of a photon-number or photocount table.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMomentSet {
    pub branch: Branch,
    pub moments: MomentTable,
    /// Probability outside the table the moments were summed over.
    pub tail_mass: f64,
}

/// ⟨W_s^k W_i^l⟩ at ordering parameter `ordering` (1 = normal order).
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMomentSet {
    pub branch: Branch,
    pub scale: ModeScale,
    pub ordering: f64,
    pub moments: MomentTable,
}

impl IntensityMomentSet {
    pub fn new(branch: Branch, scale: ModeScale, ordering: f64, moments: MomentTable) -> Self {
        IntensityMomentSet {
            branch,
            scale,
            ordering,
            moments,
        }
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.moments.get(k, l)
    }

    pub fn max_order(&self) -> usize {
        self.moments.max_order()
    }

    pub fn mean_s(&self) -> f64 {
        self.get(1, 0)
    }

    pub fn mean_i(&self) -> f64 {
        self.get(0, 1)
    }

    /// ⟨(ΔW_s)^k (ΔW_i)^l⟩.
    pub fn central(&self, k: usize, l: usize) -> f64 {
        self.moments.central().get(k, l)
    }

    pub fn is_normally_ordered(&self) -> bool {
        self.ordering == 1.0
    }

    pub(crate) fn require_order(&self, order: usize, what: &str) -> Result<()> {
        if self.max_order() < order {
            return Err(Error::domain(format!(
                "{what} needs moments to order {order}, have {}",
                self.max_order()
            )));
        }
        Ok(())
    }
}

/// Summed moments ⟨a^i b^j⟩ = Σ a^i b^j q(a, b) over the table.
pub fn raw_moments(table: &JointDistribution, max_order: usize) -> Result<RawMomentSet> {
    if max_order == 0 || max_order > MAX_SUPPORTED_ORDER {
        return Err(Error::domain(format!(
            "moment order {max_order} outside 1..={MAX_SUPPORTED_ORDER}"
        )));
    }
    let q = table.table();
    let (rows, cols) = q.dim();
    let mut moments = MomentTable::zeros(max_order);
    // row_pows[a][j] = Σ_b b^j q(a, b)
    let mut row_pows = vec![vec![0.0; max_order + 1]; rows];
    for a in 0..rows {
        for b in 0..cols {
            let v = q[[a, b]];
            if v == 0.0 {
                continue;
            }
            let mut pow = v;
            for slot in row_pows[a].iter_mut() {
                *slot += pow;
                pow *= b as f64;
            }
        }
    }
    for d in 0..=max_order {
        for j in 0..=d {
            let i = d - j;
            let acc: f64 = row_pows
                .iter()
                .enumerate()
                .map(|(a, r)| (a as f64).powi(i as i32) * r[j])
                .sum();
            moments.set(i, j, acc);
        }
    }
    Ok(RawMomentSet {
        branch: table.axes().into(),
        moments,
        tail_mass: table.tail_mass(),
    })
}

/// Raw moments of a histogram normalized by its frame count.
pub fn raw_moments_histogram(hist: &JointHistogram, max_order: usize) -> Result<RawMomentSet> {
    raw_moments(&hist.to_distribution()?, max_order)
}

/// Signed Stirling number of the first kind s(k, m), 0 ≤ m ≤ k ≤ 8.
pub fn stirling_first_kind(k: usize, m: usize) -> Result<i64> {
    if k > 8 || m > k {
        return Err(Error::domain(format!("Stirling index ({k}, {m}) out of range")));
    }
    let mut row = vec![1i64];
    for n in 0..k {
        let mut next = vec![0i64; n + 2];
        for (j, slot) in next.iter_mut().enumerate() {
            let left = if j >= 1 { row[j - 1] } else { 0 };
            let here = if j <= n { row[j] } else { 0 };
            *slot = left - n as i64 * here;
        }
        row = next;
    }
    Ok(row[m])
}

/// Normally ordered intensity moments ⟨W_s^k W_i^l⟩ = Σ s(k,m) s(l,j) ⟨a^m b^j⟩.
pub fn intensity_moments(raw: &RawMomentSet) -> IntensityMomentSet {
    let order = raw.moments.max_order();
    let stirling = |k: usize, m: usize| stirling_first_kind(k, m).expect("order checked") as f64;
    let mut out = MomentTable::zeros(order);
    for d in 0..=order {
        for l in 0..=d {
            let k = d - l;
            let mut acc = 0.0;
            for m in 0..=k {
                let sk = stirling(k, m);
                if sk == 0.0 {
                    continue;
                }
                for j in 0..=l {
                    let sl = stirling(l, j);
                    if sl != 0.0 {
                        acc += sk * sl * raw.moments.get(m, j);
                    }
                }
            }
            out.set(k, l, acc);
        }
    }
    IntensityMomentSet::new(raw.branch, ModeScale::WholeBeam, 1.0, out)
}

/// Intensity moments straight from a table.
pub fn intensity_moments_of(dist: &JointDistribution, max_order: usize) -> Result<IntensityMomentSet> {
    Ok(intensity_moments(&raw_moments(dist, max_order)?))
}

/// Coefficient of ⟨W^m⟩ in ⟨W^k⟩_s: C(k,m)·k!/m!·t^{k−m}.
fn ordering_coefficient(k: usize, m: usize, t: f64) -> f64 {
    binom(k, m) * factorial(k) / factorial(m) * t.powi((k - m) as i32)
}

/// Moves the moments from their current ordering to `s_target`:
/// ⟨W^k⟩_s = Σ_m C(k,m) k!/m! t^{k−m} ⟨W^m⟩ with t = (s_current − s_target)/2,
/// applied to each arm and multiplied out for cross moments.
pub fn s_ordered_moments(m: &IntensityMomentSet, s_target: f64) -> Result<IntensityMomentSet> {
    if !(s_target <= 1.0) || !s_target.is_finite() {
        return Err(Error::domain(format!("ordering parameter {s_target} must be <= 1")));
    }
    let t = (m.ordering - s_target) / 2.0;
    let mut out = shift_ordering(m, t);
    out.ordering = s_target;
    Ok(out)
}

/// The ordering shift by t = (1 − s)/2, without tag bookkeeping beyond
/// lowering the ordering parameter by 2t.
pub(crate) fn shift_ordering(m: &IntensityMomentSet, t: f64) -> IntensityMomentSet {
    if t == 0.0 {
        return m.clone();
    }
    let order = m.max_order();
    let mut out = MomentTable::zeros(order);
    for d in 0..=order {
        for l in 0..=d {
            let k = d - l;
            let mut acc = 0.0;
            for a in 0..=k {
                let ca = ordering_coefficient(k, a, t);
                for b in 0..=l {
                    acc += ca * ordering_coefficient(l, b, t) * m.get(a, b);
                }
            }
            out.set(k, l, acc);
        }
    }
    IntensityMomentSet::new(m.branch, m.scale, m.ordering - 2.0 * t, out)
}

/// Per-arm mode counts K_a = ⟨W_a⟩² / ⟨(ΔW_a)²⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub signal: f64,
    pub idler: f64,
    pub average: f64,
}

pub fn estimate_modes(m: &IntensityMomentSet) -> Result<ModeEstimate> {
    if !m.is_normally_ordered() {
        return Err(Error::domain("mode estimate needs normally ordered moments"));
    }
    if m.scale != ModeScale::WholeBeam {
        return Err(Error::ModeScale("mode estimate needs whole-beam moments".into()));
    }
    m.require_order(2, "mode estimate")?;
    let arm = |mean: f64, second: f64, name: &str| -> Result<f64> {
        let var = second - mean * mean;
        if !(var > 0.0) || !(mean > 0.0) {
            return Err(Error::Degenerate(format!(
                "{name} arm has non-positive intensity variance {var:e} (mean {mean:e})"
            )));
        }
        Ok(mean * mean / var)
    };
    let signal = arm(m.mean_s(), m.get(2, 0), "signal")?;
    let idler = arm(m.mean_i(), m.get(0, 2), "idler")?;
    Ok(ModeEstimate {
        signal,
        idler,
        average: 0.5 * (signal + idler),
    })
}

/// Moments of one typical paired mode of a K-mode beam: means and every
/// central moment of order ≥ 2 divided by K, raw moments rebuilt from them.
pub fn reduce_to_single_mode(m: &IntensityMomentSet, k: f64) -> Result<IntensityMomentSet> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::domain(format!("mode count {k} must be >= 1")));
    }
    if m.scale != ModeScale::WholeBeam {
        return Err(Error::ModeScale("moments are already single-mode".into()));
    }
    let scaled = scale_modes(&m.moments, 1.0 / k);
    Ok(IntensityMomentSet::new(m.branch, ModeScale::SingleMode, m.ordering, scaled))
}

/// Undoes [`reduce_to_single_mode`].
pub fn expand_to_whole_beam(m: &IntensityMomentSet, k: f64) -> Result<IntensityMomentSet> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::domain(format!("mode count {k} must be >= 1")));
    }
    if m.scale != ModeScale::SingleMode {
        return Err(Error::ModeScale("moments are already whole-beam".into()));
    }
    let scaled = scale_modes(&m.moments, k);
    Ok(IntensityMomentSet::new(m.branch, ModeScale::WholeBeam, m.ordering, scaled))
}

fn scale_modes(table: &MomentTable, factor: f64) -> MomentTable {
    let mut central = table.central();
    for d in 2..=table.max_order() {
        for l in 0..=d {
            let k = d - l;
            central.set(k, l, central.get(k, l) * factor);
        }
    }
    MomentTable::from_central(&central, table.get(1, 0) * factor, table.get(0, 1) * factor)
}

/// ⟨x^j⟩ = Γ(K+j)/Γ(K) (ν/K)^j for a K-mode thermal field of mean ν.
fn thermal_factorial_moment(j: usize, mean: f64, modes: f64) -> f64 {
    (0..j).map(|r| (modes + r as f64) * mean / modes).product()
}

/// Moments of W_a + x_a with x_a independent thermal noise of mean ν_a
/// spread over `noise_modes` modes.
pub fn add_thermal_noise_to_moments(
    m: &IntensityMomentSet,
    noise_s: f64,
    noise_i: f64,
    noise_modes: f64,
) -> Result<IntensityMomentSet> {
    if !m.is_normally_ordered() {
        return Err(Error::domain("noise addition needs normally ordered moments"));
    }
    if !(noise_s >= 0.0 && noise_i >= 0.0) {
        return Err(Error::domain("noise means must be >= 0"));
    }
    if !(noise_modes >= 1.0) || !noise_modes.is_finite() {
        return Err(Error::domain(format!("noise mode count {noise_modes} must be >= 1")));
    }
    let order = m.max_order();
    let xs: Vec<f64> = (0..=order).map(|j| thermal_factorial_moment(j, noise_s, noise_modes)).collect();
    let xi: Vec<f64> = (0..=order).map(|j| thermal_factorial_moment(j, noise_i, noise_modes)).collect();
    let mut out = MomentTable::zeros(order);
    for d in 0..=order {
        for l in 0..=d {
            let k = d - l;
            let mut acc = 0.0;
            for a in 0..=k {
                for b in 0..=l {
                    acc += binom(k, a) * binom(l, b) * m.get(a, b) * xs[k - a] * xi[l - b];
                }
            }
            out.set(k, l, acc);
        }
    }
    Ok(IntensityMomentSet::new(m.branch, m.scale, m.ordering, out))
}
