//! Joint photon-number and photocount statistics.
//!
//! Thermal (Mandel-Rice) fields, ideal multi-mode twin beams built from
//! identical paired modes, independent noise convolution per arm, and
//! multinomial frame sampling.
//!
//! Thermal fields are parameterized by their *total* mean; the per-mode mean
//! `total_mean / modes` is what enters the Mandel-Rice kernel.

use ndarray::{s, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_rising_over_factorial;

/// Name of the sampling generator, echoed in output metadata.
pub const RNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.9, seed_from_u64)";

/// Tail-mass budget and per-axis hard bound for truncated tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Truncation {
    pub budget: f64,
    pub hard_limit: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            budget: 1e-9,
            hard_limit: 512,
        }
    }
}

impl Truncation {
    pub fn new(budget: f64, hard_limit: usize) -> Result<Self> {
        if !(budget > 0.0 && budget < 1.0) {
            return Err(Error::domain(format!("truncation budget {budget} not in (0, 1)")));
        }
        Ok(Truncation { budget, hard_limit })
    }
}

/// A K-mode thermal field with `total_mean` photons (or photocounts).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalFieldSpec {
    pub total_mean: f64,
    pub modes: f64,
}

impl ThermalFieldSpec {
    pub fn new(total_mean: f64, modes: f64) -> Result<Self> {
        let spec = ThermalFieldSpec { total_mean, modes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_mean >= 0.0 && self.total_mean.is_finite()) {
            return Err(Error::domain(format!("thermal mean {} must be >= 0", self.total_mean)));
        }
        if !(self.modes >= 1.0 && self.modes.is_finite()) {
            return Err(Error::domain(format!("thermal mode count {} must be >= 1", self.modes)));
        }
        Ok(())
    }

    pub fn per_mode_mean(&self) -> f64 {
        self.total_mean / self.modes
    }

    pub fn variance(&self) -> f64 {
        self.total_mean + self.total_mean * self.total_mean / self.modes
    }
}

/// A twin beam of `paired_modes` identical two-mode squeezed vacua carrying
/// `pair_mean` photon pairs in total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinBeamSpec {
    pub pair_mean: f64,
    pub paired_modes: f64,
}

impl TwinBeamSpec {
    pub fn new(pair_mean: f64, paired_modes: f64) -> Result<Self> {
        let spec = TwinBeamSpec {
            pair_mean,
            paired_modes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ThermalFieldSpec::new(self.pair_mean, self.paired_modes).map(|_| ())
    }

    /// Each arm alone is a `paired_modes`-mode thermal field.
    pub fn marginal(&self) -> ThermalFieldSpec {
        ThermalFieldSpec {
            total_mean: self.pair_mean,
            modes: self.paired_modes,
        }
    }
}

/// What the table indices count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    PhotonNumber,
    Photocount,
}

/// Truncated joint probability table q(a, b) with tracked tail mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    table: Array2<f64>,
    tail_mass: f64,
    axes: AxisKind,
}

impl JointDistribution {
    /// Wraps a table; the tail mass is whatever the entries leave to 1.
    pub fn from_table(table: Array2<f64>, axes: AxisKind) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Dimension("empty probability table".into()));
        }
        if let Some(bad) = table.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("probability entry {bad} is negative or not finite")));
        }
        let sum = table.sum();
        if sum > 1.0 + 1e-9 {
            return Err(Error::domain(format!("probability table sums to {sum} > 1")));
        }
        Ok(JointDistribution {
            table,
            tail_mass: (1.0 - sum).max(0.0),
            axes,
        })
    }

    /// Rescales an arbitrary non-negative table to unit mass.
    pub fn normalized_from(table: Array2<f64>, axes: AxisKind) -> Result<Self> {
        let sum = table.sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::domain("table has no probability mass"));
        }
        Self::from_table(table / sum, axes)
    }

    pub fn point_mass(a: usize, b: usize, axes: AxisKind) -> Self {
        let mut table = Array2::zeros((a + 1, b + 1));
        table[[a, b]] = 1.0;
        JointDistribution {
            table,
            tail_mass: 0.0,
            axes,
        }
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn axes(&self) -> AxisKind {
        self.axes
    }

    pub fn dims(&self) -> (usize, usize) {
        self.table.dim()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.table.get([a, b]).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.table.sum()
    }

    pub fn marginal_signal(&self) -> Vec<f64> {
        self.table.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn marginal_idler(&self) -> Vec<f64> {
        self.table.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Mean index per arm, from the tabulated mass only.
    pub fn means(&self) -> (f64, f64) {
        let ms = self
            .marginal_signal()
            .iter()
            .enumerate()
            .map(|(a, p)| a as f64 * p)
            .sum();
        let mi = self
            .marginal_idler()
            .iter()
            .enumerate()
            .map(|(b, p)| b as f64 * p)
            .sum();
        (ms, mi)
    }

    pub fn diagonal_mass(&self) -> f64 {
        self.table.diag().sum()
    }

    /// Total variation distance ½ Σ |q − q'| over the union of both grids.
    pub fn total_variation(&self, other: &JointDistribution) -> f64 {
        let (a1, b1) = self.dims();
        let (a2, b2) = other.dims();
        let mut acc = 0.0;
        for a in 0..a1.max(a2) {
            for b in 0..b1.max(b2) {
                acc += (self.get(a, b) - other.get(a, b)).abs();
            }
        }
        0.5 * acc
    }

    /// Same mass, relabelled axes.
    pub fn with_axes(mut self, axes: AxisKind) -> Self {
        self.axes = axes;
        self
    }

    /// Drops trailing rows/columns while the accumulated tail stays below
    /// `budget`. Leading structure is never touched.
    pub fn trimmed(&self, budget: f64) -> JointDistribution {
        let (mut rows, mut cols) = self.dims();
        let mut tail = self.tail_mass;
        loop {
            let row_mass = if rows > 1 {
                self.table.slice(s![rows - 1, ..cols]).sum()
            } else {
                f64::INFINITY
            };
            let col_mass = if cols > 1 {
                self.table.slice(s![..rows, cols - 1]).sum()
            } else {
                f64::INFINITY
            };
            let (mass, is_row) = if row_mass <= col_mass {
                (row_mass, true)
            } else {
                (col_mass, false)
            };
            if !(tail + mass < budget) {
                break;
            }
            tail += mass;
            if is_row {
                rows -= 1;
            } else {
                cols -= 1;
            }
        }
        JointDistribution {
            table: self.table.slice(s![..rows, ..cols]).to_owned(),
            tail_mass: tail,
            axes: self.axes,
        }
    }
}

/// Integer frame counts per (c_s, c_i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    counts: Array2<u64>,
    frames: u64,
}

impl JointHistogram {
    pub fn from_counts(counts: Array2<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Dimension("empty histogram".into()));
        }
        let frames = counts.sum();
        Ok(JointHistogram { counts, frames })
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        self.counts.dim()
    }

    /// Relative frequencies as a photocount distribution.
    pub fn to_distribution(&self) -> Result<JointDistribution> {
        if self.frames == 0 {
            return Err(Error::domain("histogram has zero frames"));
        }
        let table = self.counts.mapv(|c| c as f64 / self.frames as f64);
        JointDistribution::normalized_from(table, AxisKind::Photocount)
    }

    /// Removes empty trailing rows and columns.
    pub fn trimmed_to_support(&self) -> JointHistogram {
        let (rows, cols) = self.dims();
        let last_row = (0..rows)
            .rev()
            .find(|&a| self.counts.row(a).iter().any(|&c| c > 0))
            .unwrap_or(0);
        let last_col = (0..cols)
            .rev()
            .find(|&b| self.counts.column(b).iter().any(|&c| c > 0))
            .unwrap_or(0);
        JointHistogram {
            counts: self.counts.slice(s![..=last_row, ..=last_col]).to_owned(),
            frames: self.frames,
        }
    }
}

/// Mandel-Rice probability of `n` photons in a field of `modes` modes with
/// `per_mode_mean` photons per mode.
pub fn mandel_rice_pmf(n: usize, per_mode_mean: f64, modes: f64) -> Result<f64> {
    if !(per_mode_mean >= 0.0 && per_mode_mean.is_finite()) {
        return Err(Error::domain(format!("per-mode mean {per_mode_mean} must be >= 0")));
    }
    if !(modes >= 1.0 && modes.is_finite()) {
        return Err(Error::domain(format!("mode count {modes} must be >= 1")));
    }
    Ok(mandel_rice_unchecked(n, per_mode_mean, modes))
}

fn mandel_rice_unchecked(n: usize, x: f64, k: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_p = ln_rising_over_factorial(n, k) + n as f64 * x.ln() - (n as f64 + k) * x.ln_1p();
    ln_p.exp()
}

/// Probabilities p(0..=n_max) of a thermal field plus the exact mass beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalMarginal {
    pub probs: Vec<f64>,
    pub tail: f64,
}

/// Mandel-Rice marginal on 0..=n_max with its tail; no budget check.
pub fn thermal_marginal(spec: &ThermalFieldSpec, n_max: usize) -> Result<ThermalMarginal> {
    spec.validate()?;
    let x = spec.per_mode_mean();
    let k = spec.modes;
    if x == 0.0 {
        let mut probs = vec![0.0; n_max + 1];
        probs[0] = 1.0;
        return Ok(ThermalMarginal { probs, tail: 0.0 });
    }
    let ln_ratio = (x / (1.0 + x)).ln();
    let mut ln_p = -k * x.ln_1p();
    let mut probs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            ln_p += ((n as f64 - 1.0 + k) / n as f64).ln() + ln_ratio;
        }
        probs.push(ln_p.exp());
    }
    let tail = thermal_tail_after(n_max, ln_p, x, k);
    Ok(ThermalMarginal { probs, tail })
}

/// Σ_{m > n} p(m) given ln p(n), by continuing the term recurrence until the
/// geometric remainder bound is negligible.
fn thermal_tail_after(n: usize, ln_p_n: f64, x: f64, k: f64) -> f64 {
    let q = x / (1.0 + x);
    let mut ln_p = ln_p_n;
    let mut m = n;
    let mut acc = 0.0;
    for _ in 0..10_000_000 {
        m += 1;
        ln_p += ((m as f64 - 1.0 + k) / m as f64).ln() + q.ln();
        let term = ln_p.exp();
        acc += term;
        // ratio of the next term to this one; decreasing in m towards q
        let ratio = (m as f64 + k) / (m as f64 + 1.0) * q;
        if ratio < 1.0 {
            let bound = term * ratio / (1.0 - ratio);
            if bound <= 1e-17 * acc.max(1e-300) || bound < 1e-300 {
                return acc + bound;
            }
        }
    }
    acc
}

/// Marginal on the smallest 0..=n_max whose tail is below the budget.
pub fn thermal_marginal_within(
    spec: &ThermalFieldSpec,
    truncation: &Truncation,
) -> Result<ThermalMarginal> {
    spec.validate()?;
    let full = thermal_marginal(spec, truncation.hard_limit)?;
    if !(full.tail < truncation.budget) {
        return Err(Error::Truncation {
            tail: full.tail,
            budget: truncation.budget,
            bound: truncation.hard_limit,
        });
    }
    let mut tail = full.tail;
    let mut n_max = truncation.hard_limit;
    while n_max > 0 && tail + full.probs[n_max] < truncation.budget {
        tail += full.probs[n_max];
        n_max -= 1;
    }
    let mut probs = full.probs;
    probs.truncate(n_max + 1);
    Ok(ThermalMarginal { probs, tail })
}

/// Diagonal joint distribution of an ideal multi-mode twin beam on a grid
/// chosen from the truncation budget.
pub fn ideal_twb(spec: &TwinBeamSpec, truncation: &Truncation) -> Result<JointDistribution> {
    spec.validate()?;
    let marginal = thermal_marginal_within(&spec.marginal(), truncation)?;
    Ok(diagonal(marginal))
}

/// Ideal twin beam on an explicit 0..=n_max grid; errors if the resulting
/// tail exceeds `budget`.
pub fn ideal_twb_with_bound(
    spec: &TwinBeamSpec,
    n_max: usize,
    budget: f64,
) -> Result<JointDistribution> {
    spec.validate()?;
    let marginal = thermal_marginal(&spec.marginal(), n_max)?;
    if !(marginal.tail < budget) {
        return Err(Error::Truncation {
            tail: marginal.tail,
            budget,
            bound: n_max,
        });
    }
    Ok(diagonal(marginal))
}

fn diagonal(marginal: ThermalMarginal) -> JointDistribution {
    let n = marginal.probs.len();
    let mut table = Array2::zeros((n, n));
    for (i, p) in marginal.probs.iter().enumerate() {
        table[[i, i]] = *p;
    }
    JointDistribution {
        table,
        tail_mass: marginal.tail,
        axes: AxisKind::PhotonNumber,
    }
}

/// Adds independent thermal noise to each arm: the two-dimensional
/// convolution of `dist` with the product of the noise marginals.
pub fn convolve_noise(
    dist: &JointDistribution,
    noise_s: &ThermalFieldSpec,
    noise_i: &ThermalFieldSpec,
    truncation: &Truncation,
) -> Result<JointDistribution> {
    noise_s.validate()?;
    noise_i.validate()?;
    let spare = truncation.budget - dist.tail_mass;
    if !(spare > 0.0) {
        return Err(Error::Truncation {
            tail: dist.tail_mass,
            budget: truncation.budget,
            bound: dist.dims().0.max(dist.dims().1),
        });
    }
    // each noise marginal gets a third of what is left
    let share = Truncation {
        budget: spare / 3.0,
        hard_limit: truncation.hard_limit,
    };
    let ks = thermal_marginal_within(noise_s, &share)?;
    let ki = thermal_marginal_within(noise_i, &share)?;
    let out = convolve_marginals(dist, &ks.probs, &ki.probs, truncation.hard_limit);
    if !(out.tail_mass < truncation.budget) {
        return Err(Error::Truncation {
            tail: out.tail_mass,
            budget: truncation.budget,
            bound: truncation.hard_limit,
        });
    }
    Ok(out)
}

/// Convolves `dist` with arbitrary per-arm kernels, keeping at most
/// `hard_limit + 1` entries per axis. The tail absorbs everything dropped.
pub fn convolve_marginals(
    dist: &JointDistribution,
    kernel_s: &[f64],
    kernel_i: &[f64],
    hard_limit: usize,
) -> JointDistribution {
    let (rows, cols) = dist.dims();
    let out_rows = (rows + kernel_s.len() - 1).min(hard_limit + 1);
    let out_cols = (cols + kernel_i.len() - 1).min(hard_limit + 1);

    // signal axis first
    let mut partial = Array2::<f64>::zeros((out_rows, cols));
    for a in 0..rows {
        let src = dist.table.row(a);
        for (d, w) in kernel_s.iter().enumerate() {
            let target = a + d;
            if target >= out_rows {
                break;
            }
            if *w == 0.0 {
                continue;
            }
            partial.row_mut(target).scaled_add(*w, &src);
        }
    }
    let mut out = Array2::<f64>::zeros((out_rows, out_cols));
    for b in 0..cols {
        let src = partial.column(b);
        for (d, w) in kernel_i.iter().enumerate() {
            let target = b + d;
            if target >= out_cols {
                break;
            }
            if *w == 0.0 {
                continue;
            }
            out.column_mut(target).scaled_add(*w, &src);
        }
    }
    let sum = out.sum();
    JointDistribution {
        table: out,
        tail_mass: (1.0 - sum).max(0.0),
        axes: dist.axes,
    }
}

/// Draws `frames` independent samples from the tabulated part of `dist`
/// (renormalized over the table).
pub fn sample_histogram(dist: &JointDistribution, frames: u64, seed: u64) -> Result<JointHistogram> {
    if frames == 0 {
        return Err(Error::domain("frames must be >= 1"));
    }
    let (rows, cols) = dist.dims();
    let weights: Vec<f64> = dist.table.iter().copied().collect();
    let index = WeightedIndex::new(&weights)
        .map_err(|e| Error::domain(format!("cannot sample from distribution: {e}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut counts = Array2::<u64>::zeros((rows, cols));
    for _ in 0..frames {
        let k = index.sample(&mut rng);
        counts[[k / cols, k % cols]] += 1;
    }
    Ok(JointHistogram { counts, frames })
}
