//! Maximum-likelihood reconstruction of a joint photon-number distribution
//! from a photocount histogram by expectation-maximization.
//!
//! One step maps p to
//!
//! ```text
//! p'(n_s, n_i) = p(n_s, n_i) Σ_{c_s, c_i} f(c_s, c_i) T_s(c_s, n_s) T_i(c_i, n_i) / F(c_s, c_i)
//! F(c_s, c_i)  = Σ_{n_s, n_i} T_s(c_s, n_s) T_i(c_i, n_i) p(n_s, n_i)
//! ```
//!
//! which keeps p on the simplex whenever f is normalized and never lowers
//! Σ f log F.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::detector::PovmMatrix;
use crate::error::{Error, Result};
use crate::state::{AxisKind, JointDistribution, JointHistogram};

/// Starting point of the iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum EmInit {
    /// Equal mass on every cell of the photon-number grid.
    #[default]
    Uniform,
    /// Caller-supplied distribution, zero-padded to the grid.
    Custom(JointDistribution),
}

/// How successive EM steps are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceleration {
    /// One EM step per iteration.
    None,
    /// Squared extrapolation over two EM steps followed by a stabilizing
    /// step; falls back to the plain step whenever the likelihood would drop.
    #[default]
    Squarem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop once no cell moves by more than this in one step.
    pub cell_tolerance: f64,
    /// Stop once |ΔL| ≤ tolerance · |L|.
    pub loglik_tolerance: f64,
    pub acceleration: Acceleration,
    #[serde(skip)]
    pub init: EmInit,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iterations: 10_000,
            cell_tolerance: 1e-9,
            loglik_tolerance: 1e-12,
            acceleration: Acceleration::Squarem,
            init: EmInit::Uniform,
        }
    }
}

impl EmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::domain("EM needs at least one iteration"));
        }
        if !(self.cell_tolerance > 0.0 && self.loglik_tolerance > 0.0) {
            return Err(Error::domain("EM tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CellTolerance,
    LikelihoodTolerance,
    IterationBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmDiagnostics {
    pub iterations: usize,
    /// Applications of the EM map, three per accelerated iteration.
    pub em_steps: usize,
    pub final_log_likelihood: f64,
    /// Log-likelihood of every iterate, starting with the initial guess.
    pub trace: Vec<f64>,
    pub stop_reason: StopReason,
    /// Largest single-cell change in the last step.
    pub last_cell_change: f64,
    /// Largest |Σp − 1| seen over all iterates.
    pub max_normalization_error: f64,
}

/// Photon-number grid bound per arm: ⌈(⟨c⟩ + 6√⟨c⟩)/η⌉.
pub fn photon_grid_bound(mean_counts: f64, efficiency: f64) -> Result<usize> {
    if !(efficiency > 0.0) {
        return Err(Error::domain("grid bound needs a positive efficiency"));
    }
    let c = mean_counts.max(0.0);
    Ok(((c + 6.0 * c.sqrt()) / efficiency).ceil() as usize)
}

/// The EM problem restricted to photocount rows/columns that carry data.
struct Problem {
    f: Array2<f64>,
    /// Σ f log f, the likelihood offset of the relative objective.
    entropy: f64,
    ts: Array2<f64>,
    ti: Array2<f64>,
}

impl Problem {
    fn new(f: &JointDistribution, povm_s: &PovmMatrix, povm_i: &PovmMatrix) -> Result<Self> {
        if f.axes() != AxisKind::Photocount {
            return Err(Error::Dimension("EM input must be a photocount distribution".into()));
        }
        let (cs, ci) = f.dims();
        if cs > povm_s.entries().nrows() || ci > povm_i.entries().nrows() {
            return Err(Error::Dimension(format!(
                "histogram ({cs}, {ci}) exceeds POVM photocount range ({}, {})",
                povm_s.entries().nrows(),
                povm_i.entries().nrows()
            )));
        }
        let total = f.total();
        if !(total > 0.0) {
            return Err(Error::domain("histogram has no counts"));
        }
        let table = f.table() / total;
        let rows: Vec<usize> = (0..cs).filter(|&a| table.row(a).sum() > 0.0).collect();
        let cols: Vec<usize> = (0..ci).filter(|&b| table.column(b).sum() > 0.0).collect();
        let ts = povm_s.entries().select(Axis(0), &rows);
        let ti = povm_i.entries().select(Axis(0), &cols);
        for (k, &a) in rows.iter().enumerate() {
            if !(ts.row(k).sum() > 0.0) {
                return Err(Error::domain(format!(
                    "signal photocount {a} is unreachable on the photon grid"
                )));
            }
        }
        for (k, &b) in cols.iter().enumerate() {
            if !(ti.row(k).sum() > 0.0) {
                return Err(Error::domain(format!(
                    "idler photocount {b} is unreachable on the photon grid"
                )));
            }
        }
        let f = table.select(Axis(0), &rows).select(Axis(1), &cols);
        let entropy = f.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum();
        Ok(Problem { f, entropy, ts, ti })
    }

    fn grid(&self) -> (usize, usize) {
        (self.ts.ncols(), self.ti.ncols())
    }
}

/// Scratch buffers for one EM run.
struct Workspace {
    left: Array2<f64>,
    model: Array2<f64>,
    back: Array2<f64>,
    gain: Array2<f64>,
}

impl Workspace {
    fn new(p: &Problem) -> Self {
        let (ns, ni) = p.grid();
        let (cs, ci) = p.f.dim();
        Workspace {
            left: Array2::zeros((cs, ni)),
            model: Array2::zeros((cs, ci)),
            back: Array2::zeros((ns, ci)),
            gain: Array2::zeros((ns, ni)),
        }
    }

    /// F = T_s p T_iᵀ, returns Σ f log(F/f). This differs from the
    /// log-likelihood by a constant but stays resolvable near the optimum.
    fn forward(&mut self, prob: &Problem, p: &Array2<f64>) -> f64 {
        general_mat_mul(1.0, &prob.ts, p, 0.0, &mut self.left);
        general_mat_mul(1.0, &self.left, &prob.ti.t(), 0.0, &mut self.model);
        let mut rel = 0.0;
        for (f, m) in prob.f.iter().zip(self.model.iter()) {
            if *f > 0.0 {
                if *m > 0.0 {
                    rel += f * ((m - f) / f).ln_1p();
                } else {
                    return f64::NEG_INFINITY;
                }
            }
        }
        rel
    }

    /// One EM map application; `None` when p cannot explain the data.
    fn em(&mut self, prob: &Problem, p: &Array2<f64>) -> Option<Array2<f64>> {
        if self.forward(prob, p) == f64::NEG_INFINITY {
            return None;
        }
        self.backward(prob);
        Some(p * &self.gain)
    }

    /// After [`Workspace::forward`]: gain = T_sᵀ (f / F) T_i.
    fn backward(&mut self, prob: &Problem) {
        self.model.zip_mut_with(&prob.f, |m, f| {
            *m = if *f > 0.0 && *m > 0.0 { f / *m } else { 0.0 };
        });
        general_mat_mul(1.0, &prob.ts.t(), &self.model, 0.0, &mut self.back);
        general_mat_mul(1.0, &self.back, &prob.ti, 0.0, &mut self.gain);
    }
}

/// Σ f log[T_s p T_iᵀ] with f normalized; −∞ when a populated cell has zero
/// model probability.
pub fn log_likelihood(
    f: &JointDistribution,
    p: &JointDistribution,
    povm_s: &PovmMatrix,
    povm_i: &PovmMatrix,
) -> Result<f64> {
    let prob = match Problem::new(f, povm_s, povm_i) {
        Ok(p) => p,
        Err(Error::Domain(msg)) if msg.contains("unreachable") => return Ok(f64::NEG_INFINITY),
        Err(e) => return Err(e),
    };
    let grid = embed(p, prob.grid())?;
    let mut ws = Workspace::new(&prob);
    Ok(prob.entropy + ws.forward(&prob, &grid))
}

/// One EM step from `p` on the POVM photon grid.
pub fn em_step(
    f: &JointDistribution,
    p: &JointDistribution,
    povm_s: &PovmMatrix,
    povm_i: &PovmMatrix,
) -> Result<JointDistribution> {
    let prob = Problem::new(f, povm_s, povm_i)?;
    let mut grid = embed(p, prob.grid())?;
    let mut ws = Workspace::new(&prob);
    if ws.forward(&prob, &grid) == f64::NEG_INFINITY {
        return Err(Error::domain("current estimate gives zero probability to observed counts"));
    }
    ws.backward(&prob);
    grid *= &ws.gain;
    JointDistribution::from_table(grid, AxisKind::PhotonNumber)
}

fn embed(p: &JointDistribution, (ns, ni): (usize, usize)) -> Result<Array2<f64>> {
    let (a, b) = p.dims();
    if a > ns || b > ni {
        return Err(Error::Dimension(format!(
            "distribution ({a}, {b}) larger than photon grid ({ns}, {ni})"
        )));
    }
    let mut grid = Array2::zeros((ns, ni));
    grid.slice_mut(s![..a, ..b]).assign(p.table());
    Ok(grid)
}

/// Runs EM on a normalized photocount distribution (or histogram turned into
/// one). The photon grid is the POVM column range.
pub fn em_reconstruct(
    f: &JointDistribution,
    povm_s: &PovmMatrix,
    povm_i: &PovmMatrix,
    opts: &EmOptions,
) -> Result<(JointDistribution, EmDiagnostics)> {
    opts.validate()?;
    let prob = Problem::new(f, povm_s, povm_i)?;
    let (ns, ni) = prob.grid();
    let mut p = match &opts.init {
        EmInit::Uniform => Array2::from_elem((ns, ni), 1.0 / (ns * ni) as f64),
        EmInit::Custom(d) => {
            let mut g = embed(d, (ns, ni))?;
            let total = g.sum();
            if !(total > 0.0) {
                return Err(Error::domain("custom EM start has no mass"));
            }
            g /= total;
            g
        }
    };
    let mut ws = Workspace::new(&prob);
    let mut rel = ws.forward(&prob, &p);
    if rel == f64::NEG_INFINITY {
        return Err(Error::domain("initial estimate gives zero probability to observed counts"));
    }
    let mut trace = vec![prob.entropy + rel];
    let mut max_norm_err = (p.sum() - 1.0).abs();
    let mut stop_reason = StopReason::IterationBudget;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut em_steps = 0;

    while iterations < opts.max_iterations {
        let (next, next_rel, steps) = match opts.acceleration {
            Acceleration::None => {
                let next = ws.em(&prob, &p).expect("likelihood is finite");
                let next_rel = ws.forward(&prob, &next);
                (next, next_rel, 1)
            }
            Acceleration::Squarem => squarem_step(&mut ws, &prob, &p, rel),
        };
        em_steps += steps;
        iterations += 1;
        let change = next
            .iter()
            .zip(p.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        last_change = change;
        p = next;
        max_norm_err = max_norm_err.max((p.sum() - 1.0).abs());
        let ll_step = (next_rel - rel).abs();
        rel = next_rel;
        let ll = prob.entropy + rel;
        trace.push(ll);
        if change < opts.cell_tolerance {
            stop_reason = StopReason::CellTolerance;
            break;
        }
        if ll_step <= opts.loglik_tolerance * ll.abs() {
            stop_reason = StopReason::LikelihoodTolerance;
            break;
        }
    }

    let dist = JointDistribution::from_table(p, AxisKind::PhotonNumber)?;
    Ok((
        dist,
        EmDiagnostics {
            iterations,
            em_steps,
            final_log_likelihood: prob.entropy + rel,
            trace,
            stop_reason,
            last_cell_change: last_change,
            max_normalization_error: max_norm_err,
        },
    ))
}

/// One SQUAREM cycle from `p0` (relative objective `ll0`). Returns the new
/// iterate, its relative objective and the number of EM maps applied.
fn squarem_step(ws: &mut Workspace, prob: &Problem, p0: &Array2<f64>, ll0: f64) -> (Array2<f64>, f64, usize) {
    let p1 = ws.em(prob, p0).expect("likelihood is finite");
    let p2 = ws.em(prob, &p1).expect("EM keeps the likelihood finite");
    let r = &p1 - p0;
    let v = &p2 - &p1 - &r;
    let r_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let plain = |ws: &mut Workspace| {
        let ll2 = ws.forward(prob, &p2);
        (p2.clone(), ll2, 2)
    };
    if !(v_norm > 0.0) || !(r_norm > 0.0) {
        return plain(ws);
    }
    // α = −1 reproduces p2; pull α toward −1 until the extrapolation stays
    // strictly inside the support of p2
    let mut alpha = (-r_norm / v_norm).min(-1.0);
    let mut extrapolated = None;
    for _ in 0..50 {
        let cand = p0 - &(&r * (2.0 * alpha)) + &(&v * (alpha * alpha));
        let ok = cand
            .iter()
            .zip(p2.iter())
            .all(|(c, q)| if *q > 0.0 { *c > 0.0 } else { *c >= 0.0 });
        if ok {
            extrapolated = Some(cand);
            break;
        }
        alpha = 0.5 * (alpha - 1.0);
        if alpha > -1.0 - 1e-3 {
            break;
        }
    }
    let Some(cand) = extrapolated else {
        return plain(ws);
    };
    let Some(mut p3) = ws.em(prob, &cand) else {
        return plain(ws);
    };
    let total = p3.sum();
    p3 /= total;
    let ll3 = ws.forward(prob, &p3);
    if ll3.is_finite() && ll3 >= ll0 {
        (p3, ll3, 3)
    } else {
        let (p, ll, _) = plain(ws);
        (p, ll, 3)
    }
}

/// [`em_reconstruct`] on a histogram's relative frequencies.
pub fn em_reconstruct_histogram(
    hist: &JointHistogram,
    povm_s: &PovmMatrix,
    povm_i: &PovmMatrix,
    opts: &EmOptions,
) -> Result<(JointDistribution, EmDiagnostics)> {
    em_reconstruct(&hist.to_distribution()?, povm_s, povm_i, opts)
}
