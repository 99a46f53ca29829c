//! Non-classicality and entanglement figures computed from intensity moments.
//!
//! Identifiers follow the convention "negative means non-classical". The
//! negativity is the exception: it is positive for entangled states, so the
//! searches below work with its negation as the margin.

use serde::{Deserialize, Serialize};

use crate::detector::NEGATIVE_CLAMP;
use crate::error::{Error, Result};
use crate::moments::{
    add_thermal_noise_to_moments, estimate_modes, intensity_moments_of, reduce_to_single_mode,
    shift_ordering, Branch, IntensityMomentSet, ModeEstimate, ModeScale,
};
use crate::solve::{bisect, expand_bracket, Bracketed};
use crate::state::{convolve_noise, JointDistribution, ThermalFieldSpec, Truncation};

/// Default absolute tolerance of the depth and counting-parameter searches.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Counting parameters beyond this are reported as unbounded.
pub const NCP_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NiId {
    M,
    E2,
    E3,
    Q,
    EN,
}

impl NiId {
    pub const ALL: [NiId; 5] = [NiId::M, NiId::E2, NiId::E3, NiId::Q, NiId::EN];

    pub fn name(self) -> &'static str {
        match self {
            NiId::M => "M",
            NiId::E2 => "E2",
            NiId::E3 => "E3",
            NiId::Q => "Q",
            NiId::EN => "EN",
        }
    }

    fn order(self) -> usize {
        match self {
            NiId::E3 => 3,
            _ => 2,
        }
    }

    fn single_mode_only(self) -> bool {
        matches!(self, NiId::Q | NiId::EN)
    }
}

/// R = 1 + ⟨[Δ(W_s − W_i)]²⟩ / (⟨W_s⟩ + ⟨W_i⟩).
pub fn noise_reduction_factor(m: &IntensityMomentSet) -> Result<f64> {
    m.require_order(2, "noise-reduction factor")?;
    let (ms, mi) = (m.mean_s(), m.mean_i());
    let total = ms + mi;
    if !(total > 0.0) {
        return Err(Error::domain("noise-reduction factor needs a positive total mean"));
    }
    let var_s = m.get(2, 0) - ms * ms;
    let var_i = m.get(0, 2) - mi * mi;
    let cov = m.get(1, 1) - ms * mi;
    Ok(1.0 + (var_s + var_i - 2.0 * cov) / total)
}

/// Signed identifier value. M, E2, E3 and Q are negative for non-classical
/// moments; EN returns the raw negativity, positive when entangled.
pub fn evaluate_ni(id: NiId, m: &IntensityMomentSet) -> Result<f64> {
    m.require_order(id.order(), id.name())?;
    if id.single_mode_only() && m.scale != ModeScale::SingleMode {
        return Err(Error::ModeScale(format!("{} needs single-mode moments", id.name())));
    }
    let w = |k, l| m.get(k, l);
    Ok(match id {
        NiId::M => w(2, 0) * w(0, 2) - w(1, 1) * w(1, 1),
        NiId::E2 => w(2, 0) + w(0, 2) - 2.0 * w(1, 1),
        NiId::E3 => w(3, 0) + w(0, 3) - w(2, 1) - w(1, 2),
        NiId::Q => 2.0 * w(1, 0) * w(0, 1) - w(1, 1),
        NiId::EN => negativity(m)?.raw,
    })
}

/// Closed forms valid for single-mode Gaussian fields, written through
/// Q = 2⟨W_s⟩⟨W_i⟩ − ⟨W_sW_i⟩.
pub fn evaluate_ni_gaussian(id: NiId, mean_s: f64, mean_i: f64, cross: f64) -> Result<f64> {
    let q = 2.0 * mean_s * mean_i - cross;
    let d = mean_s - mean_i;
    Ok(match id {
        NiId::M => q * (2.0 * mean_s * mean_i + cross),
        NiId::E2 => 2.0 * q + 2.0 * d * d,
        NiId::E3 => {
            let sum = mean_s + mean_i;
            2.0 * q * sum + 2.0 * (mean_s.powi(3) + mean_i.powi(3)) + 4.0 * d * d * sum
        }
        NiId::Q => q,
        NiId::EN => {
            return Err(Error::domain("negativity has no moment closed form here"));
        }
    })
}

/// Sign-normalized identifier: negative exactly when non-classicality (or
/// entanglement) is indicated.
fn margin(id: NiId, m: &IntensityMomentSet, clamp: f64) -> Result<f64> {
    match id {
        NiId::EN => Ok(-negativity_with_clamp(m, clamp)?.raw),
        _ => evaluate_ni(id, m),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Negativity {
    /// Value of the formula before clamping at zero.
    pub raw: f64,
    pub b_p: f64,
    pub b_s: f64,
    pub b_i: f64,
    pub entangled: bool,
    /// A slightly negative b_s or b_i was set to zero.
    pub clamped: bool,
}

impl Negativity {
    /// E_N reported as an entanglement measure: max(raw, 0).
    pub fn value(&self) -> f64 {
        self.raw.max(0.0)
    }
}

/// Gaussian negativity of the single-mode moments with the default clamp.
pub fn negativity(m: &IntensityMomentSet) -> Result<Negativity> {
    negativity_with_clamp(m, NEGATIVE_CLAMP)
}

/// Gaussian negativity; b_s or b_i down to −`clamp` are set to zero, below
/// that the reduction is rejected as non-physical.
pub fn negativity_with_clamp(m: &IntensityMomentSet, clamp: f64) -> Result<Negativity> {
    if m.scale != ModeScale::SingleMode {
        return Err(Error::ModeScale("negativity needs single-mode moments".into()));
    }
    m.require_order(2, "negativity")?;
    let cov = m.get(1, 1) - m.mean_s() * m.mean_i();
    let disc = 0.25 + cov;
    if disc < 0.0 {
        return Err(Error::NonPhysical(format!(
            "1/4 + covariance is negative ({disc:e})"
        )));
    }
    let b_p = -0.5 + disc.sqrt();
    let mut clamped = false;
    let mut fix = |b: f64, arm: &str| -> Result<f64> {
        if b >= 0.0 {
            Ok(b)
        } else if b >= -clamp {
            clamped = true;
            Ok(0.0)
        } else {
            Err(Error::NonPhysical(format!("{arm} thermal part {b:e} is negative")))
        }
    };
    let b_s = fix(m.mean_s() - b_p, "signal")?;
    let b_i = fix(m.mean_i() - b_p, "idler")?;
    let num = 2.0 * b_p - (b_s + b_i) * (4.0 * b_p + 1.0) - 4.0 * b_s * b_i
        + ((b_s - b_i).powi(2) + 4.0 * b_p * (b_p + 1.0)).sqrt();
    let den = 4.0 * (b_s + b_i) * (2.0 * b_p + 1.0) + 8.0 * b_s * b_i + 2.0;
    let raw = num / den;
    Ok(Negativity {
        raw,
        b_p,
        b_s,
        b_i,
        entangled: raw > 0.0,
        clamped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Depth {
    pub tau: f64,
    /// No threshold below τ = 1.
    pub saturated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingParameter {
    pub nu: f64,
    /// No threshold below [`NCP_LIMIT`]; `nu` then holds the limit.
    pub unbounded: bool,
}

/// Search settings shared by the depth and counting-parameter solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub tolerance: f64,
    /// Clamp tolerance used when the negativity is the identifier.
    pub negativity_clamp: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            tolerance: DEFAULT_TOLERANCE,
            negativity_clamp: NEGATIVE_CLAMP,
        }
    }
}

/// τ = (1 − s_th)/2 where the s-ordered moments first make the identifier
/// non-negative. Zero for classical input.
pub fn nonclassicality_depth(id: NiId, m: &IntensityMomentSet, opts: &SearchOptions) -> Result<Depth> {
    if !m.is_normally_ordered() {
        return Err(Error::domain("depth search starts from normally ordered moments"));
    }
    let clamp = opts.negativity_clamp;
    let mut g = |t: f64| margin(id, &shift_ordering(m, t), clamp);
    if g(0.0)? >= 0.0 {
        return Ok(Depth {
            tau: 0.0,
            saturated: false,
        });
    }
    match expand_bracket(&mut g, 1.0, 1.0)? {
        Bracketed::Found { lo, hi } => Ok(Depth {
            tau: bisect(g, lo, hi, 0.5 * opts.tolerance)?,
            saturated: false,
        }),
        Bracketed::Exhausted { .. } => Ok(Depth {
            tau: 1.0,
            saturated: true,
        }),
    }
}

/// Smallest mean ν of single-mode thermal noise, added equally to both arms,
/// that makes the identifier non-negative. Evaluated on moments.
pub fn ncp(id: NiId, m: &IntensityMomentSet, opts: &SearchOptions) -> Result<CountingParameter> {
    if !m.is_normally_ordered() {
        return Err(Error::domain("counting parameter needs normally ordered moments"));
    }
    let clamp = opts.negativity_clamp;
    let g = |nu: f64| margin(id, &add_thermal_noise_to_moments(m, nu, nu, 1.0)?, clamp);
    search_ncp(g, opts.tolerance)
}

/// [`ncp`] evaluated by convolving the distribution with the noise and
/// recomputing moments. `single_mode` reduces the noisy moments with the
/// given mode count first (needed for Q and EN).
pub fn ncp_from_distribution(
    id: NiId,
    dist: &JointDistribution,
    single_mode: Option<f64>,
    truncation: &Truncation,
    opts: &SearchOptions,
) -> Result<CountingParameter> {
    let clamp = opts.negativity_clamp;
    let order = id.order();
    let g = |nu: f64| -> Result<f64> {
        let noise = ThermalFieldSpec::new(nu, 1.0)?;
        let noisy = convolve_noise(dist, &noise, &noise, truncation)?;
        let mut m = intensity_moments_of(&noisy, order)?;
        if let Some(k) = single_mode {
            m = reduce_to_single_mode(&m, k)?;
        }
        margin(id, &m, clamp)
    };
    search_ncp(g, opts.tolerance)
}

fn search_ncp<G>(mut g: G, tol: f64) -> Result<CountingParameter>
where
    G: FnMut(f64) -> Result<f64>,
{
    if g(0.0)? >= 0.0 {
        return Ok(CountingParameter {
            nu: 0.0,
            unbounded: false,
        });
    }
    match expand_bracket(&mut g, 1.0, NCP_LIMIT)? {
        Bracketed::Found { lo, hi } => Ok(CountingParameter {
            nu: bisect(g, lo, hi, tol)?,
            unbounded: false,
        }),
        Bracketed::Exhausted { last } => Ok(CountingParameter {
            nu: last,
            unbounded: true,
        }),
    }
}

/// Identifier values, depths and counting parameters for M, E2 and E3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentifierTriple {
    pub m: f64,
    pub e2: f64,
    pub e3: f64,
}

impl IdentifierTriple {
    pub fn get(&self, id: NiId) -> f64 {
        match id {
            NiId::M => self.m,
            NiId::E2 => self.e2,
            NiId::E3 => self.e3,
            _ => f64::NAN,
        }
    }

    fn set(&mut self, id: NiId, v: f64) {
        match id {
            NiId::M => self.m = v,
            NiId::E2 => self.e2 = v,
            NiId::E3 => self.e3 = v,
            _ => {}
        }
    }
}

/// Figures of the whole multi-mode beam.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WholeBeamFigures {
    pub values: IdentifierTriple,
    pub tau: IdentifierTriple,
    pub nu: IdentifierTriple,
    /// Identifiers whose depth hit τ = 1 or whose counting parameter hit the limit.
    pub saturated: Vec<NiId>,
}

/// Figures of one typical paired mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleModeFigures {
    pub mode_count: f64,
    pub q: f64,
    pub m: f64,
    pub e2: f64,
    pub negativity: Negativity,
    pub e_n: f64,
    pub tau_m: f64,
    pub tau_e2: f64,
    pub tau_en: f64,
    pub nu_en: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantifierReport {
    pub branch: Branch,
    pub mean_s: f64,
    pub mean_i: f64,
    /// Undefined for vacuum input.
    pub r: Option<f64>,
    pub modes: Option<ModeEstimate>,
    /// The mode count could not be estimated and K = 1 was used.
    pub mode_fallback: bool,
    pub whole_beam: WholeBeamFigures,
    /// Absent when the mode count could not be estimated or the reduction
    /// was non-physical.
    pub single_mode: Option<SingleModeFigures>,
    /// Why `single_mode` is absent.
    pub single_mode_error: Option<String>,
}

/// All figures from normally ordered whole-beam moments (order ≥ 3).
///
/// The mode count comes from the moments themselves unless `modes` is given;
/// when it cannot be estimated (e.g. vacuum or coherent arms) K = 1 is used
/// and flagged.
pub fn quantify(m: &IntensityMomentSet, modes: Option<f64>, opts: &SearchOptions) -> Result<QuantifierReport> {
    if m.scale != ModeScale::WholeBeam {
        return Err(Error::ModeScale("quantify expects whole-beam moments".into()));
    }
    m.require_order(3, "quantify")?;
    let r = if m.mean_s() + m.mean_i() > 0.0 {
        Some(noise_reduction_factor(m)?)
    } else {
        None
    };
    let mut whole = WholeBeamFigures::default();
    for id in [NiId::M, NiId::E2, NiId::E3] {
        whole.values.set(id, evaluate_ni(id, m)?);
        let d = nonclassicality_depth(id, m, opts)?;
        let n = ncp(id, m, opts)?;
        whole.tau.set(id, d.tau);
        whole.nu.set(id, n.nu);
        if d.saturated || n.unbounded {
            whole.saturated.push(id);
        }
    }
    let estimate = estimate_modes(m).ok();
    let (k, mode_fallback) = match (modes, estimate) {
        (Some(k), _) => (k, false),
        (None, Some(e)) => (e.average.max(1.0), false),
        (None, None) => (1.0, true),
    };
    let (single_mode, single_mode_error) = match single_mode_figures(m, k, opts) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(QuantifierReport {
        branch: m.branch,
        mean_s: m.mean_s(),
        mean_i: m.mean_i(),
        r,
        modes: estimate,
        mode_fallback,
        whole_beam: whole,
        single_mode,
        single_mode_error,
    })
}

fn single_mode_figures(m: &IntensityMomentSet, k: f64, opts: &SearchOptions) -> Result<SingleModeFigures> {
    let w = reduce_to_single_mode(m, k)?;
    let neg = negativity_with_clamp(&w, opts.negativity_clamp)?;
    Ok(SingleModeFigures {
        mode_count: k,
        q: evaluate_ni(NiId::Q, &w)?,
        m: evaluate_ni(NiId::M, &w)?,
        e2: evaluate_ni(NiId::E2, &w)?,
        e_n: neg.value(),
        negativity: neg,
        tau_m: nonclassicality_depth(NiId::M, &w, opts)?.tau,
        tau_e2: nonclassicality_depth(NiId::E2, &w, opts)?.tau,
        tau_en: nonclassicality_depth(NiId::EN, &w, opts)?.tau,
        nu_en: ncp(NiId::EN, &w, opts)?.nu,
    })
}
