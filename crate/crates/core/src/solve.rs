//! Bracketing and bisection for threshold searches.
//!
//! The thresholds sought here are the first point where a "margin" function,
//! negative at the start of the search, becomes non-negative.

use crate::error::{Error, Result};

/// Bisection steps allowed before giving up.
pub const MAX_BISECTION_STEPS: usize = 200;

/// Points probed when scanning a bracket for its first sign change.
pub const SCAN_POINTS: usize = 64;

/// Outcome of a bracket search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bracketed {
    /// `g(lo) < 0 <= g(hi)`.
    Found { lo: f64, hi: f64 },
    /// Still negative at the largest point tried.
    Exhausted { last: f64 },
}

/// Smallest x in (lo, hi] with g(x) ≥ 0 to absolute tolerance `tol`,
/// given g(lo) < 0 ≤ g(hi).
pub fn bisect<G>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::domain("bisection tolerance must be positive"));
    }
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::Convergence(format!(
            "bisection did not reach tolerance {tol:e} in {MAX_BISECTION_STEPS} steps (width {:e})",
            hi - lo
        )))
    }
}

/// Scans [lo, hi] on an even grid and narrows to the first sub-interval whose
/// right end is non-negative. Assumes g(lo) < 0.
pub fn first_crossing<G>(g: &mut G, lo: f64, hi: f64) -> Result<Option<(f64, f64)>>
where
    G: FnMut(f64) -> Result<f64>,
{
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut prev = lo;
    for i in 1..=SCAN_POINTS {
        let x = if i == SCAN_POINTS { hi } else { lo + step * i as f64 };
        if g(x)? >= 0.0 {
            return Ok(Some((prev, x)));
        }
        prev = x;
    }
    Ok(None)
}

/// Grows [0, initial] by doubling until g becomes non-negative somewhere in
/// the newest segment or `limit` is passed. Assumes g(0) < 0.
pub fn expand_bracket<G>(g: &mut G, initial: f64, limit: f64) -> Result<Bracketed>
where
    G: FnMut(f64) -> Result<f64>,
{
    if !(initial > 0.0) {
        return Err(Error::domain("initial bracket must be positive"));
    }
    let mut lo = 0.0;
    let mut hi = initial;
    loop {
        if let Some((a, b)) = first_crossing(g, lo, hi)? {
            return Ok(Bracketed::Found { lo: a, hi: b });
        }
        if hi >= limit {
            return Ok(Bracketed::Exhausted { last: hi });
        }
        lo = hi;
        hi = (2.0 * hi).min(limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_first_root_of_a_quadratic() {
        // negative outside (0.3, 0.7): the scan must not skip to the far side
        let mut g = |x: f64| Ok(-(x - 0.3) * (x - 0.7));
        let b = expand_bracket(&mut g, 1.0, 10.0).unwrap();
        let Bracketed::Found { lo, hi } = b else { panic!() };
        let root = bisect(g, lo, hi, 1e-12).unwrap();
        assert!((root - 0.3).abs() < 1e-11);
    }

    #[test]
    fn bracket_growth_reaches_far_roots() {
        let mut g = |x: f64| Ok(x - 37.5);
        let Bracketed::Found { lo, hi } = expand_bracket(&mut g, 1.0, 1e6).unwrap() else {
            panic!()
        };
        let root = bisect(g, lo, hi, 1e-10).unwrap();
        assert!((root - 37.5).abs() < 1e-9);
    }

    #[test]
    fn exhausted_bracket_is_reported() {
        let mut g = |_x: f64| Ok(-1.0);
        assert_eq!(
            expand_bracket(&mut g, 1.0, 8.0).unwrap(),
            Bracketed::Exhausted { last: 8.0 }
        );
    }

    #[test]
    fn errors_propagate() {
        let mut g = |_x: f64| -> Result<f64> { Err(Error::domain("boom")) };
        assert!(expand_bracket(&mut g, 1.0, 8.0).is_err());
        assert!(bisect(|x| Ok(x), -1.0, 1.0, 0.0).is_err());
    }
}
