//! Bounded scalar minimization: coarse scan followed by golden-section
//! refinement.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Result of a bounded minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub x: T,
    pub value: T,
    pub evaluations: usize,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `tol`. Returns the bracket midpoint.
pub fn golden_section<T, F>(mut f: F, lo: T, hi: T, tol: T) -> Result<Minimum<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if !(lo <= hi) || !(tol > T::zero()) {
        return Err(Error::InvalidInput(format!("bad bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    // 1/φ and 1/φ²
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let inv_phi2 = T::one() - inv_phi;
    let (mut a, mut b) = (lo, hi);
    let mut c = a + inv_phi2 * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + inv_phi2 * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        evaluations += 1;
        if evaluations > 10_000 {
            break;
        }
    }
    let x = (a + b) / T::lit(2.0);
    let value = f(x);
    Ok(Minimum { x, value, evaluations: evaluations + 1 })
}

/// Scans `f` on a uniform grid of spacing `step` over `[lo, hi]` (endpoints
/// included), then refines the best cell with golden-section search.
///
/// The scan guards against settling in a shallow local minimum far from
/// the global one.
pub fn scan_then_golden<T, F>(mut f: F, lo: T, hi: T, step: T, tol: T) -> Result<Minimum<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if !(step > T::zero()) {
        return Err(Error::InvalidInput(format!("scan step {step} must be positive")));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidInput(format!("bad bracket [{lo}, {hi}]")));
    }
    let cells = ((hi - lo) / step).ceil().to_usize().unwrap_or(0).max(1);
    let at = |k: usize| if k >= cells { hi } else { lo + step * T::from_usize_lossy(k) };
    let mut best = (0usize, T::infinity());
    for k in 0..=cells {
        let v = f(at(k));
        if v < best.1 {
            best = (k, v);
        }
    }
    let a = at(best.0.saturating_sub(1));
    let b = at((best.0 + 1).min(cells));
    let refined = golden_section(&mut f, a, b, tol)?;
    let best_x = at(best.0);
    // Keep the scanned point if refinement somehow did worse.
    Ok(if refined.value <= best.1 {
        Minimum { evaluations: refined.evaluations + cells + 1, ..refined }
    } else {
        Minimum { x: best_x, value: best.1, evaluations: refined.evaluations + cells + 1 }
    })
}
