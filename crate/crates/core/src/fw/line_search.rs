use super::{Domain, Objective};
use crate::error::{ensure_finite, Result};

const BISECTION_STEPS: usize = 60;
const DERIVATIVE_TOL: f64 = 1e-10;

/// Best step toward `atom` from `x`.
///
/// Uses the objective's closed form when it has one, otherwise bisects the
/// derivative `<s - x, grad f(x + alpha (s - x))>` on `[0, 1]`. The result
/// is never worse than the grid `{0, 2/(k+2), 1}`.
pub fn line_search_alpha<D, O>(objective: &O, domain: &D, x: &D::Point, atom: &D::Atom, k: usize) -> Result<f64>
where
    D: Domain,
    O: Objective<D::Point, D::Grad> + ?Sized,
{
    let at = |alpha: f64| {
        let mut p = x.clone();
        domain.blend(&mut p, alpha, atom);
        p
    };
    let phi = |alpha: f64| ensure_finite(objective.value(&at(alpha)), "line search value", k);
    let dphi = |alpha: f64| {
        let g = objective.gradient(&at(alpha));
        ensure_finite(domain.atom_value(atom, &g) - domain.inner(x, &g), "line search slope", k)
    };

    let closed = objective
        .line_search(x, &domain.atom_point(atom))
        .filter(|a| a.is_finite())
        .map(|a| a.clamp(0.0, 1.0));
    let candidate = match closed {
        Some(a) => a,
        None => bisect(dphi)?,
    };

    let mut best = (candidate, phi(candidate)?);
    for alpha in [0.0, 2.0 / (k as f64 + 2.0), 1.0] {
        let v = phi(alpha)?;
        if v < best.1 {
            best = (alpha, v);
        }
    }
    Ok(best.0)
}

fn bisect(dphi: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if dphi(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    if dphi(1.0)? <= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let d = dphi(mid)?;
        if d.abs() <= DERIVATIVE_TOL {
            return Ok(mid);
        }
        if d > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
