use super::{fw_run_with, Domain, FwOptions, FwResult, Hooks, LinearMin, Objective, Start, StepSchedule};
use crate::error::{FwError, Result};
use crate::rng::FwRng;

/// Draws a candidate atom, possibly ignoring the gradient.
pub type Sampler<'a, D> = dyn Fn(&<D as Domain>::Grad, &mut FwRng) -> <D as Domain>::Atom + Sync + 'a;

/// Oracle that returns whatever the sampler proposes. It gives no bound on
/// its error, so `slack` is infinite.
pub fn randomized_lmo<D: Domain>(domain: &D, grad: &D::Grad, sampler: &Sampler<'_, D>, rng: &mut FwRng) -> LinearMin<D::Atom> {
    let atom = sampler(grad, rng);
    let value = domain.atom_value(&atom, grad);
    LinearMin { atom, value, slack: f64::INFINITY, matvecs: 0 }
}

/// Solver with a randomized oracle. Only line search is accepted, since a
/// bad sample must not make the objective worse.
pub fn fw_run_randomized<D, O>(
    objective: &O,
    domain: &D,
    start: Start<D::Atom>,
    opts: &FwOptions,
    sampler: &Sampler<'_, D>,
) -> Result<FwResult<D>>
where
    D: Domain,
    O: Objective<D::Point, D::Grad> + ?Sized,
{
    if opts.schedule != StepSchedule::LineSearch {
        return Err(FwError::InvalidInput("randomized oracle requires the line-search schedule".into()));
    }
    let lmo = move |_: &D::Point, g: &D::Grad, _: &super::LmoRequest, rng: &mut FwRng| {
        Ok(randomized_lmo(domain, g, sampler, rng))
    };
    fw_run_with(objective, domain, start, opts, Hooks { lmo: Some(Box::new(lmo)), observe: None, stop: None })
}
