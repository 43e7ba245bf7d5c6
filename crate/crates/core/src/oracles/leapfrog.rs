use super::IntegratorConfig;
use crate::error::{Error, Result};
use crate::ode::{schedule, step_count};
use crate::par;
use crate::potential::PolynomialPotential;
use crate::states::{EnsembleMoments, TrajectoryEnsemble};

/// One kick-drift-kick step of size `h` for a block of particles, the kicks
/// using the force at `t + h / 2`. Returns the first escaped index in the
/// block.
fn kdk(block: &mut [crate::states::Particle], force: &[f64], m: f64, h: f64, bound: f64) -> Option<usize> {
    let half = 0.5 * h;
    let f = |x: f64| -crate::potential::horner(force, x);
    for (i, q) in block.iter_mut().enumerate() {
        q.p += half * f(q.x);
        q.x += h * q.p / m;
        q.p += half * f(q.x);
        if !(q.x.abs() <= bound) {
            return Some(i);
        }
    }
    None
}

/// Advances every particle with the symplectic kick-drift-kick map.
///
/// `observe(t, ensemble)` sees the initial state, every `stride`-th step and
/// the final state. A particle with `|x| > escape_bound` (or a non-finite
/// coordinate) stops the run with [`Error::Escape`].
pub fn leapfrog_evolve<F>(
    mut e: TrajectoryEnsemble,
    pot: &PolynomialPotential,
    cfg: &IntegratorConfig,
    escape_bound: f64,
    mut observe: F,
) -> Result<TrajectoryEnsemble>
where
    F: FnMut(f64, &TrajectoryEnsemble),
{
    cfg.validate()?;
    if !(escape_bound > 0.0) {
        return Err(Error::invalid("escape_bound", "must be positive"));
    }
    let m = pot.mass();
    observe(0.0, &e);
    let steps = step_count(cfg.dt, cfg.t_final);
    let sched: Vec<(f64, f64)> = schedule(cfg.dt, cfg.t_final).collect();
    let mut start = 0;
    while start < steps {
        // Advance chunk by chunk through every step up to the next sample.
        let mut end = start;
        while !cfg.sample_due(end, steps) {
            end += 1;
        }
        let window = &sched[start..=end];
        let forces: Vec<Vec<f64>> = window
            .iter()
            .map(|&(t, h)| pot.derivative_coefficients(1, t + 0.5 * h))
            .collect();
        let escapes = par::map_chunks_mut(e.particles_mut(), par::CHUNK, |c, block| {
            for (s, &(t, h)) in window.iter().enumerate() {
                if let Some(i) = kdk(block, &forces[s], m, h, escape_bound) {
                    return Some((c * par::CHUNK + i, block[i].x, t + h));
                }
            }
            None
        });
        if let Some((index, x, time)) = escapes.into_iter().flatten().min_by(|a, b| a.0.cmp(&b.0)) {
            return Err(Error::Escape { index, x, time });
        }
        let (t, h) = sched[end];
        let t_next = if end + 1 == steps { cfg.t_final } else { t + h };
        observe(t_next, &e);
        start = end + 1;
    }
    Ok(e)
}

/// Sampled moments of an evolving ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub moments: Vec<EnsembleMoments>,
    pub final_state: TrajectoryEnsemble,
}

/// [`leapfrog_evolve`] recording moments and their standard errors.
pub fn leapfrog_moments(
    e: TrajectoryEnsemble,
    pot: &PolynomialPotential,
    cfg: &IntegratorConfig,
    escape_bound: f64,
    order: usize,
) -> Result<EnsembleSeries> {
    let mut times = Vec::new();
    let mut moments = Vec::new();
    let final_state = leapfrog_evolve(e, pot, cfg, escape_bound, |t, e| {
        times.push(t);
        moments.push(EnsembleMoments::measure(e, order));
    })?;
    Ok(EnsembleSeries {
        times,
        moments,
        final_state,
    })
}
