use num_complex::Complex64;

use super::IntegratorConfig;
use crate::error::{Error, Result};
use crate::ode::{schedule, step_count};
use crate::potential::PolynomialPotential;
use crate::states::wave::{FftPair, MOMENTUM_EDGE};
use crate::states::{moments_from_wavefunction, MomentSet, WavefunctionGrid};

fn check_edges(w: &WavefunctionGrid, t: f64) -> Result<()> {
    let px = w.position_edge_ratio();
    if !(px < MOMENTUM_EDGE) {
        return Err(Error::GridClipped(format!(
            "position density at the box edge reached {px:e} of its peak at t = {t}"
        )));
    }
    let pp = w.momentum_edge_ratio();
    if !(pp < MOMENTUM_EDGE) {
        return Err(Error::GridClipped(format!(
            "momentum density at the Nyquist edge reached {pp:e} of its peak at t = {t}"
        )));
    }
    Ok(())
}

/// Strang-split Schrödinger evolution: half a kinetic step in momentum space,
/// a full potential step with `V` at the midpoint time, and another half
/// kinetic step.
///
/// `observe(t, psi)` sees the initial state, every `stride`-th step and the
/// final state; both edge densities are checked at those times.
pub fn splitstep_evolve<F>(
    w: WavefunctionGrid,
    pot: &PolynomialPotential,
    cfg: &IntegratorConfig,
    mut observe: F,
) -> Result<WavefunctionGrid>
where
    F: FnMut(f64, &WavefunctionGrid) -> Result<()>,
{
    cfg.validate()?;
    if (w.mass() - pot.mass()).abs() > 1e-15 * pot.mass() {
        return Err(Error::invalid(
            "mass",
            "wavefunction and potential disagree on the mass",
        ));
    }
    check_edges(&w, 0.0)?;
    observe(0.0, &w)?;
    let grid = *w.grid();
    let n = grid.n;
    let hbar = w.hbar();
    let m = pot.mass();
    let fft = FftPair::new(n);
    let inv_n = 1.0 / n as f64;
    // Kinetic propagator for a duration `tau`, including the 1/n of the
    // inverse transform.
    let kinetic = |tau: f64| -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let p = hbar * grid.wavenumber(k);
                Complex64::from_polar(inv_n, -p * p / (2.0 * m) * tau / hbar)
            })
            .collect()
    };
    let potential = |t: f64, h: f64| -> Vec<Complex64> {
        let c = pot.coefficients_at(t);
        (0..n)
            .map(|j| Complex64::from_polar(1.0, -crate::potential::horner(&c, grid.x(j)) * h / hbar))
            .collect()
    };
    let dt = cfg.dt;
    let kin_half = kinetic(0.5 * dt);
    let kin_full = kinetic(dt);
    let kin_for = |tau: f64| -> std::borrow::Cow<'_, [Complex64]> {
        if tau == 0.5 * dt {
            std::borrow::Cow::Borrowed(&kin_half)
        } else if tau == dt {
            std::borrow::Cow::Borrowed(&kin_full)
        } else {
            std::borrow::Cow::Owned(kinetic(tau))
        }
    };
    let static_phase = pot.is_static().then(|| potential(0.0, dt));
    let steps = step_count(dt, cfg.t_final);
    let mut w = w;
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.forward.get_inplace_scratch_len()];
    // Half kinetic step still owed from the previous step; consecutive half
    // steps are fused so each step costs one transform pair.
    let mut owed = 0.0;
    for (i, (t, h)) in schedule(dt, cfg.t_final).enumerate() {
        let psi = w.amplitudes_mut();
        fft.forward.process_with_scratch(psi, &mut scratch);
        let k = kin_for(owed + 0.5 * h);
        psi.iter_mut().zip(k.iter()).for_each(|(z, k)| *z *= k);
        fft.inverse.process_with_scratch(psi, &mut scratch);
        match &static_phase {
            Some(v) if h == dt => psi.iter_mut().zip(v).for_each(|(z, v)| *z *= v),
            _ => {
                let v = potential(t + 0.5 * h, h);
                psi.iter_mut().zip(&v).for_each(|(z, v)| *z *= v);
            }
        }
        if cfg.sample_due(i, steps) {
            fft.forward.process_with_scratch(psi, &mut scratch);
            let k = kin_for(0.5 * h);
            psi.iter_mut().zip(k.iter()).for_each(|(z, k)| *z *= k);
            fft.inverse.process_with_scratch(psi, &mut scratch);
            owed = 0.0;
            let t_next = if i + 1 == steps { cfg.t_final } else { t + h };
            check_edges(&w, t_next)?;
            observe(t_next, &w)?;
        } else {
            owed = 0.5 * h;
        }
    }
    Ok(w)
}

/// [`splitstep_evolve`] recording Weyl-ordered moments at every sample.
pub fn splitstep_moments(
    w: WavefunctionGrid,
    pot: &PolynomialPotential,
    cfg: &IntegratorConfig,
    order: usize,
) -> Result<(Vec<f64>, Vec<MomentSet>, WavefunctionGrid)> {
    let mut times = Vec::new();
    let mut moments = Vec::new();
    let last = splitstep_evolve(w, pot, cfg, |t, w| {
        times.push(t);
        moments.push(moments_from_wavefunction(w, order)?);
        Ok(())
    })?;
    Ok((times, moments, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{wigner_transform, GaussianState, PositionGrid};
    use std::f64::consts::PI;

    #[test]
    fn coherent_state_follows_the_classical_orbit() {
        let v = PolynomialPotential::quadratic(1.0, 1.0).unwrap();
        let g = GaussianState::coherent(1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let grid = PositionGrid::centered(64, 0.0, 10.0).unwrap();
        let w = WavefunctionGrid::from_gaussian(&g, grid, 1.0, 1.0).unwrap();
        let period = 2.0 * PI;
        let cfg = IntegratorConfig::new(period / 400_000.0, 10.0 * period, 40_000).unwrap();
        let (times, moments, last) = splitstep_moments(w, &v, &cfg, 2).unwrap();
        for (t, m) in times.iter().zip(&moments) {
            assert!((m.mean_x() - t.cos()).abs() < 1e-8, "t={t} x={}", m.mean_x());
        }
        assert!((last.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn free_gaussian_spreads_analytically() {
        let v = PolynomialPotential::free(1.0).unwrap();
        let g = GaussianState::pure(0.0, 0.0, 0.5, 0.0, 1.0).unwrap();
        let grid = PositionGrid::centered(256, 0.0, 20.0).unwrap();
        let w = WavefunctionGrid::from_gaussian(&g, grid, 1.0, 1.0).unwrap();
        let cfg = IntegratorConfig::new(0.01, 3.0, 100).unwrap();
        let (times, moments, _) = splitstep_moments(w, &v, &cfg, 2).unwrap();
        for (t, m) in times.iter().zip(&moments) {
            let cxx = 0.5 + g.cpp * t * t;
            assert!((m.covariance().0 - cxx).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn free_gaussian_wigner_stays_non_negative() {
        let v = PolynomialPotential::free(1.0).unwrap();
        let g = GaussianState::pure(0.5, 1.0, 0.3, 0.1, 1.0).unwrap();
        let grid = PositionGrid::centered(256, 2.0, 24.0).unwrap();
        let w = WavefunctionGrid::from_gaussian(&g, grid, 1.0, 1.0).unwrap();
        let cfg = IntegratorConfig::new(0.01, 2.0, 50).unwrap();
        splitstep_evolve(w, &v, &cfg, |_, w| {
            let f = wigner_transform(w)?;
            assert!(f.min() >= -1e-8 * f.max(), "{} {}", f.min(), f.max());
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn clipping_aborts() {
        let v = PolynomialPotential::free(1.0).unwrap();
        let g = GaussianState::pure(0.0, 0.0, 0.2, 0.0, 1.0).unwrap();
        let grid = PositionGrid::centered(64, 0.0, 6.0).unwrap();
        let w = WavefunctionGrid::from_gaussian(&g, grid, 1.0, 1.0).unwrap();
        let cfg = IntegratorConfig::new(0.01, 20.0, 10).unwrap();
        assert!(matches!(
            splitstep_evolve(w, &v, &cfg, |_, _| Ok(())),
            Err(Error::GridClipped(_))
        ));
    }
}
