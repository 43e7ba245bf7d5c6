use serde::{Deserialize, Serialize};

use super::IntegratorConfig;
use crate::error::{Error, Result};
use crate::ode::{schedule, step_count};
use crate::par;
use crate::potential::{horner, PolynomialPotential};
use crate::states::{sigma_n, Lattice, PhaseSpaceGrid};

/// Composition used for one time step of the split Liouville flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Kick-drift-kick, second order.
    Strang,
    /// Triple-jump composition of kick-drift-kick, fourth order.
    Yoshida4,
}

impl Splitting {
    fn weights(self) -> &'static [f64] {
        const CBRT2: f64 = 1.259_921_049_894_873_2;
        const W1: f64 = 1.0 / (2.0 - CBRT2);
        const W0: f64 = -CBRT2 / (2.0 - CBRT2);
        match self {
            Splitting::Strang => &[1.0],
            Splitting::Yoshida4 => &[W1, W0, W1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiouvilleConfig {
    pub integrator: IntegratorConfig,
    pub splitting: Splitting,
    /// Rows and columns counted as the boundary layer.
    pub boundary_width: usize,
    /// Largest fraction of `int |f|` allowed in the boundary layer.
    pub boundary_tolerance: f64,
}

impl LiouvilleConfig {
    pub fn new(integrator: IntegratorConfig) -> Self {
        LiouvilleConfig {
            integrator,
            splitting: Splitting::Strang,
            boundary_width: 2,
            boundary_tolerance: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.boundary_tolerance > 0.0) {
            return Err(Error::invalid("boundary_tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// `sigma_1..3` at the start and end of a run and their largest relative
/// excursion; in exact Liouville flow all three are constant, so the drift is
/// the interpolation-diffusion budget of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaBudget {
    pub initial: [f64; 3],
    pub last: [f64; 3],
    pub max_relative_drift: [f64; 3],
}

impl SigmaBudget {
    fn new(s: [f64; 3]) -> Self {
        SigmaBudget {
            initial: s,
            last: s,
            max_relative_drift: [0.0; 3],
        }
    }

    fn update(&mut self, s: [f64; 3]) {
        self.last = s;
        for i in 0..3 {
            let d = ((s[i] - self.initial[i]) / self.initial[i]).abs();
            self.max_relative_drift[i] = self.max_relative_drift[i].max(d);
        }
    }
}

fn sigmas(f: &PhaseSpaceGrid) -> [f64; 3] {
    [sigma_n(f, 1), sigma_n(f, 2), sigma_n(f, 3)]
}

/// Four-point Lagrange weights on nodes `-1, 0, 1, 2` at offset `u` in `[0, 1)`.
#[inline]
fn lagrange4(u: f64) -> [f64; 4] {
    let (a, b, c) = (u + 1.0, u - 1.0, u - 2.0);
    [-u * b * c / 6.0, a * b * c / 2.0, -a * u * c / 2.0, a * u * b / 6.0]
}

/// Base node and weights for reading a line at fractional index `f`.
#[inline]
fn stencil(f: f64) -> (isize, [f64; 4]) {
    let b = f.floor();
    (b as isize - 1, lagrange4(f - b))
}

#[inline]
fn sample(line: &[f64], base: isize, w: &[f64; 4]) -> f64 {
    let n = line.len() as isize;
    if base >= 0 && base + 3 < n {
        let b = base as usize;
        return w[0] * line[b] + w[1] * line[b + 1] + w[2] * line[b + 2] + w[3] * line[b + 3];
    }
    let mut acc = 0.0;
    for (a, wa) in w.iter().enumerate() {
        let i = base + a as isize;
        if i >= 0 && i < n {
            acc += wa * line[i as usize];
        }
    }
    acc
}

/// `f(x, p) <- f(x, p + tau V'(x))`: every `x` row shifts rigidly in `p`.
fn kick(l: &Lattice, force: &[f64], tau: f64, src: &[f64], dst: &mut [f64]) {
    par::map_chunks_mut(dst, l.np, |i, row| {
        let shift = tau * horner(force, l.x(i)) / l.dp;
        let line = &src[i * l.np..(i + 1) * l.np];
        for (j, out) in row.iter_mut().enumerate() {
            let (base, w) = stencil(j as f64 + shift);
            *out = sample(line, base, &w);
        }
    });
}

/// `f(x, p) <- f(x - tau p / m, p)`: every `p` column shifts rigidly in `x`.
fn drift(l: &Lattice, m: f64, tau: f64, src: &[f64], dst: &mut [f64]) {
    let cols: Vec<(isize, [f64; 4])> = (0..l.np).map(|j| stencil(-tau * l.p(j) / (m * l.dx))).collect();
    let (nx, np) = (l.nx as isize, l.np);
    par::map_chunks_mut(dst, l.np, |i, row| {
        for (j, out) in row.iter_mut().enumerate() {
            let (base, w) = cols[j];
            let mut acc = 0.0;
            for (a, wa) in w.iter().enumerate() {
                let r = i as isize + base + a as isize;
                if r >= 0 && r < nx {
                    acc += wa * src[r as usize * np + j];
                }
            }
            *out = acc;
        }
    });
}

/// One step `t -> t + h`; kicks use the force at the midpoint of each
/// kick-drift-kick stage.
fn step(
    l: &Lattice,
    pot: &PolynomialPotential,
    splitting: Splitting,
    t: f64,
    h: f64,
    cur: &mut Vec<f64>,
    next: &mut Vec<f64>,
) {
    let m = pot.mass();
    let mut s = t;
    for &w in splitting.weights() {
        let tau = w * h;
        let force = pot.derivative_coefficients(1, s + 0.5 * tau);
        kick(l, &force, 0.5 * tau, cur, next);
        drift(l, m, tau, next, cur);
        kick(l, &force, 0.5 * tau, cur, next);
        std::mem::swap(cur, next);
        s += tau;
    }
}

/// Semi-Lagrangian classical Liouville evolution by directional splitting:
/// kicks and drifts are rigid shifts of grid lines, resampled with
/// four-point Lagrange interpolation.
///
/// A rigid shift reproduces cubic polynomials exactly, so while the density
/// stays inside the box every moment of order at most 3 follows the
/// symplectic map of the chosen splitting with no interpolation error; only
/// the shape (and with it `sigma_n`) diffuses.
///
/// `observe(t, f)` sees the initial grid, every `stride`-th step and the
/// final grid. A boundary layer holding more than `boundary_tolerance` of the
/// mass stops the run with [`Error::GridClipped`].
pub fn liouville_evolve<F>(
    f: PhaseSpaceGrid,
    pot: &PolynomialPotential,
    cfg: &LiouvilleConfig,
    mut observe: F,
) -> Result<(PhaseSpaceGrid, SigmaBudget)>
where
    F: FnMut(f64, &PhaseSpaceGrid) -> Result<()>,
{
    cfg.validate()?;
    let check = |f: &PhaseSpaceGrid, t: f64| -> Result<()> {
        let b = f.boundary_fraction(cfg.boundary_width);
        if b > cfg.boundary_tolerance {
            return Err(Error::GridClipped(format!(
                "{b:e} of the mass sits in the boundary layer at t = {t}"
            )));
        }
        Ok(())
    };
    check(&f, 0.0)?;
    let mut budget = SigmaBudget::new(sigmas(&f));
    observe(0.0, &f)?;
    let ic = cfg.integrator;
    let l = f.lattice;
    let steps = step_count(ic.dt, ic.t_final);
    let mut cur = f;
    let mut next = cur.values.clone();
    for (i, (t, h)) in schedule(ic.dt, ic.t_final).enumerate() {
        step(&l, pot, cfg.splitting, t, h, &mut cur.values, &mut next);
        if ic.sample_due(i, steps) {
            let t_next = if i + 1 == steps { ic.t_final } else { t + h };
            check(&cur, t_next)?;
            budget.update(sigmas(&cur));
            observe(t_next, &cur)?;
        }
    }
    Ok((cur, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{moments_from_grid, Flavor, GaussianState};
    use std::f64::consts::PI;

    #[test]
    fn lagrange_weights_reproduce_cubics() {
        for u in [0.0, 0.25, 0.5, 0.9] {
            let w = lagrange4(u);
            for k in 0..4 {
                let s: f64 = (0..4).map(|a| w[a] * (a as f64 - 1.0).powi(k)).sum();
                assert!((s - u.powi(k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn harmonic_rotation_returns_after_a_period() {
        let v = PolynomialPotential::quadratic(1.0, 1.0).unwrap();
        let g = GaussianState::new(1.0, 0.0, 0.3, 0.0, 0.3).unwrap();
        let l = Lattice::centered(256, 256, 0.0, 5.0, 0.0, 5.0).unwrap();
        let f0 = PhaseSpaceGrid::from_gaussian(&g, l).unwrap();
        let period = 2.0 * PI;
        let cfg = LiouvilleConfig::new(IntegratorConfig::new(period / 200.0, period, 200).unwrap());
        let (f1, budget) = liouville_evolve(f0.clone(), &v, &cfg, |_, _| Ok(())).unwrap();
        let err = f1.l2_distance(&f0);
        assert!(err < 1e-2, "L2 error {err}");
        assert!(budget.max_relative_drift[0] < 1e-6);
    }

    #[test]
    fn harmonic_moments_follow_the_exact_rotation() {
        let v = PolynomialPotential::quadratic(1.0, 1.0).unwrap();
        let g = GaussianState::new(1.0, -0.5, 0.3, 0.1, 0.4).unwrap();
        let l = Lattice::centered(128, 128, 0.0, 6.0, 0.0, 6.0).unwrap();
        let period = 2.0 * PI;
        let mut cfg = LiouvilleConfig::new(IntegratorConfig::new(period / 400.0, 2.0 * period, 100).unwrap());
        cfg.splitting = Splitting::Yoshida4;
        liouville_evolve(PhaseSpaceGrid::from_gaussian(&g, l).unwrap(), &v, &cfg, |t, f| {
            let m = moments_from_grid(f, 2, Flavor::Classical);
            let (c, s) = (t.cos(), t.sin());
            let x = c * 1.0 - s * 0.5;
            let p = -s * 1.0 - c * 0.5;
            let cxx = c * c * 0.3 + 2.0 * c * s * 0.1 + s * s * 0.4;
            assert!((m.mean_x() - x).abs() < 1e-7, "t={t} {}", m.mean_x() - x);
            assert!((m.mean_p() - p).abs() < 1e-7);
            assert!((m.covariance().0 - cxx).abs() < 1e-7);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn free_shear_matches_analytic_density() {
        let v = PolynomialPotential::free(1.0).unwrap();
        let g = GaussianState::new(0.0, 0.0, 0.4, 0.0, 0.4).unwrap();
        let l = Lattice::centered(256, 256, 0.0, 10.0, 0.0, 5.0).unwrap();
        let cfg = LiouvilleConfig::new(IntegratorConfig::new(0.05, 2.0, 40).unwrap());
        let (f, budget) =
            liouville_evolve(PhaseSpaceGrid::from_gaussian(&g, l).unwrap(), &v, &cfg, |_, _| Ok(())).unwrap();
        let t = 2.0;
        let sheared = GaussianState::new(0.0, 0.0, 0.4 + 0.4 * t * t, 0.4 * t, 0.4).unwrap();
        let exact = PhaseSpaceGrid::from_gaussian(&sheared, l).unwrap();
        assert!(f.l2_distance(&exact) < 1e-3, "{}", f.l2_distance(&exact));
        assert!(budget.max_relative_drift[0] < 1e-6);
        let m = moments_from_grid(&f, 2, Flavor::Classical);
        assert!((m.covariance().0 - sheared.cxx).abs() < 1e-4);
    }

    #[test]
    fn refinement_shrinks_sigma_drift() {
        let v = PolynomialPotential::quartic(0.5, 0.25, 1.0).unwrap();
        let g = GaussianState::new(1.0, 0.0, 0.05, 0.0, 0.05).unwrap();
        let coarse = Lattice::centered(128, 128, 0.0, 3.0, 0.0, 5.0).unwrap();
        let cfg = LiouvilleConfig::new(IntegratorConfig::new(0.02, 4.0, 50).unwrap());
        let run = |l: Lattice| {
            let f = PhaseSpaceGrid::from_gaussian(&g, l).unwrap();
            liouville_evolve(f, &v, &cfg, |_, _| Ok(())).unwrap().1
        };
        let a = run(coarse);
        let b = run(coarse.refined());
        for k in 1..3 {
            assert!(a.max_relative_drift[k] > 4.0 * b.max_relative_drift[k], "{a:?} {b:?}");
        }
    }

    #[test]
    fn boundary_mass_aborts() {
        let v = PolynomialPotential::free(1.0).unwrap();
        let g = GaussianState::new(0.0, 2.0, 0.2, 0.0, 0.2).unwrap();
        let l = Lattice::centered(64, 64, 0.0, 4.0, 0.0, 4.0).unwrap();
        let cfg = LiouvilleConfig::new(IntegratorConfig::new(0.05, 10.0, 5).unwrap());
        let r = liouville_evolve(PhaseSpaceGrid::from_gaussian(&g, l).unwrap(), &v, &cfg, |_, _| Ok(()));
        assert!(matches!(r, Err(Error::GridClipped(_))));
    }
}
