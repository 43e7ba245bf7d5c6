//! Every treatment is exact for a harmonic oscillator, so each one is checked
//! against the closed-form rotation of the mean and covariance.

use std::f64::consts::PI;

use phaseflow::gaussian::{propagate, Rule, TdvpState};
use phaseflow::hierarchy::{integrate_hierarchy, Closure, HierarchySpec};
use phaseflow::oracles::{
    leapfrog_moments, liouville_evolve, splitstep_moments, IntegratorConfig, LiouvilleConfig, Splitting,
};
use phaseflow::states::{
    moments_from_gaussian, moments_from_grid, sample_ensemble, Lattice, PhaseSpaceGrid, PositionGrid, WavefunctionGrid,
};
use phaseflow::{Flavor, GaussianState, PolynomialPotential};

const HBAR: f64 = 1.0;

fn start() -> GaussianState {
    GaussianState::pure(1.0, 0.5, 0.3, 0.1, HBAR).unwrap()
}

fn oscillator() -> PolynomialPotential {
    PolynomialPotential::quadratic(1.0, 1.0).unwrap()
}

/// `(mean_x, mean_p, cxx, cxp, cpp)` after a rotation by `t`.
fn exact(t: f64) -> [f64; 5] {
    let g = start();
    let (c, s) = (t.cos(), t.sin());
    [
        g.mean_x * c + g.mean_p * s,
        g.mean_p * c - g.mean_x * s,
        g.cxx * c * c + 2.0 * g.cxp * s * c + g.cpp * s * s,
        (g.cpp - g.cxx) * s * c + g.cxp * (c * c - s * s),
        g.cxx * s * s - 2.0 * g.cxp * s * c + g.cpp * c * c,
    ]
}

fn gap(m: &phaseflow::MomentSet, t: f64) -> f64 {
    let (cxx, cxp, cpp) = m.covariance();
    let got = [m.mean_x(), m.mean_p(), cxx, cxp, cpp];
    got.iter().zip(exact(t)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn gaussian_rules_follow_the_rotation() {
    let s = TdvpState::pure(start(), HBAR).unwrap();
    for rule in [Rule::Tdvp, Rule::Heller, Rule::Tga { order: 2 }] {
        let run = propagate(rule, &oscillator(), &s, 1e-3, 2.0 * PI, 100).unwrap();
        assert!(run.failure.is_none());
        for (t, st) in run.times.iter().zip(&run.states) {
            let got = st.to_array();
            let worst = got
                .iter()
                .zip(exact(*t))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-10, "{rule:?} at t = {t}: {worst:e}");
        }
    }
}

#[test]
fn both_hierarchy_flavors_follow_the_rotation() {
    for flavor in [Flavor::Classical, Flavor::QuantumWeyl] {
        let spec = HierarchySpec::new(oscillator(), 4, flavor, HBAR, Closure::GaussianWick).unwrap();
        let m0 = moments_from_gaussian(&start(), 4, flavor);
        let run = integrate_hierarchy(&spec, &m0, 1e-3, 2.0 * PI, 200).unwrap();
        assert!(run.failure.is_none());
        for (t, m) in run.times.iter().zip(&run.moments) {
            assert!(gap(m, *t) < 1e-10, "{flavor:?} at t = {t}");
        }
    }
}

#[test]
fn split_step_wavefunction_follows_the_rotation() {
    let grid = PositionGrid::centered(128, 0.0, 10.0).unwrap();
    let w = WavefunctionGrid::from_gaussian(&start(), grid, HBAR, 1.0).unwrap();
    let cfg = IntegratorConfig::new(2.0 * PI / 4000.0, 2.0 * PI, 400).unwrap();
    let (times, moments, last) = splitstep_moments(w, &oscillator(), &cfg, 2).unwrap();
    assert_eq!(times.len(), 11);
    for (t, m) in times.iter().zip(&moments) {
        assert!(gap(m, *t) < 1e-6, "t = {t}: {:e}", gap(m, *t));
    }
    assert!((last.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn ensemble_agrees_within_its_standard_errors() {
    let e = sample_ensemble(&start(), 50_000, 7).unwrap();
    let cfg = IntegratorConfig::new(1e-2, PI, 50).unwrap();
    let series = leapfrog_moments(e, &oscillator(), &cfg, 1e3, 2).unwrap();
    for (t, em) in series.times.iter().zip(&series.moments) {
        let want = moments_from_gaussian(&exact_state(*t), 2, Flavor::Classical);
        for (n, k, v) in em.moments.iter() {
            let se = em.stderr.get(n, k);
            assert!((v - want.get(n, k)).abs() <= 5.0 * se + 1e-4, "t = {t}, ({n}, {k})");
        }
    }
}

fn exact_state(t: f64) -> GaussianState {
    let [x, p, cxx, cxp, cpp] = exact(t);
    GaussianState::new(x, p, cxx, cxp, cpp).unwrap()
}

#[test]
fn liouville_grid_follows_the_rotation() {
    let lattice = Lattice::centered(128, 128, 0.0, 7.0, 0.0, 7.0).unwrap();
    let f = PhaseSpaceGrid::from_gaussian(&start(), lattice).unwrap();
    let mut cfg = LiouvilleConfig::new(IntegratorConfig::new(PI / 100.0, PI, 50).unwrap());
    cfg.splitting = Splitting::Yoshida4;
    let (last, budget) = liouville_evolve(f, &oscillator(), &cfg, |_, _| Ok(())).unwrap();
    let m = moments_from_grid(&last, 2, Flavor::Classical);
    assert!(gap(&m, PI) < 1e-3, "{:e}", gap(&m, PI));
    assert!(budget.max_relative_drift[0] < 1e-10);
}
