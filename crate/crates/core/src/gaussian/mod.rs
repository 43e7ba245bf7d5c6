//! Gaussian-ansatz propagators.
//!
//! A [`TdvpState`] carries the means, the three covariances and the constant
//! `sigma2 = int f^2`, which pins `det C = (1 / (4 pi sigma2))^2`. The
//! variational (TDVP) equations keep every Taylor term of the potential
//! averaged over the Gaussian; the truncated variants keep fluctuation terms
//! up to a fixed order, and Heller's variant drops the back-reaction on the
//! mean altogether.

mod lyapunov;
mod mtga;
mod propagate;

pub use lyapunov::{lyapunov_max, lyapunov_scan, LyapunovJob, LyapunovReport, LyapunovSystem};
pub use mtga::{auto_tile, mtga_density, mtga_moments, mtga_propagate, GaussianSum, MtgaRun, PacketRule};
pub use propagate::{propagate, propagate_reduced, GaussianRun, ReducedRun};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PolynomialPotential;
use crate::states::GaussianState;

/// Gaussian state with its conserved `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdvpState {
    pub mean_x: f64,
    pub mean_p: f64,
    pub cxx: f64,
    pub cxp: f64,
    pub cpp: f64,
    pub sigma2: f64,
}

impl TdvpState {
    /// Pairs `g` with an explicit `sigma2`; the covariance need not satisfy
    /// the constraint exactly, the residual is reported along the flow.
    pub fn new(g: GaussianState, sigma2: f64) -> Result<Self> {
        g.validate()?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", "must be positive"));
        }
        Ok(TdvpState {
            mean_x: g.mean_x,
            mean_p: g.mean_p,
            cxx: g.cxx,
            cxp: g.cxp,
            cpp: g.cpp,
            sigma2,
        })
    }

    /// `sigma2` read off the covariance, `1 / (4 pi sqrt(det C))`.
    pub fn from_gaussian(g: GaussianState) -> Result<Self> {
        let s = g.sigma2()?;
        Self::new(g, s)
    }

    /// Pure state: `sigma2 = 1 / (2 pi hbar)`.
    pub fn pure(g: GaussianState, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::invalid("hbar", "must be positive"));
        }
        if !g.is_pure(hbar) {
            return Err(Error::NotRealizable(format!(
                "pure state needs det C = hbar^2/4 = {}, got {}",
                0.25 * hbar * hbar,
                g.det()
            )));
        }
        Self::new(g, 1.0 / (2.0 * PI * hbar))
    }

    pub fn gaussian(&self) -> GaussianState {
        GaussianState {
            mean_x: self.mean_x,
            mean_p: self.mean_p,
            cxx: self.cxx,
            cxp: self.cxp,
            cpp: self.cpp,
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.mean_x, self.mean_p, self.cxx, self.cxp, self.cpp]
    }

    pub fn from_array(y: &[f64], sigma2: f64) -> Self {
        TdvpState {
            mean_x: y[0],
            mean_p: y[1],
            cxx: y[2],
            cxp: y[3],
            cpp: y[4],
            sigma2,
        }
    }

    pub fn det(&self) -> f64 {
        self.cxx * self.cpp - self.cxp * self.cxp
    }

    /// `(1 / (4 pi sigma2))^2`, the value `det C` must keep.
    pub fn constraint_target(&self) -> f64 {
        (1.0 / (4.0 * PI * self.sigma2)).powi(2)
    }

    /// `(det C - target) / target`.
    pub fn constraint_residual(&self) -> f64 {
        let target = self.constraint_target();
        (self.det() - target) / target
    }

    pub fn reduced(&self) -> ReducedState {
        let rho = self.cxx.sqrt();
        ReducedState {
            mean_x: self.mean_x,
            mean_p: self.mean_p,
            rho,
            gamma: self.cxp / rho,
            sigma2: self.sigma2,
        }
    }
}

/// Canonical chart `rho = sqrt(cxx)`, `gamma = cxp / rho`; `cpp` follows from
/// the constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub mean_x: f64,
    pub mean_p: f64,
    pub rho: f64,
    pub gamma: f64,
    pub sigma2: f64,
}

impl ReducedState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.mean_x, self.mean_p, self.rho, self.gamma]
    }

    pub fn from_array(y: &[f64], sigma2: f64) -> Self {
        ReducedState {
            mean_x: y[0],
            mean_p: y[1],
            rho: y[2],
            gamma: y[3],
            sigma2,
        }
    }

    /// `4 pi sigma2`.
    fn s(&self) -> f64 {
        4.0 * PI * self.sigma2
    }

    pub fn to_tdvp(&self) -> TdvpState {
        let s = self.s();
        TdvpState {
            mean_x: self.mean_x,
            mean_p: self.mean_p,
            cxx: self.rho * self.rho,
            cxp: self.rho * self.gamma,
            cpp: self.gamma * self.gamma + 1.0 / (self.rho * self.rho * s * s),
            sigma2: self.sigma2,
        }
    }
}

/// Equations of motion of a single packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rule {
    /// Full variational dynamics.
    Tdvp,
    /// Variational dynamics with fluctuation terms kept up to `order` (even).
    Tga { order: usize },
    /// Mean follows the classical force; covariances see only `V''`.
    Heller,
}

impl Rule {
    pub fn validate(&self) -> Result<()> {
        if let Rule::Tga { order } = self {
            if *order < 2 || order % 2 == 1 {
                return Err(Error::invalid(
                    "order",
                    format!("must be even and at least 2, got {order}"),
                ));
            }
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// Highest `n` in the mean force, `V^(2n+1)`, and highest `k` in the
/// covariance sums, `V^(2k+2)`, for a rule.
fn limits(rule: Rule, degree: usize) -> (usize, usize) {
    let full_mean = degree.saturating_sub(1) / 2;
    let full_cov = degree.saturating_sub(2) / 2;
    match rule {
        Rule::Tdvp => (full_mean, full_cov),
        Rule::Tga { order } => (full_mean.min(order / 2), full_cov.min((order / 2).saturating_sub(1))),
        Rule::Heller => (0, 0),
    }
}

/// `d(mean_x, mean_p, cxx, cxp, cpp)/dt` for the given rule.
pub fn gaussian_rhs(rule: Rule, pot: &PolynomialPotential, y: &[f64], t: f64, out: &mut [f64]) {
    let (xb, pb, cxx, cxp, cpp) = (y[0], y[1], y[2], y[3], y[4]);
    let m = pot.mass();
    let dv = pot.derivatives_at(xb, t);
    let vd = |j: usize| dv.get(j).copied().unwrap_or(0.0);
    let (nmax, kmax) = limits(rule, pot.degree());
    let mut force = 0.0;
    let mut w = 1.0;
    for n in 0..=nmax {
        force += w / (factorial(n) * 2f64.powi(n as i32)) * vd(2 * n + 1);
        w *= cxx;
    }
    let mut pp = 0.0;
    let mut xp = 0.0;
    let mut w = 1.0;
    for k in 0..=kmax {
        let v = vd(2 * k + 2);
        pp += v / (2f64.powi(k as i32 - 1) * factorial(k)) * w;
        xp += v / (2f64.powi(k as i32) * factorial(k)) * w * cxx;
        w *= cxx;
    }
    out[0] = pb / m;
    out[1] = -force;
    out[2] = 2.0 * cxp / m;
    out[3] = cpp / m - xp;
    out[4] = -pp * cxp;
}

/// Variational equations of motion.
pub fn tdvp_rhs(s: &TdvpState, pot: &PolynomialPotential, t: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    gaussian_rhs(Rule::Tdvp, pot, &s.to_array(), t, &mut out);
    out
}

/// Heller's thawed-Gaussian equations.
pub fn heller_rhs(s: &TdvpState, pot: &PolynomialPotential, t: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    gaussian_rhs(Rule::Heller, pot, &s.to_array(), t, &mut out);
    out
}

/// Variational equations truncated at fluctuation order `order`.
pub fn consistent_tga_rhs(s: &TdvpState, pot: &PolynomialPotential, t: f64, order: usize) -> Result<[f64; 5]> {
    let rule = Rule::Tga { order };
    rule.validate()?;
    let mut out = [0.0; 5];
    gaussian_rhs(rule, pot, &s.to_array(), t, &mut out);
    Ok(out)
}

/// `(p^2 + cpp)/2m + sum_{k <= kmax} V^(2k) cxx^k / (2^k k!)`.
fn energy_upto(pot: &PolynomialPotential, y: &[f64], t: f64, kmax: usize) -> f64 {
    let (xb, pb, cxx, cpp) = (y[0], y[1], y[2], y[4]);
    let dv = pot.derivatives_at(xb, t);
    let mut e = (pb * pb + cpp) / (2.0 * pot.mass());
    let mut w = 1.0;
    for k in 0..=kmax {
        if let Some(v) = dv.get(2 * k) {
            e += v * w / (2f64.powi(k as i32) * factorial(k));
        }
        w *= cxx;
    }
    e
}

/// `<H>` over the Gaussian.
pub fn tdvp_energy(s: &TdvpState, pot: &PolynomialPotential, t: f64) -> f64 {
    energy_upto(pot, &s.to_array(), t, pot.degree() / 2)
}

/// The energy a rule conserves for static potentials. Heller's rule conserves
/// none; its companion is the quadratic-order energy, whose rate along the
/// Heller flow is [`heller_energy_drift`].
pub fn rule_energy(rule: Rule, s: &TdvpState, pot: &PolynomialPotential, t: f64) -> f64 {
    let kmax = match rule {
        Rule::Tdvp => pot.degree() / 2,
        Rule::Tga { order } => (order / 2).min(pot.degree() / 2),
        Rule::Heller => 1,
    };
    energy_upto(pot, &s.to_array(), t, kmax)
}

/// `<H>` evaluated in the reduced chart,
/// `p^2/2m + gamma^2/2m + 1/(2 m rho^2 (4 pi sigma2)^2) + sum_n rho^(2n) V^(2n)/(2^n n!)`,
/// the `n = 0` term being `V(mean_x)`.
pub fn hg_energy(r: &ReducedState, pot: &PolynomialPotential, t: f64) -> f64 {
    let m = pot.mass();
    let s = r.s();
    let dv = pot.derivatives_at(r.mean_x, t);
    let mut e = (r.mean_p * r.mean_p + r.gamma * r.gamma) / (2.0 * m) + 1.0 / (2.0 * m * r.rho * r.rho * s * s);
    let rho2 = r.rho * r.rho;
    let mut w = 1.0;
    for (n, v) in dv.iter().step_by(2).enumerate() {
        e += v * w / (2f64.powi(n as i32) * factorial(n));
        w *= rho2;
    }
    e
}

/// `d(mean_x, mean_p, rho, gamma)/dt` from Hamilton's equations of
/// [`hg_energy`].
pub fn reduced_rhs(pot: &PolynomialPotential, y: &[f64], sigma2: f64, t: f64, out: &mut [f64]) {
    let (xb, pb, rho, gamma) = (y[0], y[1], y[2], y[3]);
    let m = pot.mass();
    let s = 4.0 * PI * sigma2;
    let dv = pot.derivatives_at(xb, t);
    let vd = |j: usize| dv.get(j).copied().unwrap_or(0.0);
    let half = pot.degree() / 2 + 1;
    let mut force = 0.0;
    let mut restoring = 0.0;
    for n in 0..=half {
        force += rho.powi(2 * n as i32) / (2f64.powi(n as i32) * factorial(n)) * vd(2 * n + 1);
        if n >= 1 {
            restoring += rho.powi(2 * n as i32 - 1) / (2f64.powi(n as i32 - 1) * factorial(n - 1)) * vd(2 * n);
        }
    }
    out[0] = pb / m;
    out[1] = -force;
    out[2] = gamma / m;
    out[3] = 1.0 / (m * rho.powi(3) * s * s) - restoring;
}

/// Jacobian of [`reduced_rhs`] in row-major order.
pub fn reduced_jacobian(pot: &PolynomialPotential, y: &[f64], sigma2: f64, t: f64) -> [[f64; 4]; 4] {
    let (xb, rho) = (y[0], y[2]);
    let m = pot.mass();
    let s = 4.0 * PI * sigma2;
    let dv = pot.derivatives_at(xb, t);
    let vd = |j: usize| dv.get(j).copied().unwrap_or(0.0);
    let half = pot.degree() / 2 + 1;
    let mut dforce_dx = 0.0;
    let mut cross = 0.0;
    let mut drestoring_drho = 0.0;
    for n in 0..=half {
        dforce_dx += rho.powi(2 * n as i32) / (2f64.powi(n as i32) * factorial(n)) * vd(2 * n + 2);
        if n >= 1 {
            let base = 2f64.powi(n as i32 - 1) * factorial(n - 1);
            cross += rho.powi(2 * n as i32 - 1) / base * vd(2 * n + 1);
            drestoring_drho += (2 * n - 1) as f64 * rho.powi(2 * n as i32 - 2) / base * vd(2 * n);
        }
    }
    [
        [0.0, 1.0 / m, 0.0, 0.0],
        [-dforce_dx, 0.0, -cross, 0.0],
        [0.0, 0.0, 0.0, 1.0 / m],
        [-cross, 0.0, -3.0 / (m * rho.powi(4) * s * s) - drestoring_drho, 0.0],
    ]
}

/// Heller's energy production rate `(mean_p / 2m) V'''(mean_x) cxx`.
pub fn heller_energy_drift(s: &TdvpState, pot: &PolynomialPotential, t: f64) -> f64 {
    s.mean_p / (2.0 * pot.mass()) * pot.derivative(3, s.mean_x, t) * s.cxx
}

/// Fluctuation Hamiltonian `gamma^2/2m + 1/(2 m rho^2 (4 pi sigma2)^2) + V''(mean_x) rho^2 / 2`.
/// `sigma2 = None` is the `sigma2 -> infinity` limit, which drops the middle
/// term and leaves the linearized-perturbation Hamiltonian.
pub fn fluct_hamiltonian(
    rho: f64,
    gamma: f64,
    mean_x: f64,
    sigma2: Option<f64>,
    pot: &PolynomialPotential,
    t: f64,
) -> f64 {
    let m = pot.mass();
    let middle = match sigma2 {
        Some(s2) => {
            let s = 4.0 * PI * s2;
            1.0 / (2.0 * m * rho * rho * s * s)
        }
        None => 0.0,
    };
    gamma * gamma / (2.0 * m) + middle + 0.5 * pot.derivative(2, mean_x, t) * rho * rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{classical_rhs, quantum_rhs, Closure, HierarchySpec};
    use crate::states::{central_from_raw, moments_from_gaussian, Flavor};
    use proptest::prelude::*;

    fn quartic() -> PolynomialPotential {
        PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn coherent_state_is_a_fixed_point_of_the_covariances() {
        let v = PolynomialPotential::quadratic(1.0, 1.0).unwrap();
        let s = TdvpState::pure(GaussianState::coherent(0.0, 0.0, 1.0, 1.0, 1.0).unwrap(), 1.0).unwrap();
        let d = tdvp_rhs(&s, &v, 0.0);
        assert_eq!(&d[2..], &[0.0, 0.0, 0.0]);
        assert!((tdvp_energy(&s, &v, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quartic_force_and_energy() {
        let v = quartic();
        let sx = 0.2;
        let s = TdvpState::new(GaussianState::new(1.0, 0.0, sx, 0.0, 1.0).unwrap(), 0.1).unwrap();
        let d = tdvp_rhs(&s, &v, 0.0);
        assert!((d[1] + 4.0 + 12.0 * sx).abs() < 1e-14);
        let h = heller_rhs(&s, &v, 0.0);
        assert!((h[1] + 4.0).abs() < 1e-14);
        assert!((h[1] - d[1] - 12.0 * sx).abs() < 1e-14);
        let at_origin = TdvpState::new(GaussianState::new(0.0, 0.0, sx, 0.0, 1.3).unwrap(), 0.1).unwrap();
        assert!((tdvp_energy(&at_origin, &v, 0.0) - (1.3 / 2.0 + 3.0 * sx * sx)).abs() < 1e-14);
    }

    #[test]
    fn tga_two_keeps_quadratic_back_reaction() {
        let v = PolynomialPotential::new(vec![0.0, 0.3, -0.2, 0.5, 0.25, 0.1, 0.05], 1.0).unwrap();
        let s = TdvpState::new(GaussianState::new(0.7, 0.4, 0.3, 0.1, 0.9).unwrap(), 0.2).unwrap();
        let t2 = consistent_tga_rhs(&s, &v, 0.0, 2).unwrap();
        let h = heller_rhs(&s, &v, 0.0);
        let dv = v.derivatives_at(0.7, 0.0);
        assert!((t2[1] - (-dv[1] - 0.5 * s.cxx * dv[3])).abs() < 1e-14);
        assert_eq!(&t2[2..], &h[2..]);
        let high = consistent_tga_rhs(&s, &v, 0.0, 6).unwrap();
        assert_eq!(high, tdvp_rhs(&s, &v, 0.0));
        assert!(consistent_tga_rhs(&s, &v, 0.0, 3).is_err());
    }

    #[test]
    fn harmonic_rules_coincide() {
        let v = PolynomialPotential::quadratic(1.3, 0.8).unwrap();
        let s = TdvpState::new(GaussianState::new(0.7, -0.4, 0.3, 0.1, 0.9).unwrap(), 0.2).unwrap();
        let a = tdvp_rhs(&s, &v, 0.0);
        assert_eq!(a, heller_rhs(&s, &v, 0.0));
        assert_eq!(a, consistent_tga_rhs(&s, &v, 0.0, 2).unwrap());
        assert_eq!(heller_energy_drift(&s, &v, 0.0), 0.0);
    }

    #[test]
    fn drift_example() {
        let s = TdvpState::new(GaussianState::new(1.0, 1.0, 0.1, 0.0, 3.0).unwrap(), 0.1).unwrap();
        assert!((heller_energy_drift(&s, &quartic(), 0.0) - 1.2).abs() < 1e-14);
        let rest = TdvpState { mean_p: 0.0, ..s };
        assert_eq!(heller_energy_drift(&rest, &quartic(), 0.0), 0.0);
    }

    #[test]
    fn pure_fluctuation_term() {
        let hbar: f64 = 0.7;
        let rho = 0.9;
        let s2 = 1.0 / (2.0 * PI * hbar);
        let v = PolynomialPotential::free(1.5).unwrap();
        let h = fluct_hamiltonian(rho, 0.0, 0.0, Some(s2), &v, 0.0);
        assert!((h - hbar * hbar / (8.0 * 1.5 * rho * rho)).abs() < 1e-15);
        assert_eq!(fluct_hamiltonian(rho, 0.0, 0.0, None, &v, 0.0), 0.0);
    }

    #[test]
    fn reduced_chart_energy_matches() {
        let v = PolynomialPotential::new(vec![0.4, 0.1, 0.5, -0.2, 0.3], 1.2).unwrap();
        let s = TdvpState::pure(GaussianState::pure(0.3, 0.6, 0.4, 0.15, 1.0).unwrap(), 1.0).unwrap();
        let r = s.reduced();
        assert!((hg_energy(&r, &v, 0.0) - tdvp_energy(&s, &v, 0.0)).abs() < 1e-13);
        let back = r.to_tdvp();
        assert!((back.cpp - s.cpp).abs() < 1e-13);
    }

    #[test]
    fn tdvp_equals_gaussian_closed_hierarchy() {
        let v = PolynomialPotential::new(vec![0.0, 0.2, 0.5, -0.3, 1.0, 0.1], 1.1).unwrap();
        let g = GaussianState::pure(0.8, -0.3, 0.2, 0.05, 1.0).unwrap();
        let s = TdvpState::pure(g, 1.0).unwrap();
        let d = tdvp_rhs(&s, &v, 0.0);
        for flavor in [Flavor::Classical, Flavor::QuantumWeyl] {
            let spec = HierarchySpec::new(v.clone(), 2, flavor, 1.0, Closure::GaussianWick).unwrap();
            let ms = moments_from_gaussian(&g, 2, flavor);
            let r = match flavor {
                Flavor::Classical => classical_rhs(&ms, 0.0, &spec).unwrap(),
                Flavor::QuantumWeyl => quantum_rhs(&ms, 0.0, &spec).unwrap(),
            };
            let c = central_from_raw(&ms);
            let (xb, pb) = (c.mean_x, c.mean_p);
            let (vx, vp) = (r.get(1, 0), r.get(0, 1));
            let hier = [
                vx,
                vp,
                r.get(2, 0) - 2.0 * xb * vx,
                r.get(1, 1) - xb * vp - pb * vx,
                r.get(0, 2) - 2.0 * pb * vp,
            ];
            for i in 0..5 {
                assert!(
                    (hier[i] - d[i]).abs() <= 1e-13 * d[i].abs().max(1.0),
                    "{i}: {} vs {}",
                    hier[i],
                    d[i]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn reduced_jacobian_matches_finite_differences(
            xb in -1.5f64..1.5, pb in -1.0f64..1.0, rho in 0.3f64..1.5, gamma in -1.0f64..1.0,
            c2 in -1.0f64..1.0, c3 in -1.0f64..1.0, c4 in 0.0f64..1.0,
        ) {
            let v = PolynomialPotential::new(vec![0.0, 0.0, c2, c3, c4], 1.3).unwrap();
            let y = [xb, pb, rho, gamma];
            let s2 = 0.15;
            let jac = reduced_jacobian(&v, &y, s2, 0.0);
            for j in 0..4 {
                let h = 1e-6;
                let (mut yp, mut ym) = (y, y);
                yp[j] += h;
                ym[j] -= h;
                let (mut fp, mut fm) = ([0.0; 4], [0.0; 4]);
                reduced_rhs(&v, &yp, s2, 0.0, &mut fp);
                reduced_rhs(&v, &ym, s2, 0.0, &mut fm);
                for i in 0..4 {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    prop_assert!((fd - jac[i][j]).abs() <= 1e-5 * jac[i][j].abs().max(1.0),
                        "d f{} / d y{}: fd {} vs {}", i, j, fd, jac[i][j]);
                }
            }
        }
    }
}
