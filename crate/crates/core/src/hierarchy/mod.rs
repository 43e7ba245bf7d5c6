//! Raw-moment hierarchies for polynomial potentials.
//!
//! For `H = p^2 / 2m + V(x, t)` the classical averages obey
//!
//! `d<x^n p^k>/dt = (n/m) <x^(n-1) p^(k+1)> - k <x^n p^(k-1) V'(x)>`
//!
//! and Weyl-ordered quantum averages pick up the odd higher derivatives of
//! the potential, `sum_{lambda odd >= 3} Theta(k, lambda) <x^n p^(k-lambda) V^(lambda)(x)>`.
//! Because `V` is a polynomial of degree `d`, the right-hand side of every
//! moment of total order `s` only reaches order `s + d - 2`. Moments above
//! the tracked order come from a closure applied to central moments.

mod central_check;
mod wick;

pub use central_check::{central_hierarchy_check, CentralCheckReport, CheckEntry};
pub use wick::wick_closure;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Diagnostic, Failure};
use crate::potential::{derivative_coefficients, PolynomialPotential};
use crate::states::moments::{tri_index, tri_len, tri_pairs};
use crate::states::{central_from_raw, CentralMoments, Flavor, MomentSet};

/// Highest tracked order.
pub const MAX_ORDER: usize = 6;

/// How central moments above the tracked order are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Closure {
    /// Pairing sums of the current covariance, as for a Gaussian.
    #[serde(rename = "gaussian-wick")]
    GaussianWick,
    /// Central moments above the tracked order vanish.
    #[serde(rename = "zero-central")]
    ZeroCentral,
}

impl Closure {
    pub fn as_str(self) -> &'static str {
        match self {
            Closure::GaussianWick => "gaussian-wick",
            Closure::ZeroCentral => "zero-central",
        }
    }
}

impl std::fmt::Display for Closure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A truncated hierarchy: potential, tracked order, flavor and closure.
#[derive(Debug, Clone)]
pub struct HierarchySpec {
    pub potential: PolynomialPotential,
    pub order: usize,
    pub flavor: Flavor,
    /// Only read by the quantum flavor.
    pub hbar: f64,
    pub closure: Closure,
}

impl HierarchySpec {
    pub fn new(
        potential: PolynomialPotential,
        order: usize,
        flavor: Flavor,
        hbar: f64,
        closure: Closure,
    ) -> Result<Self> {
        let spec = HierarchySpec {
            potential,
            order,
            flavor,
            hbar,
            closure,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_ORDER).contains(&self.order) {
            return Err(Error::invalid(
                "order",
                format!("must lie in 2..={MAX_ORDER}, got {}", self.order),
            ));
        }
        if self.flavor == Flavor::QuantumWeyl && !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::invalid("hbar", "quantum flavor needs a positive hbar"));
        }
        Ok(())
    }

    /// Highest raw moment the right-hand side and the energy touch.
    pub fn closed_order(&self) -> usize {
        let d = self.potential.degree();
        (self.order + d).saturating_sub(2).max(d).max(self.order)
    }

    #[cfg(test)]
    fn with_flavor(&self, flavor: Flavor) -> HierarchySpec {
        HierarchySpec { flavor, ..self.clone() }
    }
}

/// `Theta(n, lambda) = (-1)^lambda / lambda! * n! / (n - lambda)! * (hbar / 2i)^(lambda - 1)`,
/// real because `lambda - 1` is even.
pub fn theta_coeff(n: usize, lambda: usize, hbar: f64) -> Result<f64> {
    if lambda < 3 || lambda.is_multiple_of(2) {
        return Err(Error::invalid(
            "lambda",
            format!("must be odd and at least 3, got {lambda}"),
        ));
    }
    if lambda > n {
        return Err(Error::invalid("lambda", format!("{lambda} exceeds n = {n}")));
    }
    Ok(theta_unchecked(n, lambda, hbar))
}

fn theta_unchecked(n: usize, lambda: usize, hbar: f64) -> f64 {
    let lambda_fact: f64 = (1..=lambda).map(|j| j as f64).product();
    let falling: f64 = ((n + 1 - lambda)..=n).map(|j| j as f64).product();
    let sign = if ((lambda - 1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    // (-1)^lambda = -1 for odd lambda.
    -sign * falling / lambda_fact * (0.5 * hbar).powi(lambda as i32 - 1)
}

/// Central moments up to `upto`: tracked values through the spec order, the
/// closure above it.
pub fn closed_central(spec: &HierarchySpec, ms: &MomentSet, upto: usize) -> CentralMoments {
    let tracked = central_from_raw(ms);
    let (cxx, cxp, cpp) = (tracked.get(2, 0), tracked.get(1, 1), tracked.get(0, 2));
    let values = tri_pairs(upto)
        .map(|(n, k)| {
            if n + k <= ms.order() {
                tracked.get(n, k)
            } else {
                match spec.closure {
                    Closure::GaussianWick => wick_closure(cxx, cxp, cpp, n, k),
                    Closure::ZeroCentral => 0.0,
                }
            }
        })
        .collect();
    CentralMoments::from_values(tracked.mean_x, tracked.mean_p, upto, ms.flavor(), values)
}

/// Raw moments up to `upto`, closed above the tracked order.
pub fn closed_moments(spec: &HierarchySpec, ms: &MomentSet, upto: usize) -> MomentSet {
    closed_central(spec, ms, upto).to_raw()
}

/// Right-hand side for raw values in storage order.
fn rhs_into(spec: &HierarchySpec, values: &[f64], t: f64, out: &mut [f64], quantum: bool) {
    let order = spec.order;
    let ms = MomentSet::from_values(order, spec.flavor, values.to_vec());
    let big = spec.closed_order();
    let closed = closed_moments(spec, &ms, big);
    let mu = |n: usize, k: usize| closed.values()[tri_index(n, k)];
    let inv_m = 1.0 / spec.potential.mass();
    let coeffs = spec.potential.coefficients_at(t);
    let force = derivative_coefficients(&coeffs, 1);
    let odd: Vec<(usize, Vec<f64>)> = if quantum {
        (3..=order.min(spec.potential.degree()))
            .step_by(2)
            .map(|l| (l, derivative_coefficients(&coeffs, l)))
            .collect()
    } else {
        Vec::new()
    };
    for (idx, (n, k)) in tri_pairs(order).enumerate() {
        let mut d = 0.0;
        if n > 0 {
            d += n as f64 * inv_m * mu(n - 1, k + 1);
        }
        if k > 0 {
            let mut s = 0.0;
            for (j, a) in force.iter().enumerate() {
                s += a * mu(n + j, k - 1);
            }
            d -= k as f64 * s;
        }
        for (lambda, b) in &odd {
            if *lambda > k {
                break;
            }
            let mut s = 0.0;
            for (j, c) in b.iter().enumerate() {
                s += c * mu(n + j, k - lambda);
            }
            d += theta_unchecked(k, *lambda, spec.hbar) * s;
        }
        out[idx] = d;
    }
}

fn check_state(spec: &HierarchySpec, ms: &MomentSet) -> Result<()> {
    spec.validate()?;
    if ms.order() != spec.order {
        return Err(Error::invalid(
            "moments",
            format!("order {} does not match the hierarchy order {}", ms.order(), spec.order),
        ));
    }
    Ok(())
}

/// `d<x^n p^k>/dt` from the classical Liouville equation.
pub fn classical_rhs(ms: &MomentSet, t: f64, spec: &HierarchySpec) -> Result<MomentSet> {
    check_state(spec, ms)?;
    let mut out = vec![0.0; tri_len(spec.order)];
    rhs_into(spec, ms.values(), t, &mut out, false);
    Ok(MomentSet::from_values(spec.order, Flavor::Classical, out))
}

/// `d<x^n p^k>_W/dt` for Weyl-ordered averages.
pub fn quantum_rhs(ms: &MomentSet, t: f64, spec: &HierarchySpec) -> Result<MomentSet> {
    check_state(spec, ms)?;
    if !(spec.hbar > 0.0) {
        return Err(Error::invalid("hbar", "quantum flavor needs a positive hbar"));
    }
    let mut out = vec![0.0; tri_len(spec.order)];
    rhs_into(spec, ms.values(), t, &mut out, true);
    Ok(MomentSet::from_values(spec.order, Flavor::QuantumWeyl, out))
}

/// Right-hand side of the flavor named in `spec`.
pub fn hierarchy_rhs(ms: &MomentSet, t: f64, spec: &HierarchySpec) -> Result<MomentSet> {
    match spec.flavor {
        Flavor::Classical => classical_rhs(ms, t, spec),
        Flavor::QuantumWeyl => quantum_rhs(ms, t, spec),
    }
}

/// `<p^2>/2m + <V(x, t)>`, with the closure supplying `<x^k>` above the order.
pub fn hierarchy_energy(spec: &HierarchySpec, ms: &MomentSet, t: f64) -> f64 {
    let closed = closed_moments(spec, ms, spec.closed_order());
    let coeffs = spec.potential.coefficients_at(t);
    let pot: f64 = coeffs.iter().enumerate().map(|(k, c)| c * closed.get(k, 0)).sum();
    closed.get(0, 2) / (2.0 * spec.potential.mass()) + pot
}

/// Integrated hierarchy: sampled moments, diagnostics, and where it broke down
/// if it did.
#[derive(Debug, Clone)]
pub struct HierarchyRun {
    pub times: Vec<f64>,
    pub moments: Vec<MomentSet>,
    /// `constraint_residual` is the drift of `det C` from its initial value,
    /// an invariant of quadratic potentials.
    pub diagnostics: Vec<Diagnostic>,
    pub failure: Option<Failure>,
}

/// Values beyond this magnitude are treated as a blow-up.
const BLOW_UP: f64 = 1e150;

/// Fixed-step RK4 integration of the closed hierarchy.
///
/// A blow-up is not an error: the run keeps every sample up to the failure
/// and records its time.
pub fn integrate_hierarchy(
    spec: &HierarchySpec,
    initial: &MomentSet,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<HierarchyRun> {
    check_state(spec, initial)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::invalid("t_final", "must be non-negative"));
    }
    if stride == 0 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    let det0 = initial.det_c();
    let floor = match spec.flavor {
        Flavor::Classical => 0.0,
        Flavor::QuantumWeyl => 0.25 * spec.hbar * spec.hbar,
    };
    if det0 < floor * (1.0 - 1e-12) - 1e-300 {
        return Err(Error::NotRealizable(format!(
            "det C = {det0} is below {floor} required for the {} flavor",
            spec.flavor
        )));
    }
    let quantum = spec.flavor == Flavor::QuantumWeyl;
    let mut y = initial.values().to_vec();
    y[0] = 1.0;
    let mut run = HierarchyRun {
        times: Vec::new(),
        moments: Vec::new(),
        diagnostics: Vec::new(),
        failure: None,
    };
    let order = spec.order;
    let flavor = spec.flavor;
    let mut rhs = |t: f64, y: &[f64], d: &mut [f64]| rhs_into(spec, y, t, d, quantum);
    let failure = ode::integrate(&mut y, dt, t_final, stride, &mut rhs, |t, y| {
        if let Some(v) = y.iter().find(|v| v.abs() > BLOW_UP) {
            return Err(format!("moment magnitude {v:e} exceeds {BLOW_UP:e}"));
        }
        let ms = MomentSet::from_values(order, flavor, y.to_vec());
        let det = ms.det_c();
        run.diagnostics.push(Diagnostic {
            t,
            det_c: det,
            energy: hierarchy_energy(spec, &ms, t),
            constraint_residual: det - det0,
        });
        run.times.push(t);
        run.moments.push(ms);
        Ok(())
    });
    run.failure = failure;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{moments_from_gaussian, GaussianState};

    fn spec(v: PolynomialPotential, order: usize, flavor: Flavor, closure: Closure) -> HierarchySpec {
        HierarchySpec::new(v, order, flavor, 1.0, closure).unwrap()
    }

    #[test]
    fn theta_values() {
        let h: f64 = 0.7;
        assert!((theta_coeff(3, 3, h).unwrap() - h * h / 4.0).abs() < 1e-15);
        assert!((theta_coeff(5, 3, h).unwrap() - 2.5 * h * h).abs() < 1e-14);
        // (-1/120)(120)(hbar/2i)^4 = -(hbar/2)^4.
        assert!((theta_coeff(5, 5, h).unwrap() + h.powi(4) / 16.0).abs() < 1e-15);
        assert!(theta_coeff(5, 1, h).is_err());
        assert!(theta_coeff(5, 4, h).is_err());
        assert!(theta_coeff(3, 5, h).is_err());
    }

    #[test]
    fn harmonic_mean_equations() {
        let s = spec(
            PolynomialPotential::quadratic(1.0, 1.0).unwrap(),
            2,
            Flavor::Classical,
            Closure::GaussianWick,
        );
        let g = GaussianState::new(0.3, -0.8, 0.5, 0.1, 0.6).unwrap();
        let ms = moments_from_gaussian(&g, 2, Flavor::Classical);
        let d = classical_rhs(&ms, 0.0, &s).unwrap();
        assert!((d.get(1, 0) - (-0.8)).abs() < 1e-15);
        assert!((d.get(0, 1) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn quartic_force_uses_third_moment() {
        let s = spec(
            PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0).unwrap(),
            4,
            Flavor::Classical,
            Closure::GaussianWick,
        );
        let g = GaussianState::new(0.6, 0.0, 0.3, 0.05, 0.5).unwrap();
        let ms = moments_from_gaussian(&g, 4, Flavor::Classical);
        let d = classical_rhs(&ms, 0.0, &s).unwrap();
        assert!((d.get(0, 1) + 4.0 * ms.get(3, 0)).abs() < 1e-14);
        let (xb, c) = (0.6, 0.3);
        assert!((d.get(0, 1) + 4.0 * (xb * xb * xb + 3.0 * xb * c)).abs() < 1e-13);
    }

    #[test]
    fn zero_mean_quartic_force_vanishes() {
        let s = spec(
            PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0).unwrap(),
            2,
            Flavor::Classical,
            Closure::GaussianWick,
        );
        let g = GaussianState::new(0.0, 0.4, 0.7, 0.0, 0.5).unwrap();
        let d = classical_rhs(&moments_from_gaussian(&g, 2, Flavor::Classical), 0.0, &s).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn cubic_third_momentum_moment_gets_hbar_squared_term() {
        let alpha = 0.1;
        let v = PolynomialPotential::cubic(alpha, 1.0).unwrap();
        let q = spec(v.clone(), 3, Flavor::QuantumWeyl, Closure::GaussianWick);
        let c = spec(v, 3, Flavor::Classical, Closure::GaussianWick);
        let g = GaussianState::pure(0.2, 0.1, 0.5, 0.0, 1.0).unwrap();
        let ms = moments_from_gaussian(&g, 3, Flavor::QuantumWeyl);
        let dq = quantum_rhs(&ms, 0.0, &q).unwrap();
        let dc = classical_rhs(&ms, 0.0, &c).unwrap();
        assert!((dq.get(0, 3) - dc.get(0, 3) - 0.25 * 6.0 * alpha).abs() < 1e-15);
        let closed = closed_moments(&c, &ms, 4);
        assert!((dc.get(0, 3) + 3.0 * 3.0 * alpha * closed.get(2, 2)).abs() < 1e-14);
    }

    #[test]
    fn flavors_coincide_at_second_order_and_for_quadratics() {
        let g = GaussianState::new(0.4, -0.3, 0.6, 0.2, 0.9).unwrap();
        for coeffs in [vec![0.1, -0.2, 0.3, 0.4, 0.5, 0.1], vec![0.0, 0.0, 0.5]] {
            let v = PolynomialPotential::new(coeffs, 1.3).unwrap();
            for order in 2..=6 {
                let q = spec(v.clone(), order, Flavor::QuantumWeyl, Closure::ZeroCentral);
                let c = q.with_flavor(Flavor::Classical);
                let ms = moments_from_gaussian(&g, order, Flavor::Classical);
                let dq = quantum_rhs(&ms, 0.0, &q).unwrap();
                let dc = classical_rhs(&ms, 0.0, &c).unwrap();
                for (n, k, a) in dq.iter() {
                    if k < 3 || v.degree() <= 2 {
                        assert_eq!(a.to_bits(), dc.get(n, k).to_bits(), "({n},{k}) order {order}");
                    }
                }
            }
        }
    }

    #[test]
    fn free_particle_spreading_is_exact() {
        let s = spec(
            PolynomialPotential::free(2.0).unwrap(),
            2,
            Flavor::Classical,
            Closure::GaussianWick,
        );
        let g = GaussianState::new(0.0, 1.0, 0.5, 0.1, 0.3).unwrap();
        let run = integrate_hierarchy(&s, &moments_from_gaussian(&g, 2, Flavor::Classical), 0.01, 3.0, 50).unwrap();
        assert!(run.failure.is_none());
        let (t, ms) = (*run.times.last().unwrap(), run.moments.last().unwrap());
        assert_eq!(t, 3.0);
        let m = 2.0;
        let cxx = 0.5 + 2.0 * 0.1 * t / m + 0.3 * t * t / (m * m);
        assert!((ms.covariance().0 - cxx).abs() < 1e-12);
    }

    #[test]
    fn harmonic_covariance_rotates() {
        let s = spec(
            PolynomialPotential::quadratic(1.0, 1.0).unwrap(),
            2,
            Flavor::Classical,
            Closure::GaussianWick,
        );
        let g = GaussianState::new(1.0, 0.0, 0.3, 0.1, 0.7).unwrap();
        let period = 2.0 * std::f64::consts::PI;
        let run = integrate_hierarchy(
            &s,
            &moments_from_gaussian(&g, 2, Flavor::Classical),
            period * 1e-3,
            10.0 * period,
            1000,
        )
        .unwrap();
        for (t, ms) in run.times.iter().zip(&run.moments) {
            let (c, sn) = (t.cos(), t.sin());
            let cxx = c * c * 0.3 + 2.0 * c * sn * 0.1 + sn * sn * 0.7;
            assert!((ms.covariance().0 - cxx).abs() < 1e-8, "t={t}");
        }
        for d in &run.diagnostics {
            assert!(d.constraint_residual.abs() < 1e-8, "{}", d.constraint_residual);
        }
    }

    #[test]
    fn quartic_flavors_identical_at_order_two() {
        let v = PolynomialPotential::quartic(0.0, 1.0, 1.0).unwrap();
        let g = GaussianState::pure(1.0, 0.0, 0.1, 0.0, 1.0).unwrap();
        let ms = moments_from_gaussian(&g, 2, Flavor::Classical);
        let c = spec(v.clone(), 2, Flavor::Classical, Closure::GaussianWick);
        let q = spec(v, 2, Flavor::QuantumWeyl, Closure::GaussianWick);
        let a = integrate_hierarchy(&c, &ms, 1e-3, 5.0, 100).unwrap();
        let b = integrate_hierarchy(&q, &ms.clone().with_flavor(Flavor::QuantumWeyl), 1e-3, 5.0, 100).unwrap();
        for (x, y) in a.moments.iter().zip(&b.moments) {
            assert!(x.max_abs_diff(y) <= 1e-12);
        }
    }

    #[test]
    fn blow_up_is_recorded_with_partial_data() {
        // Zero-central closure at order 2 in an inverted quartic runs away.
        let v = PolynomialPotential::quartic(0.0, -1.0, 1.0).unwrap();
        let s = spec(v, 2, Flavor::Classical, Closure::ZeroCentral);
        let g = GaussianState::new(1.0, 1.0, 0.1, 0.0, 0.1).unwrap();
        let run = integrate_hierarchy(&s, &moments_from_gaussian(&g, 2, Flavor::Classical), 1e-3, 100.0, 10).unwrap();
        let f = run.failure.expect("expected a blow-up");
        assert!(f.time > 0.0 && f.time < 100.0);
        assert!(!run.moments.is_empty());
        assert!(*run.times.last().unwrap() <= f.time);
    }

    #[test]
    fn rejects_bad_specs() {
        let v = PolynomialPotential::quadratic(1.0, 1.0).unwrap();
        assert!(HierarchySpec::new(v.clone(), 1, Flavor::Classical, 1.0, Closure::GaussianWick).is_err());
        assert!(HierarchySpec::new(v.clone(), 7, Flavor::Classical, 1.0, Closure::GaussianWick).is_err());
        assert!(HierarchySpec::new(v.clone(), 3, Flavor::QuantumWeyl, 0.0, Closure::GaussianWick).is_err());
        let s = spec(v, 3, Flavor::QuantumWeyl, Closure::GaussianWick);
        let ms = MomentSet::new(2, Flavor::QuantumWeyl);
        assert!(classical_rhs(&ms, 0.0, &s).is_err());
        // Sub-ħ²/4 covariance is not a Wigner state.
        let g = GaussianState::new(0.0, 0.0, 0.1, 0.0, 0.1).unwrap();
        let ms = moments_from_gaussian(&g, 3, Flavor::QuantumWeyl);
        assert!(matches!(
            integrate_hierarchy(&s, &ms, 0.01, 1.0, 1),
            Err(Error::NotRealizable(_))
        ));
    }
}
