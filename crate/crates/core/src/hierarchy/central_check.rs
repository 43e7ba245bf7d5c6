//! Hand-written central-moment equations checked against the chain rule
//! applied to the raw hierarchy.
//!
//! With `delta = x - <x>` and `eta = p - <p>`:
//!
//! * `d<delta^n>/dt = (n/m) <delta^(n-1) eta>`
//! * `d<eta^n>/dt = n [<eta^(n-1)><V'> - <eta^(n-1) V'>] + Delta^(n)`
//! * `d<delta^n eta>/dt = <delta^n><V'> - <delta^n V'> + (n/m) <delta^(n-1) eta^2>`
//!
//! where the quantum term is written as
//! `Delta^(n) = sum_{lambda odd >= 3} Theta(n, lambda) <(<p> + eta)^(n - lambda) V^(lambda)>`
//! with the power expanded binomially. The second-order equations are also
//! checked in their quadratically truncated form, which keeps only `V''`.
//! Averages of `V^(lambda)` are Taylor-expanded about `<x>`, which is exact
//! for polynomials.

use serde::Serialize;

use super::{check_state, closed_central, rhs_into, theta_unchecked, HierarchySpec};
use crate::error::Result;
use crate::states::moments::{powers, tri_index, tri_len};
use crate::states::{binomial, Flavor, MomentSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub label: String,
    /// Value of the hand-written expression.
    pub printed: f64,
    /// Value obtained from the raw hierarchy by the chain rule.
    pub derived: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralCheckReport {
    pub entries: Vec<CheckEntry>,
    pub max_residual: f64,
}

impl CentralCheckReport {
    pub fn entry(&self, label: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Entries whose residual exceeds `tol`.
    pub fn failing(&self, tol: f64) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(move |e| e.residual > tol)
    }
}

/// Evaluates the hand-written central-moment equations on `state` at time `t`
/// and compares each with the chain-rule derivative of the raw hierarchy,
/// both closed the same way.
pub fn central_hierarchy_check(spec: &HierarchySpec, state: &MomentSet, t: f64) -> Result<CentralCheckReport> {
    check_state(spec, state)?;
    let order = spec.order;
    let big = spec.closed_order();
    let c = closed_central(spec, state, big);
    let cm = |a: usize, b: usize| c.get(a, b);
    let (xb, pb) = (c.mean_x, c.mean_p);
    let inv_m = 1.0 / spec.potential.mass();
    let dv = spec.potential.derivatives_at(xb, t);
    let vd = |j: usize| dv.get(j).copied().unwrap_or(0.0);
    // <delta^a eta^b V^(lambda)> by Taylor expansion about <x>.
    let avg_dv = |a: usize, b: usize, lambda: usize| {
        let mut s = 0.0;
        let mut fact = 1.0;
        let mut j = 0;
        while lambda + j < dv.len() {
            if j > 0 {
                fact *= j as f64;
            }
            s += vd(lambda + j) / fact * cm(a + j, b);
            j += 1;
        }
        s
    };

    let mut r_c = vec![0.0; tri_len(order)];
    rhs_into(spec, state.values(), t, &mut r_c, false);
    let quantum = spec.flavor == Flavor::QuantumWeyl;
    let r = if quantum {
        let mut r_q = vec![0.0; tri_len(order)];
        rhs_into(spec, state.values(), t, &mut r_q, true);
        r_q
    } else {
        r_c.clone()
    };
    let nx = powers(-xb, order);
    let np = powers(-pb, order);
    let central_rate = |a: usize, b: usize, r: &[f64]| {
        let mut s = 0.0;
        for i in 0..=a {
            for j in 0..=b {
                s += binomial(a, i) * binomial(b, j) * nx[a - i] * np[b - j] * r[tri_index(i, j)];
            }
        }
        if a > 0 {
            s -= a as f64 * r[tri_index(1, 0)] * cm(a - 1, b);
        }
        if b > 0 {
            s -= b as f64 * r[tri_index(0, 1)] * cm(a, b - 1);
        }
        s
    };

    let mut entries = Vec::new();
    let mut push = |label: String, printed: f64, derived: f64| {
        entries.push(CheckEntry {
            label,
            printed,
            derived,
            residual: (printed - derived).abs(),
        });
    };
    let mean_force = avg_dv(0, 0, 1);

    for n in 2..=order {
        push(
            format!("d<delta^{n}>/dt"),
            n as f64 * inv_m * cm(n - 1, 1),
            central_rate(n, 0, &r),
        );
    }
    for n in 2..=order {
        let classical = n as f64 * (cm(0, n - 1) * mean_force - avg_dv(0, n - 1, 1));
        let mut delta = 0.0;
        if quantum {
            let pp = powers(pb, n);
            let mut lambda = 3;
            while lambda <= n {
                let mut s = 0.0;
                for i in 0..=(n - lambda) {
                    s += binomial(n - lambda, i) * pp[n - lambda - i] * avg_dv(0, i, lambda);
                }
                delta += theta_unchecked(n, lambda, spec.hbar) * s;
                lambda += 2;
            }
            push(
                format!("Delta^({n})"),
                delta,
                central_rate(0, n, &r) - central_rate(0, n, &r_c),
            );
        }
        push(format!("d<eta^{n}>/dt"), classical + delta, central_rate(0, n, &r));
    }
    for n in 1..order {
        let printed = cm(n, 0) * mean_force - avg_dv(n, 0, 1) + n as f64 * inv_m * cm(n - 1, 2);
        let label = if n == 1 {
            "d<delta eta>/dt".to_string()
        } else {
            format!("d<delta^{n} eta>/dt")
        };
        push(label, printed, central_rate(n, 1, &r));
    }
    let v2 = vd(2);
    push(
        "quadratic d<delta^2>/dt".into(),
        2.0 * inv_m * cm(1, 1),
        central_rate(2, 0, &r),
    );
    push(
        "quadratic d<eta^2>/dt".into(),
        -2.0 * cm(1, 1) * v2,
        central_rate(0, 2, &r),
    );
    push(
        "quadratic d<delta eta>/dt".into(),
        inv_m * cm(0, 2) - cm(2, 0) * v2,
        central_rate(1, 1, &r),
    );

    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    Ok(CentralCheckReport { entries, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Closure;
    use crate::potential::PolynomialPotential;
    use crate::states::{moments_from_gaussian, GaussianState};

    fn state(order: usize, flavor: Flavor, mean_p: f64) -> MomentSet {
        let g = GaussianState::new(0.4, mean_p, 0.6, 0.15, 0.9).unwrap();
        let mut ms = moments_from_gaussian(&g, order, flavor);
        // Break Gaussianity so odd central moments take part.
        for (n, k) in ms.pairs().collect::<Vec<_>>() {
            if n + k >= 3 {
                let v = ms.get(n, k);
                ms.set(n, k, v + 0.01 * (n as f64 - k as f64 + 0.5));
            }
        }
        ms
    }

    #[test]
    fn classical_forms_are_exact() {
        let v = PolynomialPotential::new(vec![0.0, 0.3, -0.5, 0.2, 0.7, 0.05], 1.4).unwrap();
        let spec = HierarchySpec::new(v, 5, Flavor::Classical, 1.0, Closure::ZeroCentral).unwrap();
        let rep = central_hierarchy_check(&spec, &state(5, Flavor::Classical, 0.3), 0.0).unwrap();
        for e in &rep.entries {
            if !e.label.starts_with("quadratic") || e.label.contains("delta^2") {
                assert!(e.residual < 1e-10, "{e:?}");
            }
        }
        // The truncated forms drop V''' and higher.
        assert!(rep.entry("quadratic d<eta^2>/dt").unwrap().residual > 1e-6);
    }

    #[test]
    fn quadratic_forms_exact_for_quadratic_potentials() {
        let v = PolynomialPotential::new(vec![0.2, -0.1, 0.8], 1.0).unwrap();
        for flavor in [Flavor::Classical, Flavor::QuantumWeyl] {
            let spec = HierarchySpec::new(v.clone(), 4, flavor, 1.0, Closure::GaussianWick).unwrap();
            let rep = central_hierarchy_check(&spec, &state(4, flavor, 0.3), 0.0).unwrap();
            assert!(rep.max_residual < 1e-12, "{:?}", rep.entries);
            if flavor == Flavor::QuantumWeyl {
                for n in 2..=4 {
                    assert_eq!(rep.entry(&format!("Delta^({n})")).unwrap().printed, 0.0);
                }
            }
        }
    }

    #[test]
    fn cubic_third_order_correction() {
        let alpha = 0.1;
        let v = PolynomialPotential::cubic(alpha, 1.0).unwrap();
        let hbar = 1.3;
        let spec = HierarchySpec::new(v, 3, Flavor::QuantumWeyl, hbar, Closure::GaussianWick).unwrap();
        let rep = central_hierarchy_check(&spec, &state(3, Flavor::QuantumWeyl, 0.3), 0.0).unwrap();
        let d3 = rep.entry("Delta^(3)").unwrap();
        assert!((d3.printed - hbar * hbar / 4.0 * 6.0 * alpha).abs() < 1e-14);
        assert!(d3.residual < 1e-12);
        assert!(rep.entry("d<eta^3>/dt").unwrap().residual < 1e-10);
    }

    #[test]
    fn printed_quantum_term_differs_once_mean_momentum_enters() {
        // For n >= 4 the binomial (<p> + eta)^(n - lambda) form picks up
        // <p>-weighted terms the chain rule does not produce.
        let v = PolynomialPotential::quartic(0.5, 1.0, 1.0).unwrap();
        let hbar = 1.0;
        let spec = HierarchySpec::new(v.clone(), 4, Flavor::QuantumWeyl, hbar, Closure::GaussianWick).unwrap();
        let at_rest = central_hierarchy_check(&spec, &state(4, Flavor::QuantumWeyl, 0.0), 0.0).unwrap();
        assert!(at_rest.entry("Delta^(4)").unwrap().residual < 1e-12);
        let pb = 0.3;
        let moving = central_hierarchy_check(&spec, &state(4, Flavor::QuantumWeyl, pb), 0.0).unwrap();
        let e = moving.entry("Delta^(4)").unwrap();
        // Theta(4, 3) <p> <V'''> with Theta(4, 3) = hbar^2.
        let mean_v3 = 24.0 * 0.4;
        assert!(
            (e.printed - e.derived - hbar * hbar * pb * mean_v3).abs() < 1e-10,
            "{e:?}"
        );
        assert!(moving.entry("Delta^(3)").unwrap().residual < 1e-12);
    }
}
