use super::{gaussian_rhs, hg_energy, reduced_rhs, rule_energy, ReducedState, Rule, TdvpState};
use crate::error::{Error, Result};
use crate::ode::{self, Diagnostic, Failure};
use crate::potential::PolynomialPotential;

/// Sampled trajectory of one Gaussian packet.
#[derive(Debug, Clone)]
pub struct GaussianRun {
    pub rule: Rule,
    pub times: Vec<f64>,
    pub states: Vec<TdvpState>,
    /// `energy` is the rule's own energy (see [`super::rule_energy`]);
    /// `constraint_residual` is the relative drift of `det C` from its
    /// `sigma2` target.
    pub diagnostics: Vec<Diagnostic>,
    pub failure: Option<Failure>,
}

fn check_steps(dt: f64, t_final: f64, stride: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::invalid("t_final", "must be non-negative"));
    }
    if stride == 0 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    Ok(())
}

/// Fixed-step RK4 propagation of all five moments under `rule`.
pub fn propagate(
    rule: Rule,
    pot: &PolynomialPotential,
    initial: &TdvpState,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<GaussianRun> {
    rule.validate()?;
    check_steps(dt, t_final, stride)?;
    initial.gaussian().validate()?;
    let sigma2 = initial.sigma2;
    let mut run = GaussianRun {
        rule,
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
        failure: None,
    };
    let mut y = initial.to_array();
    let mut rhs = |t: f64, y: &[f64], d: &mut [f64]| gaussian_rhs(rule, pot, y, t, d);
    run.failure = ode::integrate(&mut y, dt, t_final, stride, &mut rhs, |t, y| {
        let s = TdvpState::from_array(y, sigma2);
        if s.cxx <= 0.0 {
            return Err(format!("position variance became {}", s.cxx));
        }
        run.diagnostics.push(Diagnostic {
            t,
            det_c: s.det(),
            energy: rule_energy(rule, &s, pot, t),
            constraint_residual: s.constraint_residual(),
        });
        run.times.push(t);
        run.states.push(s);
        Ok(())
    });
    Ok(run)
}

/// Sampled trajectory in the `(rho, gamma)` chart.
#[derive(Debug, Clone)]
pub struct ReducedRun {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
    pub energies: Vec<f64>,
    pub failure: Option<Failure>,
}

/// Variational dynamics integrated in the reduced chart, where the
/// constraint holds by construction.
pub fn propagate_reduced(
    pot: &PolynomialPotential,
    initial: &ReducedState,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<ReducedRun> {
    check_steps(dt, t_final, stride)?;
    if !(initial.rho > 0.0) {
        return Err(Error::invalid("rho", "must be positive"));
    }
    if !(initial.sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "must be positive"));
    }
    let sigma2 = initial.sigma2;
    let mut run = ReducedRun {
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
        failure: None,
    };
    let mut y = initial.to_array();
    let mut rhs = |t: f64, y: &[f64], d: &mut [f64]| reduced_rhs(pot, y, sigma2, t, d);
    run.failure = ode::integrate(&mut y, dt, t_final, stride, &mut rhs, |t, y| {
        let r = ReducedState::from_array(y, sigma2);
        if r.rho <= 0.0 {
            return Err(format!("rho became {}", r.rho));
        }
        run.energies.push(hg_energy(&r, pot, t));
        run.times.push(t);
        run.states.push(r);
        Ok(())
    });
    Ok(run)
}
