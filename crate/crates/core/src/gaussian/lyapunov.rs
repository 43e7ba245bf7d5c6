use serde::{Deserialize, Serialize};

use super::{reduced_jacobian, reduced_rhs, TdvpState};
use crate::error::{Error, Result};
use crate::ode::Rk4;
use crate::par;
use crate::potential::PolynomialPotential;

/// Which flow the exponent is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LyapunovSystem {
    /// Classical trajectory of the means with its linearized perturbation:
    /// the `sigma2 -> infinity` limit of the Gaussian system.
    #[serde(rename = "tangent-2d")]
    Tangent2d,
    /// Means plus width `(mean_x, mean_p, rho, gamma)` under the variational
    /// Hamiltonian.
    #[serde(rename = "gaussian-4d")]
    Gaussian4d,
}

impl LyapunovSystem {
    pub fn as_str(self) -> &'static str {
        match self {
            LyapunovSystem::Tangent2d => "tangent-2d",
            LyapunovSystem::Gaussian4d => "gaussian-4d",
        }
    }

    fn dim(self) -> usize {
        match self {
            LyapunovSystem::Tangent2d => 2,
            LyapunovSystem::Gaussian4d => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovJob {
    pub system: LyapunovSystem,
    pub initial: TdvpState,
    pub total_time: f64,
    pub renorm_interval: f64,
    /// Fraction of `total_time` discarded before averaging.
    pub transient_fraction: f64,
    pub dt: f64,
    /// Number of averaging blocks, at least 10.
    pub blocks: usize,
}

impl LyapunovJob {
    /// Job with the default renormalization interval (0.5), 10% transient and
    /// 10 blocks.
    pub fn new(system: LyapunovSystem, initial: TdvpState, total_time: f64, dt: f64) -> Self {
        LyapunovJob {
            system,
            initial,
            total_time,
            renorm_interval: 0.5,
            transient_fraction: 0.1,
            dt,
            blocks: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.renorm_interval > 0.0 && self.renorm_interval.is_finite()) {
            return Err(Error::invalid("renorm_interval", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(Error::invalid("transient_fraction", "must lie in [0, 1)"));
        }
        if !(self.dt > 0.0 && self.dt <= self.renorm_interval) {
            return Err(Error::invalid(
                "dt",
                "must be positive and no larger than the renormalization interval",
            ));
        }
        if self.blocks < 10 {
            return Err(Error::invalid("blocks", "at least 10 blocks are needed"));
        }
        let averaged = self.total_time * (1.0 - self.transient_fraction);
        if !(self.total_time.is_finite() && averaged >= self.blocks as f64 * self.renorm_interval) {
            return Err(Error::invalid(
                "total_time",
                "must leave at least one renormalization interval per block after the transient",
            ));
        }
        if self.system == LyapunovSystem::Gaussian4d && !(self.initial.cxx > 0.0) {
            return Err(Error::invalid("initial.cxx", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub system: LyapunovSystem,
    pub lambda_max: f64,
    /// Standard deviation of the block estimates over `sqrt(blocks)`.
    pub stderr: f64,
    pub blocks: usize,
    pub t_total: f64,
    pub renorm_interval: f64,
    /// False when the first and second halves of the blocks disagree by more
    /// than five combined standard errors.
    pub converged: bool,
    pub block_estimates: Vec<f64>,
}

/// Largest Lyapunov exponent by Benettin's method: the flow and its tangent
/// vector are integrated together and the tangent is renormalized every
/// `renorm_interval`; the logs of the stretch factors after the transient
/// are averaged in equal blocks.
pub fn lyapunov_max(job: &LyapunovJob, pot: &PolynomialPotential) -> Result<LyapunovReport> {
    job.validate()?;
    let d = job.system.dim();
    let mut y = vec![0.0; 2 * d];
    match job.system {
        LyapunovSystem::Tangent2d => {
            y[0] = job.initial.mean_x;
            y[1] = job.initial.mean_p;
        }
        LyapunovSystem::Gaussian4d => {
            y[..4].copy_from_slice(&job.initial.reduced().to_array());
        }
    }
    let start = 1.0 / (d as f64).sqrt();
    y[d..].iter_mut().for_each(|v| *v = start);

    let m = pot.mass();
    let sigma2 = job.initial.sigma2;
    let system = job.system;
    let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| match system {
        LyapunovSystem::Tangent2d => {
            let (x, p, u, w) = (y[0], y[1], y[2], y[3]);
            out[0] = p / m;
            out[1] = -pot.derivative(1, x, t);
            out[2] = w / m;
            out[3] = -pot.derivative(2, x, t) * u;
        }
        LyapunovSystem::Gaussian4d => {
            reduced_rhs(pot, &y[..4], sigma2, t, &mut out[..4]);
            let jac = reduced_jacobian(pot, &y[..4], sigma2, t);
            for i in 0..4 {
                out[4 + i] = (0..4).map(|j| jac[i][j] * y[4 + j]).sum();
            }
        }
    };

    let sub = (job.renorm_interval / job.dt).round().max(1.0) as usize;
    let h = job.renorm_interval / sub as f64;
    let intervals = (job.total_time / job.renorm_interval + 1e-9).floor() as usize;
    let per_block = ((intervals as f64 * (1.0 - job.transient_fraction)).floor() as usize) / job.blocks;
    if per_block == 0 {
        return Err(Error::invalid("total_time", "too short for the requested blocks"));
    }
    let skip = intervals - per_block * job.blocks;

    let mut rk = Rk4::new(2 * d);
    let mut t = 0.0;
    let mut logs = Vec::with_capacity(per_block * job.blocks);
    for i in 0..intervals {
        for s in 0..sub {
            rk.step(&mut rhs, t + s as f64 * h, &mut y, h);
        }
        t = (i + 1) as f64 * job.renorm_interval;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                time: t,
                reason: format!("{} flow left the finite range", system.as_str()),
            });
        }
        let norm = y[d..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Diverged {
                time: t,
                reason: "tangent vector collapsed".into(),
            });
        }
        y[d..].iter_mut().for_each(|v| *v /= norm);
        if i >= skip {
            logs.push(norm.ln());
        }
    }

    let block_time = per_block as f64 * job.renorm_interval;
    let estimates: Vec<f64> = logs
        .chunks(per_block)
        .map(|c| c.iter().sum::<f64>() / block_time)
        .collect();
    let (mean, se) = mean_and_stderr(&estimates);
    let half = estimates.len() / 2;
    let (m1, s1) = mean_and_stderr(&estimates[..half]);
    let (m2, s2) = mean_and_stderr(&estimates[half..]);
    let converged = (m1 - m2).abs() <= 5.0 * (s1 * s1 + s2 * s2).sqrt().max(1e-15);
    Ok(LyapunovReport {
        system,
        lambda_max: mean,
        stderr: se,
        blocks: estimates.len(),
        t_total: intervals as f64 * job.renorm_interval,
        renorm_interval: job.renorm_interval,
        converged,
        block_estimates: estimates,
    })
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs independent jobs in parallel; results keep the input order.
pub fn lyapunov_scan(jobs: &[LyapunovJob], pot: &PolynomialPotential) -> Vec<Result<LyapunovReport>> {
    par::map_range(jobs.len(), |i| lyapunov_max(&jobs[i], pot))
}
