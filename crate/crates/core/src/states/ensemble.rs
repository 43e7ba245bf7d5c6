use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::moments::{powers, tri_index, tri_len, tri_pairs};
use super::{Flavor, GaussianState, MomentSet};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub p: f64,
}

/// Equally weighted classical particles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    particles: Vec<Particle>,
}

impl TrajectoryEnsemble {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid("particles", "ensemble needs at least one particle"));
        }
        if let Some(i) = particles.iter().position(|q| !(q.x.is_finite() && q.p.is_finite())) {
            return Err(Error::invalid(format!("particles[{i}]"), "coordinates must be finite"));
        }
        Ok(TrajectoryEnsemble { particles })
    }

    /// Single trajectory: the delta-function limit of a classical distribution.
    pub fn point(x: f64, p: f64) -> Result<Self> {
        Self::new(vec![Particle { x, p }])
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }
}

/// Draws `count` particles from the bivariate normal `g`.
///
/// Particles are generated in chunks of [`par::CHUNK`]; chunk `c` uses the
/// ChaCha8 stream `c` of the seed, so the ensemble does not depend on how
/// many threads produce it.
pub fn sample_ensemble(g: &GaussianState, count: usize, seed: u64) -> Result<TrajectoryEnsemble> {
    if count == 0 {
        return Err(Error::invalid("particles", "ensemble needs at least one particle"));
    }
    let (l11, l21, l22) = g.cholesky()?;
    let mut particles = vec![Particle { x: 0.0, p: 0.0 }; count];
    par::map_chunks_mut(&mut particles, par::CHUNK, |c, block| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for q in block.iter_mut() {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            q.x = g.mean_x + l11 * z1;
            q.p = g.mean_p + l21 * z1 + l22 * z2;
        }
    });
    Ok(TrajectoryEnsemble { particles })
}

/// Sample moments with their standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleMoments {
    pub moments: MomentSet,
    /// Standard error of each sample mean `<x^n p^k>`, same layout.
    pub stderr: MomentSet,
}

/// Raw power sums `sum_i x^n p^k` up to `order`, reduced chunk by chunk in
/// index order.
fn power_sums(e: &TrajectoryEnsemble, order: usize) -> Vec<f64> {
    let len = tri_len(order);
    let partials = par::map_chunks(e.particles(), par::CHUNK, |_, block| {
        let mut acc = vec![0.0; len];
        for q in block {
            let px = powers(q.x, order);
            let pp = powers(q.p, order);
            for (idx, (n, k)) in tri_pairs(order).enumerate() {
                acc[idx] += px[n] * pp[k];
            }
        }
        acc
    });
    let mut total = vec![0.0; len];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

/// Equal-weight sample averages `<x^n p^k>`.
pub fn moments_from_ensemble(e: &TrajectoryEnsemble, order: usize) -> MomentSet {
    let inv = 1.0 / e.len() as f64;
    let mut values = power_sums(e, order);
    values.iter_mut().for_each(|v| *v *= inv);
    values[0] = 1.0;
    MomentSet::from_values(order, Flavor::Classical, values)
}

impl EnsembleMoments {
    pub fn measure(e: &TrajectoryEnsemble, order: usize) -> Self {
        let n = e.len() as f64;
        let sums = power_sums(e, 2 * order);
        let mean = |i: usize, j: usize| sums[tri_index(i, j)] / n;
        let mut moments = MomentSet::new(order, Flavor::Classical);
        let mut stderr = MomentSet::new(order, Flavor::Classical);
        stderr.set(0, 0, 0.0);
        for (i, j) in tri_pairs(order).skip(1) {
            let m = mean(i, j);
            let var = (mean(2 * i, 2 * j) - m * m).max(0.0) * n / (n - 1.0).max(1.0);
            moments.set(i, j, m);
            stderr.set(i, j, (var / n).sqrt());
        }
        EnsembleMoments { moments, stderr }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_ensemble_moments() {
        let g = GaussianState::new(0.3, -0.1, 0.5, 0.1, 0.5).unwrap();
        let e = sample_ensemble(&g, 1, 11).unwrap();
        let m = moments_from_ensemble(&e, 2);
        let q = e.particles()[0];
        assert_eq!(m.mean_x(), q.x);
        assert_eq!(m.mean_p(), q.p);
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = GaussianState::new(0.0, 0.0, 0.5, 0.0, 0.5).unwrap();
        let a = sample_ensemble(&g, 10_000, 42).unwrap();
        let b = sample_ensemble(&g, 10_000, 42).unwrap();
        assert!(a
            .particles()
            .iter()
            .zip(b.particles())
            .all(|(u, v)| u.x.to_bits() == v.x.to_bits() && u.p.to_bits() == v.p.to_bits()));
        let c = sample_ensemble(&g, 10_000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn million_sample_variance_within_three_sigma() {
        // Var of the sample variance of a normal: 2 s^2 / N, so 3 sigma = 3 sqrt(2/N) s.
        let s = 0.5;
        let n = 1_000_000;
        let band = 3.0 * (2.0 / n as f64).sqrt() * s;
        assert!(band < 0.005 + 1e-12);
        let g = GaussianState::new(0.0, 0.0, s, 0.0, 0.5).unwrap();
        let e = sample_ensemble(&g, n, 2024).unwrap();
        let (cxx, _, _) = moments_from_ensemble(&e, 2).covariance();
        assert!((cxx - s).abs() < band, "cxx = {cxx}");
    }

    #[test]
    fn rejects_empty_and_degenerate() {
        let g = GaussianState::new(0.0, 0.0, 0.5, 0.0, 0.5).unwrap();
        assert!(sample_ensemble(&g, 0, 1).is_err());
        let bad = GaussianState {
            mean_x: 0.0,
            mean_p: 0.0,
            cxx: 1.0,
            cxp: 1.0,
            cpp: 1.0,
        };
        assert!(sample_ensemble(&bad, 10, 1).is_err());
    }
}
