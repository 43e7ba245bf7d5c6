use serde::{Deserialize, Serialize};

use super::moments::{powers, tri_len, tri_pairs};
use super::{Flavor, GaussianState, MomentSet};
use crate::error::{Error, Result};
use crate::par;

/// Uniform `(x, p)` lattice. Values are stored row-major with `x` as the
/// slow index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub np: usize,
    pub x_min: f64,
    pub dx: f64,
    pub p_min: f64,
    pub dp: f64,
}

impl Lattice {
    /// Symmetric box `[-x_half, x_half) x [-p_half, p_half)` around `(xc, pc)`.
    pub fn centered(nx: usize, np: usize, xc: f64, x_half: f64, pc: f64, p_half: f64) -> Result<Self> {
        if nx < 4 || np < 4 {
            return Err(Error::invalid("grid", "need at least 4 nodes per axis"));
        }
        if !(x_half > 0.0 && p_half > 0.0) {
            return Err(Error::invalid("grid", "half widths must be positive"));
        }
        Ok(Lattice {
            nx,
            np,
            x_min: xc - x_half,
            dx: 2.0 * x_half / nx as f64,
            p_min: pc - p_half,
            dp: 2.0 * p_half / np as f64,
        })
    }

    /// Same box with twice the nodes per axis.
    pub fn refined(&self) -> Lattice {
        Lattice {
            nx: 2 * self.nx,
            np: 2 * self.np,
            dx: 0.5 * self.dx,
            dp: 0.5 * self.dp,
            ..*self
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    #[inline]
    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dp
    }
}

/// Real density sampled on a lattice.
pub trait PhaseDensity {
    fn lattice(&self) -> &Lattice;
    fn values(&self) -> &[f64];
}

/// Wigner function on an `(x, p)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub hbar: f64,
}

/// Classical phase-space density on an `(x, p)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl PhaseDensity for WignerGrid {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl PhaseDensity for PhaseSpaceGrid {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl WignerGrid {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lattice point of the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let (idx, _) =
            self.values.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
        let l = &self.lattice;
        (l.x(idx / l.np), l.p(idx % l.np))
    }

    /// `int f dp` at every `x` node.
    pub fn position_marginal(&self) -> Vec<f64> {
        marginal_x(&self.lattice, &self.values)
    }

    /// `int f dx` at every `p` node.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        marginal_p(&self.lattice, &self.values)
    }
}

impl PhaseSpaceGrid {
    /// Samples a Gaussian density on the lattice.
    pub fn from_gaussian(g: &GaussianState, lattice: Lattice) -> Result<Self> {
        g.validate()?;
        let mut values = vec![0.0; lattice.len()];
        par::fill(&mut values, |idx| {
            g.density(lattice.x(idx / lattice.np), lattice.p(idx % lattice.np))
        });
        Ok(PhaseSpaceGrid { lattice, values })
    }

    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::invalid("values", "length does not match the lattice"));
        }
        Ok(PhaseSpaceGrid { lattice, values })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fraction of `int |f|` held in the outermost `width` rows and columns.
    pub fn boundary_fraction(&self, width: usize) -> f64 {
        let l = &self.lattice;
        let mut edge = 0.0;
        let mut total = 0.0;
        for i in 0..l.nx {
            for j in 0..l.np {
                let v = self.values[i * l.np + j].abs();
                total += v;
                if i < width || j < width || i + width >= l.nx || j + width >= l.np {
                    edge += v;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    /// L2 distance `sqrt(int (f - g)^2)` on a shared lattice.
    pub fn l2_distance(&self, other: &PhaseSpaceGrid) -> f64 {
        assert_eq!(self.lattice, other.lattice, "lattices differ");
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (s * self.lattice.cell_area()).sqrt()
    }
}

fn marginal_x(l: &Lattice, values: &[f64]) -> Vec<f64> {
    (0..l.nx)
        .map(|i| values[i * l.np..(i + 1) * l.np].iter().sum::<f64>() * l.dp)
        .collect()
}

fn marginal_p(l: &Lattice, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; l.np];
    for i in 0..l.nx {
        for (o, v) in out.iter_mut().zip(&values[i * l.np..(i + 1) * l.np]) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v *= l.dx);
    out
}

/// Riemann sum `int f^n dx dp`.
pub fn sigma_n<D: PhaseDensity + ?Sized>(grid: &D, n: u32) -> f64 {
    let l = grid.lattice();
    let partial = par::map_chunks(grid.values(), par::CHUNK, |_, block| {
        block.iter().map(|v| v.powi(n as i32)).sum::<f64>()
    });
    partial.into_iter().sum::<f64>() * l.cell_area()
}

/// Riemann sums `int x^n p^k f dx dp` over any gridded density.
pub fn moments_from_grid<D: PhaseDensity + ?Sized>(grid: &D, order: usize, flavor: Flavor) -> MomentSet {
    let l = *grid.lattice();
    let len = tri_len(order);
    let values = grid.values();
    let rows = par::map_range(l.nx, |i| {
        let px = powers(l.x(i), order);
        let mut acc = vec![0.0; len];
        // Per-row p-power sums first, then combine with x powers.
        let mut pk = vec![0.0; order + 1];
        for j in 0..l.np {
            let f = values[i * l.np + j];
            let mut w = f;
            let p = l.p(j);
            for slot in pk.iter_mut() {
                *slot += w;
                w *= p;
            }
        }
        for (idx, (n, k)) in tri_pairs(order).enumerate() {
            acc[idx] = px[n] * pk[k];
        }
        acc
    });
    let mut out = vec![0.0; len];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let area = l.cell_area();
    out.iter_mut().for_each(|v| *v *= area);
    MomentSet::from_values(order, flavor, out)
}

/// Weyl-ordered moments as phase-space averages over a Wigner grid.
pub fn moments_from_wigner(w: &WignerGrid, order: usize) -> MomentSet {
    moments_from_grid(w, order, Flavor::QuantumWeyl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_grid_normalization_and_sigma() {
        let g = GaussianState::new(0.2, -0.1, 1.0, 0.0, 1.0).unwrap();
        let l = Lattice::centered(128, 128, 0.0, 9.0, 0.0, 9.0).unwrap();
        let f = PhaseSpaceGrid::from_gaussian(&g, l).unwrap();
        assert!((sigma_n(&f, 1) - 1.0).abs() < 1e-6);
        // det C = 1 mixed state: 1 / (4 pi).
        let s2 = sigma_n(&f, 2);
        assert!((s2 * 4.0 * PI - 1.0).abs() < 1e-3, "sigma2 = {s2}");
        assert!(f.boundary_fraction(2) < 1e-12);
    }

    #[test]
    fn sigma2_quadrature_oracle() {
        // Independent check of int f^2 = 1/(4 pi sqrt(det C)) by brute-force
        // midpoint quadrature for a sheared covariance.
        let g = GaussianState::new(0.0, 0.0, 2.0, 1.0, 1.0).unwrap();
        let h = 0.02;
        let mut s = 0.0;
        let mut x = -12.0 + 0.5 * h;
        while x < 12.0 {
            let mut p = -8.0 + 0.5 * h;
            while p < 8.0 {
                let f = g.density(x, p);
                s += f * f;
                p += h;
            }
            x += h;
        }
        s *= h * h;
        assert!((s - g.sigma2().unwrap()).abs() < 1e-3 * s);
    }

    #[test]
    fn grid_moments_match_wick() {
        let g = GaussianState::new(0.5, 0.3, 0.4, 0.1, 0.8).unwrap();
        let l = Lattice::centered(160, 160, 0.5, 8.0, 0.3, 10.0).unwrap();
        let f = PhaseSpaceGrid::from_gaussian(&g, l).unwrap();
        let m = moments_from_grid(&f, 4, Flavor::Classical);
        let exact = super::super::moments_from_gaussian(&g, 4, Flavor::Classical);
        assert!(m.max_abs_diff(&exact) < 1e-9, "{}", m.max_abs_diff(&exact));
    }

    #[test]
    fn marginals_of_phase_grid() {
        let g = GaussianState::new(0.0, 0.0, 0.5, 0.0, 0.5).unwrap();
        let l = Lattice::centered(64, 64, 0.0, 6.0, 0.0, 6.0).unwrap();
        let f = PhaseSpaceGrid::from_gaussian(&g, l).unwrap();
        let mx = marginal_x(&l, &f.values);
        let xs: f64 = mx.iter().sum::<f64>() * l.dx;
        assert!((xs - 1.0).abs() < 1e-9);
    }
}
