//! One-dimensional polynomial potentials with optional harmonic drive.
//!
//! `V(x, t) = sum_k c_k(t) x^k` with `c_k(t) = c_k + a_k cos(w_k t + phi_k)`.
//! Every derivative is an exact finite polynomial, so the Taylor sums that
//! appear in the moment equations terminate at the degree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 10;

/// Cosine drive on a single coefficient: `c_k += amp * cos(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub k: usize,
    pub amp: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    coeffs: Vec<f64>,
    drives: Vec<Drive>,
    mass: f64,
    degree: usize,
}

impl PolynomialPotential {
    pub fn new(coeffs: Vec<f64>, mass: f64) -> Result<Self> {
        Self::with_drives(coeffs, Vec::new(), mass)
    }

    pub fn with_drives(mut coeffs: Vec<f64>, drives: Vec<Drive>, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coeffs[{bad}]"), "must be finite"));
        }
        for d in &drives {
            if d.k > MAX_DEGREE {
                return Err(Error::invalid(
                    "drive.k",
                    format!("degree {} exceeds ceiling {MAX_DEGREE}", d.k),
                ));
            }
            if !(d.amp.is_finite() && d.omega.is_finite() && d.phase.is_finite()) {
                return Err(Error::invalid("drive", "amplitude, omega and phase must be finite"));
            }
        }
        let driven_top = drives.iter().filter(|d| d.amp != 0.0).map(|d| d.k).max();
        let static_top = coeffs.iter().rposition(|&c| c != 0.0);
        let degree = static_top.max(driven_top).unwrap_or(0);
        if degree > MAX_DEGREE {
            return Err(Error::invalid(
                "coeffs",
                format!("degree {degree} exceeds ceiling {MAX_DEGREE}"),
            ));
        }
        coeffs.resize(degree + 1, 0.0);
        let drives = drives.into_iter().filter(|d| d.amp != 0.0).collect();
        Ok(PolynomialPotential {
            coeffs,
            drives,
            mass,
            degree,
        })
    }

    /// `V = 0`.
    pub fn free(mass: f64) -> Result<Self> {
        Self::new(vec![0.0], mass)
    }

    /// `V = m w^2 x^2 / 2`; a negative `omega_sq` gives the inverted oscillator.
    pub fn quadratic(mass: f64, omega_sq: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0, 0.5 * mass * omega_sq], mass)
    }

    /// `V = alpha x^3`.
    pub fn cubic(alpha: f64, mass: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0, 0.0, alpha], mass)
    }

    /// `V = k2 x^2 + k4 x^4`.
    pub fn quartic(k2: f64, k4: f64, mass: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0, k2, 0.0, k4], mass)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn drives(&self) -> &[Drive] {
        &self.drives
    }

    pub fn is_static(&self) -> bool {
        self.drives.is_empty()
    }

    /// Undriven coefficients `c_0 ..= c_d`.
    pub fn base_coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `c_k(t)`.
    pub fn coefficient(&self, k: usize, t: f64) -> f64 {
        let mut c = self.coeffs.get(k).copied().unwrap_or(0.0);
        for d in self.drives.iter().filter(|d| d.k == k) {
            c += d.amp * (d.omega * t + d.phase).cos();
        }
        c
    }

    /// All coefficients of the time-frozen polynomial at `t`.
    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        if self.drives.is_empty() {
            return self.coeffs.clone();
        }
        (0..=self.degree).map(|k| self.coefficient(k, t)).collect()
    }

    pub fn evaluate(&self, x: f64, t: f64) -> f64 {
        horner(&self.coefficients_at(t), x)
    }

    /// `d^n V / dx^n` at `(x, t)`; exactly zero above the degree.
    pub fn derivative(&self, n: usize, x: f64, t: f64) -> f64 {
        if n > self.degree {
            return 0.0;
        }
        horner(&derivative_coefficients(&self.coefficients_at(t), n), x)
    }

    /// `[V(x), V'(x), ..., V^(d)(x)]`.
    pub fn derivatives_at(&self, x: f64, t: f64) -> Vec<f64> {
        let c = self.coefficients_at(t);
        (0..=self.degree)
            .map(|n| horner(&derivative_coefficients(&c, n), x))
            .collect()
    }

    /// Coefficients of `V^(n)` as a polynomial in `x`; empty above the degree.
    pub fn derivative_coefficients(&self, n: usize, t: f64) -> Vec<f64> {
        derivative_coefficients(&self.coefficients_at(t), n)
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `n`-th derivative of `sum_k c_k x^k`, as coefficients.
pub(crate) fn derivative_coefficients(coeffs: &[f64], n: usize) -> Vec<f64> {
    if n >= coeffs.len() {
        return Vec::new();
    }
    (n..coeffs.len()).map(|k| coeffs[k] * falling_factorial(k, n)).collect()
}

/// `k! / (k - n)!`.
pub(crate) fn falling_factorial(k: usize, n: usize) -> f64 {
    ((k + 1 - n)..=k).map(|j| j as f64).product()
}
