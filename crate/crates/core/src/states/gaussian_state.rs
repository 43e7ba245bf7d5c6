use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `det C = hbar^2 / 4` for a pure state.
pub const PURITY_TOLERANCE: f64 = 1e-12;

/// Phase-space Gaussian: mean point and central covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean_x: f64,
    pub mean_p: f64,
    /// `<delta^2>`
    pub cxx: f64,
    /// `<delta eta>` (symmetrized)
    pub cxp: f64,
    /// `<eta^2>`
    pub cpp: f64,
}

impl GaussianState {
    pub fn new(mean_x: f64, mean_p: f64, cxx: f64, cxp: f64, cpp: f64) -> Result<Self> {
        let g = GaussianState {
            mean_x,
            mean_p,
            cxx,
            cxp,
            cpp,
        };
        g.validate()?;
        Ok(g)
    }

    /// Pure state: `cpp` fixed by `cxx cpp - cxp^2 = hbar^2 / 4`.
    pub fn pure(mean_x: f64, mean_p: f64, cxx: f64, cxp: f64, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::invalid("hbar", "must be positive"));
        }
        if !(cxx > 0.0) {
            return Err(Error::invalid("cxx", format!("must be positive, got {cxx}")));
        }
        Self::new(mean_x, mean_p, cxx, cxp, (0.25 * hbar * hbar + cxp * cxp) / cxx)
    }

    /// Oscillator coherent state centred at `(x, p)`.
    pub fn coherent(mean_x: f64, mean_p: f64, mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        Self::new(
            mean_x,
            mean_p,
            hbar / (2.0 * mass * omega),
            0.0,
            0.5 * hbar * mass * omega,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mean_x", self.mean_x),
            ("mean_p", self.mean_p),
            ("cxx", self.cxx),
            ("cxp", self.cxp),
            ("cpp", self.cpp),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.cxx <= 0.0 {
            return Err(Error::invalid("cxx", format!("must be positive, got {}", self.cxx)));
        }
        if self.cpp <= 0.0 {
            return Err(Error::invalid("cpp", format!("must be positive, got {}", self.cpp)));
        }
        if self.det() <= 0.0 {
            return Err(Error::NotRealizable(format!(
                "covariance determinant {} is not positive",
                self.det()
            )));
        }
        Ok(())
    }

    /// `cxx cpp - cxp^2`.
    pub fn det(&self) -> f64 {
        self.cxx * self.cpp - self.cxp * self.cxp
    }

    pub fn is_pure(&self, hbar: f64) -> bool {
        let target = 0.25 * hbar * hbar;
        ((self.det() - target) / target).abs() <= PURITY_TOLERANCE
    }

    /// Satisfies the uncertainty bound `det C >= hbar^2 / 4`.
    pub fn is_quantum_admissible(&self, hbar: f64) -> bool {
        self.det() >= 0.25 * hbar * hbar * (1.0 - PURITY_TOLERANCE)
    }

    /// Lower-triangular factor `L` with `L L^T = C`: `(l11, l21, l22)`.
    pub fn cholesky(&self) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let l11 = self.cxx.sqrt();
        let l21 = self.cxp / l11;
        let l22 = (self.cpp - l21 * l21).sqrt();
        if !(l22 > 0.0) {
            return Err(Error::NotRealizable("covariance is not positive definite".into()));
        }
        Ok((l11, l21, l22))
    }

    /// Normalized phase-space density at `(x, p)`.
    pub fn density(&self, x: f64, p: f64) -> f64 {
        let det = self.det();
        let dx = x - self.mean_x;
        let dp = p - self.mean_p;
        let q = (self.cpp * dx * dx - 2.0 * self.cxp * dx * dp + self.cxx * dp * dp) / det;
        (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
    }

    pub fn sigma2(&self) -> Result<f64> {
        sigma2_of_gaussian(self)
    }
}

/// `int f^2 dx dp = 1 / (4 pi sqrt(det C))`.
pub fn sigma2_of_gaussian(g: &GaussianState) -> Result<f64> {
    let det = g.det();
    if !(det > 0.0) {
        return Err(Error::NotRealizable(format!(
            "covariance determinant {det} is not positive"
        )));
    }
    Ok(1.0 / (4.0 * PI * det.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma2_examples() {
        let coherent = GaussianState::new(0.0, 0.0, 0.5, 0.0, 0.5).unwrap();
        assert!((coherent.sigma2().unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let unit = GaussianState::new(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((unit.sigma2().unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let sheared = GaussianState::new(0.0, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert!((sheared.sigma2().unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn sigma2_rejects_degenerate_covariance() {
        let g = GaussianState {
            mean_x: 0.0,
            mean_p: 0.0,
            cxx: 1.0,
            cxp: 1.0,
            cpp: 1.0,
        };
        assert!(sigma2_of_gaussian(&g).is_err());
        assert!(GaussianState::new(0.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn invalid_fields_are_named() {
        match GaussianState::new(0.0, 0.0, -1.0, 0.0, 1.0) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "cxx"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pure_constructor_saturates_uncertainty() {
        let g = GaussianState::pure(0.3, -1.0, 0.5, 0.3, 1.0).unwrap();
        assert!(g.is_pure(1.0));
        assert!((g.cpp - (0.25 + 0.09) / 0.5).abs() < 1e-15);
        let mixed = GaussianState::new(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(!mixed.is_pure(1.0));
        assert!(mixed.is_quantum_admissible(1.0));
    }
}
