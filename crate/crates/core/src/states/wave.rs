use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{Lattice, WignerGrid};
use super::moments::powers;
use super::{moments_from_wigner, Flavor, GaussianState, MomentSet};
use crate::error::{Error, Result};
use crate::par;

/// Absolute amplitude allowed at either end of the position grid when a
/// Gaussian is laid down.
pub const EDGE_AMPLITUDE: f64 = 1e-12;
/// Momentum density at the Nyquist edge, relative to its maximum.
pub const MOMENTUM_EDGE: f64 = 1e-10;
/// Highest moment order extracted from grids.
pub const MAX_GRID_ORDER: usize = 6;

/// Uniform periodic position grid with `n` nodes, `n` a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGrid {
    pub n: usize,
    pub x_min: f64,
    pub dx: f64,
}

impl PositionGrid {
    pub fn new(n: usize, x_min: f64, dx: f64) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::invalid(
                "grid_points",
                format!("must be a power of two >= 64, got {n}"),
            ));
        }
        if !(dx > 0.0 && dx.is_finite() && x_min.is_finite()) {
            return Err(Error::invalid("dx", "must be positive and finite"));
        }
        Ok(PositionGrid { n, x_min, dx })
    }

    /// `n` nodes covering `[xc - half_width, xc + half_width)`.
    pub fn centered(n: usize, xc: f64, half_width: f64) -> Result<Self> {
        Self::new(n, xc - half_width, 2.0 * half_width / n as f64)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// FFT bin `k` as a signed frequency index in `[-n/2, n/2)`.
    #[inline]
    pub fn signed(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Angular wavenumber of FFT bin `k`.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * self.signed(k) as f64 / (self.n as f64 * self.dx)
    }

    /// Spacing of the conjugate momentum grid.
    pub fn dp(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar / (self.n as f64 * self.dx)
    }
}

/// Forward/inverse FFT pair of a fixed length.
#[derive(Clone)]
pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

/// Pure quantum state sampled on a position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionGrid {
    grid: PositionGrid,
    psi: Vec<Complex64>,
    hbar: f64,
    mass: f64,
}

impl WavefunctionGrid {
    /// Wraps amplitudes, normalizing them to `sum |psi|^2 dx = 1`.
    pub fn from_amplitudes(grid: PositionGrid, mut psi: Vec<Complex64>, hbar: f64, mass: f64) -> Result<Self> {
        if psi.len() != grid.n {
            return Err(Error::invalid("psi", "length does not match grid"));
        }
        if !(hbar > 0.0) {
            return Err(Error::invalid("hbar", "must be positive"));
        }
        if !(mass > 0.0) {
            return Err(Error::invalid("mass", "must be positive"));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx;
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("psi", "cannot normalize a zero or non-finite state"));
        }
        let s = 1.0 / norm.sqrt();
        psi.iter_mut().for_each(|z| *z *= s);
        Ok(WavefunctionGrid { grid, psi, hbar, mass })
    }

    pub(crate) fn from_raw_parts(grid: PositionGrid, psi: Vec<Complex64>, hbar: f64, mass: f64) -> Self {
        WavefunctionGrid { grid, psi, hbar, mass }
    }

    /// Complex Gaussian reproducing the mean and covariance of a pure `g`.
    pub fn from_gaussian(g: &GaussianState, grid: PositionGrid, hbar: f64, mass: f64) -> Result<Self> {
        wavefunction_from_gaussian(g, grid, hbar, mass)
    }

    /// Copy rescaled to unit norm, undoing round-off drift of long runs.
    pub fn renormalized(&self) -> Self {
        let s = 1.0 / self.norm().sqrt();
        let mut w = self.clone();
        w.psi.iter_mut().for_each(|z| *z *= s);
        w
    }

    /// Equal-weight coherent sum `psi + other`, renormalized.
    pub fn superpose(&self, other: &WavefunctionGrid) -> Result<Self> {
        self.superpose_weighted(other, Complex64::new(1.0, 0.0))
    }

    /// `psi + w * other`, renormalized.
    pub fn superpose_weighted(&self, other: &WavefunctionGrid, w: Complex64) -> Result<Self> {
        if self.grid != other.grid || self.hbar != other.hbar || self.mass != other.mass {
            return Err(Error::invalid("superpose", "states live on different grids"));
        }
        let psi = self.psi.iter().zip(&other.psi).map(|(a, b)| a + w * b).collect();
        Self::from_amplitudes(self.grid, psi, self.hbar, self.mass)
    }

    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.psi
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.psi
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `sum |psi|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn position_density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Momentum density on the conjugate grid, sorted by ascending `p`.
    /// Returns `(p, |phi(p)|^2)` normalized so that `sum density * dp = 1`.
    pub fn momentum_density(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        let mut buf = self.psi.clone();
        FftPair::new(n).forward.process(&mut buf);
        let scale = self.grid.dx * self.grid.dx / (2.0 * PI * self.hbar);
        let dp = self.grid.dp(self.hbar);
        let half = n / 2;
        let mut ps = Vec::with_capacity(n);
        let mut dens = Vec::with_capacity(n);
        for q in 0..n {
            let k = (q + half) % n;
            ps.push(self.grid.signed(k) as f64 * dp);
            dens.push(buf[k].norm_sqr() * scale);
        }
        (ps, dens)
    }

    /// Largest position density at the two end nodes, relative to the peak.
    pub fn position_edge_ratio(&self) -> f64 {
        let d = self.position_density();
        let max = d.iter().copied().fold(0.0, f64::max);
        d[0].max(d[d.len() - 1]) / max
    }

    /// Largest momentum density at the two Nyquist ends, relative to the peak.
    pub fn momentum_edge_ratio(&self) -> f64 {
        let (_, d) = self.momentum_density();
        let max = d.iter().copied().fold(0.0, f64::max);
        d[0].max(d[d.len() - 1]) / max
    }

    /// `psi` resampled at the half-grid points `x_j + dx / 2` by Fourier
    /// interpolation.
    fn half_shifted(&self, fft: &FftPair) -> Vec<Complex64> {
        let n = self.grid.n;
        let mut buf = self.psi.clone();
        fft.forward.process(&mut buf);
        let h = 0.5 * self.grid.dx;
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0 / n as f64, self.grid.wavenumber(k) * h);
        }
        fft.inverse.process(&mut buf);
        buf
    }
}

/// Lays a pure Gaussian on the grid.
///
/// With `delta = x - mean_x` the amplitude is
/// `exp(-(alpha + i beta) delta^2 + i mean_p delta / hbar)` where
/// `alpha = 1 / (4 cxx)` fixes the position width and
/// `beta = -cxp / (2 hbar cxx)` produces the local momentum
/// `mean_p - 2 hbar beta delta` whose correlation with `delta` is `cxp`.
pub fn wavefunction_from_gaussian(
    g: &GaussianState,
    grid: PositionGrid,
    hbar: f64,
    mass: f64,
) -> Result<WavefunctionGrid> {
    g.validate()?;
    if !g.is_pure(hbar) {
        return Err(Error::NotRealizable(format!(
            "wavefunction needs a pure state: det C = {} but hbar^2/4 = {}",
            g.det(),
            0.25 * hbar * hbar
        )));
    }
    let alpha = 0.25 / g.cxx;
    let beta = -g.cxp / (2.0 * hbar * g.cxx);
    let psi = (0..grid.n)
        .map(|j| {
            let d = grid.x(j) - g.mean_x;
            let phase = -beta * d * d + g.mean_p * d / hbar;
            Complex64::from_polar((-alpha * d * d).exp(), phase)
        })
        .collect();
    let w = WavefunctionGrid::from_amplitudes(grid, psi, hbar, mass)?;
    let edge = w.psi[0].norm().max(w.psi[grid.n - 1].norm());
    if edge >= EDGE_AMPLITUDE {
        return Err(Error::GridClipped(format!(
            "|psi| = {edge:e} at the position edge; widen the grid"
        )));
    }
    let medge = w.momentum_edge_ratio();
    if medge >= MOMENTUM_EDGE {
        return Err(Error::GridClipped(format!(
            "momentum density ratio {medge:e} at the Nyquist edge; refine dx"
        )));
    }
    Ok(w)
}

/// Wigner function by a per-row discrete Fourier transform over the offset.
///
/// For row `x_j` the offsets are `Delta = s dx`, `s in [-n, n)`, which covers
/// every pair of points inside the box. `psi(x_j +- Delta / 2)` lands on grid
/// nodes for even `s` and on half-grid nodes for odd `s`; the latter come
/// from a Fourier-interpolated copy of `psi`. The momentum axis has `2 n`
/// points spaced `dp / 2` over the same range `[-n dp / 2, n dp / 2)` as the
/// momentum density, where `dp = 2 pi hbar / (n dx)`.
pub fn wigner_transform(w: &WavefunctionGrid) -> Result<WignerGrid> {
    let norm = w.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("psi", format!("not normalized (norm {norm})")));
    }
    let w = &w.renormalized();
    let g = w.grid;
    let n = g.n;
    if w.position_edge_ratio() >= MOMENTUM_EDGE {
        return Err(Error::GridClipped("wavefunction reaches the position edge".into()));
    }
    let half = w.half_shifted(&FftPair::new(n));
    let fft = FftPair::new(2 * n);
    let psi = &w.psi;
    let hbar = w.hbar;
    let dp = 0.5 * g.dp(hbar);
    let scale = g.dx / (2.0 * PI * hbar);
    let at = |v: &[Complex64], i: i64| -> Complex64 {
        if i < 0 || i >= n as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            v[i as usize]
        }
    };
    let rows = par::map_range(n, |j| {
        let j = j as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (m, slot) in buf.iter_mut().enumerate() {
            let s = if m < n { m as i64 } else { m as i64 - 2 * n as i64 };
            let (u, v) = if s % 2 == 0 {
                let r = s / 2;
                (at(psi, j + r), at(psi, j - r))
            } else {
                let r = (s - 1).div_euclid(2);
                (at(&half, j + r), at(&half, j - r - 1))
            };
            *slot = u * v.conj();
        }
        // The unpaired offset -n aliases +n, whose integrand is the
        // conjugate; averaging the two keeps the row real and even.
        buf[n] = Complex64::new(buf[n].re, 0.0);
        fft.forward.process(&mut buf);
        let mut row = vec![0.0; 2 * n];
        for (q, out) in row.iter_mut().enumerate() {
            *out = buf[(q + n) % (2 * n)].re * scale;
        }
        row
    });
    let lattice = Lattice {
        nx: n,
        np: 2 * n,
        x_min: g.x_min,
        dx: g.dx,
        p_min: -(n as f64) * dp,
        dp,
    };
    Ok(WignerGrid {
        lattice,
        values: rows.concat(),
        hbar,
    })
}

/// Weyl-ordered moments of a pure state up to `order`.
///
/// Pure position powers come from `|psi|^2`, pure momentum powers from the
/// momentum density, and mixed moments are phase-space averages over the
/// Wigner grid.
pub fn moments_from_wavefunction(w: &WavefunctionGrid, order: usize) -> Result<MomentSet> {
    if order > MAX_GRID_ORDER {
        return Err(Error::invalid(
            "order",
            format!("grid moments are limited to order {MAX_GRID_ORDER}"),
        ));
    }
    let w = &w.renormalized();
    let edge = w.momentum_edge_ratio();
    if edge > MOMENTUM_EDGE {
        return Err(Error::GridClipped(format!(
            "momentum density ratio {edge:e} at the Nyquist edge (aliasing)"
        )));
    }
    let mut ms = if order >= 2 {
        moments_from_wigner(&wigner_transform(w)?, order)
    } else {
        MomentSet::new(order, Flavor::QuantumWeyl)
    };
    let dx = w.grid.dx;
    let pos = w.position_density();
    let mut xs = vec![0.0; order + 1];
    for (j, d) in pos.iter().enumerate() {
        for (n, pw) in powers(w.grid.x(j), order).into_iter().enumerate() {
            xs[n] += pw * d;
        }
    }
    let (ps, mom) = w.momentum_density();
    let dp = w.grid.dp(w.hbar);
    let mut pk = vec![0.0; order + 1];
    for (p, d) in ps.iter().zip(&mom) {
        for (k, pw) in powers(*p, order).into_iter().enumerate() {
            pk[k] += pw * d;
        }
    }
    ms.set(0, 0, 1.0);
    for n in 1..=order {
        ms.set(n, 0, xs[n] * dx);
        ms.set(0, n, pk[n] * dp);
    }
    Ok(ms)
}
