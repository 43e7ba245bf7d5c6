use serde::{Deserialize, Serialize};

use super::GaussianState;
use crate::hierarchy::wick_closure;

/// Which phase-space average a moment set represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Averages over a classical distribution.
    Classical,
    /// Averages over a Wigner function, i.e. Weyl-ordered expectation values.
    #[serde(rename = "quantum")]
    QuantumWeyl,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Classical => "classical",
            Flavor::QuantumWeyl => "quantum",
        }
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Position of `(n, k)` in the triangular layout: grouped by total order
/// `n + k`, then by increasing `k`.
#[inline]
pub(crate) fn tri_index(n: usize, k: usize) -> usize {
    let s = n + k;
    s * (s + 1) / 2 + k
}

#[inline]
pub(crate) fn tri_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Iterates `(n, k)` with `n + k <= order` in storage order.
pub(crate) fn tri_pairs(order: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=order).flat_map(|s| (0..=s).map(move |k| (s - k, k)))
}

/// Raw moments `<x^n p^k>` for all `n + k <= order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    order: usize,
    flavor: Flavor,
    values: Vec<f64>,
}

impl MomentSet {
    /// All moments zero except `<1> = 1`.
    pub fn new(order: usize, flavor: Flavor) -> Self {
        let mut values = vec![0.0; tri_len(order)];
        values[0] = 1.0;
        MomentSet { order, flavor, values }
    }

    /// Builds from storage-order values (see [`MomentSet::pairs`]).
    pub fn from_values(order: usize, flavor: Flavor, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), tri_len(order), "moment vector length mismatch");
        MomentSet { order, flavor, values }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    /// `<x^n p^k>`; panics if `n + k` exceeds the order.
    pub fn get(&self, n: usize, k: usize) -> f64 {
        assert!(n + k <= self.order, "moment ({n},{k}) above order {}", self.order);
        self.values[tri_index(n, k)]
    }

    pub fn try_get(&self, n: usize, k: usize) -> Option<f64> {
        (n + k <= self.order).then(|| self.values[tri_index(n, k)])
    }

    pub fn set(&mut self, n: usize, k: usize, value: f64) {
        assert!(n + k <= self.order, "moment ({n},{k}) above order {}", self.order);
        self.values[tri_index(n, k)] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(n, k)` in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        tri_pairs(self.order)
    }

    /// `(n, k, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        tri_pairs(self.order)
            .zip(self.values.iter())
            .map(|((n, k), &v)| (n, k, v))
    }

    pub fn mean_x(&self) -> f64 {
        self.get(1, 0)
    }

    pub fn mean_p(&self) -> f64 {
        self.get(0, 1)
    }

    /// Central second moments `(cxx, cxp, cpp)`.
    pub fn covariance(&self) -> (f64, f64, f64) {
        let (mx, mp) = (self.mean_x(), self.mean_p());
        (
            self.get(2, 0) - mx * mx,
            self.get(1, 1) - mx * mp,
            self.get(0, 2) - mp * mp,
        )
    }

    pub fn det_c(&self) -> f64 {
        let (a, b, c) = self.covariance();
        a * c - b * b
    }

    /// Copy restricted to a lower order.
    pub fn truncated(&self, order: usize) -> MomentSet {
        assert!(order <= self.order);
        MomentSet {
            order,
            flavor: self.flavor,
            values: self.values[..tri_len(order)].to_vec(),
        }
    }

    /// Largest absolute difference over the moments both sets carry.
    pub fn max_abs_diff(&self, other: &MomentSet) -> f64 {
        let order = self.order.min(other.order);
        tri_pairs(order)
            .map(|(n, k)| (self.get(n, k) - other.get(n, k)).abs())
            .fold(0.0, f64::max)
    }
}

/// Central moments `<delta^n eta^k>` together with the means they are taken about.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    order: usize,
    flavor: Flavor,
    values: Vec<f64>,
}

impl CentralMoments {
    pub fn from_values(mean_x: f64, mean_p: f64, order: usize, flavor: Flavor, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), tri_len(order));
        CentralMoments {
            mean_x,
            mean_p,
            order,
            flavor,
            values,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        assert!(n + k <= self.order, "moment ({n},{k}) above order {}", self.order);
        self.values[tri_index(n, k)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        tri_pairs(self.order)
            .zip(self.values.iter())
            .map(|((n, k), &v)| (n, k, v))
    }

    /// Inverse binomial transform back to raw moments.
    pub fn to_raw(&self) -> MomentSet {
        let values = shift_moments(self.order, |i, j| self.get(i, j), self.mean_x, self.mean_p);
        MomentSet::from_values(self.order, self.flavor, values)
    }
}

/// `<delta^n eta^k>` from `<x^n p^k>` by the binomial transform about the means.
/// First central moments are set to exactly zero.
pub fn central_from_raw(ms: &MomentSet) -> CentralMoments {
    let (mx, mp) = if ms.order >= 1 {
        (ms.mean_x(), ms.mean_p())
    } else {
        (0.0, 0.0)
    };
    let mut values = shift_moments(ms.order, |i, j| ms.get(i, j), -mx, -mp);
    if ms.order >= 1 {
        values[tri_index(1, 0)] = 0.0;
        values[tri_index(0, 1)] = 0.0;
    }
    CentralMoments {
        mean_x: mx,
        mean_p: mp,
        order: ms.order,
        flavor: ms.flavor,
        values,
    }
}

/// Moments of `(x + a, p + b)` given moments `m(i, j)` of `(x, p)`.
pub(crate) fn shift_moments(order: usize, m: impl Fn(usize, usize) -> f64, a: f64, b: f64) -> Vec<f64> {
    let pa = powers(a, order);
    let pb = powers(b, order);
    tri_pairs(order)
        .map(|(n, k)| {
            let mut acc = 0.0;
            for i in 0..=n {
                let cx = binomial(n, i) * pa[n - i];
                for j in 0..=k {
                    acc += cx * binomial(k, j) * pb[k - j] * m(i, j);
                }
            }
            acc
        })
        .collect()
}

pub(crate) fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    for _ in 0..=n {
        out.push(acc);
        acc *= x;
    }
    out
}

/// `C(n, k)` as a float; exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Analytic moments of a Gaussian through Isserlis pairing.
pub fn moments_from_gaussian(g: &GaussianState, order: usize, flavor: Flavor) -> MomentSet {
    let central = CentralMoments {
        mean_x: g.mean_x,
        mean_p: g.mean_p,
        order,
        flavor,
        values: tri_pairs(order)
            .map(|(n, k)| wick_closure(g.cxx, g.cxp, g.cpp, n, k))
            .collect(),
    };
    central.to_raw()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_round_trips() {
        for (idx, (n, k)) in tri_pairs(6).enumerate() {
            assert_eq!(tri_index(n, k), idx);
        }
        assert_eq!(tri_len(6), tri_pairs(6).count());
    }

    #[test]
    fn central_of_simple_sets() {
        let mut ms = MomentSet::new(2, Flavor::Classical);
        ms.set(1, 0, 1.0);
        ms.set(2, 0, 2.0);
        let c = central_from_raw(&ms);
        assert_eq!(c.get(2, 0), 1.0);
        assert_eq!(c.get(1, 0), 0.0);
    }

    #[test]
    fn zero_mean_central_equals_raw() {
        let g = GaussianState::new(0.0, 0.0, 0.7, 0.2, 1.3).unwrap();
        let raw = moments_from_gaussian(&g, 6, Flavor::Classical);
        let c = central_from_raw(&raw);
        for (n, k, v) in raw.iter() {
            assert_eq!(c.get(n, k), v, "({n},{k})");
        }
    }

    #[test]
    fn gaussian_even_moments() {
        let s = 0.7;
        let g = GaussianState::new(0.4, -0.2, s, 0.1, 0.9).unwrap();
        let c = central_from_raw(&moments_from_gaussian(&g, 6, Flavor::Classical));
        assert!((c.get(4, 0) - 3.0 * s * s).abs() < 1e-12);
        assert!((c.get(6, 0) - 15.0 * s * s * s).abs() < 1e-12);
        assert!((c.get(3, 1) - 3.0 * 0.1 * s).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(10, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    proptest! {
        #[test]
        fn raw_central_round_trip(
            values in proptest::collection::vec(-1.0f64..1.0, tri_len(5) - 1),
        ) {
            let mut all = vec![1.0];
            all.extend(values);
            let ms = MomentSet::from_values(5, Flavor::Classical, all);
            let back = central_from_raw(&ms).to_raw();
            for (n, k, v) in ms.iter() {
                prop_assert!((back.get(n, k) - v).abs() <= 1e-12 * v.abs().max(1.0),
                    "({}, {}) {} vs {}", n, k, back.get(n, k), v);
            }
        }
    }
}
