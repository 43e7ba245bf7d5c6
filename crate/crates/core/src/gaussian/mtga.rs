use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{propagate, Rule, TdvpState};
use crate::error::{Error, Result};
use crate::ode::Failure;
use crate::par;
use crate::potential::PolynomialPotential;
use crate::states::{moments_from_gaussian, Flavor, GaussianState, MomentSet};

/// Weighted sum of Gaussian packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSum {
    members: Vec<(f64, GaussianState)>,
}

impl GaussianSum {
    /// Weights must be non-negative and sum to one within `1e-12`.
    pub fn new(members: Vec<(f64, GaussianState)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("packets", "need at least one packet"));
        }
        for (i, (w, g)) in members.iter().enumerate() {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("packets[{i}].weight"), "must be non-negative"));
            }
            g.validate()?;
        }
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("packets", format!("weights sum to {total}, not 1")));
        }
        Ok(GaussianSum { members })
    }

    /// Rescales the weights to sum to one.
    pub fn normalized(members: Vec<(f64, GaussianState)>) -> Result<Self> {
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("packets", "weights must have a positive sum"));
        }
        Self::new(members.into_iter().map(|(w, g)| (w / total, g)).collect())
    }

    pub fn single(g: GaussianState) -> Result<Self> {
        Self::new(vec![(1.0, g)])
    }

    pub fn members(&self) -> &[(f64, GaussianState)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Equal-weight tiling of `parent`: `count` children with covariance
/// `shrink * C`, centred on the ellipse `mean + r L (cos theta_i, sin theta_i)`
/// where `L L^T = C` and `r = sqrt(2 (1 - shrink))`. For `count >= 3` the
/// mixture keeps the parent mean and covariance exactly.
pub fn auto_tile(parent: &GaussianState, count: usize, shrink: f64) -> Result<GaussianSum> {
    if count == 0 || count == 2 {
        return Err(Error::invalid(
            "tiles",
            "auto-tiling needs 1 or at least 3 packets; list two packets explicitly",
        ));
    }
    if count == 1 {
        return GaussianSum::single(*parent);
    }
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::invalid("shrink", "must lie in (0, 1)"));
    }
    let (l11, l21, l22) = parent.cholesky()?;
    let r = (2.0 * (1.0 - shrink)).sqrt();
    let w = 1.0 / count as f64;
    let members = (0..count)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / count as f64;
            let (u, v) = (r * th.cos(), r * th.sin());
            let g = GaussianState::new(
                parent.mean_x + l11 * u,
                parent.mean_p + l21 * u + l22 * v,
                shrink * parent.cxx,
                shrink * parent.cxp,
                shrink * parent.cpp,
            )?;
            Ok((w, g))
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianSum::new(members)
}

/// Per-packet equations of motion in a multiple-packet run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketRule {
    Heller,
    /// Truncated variational dynamics at second order.
    ConsistentTga,
}

impl PacketRule {
    pub fn rule(self) -> Rule {
        match self {
            PacketRule::Heller => Rule::Heller,
            PacketRule::ConsistentTga => Rule::Tga { order: 2 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MtgaRun {
    pub times: Vec<f64>,
    pub sums: Vec<GaussianSum>,
    /// Earliest packet failure, if any; samples stop there.
    pub failure: Option<Failure>,
}

/// Propagates every packet independently and reassembles the sum at each
/// output time.
pub fn mtga_propagate(
    gs: &GaussianSum,
    pot: &PolynomialPotential,
    rule: PacketRule,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<MtgaRun> {
    let runs = par::map_range(gs.len(), |i| {
        let (_, g) = gs.members[i];
        propagate(rule.rule(), pot, &TdvpState::from_gaussian(g)?, dt, t_final, stride)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let samples = runs.iter().map(|r| r.times.len()).min().unwrap_or(0);
    let failure = runs
        .iter()
        .filter_map(|r| r.failure.clone())
        .min_by(|a, b| a.time.total_cmp(&b.time));
    let times = runs[0].times[..samples].to_vec();
    let sums = (0..samples)
        .map(|s| GaussianSum {
            members: gs
                .members
                .iter()
                .zip(&runs)
                .map(|((w, _), r)| (*w, r.states[s].gaussian()))
                .collect(),
        })
        .collect();
    Ok(MtgaRun { times, sums, failure })
}

/// `sum_i w_i N(x, p; g_i)`.
pub fn mtga_density(gs: &GaussianSum, x: f64, p: f64) -> f64 {
    gs.members.iter().map(|(w, g)| w * g.density(x, p)).sum()
}

/// Weight-mixed raw moments `sum_i w_i <x^n p^k>_i`.
pub fn mtga_moments(gs: &GaussianSum, order: usize, flavor: Flavor) -> MomentSet {
    let mut out = vec![0.0; MomentSet::new(order, flavor).values().len()];
    for (w, g) in &gs.members {
        for (o, v) in out.iter_mut().zip(moments_from_gaussian(g, order, flavor).values()) {
            *o += w * v;
        }
    }
    MomentSet::from_values(order, flavor, out)
}
