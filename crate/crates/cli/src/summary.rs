//! `summary.json`: the machine-readable verdict of a run.

use serde::{Deserialize, Serialize};

use phaseflow::gaussian::LyapunovReport;

use crate::compare::PairDeviation;
use crate::run::FailureInfo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// Seconds since the Unix epoch when the run finished.
    pub created_unix: u64,
    pub threads: usize,
    pub parallel: bool,
}

impl Metadata {
    pub fn now() -> Metadata {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            threads: phaseflow::par::thread_count(),
            parallel: cfg!(feature = "parallel"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub hbar: f64,
    pub dynamical_time: f64,
    pub metadata: Metadata,
    pub status: String,
    pub treatments: Vec<TreatmentSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chaos_points: Vec<ChaosPoint>,
    /// `(measured - classical - correction) / correction` for the third
    /// momentum moment at `t = 0`.
    #[serde(rename = "eq15_residual", default, skip_serializing_if = "Option::is_none")]
    pub third_moment_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_moment: Option<ThirdMomentCheck>,
}

impl Summary {
    pub fn treatment(&self, label: &str) -> Option<&TreatmentSummary> {
        self.treatments.iter().find(|t| t.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSummary {
    pub label: String,
    pub kind: String,
    pub status: String,
    pub failure: Option<FailureInfo>,
    pub samples: usize,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conservation: Option<Conservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heller_drift: Option<HellerDriftCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lyapunov: Vec<LyapunovPoint>,
}

/// Largest excursions of the conserved (or nominally conserved) quantities
/// over the output samples, relative to their initial values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    pub energy_initial: f64,
    pub energy_max_rel_drift: f64,
    pub det_c_initial: f64,
    pub det_c_max_rel_drift: f64,
    pub constraint_max_abs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_max_drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_max_rel_drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma4_max_rel_variation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerCheck {
    pub initial_min_over_max: f64,
    pub worst_min_over_max: f64,
}

/// `sigma_1..3` budget of a Liouville grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCheck {
    pub initial: [f64; 3],
    pub last: [f64; 3],
    pub max_relative_drift: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_max_relative_drift: Option<[f64; 3]>,
    /// Coarse over refined drift of `sigma_2` and `sigma_3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_gain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HellerDriftCheck {
    pub step: f64,
    pub max_abs_mismatch: f64,
    pub max_abs_formula: f64,
    pub max_abs_finite_difference: f64,
    /// Mismatch over the largest formula value; absent when the formula
    /// vanishes throughout.
    pub relative_mismatch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdMomentCheck {
    pub finite_difference_rate: Option<f64>,
    pub classical_rate: f64,
    pub correction: f64,
    pub relative_residual: Option<f64>,
    pub ensemble_rate: Option<f64>,
    pub ensemble_stderr: Option<f64>,
    /// `(quantum - ensemble - correction) / stderr`.
    pub ensemble_z: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovPoint {
    pub mean_x: f64,
    pub cxx: f64,
    pub report: Option<LyapunovReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosPoint {
    pub mean_x: f64,
    pub cxx: f64,
    pub lambda_4d: f64,
    pub stderr_4d: f64,
    pub lambda_2d: f64,
    pub stderr_2d: f64,
    /// Positive 4D exponent at three standard errors with a regular
    /// mean-field orbit.
    pub quantum_induced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub tolerance: f64,
    pub samples: usize,
    pub max_deviation: f64,
    pub all_within: bool,
    pub pairs: Vec<PairDeviation>,
}
