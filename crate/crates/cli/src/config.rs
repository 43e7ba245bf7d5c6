//! Scenario files: one TOML document per experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use phaseflow::gaussian::{LyapunovSystem, PacketRule, TdvpState};
use phaseflow::hierarchy::{Closure, HierarchySpec, MAX_ORDER};
use phaseflow::oracles::Splitting;
use phaseflow::potential::Drive;
use phaseflow::{Flavor, GaussianState, PolynomialPotential};

/// A configuration problem, tagged with the dotted path of the field.
#[derive(Debug, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

fn bad(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        reason: reason.into(),
    }
}

type Check = std::result::Result<(), ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub hbar: f64,
    /// Reference time scale of the scenario. The default step is
    /// `1e-3 * dynamical_time` and the default Lyapunov renormalization
    /// interval is half of it.
    pub dynamical_time: f64,
    /// Highest `n + k` exported for every treatment.
    #[serde(default = "default_moment_order")]
    pub moment_order: usize,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub checks: Checks,
    #[serde(rename = "treatment", default)]
    pub treatments: Vec<Treatment>,
}

fn default_moment_order() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `V(x) = sum_k coefficients[k] x^k`.
    pub coefficients: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drives: Vec<Drive>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub mean_x: f64,
    #[serde(default)]
    pub mean_p: f64,
    pub cxx: f64,
    #[serde(default)]
    pub cxp: f64,
    /// Required unless `pure`, in which case it defaults to the value that
    /// makes `det C = hbar^2 / 4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpp: Option<f64>,
    #[serde(default)]
    pub pure: bool,
    /// Overrides the phase-space volume constant of the Gaussian rules;
    /// defaults to `1 / (2 pi hbar)` for pure states and to the value read
    /// off the covariance otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    pub output_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Agreement tolerance between deterministic treatments; stochastic ones
    /// add four combined standard errors.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Compare the wavefunction's `d<p^3>/dt` at `t = 0` with the classical
    /// value plus `(hbar^2 / 4) <V'''>`.
    #[serde(default)]
    pub third_moment: bool,
    /// Compare the finite-difference energy rate of every Heller treatment
    /// with its closed form.
    #[serde(default)]
    pub heller_drift: bool,
    /// Rerun every Liouville treatment on a grid refined once and report
    /// how much the `sigma_2`, `sigma_3` drift shrinks.
    #[serde(default)]
    pub liouville_refinement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Treatment {
    Ensemble {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default = "default_particles")]
        particles: usize,
        #[serde(default = "default_escape")]
        escape_bound: f64,
    },
    Schrodinger {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        points: usize,
        half_width: f64,
        #[serde(default)]
        center: f64,
        /// Replace the packet by an equal superposition of two copies
        /// displaced by `+-separation / 2` position widths.
        #[serde(default)]
        superposition: Option<f64>,
    },
    Liouville {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        nx: usize,
        np: usize,
        x_half_width: f64,
        p_half_width: f64,
        #[serde(default)]
        center_x: f64,
        #[serde(default)]
        center_p: f64,
        #[serde(default = "default_splitting")]
        splitting: Splitting,
    },
    Hierarchy {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        order: usize,
        #[serde(default = "default_closure")]
        closure: Closure,
        #[serde(default = "default_flavor")]
        flavor: Flavor,
    },
    Tdvp {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
    },
    Tga {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        order: usize,
    },
    Heller {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
    },
    Mtga {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        rule: PacketRule,
        /// Explicit packets; when empty the initial state is auto-tiled.
        #[serde(default)]
        packets: Vec<PacketConfig>,
        #[serde(default = "default_tiles")]
        tiles: usize,
        #[serde(default = "default_shrink")]
        shrink: f64,
    },
    Lyapunov {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        dt: Option<f64>,
        system: LyapunovSystem,
        total_time: f64,
        #[serde(default)]
        renorm_interval: Option<f64>,
        #[serde(default = "default_transient")]
        transient_fraction: f64,
        #[serde(default = "default_blocks")]
        blocks: usize,
        /// Grid of initial means and position variances; the remaining
        /// covariances follow the initial state (and purity, if tagged).
        #[serde(default)]
        scan: Option<Scan>,
    },
}

fn default_particles() -> usize {
    100_000
}
fn default_escape() -> f64 {
    1e3
}
fn default_splitting() -> Splitting {
    Splitting::Strang
}
fn default_closure() -> Closure {
    Closure::GaussianWick
}
fn default_flavor() -> Flavor {
    Flavor::Classical
}
fn default_tiles() -> usize {
    1
}
fn default_shrink() -> f64 {
    0.5
}
fn default_transient() -> f64 {
    0.1
}
fn default_blocks() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub weight: f64,
    pub mean_x: f64,
    #[serde(default)]
    pub mean_p: f64,
    pub cxx: f64,
    #[serde(default)]
    pub cxp: f64,
    pub cpp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub mean_x: Vec<f64>,
    pub cxx: Vec<f64>,
}

impl Treatment {
    pub fn kind(&self) -> &'static str {
        match self {
            Treatment::Ensemble { .. } => "ensemble",
            Treatment::Schrodinger { .. } => "schrodinger",
            Treatment::Liouville { .. } => "liouville",
            Treatment::Hierarchy { .. } => "hierarchy",
            Treatment::Tdvp { .. } => "tdvp",
            Treatment::Tga { .. } => "tga",
            Treatment::Heller { .. } => "heller",
            Treatment::Mtga { .. } => "mtga",
            Treatment::Lyapunov { .. } => "lyapunov",
        }
    }

    fn explicit_label(&self) -> Option<&str> {
        match self {
            Treatment::Ensemble { label, .. }
            | Treatment::Schrodinger { label, .. }
            | Treatment::Liouville { label, .. }
            | Treatment::Hierarchy { label, .. }
            | Treatment::Tdvp { label, .. }
            | Treatment::Tga { label, .. }
            | Treatment::Heller { label, .. }
            | Treatment::Mtga { label, .. }
            | Treatment::Lyapunov { label, .. } => label.as_deref(),
        }
    }

    pub fn dt_override(&self) -> Option<f64> {
        match self {
            Treatment::Ensemble { dt, .. }
            | Treatment::Schrodinger { dt, .. }
            | Treatment::Liouville { dt, .. }
            | Treatment::Hierarchy { dt, .. }
            | Treatment::Tdvp { dt, .. }
            | Treatment::Tga { dt, .. }
            | Treatment::Heller { dt, .. }
            | Treatment::Mtga { dt, .. }
            | Treatment::Lyapunov { dt, .. } => *dt,
        }
    }

    /// Whether the treatment needs a state with `det C >= hbar^2 / 4`.
    fn is_quantum(&self) -> bool {
        match self {
            Treatment::Schrodinger { .. } => true,
            Treatment::Hierarchy { flavor, .. } => *flavor == Flavor::QuantumWeyl,
            _ => false,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> anyhow::Result<Config> {
        let cfg: Config = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn potential(&self) -> Result<PolynomialPotential, ConfigError> {
        let p = &self.potential;
        PolynomialPotential::with_drives(p.coefficients.clone(), p.drives.clone(), p.mass)
            .map_err(|e| bad("potential", e.to_string()))
    }

    pub fn initial_state(&self) -> Result<GaussianState, ConfigError> {
        let i = &self.initial;
        for (name, v) in [("mean_x", i.mean_x), ("mean_p", i.mean_p), ("cxp", i.cxp)] {
            if !v.is_finite() {
                return Err(bad(format!("initial.{name}"), "must be finite"));
            }
        }
        if !(i.cxx > 0.0 && i.cxx.is_finite()) {
            return Err(bad(
                "initial.cxx",
                format!("position variance must be positive, got {}", i.cxx),
            ));
        }
        let pure_cpp = (0.25 * self.hbar * self.hbar + i.cxp * i.cxp) / i.cxx;
        let cpp = match (i.cpp, i.pure) {
            (Some(c), _) => c,
            (None, true) => pure_cpp,
            (None, false) => return Err(bad("initial.cpp", "required unless the state is tagged pure")),
        };
        if !(cpp > 0.0 && cpp.is_finite()) {
            return Err(bad(
                "initial.cpp",
                format!("momentum variance must be positive, got {cpp}"),
            ));
        }
        let g = GaussianState::new(i.mean_x, i.mean_p, i.cxx, i.cxp, cpp).map_err(|e| bad("initial", e.to_string()))?;
        if i.pure && !g.is_pure(self.hbar) {
            return Err(bad(
                "initial.cpp",
                format!(
                    "state is tagged pure, which requires det C = hbar^2/4 = {}, but det C = {}",
                    0.25 * self.hbar * self.hbar,
                    g.det()
                ),
            ));
        }
        Ok(g)
    }

    /// Initial state of the Gaussian rules, `sigma2` included.
    pub fn tdvp_state(&self) -> Result<TdvpState, ConfigError> {
        let g = self.initial_state()?;
        let s = match (self.initial.sigma2, self.initial.pure) {
            (Some(s), _) => TdvpState::new(g, s),
            (None, true) => TdvpState::pure(g, self.hbar),
            (None, false) => TdvpState::from_gaussian(g),
        };
        s.map_err(|e| bad("initial.sigma2", e.to_string()))
    }

    pub fn default_dt(&self) -> f64 {
        self.integrator.dt.unwrap_or(1e-3 * self.dynamical_time)
    }

    /// Step and output stride of treatment `i`; the output interval must be
    /// a whole number of steps.
    pub fn steps_for(&self, i: usize) -> Result<(f64, usize), ConfigError> {
        let dt = self.treatments[i].dt_override().unwrap_or_else(|| self.default_dt());
        let field = format!("treatment[{i}].dt");
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(bad(field, format!("must be positive, got {dt}")));
        }
        let every = self.integrator.output_interval / dt;
        let stride = every.round();
        if stride < 1.0 || (every - stride).abs() > 1e-6 * every {
            return Err(bad(
                field,
                format!(
                    "output_interval {} is not a whole number of steps of {dt}",
                    self.integrator.output_interval
                ),
            ));
        }
        Ok((dt, stride as usize))
    }

    /// File-safe labels, unique within the scenario.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.treatments {
            let base = match (t.explicit_label(), t) {
                (Some(l), _) => l.to_string(),
                (None, Treatment::Hierarchy { order, flavor, .. }) => format!("hierarchy-m{order}-{flavor}"),
                (None, Treatment::Tga { order, .. }) => format!("tga-{order}"),
                (None, Treatment::Lyapunov { system, .. }) => format!("lyapunov-{}", system.as_str()),
                (None, t) => t.kind().to_string(),
            };
            let mut label = base.clone();
            let mut k = 2;
            while out.contains(&label) {
                label = format!("{base}-{k}");
                k += 1;
            }
            out.push(label);
        }
        out
    }

    /// Every static invariant of the scenario; the first violation wins.
    pub fn validate(&self) -> Check {
        if self.name.trim().is_empty() {
            return Err(bad("name", "must not be empty"));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(bad("hbar", format!("must be positive, got {}", self.hbar)));
        }
        if !(self.dynamical_time > 0.0 && self.dynamical_time.is_finite()) {
            return Err(bad("dynamical_time", "must be positive"));
        }
        if self.moment_order == 0 || self.moment_order > MAX_ORDER {
            return Err(bad("moment_order", format!("must lie in 1..={MAX_ORDER}")));
        }
        let pot = self.potential()?;
        let g = self.initial_state()?;
        self.tdvp_state()?;
        let ig = &self.integrator;
        if let Some(dt) = ig.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(bad("integrator.dt", "must be positive"));
            }
        }
        if !(ig.t_final > 0.0 && ig.t_final.is_finite()) {
            return Err(bad("integrator.t_final", "must be positive"));
        }
        if !(ig.output_interval > 0.0 && ig.output_interval <= ig.t_final) {
            return Err(bad("integrator.output_interval", "must lie in (0, t_final]"));
        }
        if !(self.compare.tolerance > 0.0) {
            return Err(bad("compare.tolerance", "must be positive"));
        }
        if self.treatments.is_empty() {
            return Err(bad("treatment", "at least one treatment is required"));
        }
        for (i, t) in self.treatments.iter().enumerate() {
            let f = |name: &str| format!("treatment[{i}].{name}");
            if t.is_quantum() && !g.is_quantum_admissible(self.hbar) {
                return Err(bad(
                    "initial",
                    format!(
                        "treatment[{i}] ({}) needs det C >= hbar^2/4 = {}, got {}",
                        t.kind(),
                        0.25 * self.hbar * self.hbar,
                        g.det()
                    ),
                ));
            }
            if !matches!(t, Treatment::Lyapunov { .. }) {
                self.steps_for(i)?;
            }
            match t {
                Treatment::Ensemble {
                    particles,
                    escape_bound,
                    ..
                } => {
                    if *particles < 2 {
                        return Err(bad(f("particles"), "need at least 2 particles"));
                    }
                    if !(*escape_bound > 0.0) {
                        return Err(bad(f("escape_bound"), "must be positive"));
                    }
                }
                Treatment::Schrodinger {
                    points,
                    half_width,
                    superposition,
                    ..
                } => {
                    if !g.is_pure(self.hbar) {
                        return Err(bad(
                            "initial",
                            "the wavefunction oracle needs a pure state (det C = hbar^2/4)",
                        ));
                    }
                    if *points < 64 || !points.is_power_of_two() {
                        return Err(bad(f("points"), "must be a power of two, at least 64"));
                    }
                    if !(*half_width > 0.0) {
                        return Err(bad(f("half_width"), "must be positive"));
                    }
                    if let Some(s) = superposition {
                        if !(*s > 0.0) {
                            return Err(bad(f("superposition"), "separation must be positive"));
                        }
                    }
                }
                Treatment::Liouville {
                    nx,
                    np,
                    x_half_width,
                    p_half_width,
                    ..
                } => {
                    if *nx < 8 || *np < 8 {
                        return Err(bad(f("nx"), "need at least 8 nodes per axis"));
                    }
                    if !(*x_half_width > 0.0 && *p_half_width > 0.0) {
                        return Err(bad(f("x_half_width"), "half widths must be positive"));
                    }
                }
                Treatment::Hierarchy {
                    order, closure, flavor, ..
                } => {
                    HierarchySpec::new(pot.clone(), *order, *flavor, self.hbar, *closure)
                        .map_err(|e| bad(f("order"), e.to_string()))?;
                }
                Treatment::Tga { order, .. } => {
                    if *order < 2 || order % 2 == 1 {
                        return Err(bad(f("order"), "must be even and at least 2"));
                    }
                }
                Treatment::Mtga {
                    packets, tiles, shrink, ..
                } => {
                    if packets.is_empty() {
                        if *tiles == 0 || *tiles == 2 {
                            return Err(bad(f("tiles"), "auto-tiling needs 1 or at least 3 packets"));
                        }
                        if *tiles > 1 && !(*shrink > 0.0 && *shrink < 1.0) {
                            return Err(bad(f("shrink"), "must lie in (0, 1)"));
                        }
                    } else {
                        let total: f64 = packets.iter().map(|p| p.weight).sum();
                        if (total - 1.0).abs() > 1e-12 {
                            return Err(bad(f("packets"), format!("weights sum to {total}, not 1")));
                        }
                        for (j, p) in packets.iter().enumerate() {
                            if !(p.weight >= 0.0) {
                                return Err(bad(
                                    format!("treatment[{i}].packets[{j}].weight"),
                                    "must be non-negative",
                                ));
                            }
                            GaussianState::new(p.mean_x, p.mean_p, p.cxx, p.cxp, p.cpp)
                                .map_err(|e| bad(format!("treatment[{i}].packets[{j}]"), e.to_string()))?;
                        }
                    }
                }
                Treatment::Lyapunov {
                    dt,
                    total_time,
                    renorm_interval,
                    transient_fraction,
                    blocks,
                    scan,
                    ..
                } => {
                    if let Some(dt) = dt {
                        if !(*dt > 0.0) {
                            return Err(bad(f("dt"), "must be positive"));
                        }
                    }
                    if !(*total_time > 0.0) {
                        return Err(bad(f("total_time"), "must be positive"));
                    }
                    if let Some(r) = renorm_interval {
                        if !(*r > 0.0 && *r < *total_time) {
                            return Err(bad(f("renorm_interval"), "must lie in (0, total_time)"));
                        }
                    }
                    if !(0.0..1.0).contains(transient_fraction) {
                        return Err(bad(f("transient_fraction"), "must lie in [0, 1)"));
                    }
                    if *blocks < 2 {
                        return Err(bad(f("blocks"), "need at least 2 blocks"));
                    }
                    if let Some(s) = scan {
                        if s.mean_x.is_empty() || s.cxx.is_empty() {
                            return Err(bad(f("scan"), "both axes need at least one value"));
                        }
                        if let Some(c) = s.cxx.iter().find(|c| !(**c > 0.0)) {
                            return Err(bad(f("scan.cxx"), format!("variances must be positive, got {c}")));
                        }
                    }
                }
                Treatment::Tdvp { .. } | Treatment::Heller { .. } => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "demo"
hbar = 1.0
dynamical_time = 6.283185307179586

[potential]
coefficients = [0.0, 0.0, 0.5]

[initial]
mean_x = 1.0
cxx = 0.5
pure = true

[integrator]
t_final = 6.283185307179586
output_interval = 0.6283185307179586

[[treatment]]
kind = "tdvp"

[[treatment]]
kind = "hierarchy"
order = 2
flavor = "quantum"
"#;

    #[test]
    fn minimal_config_parses_and_validates() {
        let c = Config::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.labels(), vec!["tdvp", "hierarchy-m2-quantum"]);
        let g = c.initial_state().unwrap();
        assert!((g.cpp - 0.5).abs() < 1e-15);
        assert_eq!(c.steps_for(0).unwrap().1, 100);
        let back = Config::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_field() {
        let c = Config::from_toml(&MINIMAL.replace("cxx = 0.5", "cxx = -0.5")).unwrap();
        assert_eq!(c.validate().unwrap_err().field, "initial.cxx");
        let c = Config::from_toml(&MINIMAL.replace("pure = true", "pure = true\ncpp = 0.7")).unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.field, "initial.cpp");
        assert!(e.reason.contains("hbar^2/4"), "{e}");
        let c = Config::from_toml(&MINIMAL.replace("output_interval = 0.6283185307179586", "output_interval = 0.1"))
            .unwrap();
        assert_eq!(c.validate().unwrap_err().field, "treatment[0].dt");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Config::from_toml(&MINIMAL.replace("pure = true", "pure = true\ncolour = 3")).is_err());
        assert!(Config::from_toml(&MINIMAL.replace("kind = \"tdvp\"", "kind = \"tdvp\"\nfoo = 1")).is_err());
    }

    #[test]
    fn duplicate_labels_get_suffixes() {
        let text = format!("{MINIMAL}\n[[treatment]]\nkind = \"tdvp\"\n");
        let c = Config::from_toml(&text).unwrap();
        assert_eq!(c.labels()[2], "tdvp-2");
    }
}
