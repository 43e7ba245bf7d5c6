//! The shipped scenarios.

use std::f64::consts::PI;

use phaseflow::gaussian::LyapunovSystem;
use phaseflow::hierarchy::Closure;
use phaseflow::oracles::Splitting;
use phaseflow::{Flavor, PolynomialPotential};

use crate::config::{
    Checks, CompareConfig, Config, InitialConfig, IntegratorSection, PotentialConfig, Scan, Treatment,
};

pub const PRESETS: [&str; 8] = [
    "harmonic-exact",
    "free-spreading",
    "cubic-third-moment",
    "quartic-semiquantum",
    "inverted-lyapunov",
    "two-packet-hudson",
    "heller-drift",
    "sigma-n-quartic",
];

pub fn preset(name: &str) -> Option<Config> {
    Some(match name {
        "harmonic-exact" => harmonic_exact(),
        "free-spreading" => free_spreading(),
        "cubic-third-moment" => cubic_third_moment(),
        "quartic-semiquantum" => quartic_semiquantum(),
        "inverted-lyapunov" => inverted_lyapunov(),
        "two-packet-hudson" => two_packet_hudson(),
        "heller-drift" => heller_drift(),
        "sigma-n-quartic" => sigma_n_quartic(),
        _ => return None,
    })
}

/// Period of the classical orbit through `(x, p)`: the time between the
/// first and third sign changes of `p`. `None` if the orbit does not turn
/// twice within `t_max`. Presets use `period / 2 pi`, the inverse angular
/// frequency of the mean orbit, as their dynamical time.
pub fn orbit_period(coefficients: &[f64], mass: f64, x: f64, p: f64, t_max: f64) -> Option<f64> {
    let pot = PolynomialPotential::new(coefficients.to_vec(), mass).ok()?;
    let force = |x: f64| -pot.derivative(1, x, 0.0);
    let rhs = |(x, p): (f64, f64)| (p / mass, force(x));
    let dt = 1e-4;
    let (mut y, mut t) = ((x, p), 0.0);
    let mut turns = Vec::new();
    while t < t_max && turns.len() < 3 {
        let k1 = rhs(y);
        let k2 = rhs((y.0 + 0.5 * dt * k1.0, y.1 + 0.5 * dt * k1.1));
        let k3 = rhs((y.0 + 0.5 * dt * k2.0, y.1 + 0.5 * dt * k2.1));
        let k4 = rhs((y.0 + dt * k3.0, y.1 + dt * k3.1));
        let next = (
            y.0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            y.1 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        );
        // A start exactly at a turning point counts as the first turn.
        if t == 0.0 && y.1 == 0.0 {
            turns.push(0.0);
        } else if y.1 != 0.0 && (next.1 == 0.0 || next.1.signum() != y.1.signum()) {
            turns.push(t + dt * y.1 / (y.1 - next.1));
        }
        y = next;
        t += dt;
    }
    (turns.len() == 3).then(|| turns[2] - turns[0])
}

fn base(
    name: &str,
    description: &str,
    hbar: f64,
    t_dyn: f64,
    coefficients: Vec<f64>,
    initial: InitialConfig,
) -> Config {
    Config {
        name: name.to_string(),
        description: description.to_string(),
        seed: 20_240_611,
        hbar,
        dynamical_time: t_dyn,
        moment_order: 2,
        potential: PotentialConfig {
            coefficients,
            mass: 1.0,
            drives: Vec::new(),
        },
        initial,
        integrator: IntegratorSection {
            dt: None,
            t_final: 10.0 * t_dyn,
            output_interval: 0.1 * t_dyn,
        },
        compare: CompareConfig::default(),
        checks: Checks::default(),
        treatments: Vec::new(),
    }
}

fn pure(mean_x: f64, mean_p: f64, cxx: f64, cxp: f64) -> InitialConfig {
    InitialConfig {
        mean_x,
        mean_p,
        cxx,
        cxp,
        cpp: None,
        pure: true,
        sigma2: None,
    }
}

fn tdvp() -> Treatment {
    Treatment::Tdvp { label: None, dt: None }
}

fn heller() -> Treatment {
    Treatment::Heller { label: None, dt: None }
}

fn hierarchy(order: usize, flavor: Flavor) -> Treatment {
    Treatment::Hierarchy {
        label: None,
        dt: None,
        order,
        closure: Closure::GaussianWick,
        flavor,
    }
}

fn ensemble(particles: usize, dt: Option<f64>) -> Treatment {
    Treatment::Ensemble {
        label: None,
        dt,
        particles,
        escape_bound: 1e3,
    }
}

fn schrodinger(
    label: &str,
    dt: Option<f64>,
    points: usize,
    half_width: f64,
    center: f64,
    superposition: Option<f64>,
) -> Treatment {
    Treatment::Schrodinger {
        label: Some(label.to_string()),
        dt,
        points,
        half_width,
        center,
        superposition,
    }
}

fn lyapunov(
    system: LyapunovSystem,
    total_time: f64,
    dt: Option<f64>,
    renorm: Option<f64>,
    scan: Option<Scan>,
) -> Treatment {
    Treatment::Lyapunov {
        label: None,
        dt,
        system,
        total_time,
        renorm_interval: renorm,
        transient_fraction: 0.1,
        blocks: 10,
        scan,
    }
}

/// Every treatment on an exactly solvable oscillator; all of them must agree
/// on the first and second moments.
fn harmonic_exact() -> Config {
    let period = 2.0 * PI;
    let mut c = base(
        "harmonic-exact",
        "Squeezed packet in a harmonic well; every treatment is exact for quadratic potentials.",
        1.0,
        1.0,
        vec![0.0, 0.0, 0.5],
        pure(1.0, 0.5, 0.3, 0.1),
    );
    c.integrator.t_final = 10.0 * period;
    c.integrator.output_interval = 0.5;
    c.checks.heller_drift = true;
    c.treatments = vec![
        ensemble(200_000, Some(0.01)),
        schrodinger("schrodinger", Some(2.5e-4), 128, 10.0, 0.0, None),
        Treatment::Liouville {
            label: None,
            dt: Some(0.0125),
            nx: 192,
            np: 192,
            x_half_width: 8.5,
            p_half_width: 8.5,
            center_x: 0.0,
            center_p: 0.0,
            splitting: Splitting::Yoshida4,
        },
        tdvp(),
        heller(),
        hierarchy(2, Flavor::Classical),
        hierarchy(2, Flavor::QuantumWeyl),
        lyapunov(LyapunovSystem::Tangent2d, 1000.0 * period, None, None, None),
    ];
    c
}

/// Free spreading of a moving packet, where the width grows quadratically.
fn free_spreading() -> Config {
    // Time for the position variance to double.
    let t_spread = 1.0;
    let mut c = base(
        "free-spreading",
        "Moving Gaussian in free space; the covariance shears linearly in time.",
        1.0,
        t_spread,
        vec![0.0],
        pure(0.0, 1.0, 0.5, 0.0),
    );
    c.integrator.t_final = 5.0;
    c.treatments = vec![
        ensemble(100_000, None),
        schrodinger("schrodinger", None, 512, 30.0, 5.0, None),
        tdvp(),
        hierarchy(2, Flavor::Classical),
    ];
    c
}

/// Quantum correction to the third momentum moment in a cubic potential.
fn cubic_third_moment() -> Config {
    let mut c = base(
        "cubic-third-moment",
        "Harmonic well with a cubic term; d<p^3>/dt picks up (hbar^2/4) <V'''> over the classical rate.",
        1.0,
        1.0,
        vec![0.0, 0.0, 0.5, 0.1],
        pure(0.0, 0.0, 0.5, 0.0),
    );
    c.moment_order = 3;
    c.integrator.t_final = 0.5;
    c.integrator.output_interval = 0.05;
    c.checks.third_moment = true;
    c.treatments = vec![
        ensemble(1_000_000, None),
        schrodinger("schrodinger", None, 256, 12.0, 0.0, None),
        tdvp(),
        hierarchy(3, Flavor::Classical),
        hierarchy(3, Flavor::QuantumWeyl),
    ];
    c
}

/// Double well where the width dynamics makes the Gaussian flow chaotic
/// although the classical orbit of the mean is regular.
fn quartic_semiquantum() -> Config {
    let coefficients = vec![0.0, 0.0, -1.0, 0.0, 1.0];
    let t_dyn = orbit_period(&coefficients, 1.0, 1.5, 0.0, 100.0).expect("bounded orbit") / (2.0 * PI);
    let mut c = base(
        "quartic-semiquantum",
        "Double well V = x^4 - x^2: Lyapunov scan of the Gaussian 4D flow against its mean-field limit.",
        1.0,
        t_dyn,
        coefficients,
        pure(1.5, 0.0, 0.5, 0.0),
    );
    c.moment_order = 4;
    let scan = Scan {
        mean_x: vec![1.0, 1.5, 2.0],
        cxx: vec![0.3, 0.5],
    };
    c.treatments = vec![
        tdvp(),
        hierarchy(2, Flavor::Classical),
        hierarchy(2, Flavor::QuantumWeyl),
        schrodinger("schrodinger", None, 512, 10.0, 0.0, None),
        lyapunov(
            LyapunovSystem::Gaussian4d,
            1000.0,
            Some(5e-4),
            Some(0.5),
            Some(scan.clone()),
        ),
        lyapunov(LyapunovSystem::Tangent2d, 5000.0, Some(1e-3), Some(0.5), Some(scan)),
    ];
    c
}

/// Inverted oscillator `V = -omega^2 x^2 / 2` with `omega = 2`: every
/// exponent equals `omega`.
fn inverted_lyapunov() -> Config {
    let omega: f64 = 2.0;
    let t_dyn = 1.0 / omega;
    let mut c = base(
        "inverted-lyapunov",
        "Inverted oscillator with omega = 2; the largest Lyapunov exponent is omega.",
        1.0,
        t_dyn,
        vec![0.0, 0.0, -0.5 * omega * omega],
        pure(0.0, 0.0, 0.5, 0.0),
    );
    c.integrator.t_final = 2.0 * t_dyn;
    c.treatments = vec![
        tdvp(),
        hierarchy(2, Flavor::Classical),
        ensemble(100_000, None),
        lyapunov(LyapunovSystem::Tangent2d, 40.0 * t_dyn, None, None, None),
        lyapunov(LyapunovSystem::Gaussian4d, 40.0 * t_dyn, None, None, None),
    ];
    c
}

/// A coherent state against a superposition of two of them four widths
/// apart: only the second has negative Wigner regions.
fn two_packet_hudson() -> Config {
    let mut c = base(
        "two-packet-hudson",
        "Coherent state and a two-packet superposition in a harmonic well; Wigner negativity test.",
        1.0,
        1.0,
        vec![0.0, 0.0, 0.5],
        pure(0.0, 0.0, 0.5, 0.0),
    );
    c.integrator.t_final = 3.0;
    c.treatments = vec![
        schrodinger("single", None, 256, 12.0, 0.0, None),
        schrodinger("superposition", None, 256, 12.0, 0.0, Some(4.0)),
        tdvp(),
    ];
    c
}

/// Heller's packet in a pure quartic, where its energy is not conserved.
fn heller_drift() -> Config {
    let coefficients = vec![0.0, 0.0, 0.0, 0.0, 1.0];
    let t_dyn = orbit_period(&coefficients, 1.0, 1.0, 1.0, 100.0).expect("bounded orbit") / (2.0 * PI);
    let mut c = base(
        "heller-drift",
        "Pure quartic V = x^4: Heller energy drift, and TDVP against the second-order hierarchies.",
        1.0,
        t_dyn,
        coefficients,
        pure(1.0, 1.0, 0.1, 0.0),
    );
    c.checks.heller_drift = true;
    c.treatments = vec![
        tdvp(),
        heller(),
        hierarchy(2, Flavor::Classical),
        hierarchy(2, Flavor::QuantumWeyl),
        Treatment::Tga {
            label: None,
            dt: None,
            order: 2,
        },
    ];
    c
}

/// Wigner and Liouville `sigma_n` in an anharmonic well: purity fixes
/// `sigma_2` of the Wigner function but not `sigma_4`.
fn sigma_n_quartic() -> Config {
    let coefficients = vec![0.0, 0.0, 0.5, 0.0, 0.25];
    let t_dyn = orbit_period(&coefficients, 1.0, 1.0, 0.0, 100.0).expect("bounded orbit") / (2.0 * PI);
    let mut c = base(
        "sigma-n-quartic",
        "Anharmonic well: sigma_2 of the Wigner function is conserved, sigma_4 is not.",
        0.1,
        t_dyn,
        coefficients,
        pure(1.0, 0.0, 0.05, 0.0),
    );
    c.integrator.t_final = 5.0 * t_dyn;
    c.checks.liouville_refinement = true;
    // Each semi-Lagrangian step diffuses the grid, so the Liouville run takes
    // few large steps.
    let liouville_dt = c.integrator.output_interval / 4.0;
    c.treatments = vec![
        schrodinger("schrodinger", None, 512, 4.0, 0.0, None),
        Treatment::Liouville {
            label: None,
            dt: Some(liouville_dt),
            nx: 128,
            np: 128,
            x_half_width: 3.0,
            p_half_width: 5.0,
            center_x: 0.0,
            center_p: 0.0,
            splitting: Splitting::Strang,
        },
        tdvp(),
    ];
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            assert_eq!(c.name, name);
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c, "{name}");
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn harmonic_orbit_period() {
        let t = orbit_period(&[0.0, 0.0, 0.5], 1.0, 1.0, 0.3, 50.0).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-6, "{t}");
        let t = orbit_period(&[0.0, 0.0, 2.0], 1.0, 1.0, 0.0, 50.0).unwrap();
        assert!((t - PI).abs() < 1e-6, "{t}");
    }

    #[test]
    fn quartic_orbit_period_matches_quadrature() {
        // V = x^4 from (1, 1): E = 3/2, turning point a = E^(1/4), and
        // T = 4 a / sqrt(2E) * int_0^1 du / sqrt(1 - u^4).
        let t = orbit_period(&[0.0, 0.0, 0.0, 0.0, 1.0], 1.0, 1.0, 1.0, 50.0).unwrap();
        let e: f64 = 1.5;
        let a = e.powf(0.25);
        let k = 1.311_028_777_146_06;
        assert!((t - 4.0 * a / (2.0 * e).sqrt() * k).abs() < 1e-6, "{t}");
        assert!(orbit_period(&[0.0, 0.0, -1.0], 1.0, 1.0, 0.0, 50.0).is_none());
    }
}
