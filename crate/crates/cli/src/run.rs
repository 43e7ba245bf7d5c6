//! Executes a scenario: every treatment in order, then the checks and the
//! cross-treatment comparison.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use phaseflow::gaussian::{
    auto_tile, heller_energy_drift, heller_rhs, lyapunov_scan, mtga_moments, mtga_propagate, propagate, rule_energy,
    GaussianRun, GaussianSum, LyapunovJob, LyapunovReport, LyapunovSystem, Rule, TdvpState,
};
use phaseflow::hierarchy::{closed_moments, integrate_hierarchy, HierarchySpec};
use phaseflow::io::{Snapshot, TrajectoryRow};
use phaseflow::oracles::{leapfrog_evolve, liouville_evolve, splitstep_evolve, IntegratorConfig, LiouvilleConfig};
use phaseflow::states::{
    moments_from_gaussian, moments_from_grid, moments_from_wavefunction, sample_ensemble, sigma_n, wigner_transform,
    EnsembleMoments, Lattice, PhaseSpaceGrid, PositionGrid, TrajectoryEnsemble, WavefunctionGrid,
};
use phaseflow::{Error, Flavor, GaussianState, MomentSet, PolynomialPotential};

use crate::compare::{Comparison, Track};
use crate::config::{Config, ConfigError, Treatment};
use crate::summary::{
    ChaosPoint, Conservation, HellerDriftCheck, LyapunovPoint, Metadata, SigmaCheck, Summary, ThirdMomentCheck,
    TreatmentSummary, WignerCheck,
};

/// Where and why a treatment stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    /// Last time the treatment reached (the escape time for ensembles).
    pub time: f64,
    pub reason: String,
}

/// Output of one treatment.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub kind: &'static str,
    pub times: Vec<f64>,
    pub moments: Vec<MomentSet>,
    pub stderr: Option<Vec<MomentSet>>,
    pub closure: Option<String>,
    /// Column names after `t`; every table starts with `detC`, `energy`,
    /// `constraint_residual`.
    pub diag_columns: Vec<&'static str>,
    pub diagnostics: Vec<Vec<f64>>,
    pub trajectory: Vec<TrajectoryRow>,
    pub snapshots: Vec<(String, Snapshot)>,
    pub lyapunov: Vec<LyapunovPoint>,
    pub failure: Option<FailureInfo>,
    pub heller_drift: Option<HellerDriftCheck>,
    pub sigma: Option<SigmaCheck>,
    pub elapsed_s: f64,
}

impl Series {
    fn new(label: &str, kind: &'static str, columns: &[&'static str]) -> Series {
        Series {
            label: label.to_string(),
            kind,
            times: Vec::new(),
            moments: Vec::new(),
            stderr: None,
            closure: None,
            diag_columns: columns.to_vec(),
            diagnostics: Vec::new(),
            trajectory: Vec::new(),
            snapshots: Vec::new(),
            lyapunov: Vec::new(),
            failure: None,
            heller_drift: None,
            sigma: None,
            elapsed_s: 0.0,
        }
    }

    fn fail(&mut self, err: impl std::fmt::Display, time: Option<f64>) {
        let time = time.or_else(|| self.times.last().copied()).unwrap_or(0.0);
        self.failure = Some(FailureInfo {
            time,
            reason: err.to_string(),
        });
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.diag_columns.iter().position(|c| *c == name)?;
        Some(self.diagnostics.iter().map(|r| r[j + 1]).collect())
    }
}

const BASE: [&str; 3] = ["detC", "energy", "constraint_residual"];

pub struct RunOutcome {
    pub config: Config,
    pub series: Vec<Series>,
    pub comparison: Option<Comparison>,
    pub summary: Summary,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.series.iter().any(|s| s.failure.is_some())
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }
}

struct Ctx<'a> {
    cfg: &'a Config,
    pot: PolynomialPotential,
    g0: GaussianState,
    s0: TdvpState,
    order: usize,
}

impl Ctx<'_> {
    fn integrator(&self, i: usize) -> IntegratorConfig {
        let (dt, stride) = self.cfg.steps_for(i).expect("validated");
        IntegratorConfig::new(dt, self.cfg.integrator.t_final, stride).expect("validated")
    }

    /// Moments the Gaussian rules report: Weyl-ordered when the packet is an
    /// admissible quantum state, classical otherwise. For a Gaussian the
    /// values coincide; only the label differs.
    fn gaussian_flavor(&self) -> Flavor {
        if self.g0.is_quantum_admissible(self.cfg.hbar) {
            Flavor::QuantumWeyl
        } else {
            Flavor::Classical
        }
    }
}

/// Validates and runs a scenario, keeping partial output of failed
/// treatments.
pub fn execute(cfg: &Config) -> Result<RunOutcome, ConfigError> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        pot: cfg.potential()?,
        g0: cfg.initial_state()?,
        s0: cfg.tdvp_state()?,
        order: cfg.moment_order,
    };
    let labels = cfg.labels();
    let mut series = Vec::new();
    for (i, t) in cfg.treatments.iter().enumerate() {
        let clock = Instant::now();
        let mut s = run_treatment(&ctx, i, t, &labels[i]);
        s.elapsed_s = clock.elapsed().as_secs_f64();
        series.push(s);
    }
    let tracks: Vec<Track> = series
        .iter()
        .filter(|s| !s.moments.is_empty())
        .map(|s| Track {
            label: &s.label,
            times: &s.times,
            moments: &s.moments,
            stderr: s.stderr.as_deref(),
        })
        .collect();
    let comparison = if tracks.len() >= 2 {
        Comparison::build(&tracks, ctx.order, cfg.compare.tolerance)
    } else {
        None
    };
    let third = cfg.checks.third_moment.then(|| third_moment_check(&ctx));
    let summary = summarize(&ctx, &series, comparison.as_ref(), third);
    Ok(RunOutcome {
        config: cfg.clone(),
        series,
        comparison,
        summary,
    })
}

fn run_treatment(ctx: &Ctx, i: usize, t: &Treatment, label: &str) -> Series {
    match t {
        Treatment::Ensemble {
            particles,
            escape_bound,
            ..
        } => run_ensemble(ctx, i, label, *particles, *escape_bound),
        Treatment::Schrodinger {
            points,
            half_width,
            center,
            superposition,
            ..
        } => run_schrodinger(ctx, i, label, *points, *half_width, *center, *superposition),
        Treatment::Liouville {
            nx,
            np,
            x_half_width,
            p_half_width,
            center_x,
            center_p,
            splitting,
            ..
        } => {
            let lattice = Lattice::centered(*nx, *np, *center_x, *x_half_width, *center_p, *p_half_width);
            let mut lc = LiouvilleConfig::new(ctx.integrator(i));
            lc.splitting = *splitting;
            run_liouville(ctx, label, lattice, lc)
        }
        Treatment::Hierarchy {
            order, closure, flavor, ..
        } => {
            let spec = HierarchySpec::new(ctx.pot.clone(), *order, *flavor, ctx.cfg.hbar, *closure);
            run_hierarchy(ctx, i, label, spec)
        }
        Treatment::Tdvp { .. } => run_gaussian(ctx, i, label, Rule::Tdvp),
        Treatment::Tga { order, .. } => run_gaussian(ctx, i, label, Rule::Tga { order: *order }),
        Treatment::Heller { .. } => run_gaussian(ctx, i, label, Rule::Heller),
        Treatment::Mtga {
            rule,
            packets,
            tiles,
            shrink,
            ..
        } => {
            let sum = if packets.is_empty() {
                auto_tile(&ctx.g0, *tiles, *shrink)
            } else {
                packets
                    .iter()
                    .map(|p| GaussianState::new(p.mean_x, p.mean_p, p.cxx, p.cxp, p.cpp).map(|g| (p.weight, g)))
                    .collect::<phaseflow::Result<Vec<_>>>()
                    .and_then(GaussianSum::new)
            };
            run_mtga(ctx, i, label, sum, *rule)
        }
        Treatment::Lyapunov {
            system,
            total_time,
            renorm_interval,
            transient_fraction,
            blocks,
            scan,
            dt,
            ..
        } => {
            let mut s = Series::new(label, "lyapunov", &[]);
            let dt = dt.unwrap_or_else(|| ctx.cfg.default_dt());
            let points: Vec<(f64, f64)> = match scan {
                Some(sc) => sc
                    .mean_x
                    .iter()
                    .flat_map(|&x| sc.cxx.iter().map(move |&c| (x, c)))
                    .collect(),
                None => vec![(ctx.g0.mean_x, ctx.g0.cxx)],
            };
            let mut jobs = Vec::new();
            for &(x, c) in &points {
                match scan_state(ctx, x, c) {
                    Ok(init) => {
                        let mut job = LyapunovJob::new(*system, init, *total_time, dt);
                        job.renorm_interval = renorm_interval.unwrap_or(0.5 * ctx.cfg.dynamical_time);
                        job.transient_fraction = *transient_fraction;
                        job.blocks = *blocks;
                        jobs.push(Ok(job));
                    }
                    Err(e) => jobs.push(Err(e.to_string())),
                }
            }
            let ready: Vec<LyapunovJob> = jobs.iter().filter_map(|j| j.as_ref().ok().cloned()).collect();
            let mut reports = lyapunov_scan(&ready, &ctx.pot).into_iter();
            for (&(x, c), job) in points.iter().zip(&jobs) {
                let result = match job {
                    Ok(_) => reports.next().expect("one report per job").map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                };
                let (report, error) = match result {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e)),
                };
                if let (None, Some(e)) = (&report, &error) {
                    if s.failure.is_none() {
                        s.fail(format!("mean_x = {x}, cxx = {c}: {e}"), Some(0.0));
                    }
                }
                s.lyapunov.push(LyapunovPoint {
                    mean_x: x,
                    cxx: c,
                    report,
                    error,
                });
            }
            s
        }
    }
}

/// The initial state with its mean position and position variance replaced;
/// a pure state stays pure.
fn scan_state(ctx: &Ctx, mean_x: f64, cxx: f64) -> phaseflow::Result<TdvpState> {
    let g = ctx.g0;
    let cpp = if ctx.cfg.initial.pure {
        (0.25 * ctx.cfg.hbar * ctx.cfg.hbar + g.cxp * g.cxp) / cxx
    } else {
        g.cpp
    };
    let g = GaussianState::new(mean_x, g.mean_p, cxx, g.cxp, cpp)?;
    TdvpState::new(g, ctx.s0.sigma2)
}

fn run_ensemble(ctx: &Ctx, i: usize, label: &str, particles: usize, bound: f64) -> Series {
    let mut s = Series::new(label, "ensemble", &BASE);
    let ic = ctx.integrator(i);
    let e = match sample_ensemble(&ctx.g0, particles, ctx.cfg.seed) {
        Ok(e) => e,
        Err(err) => {
            s.fail(err, None);
            return s;
        }
    };
    let order = ctx.order.max(2);
    let pot = &ctx.pot;
    let m = pot.mass();
    let mut se = Vec::new();
    let mut det0 = None;
    let energy = |e: &TrajectoryEnsemble, t: f64| {
        let sum: f64 = e
            .particles()
            .iter()
            .map(|q| q.p * q.p / (2.0 * m) + pot.evaluate(q.x, t))
            .sum();
        sum / e.len() as f64
    };
    let result = leapfrog_evolve(e, pot, &ic, bound, |t, e| {
        let em = EnsembleMoments::measure(e, order);
        let det = em.moments.det_c();
        let d0 = *det0.get_or_insert(det);
        s.diagnostics.push(vec![t, det, energy(e, t), det - d0]);
        s.times.push(t);
        s.moments.push(em.moments.truncated(ctx.order));
        se.push(em.stderr.truncated(ctx.order));
    });
    s.stderr = Some(se);
    if let Err(err) = result {
        let time = match &err {
            Error::Escape { time, .. } => Some(*time),
            _ => None,
        };
        s.fail(err, time);
    }
    s
}

fn wave_energy(w: &WavefunctionGrid, pot: &PolynomialPotential, t: f64) -> f64 {
    let g = w.grid();
    let pos: f64 = w
        .position_density()
        .iter()
        .enumerate()
        .map(|(j, d)| d * pot.evaluate(g.x(j), t))
        .sum::<f64>()
        * g.dx;
    let (ps, dens) = w.momentum_density();
    let dp = g.dp(w.hbar());
    let kin: f64 = ps.iter().zip(&dens).map(|(p, d)| p * p * d).sum::<f64>() * dp / (2.0 * pot.mass());
    (pos + kin) / w.norm()
}

fn initial_wave(
    ctx: &Ctx,
    points: usize,
    half_width: f64,
    center: f64,
    sep: Option<f64>,
) -> phaseflow::Result<WavefunctionGrid> {
    let grid = PositionGrid::centered(points, center, half_width)?;
    let (hbar, m) = (ctx.cfg.hbar, ctx.pot.mass());
    match sep {
        None => WavefunctionGrid::from_gaussian(&ctx.g0, grid, hbar, m),
        Some(widths) => {
            let g = ctx.g0;
            let d = 0.5 * widths * g.cxx.sqrt();
            let shifted = |dx: f64| GaussianState::new(g.mean_x + dx, g.mean_p, g.cxx, g.cxp, g.cpp);
            let a = WavefunctionGrid::from_gaussian(&shifted(-d)?, grid, hbar, m)?;
            let b = WavefunctionGrid::from_gaussian(&shifted(d)?, grid, hbar, m)?;
            a.superpose(&b)
        }
    }
}

fn run_schrodinger(
    ctx: &Ctx,
    i: usize,
    label: &str,
    points: usize,
    half_width: f64,
    center: f64,
    sep: Option<f64>,
) -> Series {
    let columns = [BASE.as_slice(), &["norm", "sigma2", "sigma4", "wigner_min_over_max"]].concat();
    let mut s = Series::new(label, "schrodinger", &columns);
    let w0 = match initial_wave(ctx, points, half_width, center, sep) {
        Ok(w) => w,
        Err(err) => {
            s.fail(err, None);
            return s;
        }
    };
    let ic = ctx.integrator(i);
    let order = ctx.order.max(2);
    let pot = &ctx.pot;
    let mut first: Option<(Snapshot, Snapshot)> = None;
    let mut last: Option<(Snapshot, Snapshot)> = None;
    let result = splitstep_evolve(w0, pot, &ic, |t, w| {
        let ms = moments_from_wavefunction(w, order)?;
        let wig = wigner_transform(w)?;
        let det = ms.det_c();
        let norm = w.norm();
        s.diagnostics.push(vec![
            t,
            det,
            wave_energy(w, pot, t),
            norm - 1.0,
            norm,
            sigma_n(&wig, 2),
            sigma_n(&wig, 4),
            wig.min() / wig.max(),
        ]);
        s.times.push(t);
        s.moments.push(ms.truncated(ctx.order));
        let snaps = (Snapshot::from_wavefunction(w, t), Snapshot::from_wigner(&wig, t));
        if first.is_none() {
            first = Some(snaps);
        } else {
            last = Some(snaps);
        }
        Ok(())
    });
    for (tag, pair) in [("initial", first), ("final", last)] {
        if let Some((psi, wig)) = pair {
            s.snapshots.push((format!("{tag}.wavefunction"), psi));
            s.snapshots.push((format!("{tag}.wigner"), wig));
        }
    }
    if let Err(err) = result {
        s.fail(err, None);
    }
    s
}

fn grid_energy(f: &PhaseSpaceGrid, pot: &PolynomialPotential, t: f64) -> f64 {
    let l = f.lattice;
    let m = pot.mass();
    let mut e = 0.0;
    for i in 0..l.nx {
        let v = pot.evaluate(l.x(i), t);
        let row = &f.values[i * l.np..(i + 1) * l.np];
        for (j, w) in row.iter().enumerate() {
            let p = l.p(j);
            e += w * (p * p / (2.0 * m) + v);
        }
    }
    e * l.cell_area()
}

fn run_liouville(ctx: &Ctx, label: &str, lattice: phaseflow::Result<Lattice>, lc: LiouvilleConfig) -> Series {
    let columns = [BASE.as_slice(), &["sigma1", "sigma2", "sigma3"]].concat();
    let mut s = Series::new(label, "liouville", &columns);
    let start = lattice.and_then(|l| PhaseSpaceGrid::from_gaussian(&ctx.g0, l));
    let f0 = match start {
        Ok(f) => f,
        Err(err) => {
            s.fail(err, None);
            return s;
        }
    };
    let order = ctx.order.max(2);
    let pot = &ctx.pot;
    let mut det0 = None;
    let mut last = None;
    s.snapshots
        .push(("initial.phase-space".into(), Snapshot::from_phase_space(&f0, 0.0)));
    let refined = f0.lattice.refined();
    let result = liouville_evolve(f0, pot, &lc, |t, f| {
        let ms = moments_from_grid(f, order, Flavor::Classical);
        let det = ms.det_c();
        let d0 = *det0.get_or_insert(det);
        s.diagnostics.push(vec![
            t,
            det,
            grid_energy(f, pot, t),
            det - d0,
            sigma_n(f, 1),
            sigma_n(f, 2),
            sigma_n(f, 3),
        ]);
        s.times.push(t);
        s.moments.push(ms.truncated(ctx.order));
        last = Some(t);
        Ok(())
    });
    match result {
        Ok((f, budget)) => {
            s.snapshots.push((
                "final.phase-space".into(),
                Snapshot::from_phase_space(&f, last.unwrap_or(0.0)),
            ));
            let mut check = SigmaCheck {
                initial: budget.initial,
                last: budget.last,
                max_relative_drift: budget.max_relative_drift,
                refined_max_relative_drift: None,
                refinement_gain: None,
            };
            if ctx.cfg.checks.liouville_refinement {
                let fine = PhaseSpaceGrid::from_gaussian(&ctx.g0, refined)
                    .and_then(|f| liouville_evolve(f, pot, &lc, |_, _| Ok(())));
                match fine {
                    Ok((_, b)) => {
                        let d = b.max_relative_drift;
                        check.refined_max_relative_drift = Some(d);
                        check.refinement_gain =
                            Some([budget.max_relative_drift[1] / d[1], budget.max_relative_drift[2] / d[2]]);
                    }
                    Err(err) => s.fail(format!("refined grid: {err}"), Some(0.0)),
                }
            }
            s.sigma = Some(check);
        }
        Err(err) => s.fail(err, None),
    }
    s
}

fn run_hierarchy(ctx: &Ctx, i: usize, label: &str, spec: phaseflow::Result<HierarchySpec>) -> Series {
    let mut s = Series::new(label, "hierarchy", &BASE);
    let (dt, stride) = ctx.cfg.steps_for(i).expect("validated");
    let run = spec.and_then(|spec| {
        let init = moments_from_gaussian(&ctx.g0, spec.order, spec.flavor);
        integrate_hierarchy(&spec, &init, dt, ctx.cfg.integrator.t_final, stride).map(|r| (spec, r))
    });
    match run {
        Ok((spec, run)) => {
            s.closure = Some(spec.closure.as_str().to_string());
            s.times = run.times;
            s.moments = run
                .moments
                .iter()
                .map(|m| {
                    if m.order() >= ctx.order {
                        m.truncated(ctx.order)
                    } else {
                        closed_moments(&spec, m, ctx.order)
                    }
                })
                .collect();
            s.diagnostics = run
                .diagnostics
                .iter()
                .map(|d| vec![d.t, d.det_c, d.energy, d.constraint_residual])
                .collect();
            if let Some(f) = run.failure {
                s.fail(f.reason, Some(f.time));
            }
        }
        Err(err) => s.fail(err, None),
    }
    s
}

fn run_gaussian(ctx: &Ctx, i: usize, label: &str, rule: Rule) -> Series {
    let kind = match rule {
        Rule::Tdvp => "tdvp",
        Rule::Tga { .. } => "tga",
        Rule::Heller => "heller",
    };
    let mut s = Series::new(label, kind, &BASE);
    let (dt, stride) = ctx.cfg.steps_for(i).expect("validated");
    let run = match propagate(rule, &ctx.pot, &ctx.s0, dt, ctx.cfg.integrator.t_final, stride) {
        Ok(r) => r,
        Err(err) => {
            s.fail(err, None);
            return s;
        }
    };
    let flavor = ctx.gaussian_flavor();
    for (st, d) in run.states.iter().zip(&run.diagnostics) {
        s.times.push(d.t);
        s.moments.push(moments_from_gaussian(&st.gaussian(), ctx.order, flavor));
        s.diagnostics.push(vec![d.t, d.det_c, d.energy, d.constraint_residual]);
        s.trajectory.push(TrajectoryRow {
            t: d.t,
            xbar: st.mean_x,
            pbar: st.mean_p,
            cxx: st.cxx,
            cxp: st.cxp,
            cpp: st.cpp,
            energy: d.energy,
            constraint_residual: d.constraint_residual,
        });
    }
    if rule == Rule::Heller && ctx.cfg.checks.heller_drift {
        s.heller_drift = Some(heller_drift_check(&run, &ctx.pot, 1e-3 * ctx.cfg.dynamical_time));
    }
    if let Some(f) = run.failure {
        s.fail(f.reason, Some(f.time));
    }
    s
}

/// Energy rate of the Heller packet by a five-point difference along its own
/// flow, against the closed form, at every sample.
pub fn heller_drift_check(run: &GaussianRun, pot: &PolynomialPotential, h: f64) -> HellerDriftCheck {
    let mut out = HellerDriftCheck {
        step: h,
        max_abs_mismatch: 0.0,
        max_abs_formula: 0.0,
        max_abs_finite_difference: 0.0,
        relative_mismatch: None,
    };
    for (st, &t) in run.states.iter().zip(&run.times) {
        let f = heller_rhs(st, pot, t);
        let y = st.to_array();
        let e = |j: f64| {
            let z: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a + j * h * b).collect();
            rule_energy(Rule::Heller, &TdvpState::from_array(&z, st.sigma2), pot, t)
        };
        let fd = (-e(2.0) + 8.0 * e(1.0) - 8.0 * e(-1.0) + e(-2.0)) / (12.0 * h);
        let formula = heller_energy_drift(st, pot, t);
        out.max_abs_mismatch = out.max_abs_mismatch.max((fd - formula).abs());
        out.max_abs_formula = out.max_abs_formula.max(formula.abs());
        out.max_abs_finite_difference = out.max_abs_finite_difference.max(fd.abs());
    }
    if out.max_abs_formula > 0.0 {
        out.relative_mismatch = Some(out.max_abs_mismatch / out.max_abs_formula);
    }
    out
}

fn run_mtga(
    ctx: &Ctx,
    i: usize,
    label: &str,
    sum: phaseflow::Result<GaussianSum>,
    rule: phaseflow::gaussian::PacketRule,
) -> Series {
    let mut s = Series::new(label, "mtga", &BASE);
    let (dt, stride) = ctx.cfg.steps_for(i).expect("validated");
    let run = sum.and_then(|sum| mtga_propagate(&sum, &ctx.pot, rule, dt, ctx.cfg.integrator.t_final, stride));
    let run = match run {
        Ok(r) => r,
        Err(err) => {
            s.fail(err, None);
            return s;
        }
    };
    let flavor = ctx.gaussian_flavor();
    let dets0: Vec<f64> = run
        .sums
        .first()
        .map(|g| g.members().iter().map(|(_, g)| g.det()).collect())
        .unwrap_or_default();
    for (t, sum) in run.times.iter().zip(&run.sums) {
        let ms = mtga_moments(sum, ctx.order.max(2), flavor);
        let mut energy = 0.0;
        let mut residual: f64 = 0.0;
        for ((w, g), d0) in sum.members().iter().zip(&dets0) {
            if let Ok(st) = TdvpState::from_gaussian(*g) {
                energy += w * rule_energy(rule.rule(), &st, &ctx.pot, *t);
            }
            residual = residual.max((g.det() - d0).abs() / d0);
        }
        s.times.push(*t);
        s.diagnostics.push(vec![*t, ms.det_c(), energy, residual]);
        s.moments.push(ms.truncated(ctx.order));
    }
    if let Some(f) = run.failure {
        s.fail(f.reason, Some(f.time));
    }
    s
}

/// `d<p^3>/dt` at `t = 0` from the wavefunction, by a five-point difference
/// over a short forward run and its time reverse.
fn third_moment_check(ctx: &Ctx) -> ThirdMomentCheck {
    let cfg = ctx.cfg;
    let pot = &ctx.pot;
    let c = pot.coefficients_at(0.0);
    let degree = c.len() - 1;
    let gm = moments_from_gaussian(&ctx.g0, degree + 2, Flavor::QuantumWeyl);
    // Classical rate -3 <V'(x) p^2> and the quantum correction (hbar^2/4) <V'''>.
    let classical: f64 = (1..=degree).map(|j| -3.0 * j as f64 * c[j] * gm.get(j - 1, 2)).sum();
    let v3: f64 = (3..=degree)
        .map(|j| (j * (j - 1) * (j - 2)) as f64 * c[j] * gm.get(j - 3, 0))
        .sum();
    let correction = 0.25 * cfg.hbar * cfg.hbar * v3;
    let mut out = ThirdMomentCheck {
        finite_difference_rate: None,
        classical_rate: classical,
        correction,
        relative_residual: None,
        ensemble_rate: None,
        ensemble_stderr: None,
        ensemble_z: None,
        error: None,
    };
    let wave = cfg.treatments.iter().find_map(|t| match t {
        Treatment::Schrodinger {
            points,
            half_width,
            center,
            superposition: None,
            ..
        } => Some((*points, *half_width, *center)),
        _ => None,
    });
    let fd = match wave {
        None => Err("needs a schrodinger treatment without superposition".to_string()),
        Some((n, hw, xc)) => wave_p3_rate(ctx, n, hw, xc).map_err(|e| e.to_string()),
    };
    match fd {
        Ok(rate) => {
            out.finite_difference_rate = Some(rate);
            out.relative_residual = Some((rate - classical - correction) / correction);
            let particles = cfg.treatments.iter().find_map(|t| match t {
                Treatment::Ensemble { particles, .. } => Some(*particles),
                _ => None,
            });
            if let Some(count) = particles {
                if let Ok(e) = sample_ensemble(&ctx.g0, count, cfg.seed) {
                    let n = e.len() as f64;
                    let rates: Vec<f64> = e
                        .particles()
                        .iter()
                        .map(|q| -3.0 * pot.derivative(1, q.x, 0.0) * q.p * q.p)
                        .collect();
                    let mean = rates.iter().sum::<f64>() / n;
                    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
                    let se = (var / n).sqrt();
                    out.ensemble_rate = Some(mean);
                    out.ensemble_stderr = Some(se);
                    out.ensemble_z = Some((rate - mean - correction) / se);
                }
            }
        }
        Err(e) => out.error = Some(e),
    }
    out
}

fn wave_p3_rate(ctx: &Ctx, points: usize, half_width: f64, center: f64) -> phaseflow::Result<f64> {
    let w0 = initial_wave(ctx, points, half_width, center, None)?;
    let h = 1e-2 * ctx.cfg.dynamical_time;
    let sub = 50;
    // psi(-t) = conj(U(t) conj(psi0)) for a real static potential, which
    // flips the sign of the odd momentum moment.
    let reversed = WavefunctionGrid::from_amplitudes(
        *w0.grid(),
        w0.amplitudes().iter().map(Complex64::conj).collect(),
        w0.hbar(),
        w0.mass(),
    )?;
    let p3_after = |w: &WavefunctionGrid, t: f64| -> phaseflow::Result<f64> {
        let ic = IntegratorConfig::new(t / sub as f64, t, sub)?;
        let out = splitstep_evolve(w.clone(), &ctx.pot, &ic, |_, _| Ok(()))?;
        Ok(moments_from_wavefunction(&out, 3)?.get(0, 3))
    };
    let f1 = p3_after(&w0, h)?;
    let f2 = p3_after(&w0, 2.0 * h)?;
    let b1 = -p3_after(&reversed, h)?;
    let b2 = -p3_after(&reversed, 2.0 * h)?;
    Ok((-f2 + 8.0 * f1 - 8.0 * b1 + b2) / (12.0 * h))
}

fn max_rel_drift(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else { return 0.0 };
    let scale = xs.iter().fold(x0.abs(), |a, x| a.max(x.abs()));
    let scale = if x0.abs() > 0.0 { x0.abs() } else { scale };
    if scale == 0.0 {
        return 0.0;
    }
    xs.iter().map(|x| (x - x0).abs() / scale).fold(0.0, f64::max)
}

fn summarize(
    ctx: &Ctx,
    series: &[Series],
    comparison: Option<&Comparison>,
    third: Option<ThirdMomentCheck>,
) -> Summary {
    let treatments: Vec<TreatmentSummary> = series
        .iter()
        .map(|s| {
            let energy = s.column("energy").unwrap_or_default();
            let det = s.column("detC").unwrap_or_default();
            let residual = s.column("constraint_residual").unwrap_or_default();
            let norm = s.column("norm");
            let sigma2 = s.column("sigma2");
            let wigner = s
                .column("wigner_min_over_max")
                .filter(|r| !r.is_empty())
                .map(|r| WignerCheck {
                    initial_min_over_max: r[0],
                    worst_min_over_max: r.iter().copied().fold(f64::INFINITY, f64::min),
                });
            TreatmentSummary {
                label: s.label.clone(),
                kind: s.kind.to_string(),
                status: if s.failure.is_some() { "failed" } else { "ok" }.to_string(),
                failure: s.failure.clone(),
                samples: s.times.len(),
                elapsed_s: s.elapsed_s,
                conservation: (!energy.is_empty()).then(|| Conservation {
                    energy_initial: energy[0],
                    energy_max_rel_drift: max_rel_drift(&energy),
                    det_c_initial: det[0],
                    det_c_max_rel_drift: max_rel_drift(&det),
                    constraint_max_abs: residual.iter().fold(0.0f64, |a, r| a.max(r.abs())),
                    norm_max_drift: norm.map(|n| n.iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()))),
                    sigma2_max_rel_drift: sigma2.map(|v| max_rel_drift(&v)),
                    sigma4_max_rel_variation: s.column("sigma4").map(|v| max_rel_drift(&v)),
                }),
                wigner,
                sigma: s.sigma,
                heller_drift: s.heller_drift.clone(),
                lyapunov: s.lyapunov.clone(),
            }
        })
        .collect();
    let chaos = chaos_points(series);
    let failed = series.iter().any(|s| s.failure.is_some());
    Summary {
        name: ctx.cfg.name.clone(),
        seed: ctx.cfg.seed,
        hbar: ctx.cfg.hbar,
        dynamical_time: ctx.cfg.dynamical_time,
        metadata: Metadata::now(),
        status: if failed { "failed" } else { "ok" }.to_string(),
        treatments,
        comparison: comparison.map(|c| crate::summary::ComparisonSummary {
            tolerance: c.tolerance,
            samples: c.times.len(),
            max_deviation: c.max_deviation(),
            all_within: c.all_within(),
            pairs: c.deviations.clone(),
        }),
        chaos_points: chaos,
        third_moment_residual: third.as_ref().and_then(|t| t.relative_residual),
        third_moment: third,
    }
}

/// Matches 4D and 2D Lyapunov points with the same initial mean and width.
fn chaos_points(series: &[Series]) -> Vec<ChaosPoint> {
    let of = |sys: LyapunovSystem| -> Vec<(f64, f64, LyapunovReport)> {
        series
            .iter()
            .flat_map(|s| s.lyapunov.iter())
            .filter_map(|p| {
                p.report
                    .clone()
                    .filter(|r| r.system == sys)
                    .map(|r| (p.mean_x, p.cxx, r))
            })
            .collect()
    };
    let wide = of(LyapunovSystem::Gaussian4d);
    let mean_field = of(LyapunovSystem::Tangent2d);
    let mut out = Vec::new();
    for (x, c, r4) in &wide {
        if let Some((_, _, r2)) = mean_field.iter().find(|(x2, c2, _)| x2 == x && c2 == c) {
            out.push(ChaosPoint {
                mean_x: *x,
                cxx: *c,
                lambda_4d: r4.lambda_max,
                stderr_4d: r4.stderr,
                lambda_2d: r2.lambda_max,
                stderr_2d: r2.stderr,
                quantum_induced: r4.lambda_max > 0.0 && r4.lambda_max >= 3.0 * r4.stderr && r2.lambda_max.abs() <= 1e-3,
            });
        }
    }
    out
}
