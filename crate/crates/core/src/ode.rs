//! Fixed-step classical Runge-Kutta and the per-sample diagnostics shared by
//! every integrated treatment.

use serde::Serialize;

/// Conservation diagnostics at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostic {
    pub t: f64,
    pub det_c: f64,
    pub energy: f64,
    pub constraint_residual: f64,
}

/// Where and why an integration stopped early.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub time: f64,
    pub reason: String,
}

/// Reusable RK4 stepper for systems of any dimension.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt`. `rhs(t, y, dydt)` must fill `dydt`.
    pub fn step<F>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], dt: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        debug_assert_eq!(n, self.k1.len());
        let h2 = 0.5 * dt;

        rhs(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + h2 * self.k1[i];
        }
        rhs(t + h2, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + h2 * self.k2[i];
        }
        rhs(t + h2, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        rhs(t + dt, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of whole steps of size `dt` needed to reach `t_final`.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    (t_final / dt - 1e-9).ceil().max(0.0) as usize
}

/// `(t, h)` for each fixed step covering `[0, t_final]`, the last one
/// shortened to land exactly on `t_final`.
pub fn schedule(dt: f64, t_final: f64) -> impl Iterator<Item = (f64, f64)> {
    let n = step_count(dt, t_final);
    (0..n).map(move |i| {
        let t = i as f64 * dt;
        let h = if i + 1 == n { t_final - t } else { dt };
        (t, h)
    })
}

/// Fixed-step RK4 from `t = 0` to `t_final`.
///
/// `sample(t, y)` sees the initial state, every `stride`-th step and the final
/// state; returning `Err(reason)` stops the run. Non-finite states also stop
/// it. The last step is shortened so the run ends exactly at `t_final`.
pub fn integrate<F, S>(
    y: &mut [f64],
    dt: f64,
    t_final: f64,
    stride: usize,
    rhs: &mut F,
    mut sample: S,
) -> Option<Failure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> std::result::Result<(), String>,
{
    let stride = stride.max(1);
    if let Err(reason) = sample(0.0, y) {
        return Some(Failure { time: 0.0, reason });
    }
    let n = step_count(dt, t_final);
    let mut rk = Rk4::new(y.len());
    for i in 0..n {
        let t = i as f64 * dt;
        let h = if i + 1 == n { t_final - t } else { dt };
        rk.step(rhs, t, y, h);
        let t_next = if i + 1 == n { t_final } else { (i + 1) as f64 * dt };
        if let Some(j) = y.iter().position(|v| !v.is_finite()) {
            return Some(Failure {
                time: t_next,
                reason: format!("state component {j} became non-finite"),
            });
        }
        if (i + 1) % stride == 0 || i + 1 == n {
            if let Err(reason) = sample(t_next, y) {
                return Some(Failure { time: t_next, reason });
            }
        }
    }
    None
}
