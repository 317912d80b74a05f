//! Fixed-step integration of the ODE, Lyapunov spectra by tangent-space
//! propagation with Gram–Schmidt re-orthonormalization, and the volume of a
//! small advected parallelepiped.

use thiserror::Error;

use crate::linalg3::{det3, Matrix3};
use crate::model::{jacobian, reaction_rhs, Params, State3};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("end time {t_end} is shorter than one step {dt}")]
    InvalidHorizon { t_end: f64, dt: f64 },
    #[error("state became non-finite at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
}

/// Number of whole steps of size `dt` that fit in `t_end`.
///
/// Ratios within 1e-9 of an integer are rounded, so `200 / 1e-3` gives
/// 200000 even though the floating-point quotient is not exact.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    let ratio = t_end / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

fn check_step(dt: f64, t_end: f64) -> Result<usize, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidStep(dt));
    }
    let n = step_count(t_end, dt);
    if n == 0 {
        return Err(SimError::InvalidHorizon { t_end, dt });
    }
    Ok(n)
}

/// One classical Runge–Kutta step for an arbitrary fixed-size system.
pub fn rk4_step_with<const N: usize, F>(y: &[f64; N], dt: f64, f: F) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let axpy = |base: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *base;
        out.iter_mut().zip(k).for_each(|(o, k)| *o += s * k);
        out
    };
    let k1 = f(y);
    let k2 = f(&axpy(y, &k1, dt / 2.0));
    let k3 = f(&axpy(y, &k2, dt / 2.0));
    let k4 = f(&axpy(y, &k3, dt));
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

pub fn rk4_step(u: State3, p: &Params, dt: f64) -> State3 {
    let y = rk4_step_with(&u.to_array(), dt, |y| {
        reaction_rhs(State3::from(*y), p).to_array()
    });
    State3::from(y)
}

/// Forward Euler step; the explicit half of the IMEX scheme reduces to this
/// when diffusion vanishes.
pub fn euler_step(u: State3, p: &Params, dt: f64) -> State3 {
    u + reaction_rhs(u, p) * dt
}

/// A uniformly sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeRun {
    pub dt: f64,
    pub t: Vec<f64>,
    pub states: Vec<State3>,
}

impl OdeRun {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> State3 {
        *self
            .states
            .last()
            .expect("a run holds at least the initial state")
    }

    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(State3::norm_inf).fold(0.0, f64::max)
    }
}

/// RK4 with fixed step `dt` up to `t_end`, every step recorded.
pub fn integrate_ode(u0: State3, p: &Params, dt: f64, t_end: f64) -> Result<OdeRun, SimError> {
    let n = check_step(dt, t_end)?;
    let mut t = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut u = u0;
    t.push(0.0);
    states.push(u);
    for step in 1..=n {
        u = rk4_step(u, p, dt);
        if !u.is_finite() {
            return Err(SimError::Divergence {
                step,
                time: step as f64 * dt,
            });
        }
        t.push(step as f64 * dt);
        states.push(u);
    }
    Ok(OdeRun { dt, t, states })
}

/// A three-dimensional flow with a closed-form Jacobian.
pub trait TangentSystem {
    fn rhs(&self, u: &[f64; 3]) -> [f64; 3];
    fn jacobian(&self, u: &[f64; 3]) -> Matrix3;
}

/// The Newton–Leipnik flow at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct NewtonLeipnik(pub Params);

impl TangentSystem for NewtonLeipnik {
    fn rhs(&self, u: &[f64; 3]) -> [f64; 3] {
        reaction_rhs(State3::from(*u), &self.0).to_array()
    }

    fn jacobian(&self, u: &[f64; 3]) -> Matrix3 {
        jacobian(State3::from(*u), &self.0)
    }
}

/// Linear flow `du/dt = M u`.
#[derive(Debug, Clone, Copy)]
pub struct LinearFlow(pub Matrix3);

impl TangentSystem for LinearFlow {
    fn rhs(&self, u: &[f64; 3]) -> [f64; 3] {
        self.0.mul_vec(*u)
    }

    fn jacobian(&self, _u: &[f64; 3]) -> Matrix3 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Discarded before tangent vectors are attached.
    pub transient: f64,
    pub reortho_interval: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 5000.0,
            transient: 100.0,
            reortho_interval: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSpectrum {
    /// Descending.
    pub exponents: [f64; 3],
    /// Averaging time, i.e. `t_end` minus the transient.
    pub horizon: f64,
}

impl LyapunovSpectrum {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

pub fn lyapunov_spectrum(
    u0: State3,
    p: &Params,
    dt: f64,
    t_end: f64,
) -> Result<LyapunovSpectrum, SimError> {
    let cfg = LyapunovConfig {
        dt,
        t_end,
        ..Default::default()
    };
    lyapunov_spectrum_of(&NewtonLeipnik(*p), u0.to_array(), &cfg)
}

/// Benettin's method: the state and three tangent vectors are advanced
/// together by RK4 on the variational equation, and every
/// `reortho_interval` the tangents are re-orthonormalized by modified
/// Gram–Schmidt, accumulating the log of each stretch factor.
pub fn lyapunov_spectrum_of<S: TangentSystem>(
    sys: &S,
    u0: [f64; 3],
    cfg: &LyapunovConfig,
) -> Result<LyapunovSpectrum, SimError> {
    let dt = cfg.dt;
    let total = check_step(dt, cfg.t_end)?;
    let transient_steps = step_count(cfg.transient.max(0.0), dt).min(total);
    let per_block = step_count(cfg.reortho_interval, dt).max(1);

    let mut u = u0;
    for step in 1..=transient_steps {
        u = rk4_step_with(&u, dt, |y| sys.rhs(y));
        if !u.iter().all(|x| x.is_finite()) {
            return Err(SimError::Divergence {
                step,
                time: step as f64 * dt,
            });
        }
    }

    // y = [u, w1, w2, w3]
    let mut y = [0.0; 12];
    y[..3].copy_from_slice(&u);
    y[3] = 1.0;
    y[7] = 1.0;
    y[11] = 1.0;

    let flow = |y: &[f64; 12]| {
        let u = [y[0], y[1], y[2]];
        let j = sys.jacobian(&u);
        let mut dy = [0.0; 12];
        dy[..3].copy_from_slice(&sys.rhs(&u));
        for v in 0..3 {
            let w = [y[3 + 3 * v], y[4 + 3 * v], y[5 + 3 * v]];
            dy[3 + 3 * v..6 + 3 * v].copy_from_slice(&j.mul_vec(w));
        }
        dy
    };

    let mut log_sums = [0.0; 3];
    let mut step = transient_steps;
    let mut elapsed_steps = 0usize;
    while step < total {
        let block = per_block.min(total - step);
        for _ in 0..block {
            y = rk4_step_with(&y, dt, flow);
            step += 1;
        }
        if !y.iter().all(|x| x.is_finite()) {
            return Err(SimError::Divergence {
                step,
                time: step as f64 * dt,
            });
        }
        elapsed_steps += block;
        let stretches = gram_schmidt(&mut y[3..]);
        for (acc, s) in log_sums.iter_mut().zip(stretches) {
            *acc += s.ln();
        }
    }

    let horizon = elapsed_steps as f64 * dt;
    let mut exponents = if horizon > 0.0 {
        log_sums.map(|s| s / horizon)
    } else {
        [0.0; 3]
    };
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum { exponents, horizon })
}

/// Modified Gram–Schmidt on three packed 3-vectors; returns the norms removed.
fn gram_schmidt(w: &mut [f64]) -> [f64; 3] {
    let mut norms = [0.0; 3];
    for i in 0..3 {
        for j in 0..i {
            let dot: f64 = (0..3).map(|c| w[3 * i + c] * w[3 * j + c]).sum();
            for c in 0..3 {
                w[3 * i + c] -= dot * w[3 * j + c];
            }
        }
        let norm = (0..3).map(|c| w[3 * i + c].powi(2)).sum::<f64>().sqrt();
        for c in 0..3 {
            w[3 * i + c] /= norm;
        }
        norms[i] = norm;
    }
    norms
}

/// Volume of the parallelepiped spanned by `u0` and `u0 + edge·eⱼ`, all four
/// corners advected by RK4; one `(t, volume)` sample per step.
pub fn ensemble_volume(
    u0: State3,
    p: &Params,
    edge: f64,
    dt: f64,
    t_end: f64,
) -> Result<Vec<(f64, f64)>, SimError> {
    let n = check_step(dt, t_end)?;
    let mut corners = [
        u0,
        u0 + State3::new(edge, 0.0, 0.0),
        u0 + State3::new(0.0, edge, 0.0),
        u0 + State3::new(0.0, 0.0, edge),
    ];
    let volume = |c: &[State3; 4]| {
        let e: [[f64; 3]; 3] = [
            (c[1] - c[0]).to_array(),
            (c[2] - c[0]).to_array(),
            (c[3] - c[0]).to_array(),
        ];
        det3(&Matrix3(e)).abs()
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, volume(&corners)));
    for step in 1..=n {
        for c in corners.iter_mut() {
            *c = rk4_step(*c, p, dt);
        }
        if !corners.iter().all(State3::is_finite) {
            return Err(SimError::Divergence {
                step,
                time: step as f64 * dt,
            });
        }
        out.push((step as f64 * dt, volume(&corners)));
    }
    Ok(out)
}

/// Least-squares slope of `ln(volume)` against time over `[t_from, t_to]`.
pub fn log_volume_rate(samples: &[(f64, f64)], t_from: f64, t_to: f64) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, v)| *t >= t_from && *t <= t_to && *v > 0.0)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
