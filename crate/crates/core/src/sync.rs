//! Master/slave synchronization of the reaction–diffusion system.
//!
//! The slave carries the additive controllers of [`control_phi`]. With them
//! the error `e = v - u` obeys `de/dt - DΔe = A(u, v) e` where the
//! off-diagonal part of `A` is skew-symmetric, so
//! `V = ½∫|e|²` decays at rate at least `2·min(0.4, k)`.

use serde::Serialize;

use crate::linalg3::{hurwitz_certificate, CertificateReport, Matrix3};
use crate::model::{reaction_rhs, Params, State3};
use crate::ode_sim::{least_squares_slope, step_count};
use crate::pde::{neumann_eigenvalue, Field3, Grid1D, ImexStepper, PdeError, StepperConfig};

/// Controller output for master state `u` and slave state `v`.
pub fn control_phi(u: State3, v: State3, p: &Params) -> State3 {
    let e = v - u;
    State3::new(
        -10.0 * v.u2 * e.u3 + 5.0 * u.u2 * e.u3,
        -15.0 * u.u3 * e.u1,
        -(p.alpha + p.k) * e.u3,
    )
}

/// Reaction part of the controlled error dynamics.
pub fn error_rhs(u: State3, v: State3, p: &Params) -> State3 {
    let e = v - u;
    let phi = control_phi(u, v, p);
    State3::new(
        -p.a * e.u1 + e.u2 + 10.0 * v.u2 * v.u3 - 10.0 * u.u2 * u.u3 + phi.u1,
        -e.u1 - 0.4 * e.u2 + 5.0 * v.u1 * v.u3 - 5.0 * u.u1 * u.u3 + phi.u2,
        p.alpha * e.u3 - 5.0 * v.u1 * v.u2 + 5.0 * u.u1 * u.u2 + phi.u3,
    )
}

/// The matrix `A(u, v)` with `error_rhs(u, v) = A·(v - u)`.
pub fn error_matrix(u: State3, v: State3, p: &Params) -> Matrix3 {
    Matrix3::from_rows([
        [-p.a, 1.0 + 10.0 * u.u3, 5.0 * u.u2],
        [-1.0 - 10.0 * u.u3, -0.4, 5.0 * v.u1],
        [-5.0 * u.u2, -5.0 * v.u1, -p.k],
    ])
}

/// Linearization restricted to the `i`-th Neumann mode: the error matrix
/// built from the master state alone (`u1` in the coupling slots), shifted by
/// `-diag(d)·λᵢ`.
pub fn mode_matrix(i: usize, u: State3, grid: &Grid1D, p: &Params) -> Matrix3 {
    let lambda = neumann_eigenvalue(i, grid);
    error_matrix(u, u, p) - Matrix3::diag(p.d1, p.d2, p.d3).scale(lambda)
}

/// Both sides of the diffusion-dominance condition
/// `(0.52 + 100u₃² + 20u₃)/(1.6 + 2k) < d₃λ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// Gain at which the condition becomes an equality (0 if it already
    /// holds at `k = 0`); any larger gain satisfies it.
    pub k_min: f64,
}

/// Largest value of the quadratic `0.52 + 100u₃² + 20u₃` over `|u₃| ≤ u3_sup`.
fn condition_numerator(u3_sup: f64) -> f64 {
    let s = u3_sup.abs();
    // convex, so the max sits at an endpoint; +s wins because of the linear term
    0.52 + 100.0 * s * s + 20.0 * s
}

pub fn check_condition_313(u3_sup: f64, grid: &Grid1D, p: &Params) -> ConditionReport {
    let num = condition_numerator(u3_sup);
    let lhs = num / (1.6 + 2.0 * p.k);
    let rhs = p.d3 * neumann_eigenvalue(1, grid);
    let k_min = ((num / rhs - 1.6) / 2.0).max(0.0);
    ConditionReport {
        lhs,
        rhs,
        satisfied: lhs < rhs,
        k_min,
    }
}

/// `V = ½∫(e₁² + e₂² + e₃²) dx`, trapezoid rule.
pub fn lyapunov_functional(e: &Field3) -> f64 {
    let g = &e.grid;
    (0..g.n())
        .map(|i| {
            let s = e.at(i);
            g.weight(i) * 0.5 * s.dot(&s)
        })
        .sum()
}

/// The diffusion and reaction parts of `dV/dt`.
///
/// `I = -Σⱼ dⱼ∫|∇eⱼ|²` with cell-wise forward differences, which equals
/// `Σⱼ dⱼ∫eⱼ Δ_h eⱼ` exactly under the mirror-node Laplacian.
/// `J = -a∫e₁² - 0.4∫e₂² - k∫e₃²`, the closed form of `∫eᵀA e`.
pub fn lyapunov_decomposition(e: &Field3, p: &Params) -> (f64, f64) {
    let g = &e.grid;
    let dx = g.dx();
    let i_term = -p
        .diffusion()
        .iter()
        .zip(&e.c)
        .map(|(d, c)| {
            d * c
                .windows(2)
                .map(|w| (w[1] - w[0]).powi(2) / dx)
                .sum::<f64>()
        })
        .sum::<f64>();
    let sq: Vec<f64> = (0..3)
        .map(|j| g.integrate(&e.c[j].iter().map(|v| v * v).collect::<Vec<_>>()))
        .collect();
    let j_term = -p.a * sq[0] - 0.4 * sq[1] - p.k * sq[2];
    (i_term, j_term)
}

/// Per-record history of a master/slave run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SyncTrace {
    pub t: Vec<f64>,
    pub err_sup: Vec<f64>,
    pub v: Vec<f64>,
    pub i_term: Vec<f64>,
    pub j_term: Vec<f64>,
    pub cond313_lhs: Vec<f64>,
    pub cond313_rhs: Vec<f64>,
}

impl SyncTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest single-record increase of `V`.
    pub fn max_v_increase(&self) -> f64 {
        self.v
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True if `V` never grows by more than `tol·V(0)` between records.
    pub fn v_nonincreasing(&self, tol: f64) -> bool {
        let Some(v0) = self.v.first() else {
            return true;
        };
        self.v.windows(2).all(|w| w[1] - w[0] <= tol * v0)
    }

    /// Exponential decay rate of `V` fitted by least squares on `ln V` over
    /// the first half of the records. Records with `V = 0` are skipped.
    pub fn decay_rate_first_half(&self) -> f64 {
        let half = self.len() / 2 + 1;
        let pts: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.v)
            .take(half.min(self.len()))
            .filter(|(_, v)| **v > 0.0)
            .map(|(t, v)| (*t, v.ln()))
            .collect();
        -least_squares_slope(&pts)
    }

    /// First recorded time from which `err_sup` stays below `threshold`.
    pub fn settle_time(&self, threshold: f64) -> Option<f64> {
        let last_bad = self.err_sup.iter().rposition(|e| *e >= threshold);
        match last_bad {
            None => self.t.first().copied(),
            Some(i) => self.t.get(i + 1).copied(),
        }
    }

    fn push(&mut self, t: f64, e: &Field3, p: &Params, cond: &ConditionReport) {
        let (i_term, j_term) = lyapunov_decomposition(e, p);
        self.t.push(t);
        self.err_sup.push(e.sup_norm());
        self.v.push(lyapunov_functional(e));
        self.i_term.push(i_term);
        self.j_term.push(j_term);
        self.cond313_lhs.push(cond.lhs);
        self.cond313_rhs.push(cond.rhs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOptions {
    pub t_end: f64,
    pub controls_on: bool,
    /// Evenly spaced field snapshots, including the first and last step.
    pub snapshot_count: usize,
    /// Trace records every this many steps.
    pub record_every: usize,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self {
            t_end: 40.0,
            controls_on: true,
            snapshot_count: 200,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp {
        time: f64,
        step: usize,
        component: usize,
        field: &'static str,
    },
}

/// Field state handed to the snapshot observer.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub index: usize,
    pub step: usize,
    pub t: f64,
    pub master: &'a Field3,
    pub slave: &'a Field3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncOutcome {
    pub trace: SyncTrace,
    pub status: RunStatus,
    /// Per-component sup of `|u|` over grid and elapsed time.
    pub u_sup: [f64; 3],
    pub snapshots_taken: usize,
}

impl SyncOutcome {
    pub fn final_err_sup(&self) -> f64 {
        self.trace.err_sup.last().copied().unwrap_or(f64::NAN)
    }
}

/// Steps at which the `count` evenly spaced snapshots fall.
pub fn snapshot_steps(total_steps: usize, count: usize) -> Vec<usize> {
    match count {
        0 => Vec::new(),
        1 => vec![total_steps],
        _ => {
            let mut steps: Vec<usize> = (0..count)
                .map(|j| ((j as f64) * total_steps as f64 / (count - 1) as f64).round() as usize)
                .collect();
            steps.dedup();
            steps
        }
    }
}

/// Co-evolve master and slave with the IMEX stepper.
///
/// Blow-up is an outcome, not an error: the run stops and reports the time.
pub fn run_master_slave<F>(
    master_ic: &Field3,
    slave_ic: &Field3,
    p: &Params,
    cfg: &StepperConfig,
    opts: &SyncOptions,
    mut on_snapshot: F,
) -> Result<SyncOutcome, PdeError>
where
    F: FnMut(Snapshot<'_>),
{
    if master_ic.grid != slave_ic.grid {
        return Err(PdeError::GridMismatch);
    }
    let grid = master_ic.grid;
    let stepper = ImexStepper::new(grid, p.diffusion(), *cfg)?;
    let total = step_count(opts.t_end, cfg.dt);
    let snaps = snapshot_steps(total, opts.snapshot_count);
    let record_every = opts.record_every.max(1);

    let mut u = master_ic.clone();
    let mut v = slave_ic.clone();
    let mut u_sup = u.component_sup();
    let mut trace = SyncTrace::default();
    let mut snap_idx = 0;

    let mut observe =
        |step: usize, u: &Field3, v: &Field3, u_sup: &[f64; 3], trace: &mut SyncTrace| {
            let t = step as f64 * cfg.dt;
            if step.is_multiple_of(record_every) || step == total {
                let e = v.diff(u).expect("same grid");
                trace.push(t, &e, p, &check_condition_313(u_sup[2], &grid, p));
            }
            if snaps.get(snap_idx) == Some(&step) {
                on_snapshot(Snapshot {
                    index: snap_idx,
                    step,
                    t,
                    master: u,
                    slave: v,
                });
                snap_idx += 1;
            }
        };

    observe(0, &u, &v, &u_sup, &mut trace);
    let mut status = RunStatus::Completed;
    for step in 1..=total {
        let stepped = stepper
            .step(&u, |_, s| reaction_rhs(s, p))
            .map_err(|e| (e, "master"))
            .and_then(|nu| {
                stepper
                    .step(&v, |i, s| {
                        let r = reaction_rhs(s, p);
                        if opts.controls_on {
                            r + control_phi(u.at(i), s, p)
                        } else {
                            r
                        }
                    })
                    .map(|nv| (nu, nv))
                    .map_err(|e| (e, "slave"))
            });
        match stepped {
            Ok((nu, nv)) => {
                u = nu;
                v = nv;
            }
            Err((PdeError::NonFinite { component }, field)) => {
                status = RunStatus::BlowUp {
                    time: step as f64 * cfg.dt,
                    step,
                    component,
                    field,
                };
                break;
            }
            Err((e, _)) => return Err(e),
        }
        for (s, c) in u_sup.iter_mut().zip(u.component_sup()) {
            *s = s.max(c);
        }
        observe(step, &u, &v, &u_sup, &mut trace);
    }

    Ok(SyncOutcome {
        trace,
        status,
        u_sup,
        snapshots_taken: snap_idx,
    })
}

/// Certificates of every mode `0..=max_mode` at one master state.
pub fn mode_certificates(
    max_mode: usize,
    u: State3,
    grid: &Grid1D,
    p: &Params,
) -> Vec<CertificateReport> {
    (0..=max_mode)
        .map(|i| hurwitz_certificate(&mode_matrix(i, u, grid, p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg3::{det3, trace3};
    use approx::assert_abs_diff_eq;

    #[test]
    fn control_values() {
        let p = Params {
            k: 1.0,
            ..Default::default()
        };
        let u = State3::new(1.0, 2.0, 3.0);
        assert_eq!(control_phi(u, u, &p), State3::ZERO);
        let phi = control_phi(u, State3::new(2.0, 3.0, 4.0), &p);
        assert_abs_diff_eq!(phi.u1, -20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.u2, -45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.u3, -1.175, epsilon = 1e-12);
    }

    #[test]
    fn error_matrix_at_origin() {
        let p = Params {
            k: 1.0,
            ..Default::default()
        };
        assert_eq!(
            error_matrix(State3::ZERO, State3::ZERO, &p),
            Matrix3::from_rows([[-0.4, 1.0, 0.0], [-1.0, -0.4, 0.0], [0.0, 0.0, -1.0]])
        );
        assert_eq!(error_rhs(State3::ZERO, State3::ZERO, &p), State3::ZERO);
    }

    #[test]
    fn large_gain_certifies_error_matrix() {
        let p = Params {
            k: 50.0,
            ..Default::default()
        };
        let u = State3::new(0.349, 0.0, -0.3);
        assert!(hurwitz_certificate(&error_matrix(u, u, &p)).stable);
    }

    #[test]
    fn mode_zero_is_the_undiffused_matrix() {
        let p = Params::default();
        let g = Grid1D::new(10.0, 201).unwrap();
        let u = State3::new(0.2, -0.1, 0.3);
        assert_eq!(mode_matrix(0, u, &g, &p), error_matrix(u, u, &p));
        for i in 0..10 {
            let l = neumann_eigenvalue(i, &g);
            assert_abs_diff_eq!(
                trace3(&mode_matrix(i, u, &g, &p)),
                -(p.d1 + p.d2 + p.d3) * l + trace3(&mode_matrix(0, u, &g, &p)),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn condition_values() {
        let g = Grid1D::new(10.0, 201).unwrap();
        // d3·λ1 = 1
        let p = Params {
            k: 0.0,
            d3: 1.0 / neumann_eigenvalue(1, &g),
            ..Default::default()
        };
        let rep = check_condition_313(0.0, &g, &p);
        assert_abs_diff_eq!(rep.lhs, 0.325, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.rhs, 1.0, epsilon = 1e-15);
        assert!(rep.satisfied);
        assert_eq!(rep.k_min, 0.0);

        let p = Params::default();
        let rep = check_condition_313(0.4, &g, &p);
        let expected = (24.52 / (0.1 * (PI_SQ / 100.0)) - 1.6) / 2.0;
        assert_abs_diff_eq!(rep.k_min, expected, epsilon = 1e-9);
        assert!((rep.k_min - 1241.5).abs() < 1.0);
        // just above k_min the condition holds, just below it does not
        let above = Params {
            k: rep.k_min * (1.0 + 1e-9),
            ..p
        };
        let below = Params {
            k: rep.k_min * (1.0 - 1e-9),
            ..p
        };
        assert!(check_condition_313(0.4, &g, &above).satisfied);
        assert!(!check_condition_313(0.4, &g, &below).satisfied);
    }

    const PI_SQ: f64 = std::f64::consts::PI * std::f64::consts::PI;

    #[test]
    fn condition_lhs_grows_with_bound() {
        let g = Grid1D::new(10.0, 201).unwrap();
        let p = Params::default();
        let lhs: Vec<f64> = (0..100)
            .map(|i| check_condition_313(i as f64 * 0.01, &g, &p).lhs)
            .collect();
        assert!(lhs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn functional_values() {
        let g = Grid1D::new(10.0, 201).unwrap();
        assert_eq!(lyapunov_functional(&Field3::zeros(g)), 0.0);
        let e = Field3::constant(g, State3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(lyapunov_functional(&e), 5.0, epsilon = 1e-12);
        assert_eq!(
            lyapunov_decomposition(&Field3::zeros(g), &Params::default()),
            (0.0, 0.0)
        );
    }

    #[test]
    fn decomposition_terms_are_nonpositive() {
        let g = Grid1D::new(10.0, 101).unwrap();
        let e = Field3::from_fn(g, |x| State3::new(x.sin(), (3.0 * x).cos() - 0.2, x * 0.1));
        let (i, j) = lyapunov_decomposition(&e, &Params::default());
        assert!(i < 0.0 && j < 0.0);
    }

    #[test]
    fn diffusion_term_matches_summation_by_parts() {
        let g = Grid1D::new(10.0, 101).unwrap();
        let p = Params {
            d1: 0.3,
            d2: 0.2,
            d3: 0.7,
            ..Default::default()
        };
        let e = Field3::from_fn(g, |x| {
            State3::new(x.sin(), (0.3 * x * x).cos(), x.exp() * 1e-4)
        });
        let (i_term, _) = lyapunov_decomposition(&e, &p);
        let by_parts: f64 = (0..3)
            .map(|j| {
                let lap = crate::pde::laplacian_apply(&e.c[j], &g);
                let prod: Vec<f64> = e.c[j].iter().zip(&lap).map(|(a, b)| a * b).collect();
                p.diffusion()[j] * g.integrate(&prod)
            })
            .sum();
        assert_abs_diff_eq!(i_term, by_parts, epsilon = 1e-10 * i_term.abs());
    }

    #[test]
    fn snapshot_schedule() {
        assert_eq!(snapshot_steps(10, 3), vec![0, 5, 10]);
        assert_eq!(snapshot_steps(10, 1), vec![10]);
        assert!(snapshot_steps(10, 0).is_empty());
        assert_eq!(snapshot_steps(2, 5), vec![0, 1, 2]);
        let s = snapshot_steps(40_000, 200);
        assert_eq!(s.len(), 200);
        assert_eq!((s[0], s[199]), (0, 40_000));
    }

    #[test]
    fn identical_fields_stay_synchronized() {
        let g = Grid1D::new(10.0, 51).unwrap();
        let ic = Field3::from_fn(g, |x| {
            State3::new(
                0.349,
                0.0,
                -0.3 + 0.05 * (0.5 * std::f64::consts::PI * x).cos(),
            )
        });
        let opts = SyncOptions {
            t_end: 2.0,
            snapshot_count: 3,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let out = run_master_slave(
            &ic,
            &ic,
            &Params::default(),
            &StepperConfig::default(),
            &opts,
            |s| {
                seen.push((s.index, s.step));
            },
        )
        .unwrap();
        assert_eq!(out.status, RunStatus::Completed);
        assert!(out.trace.err_sup.iter().all(|e| *e <= 1e-10));
        assert_eq!(seen, vec![(0, 0), (1, 1000), (2, 2000)]);
        assert_eq!(out.trace.len(), 2001);
    }

    #[test]
    fn blow_up_is_reported_not_raised() {
        let g = Grid1D::new(1.0, 11).unwrap();
        let p = Params {
            alpha: 900.0,
            ..Default::default()
        };
        let ic = Field3::constant(g, State3::new(0.0, 0.0, 1.0));
        let opts = SyncOptions {
            t_end: 40.0,
            snapshot_count: 0,
            ..Default::default()
        };
        let cfg = StepperConfig {
            dt: 0.1,
            ..Default::default()
        };
        let out = run_master_slave(&ic, &ic, &p, &cfg, &opts, |_| {}).unwrap();
        match out.status {
            RunStatus::BlowUp {
                time,
                field,
                component,
                ..
            } => {
                assert!(time > 0.0 && time <= 40.0);
                assert_eq!(field, "master");
                assert_eq!(component, 3);
            }
            RunStatus::Completed => panic!("expected blow-up"),
        }
        assert!(!out.trace.is_empty());
    }

    #[test]
    fn mode_determinant_cubic_at_sample_point() {
        let g = Grid1D::new(10.0, 201).unwrap();
        let p = Params {
            k: 2.0,
            d1: 0.3,
            d2: 0.5,
            d3: 0.7,
            ..Default::default()
        };
        let u = State3::new(0.1, -0.2, 0.3);
        let l = neumann_eigenvalue(3, &g);
        let m = mode_matrix(3, u, &g, &p);
        // direct cofactor expansion of the structured matrix
        let (a, b, c) = (-0.4 - p.d1 * l, -0.4 - p.d2 * l, -p.k - p.d3 * l);
        let s = 1.0 + 10.0 * u.u3;
        let want = a * b * c + a * 25.0 * u.u1 * u.u1 + b * 25.0 * u.u2 * u.u2 + c * s * s;
        assert_abs_diff_eq!(det3(&m), want, epsilon = 1e-12);
    }
}
