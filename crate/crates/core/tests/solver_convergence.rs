use std::f64::consts::PI;

use nlsync_core::model::{Params, State3};
use nlsync_core::ode_sim::{
    euler_step, integrate_ode, lyapunov_spectrum_of, LyapunovConfig, NewtonLeipnik,
};
use nlsync_core::pde::{imex_step, Field3, Grid1D, ImexStepper, Scheme, StepperConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ATTRACTOR_IC: State3 = State3::new(0.349, 0.0, -0.3);

/// Observed orders from endpoint errors against a much finer reference.
fn rk4_orders() -> Vec<f64> {
    let p = Params::default();
    let t = 5.0;
    let reference = integrate_ode(ATTRACTOR_IC, &p, 1.25e-4, t).unwrap().last();
    let errors: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|dt| (integrate_ode(ATTRACTOR_IC, &p, *dt, t).unwrap().last() - reference).norm_inf())
        .collect();
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn rk4_is_fourth_order() {
    let orders = rk4_orders();
    assert!(orders.iter().all(|o| *o >= 3.5), "orders {orders:?}");
}

fn cosine_mode_error(n: usize, t_end: f64) -> f64 {
    let g = Grid1D::new(10.0, n).unwrap();
    let d = 0.1;
    let w = PI / g.length();
    let f0 = Field3::from_fn(g, |x| State3::new((w * x).cos(), 0.0, 0.0));
    let cfg = StepperConfig {
        dt: 1e-3,
        scheme: Scheme::CrankNicolsonDiffusion,
    };
    let st = ImexStepper::new(g, [d; 3], cfg).unwrap();
    let steps = (t_end / cfg.dt).round() as usize;
    let mut f = f0;
    for _ in 0..steps {
        f = st.step(&f, |_, _| State3::ZERO).unwrap();
    }
    (f.c[0][0] - (-d * w * w * t_end).exp()).abs()
}

#[test]
fn cosine_mode_decays_at_the_heat_rate() {
    let t_end = 5.0;
    let exact = (-0.1 * (PI / 10.0).powi(2) * t_end).exp();
    assert!(cosine_mode_error(201, t_end) < 0.01 * exact);
}

#[test]
fn spatial_error_is_second_order() {
    let errs: Vec<f64> = [26, 51, 101, 201]
        .iter()
        .map(|n| cosine_mode_error(*n, 5.0))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "errors {errs:?}");
    }
}

#[test]
fn pure_diffusion_conserves_mass() {
    let g = Grid1D::new(10.0, 201).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for scheme in [
        Scheme::CrankNicolsonDiffusion,
        Scheme::BackwardEulerDiffusion,
    ] {
        let st = ImexStepper::new(g, [0.1, 0.5, 2.0], StepperConfig { dt: 1e-2, scheme }).unwrap();
        let mut f = Field3::from_fn(g, |_| {
            State3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..3.0),
            )
        });
        for _ in 0..200 {
            let next = st.step(&f, |_, _| State3::ZERO).unwrap();
            for j in 0..3 {
                let before = g.integrate(&f.c[j]);
                let after = g.integrate(&next.c[j]);
                assert!(
                    (after - before).abs() < 1e-12,
                    "component {j}: {before} -> {after}"
                );
            }
            f = next;
        }
    }
}

#[test]
fn backward_euler_diffusion_never_grows_the_sup_norm() {
    let g = Grid1D::new(10.0, 101).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let dt = 10f64.powf(rng.gen_range(-4.0..2.0));
        let cfg = StepperConfig {
            dt,
            scheme: Scheme::BackwardEulerDiffusion,
        };
        let st = ImexStepper::new(g, [0.1, 1.0, 5.0], cfg).unwrap();
        let mut f = Field3::from_fn(g, |_| {
            State3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        });
        for _ in 0..5 {
            let next = st.step(&f, |_, _| State3::ZERO).unwrap();
            assert!(next.sup_norm() <= f.sup_norm() * (1.0 + 1e-14));
            f = next;
        }
    }
}

#[test]
fn without_diffusion_one_step_is_the_ode_euler_step() {
    let p = Params::default();
    let g = Grid1D::new(10.0, 21).unwrap();
    let f = Field3::constant(g, ATTRACTOR_IC);
    for scheme in [
        Scheme::CrankNicolsonDiffusion,
        Scheme::BackwardEulerDiffusion,
    ] {
        let cfg = StepperConfig { dt: 1e-3, scheme };
        let next = imex_step(
            &f,
            |_, s| nlsync_core::model::reaction_rhs(s, &p),
            [0.0; 3],
            &cfg,
        )
        .unwrap();
        let ode = euler_step(ATTRACTOR_IC, &p, 1e-3);
        for i in 0..g.n() {
            assert_eq!(next.at(i), ode);
        }
    }
}

#[test]
fn spatially_constant_data_tracks_the_ode() {
    let p = Params::default();
    let g = Grid1D::new(10.0, 101).unwrap();
    let cfg = StepperConfig::default();
    let st = ImexStepper::new(g, p.diffusion(), cfg).unwrap();
    let mut f = Field3::constant(g, ATTRACTOR_IC);
    let mut u = ATTRACTOR_IC;
    for _ in 0..2000 {
        f = st
            .step(&f, |_, s| nlsync_core::model::reaction_rhs(s, &p))
            .unwrap();
        u = euler_step(u, &p, cfg.dt);
    }
    for i in 0..g.n() {
        assert!((f.at(i) - u).norm_inf() < 1e-10);
    }
}

#[test]
fn spectrum_sum_matches_divergence_on_a_short_run() {
    let p = Params::default();
    let cfg = LyapunovConfig {
        dt: 2e-3,
        t_end: 600.0,
        ..Default::default()
    };
    let s = lyapunov_spectrum_of(&NewtonLeipnik(p), ATTRACTOR_IC.to_array(), &cfg).unwrap();
    assert!((s.sum() - nlsync_core::model::divergence(&p)).abs() < 0.02);
    assert!(s.exponents[0] > 0.05, "{:?}", s.exponents);
}
