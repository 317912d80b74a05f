//! Finite differences on `[0, L]` with zero-flux (Neumann) ends, and an
//! IMEX stepper: diffusion implicit (θ-scheme), reaction explicit.
//!
//! The grid is node-centred and includes both boundary nodes. The boundary
//! rows of the Laplacian come from mirror ghost nodes `f[-1] = f[1]`, which
//! keeps the stencil symmetric with respect to trapezoid weights; that is
//! what makes the discrete mass exactly conserved.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::State3;

#[derive(Debug, Error, PartialEq)]
pub enum PdeError {
    #[error("grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("component c{component} became non-finite")]
    NonFinite { component: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    length: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(length: f64, n: usize) -> Result<Self, PdeError> {
        if n < 3 {
            return Err(PdeError::TooFewNodes(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(PdeError::InvalidLength(length));
        }
        Ok(Self {
            length,
            n,
            dx: length / (n - 1) as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.length
        } else {
            i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Trapezoid quadrature weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            self.dx / 2.0
        } else {
            self.dx
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(i, v)| self.weight(i) * v).sum()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        ((x / self.dx).round().max(0.0) as usize).min(self.n - 1)
    }
}

/// Three scalar fields sampled on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    pub grid: Grid1D,
    pub c: [Vec<f64>; 3],
}

impl Field3 {
    pub fn from_fn(grid: Grid1D, mut f: impl FnMut(f64) -> State3) -> Self {
        let mut c = [
            Vec::with_capacity(grid.n()),
            Vec::with_capacity(grid.n()),
            Vec::with_capacity(grid.n()),
        ];
        for x in grid.nodes() {
            let s = f(x).to_array();
            for j in 0..3 {
                c[j].push(s[j]);
            }
        }
        Self { grid, c }
    }

    pub fn constant(grid: Grid1D, value: State3) -> Self {
        Self::from_fn(grid, |_| value)
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, State3::ZERO)
    }

    pub fn at(&self, i: usize) -> State3 {
        State3::new(self.c[0][i], self.c[1][i], self.c[2][i])
    }

    pub fn len(&self) -> usize {
        self.grid.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().flatten().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.c.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Per-component sup norm.
    pub fn component_sup(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.c[j].iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    }

    /// `self - other`, node by node.
    pub fn diff(&self, other: &Field3) -> Result<Field3, PdeError> {
        if self.grid != other.grid {
            return Err(PdeError::GridMismatch);
        }
        let c = [0, 1, 2].map(|j| {
            self.c[j]
                .iter()
                .zip(&other.c[j])
                .map(|(a, b)| a - b)
                .collect()
        });
        Ok(Field3 { grid: self.grid, c })
    }
}

/// Discrete Neumann Laplacian.
pub fn laplacian_apply(f: &[f64], grid: &Grid1D) -> Vec<f64> {
    let n = grid.n();
    assert_eq!(f.len(), n, "field length must match the grid");
    let inv = 1.0 / (grid.dx() * grid.dx());
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (f[1] - f[0]) * inv;
    out[n - 1] = 2.0 * (f[n - 2] - f[n - 1]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv;
    }
    out
}

/// `i`-th eigenvalue `(iπ/L)²` of `-Δ` on the interval with Neumann ends.
pub fn neumann_eigenvalue(i: usize, grid: &Grid1D) -> f64 {
    let w = i as f64 * PI / grid.length();
    w * w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    BackwardEulerDiffusion,
    #[default]
    CrankNicolsonDiffusion,
}

impl Scheme {
    /// Implicitness weight on the diffusion term.
    pub fn theta(self) -> f64 {
        match self {
            Scheme::BackwardEulerDiffusion => 1.0,
            Scheme::CrankNicolsonDiffusion => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::BackwardEulerDiffusion => "backward-euler-diffusion",
            Scheme::CrankNicolsonDiffusion => "crank-nicolson-diffusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::default(),
        }
    }
}

/// LU factors of a constant tridiagonal matrix (Thomas algorithm).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'`.
    upper: Vec<f64>,
    /// Pivots of the forward sweep.
    pivot: Vec<f64>,
}

impl Tridiagonal {
    /// `lower[0]` and `upper[n-1]` are ignored. Diagonal dominance is
    /// assumed; no pivoting.
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(n > 0 && lower.len() == n && upper.len() == n);
        let mut c = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        pivot[0] = diag[0];
        c[0] = upper[0] / pivot[0];
        for i in 1..n {
            pivot[i] = diag[i] - lower[i] * c[i - 1];
            c[i] = if i + 1 < n { upper[i] / pivot[i] } else { 0.0 };
        }
        Self {
            lower: lower.to_vec(),
            upper: c,
            pivot,
        }
    }

    pub fn solve_in_place(&self, d: &mut [f64]) {
        let n = self.pivot.len();
        assert_eq!(d.len(), n);
        d[0] /= self.pivot[0];
        for i in 1..n {
            d[i] = (d[i] - self.lower[i] * d[i - 1]) / self.pivot[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.upper[i] * d[i + 1];
        }
    }
}

/// Factorized `I - θ·dt·dⱼ·Δ_h` for each component.
#[derive(Debug, Clone)]
pub struct ImexStepper {
    grid: Grid1D,
    diffusion: [f64; 3],
    cfg: StepperConfig,
    systems: [Tridiagonal; 3],
}

impl ImexStepper {
    pub fn new(grid: Grid1D, diffusion: [f64; 3], cfg: StepperConfig) -> Result<Self, PdeError> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(PdeError::InvalidStep(cfg.dt));
        }
        let n = grid.n();
        let theta = cfg.scheme.theta();
        let inv = 1.0 / (grid.dx() * grid.dx());
        let systems = diffusion.map(|d| {
            let r = theta * cfg.dt * d * inv;
            let mut lower = vec![-r; n];
            let mut upper = vec![-r; n];
            let diag = vec![1.0 + 2.0 * r; n];
            upper[0] = -2.0 * r;
            lower[n - 1] = -2.0 * r;
            lower[0] = 0.0;
            upper[n - 1] = 0.0;
            Tridiagonal::factor(&lower, &diag, &upper)
        });
        Ok(Self {
            grid,
            diffusion,
            cfg,
            systems,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    /// Advance one step. `reaction(i, s)` is the reaction term at node `i`
    /// with local state `s`.
    pub fn step<R>(&self, state: &Field3, mut reaction: R) -> Result<Field3, PdeError>
    where
        R: FnMut(usize, State3) -> State3,
    {
        if state.grid != self.grid {
            return Err(PdeError::GridMismatch);
        }
        let n = self.grid.n();
        let dt = self.cfg.dt;
        let explicit = 1.0 - self.cfg.scheme.theta();

        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let r = reaction(i, state.at(i)).to_array();
            for j in 0..3 {
                rhs[j][i] = state.c[j][i] + dt * r[j];
            }
        }
        for (j, rhs_j) in rhs.iter_mut().enumerate() {
            if explicit > 0.0 {
                let lap = laplacian_apply(&state.c[j], &self.grid);
                let s = explicit * dt * self.diffusion[j];
                rhs_j.iter_mut().zip(lap).for_each(|(r, l)| *r += s * l);
            }
            self.systems[j].solve_in_place(rhs_j);
            if !rhs_j.iter().all(|v| v.is_finite()) {
                return Err(PdeError::NonFinite { component: j + 1 });
            }
        }
        Ok(Field3 {
            grid: self.grid,
            c: rhs,
        })
    }
}

/// One IMEX step without a cached factorization.
pub fn imex_step<R>(
    state: &Field3,
    reaction: R,
    diffusion: [f64; 3],
    cfg: &StepperConfig,
) -> Result<Field3, PdeError>
where
    R: FnMut(usize, State3) -> State3,
{
    ImexStepper::new(state.grid, diffusion, *cfg)?.step(state, reaction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid1D {
        Grid1D::new(10.0, 201).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = grid();
        assert_eq!(g.dx(), 0.05);
        assert_eq!(g.x(200), 10.0);
        assert_eq!(g.nearest_node(5.0), 100);
        assert_eq!(g.nearest_node(-3.0), 0);
        assert_eq!(g.nearest_node(99.0), 200);
        assert_abs_diff_eq!(g.integrate(&vec![1.0; 201]), 10.0, epsilon = 1e-12);
        assert_eq!(Grid1D::new(1.0, 2), Err(PdeError::TooFewNodes(2)));
        assert_eq!(Grid1D::new(0.0, 5), Err(PdeError::InvalidLength(0.0)));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid();
        assert!(laplacian_apply(&vec![3.7; 201], &g)
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_of_cosine_mode() {
        let g = grid();
        let w = PI / g.length();
        let f: Vec<f64> = g.nodes().map(|x| (w * x).cos()).collect();
        let lap = laplacian_apply(&f, &g);
        for (l, v) in lap.iter().zip(&f) {
            assert!((l + w * w * v).abs() <= 1e-3 * w * w);
        }
    }

    #[test]
    fn laplacian_conserves_flux() {
        let g = Grid1D::new(3.0, 17).unwrap();
        let f: Vec<f64> = g.nodes().map(|x| (x * x * x).sin() + x).collect();
        assert_abs_diff_eq!(g.integrate(&laplacian_apply(&f, &g)), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn eigenvalue_sequence() {
        let g = grid();
        assert_eq!(neumann_eigenvalue(0, &g), 0.0);
        assert_abs_diff_eq!(
            neumann_eigenvalue(1, &g),
            0.098_696_044_010_893_58,
            epsilon = 1e-15
        );
        let ev: Vec<f64> = (0..50).map(|i| neumann_eigenvalue(i, &g)).collect();
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn thomas_matches_dense_solution() {
        // [[4,1,0],[1,4,1],[0,1,4]] x = [5,6,5] -> x = [1,1,1]
        let t = Tridiagonal::factor(&[0.0, 1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0, 0.0]);
        let mut d = [5.0, 6.0, 5.0];
        t.solve_in_place(&mut d);
        for v in d {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_field_is_stationary_without_reaction() {
        let g = grid();
        let mut f = Field3::constant(g, State3::new(0.3, -1.0, 2.0));
        let st = ImexStepper::new(g, [0.1, 0.2, 0.3], StepperConfig::default()).unwrap();
        for _ in 0..50 {
            f = st.step(&f, |_, _| State3::ZERO).unwrap();
        }
        for j in 0..3 {
            let v = [0.3, -1.0, 2.0][j];
            assert!(f.c[j].iter().all(|x| (x - v).abs() < 1e-13));
        }
    }

    #[test]
    fn zero_diffusion_is_forward_euler() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let f = Field3::constant(g, State3::new(1.0, 2.0, 3.0));
        let cfg = StepperConfig {
            dt: 0.1,
            scheme: Scheme::BackwardEulerDiffusion,
        };
        let next = imex_step(&f, |_, s| s * 2.0, [0.0; 3], &cfg).unwrap();
        assert_eq!(next.at(2), State3::new(1.2, 2.4, 3.6));
    }

    #[test]
    fn non_finite_result_names_component() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let f = Field3::zeros(g);
        let err = imex_step(
            &f,
            |_, _| State3::new(0.0, f64::INFINITY, 0.0),
            [0.1; 3],
            &StepperConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, PdeError::NonFinite { component: 2 });
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = Field3::zeros(Grid1D::new(1.0, 5).unwrap());
        let b = Field3::zeros(Grid1D::new(1.0, 6).unwrap());
        assert_eq!(a.diff(&b), Err(PdeError::GridMismatch));
        let st = ImexStepper::new(b.grid, [0.1; 3], StepperConfig::default()).unwrap();
        assert_eq!(st.step(&a, |_, s| s).unwrap_err(), PdeError::GridMismatch);
    }
}
