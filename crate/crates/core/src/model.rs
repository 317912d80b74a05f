//! The Newton–Leipnik vector field
//!
//! ```text
//! du1/dt = -a u1 + u2 + 10 u2 u3
//! du2/dt = -u1 - 0.4 u2 + 5 u1 u3
//! du3/dt = alpha u3 - 5 u1 u2
//! ```
//!
//! with its Jacobian, phase-volume contraction, and an equilibrium finder.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;
use thiserror::Error;

use crate::linalg3::{det3, eigenvalues3, Complex3, Matrix3};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("diffusion coefficient d{index} must be strictly positive, got {value}")]
    NonPositiveDiffusion { index: usize, value: f64 },
    #[error("controller gain k must be non-negative, got {0}")]
    NegativeGain(f64),
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
}

/// Model and control constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    /// Linear damping of the first equation (enters as `-a u1`).
    pub a: f64,
    pub alpha: f64,
    /// Controller gain.
    pub k: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            a: 0.4,
            alpha: 0.175,
            k: 5.0,
            d1: 0.1,
            d2: 0.1,
            d3: 0.1,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("a", self.a),
            ("alpha", self.alpha),
            ("k", self.k),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        if self.k < 0.0 {
            return Err(ModelError::NegativeGain(self.k));
        }
        for (index, value) in self.diffusion().into_iter().enumerate() {
            if value <= 0.0 {
                return Err(ModelError::NonPositiveDiffusion {
                    index: index + 1,
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn diffusion(&self) -> [f64; 3] {
        [self.d1, self.d2, self.d3]
    }
}

/// One point of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct State3 {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl State3 {
    pub const ZERO: State3 = State3::new(0.0, 0.0, 0.0);

    pub const fn new(u1: f64, u2: f64, u3: f64) -> Self {
        Self { u1, u2, u3 }
    }

    pub const fn to_array(self) -> [f64; 3] {
        [self.u1, self.u2, self.u3]
    }

    pub fn norm_inf(&self) -> f64 {
        self.u1.abs().max(self.u2.abs()).max(self.u3.abs())
    }

    pub fn dot(&self, other: &State3) -> f64 {
        self.u1 * other.u1 + self.u2 * other.u2 + self.u3 * other.u3
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite() && self.u3.is_finite()
    }

    /// Image under the system's symmetry `(u1, u2, u3) -> (-u1, -u2, u3)`.
    pub fn mirror(self) -> Self {
        Self::new(-self.u1, -self.u2, self.u3)
    }
}

impl From<[f64; 3]> for State3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<State3> for [f64; 3] {
    fn from(s: State3) -> Self {
        s.to_array()
    }
}

impl Add for State3 {
    type Output = State3;
    fn add(self, o: State3) -> State3 {
        State3::new(self.u1 + o.u1, self.u2 + o.u2, self.u3 + o.u3)
    }
}

impl Sub for State3 {
    type Output = State3;
    fn sub(self, o: State3) -> State3 {
        State3::new(self.u1 - o.u1, self.u2 - o.u2, self.u3 - o.u3)
    }
}

impl Mul<f64> for State3 {
    type Output = State3;
    fn mul(self, s: f64) -> State3 {
        State3::new(self.u1 * s, self.u2 * s, self.u3 * s)
    }
}

impl Neg for State3 {
    type Output = State3;
    fn neg(self) -> State3 {
        self * -1.0
    }
}

pub fn reaction_rhs(u: State3, p: &Params) -> State3 {
    let State3 { u1, u2, u3 } = u;
    State3::new(
        -p.a * u1 + u2 + 10.0 * u2 * u3,
        -u1 - 0.4 * u2 + 5.0 * u1 * u3,
        p.alpha * u3 - 5.0 * u1 * u2,
    )
}

pub fn jacobian(u: State3, p: &Params) -> Matrix3 {
    let State3 { u1, u2, u3 } = u;
    Matrix3::from_rows([
        [-p.a, 1.0 + 10.0 * u3, 10.0 * u2],
        [-1.0 + 5.0 * u3, -0.4, 5.0 * u1],
        [-5.0 * u2, -5.0 * u1, p.alpha],
    ])
}

/// Divergence of the vector field; it does not depend on the state.
pub fn divergence(p: &Params) -> f64 {
    p.alpha - p.a - 0.4
}

pub fn is_dissipative(p: &Params) -> bool {
    divergence(p) < 0.0
}

/// Phase-space volume after time `t` of a region with initial volume `v0`.
pub fn volume_decay(t: f64, v0: f64, p: &Params) -> f64 {
    v0 * (divergence(p) * t).exp()
}

/// Seed grid and tolerances for [`find_equilibria_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSearch {
    /// Seeds cover `[-half_width, half_width]³`.
    pub half_width: f64,
    pub points_per_axis: usize,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub dedup_distance: f64,
    pub singular_det: f64,
}

impl Default for EquilibriumSearch {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            points_per_axis: 21,
            residual_tol: 1e-12,
            max_iter: 50,
            dedup_distance: 1e-6,
            singular_det: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    pub point: State3,
    pub eigenvalues: Complex3,
    /// All eigenvalues strictly in the left half-plane.
    pub stable: bool,
}

pub fn find_equilibria(p: &Params) -> Vec<EquilibriumReport> {
    find_equilibria_with(p, &EquilibriumSearch::default())
}

/// Newton's method from every node of a uniform seed grid, deduplicated.
///
/// The result is ordered by distance from the origin, then lexicographically
/// by `(u1, u2, u3)`, so the origin (when it is a root) comes first.
pub fn find_equilibria_with(p: &Params, search: &EquilibriumSearch) -> Vec<EquilibriumReport> {
    let n = search.points_per_axis.max(1);
    let step = if n > 1 {
        2.0 * search.half_width / (n - 1) as f64
    } else {
        0.0
    };
    let coord = |i: usize| {
        if n > 1 {
            -search.half_width + step * i as f64
        } else {
            0.0
        }
    };

    let mut roots: Vec<State3> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let seed = State3::new(coord(i), coord(j), coord(l));
                let Some(root) = newton_solve(seed, p, search) else {
                    continue;
                };
                let residual = reaction_rhs(root, p).norm_inf();
                let dup = roots.iter_mut().find(|r| {
                    let d = **r - root;
                    d.dot(&d).sqrt() < search.dedup_distance
                });
                match dup {
                    // keep the representative with the smaller residual
                    Some(r) if residual < reaction_rhs(*r, p).norm_inf() => *r = root,
                    Some(_) => {}
                    None => roots.push(root),
                }
            }
        }
    }

    roots.sort_by(|a, b| {
        let na = (a.dot(a).sqrt() * 1e8).round();
        let nb = (b.dot(b).sqrt() * 1e8).round();
        na.total_cmp(&nb)
            .then(a.u1.total_cmp(&b.u1))
            .then(a.u2.total_cmp(&b.u2))
            .then(a.u3.total_cmp(&b.u3))
    });

    roots
        .into_iter()
        .map(|point| {
            let eigenvalues = eigenvalues3(&jacobian(point, p));
            EquilibriumReport {
                point,
                eigenvalues,
                stable: eigenvalues.max_real() < 0.0,
            }
        })
        .collect()
}

fn newton_solve(seed: State3, p: &Params, search: &EquilibriumSearch) -> Option<State3> {
    let mut u = seed;
    for _ in 0..=search.max_iter {
        let f = reaction_rhs(u, p);
        if !f.is_finite() {
            return None;
        }
        if f.norm_inf() < search.residual_tol {
            return Some(u);
        }
        let j = jacobian(u, p);
        let step = solve3(&j, f.to_array(), search.singular_det)?;
        u = u - State3::from(step);
    }
    None
}

/// Cramer's rule; `None` when `|det| < singular_det`.
fn solve3(m: &Matrix3, rhs: [f64; 3], singular_det: f64) -> Option<[f64; 3]> {
    let det = det3(m);
    if det.abs() < singular_det || !det.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut replaced = *m;
        for row in 0..3 {
            replaced.0[row][col] = rhs[row];
        }
        *slot = det3(&replaced) / det;
    }
    Some(out)
}
