//! Fixed-size 3×3 real linear algebra.
//!
//! Everything the stability certificates need: determinant, trace, the
//! spectrum via the closed-form roots of the characteristic cubic, and the
//! second additive compound.

use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

/// Dense real 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Matrix3 {
    pub const fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(rows)
    }

    pub const fn zeros() -> Self {
        Self([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|x| *x *= s);
        out
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn det(&self) -> f64 {
        det3(self)
    }

    pub fn trace(&self) -> f64 {
        trace3(self)
    }
}

impl Index<(usize, usize)> for Matrix3 {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Matrix3 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.0[r][c]
    }
}

impl Add for Matrix3 {
    type Output = Matrix3;
    fn add(self, rhs: Matrix3) -> Matrix3 {
        let mut out = self;
        for r in 0..3 {
            for c in 0..3 {
                out.0[r][c] += rhs.0[r][c];
            }
        }
        out
    }
}

impl Sub for Matrix3 {
    type Output = Matrix3;
    fn sub(self, rhs: Matrix3) -> Matrix3 {
        self + rhs.scale(-1.0)
    }
}

impl Mul for Matrix3 {
    type Output = Matrix3;
    fn mul(self, rhs: Matrix3) -> Matrix3 {
        let mut out = Matrix3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                out.0[r][c] = (0..3).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        out
    }
}

/// The three eigenvalues of a real 3×3 matrix.
///
/// Ordered by descending real part, ties broken by descending imaginary part.
/// Complex roots come as exact conjugate pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex3(pub [Complex64; 3]);

impl Complex3 {
    pub fn roots(&self) -> &[Complex64; 3] {
        &self.0
    }

    pub fn sum(&self) -> Complex64 {
        self.0.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.0.iter().product()
    }

    pub fn max_real(&self) -> f64 {
        self.0
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `[re, im]` pairs, the layout used by the JSON reports.
    pub fn as_pairs(&self) -> [[f64; 2]; 3] {
        self.0.map(|z| [z.re, z.im])
    }
}

pub fn det3(m: &Matrix3) -> f64 {
    let a = &m.0;
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn trace3(m: &Matrix3) -> f64 {
    m.0[0][0] + m.0[1][1] + m.0[2][2]
}

/// Sum of the three principal 2×2 minors (the middle invariant).
pub fn principal_minor_sum(m: &Matrix3) -> f64 {
    let a = &m.0;
    (a[0][0] * a[1][1] - a[0][1] * a[1][0])
        + (a[0][0] * a[2][2] - a[0][2] * a[2][0])
        + (a[1][1] * a[2][2] - a[1][2] * a[2][1])
}

/// Eigenvalues from the characteristic cubic `λ³ − tr·λ² + m₂·λ − det`.
///
/// Three real roots use the trigonometric form, otherwise Cardano. Each
/// root gets one Newton step on the cubic, kept only if it lowers the
/// residual.
pub fn eigenvalues3(m: &Matrix3) -> Complex3 {
    // monic coefficients: λ³ + c2 λ² + c1 λ + c0
    let c2 = -trace3(m);
    let c1 = principal_minor_sum(m);
    let c0 = -det3(m);
    let mut roots = solve_monic_cubic(c2, c1, c0);
    sort_roots(&mut roots);
    Complex3(roots)
}

fn solve_monic_cubic(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    let shift = -c2 / 3.0;
    // depressed cubic t³ + p t + q with λ = t + shift
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let poly = |z: Complex64| ((z + c2) * z + c1) * z + c0;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * c2) * z + c1;
    let polish = |z: Complex64| {
        let d = dpoly(z);
        if d.norm() == 0.0 {
            return z;
        }
        let next = z - poly(z) / d;
        if next.is_finite() && poly(next).norm() <= poly(z).norm() {
            next
        } else {
            z
        }
    };

    if disc <= 0.0 {
        // three real roots (p ≤ 0 here)
        if p == 0.0 {
            let r = Complex64::new(shift, 0.0);
            return [r; 3];
        }
        let radius = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let t = radius * (theta - 2.0 * PI * k as f64 / 3.0).cos();
            let z = polish(Complex64::new(t + shift, 0.0));
            *slot = Complex64::new(z.re, 0.0);
        }
        out
    } else {
        let sq = disc.sqrt();
        // pick the larger-magnitude branch to avoid cancellation
        let big = if half_q >= 0.0 {
            (-half_q - sq).cbrt()
        } else {
            (-half_q + sq).cbrt()
        };
        let small = if big == 0.0 { 0.0 } else { -third_p / big };
        let real = polish(Complex64::new(big + small + shift, 0.0)).re;
        let pair = polish(Complex64::new(
            -(big + small) / 2.0 + shift,
            (3.0f64).sqrt() / 2.0 * (big - small).abs(),
        ));
        [
            Complex64::new(real, 0.0),
            Complex64::new(pair.re, pair.im.abs()),
            Complex64::new(pair.re, -pair.im.abs()),
        ]
    }
}

fn sort_roots(roots: &mut [Complex64; 3]) {
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Standard second additive compound of a 3×3 matrix.
///
/// Its eigenvalues are the pairwise sums λᵢ+λⱼ (i<j) of the eigenvalues of `m`.
pub fn second_additive_compound(m: &Matrix3) -> Matrix3 {
    let a = &m.0;
    Matrix3([
        [a[0][0] + a[1][1], a[1][2], -a[0][2]],
        [a[2][1], a[0][0] + a[2][2], a[0][1]],
        [-a[2][0], a[1][0], a[1][1] + a[2][2]],
    ])
}

/// Trace, determinant and compound determinant of a matrix, with the
/// sufficient stability verdict "all three strictly negative".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateReport {
    pub trace: f64,
    pub det: f64,
    pub compound_det: f64,
    pub stable: bool,
}

/// For a real 3×3 matrix, negative trace, determinant and compound
/// determinant are exactly the Routh–Hurwitz conditions on its
/// characteristic cubic, so `stable` implies every eigenvalue has negative
/// real part.
pub fn hurwitz_certificate(m: &Matrix3) -> CertificateReport {
    let trace = trace3(m);
    let det = det3(m);
    let compound_det = det3(&second_additive_compound(m));
    CertificateReport {
        trace,
        det,
        compound_det,
        stable: trace < 0.0 && det < 0.0 && compound_det < 0.0,
    }
}
