//! Minimal complex 3x3 matrix arithmetic for the density-matrix solver.
//!
//! The state space is fixed at three levels, so a stack array beats a general
//! linear-algebra dependency: the commutator below sits in the innermost loop
//! of every propagation run.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[C64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[C64::new(0.0, 0.0); 3]; 3]);

    pub fn diag(d0: f64, d1: f64, d2: f64) -> Self {
        let mut m = Mat3::ZERO;
        m.0[0][0] = C64::new(d0, 0.0);
        m.0[1][1] = C64::new(d1, 0.0);
        m.0[2][2] = C64::new(d2, 0.0);
        m
    }

    pub fn identity() -> Self {
        Mat3::diag(1.0, 1.0, 1.0)
    }

    pub fn from_rows(rows: [[C64; 3]; 3]) -> Self {
        Mat3(rows)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..3 {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[i][j] - rhs.0[i][j];
            }
        }
        out
    }

    /// self + s * k for a real step factor, the only update RK4 needs.
    #[inline]
    pub fn add_scaled(&self, k: &Mat3, s: f64) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[i][j] + k.0[i][j].scale(s);
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Tr(m^2) for Hermitian m equals the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for row in &self.0 {
            for v in row {
                acc += v.norm_sqr();
            }
        }
        acc
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let d = (self.0[i][j] - self.0[j][i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Determinant; real up to rounding for Hermitian input.
    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Eigenvalues of a Hermitian matrix, ascending, via cyclic complex
    /// Jacobi rotations. The closed-form cubic loses ~1e-9 near repeated
    /// eigenvalues, which is too coarse for the positivity checks; Jacobi
    /// stays at rounding level and a 3x3 converges in a few sweeps.
    pub fn eigenvalues_hermitian(&self) -> [f64; 3] {
        let mut a = *self;
        let scale = a.0[0][0].re.abs()
            + a.0[1][1].re.abs()
            + a.0[2][2].re.abs()
            + 2.0 * (a.0[0][1].norm() + a.0[0][2].norm() + a.0[1][2].norm());
        if scale == 0.0 {
            return [0.0; 3];
        }
        for _ in 0..30 {
            let off = a.0[0][1].norm_sqr() + a.0[0][2].norm_sqr() + a.0[1][2].norm_sqr();
            if off <= (f64::EPSILON * scale).powi(2) {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let apq = a.0[p][q];
                let r = apq.norm();
                if r <= f64::EPSILON * scale * 1e-2 {
                    continue;
                }
                let phase = apq.unscale(r);
                let alpha = a.0[p][p].re;
                let beta = a.0[q][q].re;
                let tau = (alpha - beta) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let mut u = Mat3::identity();
                u.0[p][p] = C64::new(c, 0.0);
                u.0[q][q] = C64::new(c, 0.0);
                u.0[p][q] = -phase.scale(s);
                u.0[q][p] = phase.conj().scale(s);
                a = u.adjoint().mul(&a).mul(&u);
            }
        }
        let mut e = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re];
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        e
    }

    pub fn min_eigenvalue_hermitian(&self) -> f64 {
        self.eigenvalues_hermitian()[0]
    }
}

/// -i (h rho - rho h) for Hermitian h and rho, using (h rho)^dagger = rho h.
/// One matrix product instead of two, and the result is Hermitian exactly
/// (not just to rounding), which keeps the integrator structurally on the
/// Hermitian manifold.
#[inline]
pub fn minus_i_commutator_hermitian(h: &Mat3, rho: &Mat3) -> Mat3 {
    let a = h.mul(rho);
    let mut out = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            // m = a - a^dagger (anti-Hermitian), out = -i m.
            let m = a.0[i][j] - a.0[j][i].conj();
            out.0[i][j] = C64::new(m.im, -m.re);
        }
    }
    out
}
