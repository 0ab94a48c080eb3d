//! Ternary quadratic forms and the congruence-shifted counting problem.

use crate::arith::{gcd, is_perfect_square, rem};
use crate::error::{Error, Result};

pub type Vec3 = [i64; 3];
pub type Mat3 = [[i64; 3]; 3];

/// F(x) = xᵀAx with A the integer half-Hessian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TernaryForm {
    /// (a11, a22, a33, a12, a13, a23) as coefficients of the polynomial.
    coefficients: [i64; 6],
    half_hessian: Mat3,
    adjoint: Mat3,
    discriminant: i64,
    signature: (u8, u8),
}

fn det3(a: &Mat3) -> i64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn adj3(a: &Mat3) -> Mat3 {
    let mut out = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            out[i][j] = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        }
    }
    out
}

fn sign_changes(coeffs: &[i64]) -> u8 {
    let nonzero: Vec<i64> = coeffs.iter().copied().filter(|&c| c != 0).collect();
    nonzero.windows(2).filter(|w| (w[0] < 0) != (w[1] < 0)).count() as u8
}

/// Signature of a nondegenerate symmetric matrix. The characteristic polynomial
/// of a symmetric matrix is real-rooted, so Descartes' rule is exact here.
fn signature(a: &Mat3) -> (u8, u8) {
    let tr = a[0][0] + a[1][1] + a[2][2];
    let adj = adj3(a);
    let s2 = adj[0][0] + adj[1][1] + adj[2][2];
    let det = det3(a);
    let pos = sign_changes(&[1, -tr, s2, -det]);
    let neg = sign_changes(&[-1, -tr, -s2, -det]);
    (pos, neg)
}

impl TernaryForm {
    pub fn coefficients(&self) -> [i64; 6] {
        self.coefficients
    }

    pub fn half_hessian(&self) -> &Mat3 {
        &self.half_hessian
    }

    pub fn adjoint(&self) -> &Mat3 {
        &self.adjoint
    }

    /// Δ_F = det A.
    pub fn discriminant(&self) -> i64 {
        self.discriminant
    }

    pub fn signature(&self) -> (u8, u8) {
        self.signature
    }

    pub fn eval(&self, x: &Vec3) -> i64 {
        quad(&self.half_hessian, x) as i64
    }

    pub fn eval_i128(&self, x: &[i128; 3]) -> i128 {
        let a = &self.half_hessian;
        let mut s = 0i128;
        for i in 0..3 {
            for j in 0..3 {
                s += a[i][j] as i128 * x[i] * x[j];
            }
        }
        s
    }

    pub fn eval_f64(&self, x: &[f64; 3]) -> f64 {
        let a = &self.half_hessian;
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += a[i][j] as f64 * x[i] * x[j];
            }
        }
        s
    }

    /// ∇F(x) = 2Ax.
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let a = &self.half_hessian;
        std::array::from_fn(|i| 2 * (a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2]))
    }

    pub fn gradient_f64(&self, x: &[f64; 3]) -> [f64; 3] {
        let a = &self.half_hessian;
        std::array::from_fn(|i| 2.0 * (a[i][0] as f64 * x[0] + a[i][1] as f64 * x[1] + a[i][2] as f64 * x[2]))
    }

    /// F*(c) = cᵀ adj(A) c.
    pub fn adjoint_value(&self, c: &Vec3) -> i64 {
        quad(&self.adjoint, c) as i64
    }

    /// F(x) mod n for a residue vector, without overflow for n < 2^31.
    pub fn eval_mod(&self, x: &Vec3, n: u64) -> u64 {
        let a = &self.half_hessian;
        let xr: [i128; 3] = std::array::from_fn(|i| rem(x[i], n) as i128);
        let mut s = 0i128;
        for i in 0..3 {
            for j in 0..3 {
                s += a[i][j] as i128 * xr[i] * xr[j];
            }
        }
        s.rem_euclid(n as i128) as u64
    }
}

fn quad(a: &Mat3, x: &Vec3) -> i128 {
    let mut s = 0i128;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] as i128 * x[i] as i128 * x[j] as i128;
        }
    }
    s
}

/// Build F = a11 x² + a22 y² + a33 z² + a12 xy + a13 xz + a23 yz.
pub fn new_form(coefficients: [i64; 6]) -> Result<TernaryForm> {
    let [a11, a22, a33, a12, a13, a23] = coefficients;
    if a12 % 2 != 0 || a13 % 2 != 0 || a23 % 2 != 0 {
        return Err(Error::OddCrossCoefficient);
    }
    let a = [[a11, a12 / 2, a13 / 2], [a12 / 2, a22, a23 / 2], [a13 / 2, a23 / 2, a33]];
    let det = det3(&a);
    if det == 0 {
        return Err(Error::Degenerate);
    }
    let sig = signature(&a);
    if sig.0 == 0 || sig.1 == 0 {
        return Err(Error::NotIndefinite);
    }
    Ok(TernaryForm {
        coefficients,
        half_hessian: a,
        adjoint: adj3(&a),
        discriminant: det,
        signature: sig,
    })
}

/// Everything fixed by (F, m, L, Γ): the lift λ, the shifted data k̂, Ω, m(Ω).
#[derive(Debug, Clone, PartialEq)]
pub struct CountingProblem {
    pub form: TernaryForm,
    pub m: i64,
    pub l: u64,
    pub gamma: Vec3,
    pub lambda: Vec3,
    /// |2LΔ_F|.
    pub omega: u64,
    /// m(Ω) = ∏_{p | m, p ∤ Ω} p.
    pub m_omega_radical: u64,
    pub k_hat: i64,
    pub theta: f64,
    pub square_case: bool,
    /// √(−mΔ_F) when that is an integer, else 0.
    pub d0: u64,
}

pub fn new_problem(form: TernaryForm, m: i64, l: u64, gamma: Vec3, theta: f64) -> Result<CountingProblem> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be nonzero".into()));
    }
    if l == 0 {
        return Err(Error::InvalidArgument("L must be positive".into()));
    }
    let lambda: Vec3 = std::array::from_fn(|i| rem(gamma[i], l) as i64);
    let f_lambda = form.eval(&lambda);
    if (f_lambda - m) % l as i64 != 0 {
        return Err(Error::IncompatibleGamma);
    }
    let k_hat = (f_lambda - m) / l as i64;
    let omega = 2 * l * form.discriminant().unsigned_abs();
    let m_omega_radical = crate::arith::factor(m.unsigned_abs())
        .primes()
        .filter(|&p| omega % p != 0)
        .product();
    let neg = (-(m as i128)) * form.discriminant() as i128;
    let d0 = i64::try_from(neg).ok().and_then(is_perfect_square);
    Ok(CountingProblem {
        form,
        m,
        l,
        gamma: lambda,
        lambda,
        omega,
        m_omega_radical,
        k_hat,
        theta,
        square_case: d0.is_some(),
        d0: d0.unwrap_or(0),
    })
}

impl CountingProblem {
    /// Ĥ(y) = k̂ + ∇F(λ)·y.
    pub fn h_hat(&self, y: &Vec3) -> i64 {
        let g = self.grad_lambda();
        self.k_hat + g[0] * y[0] + g[1] * y[1] + g[2] * y[2]
    }

    pub fn grad_lambda(&self) -> Vec3 {
        self.form.gradient(&self.lambda)
    }

    /// m·Ω, whose prime support splits moduli into good and bad parts.
    pub fn m_omega(&self) -> u64 {
        self.m.unsigned_abs() * self.omega
    }

    /// True when every prime of n divides mΩ.
    pub fn is_bad_modulus(&self, n: u64) -> bool {
        crate::arith::part_toward(n, self.m_omega()) == n
    }

    pub fn is_good_modulus(&self, n: u64) -> bool {
        gcd(n, self.m_omega()) == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pyth() -> TernaryForm {
        new_form([1, 1, -1, 0, 0, 0]).unwrap()
    }

    #[test]
    fn reference_forms() {
        let f = pyth();
        assert_eq!(f.discriminant(), -1);
        assert_eq!(f.adjoint_value(&[1, 0, 0]), -1);
        assert_eq!(f.adjoint_value(&[2, 3, 5]), -4 - 9 + 25);
        assert_eq!(f.eval(&[3, 4, 5]), 0);
        assert_eq!(f.gradient(&[1, 1, 1]), [2, 2, -2]);
        assert_eq!(f.signature(), (2, 1));
        let g = new_form([0, 1, 0, 0, -4, 0]).unwrap();
        assert_eq!(g.discriminant(), -4);
        assert_eq!(g.signature(), (2, 1));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(new_form([1, 1, 1, 0, 0, 0]), Err(Error::NotIndefinite));
        assert_eq!(new_form([-1, -2, -1, 0, 0, 0]), Err(Error::NotIndefinite));
        assert_eq!(new_form([1, 1, -1, 1, 0, 0]), Err(Error::OddCrossCoefficient));
        assert_eq!(new_form([1, 1, 0, 0, 0, 0]), Err(Error::Degenerate));
    }

    #[test]
    fn problems() {
        let p = new_problem(pyth(), 1, 1, [0, 0, 0], 1.0).unwrap();
        assert_eq!(p.lambda, [0, 0, 0]);
        assert_eq!(p.k_hat, -1);
        assert_eq!(p.omega, 2);
        assert!(p.square_case);
        assert_eq!(p.d0, 1);
        assert_eq!(p.h_hat(&[5, -3, 7]), -1);

        let p = new_problem(pyth(), 1, 2, [1, 1, 1], 1.0).unwrap();
        assert_eq!(p.k_hat, 0);
        assert_eq!(p.h_hat(&[1, 0, 0]), 2);
        assert_eq!(p.h_hat(&[0, 0, 0]), 0);
        assert_eq!(p.h_hat(&[0, 0, 1]), -2);

        let p = new_problem(pyth(), 2, 1, [0, 0, 0], 1.0).unwrap();
        assert!(!p.square_case);
        assert_eq!(p.m_omega_radical, 1);

        let p = new_problem(pyth(), 15, 1, [0, 0, 0], 1.0).unwrap();
        assert_eq!(p.m_omega_radical, 15);

        assert_eq!(new_problem(pyth(), 1, 2, [0, 0, 0], 1.0), Err(Error::IncompatibleGamma));
    }
}
