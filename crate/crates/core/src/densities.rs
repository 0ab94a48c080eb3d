//! p-adic local densities, the modified singular series, and the Euler
//! factors of the Dirichlet series Σ_q Ŝ_q(0)q^{−s}.

use std::f64::consts::PI;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{factor, is_prime, ord, rem};
use crate::error::{invalid, Error, Result};
use crate::expsums::shat::{s_hat, s_hat_gauss, BRUTE_LIMIT};
use crate::forms::{new_problem, CountingProblem, TernaryForm, Vec3};

pub type Rational = Ratio<i128>;

/// Largest p^k for which solution sets are lifted explicitly.
pub const MAX_PRIME_POWER: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalDensity {
    pub p: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub value: Rational,
    /// k at which the normalized count stabilized.
    pub level: u32,
    /// Every point counted at that level has ∇F ≢ 0 mod p^{⌈k/2⌉}.
    pub smooth_certified: bool,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

impl LocalDensity {
    pub fn to_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

/// Solutions of F ≡ m mod p^k with v ≡ Γ mod p^{ord_p L}, lifted one level at a time.
///
/// A point with ∇F ≢ 0 mod p^{⌈k/2⌉} has exactly p² lifts at every later level
/// (Hensel), so it is retired with its mass and not lifted further.
struct Lifter<'a> {
    form: &'a TernaryForm,
    m: i64,
    p: u64,
    level: u32,
    active: Vec<Vec3>,
    retired: Rational,
}

impl<'a> Lifter<'a> {
    fn new(problem: &'a CountingProblem, p: u64) -> Lifter<'a> {
        let e = ord(p, problem.l);
        let pe = p.pow(e);
        let start = problem.lambda.map(|x| rem(x, pe) as i64);
        let mut lifter = Lifter {
            form: &problem.form,
            m: problem.m,
            p,
            level: e,
            active: vec![start],
            retired: Rational::from_integer(0),
        };
        if e > 0 {
            lifter.retire();
        }
        lifter
    }

    fn modulus(&self) -> u64 {
        self.p.pow(self.level)
    }

    fn retire(&mut self) {
        let bound = self.p.pow(self.level.div_ceil(2));
        let form = self.form;
        let before = self.active.len();
        self.active.retain(|v| form.gradient(v).iter().all(|&g| rem(g, bound) == 0));
        let done = (before - self.active.len()) as i128;
        self.retired += Rational::new(done, (self.modulus() as i128).pow(2));
    }

    fn lift(&mut self) -> Result<()> {
        let pk = self.modulus();
        let next = pk * self.p;
        if next > MAX_PRIME_POWER {
            return Err(Error::Budget(format!("p^k = {next} exceeds {MAX_PRIME_POWER}")));
        }
        let p = self.p as i64;
        let (form, m) = (self.form, self.m);
        let step = pk as i64;
        self.active = self
            .active
            .par_iter()
            .flat_map_iter(|x| {
                let x = *x;
                (0..p * p * p).filter_map(move |t| {
                    let v = [x[0] + step * (t % p), x[1] + step * ((t / p) % p), x[2] + step * (t / (p * p))];
                    let f = form.eval_i128(&v.map(|c| c as i128)) - m as i128;
                    (f.rem_euclid(next as i128) == 0).then_some(v)
                })
            })
            .collect();
        self.level += 1;
        self.retire();
        Ok(())
    }

    fn density(&self) -> Rational {
        self.retired + Rational::new(self.active.len() as i128, (self.modulus() as i128).pow(2))
    }
}

/// #{v mod p^k : F(v) ≡ m, v ≡ Γ mod p^{ord_p L}} for k ≥ ord_p L, by full enumeration.
pub fn count_mod_prime_power(problem: &CountingProblem, p: u64, k: u32) -> Result<u64> {
    if !is_prime(p) {
        return invalid(format!("{p} is not prime"));
    }
    let e = ord(p, problem.l);
    if k < e {
        return invalid("k must be at least ord_p(L)");
    }
    let pk = p.pow(k);
    if pk > 1 << 8 {
        return Err(Error::Budget(format!("enumeration mod {pk} is too large")));
    }
    let pe = p.pow(e);
    let n = pk as i64;
    let mut count = 0;
    for t in 0..n * n * n {
        let v = [t % n, (t / n) % n, t / (n * n)];
        if (0..3).all(|i| rem(v[i] - problem.lambda[i], pe) == 0) && rem(problem.form.eval(&v) - problem.m, pk) == 0 {
            count += 1;
        }
    }
    Ok(count)
}

/// σ_p, stabilized by agreement of consecutive levels plus the Hensel certificate.
pub fn sigma_p(problem: &CountingProblem, p: u64) -> Result<LocalDensity> {
    if !is_prime(p) {
        return invalid(format!("{p} is not prime"));
    }
    let big = problem.m.unsigned_abs() as u128 * 4 * problem.form.discriminant().unsigned_abs() as u128 * (problem.l as u128).pow(2);
    let mut cap = 3u32;
    let mut n = big;
    while n % p as u128 == 0 {
        n /= p as u128;
        cap += 1;
    }
    let mut lifter = Lifter::new(problem, p);
    if lifter.level == 0 {
        lifter.lift()?;
    }
    let cap = cap.max(lifter.level + 1);
    loop {
        let k = lifter.level;
        let value = lifter.density();
        let smooth = lifter.active.is_empty();
        if k >= cap {
            return Err(Error::NoConvergence(format!("σ_{p} did not stabilize by k = {cap}")));
        }
        lifter.lift()?;
        if smooth && lifter.density() == value {
            return Ok(LocalDensity { p, value, level: k, smooth_certified: true });
        }
    }
}

/// Exhaustive #{v mod p : F(v) ≡ m mod p}.
pub fn mod_p_count(form: &TernaryForm, m: i64, p: u64) -> u64 {
    let pi = p as i64;
    let mut n = 0;
    for a in 0..pi {
        for b in 0..pi {
            for c in 0..pi {
                if rem(form.eval(&[a, b, c]) - m, p) == 0 {
                    n += 1;
                }
            }
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSeries {
    /// Ĝ = (6/π²)·finite_part.
    pub value: f64,
    /// ∏_{p | mΩ} (1 − 1/p)σ_p/(1 − 1/p²), exact.
    #[serde(serialize_with = "ser_ratio")]
    pub finite_part: Rational,
    pub densities: Vec<LocalDensity>,
}

/// Ĝ = ∏_p (1 − 1/p)σ_p, with σ_p = 1 + 1/p off mΩ summed in closed form.
pub fn singular_series(problem: &CountingProblem) -> Result<SingularSeries> {
    let primes: Vec<u64> = factor(problem.m_omega()).primes().collect();
    let densities: Vec<LocalDensity> = primes.par_iter().map(|&p| sigma_p(problem, p)).collect::<Result<_>>()?;
    let mut finite_part = Rational::from_integer(1);
    for d in &densities {
        if *d.value.numer() == 0 {
            return Err(Error::EmptyLocalCondition(d.p));
        }
        let p = d.p as i128;
        finite_part *= d.value * Rational::new(p, p + 1);
    }
    let value = 6.0 / (PI * PI) * (*finite_part.numer() as f64 / *finite_part.denom() as f64);
    Ok(SingularSeries { value, finite_part, densities })
}

/// Moduli qL up to this size use the direct O((qL)³) sum; beyond it the Gauss reduction.
const DIRECT_LIMIT: u64 = 300;

/// Ŝ_q(0).
pub fn s_hat_zero(problem: &CountingProblem, q: u64) -> Result<f64> {
    if q * problem.l <= DIRECT_LIMIT.min(BRUTE_LIMIT) {
        Ok(s_hat(problem, q, &[0, 0, 0])?.value.re)
    } else {
        Ok(s_hat_gauss(problem, q, &[0, 0, 0]).value.re)
    }
}

/// #{σ mod p^{ord_p L} : Ĥ(σ) ≡ 0 mod p^{ord_p L}}, the p-part of Ŝ_1(0).
pub fn s_hat_one_local(problem: &CountingProblem, p: u64) -> u64 {
    let pe = p.pow(ord(p, problem.l));
    let g = problem.grad_lambda();
    let k = problem.k_hat;
    let n = pe as i64;
    let mut count = 0;
    for t in 0..n * n * n {
        let s = [t % n, (t / n) % n, t / (n * n)];
        if rem(k + g[0] * s[0] + g[1] * s[1] + g[2] * s[2], pe) == 0 {
            count += 1;
        }
    }
    count
}

/// Euler factor at p of Σ_q Ŝ_q(0)q^{−3}, truncated at t_max.
///
/// Ŝ_q(0) carries the constant Ŝ_1(0) = ∏_{p | L} #{σ mod p^e : Ĥ ≡ 0}; the
/// factors at the other primes of L are divided out so the result approaches
/// p^{4 ord_p L}σ_p.
pub fn nu_factor(problem: &CountingProblem, p: u64, t_max: u32) -> Result<f64> {
    if !is_prime(p) || t_max > 6 {
        return invalid("nu_factor needs p prime and t_max ≤ 6");
    }
    let cofactor = s_hat_zero(problem, 1)? / s_hat_one_local(problem, p) as f64;
    let mut s = 0.0;
    for t in 0..=t_max {
        let q = p.pow(t);
        s += s_hat_zero(problem, q)? / (q as f64).powi(3);
    }
    Ok(s / cofactor)
}

/// Every lift Γ' mod L·p₀ of Γ that stays on F ≡ m.
pub fn refinements(problem: &CountingProblem, p0: u64) -> Result<Vec<CountingProblem>> {
    if !is_prime(p0) || problem.m_omega() % p0 == 0 {
        return invalid("refinement prime must be prime and coprime to mΩ");
    }
    let l = problem.l as i64;
    let big_l = problem.l * p0;
    let mut out = Vec::new();
    for t in 0..(p0 * p0 * p0) as i64 {
        let p = p0 as i64;
        let shift = [t % p, (t / p) % p, t / (p * p)];
        let gamma: Vec3 = std::array::from_fn(|i| problem.lambda[i] + l * shift[i]);
        if rem(problem.form.eval(&gamma) - problem.m, big_l) == 0 {
            out.push(new_problem(problem.form.clone(), problem.m, big_l, gamma, problem.theta)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{jacobi, upsilon};
    use crate::forms::new_form;

    fn pyth() -> TernaryForm {
        new_form([1, 1, -1, 0, 0, 0]).unwrap()
    }

    fn reference() -> CountingProblem {
        new_problem(pyth(), 1, 1, [0, 0, 0], 1.0).unwrap()
    }

    #[test]
    fn sigma_three() {
        let d = sigma_p(&reference(), 3).unwrap();
        assert_eq!(d.value, Rational::new(4, 3));
        assert_eq!(d.level, 1);
        assert!(d.smooth_certified);
        assert_eq!(count_mod_prime_power(&reference(), 3, 1).unwrap(), 12);
    }

    #[test]
    fn good_primes() {
        for p in [5, 7, 11, 13] {
            let d = sigma_p(&reference(), p).unwrap();
            assert_eq!(d.value, Rational::new(p as i128 + 1, p as i128));
        }
    }

    #[test]
    fn two_adic_density_from_enumeration() {
        let d = sigma_p(&reference(), 2).unwrap();
        assert!(d.level <= 5);
        // The plateau holds beyond the certified level.
        let k = d.level + 2;
        let n = count_mod_prime_power(&reference(), 2, k).unwrap();
        assert_eq!(Rational::new(n as i128, 4i128.pow(k)), d.value);
        assert_eq!(*d.value.denom() & (*d.value.denom() - 1), 0);
    }

    #[test]
    fn mod_p_counts() {
        for coeffs in [[1, 1, -1, 0, 0, 0], [1, -3, 5, 2, 0, 4], [0, 1, 0, 0, -4, 0]] {
            let f = new_form(coeffs).unwrap();
            for m in [1i64, 2, 6, -7] {
                let bad = 2 * m.unsigned_abs() * f.discriminant().unsigned_abs();
                for p in (3..50).filter(|&p| is_prime(p) && bad % p != 0) {
                    let chi = jacobi(-m * f.discriminant(), p).unwrap() as i64;
                    assert_eq!(mod_p_count(&f, m, p) as i64, (p * p) as i64 + chi * p as i64, "{coeffs:?} m={m} p={p}");
                }
            }
        }
        // −mΔ = □: every good prime gives p² + p.
        let f = pyth();
        for p in (3..50).filter(|&p| is_prime(p)) {
            assert_eq!(mod_p_count(&f, 1, p), p * p + p);
        }
    }

    #[test]
    fn reference_singular_series() {
        let s = singular_series(&reference()).unwrap();
        let s2 = sigma_p(&reference(), 2).unwrap().to_f64();
        assert!((s.value - 4.0 / (PI * PI) * s2).abs() < 1e-15);
    }

    #[test]
    fn empty_local_condition() {
        // x² + y² ≢ 3 mod 4.
        let f = new_form([1, 1, -4, 0, 0, 0]).unwrap();
        let p = new_problem(f, 3, 1, [0, 0, 0], 1.0).unwrap();
        assert_eq!(sigma_p(&p, 2).unwrap().value, Rational::from_integer(0));
        assert_eq!(singular_series(&p), Err(Error::EmptyLocalCondition(2)));
    }

    #[test]
    fn nu_factors() {
        let r = reference();
        for p in [3u64, 5, 7] {
            assert!((nu_factor(&r, p, 1).unwrap() - (1.0 + 1.0 / p as f64)).abs() < 1e-12);
            assert!((nu_factor(&r, p, 4).unwrap() - (1.0 + 1.0 / p as f64)).abs() < 1e-12);
        }
        // p ∥ m, p ∤ Ω: Ŝ_{p²}(0) = −p⁴.
        let p15 = new_problem(pyth(), 15, 1, [0, 1, 4], 1.0).unwrap();
        for p in [3u64, 5] {
            let v = s_hat_zero(&p15, p * p).unwrap();
            assert!((v + (p as f64).powi(4)).abs() < 1e-9, "p={p}: {v}");
        }
    }

    #[test]
    fn nu_factor_matches_density() {
        let cases = [
            new_problem(pyth(), 1, 1, [0, 0, 0], 1.0).unwrap(),
            new_problem(pyth(), 1, 2, [1, 0, 0], 1.0).unwrap(),
            new_problem(pyth(), 1, 4, [1, 0, 0], 1.0).unwrap(),
            new_problem(pyth(), 1, 6, [1, 0, 0], 1.0).unwrap(),
            new_problem(pyth(), 9, 1, [0, 0, 3], 1.0).unwrap(),
            new_problem(pyth(), 15, 1, [0, 1, 4], 1.0).unwrap(),
        ];
        for pr in &cases {
            for p in [2u64, 3, 5] {
                let e = ord(p, pr.l) as i32;
                let target = (p as f64).powi(4 * e) * sigma_p(pr, p).unwrap().to_f64();
                for t_max in [4u32, 6] {
                    let nu = nu_factor(pr, p, t_max).unwrap();
                    let bound = 10.0 * (p as f64).powf(-(t_max as f64) / 2.0);
                    assert!((nu - target).abs() < bound * target.max(1.0), "m={} L={} p={p} t={t_max}: {nu} vs {target}", pr.m, pr.l);
                }
            }
        }
    }

    #[test]
    fn refinement_conserves_mass() {
        for base in [reference(), new_problem(pyth(), 1, 2, [1, 0, 0], 1.0).unwrap()] {
            let g = singular_series(&base).unwrap().finite_part;
            for p0 in [7u64, 11] {
                let lifts = refinements(&base, p0).unwrap();
                let total: Rational = lifts.iter().map(|p| singular_series(p).unwrap().finite_part).sum();
                assert_eq!(total, g, "L={} p0={p0}", base.l);
            }
        }
    }

    #[test]
    fn sandwich_battery() {
        let f = pyth();
        for m in 1..=500i64 {
            if crate::arith::is_perfect_square(m).is_none() {
                continue;
            }
            let p = new_problem(f.clone(), m, 1, root(&f, m), 1.0).unwrap();
            let g = singular_series(&p).unwrap().value;
            let lower = g * upsilon(m as u64, 1.0).unwrap();
            assert!(lower > 0.1 && g < 2.0, "m={m}: Ĝ={g}");
        }
    }

    fn root(f: &TernaryForm, m: i64) -> Vec3 {
        let s = crate::arith::is_perfect_square(m).unwrap() as i64;
        assert_eq!(f.eval(&[s, 0, 0]), m);
        [s, 0, 0]
    }
}
