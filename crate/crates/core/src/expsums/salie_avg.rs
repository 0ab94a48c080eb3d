//! Sums of Salié sums F_c(X) = Σ_{q ≤ X} e_{qL²}(c·λ)Ŝ_q(c)/q², their two
//! regroupings through U-sums, and the limiting slope η(c).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

use crate::arith::{
    e_residue, factor, gcd, inv, is_perfect_square, jacobi_odd, part_toward, rem_i128, smooth_numbers, squarefull_part,
};
use crate::characters::{enumerate_characters, CharacterGroup, DirichletCharacter};
use crate::error::{invalid, Error, Result};
use crate::expsums::shat::{a_hat_from_table, s1_explicit, s1_salie, s_cal_gauss, s_cal_table, s_hat_gauss};
use crate::expsums::usum::{gamma_const, root_sums, twist_root_sums};
use crate::expsums::{Method, SumValue};
use crate::forms::{CountingProblem, Vec3};

/// Largest X for the term-by-term Gauss evaluation.
pub const DIRECT_LIMIT: u64 = 3000;
/// Largest X for the multiplicative evaluation.
pub const SPLIT_LIMIT: u64 = 1_000_000;
/// Largest q₂L² whose 𝒜̂ coefficients are expanded character by character;
/// above it the character sum is regrouped into 𝒮̂ by orthogonality.
pub const CHARACTER_LIMIT: u64 = 1024;

fn dot(a: &Vec3, b: &Vec3) -> i128 {
    (0..3).map(|i| a[i] as i128 * b[i] as i128).sum()
}

fn outer_phase(problem: &CountingProblem, q: u64, c: &Vec3) -> Complex64 {
    let n = q * problem.l * problem.l;
    e_residue(rem_i128(dot(c, &problem.lambda), n), n)
}

/// e_{qL²}(c·λ)Ŝ_q(c)/q² by Gauss reduction of the whole sum.
pub fn f_c_term(problem: &CountingProblem, q: u64, c: &Vec3) -> Complex64 {
    outer_phase(problem, q, c) * s_hat_gauss(problem, q, c).value / (q * q) as f64
}

/// Ŝ⁽¹⁾ through the Salié closed form when it applies, else the explicit T formula.
fn s1_value(problem: &CountingProblem, q1: u64, q2: u64, c: &Vec3) -> Result<Complex64> {
    let r = part_toward(q1, problem.m.unsigned_abs());
    if problem.square_case && factor(r).is_squarefree() {
        Ok(s1_salie(problem, q1, q2, c)?.value)
    } else {
        Ok(s1_explicit(problem, q1, q2, c)?.value)
    }
}

/// Terms for q = 1..=x through Ŝ_q = Ŝ⁽¹⁾·Ŝ_{q₂}(q̄₁c), with the Ŝ_{q₂}
/// values shared between all q having the same (q₂, q̄₁ mod q₂L).
fn split_terms(problem: &CountingProblem, c: &Vec3, x: u64) -> Result<Vec<Complex64>> {
    if !problem.square_case && x > 20_000 {
        return Err(Error::Budget(format!(
            "F_c(X) outside the square case costs O(X²); X = {x} exceeds 20000"
        )));
    }
    let mo = problem.m_omega();
    let l = problem.l;
    let splits: Vec<(u64, u64, u64)> = (1..=x)
        .map(|q| {
            let q2 = part_toward(q, mo);
            let q1 = q / q2;
            (q1, q2, inv(q1 as i64, q2 * l))
        })
        .collect();
    let keys: Vec<(u64, u64)> = splits.iter().map(|&(_, q2, y)| (q2, y)).collect::<BTreeSet<_>>().into_iter().collect();
    let values: Vec<Complex64> = keys
        .par_iter()
        .map(|&(q2, y)| {
            let cy: Vec3 = std::array::from_fn(|i| rem_i128(y as i128 * c[i] as i128, q2 * l) as i64);
            s_hat_gauss(problem, q2, &cy).value
        })
        .collect();
    let cache: HashMap<(u64, u64), Complex64> = keys.into_iter().zip(values).collect();
    splits
        .par_iter()
        .enumerate()
        .map(|(i, &(q1, q2, y))| {
            let q = i as u64 + 1;
            let s1 = s1_value(problem, q1, q2, c)?;
            Ok(outer_phase(problem, q, c) * s1 * cache[&(q2, y)] / (q * q) as f64)
        })
        .collect()
}

/// The summands of F_c for q = 1..=x. `GaussReduction` evaluates each Ŝ_q
/// whole; `Multiplicative` goes through the CRT split.
pub fn f_c_terms(problem: &CountingProblem, c: &Vec3, x: u64, method: Method) -> Result<Vec<Complex64>> {
    match method {
        Method::GaussReduction => {
            if x > DIRECT_LIMIT {
                return Err(Error::Budget(format!("direct F_c needs X ≤ {DIRECT_LIMIT}, got {x}")));
            }
            Ok((1..=x).into_par_iter().map(|q| f_c_term(problem, q, c)).collect())
        }
        Method::Multiplicative => {
            if x > SPLIT_LIMIT {
                return Err(Error::Budget(format!("F_c needs X ≤ {SPLIT_LIMIT}, got {x}")));
            }
            split_terms(problem, c, x)
        }
        other => invalid(format!("F_c has no {} evaluation", other.as_str())),
    }
}

/// F_c(X).
pub fn f_c_sum(problem: &CountingProblem, c: &Vec3, x: u64, method: Method) -> Result<SumValue> {
    if *c == [0, 0, 0] {
        return invalid("F_c needs c ≠ 0");
    }
    let terms = f_c_terms(problem, c, x, method)?;
    Ok(SumValue::new(terms.iter().sum(), method, x))
}

/// F_c at each checkpoint, from one pass over q ≤ max(checkpoints).
pub fn f_c_profile(problem: &CountingProblem, c: &Vec3, checkpoints: &[u64], method: Method) -> Result<Vec<(u64, Complex64)>> {
    if *c == [0, 0, 0] {
        return invalid("F_c needs c ≠ 0");
    }
    let x = checkpoints.iter().copied().max().unwrap_or(0);
    let terms = f_c_terms(problem, c, x, method)?;
    let mut partial = vec![Complex64::new(0.0, 0.0); terms.len() + 1];
    for (i, t) in terms.iter().enumerate() {
        partial[i + 1] = partial[i] + t;
    }
    Ok(checkpoints.iter().map(|&x| (x, partial[x as usize])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaCase {
    /// −F*(c) a nonzero square.
    Square,
    /// F*(c) = 0.
    Isotropic,
    /// −F*(c) not a square: F_c(X) = o(X) and η = 0.
    NonSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaValue {
    pub value: Complex64,
    pub case: EtaCase,
    pub u_max: u64,
    /// Σ |term_u| over the last dyadic shell u ∈ (u_max/2, u_max].
    pub last_shell: f64,
    /// Accumulated truncation bounds of the Γ factors.
    pub gamma_tail: f64,
}

/// η(c) truncated at u ≤ u_max, with Γ truncated at k ≤ k_max.
pub fn eta(problem: &CountingProblem, c: &Vec3, u_max: u64, k_max: u64) -> Result<EtaValue> {
    if *c == [0, 0, 0] {
        return invalid("η needs c ≠ 0");
    }
    if !problem.square_case {
        return Err(Error::Precondition("η needs −mΔ_F to be a square".into()));
    }
    let fstar = problem.form.adjoint_value(c);
    let mo = problem.m_omega();
    let l = problem.l;
    let case = if fstar == 0 {
        EtaCase::Isotropic
    } else if is_perfect_square(-fstar).is_some() {
        EtaCase::Square
    } else {
        EtaCase::NonSquare
    };
    let mut value = Complex64::new(0.0, 0.0);
    let mut last_shell = 0.0;
    let mut gamma_tail = 0.0;
    if case != EtaCase::NonSquare {
        for u in smooth_numbers(mo, u_max) {
            let table = s_cal_table(problem, u, c);
            let u3 = (u as f64).powi(3);
            let term = match case {
                EtaCase::Isotropic => {
                    let chi0 = DirichletCharacter::principal(CharacterGroup::new(u * l * l)?);
                    a_hat_from_table(&table, &chi0) / u3
                }
                _ => {
                    let chars = enumerate_characters(u * l * l)?;
                    let parts: Vec<Result<(Complex64, f64)>> = chars
                        .par_iter()
                        .map(|chi| {
                            let a = a_hat_from_table(&table, chi);
                            if a.norm() < 1e-10 {
                                return Ok((Complex64::new(0.0, 0.0), 0.0));
                            }
                            let g = gamma_const(problem, chi, u * l.pow(4), 1, c, k_max)?;
                            Ok((a * g.value, a.norm() * g.tail))
                        })
                        .collect();
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p in parts {
                        let (v, t) = p?;
                        acc += v;
                        gamma_tail += t / u3;
                    }
                    acc / u3
                }
            };
            value += term;
            if 2 * u > u_max {
                last_shell += term.norm();
            }
        }
        if case == EtaCase::Isotropic {
            let density: f64 = factor(mo).primes().map(|p| p as f64 / (p as f64 + 1.0)).product();
            value *= 6.0 / std::f64::consts::PI.powi(2) * density;
            last_shell *= 6.0 / std::f64::consts::PI.powi(2) * density;
        }
    }
    Ok(EtaValue { value, case, u_max, last_shell, gamma_tail })
}

/// Coefficients Σ_χ 𝒜̂_v(χ)χ(·) at level v, expanded by characters when the
/// modulus vL² is small and otherwise read off 𝒮̂_v directly.
enum LevelCoefficients<'a> {
    Characters(Vec<(DirichletCharacter, Complex64)>),
    Direct { problem: &'a CountingProblem, level: u64, c: Vec3 },
}

impl<'a> LevelCoefficients<'a> {
    fn new(problem: &'a CountingProblem, level: u64, c: &Vec3) -> Result<Self> {
        let modulus = level * problem.l * problem.l;
        if modulus <= CHARACTER_LIMIT {
            let table = s_cal_table(problem, level, c);
            let coeffs = enumerate_characters(modulus)?
                .into_iter()
                .map(|chi| {
                    let a = a_hat_from_table(&table, &chi);
                    (chi, a)
                })
                .collect();
            Ok(LevelCoefficients::Characters(coeffs))
        } else {
            Ok(LevelCoefficients::Direct { problem, level, c: *c })
        }
    }

    /// Σ_χ 𝒜̂(χ)χ(pre)·Σ_{n ≤ y} χ(n)R(n).
    fn pair(&self, pre: u64, roots: &[(u64, Complex64)], y: u64) -> Result<Complex64> {
        match self {
            LevelCoefficients::Characters(coeffs) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (chi, a) in coeffs {
                    acc += a * chi.evaluate(pre as i64) * twist_root_sums(roots, chi, y);
                }
                Ok(acc)
            }
            LevelCoefficients::Direct { problem, level, c } => {
                let modulus = level * problem.l * problem.l;
                let mut cache: HashMap<u64, Complex64> = HashMap::new();
                let mut acc = Complex64::new(0.0, 0.0);
                for &(n, r) in roots.iter().take_while(|&&(n, _)| n <= y) {
                    let x = (pre % modulus) * (n % modulus) % modulus;
                    let s = match cache.get(&x) {
                        Some(&v) => v,
                        None => {
                            let v = s_cal_gauss(problem, *level, x as i64, c)?.value;
                            cache.insert(x, v);
                            v
                        }
                    };
                    acc += s * r;
                }
                Ok(acc)
            }
        }
    }
}

/// F_c(X) = Σ_{q₂ | (mΩ)^∞} q₂⁻² Σ_χ 𝒜̂_{q₂}(χ)·𝒰_{q₂L⁴,1,c}(χ; X/q₂).
pub fn decomp1(problem: &CountingProblem, c: &Vec3, x: u64) -> Result<Complex64> {
    let l4 = problem.l.pow(4);
    let levels = smooth_numbers(problem.m_omega(), x);
    let parts: Vec<Result<Complex64>> = levels
        .par_iter()
        .map(|&q2| {
            let y = x / q2;
            let coeffs = LevelCoefficients::new(problem, q2, c)?;
            let roots = root_sums(problem, q2 * l4, 1, c, y);
            Ok(coeffs.pair(1, &roots, y)? / (q2 * q2) as f64)
        })
        .collect();
    parts.into_iter().sum()
}

/// F_c(X) = Σ_{l, l_{m(Ω)} square-full} l⁻² Σ_χ 𝒜̂_l(χ)
///          Σ_{r | m(Ω)^∞ squarefree, (r, l) = 1} (−F*(c)/r)χ(r)𝒰_{rlL⁴,1,c}(χ; X/(lr)).
pub fn decomp2(problem: &CountingProblem, c: &Vec3, x: u64) -> Result<Complex64> {
    let l4 = problem.l.pow(4);
    let mo = problem.m_omega();
    let mr = problem.m_omega_radical;
    let neg_fstar = -problem.form.adjoint_value(c);
    let levels: Vec<u64> = smooth_numbers(mo, x)
        .into_iter()
        .filter(|&l| {
            let lm = part_toward(l, mr);
            squarefull_part(lm) == lm
        })
        .collect();
    let parts: Vec<Result<Complex64>> = levels
        .par_iter()
        .map(|&lev| {
            let coeffs = LevelCoefficients::new(problem, lev, c)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for r in smooth_numbers(mr, x / lev) {
                if gcd(r, lev) != 1 || !factor(r).is_squarefree() {
                    continue;
                }
                let sign = jacobi_odd(neg_fstar, r);
                if sign == 0 {
                    continue;
                }
                let y = x / (lev * r);
                let roots = root_sums(problem, r * lev * l4, 1, c, y);
                acc += coeffs.pair(r, &roots, y)? * sign as f64;
            }
            Ok(acc / (lev * lev) as f64)
        })
        .collect();
    parts.into_iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompReport {
    pub x: u64,
    pub direct: Complex64,
    pub decomp1: Complex64,
    pub decomp2: Complex64,
    pub max_deviation: f64,
}

/// F_c(X) three ways: term by term, and through both regroupings.
pub fn decomp_check(problem: &CountingProblem, c: &Vec3, x: u64) -> Result<DecompReport> {
    if x > 2000 {
        return Err(Error::Budget(format!("decomp_check needs X ≤ 2000, got {x}")));
    }
    if !problem.square_case {
        return Err(Error::Precondition("the regroupings need −mΔ_F to be a square".into()));
    }
    let direct: Complex64 = f_c_terms(problem, c, x, Method::GaussReduction)?.iter().sum();
    let d1 = decomp1(problem, c, x)?;
    let d2 = decomp2(problem, c, x)?;
    let max_deviation = (d1 - direct).norm().max((d2 - direct).norm());
    Ok(DecompReport { x, direct, decomp1: d1, decomp2: d2, max_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{new_form, new_problem};

    fn pyth(m: i64, l: u64, gamma: Vec3) -> CountingProblem {
        new_problem(new_form([1, 1, -1, 0, 0, 0]).unwrap(), m, l, gamma, 1.0).unwrap()
    }

    #[test]
    fn split_matches_gauss_terms() {
        for (p, c) in [
            (pyth(1, 1, [0, 0, 0]), [1, 0, 0]),
            (pyth(9, 2, [1, 0, 0]), [1, 2, 2]),
            (pyth(1, 3, [1, 0, 0]), [2, -1, 1]),
            (pyth(2, 1, [0, 0, 0]), [1, 1, 0]),
        ] {
            let a = f_c_terms(&p, &c, 300, Method::GaussReduction).unwrap();
            let b = f_c_terms(&p, &c, 300, Method::Multiplicative).unwrap();
            for (q, (x, y)) in a.iter().zip(&b).enumerate() {
                assert!((x - y).norm() < 1e-9 * (1.0 + x.norm()), "q={} {x} {y}", q + 1);
            }
        }
    }

    #[test]
    fn decompositions_agree() {
        for (p, c) in [
            (pyth(1, 1, [0, 0, 0]), [1, 0, 0]),
            (pyth(9, 1, [0, 0, 3]), [1, 1, 1]),
            (pyth(9, 2, [1, 0, 0]), [1, 2, 2]),
            (pyth(25, 1, [0, 0, 5]), [1, 1, 0]),
            (pyth(1, 1, [0, 0, 0]), [1, 0, 1]),
        ] {
            let r = decomp_check(&p, &c, 400).unwrap();
            assert!(r.max_deviation < 1e-8 * 400.0, "{r:?}");
        }
        let r = decomp_check(&pyth(1, 1, [0, 0, 0]), &[1, 0, 0], 1).unwrap();
        assert!((r.direct - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(r.max_deviation < 1e-12);
        assert!(f_c_sum(&pyth(1, 1, [0, 0, 0]), &[0, 0, 0], 10, Method::GaussReduction).is_err());
    }
}
