//! Averages of root sums of G_{l₁,l₂,c} against characters, the mixed sums
//! Σ χ(n)e_q(t n̄) and their limiting constants Θ and Γ.

use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;

use crate::arith::{crt_combine, e_residue, factor, gcd, inv, lcm, mul_mod, part_toward, ramanujan_sum, rem, rem_i128, Sieve};
use crate::characters::DirichletCharacter;
use crate::error::{invalid, Error, Result};
use crate::expsums::roots::{g_polynomial, hooley_s};
use crate::forms::{CountingProblem, Vec3};

const CHUNK: u64 = 4096;

/// R(n) = Σ_{G(v) ≡ 0 mod n} e_n(v) for n ≤ x coprime to mΩ, in increasing n.
pub fn root_sums(problem: &CountingProblem, l1: u64, l2: u64, c: &Vec3, x: u64) -> Vec<(u64, Complex64)> {
    if x == 0 {
        return Vec::new();
    }
    let g = g_polynomial(problem, l1, l2, c);
    let avoid = problem.m_omega();
    let sieve = Sieve::new(x as usize);
    let chunks: Vec<u64> = (0..x.div_ceil(CHUNK)).collect();
    let parts: Vec<Vec<(u64, Complex64)>> = chunks
        .par_iter()
        .map(|&i| {
            let lo = i * CHUNK + 1;
            let hi = ((i + 1) * CHUNK).min(x);
            (lo..=hi)
                .filter(|&n| gcd(n, avoid) == 1)
                .map(|n| {
                    let s = if n == 1 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        g.roots_mod(&sieve.factorize(n)).iter().map(|&v| e_residue(v, n)).sum()
                    };
                    (n, s)
                })
                .collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Σ χ(n)R(n), reduced in increasing n so the result is independent of threads.
pub fn twist_root_sums(table: &[(u64, Complex64)], chi: &DirichletCharacter, x: u64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(n, r) in table {
        if n > x {
            break;
        }
        acc += chi.evaluate(n as i64) * r;
    }
    acc
}

/// 𝒰_{l₁,l₂,c}(χ; X) = Σ_{n ≤ X, (n, mΩ) = 1} χ(n) Σ_{G(v) ≡ 0 mod n} e_n(v).
pub fn u_sum(problem: &CountingProblem, l1: u64, l2: u64, c: &Vec3, chi: &DirichletCharacter, x: u64) -> Result<Complex64> {
    check_levels(problem, l1, l2)?;
    if x > 10_000_000 {
        return Err(Error::Budget(format!("U-sum length {x} exceeds 10^7")));
    }
    Ok(twist_root_sums(&root_sums(problem, l1, l2, c, x), chi, x))
}

/// The same sum through Hooley's S(h, n): the roots of G are h·w with
/// h = (Δl₁)⁻¹l₂L² and w² ≡ mΔ_F F*(c).
pub fn u_sum_hooley(problem: &CountingProblem, l1: u64, l2: u64, c: &Vec3, chi: &DirichletCharacter, x: u64) -> Result<Complex64> {
    check_levels(problem, l1, l2)?;
    let delta = problem.form.discriminant();
    let a = problem.m * delta * problem.form.adjoint_value(c);
    let avoid = problem.m_omega();
    let mut acc = Complex64::new(0.0, 0.0);
    for n in (1..=x).filter(|&n| gcd(n, avoid) == 1) {
        let h = if n == 1 {
            0
        } else {
            let dl = rem_i128(delta as i128 * l1 as i128, n);
            mul_mod(inv(dl as i64, n), rem((l2 * problem.l * problem.l) as i64, n), n)
        };
        acc += chi.evaluate(n as i64) * hooley_s(h as i64, n, a);
    }
    Ok(acc)
}

fn check_levels(problem: &CountingProblem, l1: u64, l2: u64) -> Result<()> {
    let mo = problem.m_omega();
    if l1 == 0 || l2 == 0 || part_toward(l1, mo) != l1 || part_toward(l2, mo) != l2 {
        return invalid(format!("l1 = {l1}, l2 = {l2} must divide (mΩ)^∞"));
    }
    Ok(())
}

/// Table y ↦ Σ*_{x mod q} χ(x)e_q(y x̄) for y mod q.
fn mixed_table(q: u64, chi: &DirichletCharacter) -> Vec<Complex64> {
    if q == 1 {
        return vec![Complex64::new(1.0, 0.0)];
    }
    let units: Vec<(u64, Complex64)> = (1..q)
        .filter(|&x| gcd(x, q) == 1)
        .map(|x| (inv(x as i64, q), chi.evaluate(x as i64)))
        .collect();
    (0..q)
        .into_par_iter()
        .map(|y| units.iter().map(|&(xb, v)| v * e_residue(mul_mod(y, xb, q), q)).sum())
        .collect()
}

/// S_q(t; 0) = Σ*_{x mod q} χ(x)e_q(t x̄), split as q = q_a·q_b with q_a the
/// part of q on the primes of |χ|. The q_b factor is a Ramanujan sum.
pub fn mixed_sum(q: u64, t: i64, chi: &DirichletCharacter) -> Complex64 {
    let qa = part_toward(q, chi.modulus());
    let qb = q / qa;
    let table = mixed_table(qa, chi);
    mixed_from_table(&table, qa, qb, t)
}

fn mixed_from_table(table: &[Complex64], qa: u64, qb: u64, t: i64) -> Complex64 {
    let y = if qa == 1 { 0 } else { mul_mod(rem(t, qa), inv(rem(qb as i64, qa) as i64, qa), qa) };
    table[y as usize] * ramanujan_sum(qb, t) as f64
}

fn density(s: u64) -> f64 {
    factor(s).primes().map(|p| 1.0 - 1.0 / p as f64).product()
}

/// Θ(q; s, t, χ) = S_q(t; 0)/q · Σ_{d | s} μ(d)/d.
pub fn theta_const(q: u64, s: u64, t: i64, chi: &DirichletCharacter) -> Result<Complex64> {
    if q == 0 || s == 0 {
        return invalid("q and s must be positive");
    }
    if gcd(s, q) != 1 {
        return invalid(format!("Θ needs gcd(s, q) = 1, got s = {s}, q = {q}"));
    }
    if q % chi.modulus() != 0 {
        return invalid(format!("character modulus {} does not divide q = {q}", chi.modulus()));
    }
    Ok(mixed_sum(q, t, chi) / q as f64 * density(s))
}

/// Σ_{n ≤ x, (n, sq) = 1} χ(n)e_q(t n̄), the sum whose slope Θ is.
pub fn mixed_partial(q: u64, s: u64, t: i64, chi: &DirichletCharacter, x: u64) -> Complex64 {
    let sq = s * q;
    let tq = rem(t, q);
    (1..=x)
        .filter(|&n| gcd(n, sq) == 1)
        .map(|n| {
            let phase = if q == 1 { 0 } else { mul_mod(tq, inv(rem(n as i64, q) as i64, q), q) };
            chi.evaluate(n as i64) * e_residue(phase, q)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaValue {
    pub value: Complex64,
    /// Upper bound for the discarded k > K terms.
    pub tail: f64,
    pub truncation: u64,
}

/// Γ(χ; l₁, l₂; c), the slope of 𝒰_{l₁,l₂,c}(χ; X) when −F*(c) is a nonzero square.
///
/// With Ĝ = (a₀T + b₀)(a₀T − b₀) and 𝒟 = 2|a₀b₀|, the roots of Ĝ mod n split
/// as n = g·j·k with g | 𝒟 squarefree and coprime to 2a₀mΩ (there the root is
/// 0 mod g), a₀r ≡ b₀ mod j and a₀r ≡ −b₀ mod k. Reciprocity turns e_{gjk}(r)
/// into e_{|a₀|k}(t̂ j̄) up to a factor 1 + O(1/j), with
/// t̂ ≡ −s₀b₀/g mod |a₀| and t̂ ≡ −2s₀b₀ḡ mod k, s₀ = sign a₀. So
/// Γ = Σ_g χ(g)/g Σ_{(k, 𝒟mΩ) = 1} χ(k)(Θ⁺_k + Θ⁻_k)/k, where Θ^± is the
/// slope of the j-sum with b₀ replaced by ±b₀.
pub fn gamma_const(problem: &CountingProblem, chi: &DirichletCharacter, l1: u64, l2: u64, c: &Vec3, k_max: u64) -> Result<GammaValue> {
    check_levels(problem, l1, l2)?;
    if k_max < 1000 {
        return invalid(format!("Γ truncation K = {k_max} is below 1000"));
    }
    let g_poly = g_polynomial(problem, l1, l2, c);
    let Some((a0, b0, dd)) = g_poly.reduced else {
        return Err(Error::Precondition("Γ needs −mΔ_F and −F*(c) to be nonzero squares".into()));
    };
    let a0_abs = a0.unsigned_abs();
    let s0 = a0.signum();
    let mo = problem.m_omega();
    let chi_mod = chi.modulus();
    let gs: Vec<u64> = factor(dd)
        .divisors()
        .into_iter()
        .filter(|&g| factor(g).is_squarefree() && gcd(g, 2 * a0_abs * mo) == 1)
        .collect();
    let big_s = factor(mo * dd).primes().product::<u64>();
    let mut tables: HashMap<u64, Vec<Complex64>> = HashMap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut g_mass = 0.0;
    for &g in &gs {
        let chi_g = chi.evaluate(g as i64);
        g_mass += 1.0 / g as f64;
        if chi_g.norm() == 0.0 {
            continue;
        }
        let b_over_g = b0 / g as i64;
        let mut inner = Complex64::new(0.0, 0.0);
        for k in (1..=k_max).filter(|&k| gcd(k, dd * mo) == 1) {
            let chi_k = chi.evaluate(k as i64);
            if chi_k.norm() == 0.0 {
                continue;
            }
            let modulus = a0_abs * k;
            let q = lcm(chi_mod, modulus);
            let qa = part_toward(q, chi_mod * a0_abs);
            let qb = q / qa;
            let table = tables.entry(qa).or_insert_with(|| mixed_table(qa, chi));
            let s = big_s / gcd(big_s, q);
            let dens = density(s);
            let gbar = inv(rem(g as i64, k) as i64, k);
            let mut theta = Complex64::new(0.0, 0.0);
            for sign in [1i64, -1] {
                let b = sign * b0;
                let ra = rem(-s0 * sign * b_over_g, a0_abs);
                let rk = mul_mod(rem(-2 * s0 * b, k), gbar, k);
                let (t_hat, _) = crt_combine(ra, a0_abs, rk, k).expect("|a₀| and k are coprime");
                let t = (q / modulus) as i64 * t_hat as i64;
                theta += mixed_from_table(table, qa, qb, t) / q as f64 * dens;
            }
            inner += chi_k * theta / k as f64;
        }
        total += chi_g * inner / g as f64;
    }
    // |Θ^±_k| ≤ 1/k once k is coprime to |χ|, so the tail is ≤ Σ_g 1/g · 2/K.
    Ok(GammaValue { value: total, tail: 2.0 * g_mass / k_max as f64, truncation: k_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{enumerate_characters, CharacterGroup};
    use crate::forms::{new_form, new_problem};

    fn principal(q: u64) -> DirichletCharacter {
        DirichletCharacter::principal(CharacterGroup::new(q).unwrap())
    }

    fn reference() -> CountingProblem {
        new_problem(new_form([1, 1, -1, 0, 0, 0]).unwrap(), 1, 1, [0, 0, 0], 1.0).unwrap()
    }

    #[test]
    fn theta_examples() {
        let v = theta_const(5, 6, 0, &principal(1)).unwrap();
        assert!((v.re - 4.0 / 15.0).abs() < 1e-14 && v.im.abs() < 1e-14);
        for q in [1, 7, 12, 30] {
            let v = theta_const(q, 1, 0, &principal(1)).unwrap();
            assert!((v.re - crate::arith::euler_phi(q) as f64 / q as f64).abs() < 1e-14);
        }
        for chi in enumerate_characters(5).unwrap().into_iter().filter(|c| !c.is_principal()) {
            let v = theta_const(5, 1, 1, &chi).unwrap();
            assert!((v.norm() - 5f64.sqrt() / 5.0).abs() < 1e-12);
        }
        assert!(theta_const(6, 4, 1, &principal(1)).is_err());
        assert!(theta_const(6, 1, 1, &principal(4)).is_err());
    }

    #[test]
    fn mixed_sum_against_definition() {
        for q in [1u64, 8, 9, 12, 15, 20, 36, 45] {
            for chi in enumerate_characters(part_toward(q, 6).max(1)).unwrap() {
                if q % chi.modulus() != 0 {
                    continue;
                }
                for t in [-7i64, 0, 1, 2, 5, 12] {
                    let direct: Complex64 = (0..q)
                        .filter(|&x| gcd(x, q) == 1)
                        .map(|x| chi.evaluate(x as i64) * e_residue(mul_mod(rem(t, q), inv(x as i64, q), q), q))
                        .sum();
                    let fast = mixed_sum(q, t, &chi);
                    assert!((direct - fast).norm() < 1e-9, "q={q} t={t}");
                }
            }
        }
    }

    #[test]
    fn theta_is_the_slope() {
        let chi = enumerate_characters(4).unwrap().pop().unwrap();
        let (q, s, t) = (20u64, 3u64, 7i64);
        let x = 200_000u64;
        let theta = theta_const(q, s, t, &chi).unwrap();
        let partial = mixed_partial(q, s, t, &chi, x);
        assert!((partial / x as f64 - theta).norm() < 1e-3, "{partial} vs {theta}");
    }

    #[test]
    fn u_sum_routes_agree() {
        let p = reference();
        for c in [[1, 0, 0], [1, 1, 0], [2, 1, 1], [0, 3, 1]] {
            for chi in enumerate_characters(4).unwrap() {
                let a = u_sum(&p, 1, 1, &c, &chi, 3000).unwrap();
                let b = u_sum_hooley(&p, 1, 1, &c, &chi, 3000).unwrap();
                assert!((a - b).norm() < 1e-8, "c={c:?}");
            }
        }
        let p = new_problem(new_form([1, 1, -1, 0, 0, 0]).unwrap(), 9, 2, [1, 0, 0], 1.0).unwrap();
        let chi = enumerate_characters(12).unwrap().pop().unwrap();
        let a = u_sum(&p, 4, 3, &[1, 2, 2], &chi, 2000).unwrap();
        let b = u_sum_hooley(&p, 4, 3, &[1, 2, 2], &chi, 2000).unwrap();
        assert!((a - b).norm() < 1e-8);
        assert_eq!(u_sum(&p, 1, 1, &[1, 0, 0], &chi, 0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(u_sum(&p, 5, 1, &[1, 0, 0], &chi, 10).is_err());
    }

    #[test]
    fn gamma_matches_slope() {
        let p = reference();
        let c = [1, 0, 0];
        let x = 200_000u64;
        let table = root_sums(&p, 1, 1, &c, x);
        for chi in [principal(1), enumerate_characters(4).unwrap().pop().unwrap(), enumerate_characters(8).unwrap().pop().unwrap()] {
            let gamma = gamma_const(&p, &chi, 1, 1, &c, 20_000).unwrap();
            let slope = twist_root_sums(&table, &chi, x) / x as f64;
            assert!((slope - gamma.value).norm() < 0.02, "χ mod {}: {slope} vs {}", chi.modulus(), gamma.value);
        }
        let g = gamma_const(&p, &principal(1), 1, 1, &c, 20_000).unwrap();
        assert!((g.value.re - 8.0 / std::f64::consts::PI.powi(2)).abs() < 1e-3);
        assert!(gamma_const(&p, &principal(1), 1, 1, &[1, 1, 0], 1000).is_err());
    }

    #[test]
    fn gamma_with_levels() {
        let p = new_problem(new_form([1, 1, -1, 0, 0, 0]).unwrap(), 9, 2, [1, 0, 0], 1.0).unwrap();
        let x = 200_000u64;
        for (l1, l2, c) in [(1u64, 1u64, [1i64, 0, 0]), (16, 1, [0, 5, 3]), (3, 2, [1, 2, 2])] {
            let table = root_sums(&p, l1, l2, &c, x);
            for chi in enumerate_characters(12).unwrap() {
                let gamma = gamma_const(&p, &chi, l1, l2, &c, 20_000).unwrap();
                let slope = twist_root_sums(&table, &chi, x) / x as f64;
                assert!((slope - gamma.value).norm() < 0.03, "l=({l1},{l2}) c={c:?}: {slope} vs {}", gamma.value);
            }
        }
    }
}
