//! Ŝ_q(c), its CRT factors, T_q and the twisted Salié sums 𝒯_r^s.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{e_frac, e_residue, euler_phi, gcd, gcd_i, inv, iota, jacobi_odd, mod_inverse, ramanujan_sum, rem, rem_i128};
use crate::characters::{enumerate_characters, DirichletCharacter};
use crate::error::{invalid, Error, Result};
use crate::expsums::gauss::quadratic_gauss;
use crate::expsums::roots::g_polynomial;
use crate::expsums::{Method, SumValue};
use crate::forms::{CountingProblem, Mat3, TernaryForm, Vec3};

/// Largest qL accepted by the brute-force paths.
pub const BRUTE_LIMIT: u64 = 3000;

fn dot(a: &Vec3, b: &Vec3) -> i128 {
    (0..3).map(|i| a[i] as i128 * b[i] as i128).sum()
}

fn ramanujan_table(q: u64) -> Vec<i64> {
    (0..q).map(|r| ramanujan_sum(q, r as i64)).collect()
}

/// Σ_{σ mod n} w(F(σ) mod fm, g·σ mod n)·e_n(c·σ) with integer weights,
/// accumulated exactly per phase and reduced in index order.
fn lattice_sum<W>(a: &Mat3, n: u64, fm: u64, g: &Vec3, c: &Vec3, weight: W) -> Complex64
where
    W: Fn(u64, u64) -> i64 + Sync,
{
    let ni = n as i64;
    let fmi = fm as i64;
    let gr: Vec<i64> = g.iter().map(|&x| rem(x, n) as i64).collect();
    let cr: Vec<i64> = c.iter().map(|&x| rem(x, n) as i64).collect();
    let buckets = (0..ni)
        .into_par_iter()
        .map(|s0| {
            let mut w = vec![0i64; n as usize];
            for s1 in 0..ni {
                // F(σ) = a22'·s2² + lin·s2 + base, all reduced mod fm.
                let base = (a[0][0] as i128 * (s0 * s0) as i128
                    + 2 * a[0][1] as i128 * (s0 * s1) as i128
                    + a[1][1] as i128 * (s1 * s1) as i128)
                    .rem_euclid(fmi as i128) as i64;
                let lin = (2 * (a[0][2] as i128 * s0 as i128 + a[1][2] as i128 * s1 as i128)).rem_euclid(fmi as i128) as i64;
                let quad = (a[2][2] as i128).rem_euclid(fmi as i128) as i64;
                let g0 = (gr[0] * s0 + gr[1] * s1) % ni;
                let c0 = (cr[0] * s0 + cr[1] * s1) % ni;
                let (mut f, mut df) = (base, (lin + quad) % fmi);
                let dd = (2 * quad) % fmi;
                let (mut gv, mut cv) = (g0, c0);
                for _ in 0..ni {
                    let v = weight(f as u64, gv as u64);
                    if v != 0 {
                        w[cv as usize] += v;
                    }
                    f = (f + df) % fmi;
                    df = (df + dd) % fmi;
                    gv = (gv + gr[2]) % ni;
                    cv = (cv + cr[2]) % ni;
                }
            }
            w
        })
        .reduce(
            || vec![0i64; n as usize],
            |mut x, y| {
                for (a, b) in x.iter_mut().zip(y) {
                    *a += b;
                }
                x
            },
        );
    buckets
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0)
        .map(|(r, &w)| w as f64 * e_residue(r as u64, n))
        .sum()
}

fn check_brute(n: u64) -> Result<()> {
    if n > BRUTE_LIMIT {
        return Err(Error::Budget(format!("brute force modulus {n} exceeds {BRUTE_LIMIT}; use the Gauss-reduction path")));
    }
    Ok(())
}

/// Ŝ_q(c) straight from its definition.
pub fn s_hat(problem: &CountingProblem, q: u64, c: &Vec3) -> Result<SumValue> {
    if q == 0 {
        return invalid("q must be positive");
    }
    let l = problem.l;
    let n = q * l;
    check_brute(n)?;
    let cq = ramanujan_table(q);
    let k_hat = problem.k_hat;
    // Ĥ(σ) mod n from g·σ mod n; then M = Ĥ/L + F(σ) mod q.
    let kh = rem(k_hat, n);
    let value = lattice_sum(problem.form.half_hessian(), n, q, &problem.grad_lambda(), c, |f, gs| {
        let h = (kh + gs) % n;
        if h % l != 0 {
            return 0;
        }
        cq[((h / l + f) % q) as usize]
    });
    Ok(SumValue::new(value, Method::BruteForce, q))
}

/// Ŝ_q(c) through the Gauss-sum evaluator:
/// (1/L) Σ*_a Σ_{j mod L} e_{qL}((a+jq)k̂)·G(qL; aL·A, (a+jq)∇F(λ) + c).
pub fn s_hat_gauss(problem: &CountingProblem, q: u64, c: &Vec3) -> SumValue {
    let l = problem.l;
    let n = q * l;
    let a_mat = problem.form.half_hessian();
    let g = problem.grad_lambda();
    let mut total = Complex64::new(0.0, 0.0);
    for a in (1..=q).filter(|&a| gcd(a, q) == 1) {
        let a = a % q;
        let scaled: Vec<Vec<i64>> = (0..3).map(|i| (0..3).map(|j| rem_i128(a as i128 * l as i128 * a_mat[i][j] as i128, n) as i64).collect()).collect();
        for j in 0..l {
            let t = (a + j * q) as i128;
            let b: Vec<i64> = (0..3).map(|i| rem_i128(t * g[i] as i128 + c[i] as i128, n) as i64).collect();
            let phase = e_residue(rem_i128(t * problem.k_hat as i128, n), n);
            total += phase * quadratic_gauss(n, &scaled, &b);
        }
    }
    SumValue::new(total / l as f64, Method::GaussReduction, q)
}

fn check_split(problem: &CountingProblem, q1: u64, q2: u64) -> Result<()> {
    if q1 == 0 || q2 == 0 || gcd(q1, q2 * problem.omega) != 1 {
        return invalid(format!("invalid split q1={q1}, q2={q2}: need gcd(q1, q2·Ω) = 1"));
    }
    Ok(())
}

/// (k̂₁ mod q₁, k̂₂ mod q₂L) with k̂ ≡ k̂₂q₁ + k̂₁q₂L.
pub fn split_k_hat(problem: &CountingProblem, q1: u64, q2: u64) -> (u64, u64) {
    let l = problem.l;
    let k1 = rem_i128(problem.k_hat as i128 * inv((q2 * l) as i64, q1) as i128, q1);
    let k2 = rem_i128(problem.k_hat as i128 * inv(q1 as i64, q2 * l) as i128, q2 * l);
    (k1, k2)
}

/// Ŝ⁽¹⁾: the factor at the good modulus q₁.
pub fn s1_hat(problem: &CountingProblem, q1: u64, q2: u64, c: &Vec3) -> Result<SumValue> {
    check_split(problem, q1, q2)?;
    check_brute(q1)?;
    let (k1, _) = split_k_hat(problem, q1, q2);
    let l = problem.l;
    let cq = ramanujan_table(q1);
    let scale = rem_i128(((q2 * l) as i128).pow(2), q1);
    let q2r = q2 % q1;
    let value = lattice_sum(problem.form.half_hessian(), q1, q1, &problem.grad_lambda(), c, |f, gs| {
        let n1 = (scale as u128 * f as u128 + q2r as u128 * ((gs + k1) % q1) as u128) % q1 as u128;
        cq[n1 as usize]
    });
    Ok(SumValue::new(value, Method::BruteForce, q1))
}

/// Ŝ⁽²⁾: the factor at q₂L, restricted to L | Ĥ(q₁σ).
pub fn s2_hat(problem: &CountingProblem, q1: u64, q2: u64, c: &Vec3) -> Result<SumValue> {
    check_split(problem, q1, q2)?;
    let l = problem.l;
    let n = q2 * l;
    check_brute(n)?;
    let (_, k2) = split_k_hat(problem, q1, q2);
    let cq = ramanujan_table(q2);
    let q1n = q1 % n;
    let q1sq_l = rem_i128((q1 as i128).pow(2) * l as i128, n);
    let kh = rem(problem.k_hat, l);
    let q1l = q1 % l;
    let value = lattice_sum(problem.form.half_hessian(), n, n, &problem.grad_lambda(), c, |f, gs| {
        if (kh + q1l * (gs % l)) % l != 0 {
            return 0;
        }
        let n2 = (q1sq_l as u128 * f as u128 + q1n as u128 * ((gs + k2) % n) as u128) % n as u128;
        let n2 = n2 as u64;
        debug_assert_eq!(n2 % l, 0);
        cq[((n2 / l) % q2) as usize]
    });
    Ok(SumValue::new(value, Method::BruteForce, q2))
}

/// Ŝ_q = Ŝ⁽¹⁾Ŝ⁽²⁾ along the split q₂ = q_{mΩ}.
pub fn s_hat_split(problem: &CountingProblem, q: u64, c: &Vec3) -> Result<SumValue> {
    let q2 = crate::arith::part_toward(q, problem.m_omega());
    let q1 = q / q2;
    let v = s1_hat(problem, q1, q2, c)?.value * s2_hat(problem, q1, q2, c)?.value;
    Ok(SumValue::new(v, Method::Multiplicative, q))
}

/// T_q(F, m; c) = Σ*_a Σ_{b mod q} e_q(a(F(b) − m) + c·b).
pub fn t_sum(form: &TernaryForm, m: i64, c: &Vec3, q: u64) -> Result<SumValue> {
    if q == 0 {
        return invalid("q must be positive");
    }
    check_brute(q)?;
    let cq = ramanujan_table(q);
    let mr = rem(m, q);
    let value = lattice_sum(form.half_hessian(), q, q, &[0, 0, 0], c, |f, _| cq[((f + q - mr) % q) as usize]);
    Ok(SumValue::new(value, Method::BruteForce, q))
}

/// T_q(F, m; twist·c) for gcd(q, 2Δ) = 1:
/// q^{3/2} ι_q³ (Δ/q) Σ*_a (a/q) e_q(−am − (4Δa)⁻¹ twist² F*(c)).
pub fn t_explicit(form: &TernaryForm, m: i64, c: &Vec3, q: u64, twist: i64) -> Result<SumValue> {
    let delta = form.discriminant();
    if q == 0 || gcd_i(q as i64, 2 * delta) != 1 {
        return invalid(format!("explicit T_q needs gcd(q, 2Δ) = 1, got q = {q}"));
    }
    if q == 1 {
        return Ok(SumValue::new(Complex64::new(1.0, 0.0), Method::ExplicitFormula, 1));
    }
    let fstar = rem_i128(form.adjoint_value(c) as i128 * (twist as i128).pow(2), q);
    let inner = twisted_salie_sum(q, 1, m, delta, fstar);
    let iota3 = iota(q)?.to_complex().powi(3);
    let value = (q as f64).powf(1.5) * iota3 * jacobi_odd(delta, q) as f64 * inner;
    Ok(SumValue::new(value, Method::ExplicitFormula, q))
}

/// Σ*_{a mod r} (a/r) e_r(s̄(−am − (4Δa)⁻¹·f)) with f already reduced mod r.
fn twisted_salie_sum(r: u64, s: u64, m: i64, delta: i64, f: u64) -> Complex64 {
    let sbar = inv(s as i64, r) as i128;
    let mut total = Complex64::new(0.0, 0.0);
    for a in 1..r {
        let chi = jacobi_odd(a as i64, r);
        if chi == 0 {
            continue;
        }
        let ia = inv(rem_i128(4 * delta as i128 * a as i128, r) as i64, r) as i128;
        let arg = sbar * (-(a as i128) * m as i128 - ia * f as i128);
        total += chi as f64 * e_residue(rem_i128(arg, r), r);
    }
    total
}

fn check_cal_t(problem: &CountingProblem, r: u64, s: u64) -> Result<()> {
    if r == 0 || s == 0 || r % 2 == 0 || gcd(r, s) != 1 || gcd(r * s, problem.omega) != 1 {
        return invalid(format!("𝒯 needs odd r with gcd(r, s) = gcd(rs, Ω) = 1, got r={r}, s={s}"));
    }
    Ok(())
}

/// 𝒯_r^s(l, c), the Salié sum appearing at good moduli, by direct summation.
pub fn cal_t(problem: &CountingProblem, r: u64, s: u64, l: u64, c: &Vec3) -> Result<SumValue> {
    check_cal_t(problem, r, s)?;
    let ll = l as i128 * (problem.l * problem.l) as i128;
    let f = rem_i128(ll * ll % r as i128 * problem.form.adjoint_value(c) as i128, r);
    let v = twisted_salie_sum(r, s, problem.m, problem.form.discriminant(), f);
    Ok(SumValue::new(v, Method::BruteForce, r))
}

/// 𝒯_r^s(l, c) = (−ms/r) ι_r √r Σ_{G_{s,l,c}(u) ≡ 0 mod r} e_r(u) for gcd(r, m) = 1.
pub fn salie_eval(problem: &CountingProblem, r: u64, s: u64, l: u64, c: &Vec3) -> Result<SumValue> {
    check_cal_t(problem, r, s)?;
    if !problem.square_case {
        return Err(Error::Precondition("salie_eval needs −mΔ_F to be a square".into()));
    }
    if gcd_i(r as i64, problem.m) != 1 {
        return invalid(format!("salie_eval needs gcd(r, m) = 1, got r = {r}"));
    }
    let g = g_polynomial(problem, s, l, c);
    let roots = g.roots_mod(&crate::arith::factor(r));
    let sum: Complex64 = roots.iter().map(|&u| e_residue(u, r)).sum();
    let sign = jacobi_odd(rem_i128(-(problem.m as i128) * s as i128, r) as i64, r) as f64;
    let v = sign * iota(r)?.to_complex() * (r as f64).sqrt() * sum;
    Ok(SumValue::new(v, Method::ExplicitFormula, r))
}

/// s = (q₂L²)⁻¹ mod q₁, the twist relating Ŝ⁽¹⁾ to T_{q₁}.
pub fn s1_twist(problem: &CountingProblem, q1: u64, q2: u64) -> u64 {
    inv(rem_i128(q2 as i128 * (problem.l * problem.l) as i128, q1) as i64, q1)
}

/// Ŝ⁽¹⁾ = e_{q₁}(−s c·λ)·T_{q₁}(F, m; s c) with s = (q₂L²)⁻¹ mod q₁.
pub fn s1_explicit(problem: &CountingProblem, q1: u64, q2: u64, c: &Vec3) -> Result<SumValue> {
    check_split(problem, q1, q2)?;
    let s = s1_twist(problem, q1, q2);
    let t = t_explicit(&problem.form, problem.m, c, q1, s as i64)?;
    let phase = e_frac(rem_i128(-(s as i128) * dot(c, &problem.lambda), q1) as i64, q1);
    Ok(SumValue::new(phase * t.value, Method::ExplicitFormula, q1))
}

/// Square-case closed form for Ŝ⁽¹⁾ when q₁ = q♭·r with gcd(q♭, mΩ) = 1 and
/// r | m(Ω)^∞ squarefree:
/// e_{q₁}(s c·λ)Ŝ⁽¹⁾ = q₁²·(−F*(c)/r)·Σ_{u mod q♭, (Δ r q₂L² u)² ≡ mΔF*(c)} e_{q♭}(u).
pub fn s1_salie(problem: &CountingProblem, q1: u64, q2: u64, c: &Vec3) -> Result<SumValue> {
    check_split(problem, q1, q2)?;
    if !problem.square_case {
        return Err(Error::Precondition("s1_salie needs −mΔ_F to be a square".into()));
    }
    let r = crate::arith::part_toward(q1, problem.m.unsigned_abs());
    let flat = q1 / r;
    if !crate::arith::factor(r).is_squarefree() {
        return invalid(format!("s1_salie needs a squarefree m-part, got {r}"));
    }
    let fstar = problem.form.adjoint_value(c);
    let sign = jacobi_odd(-fstar, r) as f64;
    let ll = q2 * problem.l * problem.l;
    let g = g_polynomial(problem, r * ll * problem.l * problem.l, 1, c);
    let sum: Complex64 = if flat == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        g.roots_mod(&crate::arith::factor(flat)).iter().map(|&u| e_residue(u, flat)).sum()
    };
    let s = s1_twist(problem, q1, q2);
    let phase = e_frac(rem_i128(-(s as i128) * dot(c, &problem.lambda), q1) as i64, q1);
    Ok(SumValue::new(phase * (q1 * q1) as f64 * sign * sum, Method::ExplicitFormula, q1))
}

fn check_s_cal(problem: &CountingProblem, q2: u64, x: i64) -> Result<u64> {
    let n = q2 * problem.l * problem.l;
    if q2 == 0 || gcd_i(x, (q2 * problem.l) as i64) != 1 {
        return invalid(format!("𝒮̂ needs gcd(x, q2·L) = 1, got x = {x}, q2 = {q2}"));
    }
    mod_inverse(x, n).ok_or_else(|| Error::InvalidArgument(format!("{x} is not invertible mod {n}")))
}

/// 𝒮̂_{q₂}(x; c) by direct summation over α mod q₂L².
pub fn s_cal(problem: &CountingProblem, q2: u64, x: i64, c: &Vec3) -> Result<SumValue> {
    let xbar = check_s_cal(problem, q2, x)?;
    let l = problem.l;
    let n = q2 * l * l;
    check_brute(q2 * l)?;
    let cq = ramanujan_table(q2);
    // α = λ + Lβ, β mod q₂L; F(α) − m = L²F(β) + L∇F(λ)·β + (F(λ) − m).
    let lam = problem.lambda;
    let f_lam = problem.form.eval(&lam) - problem.m;
    let cx: Vec3 = std::array::from_fn(|i| rem_i128(xbar as i128 * c[i] as i128 * l as i128, n) as i64);
    let base_phase = e_residue(rem_i128(xbar as i128 * dot(c, &lam), n), n);
    let nb = q2 * l;
    let l2 = l * l;
    let mut acc = Complex64::new(0.0, 0.0);
    let a = problem.form.half_hessian();
    let g = problem.grad_lambda();
    for b0 in 0..nb as i64 {
        for b1 in 0..nb as i64 {
            for b2 in 0..nb as i64 {
                let beta = [b0, b1, b2];
                let fb: i128 = (0..3).map(|i| (0..3).map(|j| a[i][j] as i128 * beta[i] as i128 * beta[j] as i128).sum::<i128>()).sum();
                let val = l2 as i128 * fb + l as i128 * dot(&g, &beta) + f_lam as i128;
                if val.rem_euclid(l2 as i128) != 0 {
                    continue;
                }
                let mm = rem_i128(val / l2 as i128, q2);
                let w = cq[mm as usize];
                if w == 0 {
                    continue;
                }
                let ph = rem_i128(dot(&cx, &beta), n);
                acc += w as f64 * e_residue(ph, n);
            }
        }
    }
    Ok(SumValue::new(acc * base_phase, Method::BruteForce, q2))
}

/// 𝒮̂_{q₂}(x; c) = e_{q₂L²}(x̄ c·λ)·Ŝ_{q₂}(x̄c), evaluated by Gauss reduction.
pub fn s_cal_gauss(problem: &CountingProblem, q2: u64, x: i64, c: &Vec3) -> Result<SumValue> {
    let xbar = check_s_cal(problem, q2, x)?;
    let n = q2 * problem.l * problem.l;
    let cx: Vec3 = std::array::from_fn(|i| rem_i128(xbar as i128 * c[i] as i128, q2 * problem.l) as i64);
    let phase = e_residue(rem_i128(xbar as i128 * dot(c, &problem.lambda), n), n);
    let v = s_hat_gauss(problem, q2, &cx).value * phase;
    Ok(SumValue::new(v, Method::GaussReduction, q2))
}

/// 𝒮̂_{q₂}(x; c) for every unit x mod q₂L² (Gauss path), indexed by x.
/// Ŝ_{q₂}(x̄c) only depends on x̄ mod q₂L, so each value is computed once.
pub fn s_cal_table(problem: &CountingProblem, q2: u64, c: &Vec3) -> Vec<(u64, Complex64)> {
    let l = problem.l;
    let n = q2 * l * l;
    let m = q2 * l;
    let base: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|y| {
            if gcd(y, m) != 1 && m > 1 {
                return Complex64::new(0.0, 0.0);
            }
            let cy: Vec3 = std::array::from_fn(|i| rem_i128(y as i128 * c[i] as i128, m) as i64);
            s_hat_gauss(problem, q2, &cy).value
        })
        .collect();
    let cl = dot(c, &problem.lambda);
    (1..=n)
        .map(|x| x % n)
        .filter(|&x| gcd(x, n) == 1)
        .map(|x| {
            let xbar = inv(x as i64, n);
            let phase = e_residue(rem_i128(xbar as i128 * cl, n), n);
            (x, phase * base[(xbar % m) as usize])
        })
        .collect()
}

/// 𝒜̂_{q₂}(χ; c) = φ(q₂L²)⁻¹ Σ_x χ̄(x)𝒮̂_{q₂}(x; c) from a table of 𝒮̂.
pub fn a_hat_from_table(table: &[(u64, Complex64)], chi: &DirichletCharacter) -> Complex64 {
    let n = chi.modulus();
    let total: Complex64 = table.iter().map(|&(x, v)| chi.evaluate(x as i64).conj() * v).sum();
    total / euler_phi(n) as f64
}

/// 𝒜̂_{q₂}(χ; c) for one character, via the Gauss path.
pub fn a_hat(problem: &CountingProblem, q2: u64, chi: &DirichletCharacter, c: &Vec3) -> Result<SumValue> {
    let n = q2 * problem.l * problem.l;
    if chi.modulus() != n {
        return invalid(format!("character modulus {} is not q2·L² = {n}", chi.modulus()));
    }
    Ok(SumValue::new(a_hat_from_table(&s_cal_table(problem, q2, c), chi), Method::GaussReduction, q2))
}

/// Every (χ, 𝒜̂_{q₂}(χ; c)) for χ mod q₂L².
pub fn a_hat_all(problem: &CountingProblem, q2: u64, c: &Vec3) -> Result<Vec<(DirichletCharacter, Complex64)>> {
    let table = s_cal_table(problem, q2, c);
    let chars = enumerate_characters(q2 * problem.l * problem.l)?;
    Ok(chars
        .into_par_iter()
        .map(|chi| {
            let v = a_hat_from_table(&table, &chi);
            (chi, v)
        })
        .collect())
}
