//! Square roots modulo n, the counting function ρ, Hooley's sums S(h, n),
//! the polynomial G and the sum 𝒱.

use num_complex::Complex64;

use crate::arith::{crt_combine, e_residue, factor, gcd, is_perfect_square, jacobi_odd, mod_pow, mul_mod, rem, rem_i128};
use crate::arith::Factorization;
use crate::forms::{CountingProblem, Vec3};

/// A root of x² ≡ d (mod p) for an odd prime p with d a nonzero square.
fn tonelli_shanks(d: u64, p: u64) -> u64 {
    if p % 4 == 3 {
        return mod_pow(d, (p + 1) / 4, p);
    }
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let mut z = 2;
    while jacobi_odd(z as i64, p) != -1 {
        z += 1;
    }
    let mut m = s;
    let mut c = mod_pow(z, q, p);
    let mut t = mod_pow(d, q, p);
    let mut r = mod_pow(d, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mul_mod(tt, tt, p);
            i += 1;
        }
        let b = mod_pow(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    r
}

/// Roots of v² ≡ d mod p^k with gcd(d, p) = 1.
fn unit_roots(d: u64, p: u64, k: u32) -> Vec<u64> {
    let pk = p.pow(k);
    if p == 2 {
        // Lift one bit at a time; at most four roots survive.
        let mut roots: Vec<u64> = vec![1];
        for j in 2..=k {
            let mj = 1u64 << j;
            let half = mj / 2;
            let mut next = Vec::new();
            for &r in &roots {
                for cand in [r, r + half] {
                    if mul_mod(cand, cand, mj) == d % mj && !next.contains(&cand) {
                        next.push(cand);
                    }
                }
            }
            roots = next;
        }
        return roots;
    }
    let dp = d % p;
    if jacobi_odd(dp as i64, p) != 1 {
        return vec![];
    }
    let mut r = tonelli_shanks(dp, p);
    let mut m = p;
    for _ in 1..k {
        m *= p;
        // Newton step r ← r − (r² − d)/(2r).
        let f = rem_i128(mul_mod(r, r, m) as i128 - (d % m) as i128, m);
        let inv2r = crate::arith::inv(2 * r as i64, m);
        r = rem_i128(r as i128 - mul_mod(f, inv2r, m) as i128, m);
    }
    let other = (pk - r) % pk;
    if other == r {
        vec![r]
    } else {
        vec![r.min(other), r.max(other)]
    }
}

/// All roots of v² ≡ d (mod p^k), sorted.
pub fn sqrt_mod_prime_power(d: i64, p: u64, k: u32) -> Vec<u64> {
    let pk = p.pow(k);
    let d = rem(d, pk);
    if k == 0 {
        return vec![0];
    }
    if d == 0 {
        // v ≡ 0 mod p^⌈k/2⌉.
        let step = p.pow(k.div_ceil(2));
        return (0..pk / step).map(|t| t * step).collect();
    }
    let e = crate::arith::ord(p, d);
    if e % 2 == 1 {
        return vec![];
    }
    let f = e / 2;
    let pf = p.pow(f);
    let unit = d / p.pow(e);
    // v = p^f w with w² ≡ unit mod p^(k−2f) and w taken mod p^(k−f).
    let base = unit_roots(unit, p, k - e);
    let lo = p.pow(k - e);
    let mut out = Vec::new();
    for &w0 in &base {
        for t in 0..pf {
            let w = w0 + lo * t;
            out.push(w * pf % pk);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// All roots of v² ≡ d (mod n), sorted.
pub fn sqrt_mod(d: i64, n: u64) -> Vec<u64> {
    sqrt_mod_factored(d, &factor(n))
}

pub fn sqrt_mod_factored(d: i64, f: &Factorization) -> Vec<u64> {
    let mut roots = vec![0u64];
    let mut modulus = 1u64;
    for &(p, k) in f.pairs() {
        let local = sqrt_mod_prime_power(d, p, k);
        if local.is_empty() {
            return vec![];
        }
        let pk = p.pow(k);
        let mut next = Vec::with_capacity(roots.len() * local.len());
        for &r in &roots {
            for &s in &local {
                next.push(crt_combine(r, modulus, s, pk).unwrap().0);
            }
        }
        roots = next;
        modulus *= pk;
    }
    roots.sort_unstable();
    roots
}

/// ρ(n) = #{v mod n : v² ≡ a}, from local counts.
pub fn rho_c(n: u64, neg_fstar: i64) -> u64 {
    factor(n).pairs().iter().map(|&(p, k)| local_root_count(neg_fstar, p, k)).product()
}

/// #{v mod p^k : v² ≡ a}, in closed form.
pub fn local_root_count(a: i64, p: u64, k: u32) -> u64 {
    let pk = p.pow(k);
    let a = rem(a, pk);
    if a == 0 {
        return p.pow(k / 2);
    }
    let e = crate::arith::ord(p, a);
    if e % 2 == 1 {
        return 0;
    }
    let f = e / 2;
    let unit = a / p.pow(e);
    let j = k - e;
    let base = if p == 2 {
        match j {
            0 => 1,
            1 => 1,
            2 => {
                if unit % 4 == 1 {
                    2
                } else {
                    0
                }
            }
            _ => {
                if unit % 8 == 1 {
                    4
                } else {
                    0
                }
            }
        }
    } else if j == 0 {
        1
    } else {
        (1 + jacobi_odd(unit as i64, p)) as u64
    };
    base * p.pow(f)
}

/// Hooley's S(h, n) = Σ_{v² ≡ a mod n} e_n(hv).
pub fn hooley_s(h: i64, n: u64, neg_fstar: i64) -> Complex64 {
    sqrt_mod(neg_fstar, n).iter().map(|&v| e_residue(mul_mod(rem(h, n), v, n), n)).sum()
}

/// 𝒱(q) = Σ_{u mod q, u² ≡ 0} e_q(u).
pub fn v_sum(q: u64) -> i64 {
    let s: Complex64 = sqrt_mod(0, q).iter().map(|&u| e_residue(u, q)).sum();
    s.re.round() as i64
}

/// G_{l₁,l₂,c}(T) = (Δ l₁ T)² − mΔ(l₂L²)²F*(c).
#[derive(Debug, Clone, PartialEq)]
pub struct GPolynomial {
    pub l1: u64,
    pub l2: u64,
    pub c: Vec3,
    /// G(T) = lead·T² − constant.
    pub lead: i128,
    pub constant: i128,
    /// (a₀, b₀, 𝒟) when −F*(c) is a nonzero square.
    pub reduced: Option<(i64, i64, u64)>,
}

pub fn g_polynomial(problem: &CountingProblem, l1: u64, l2: u64, c: &Vec3) -> GPolynomial {
    let delta = problem.form.discriminant() as i128;
    let fstar = problem.form.adjoint_value(c) as i128;
    let l2l = l2 as i128 * (problem.l * problem.l) as i128;
    let lead = (delta * l1 as i128).pow(2);
    let constant = problem.m as i128 * delta * l2l * l2l * fstar;
    let reduced = match (problem.square_case, is_perfect_square(-(fstar as i64))) {
        (true, Some(nc)) if nc > 0 => {
            let x = delta * l1 as i128;
            let y = problem.d0 as i128 * l2l * nc as i128;
            let g = gcd(x.unsigned_abs() as u64, y.unsigned_abs() as u64) as i128;
            let (a0, b0) = ((x / g) as i64, (y / g) as i64);
            Some((a0, b0, 2 * (a0.unsigned_abs() * b0.unsigned_abs())))
        }
        _ => None,
    };
    GPolynomial { l1, l2, c: *c, lead, constant, reduced }
}

impl GPolynomial {
    pub fn eval(&self, t: i128) -> i128 {
        self.lead * t * t - self.constant
    }

    /// Roots of G mod n when n is coprime to the leading coefficient.
    pub fn roots_mod(&self, f: &Factorization) -> Vec<u64> {
        let n = f.value();
        let lead = rem_i128(self.lead, n);
        debug_assert_eq!(gcd(lead, n), 1);
        let d = mul_mod(rem_i128(self.constant, n), crate::arith::inv(lead as i64, n), n);
        sqrt_mod_factored(d as i64, f)
    }

    /// Roots by exhaustive search, for any n.
    pub fn roots_exhaustive(&self, n: u64) -> Vec<u64> {
        (0..n).filter(|&t| rem_i128(self.eval(t as i128), n) == 0).collect()
    }
}


/// gcd(r, m, F*(c)) as used in the Weil bound.
pub fn weil_gcd(r: u64, m: i64, fstar: i64) -> u64 {
    gcd(gcd(r, m.unsigned_abs()), fstar.unsigned_abs())
}
