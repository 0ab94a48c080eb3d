//! Integer and modular arithmetic.
//!
//! Moduli are `u64`; every product goes through `u128`, so any modulus below
//! 2^63 is safe even though the rest of the crate stays far below that.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{invalid, Result};

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i(a: i64, b: i64) -> u64 {
    gcd(a.unsigned_abs(), b.unsigned_abs())
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

/// Least nonnegative residue of `a` modulo `m`.
pub fn rem(a: i64, m: u64) -> u64 {
    debug_assert!(m > 0);
    (a as i128).rem_euclid(m as i128) as u64
}

pub fn rem_i128(a: i128, m: u64) -> u64 {
    a.rem_euclid(m as i128) as u64
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut b = base % m;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists. Modulo 1 the inverse is 0.
pub fn mod_inverse(a: i64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (m as i128, rem(a, m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u64)
}

/// Inverse that the caller knows exists.
pub(crate) fn inv(a: i64, m: u64) -> u64 {
    mod_inverse(a, m).unwrap_or_else(|| panic!("{a} is not invertible mod {m}"))
}

/// Solve x ≡ r1 (mod m1), x ≡ r2 (mod m2) for coprime moduli.
pub fn crt_combine(r1: u64, m1: u64, r2: u64, m2: u64) -> Option<(u64, u64)> {
    if gcd(m1, m2) != 1 {
        return None;
    }
    let m = m1 * m2;
    let t = mul_mod((r2 + m2 - r1 % m2) % m2, mod_inverse(m1 as i64, m2)?, m2);
    Some(((r1 % m1 + m1 * t) % m, m))
}

pub fn integer_sqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x.checked_mul(x).map_or(true, |s| s > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|s| s <= n) {
        x += 1;
    }
    x
}

pub fn integer_sqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x.checked_mul(x).map_or(true, |s| s > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|s| s <= n) {
        x += 1;
    }
    x
}

/// Square root of `n` when `n` is a perfect square (negative numbers never are).
pub fn is_perfect_square(n: i64) -> Option<u64> {
    if n < 0 {
        return None;
    }
    let r = integer_sqrt(n as u64);
    (r * r == n as u64).then_some(r)
}

pub fn is_perfect_square_i128(n: i128) -> Option<u128> {
    if n < 0 {
        return None;
    }
    let r = integer_sqrt_u128(n as u128);
    (r * r == n as u128).then_some(r)
}

/// Exponent of `p` in `n`; `n` must be nonzero.
pub fn ord(p: u64, mut n: u64) -> u32 {
    debug_assert!(n != 0 && p > 1);
    let mut e = 0;
    while n % p == 0 {
        n /= p;
        e += 1;
    }
    e
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

/// Prime factorization as `(prime, exponent)` pairs with increasing primes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Factorization {
    pairs: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn pairs(&self) -> &[(u64, u32)] {
        &self.pairs
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.pairs.iter().map(|&(p, _)| p)
    }

    pub fn value(&self) -> u64 {
        self.pairs.iter().map(|&(p, e)| p.pow(e)).product()
    }

    pub fn is_squarefree(&self) -> bool {
        self.pairs.iter().all(|&(_, e)| e == 1)
    }

    /// All divisors, sorted.
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for &(p, e) in &self.pairs {
            let len = out.len();
            let mut pk = 1;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    out.push(out[i] * pk);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub(crate) fn from_pairs(pairs: Vec<(u64, u32)>) -> Self {
        Factorization { pairs }
    }
}

fn factor_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    factor_into(d, out);
    factor_into(n / d, out);
}

pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return invalid("cannot factorize 0");
    }
    let mut n = n;
    let mut pairs = Vec::new();
    let mut p = 2u64;
    while p < 1_000_000 && p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            pairs.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        let mut rest = Vec::new();
        factor_into(n, &mut rest);
        rest.sort_unstable();
        for q in rest {
            match pairs.last_mut() {
                Some((p, e)) if *p == q => *e += 1,
                _ => pairs.push((q, 1)),
            }
        }
    }
    Ok(Factorization { pairs })
}

/// Factorization of a nonzero integer's absolute value.
pub(crate) fn factor(n: u64) -> Factorization {
    factorize(n).expect("nonzero")
}

/// Jacobi symbol (a/n) for odd positive n.
pub fn jacobi(a: i64, n: u64) -> Result<i32> {
    if n % 2 == 0 {
        return invalid(format!("Jacobi symbol needs odd modulus, got {n}"));
    }
    Ok(jacobi_odd(a, n))
}

pub(crate) fn jacobi_odd(a: i64, n: u64) -> i32 {
    debug_assert!(n % 2 == 1);
    let mut a = rem(a, n);
    let mut n = n;
    let mut s = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if n % 8 == 3 || n % 8 == 5 {
                s = -s;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            s = -s;
        }
        a %= n;
    }
    if n == 1 {
        s
    } else {
        0
    }
}

/// The factor ι_q: 1 for q ≡ 1 mod 4 and i for q ≡ 3 mod 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarticRootOfUnity {
    One,
    I,
}

impl QuarticRootOfUnity {
    pub fn to_complex(self) -> Complex64 {
        match self {
            QuarticRootOfUnity::One => Complex64::new(1.0, 0.0),
            QuarticRootOfUnity::I => Complex64::new(0.0, 1.0),
        }
    }

    /// Exponent k with value i^k.
    pub fn quarter_turns(self) -> u32 {
        match self {
            QuarticRootOfUnity::One => 0,
            QuarticRootOfUnity::I => 1,
        }
    }
}

pub fn iota(q: u64) -> Result<QuarticRootOfUnity> {
    if q % 2 == 0 {
        return invalid(format!("iota needs odd modulus, got {q}"));
    }
    Ok(if q % 4 == 1 {
        QuarticRootOfUnity::One
    } else {
        QuarticRootOfUnity::I
    })
}

/// i^k as a complex number, exact on the axes.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// q_l: the largest divisor of q built from primes dividing l.
pub fn part_toward(q: u64, l: u64) -> u64 {
    let mut out = 1;
    let mut rest = q;
    loop {
        let g = gcd(rest, l);
        if g == 1 {
            break;
        }
        while rest % g == 0 {
            rest /= g;
            out *= g;
        }
    }
    out
}

/// Every n ≤ limit whose primes all divide `support`, in increasing order.
pub fn smooth_numbers(support: u64, limit: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    if limit == 0 {
        return Vec::new();
    }
    for p in factor(support).primes() {
        let mut next = Vec::new();
        for &n in &out {
            let mut v = n;
            while v <= limit / p {
                v *= p;
                next.push(v);
            }
        }
        out.extend(next);
    }
    out.sort_unstable();
    out
}

/// n^□: the product of the prime powers p^e ∥ n with e ≥ 2.
pub fn squarefull_part(n: u64) -> u64 {
    factor(n)
        .pairs()
        .iter()
        .filter(|&&(_, e)| e >= 2)
        .map(|&(p, e)| p.pow(e))
        .product()
}

/// Υ_κ(n) = ∏_{p | n} (1 − p^{−κ})^{−1}.
pub fn upsilon(n: u64, kappa: f64) -> Result<f64> {
    if kappa.is_nan() || kappa <= 0.0 {
        return invalid(format!("upsilon needs kappa > 0, got {kappa}"));
    }
    if n == 0 {
        return invalid("upsilon needs n >= 1");
    }
    Ok(factor(n)
        .primes()
        .map(|p| 1.0 / (1.0 - (p as f64).powf(-kappa)))
        .product())
}

pub fn radical(n: u64) -> u64 {
    factor(n).primes().product()
}

pub fn moebius(n: u64) -> i64 {
    let f = factor(n);
    if f.is_squarefree() {
        if f.pairs().len() % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factor(n)
        .pairs()
        .iter()
        .map(|&(p, e)| (p - 1) * p.pow(e - 1))
        .product()
}

/// Number of divisors.
pub fn tau(n: u64) -> u64 {
    factor(n).pairs().iter().map(|&(_, e)| e as u64 + 1).product()
}

/// Number of distinct prime divisors.
pub fn omega(n: u64) -> u32 {
    factor(n).pairs().len() as u32
}

pub fn divisors(n: u64) -> Vec<u64> {
    factor(n).divisors()
}

/// c_q(n) = Σ_{a mod q, (a,q)=1} e_q(an), via μ(q/g)φ(q)/φ(q/g) with g = (q, n).
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    let g = gcd(q, n.unsigned_abs());
    let g = if n == 0 { q } else { g };
    let r = q / g;
    moebius(r) * (euler_phi(q) / euler_phi(r)) as i64
}

/// e(num/den) = exp(2πi·num/den), reduced exactly before the float step.
pub fn e_frac(num: i64, den: u64) -> Complex64 {
    e_residue(rem(num, den), den)
}

/// e(r/den) for 0 ≤ r < den.
pub fn e_residue(r: u64, den: u64) -> Complex64 {
    // Symmetric representative keeps the angle small.
    let r = r as i128;
    let d = den as i128;
    let s = if 2 * r > d { r - d } else { r };
    let (sin, cos) = (TAU * (s as f64) / (den as f64)).sin_cos();
    Complex64::new(cos, sin)
}

/// Smallest-prime-factor table on [0, n].
pub struct Sieve {
    spf: Vec<u32>,
}

impl Sieve {
    pub fn new(n: usize) -> Self {
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                let mut j = i;
                while j <= n {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        Sieve { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    pub fn factorize(&self, mut n: u64) -> Factorization {
        if n as usize > self.limit() {
            return factor(n);
        }
        let mut pairs: Vec<(u64, u32)> = Vec::new();
        while n > 1 {
            let p = self.spf[n as usize] as u64;
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            pairs.push((p, e));
        }
        Factorization::from_pairs(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().pairs().is_empty());
        assert_eq!(factorize(360).unwrap().pairs(), &[(2, 3), (3, 2), (5, 1)]);
        let m61 = (1u64 << 61) - 1;
        assert_eq!(factorize(m61).unwrap().pairs(), &[(m61, 1)]);
        assert!(factorize(0).is_err());
        let n = 1_000_003u64 * 998_244_353;
        assert_eq!(factorize(n).unwrap().pairs(), &[(1_000_003, 1), (998_244_353, 1)]);
    }

    #[test]
    fn jacobi_examples() {
        assert_eq!(jacobi(1, 9).unwrap(), 1);
        assert_eq!(jacobi(2, 15).unwrap(), 1);
        assert_eq!(jacobi(5, 11).unwrap(), 1);
        assert_eq!(jacobi(3, 7).unwrap(), -1);
        assert_eq!(jacobi(6, 9).unwrap(), 0);
        assert_eq!(jacobi(-1, 1).unwrap(), 1);
        assert!(jacobi(3, 8).is_err());
    }

    #[test]
    fn iota_examples() {
        assert_eq!(iota(5).unwrap(), QuarticRootOfUnity::One);
        assert_eq!(iota(7).unwrap(), QuarticRootOfUnity::I);
        assert_eq!(iota(1).unwrap(), QuarticRootOfUnity::One);
        assert!(iota(4).is_err());
    }

    #[test]
    fn parts() {
        assert_eq!(part_toward(360, 6), 72);
        assert_eq!(part_toward(35, 6), 1);
        assert_eq!(part_toward(97, 97), 97);
        assert_eq!(part_toward(1024 * 3, 2), 1024);
        assert_eq!(squarefull_part(360), 72);
        assert_eq!(squarefull_part(30), 1);
        assert_eq!(squarefull_part(8), 8);
    }

    #[test]
    fn upsilon_examples() {
        assert!((upsilon(12, 1.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(upsilon(1, 0.25).unwrap(), 1.0);
        let direct: f64 = [2.0f64, 3.0, 5.0]
            .iter()
            .map(|p| 1.0 / (1.0 - p.powf(-0.5)))
            .product();
        assert!((upsilon(30, 0.5).unwrap() - direct).abs() < 1e-12);
        assert!(upsilon(5, 0.0).is_err());
    }

    #[test]
    fn multiplicative_functions() {
        assert_eq!(moebius(1), 1);
        assert_eq!(moebius(30), -1);
        assert_eq!(moebius(12), 0);
        assert_eq!(euler_phi(36), 12);
        assert_eq!(tau(36), 9);
        assert_eq!(omega(360), 3);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(radical(360), 30);
    }

    #[test]
    fn crt_and_inverse() {
        assert_eq!(crt_combine(2, 3, 3, 5), Some((8, 15)));
        assert_eq!(crt_combine(1, 4, 1, 6), None);
        assert_eq!(mod_inverse(3, 7), Some(5));
        assert_eq!(mod_inverse(-3, 7), Some(2));
        assert_eq!(mod_inverse(2, 4), None);
        assert_eq!(mod_inverse(5, 1), Some(0));
    }

    #[test]
    fn ramanujan_matches_direct() {
        for q in 1..=50u64 {
            for n in 0..=50i64 {
                let direct: Complex64 = (0..q)
                    .filter(|&a| gcd(a, q) == 1)
                    .map(|a| e_frac(a as i64 * n, q))
                    .sum();
                let c = ramanujan_sum(q, n) as f64;
                assert!((direct.re - c).abs() < 1e-9 && direct.im.abs() < 1e-9, "q={q} n={n}");
            }
        }
    }

    #[test]
    fn part_toward_grid() {
        for q in 1..=400u64 {
            for l in 1..=400u64 {
                let ql = part_toward(q, l);
                assert_eq!(q % ql, 0);
                assert_eq!(gcd(q / ql, l), 1);
                assert!(factor(ql).primes().all(|p| l % p == 0));
            }
        }
    }

    #[test]
    fn jacobi_matches_squares() {
        for p in (3..100u64).filter(|&p| is_prime(p)) {
            let squares: Vec<u64> = (1..p).map(|x| x * x % p).collect();
            for a in 0..p {
                let expect = if a == 0 {
                    0
                } else if squares.contains(&a) {
                    1
                } else {
                    -1
                };
                assert_eq!(jacobi_odd(a as i64, p), expect);
            }
        }
    }

    #[test]
    fn perfect_squares_small() {
        for n in 0..=1_000_000i64 {
            let r = integer_sqrt(n as u64);
            assert_eq!(is_perfect_square(n).is_some(), r * r == n as u64);
        }
        assert_eq!(is_perfect_square(-4), None);
        assert_eq!(integer_sqrt(u64::MAX), 4_294_967_295);
    }

    #[test]
    fn sieve_agrees() {
        let s = Sieve::new(5000);
        for n in 1..=5000u64 {
            assert_eq!(s.factorize(n), factor(n));
        }
    }
}
