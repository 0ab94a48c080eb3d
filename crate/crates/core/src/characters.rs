//! Dirichlet characters modulo q.
//!
//! (ℤ/q)* is split by CRT into cyclic components: one per odd prime power
//! (generated by the smallest primitive root) and, at 2^k, ⟨−1⟩ × ⟨5⟩ for
//! k ≥ 3 or ⟨−1⟩ for k = 2. A character is an exponent per component, and its
//! values are exact fractions of a turn with denominator the group exponent.

use num_complex::Complex64;
use std::sync::Arc;

use crate::arith::{crt_combine, e_residue, factor, gcd, lcm, mod_pow};
use crate::error::{Error, Result};

pub const MAX_MODULUS: u64 = 1_000_000;

#[derive(Debug)]
struct Component {
    /// The prime power this component lives in.
    pk: u64,
    p: u64,
    k: u32,
    order: u64,
    /// Generator as a residue mod pk.
    generator: u64,
    /// Generator lifted to a residue mod q (≡ 1 at other prime powers).
    lifted: u64,
    /// Discrete logarithm table indexed by residue mod pk.
    dlog: Vec<u32>,
    /// For the 2-power ⟨−1⟩ factor: `sign` components read off n mod 4.
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Cyclic,
    /// The ⟨−1⟩ factor at 2^k.
    TwoSign,
    /// The ⟨5⟩ factor at 2^k, k ≥ 3.
    TwoFive,
}

/// The character group mod q with its discrete-log tables.
#[derive(Debug)]
pub struct CharacterGroup {
    modulus: u64,
    components: Vec<Component>,
    exponent: u64,
}

const UNSET: u32 = u32::MAX;

fn primitive_root_prime_power(p: u64, pk: u64) -> u64 {
    let phi = pk / p * (p - 1);
    let fp = factor(phi);
    (2..pk)
        .find(|&g| gcd(g, p) == 1 && fp.primes().all(|r| mod_pow(g, phi / r, pk) != 1))
        .expect("odd prime powers are cyclic")
}

impl CharacterGroup {
    pub fn new(q: u64) -> Result<Arc<Self>> {
        if q == 0 {
            return Err(Error::InvalidArgument("modulus must be positive".into()));
        }
        if q > MAX_MODULUS {
            return Err(Error::Budget(format!("character modulus {q} exceeds {MAX_MODULUS}")));
        }
        let mut components = Vec::new();
        for &(p, k) in factor(q).pairs() {
            let pk = p.pow(k);
            let lift = |g: u64| crt_combine(g, pk, 1, q / pk).expect("coprime").0;
            if p == 2 {
                if k == 1 {
                    continue;
                }
                let mut sign = vec![UNSET; pk as usize];
                let mut five = vec![UNSET; pk as usize];
                let order5 = if k >= 3 { pk / 4 } else { 1 };
                let mut x = 1u64;
                for j in 0..order5 {
                    sign[x as usize] = 0;
                    sign[(pk - x) as usize] = 1;
                    five[x as usize] = j as u32;
                    five[(pk - x) as usize] = j as u32;
                    x = x * 5 % pk;
                }
                components.push(Component {
                    pk,
                    p,
                    k,
                    order: 2,
                    generator: pk - 1,
                    lifted: lift(pk - 1),
                    dlog: sign,
                    kind: Kind::TwoSign,
                });
                if k >= 3 {
                    components.push(Component {
                        pk,
                        p,
                        k,
                        order: order5,
                        generator: 5,
                        lifted: lift(5),
                        dlog: five,
                        kind: Kind::TwoFive,
                    });
                }
            } else {
                let g = primitive_root_prime_power(p, pk);
                let order = pk / p * (p - 1);
                let mut dlog = vec![UNSET; pk as usize];
                let mut x = 1u64;
                for j in 0..order {
                    dlog[x as usize] = j as u32;
                    x = x * g % pk;
                }
                components.push(Component {
                    pk,
                    p,
                    k,
                    order,
                    generator: g,
                    lifted: lift(g),
                    dlog,
                    kind: Kind::Cyclic,
                });
            }
        }
        let exponent = components.iter().fold(1, |acc, c| lcm(acc, c.order));
        Ok(Arc::new(CharacterGroup {
            modulus: q,
            components,
            exponent,
        }))
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Common denominator of all character values (the group exponent).
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn order(&self) -> u64 {
        self.components.iter().map(|c| c.order).product()
    }

    /// Discrete logs of n against each component, or None if gcd(n, q) > 1.
    fn logs(&self, n: i64) -> Option<Vec<u64>> {
        let r = crate::arith::rem(n, self.modulus);
        if gcd(r, self.modulus) != 1 {
            return None;
        }
        Some(
            self.components
                .iter()
                .map(|c| c.dlog[(r % c.pk) as usize] as u64)
                .collect(),
        )
    }
}

/// A Dirichlet character, stored as exponents against the group generators.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    group: Arc<CharacterGroup>,
    exponents: Vec<u64>,
}

impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.group.modulus == other.group.modulus && self.exponents == other.exponents
    }
}

impl DirichletCharacter {
    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    pub fn group(&self) -> &Arc<CharacterGroup> {
        &self.group
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn principal(group: Arc<CharacterGroup>) -> Self {
        let exponents = vec![0; group.components.len()];
        DirichletCharacter { group, exponents }
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// χ(n) = e(k/exponent) as the numerator k, or None when χ(n) = 0.
    pub fn angle(&self, n: i64) -> Option<u64> {
        let logs = self.group.logs(n)?;
        let ex = self.group.exponent;
        let mut k = 0u64;
        for ((c, &e), l) in self.group.components.iter().zip(&self.exponents).zip(logs) {
            k = (k + (e * l % c.order) * (ex / c.order)) % ex;
        }
        Some(k)
    }

    pub fn evaluate(&self, n: i64) -> Complex64 {
        match self.angle(n) {
            Some(k) => e_residue(k, self.group.exponent),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Complex conjugate character.
    pub fn conj(&self) -> Self {
        let exponents = self
            .group
            .components
            .iter()
            .zip(&self.exponents)
            .map(|(c, &e)| (c.order - e) % c.order)
            .collect();
        DirichletCharacter {
            group: self.group.clone(),
            exponents,
        }
    }

    /// Order of χ in the character group.
    pub fn order(&self) -> u64 {
        self.group
            .components
            .iter()
            .zip(&self.exponents)
            .fold(1, |acc, (c, &e)| lcm(acc, c.order / gcd(c.order, e)))
    }

    /// Smallest f | q such that χ factors through (ℤ/f)*.
    pub fn conductor(&self) -> u64 {
        let mut f = 1u64;
        let comps = &self.group.components;
        let mut i = 0;
        while i < comps.len() {
            let c = &comps[i];
            if c.p == 2 {
                let sign = self.exponents[i];
                let (five, has_five) = if i + 1 < comps.len() && comps[i + 1].kind == Kind::TwoFive {
                    (self.exponents[i + 1], true)
                } else {
                    (0, false)
                };
                let order5 = if has_five { comps[i + 1].order } else { 1 };
                let j = if five != 0 {
                    // trivial on 1 + 2^j = ⟨5^{2^{j−2}}⟩ iff 2^{k−j} | five
                    let v = five.trailing_zeros();
                    let k5 = order5.trailing_zeros();
                    c.k - (v.min(k5) as u32) + 0
                } else if sign != 0 {
                    2
                } else {
                    0
                };
                f *= 2u64.pow(j);
                i += if has_five { 2 } else { 1 };
            } else {
                let e = self.exponents[i];
                let j = if e == 0 {
                    0
                } else {
                    let mut v = 0;
                    let mut x = e;
                    while x % c.p == 0 && v < c.k - 1 {
                        x /= c.p;
                        v += 1;
                    }
                    c.k - v
                };
                f *= c.p.pow(j);
                i += 1;
            }
        }
        f
    }

    /// The primitive character mod conductor inducing χ.
    pub fn primitive_part(&self) -> Result<DirichletCharacter> {
        let f = self.conductor();
        let group = CharacterGroup::new(f)?;
        let q = self.group.modulus;
        let exponents = group
            .components
            .iter()
            .map(|c| {
                // Lift the mod-f generator to a residue mod q that is 1 away from p.
                let pk_q = crate::arith::part_toward(q, c.p);
                let n = crt_combine(c.generator % pk_q, pk_q, 1, q / pk_q).expect("coprime").0;
                let k = self.angle(n as i64).expect("unit");
                // χ(n) = e(k/ex) must be an order-c.order root of unity.
                let ex = self.group.exponent;
                debug_assert_eq!((k * c.order) % ex, 0);
                k * c.order / ex
            })
            .collect();
        Ok(DirichletCharacter { group, exponents })
    }

    /// The character mod q' (q | q') induced by χ.
    pub fn induce(&self, q_big: u64) -> Result<DirichletCharacter> {
        if q_big % self.group.modulus != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} does not divide {q_big}",
                self.group.modulus
            )));
        }
        let group = CharacterGroup::new(q_big)?;
        let exponents = group
            .components
            .iter()
            .map(|c| {
                let k = self.angle(c.lifted as i64).unwrap_or(0);
                let ex = self.group.exponent;
                k * c.order / ex
            })
            .collect();
        Ok(DirichletCharacter { group, exponents })
    }
}

/// All φ(q) characters mod q, in lexicographic order of exponent vectors.
pub fn enumerate_characters(q: u64) -> Result<Vec<DirichletCharacter>> {
    let group = CharacterGroup::new(q)?;
    Ok(enumerate_in(&group))
}

pub fn enumerate_in(group: &Arc<CharacterGroup>) -> Vec<DirichletCharacter> {
    let orders: Vec<u64> = group.components.iter().map(|c| c.order).collect();
    let mut out = Vec::with_capacity(group.order() as usize);
    let mut cur = vec![0u64; orders.len()];
    loop {
        out.push(DirichletCharacter {
            group: group.clone(),
            exponents: cur.clone(),
        });
        let mut i = cur.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < orders[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// The real character n ↦ (n/q) mod an odd q, as a DirichletCharacter.
pub fn jacobi_character(q: u64) -> Result<DirichletCharacter> {
    if q % 2 == 0 {
        return Err(Error::InvalidArgument("Jacobi character needs odd modulus".into()));
    }
    let group = CharacterGroup::new(q)?;
    let exponents = group
        .components
        .iter()
        .map(|c| if c.k % 2 == 1 { c.order / 2 } else { 0 })
        .collect();
    Ok(DirichletCharacter { group, exponents })
}
