//! Quadratic Gauss sums G(n; A, b) = Σ_{x mod n} e_n(xᵀAx + b·x) in any
//! dimension, by CRT and p-adic Jordan reduction of A.

use num_complex::Complex64;

use crate::arith::{e_residue, factor, inv, jacobi_odd, rem_i128};

/// G(n; A, b) for a symmetric integer matrix A (so Q(x) = Σ A_ij x_i x_j).
pub fn quadratic_gauss(n: u64, a: &[Vec<i64>], b: &[i64]) -> Complex64 {
    assert!(n >= 1);
    let dim = b.len();
    let mut out = Complex64::new(1.0, 0.0);
    for &(p, k) in factor(n).pairs() {
        let pk = p.pow(k);
        let cof = (n / pk) as i128;
        let s: Vec<Vec<i128>> = (0..dim)
            .map(|i| (0..dim).map(|j| rem_i128(cof * a[i][j] as i128, pk) as i128).collect())
            .collect();
        let bb: Vec<i128> = b.iter().map(|&x| rem_i128(x as i128, pk) as i128).collect();
        out *= prime_power(p, k, s, bb);
    }
    out
}

fn ord_mod(x: i128, p: u64, k: u32) -> u32 {
    if x == 0 {
        return k;
    }
    let mut x = x;
    let mut e = 0;
    while x % p as i128 == 0 && e < k {
        x /= p as i128;
        e += 1;
    }
    e
}

fn reduce(x: i128, n: u64) -> i128 {
    x.rem_euclid(n as i128)
}

fn mulm(x: i128, y: i128, n: u64) -> i128 {
    reduce(x * y, n)
}

/// Sum over (Z/p^k)^dim with S, b already reduced mod p^k.
fn prime_power(p: u64, k: u32, mut s: Vec<Vec<i128>>, mut b: Vec<i128>) -> Complex64 {
    let n = p.pow(k);
    let mut acc = Complex64::new(1.0, 0.0);
    loop {
        let dim = b.len();
        if dim == 0 {
            return acc;
        }
        let diag = (0..dim).min_by_key(|&i| ord_mod(s[i][i], p, k)).unwrap();
        let vd = ord_mod(s[diag][diag], p, k);
        let mut off = None;
        let mut vo = k;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = ord_mod(s[i][j], p, k);
                if v < vo {
                    vo = v;
                    off = Some((i, j));
                }
            }
        }
        if vd >= k && vo >= k {
            // Q ≡ 0: only the linear character remains.
            for &bi in &b {
                if bi != 0 {
                    return Complex64::new(0.0, 0.0);
                }
            }
            return acc * (n as f64).powi(dim as i32);
        }
        if vd <= vo {
            let piv = diag;
            acc *= one_dim(p, k, s[piv][piv], b[piv]);
            let (ns, nb) = eliminate_one(p, k, &s, &b, piv, vd);
            s = ns;
            b = nb;
        } else if p != 2 {
            // An off-diagonal entry beats every diagonal one: x_i ↦ x_i + x_j
            // creates a diagonal entry of the same valuation.
            let (i, j) = off.unwrap();
            let sij = s[i][j];
            let sjj = s[j][j];
            s[i][i] = reduce(s[i][i] + 2 * sij + sjj, n);
            for t in 0..dim {
                if t != i {
                    let v = reduce(s[i][t] + s[j][t], n);
                    s[i][t] = v;
                    s[t][i] = v;
                }
            }
            b[i] = reduce(b[i] + b[j], n);
        } else {
            let (i, j) = off.unwrap();
            acc *= two_dim_block(k, s[i][i], s[i][j], s[j][j], b[i], b[j], vo);
            let (ns, nb) = eliminate_block(k, &s, &b, i, j, vo);
            s = ns;
            b = nb;
        }
    }
}

/// Complete the square on variable `piv`, whose diagonal entry has valuation v.
fn eliminate_one(p: u64, k: u32, s: &[Vec<i128>], b: &[i128], piv: usize, v: u32) -> (Vec<Vec<i128>>, Vec<i128>) {
    let n = p.pow(k);
    let pv = p.pow(v) as i128;
    let u = s[piv][piv] / pv;
    let ubar = inv_i128(u, n);
    let rest: Vec<usize> = (0..b.len()).filter(|&t| t != piv).collect();
    let t: Vec<i128> = rest.iter().map(|&j| mulm(s[piv][j] / pv, ubar, n)).collect();
    let ns = rest
        .iter()
        .enumerate()
        .map(|(x, &jx)| {
            rest.iter()
                .map(|&jy| reduce(s[jx][jy] - mulm(t[x], s[piv][jy], n), n))
                .collect()
        })
        .collect();
    let nb = rest
        .iter()
        .enumerate()
        .map(|(x, &jx)| reduce(b[jx] - mulm(b[piv], t[x], n), n))
        .collect();
    (ns, nb)
}

/// Split off the 2-adic block on (i, j), whose off-diagonal entry has
/// valuation v strictly below both diagonal valuations.
fn eliminate_block(k: u32, s: &[Vec<i128>], b: &[i128], i: usize, j: usize, v: u32) -> (Vec<Vec<i128>>, Vec<i128>) {
    let n = 1u64 << k;
    let pv = 1i128 << v;
    let (m00, m01, m11) = (s[i][i] / pv, s[i][j] / pv, s[j][j] / pv);
    let det_inv = inv_i128(m00 * m11 - m01 * m01, n);
    // Inverse of the unit block, adj/det.
    let minv = [[mulm(m11, det_inv, n), mulm(-m01, det_inv, n)], [mulm(-m01, det_inv, n), mulm(m00, det_inv, n)]];
    let rest: Vec<usize> = (0..b.len()).filter(|&t| t != i && t != j).collect();
    let t: Vec<[i128; 2]> = rest
        .iter()
        .map(|&r| {
            let (x, y) = (s[i][r] / pv, s[j][r] / pv);
            [reduce(minv[0][0] * x + minv[0][1] * y, n), reduce(minv[1][0] * x + minv[1][1] * y, n)]
        })
        .collect();
    let ns = rest
        .iter()
        .enumerate()
        .map(|(x, &rx)| {
            rest.iter()
                .map(|&ry| reduce(s[rx][ry] - mulm(s[i][ry], t[x][0], n) - mulm(s[j][ry], t[x][1], n), n))
                .collect()
        })
        .collect();
    let nb = rest
        .iter()
        .enumerate()
        .map(|(x, &rx)| reduce(b[rx] - mulm(b[i], t[x][0], n) - mulm(b[j], t[x][1], n), n))
        .collect();
    (ns, nb)
}

fn inv_i128(u: i128, n: u64) -> i128 {
    inv(rem_i128(u, n) as i64, n) as i128
}

/// Σ_{y mod p^k} e_{p^k}(s y² + β y).
fn one_dim(p: u64, k: u32, s: i128, beta: i128) -> Complex64 {
    let n = p.pow(k);
    let e = ord_mod(s, p, k);
    if e >= k {
        return if reduce(beta, n) == 0 { Complex64::new(n as f64, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    let pe = p.pow(e) as i128;
    if reduce(beta, pe as u64) != 0 {
        return Complex64::new(0.0, 0.0);
    }
    let j = k - e;
    let u = s / pe;
    let beta = beta / pe;
    pe as f64 * unit_one_dim(p, j, u, beta)
}

/// Σ_{z mod p^j} e_{p^j}(u z² + β z) for a unit u.
fn unit_one_dim(p: u64, j: u32, u: i128, beta: i128) -> Complex64 {
    let n = p.pow(j);
    if j == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if p != 2 {
        let four_u_inv = inv_i128(4 * u, n);
        let phase = e_residue(reduce(-mulm(four_u_inv, mulm(beta, beta, n), n), n) as u64, n);
        let leg = if j % 2 == 1 { jacobi_odd(rem_i128(u, p) as i64, p) as f64 } else { 1.0 };
        let iota = if n % 4 == 1 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
        return phase * iota * leg * (n as f64).sqrt();
    }
    if beta.rem_euclid(2) == 1 {
        return if j == 1 { Complex64::new(2.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    if j == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let half = beta / 2;
    let ubar = inv_i128(u, n);
    let phase = e_residue(reduce(-mulm(ubar, mulm(half, half, n), n), n) as u64, n);
    let ur = u.rem_euclid(8);
    let i_u = if ur % 4 == 1 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
    let two_over_u = if j % 2 == 1 && (ur == 3 || ur == 5) { -1.0 } else { 1.0 };
    phase * (Complex64::new(1.0, 0.0) + i_u) * two_over_u * (n as f64).sqrt()
}

/// Σ over (Z/2^k)² of e_{2^k}(s00 y0² + 2 s01 y0 y1 + s11 y1² + β·y), with
/// ord₂(s01) = v below the diagonal valuations.
fn two_dim_block(k: u32, s00: i128, s01: i128, s11: i128, b0: i128, b1: i128, v: u32) -> Complex64 {
    let f = v + 1;
    let n = 1i128 << k;
    if f >= k {
        return if reduce(b0, n as u64) == 0 && reduce(b1, n as u64) == 0 {
            Complex64::new((n * n) as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let pf = 1i128 << f;
    if b0.rem_euclid(pf) != 0 || b1.rem_euclid(pf) != 0 {
        return Complex64::new(0.0, 0.0);
    }
    let j = k - f;
    let nj = 1u64 << j;
    // q(z) = α z0² + β z0 z1 + γ z1² with β odd.
    let alpha = s00 / pf;
    let beta = s01 / (1i128 << v);
    let gamma = s11 / pf;
    let (c0, c1) = (b0 / pf, b1 / pf);
    // Solve M w = c with M = [[2α, β], [β, 2γ]].
    let det_inv = inv_i128(4 * alpha * gamma - beta * beta, nj);
    let w0 = mulm(2 * gamma * c0 - beta * c1, det_inv, nj);
    let w1 = mulm(2 * alpha * c1 - beta * c0, det_inv, nj);
    let qw = reduce(alpha * w0 * w0 + beta * w0 * w1 + gamma * w1 * w1, nj);
    let phase = e_residue(reduce(-qw, nj) as u64, nj);
    let sign = if j % 2 == 1 && (alpha * gamma).rem_euclid(2) == 1 { -1.0 } else { 1.0 };
    (pf * pf) as f64 * phase * sign * nj as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::e_frac;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(n: u64, a: &[Vec<i64>], b: &[i64]) -> Complex64 {
        let dim = b.len();
        let total = (n as usize).pow(dim as u32);
        let mut s = Complex64::new(0.0, 0.0);
        for idx in 0..total {
            let mut x = vec![0i64; dim];
            let mut r = idx;
            for xi in x.iter_mut() {
                *xi = (r % n as usize) as i64;
                r /= n as usize;
            }
            let mut val: i128 = 0;
            for i in 0..dim {
                val += b[i] as i128 * x[i] as i128;
                for j in 0..dim {
                    val += a[i][j] as i128 * x[i] as i128 * x[j] as i128;
                }
            }
            s += e_frac(val.rem_euclid(n as i128) as i64, n);
        }
        s
    }

    #[test]
    fn one_variable_against_enumeration() {
        for n in 1..=64u64 {
            for a in -6..=6i64 {
                for b in 0..6i64 {
                    let g = quadratic_gauss(n, &[vec![a]], &[b]);
                    let o = brute(n, &[vec![a]], &[b]);
                    assert!((g - o).norm() < 1e-8, "n={n} a={a} b={b}: {g} vs {o}");
                }
            }
        }
    }

    #[test]
    fn ternary_against_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let moduli = [2u64, 3, 4, 5, 6, 8, 9, 12, 16, 18, 24, 25, 27, 32];
        for _ in 0..400 {
            let n = moduli[rng.gen_range(0..moduli.len())];
            let mut a = vec![vec![0i64; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let v = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(-12..=12) };
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
            let b: Vec<i64> = (0..3).map(|_| rng.gen_range(-40..40)).collect();
            let g = quadratic_gauss(n, &a, &b);
            let o = brute(n, &a, &b);
            assert!((g - o).norm() < 1e-7 * (n * n * n) as f64, "n={n} a={a:?} b={b:?}: {g} vs {o}");
        }
    }
}
