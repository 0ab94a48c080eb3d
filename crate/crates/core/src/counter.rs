//! Exact enumeration of x ∈ ℤ³ with F(x) = m, x ≡ Γ mod L, weighted by w(x/B).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{integer_sqrt_u128, rem};
use crate::delta::BumpWeight;
use crate::error::{invalid, Error, Result};
use crate::forms::{CountingProblem, Mat3, Vec3};
use crate::quad::Neumaier;

/// Outer-coordinate values per stripe; fixed so the reduction order never depends on the pool.
const STRIPE: usize = 16;
pub const TRIPLE_LOOP_MAX_B: u64 = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Bump(BumpWeight),
    /// Indicator of [−1, 1]³, so x ranges over [−B, B]³.
    SharpBox,
}

impl Weight {
    pub fn eval(&self, t: &[f64; 3]) -> f64 {
        match self {
            Weight::Bump(w) => w.eval(t),
            Weight::SharpBox => {
                if t.iter().all(|x| x.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn lo(&self) -> [f64; 3] {
        match self {
            Weight::Bump(w) => w.lo(),
            Weight::SharpBox => [-1.0; 3],
        }
    }

    fn hi(&self) -> [f64; 3] {
        match self {
            Weight::Bump(w) => w.hi(),
            Weight::SharpBox => [1.0; 3],
        }
    }

    /// Integer range of coordinate i, intersected with the class λ_i mod L.
    fn range(&self, b: u64, i: usize, lambda: i64, l: u64) -> (i64, i64) {
        let lo = (self.lo()[i] * b as f64).ceil() as i64;
        let hi = (self.hi()[i] * b as f64).floor() as i64;
        (lo + rem(lambda - lo, l) as i64, hi)
    }

    /// Point lies in the open support (the closed box for SharpBox).
    fn in_support(&self, t: &[f64; 3]) -> bool {
        match self {
            Weight::Bump(w) => (0..3).map(|i| (t[i] - w.center[i]).powi(2)).sum::<f64>() < w.radius * w.radius,
            Weight::SharpBox => self.eval(t) > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountResult {
    pub b: u64,
    pub weighted_count: f64,
    /// Points in the support of w.
    pub sharp_count: u64,
    pub elapsed: f64,
    pub points_sample: Option<Vec<Vec3>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CountOptions {
    /// 0 means rayon's default pool.
    pub workers: usize,
    /// Keep up to this many solutions, in enumeration order.
    pub sample: usize,
}

fn isqrt_exact(d: i128) -> Option<i128> {
    if d < 0 {
        return None;
    }
    let s = if d < 1 << 52 {
        let mut s = (d as f64).sqrt() as i128;
        while s * s > d {
            s -= 1;
        }
        while (s + 1) * (s + 1) <= d {
            s += 1;
        }
        s
    } else {
        integer_sqrt_u128(d as u128) as i128
    };
    (s * s == d).then_some(s)
}

/// Solve for coordinate k given the other two: A_kk x_k² + 2b'x_k + c = 0.
struct Solver {
    a: Mat3,
    axes: [usize; 3],
}

impl Solver {
    fn new(a: &Mat3) -> Solver {
        let k = [2, 1, 0].into_iter().find(|&k| a[k][k] != 0).unwrap_or(2);
        let (i, j) = match k {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        Solver { a: *a, axes: [i, j, k] }
    }

    /// Calls `emit(x_k)` for every integer root, or `free()` if x_k is unconstrained.
    fn roots(&self, xi: i64, xj: i64, m: i64, mut emit: impl FnMut(i64), free: impl FnOnce()) {
        let [i, j, k] = self.axes;
        let a = &self.a;
        let (xi, xj) = (xi as i128, xj as i128);
        let bp = a[i][k] as i128 * xi + a[j][k] as i128 * xj;
        let c = a[i][i] as i128 * xi * xi + 2 * a[i][j] as i128 * xi * xj + a[j][j] as i128 * xj * xj - m as i128;
        let akk = a[k][k] as i128;
        if akk == 0 {
            if bp == 0 {
                if c == 0 {
                    free();
                }
            } else if c % (2 * bp) == 0 {
                emit((-c / (2 * bp)) as i64);
            }
            return;
        }
        let Some(s) = isqrt_exact(bp * bp - akk * c) else { return };
        for num in [-bp - s, -bp + s] {
            if num % akk == 0 {
                emit((num / akk) as i64);
            }
            if s == 0 {
                break;
            }
        }
    }
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn height_warning(problem: &CountingProblem, b: u64) -> Vec<String> {
    let limit = (b as f64).powf(2.0 - problem.theta);
    if (problem.m.unsigned_abs() as f64) > limit {
        vec![format!("|m| = {} exceeds B^(2-theta) = {limit:.3e}", problem.m.unsigned_abs())]
    } else {
        Vec::new()
    }
}

struct Partial {
    weighted: Neumaier,
    sharp: u64,
    sample: Vec<Vec3>,
}

/// O(B²) count: the two outer coordinates are enumerated, the third solved exactly.
pub fn count(problem: &CountingProblem, b: u64, weight: &Weight, opts: &CountOptions) -> Result<CountResult> {
    if b == 0 {
        return invalid("B must be at least 1");
    }
    let start = Instant::now();
    let solver = Solver::new(problem.form.half_hessian());
    let [i, j, k] = solver.axes;
    let (l, lam, m) = (problem.l, problem.lambda, problem.m);
    let (i_lo, i_hi) = weight.range(b, i, lam[i], l);
    let (j_lo, j_hi) = weight.range(b, j, lam[j], l);
    let (k_lo, k_hi) = weight.range(b, k, lam[k], l);
    let li = l as i64;
    let outer: Vec<i64> = if i_lo > i_hi { Vec::new() } else { (i_lo..=i_hi).step_by(l as usize).collect() };
    let bf = b as f64;
    let cap = opts.sample;
    let stripe = |xs: &[i64]| {
        let mut part = Partial { weighted: Neumaier::default(), sharp: 0, sample: Vec::new() };
        let visit = |x: Vec3, part: &mut Partial| {
            let t = x.map(|c| c as f64 / bf);
            if weight.in_support(&t) {
                part.weighted.add(weight.eval(&t));
                part.sharp += 1;
                if part.sample.len() < cap {
                    part.sample.push(x);
                }
            }
        };
        for &xi in xs {
            let mut xj = j_lo;
            while xj <= j_hi {
                let mut x = [0i64; 3];
                x[i] = xi;
                x[j] = xj;
                let mut hits = [0i64; 2];
                let mut n = 0;
                let mut all = false;
                solver.roots(xi, xj, m, |xk| {
                    if xk >= k_lo && xk <= k_hi && rem(xk - lam[k], l) == 0 {
                        hits[n] = xk;
                        n += 1;
                    }
                }, || all = true);
                for &xk in &hits[..n] {
                    x[k] = xk;
                    visit(x, &mut part);
                }
                if all {
                    let mut xk = k_lo;
                    while xk <= k_hi {
                        x[k] = xk;
                        visit(x, &mut part);
                        xk += li;
                    }
                }
                xj += li;
            }
        }
        part
    };
    let parts: Vec<Partial> = in_pool(opts.workers, || outer.par_chunks(STRIPE).map(stripe).collect())?;
    let mut weighted = Neumaier::default();
    let mut sharp = 0;
    let mut sample = Vec::new();
    for p in parts {
        weighted.add(p.weighted.value());
        sharp += p.sharp;
        sample.extend(p.sample.into_iter().take(cap - sample.len().min(cap)));
    }
    Ok(CountResult {
        b,
        weighted_count: weighted.value(),
        sharp_count: sharp,
        elapsed: start.elapsed().as_secs_f64(),
        points_sample: (cap > 0).then_some(sample),
        warnings: height_warning(problem, b),
    })
}

/// O(B³) oracle over the same box.
pub fn count_triple_loop(problem: &CountingProblem, b: u64, weight: &Weight) -> Result<CountResult> {
    if b == 0 {
        return invalid("B must be at least 1");
    }
    if b > TRIPLE_LOOP_MAX_B {
        return Err(Error::Budget(format!("triple loop needs B <= {TRIPLE_LOOP_MAX_B}, got {b}")));
    }
    let start = Instant::now();
    let (l, lam) = (problem.l, problem.lambda);
    let r: [(i64, i64); 3] = std::array::from_fn(|i| weight.range(b, i, lam[i], l));
    let step = l as usize;
    let bf = b as f64;
    let mut weighted = Neumaier::default();
    let mut sharp = 0;
    for x0 in (r[0].0..=r[0].1).step_by(step) {
        for x1 in (r[1].0..=r[1].1).step_by(step) {
            for x2 in (r[2].0..=r[2].1).step_by(step) {
                let x = [x0, x1, x2];
                if problem.form.eval_i128(&x.map(|c| c as i128)) != problem.m as i128 {
                    continue;
                }
                let t = x.map(|c| c as f64 / bf);
                if weight.in_support(&t) {
                    weighted.add(weight.eval(&t));
                    sharp += 1;
                }
            }
        }
    }
    Ok(CountResult {
        b,
        weighted_count: weighted.value(),
        sharp_count: sharp,
        elapsed: start.elapsed().as_secs_f64(),
        points_sample: None,
        warnings: height_warning(problem, b),
    })
}
