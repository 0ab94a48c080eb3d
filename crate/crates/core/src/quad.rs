//! Gauss–Legendre rules: adaptive 1D bisection and composite tensor rules in
//! two and three dimensions, with deterministic ordered reduction.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite rule on [a, b] with `panels` equal panels of `order` nodes.
#[derive(Debug, Clone)]
pub struct Composite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Composite {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Composite {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for k in 0..order {
                nodes.push(mid + 0.5 * h * x[k]);
                weights.push(0.5 * h * w[k]);
            }
        }
        Composite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexNeumaier {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexNeumaier {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// A quadrature value with the difference between the last two refinements.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub nodes: usize,
}

const ORDER: usize = 16;

/// Adaptive bisection on [a, b] comparing one panel with its two halves.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    let (x, w) = gauss_legendre(ORDER);
    let panel = |lo: f64, hi: f64| {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut acc = ComplexNeumaier::default();
        for k in 0..ORDER {
            acc.add(f(mid + half * x[k]) * (half * w[k]));
        }
        acc.value()
    };
    let mut total = ComplexNeumaier::default();
    let mut error = 0.0;
    let mut nodes = 0;
    let mut stack = vec![(a, b, panel(a, b), 0u32)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (left, right) = (panel(lo, mid), panel(mid, hi));
        nodes += 2 * ORDER;
        let diff = (left + right - whole).norm();
        let share = tol * (hi - lo) / (b - a);
        if diff <= share.max(1e-300) || depth >= 40 {
            if depth >= 40 && diff > share {
                return Err(Error::NoConvergence(format!(
                    "1d quadrature on [{a}, {b}]: local error {diff:.3e} at depth 40"
                )));
            }
            total.add(left + right);
            error += diff;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(Estimate { value: total.value(), error, nodes })
}

pub fn integrate_1d_real<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    Ok(integrate_1d(|x| Complex64::new(f(x), 0.0), a, b, tol)?.value.re)
}

/// Σ over a 3D tensor grid; slabs along the first axis are reduced in order.
pub fn tensor3<F>(f: &F, rules: &[Composite; 3]) -> Complex64
where
    F: Fn(&[f64; 3]) -> Complex64 + Sync,
{
    let slabs: Vec<Complex64> = (0..rules[0].len())
        .into_par_iter()
        .map(|i| {
            let mut acc = ComplexNeumaier::default();
            let x = rules[0].nodes[i];
            for j in 0..rules[1].len() {
                let y = rules[1].nodes[j];
                let wy = rules[1].weights[j];
                for k in 0..rules[2].len() {
                    let v = f(&[x, y, rules[2].nodes[k]]);
                    if v.re != 0.0 || v.im != 0.0 {
                        acc.add(v * (wy * rules[2].weights[k]));
                    }
                }
            }
            acc.value() * rules[0].weights[i]
        })
        .collect();
    let mut acc = ComplexNeumaier::default();
    for s in slabs {
        acc.add(s);
    }
    acc.value()
}

/// Σ over a 2D tensor grid, rows reduced in order.
pub fn tensor2<F>(f: &F, rules: &[Composite; 2]) -> Complex64
where
    F: Fn(&[f64; 2]) -> Complex64 + Sync,
{
    let rows: Vec<Complex64> = (0..rules[0].len())
        .into_par_iter()
        .map(|i| {
            let mut acc = ComplexNeumaier::default();
            let x = rules[0].nodes[i];
            for j in 0..rules[1].len() {
                acc.add(f(&[x, rules[1].nodes[j]]) * rules[1].weights[j]);
            }
            acc.value() * rules[0].weights[i]
        })
        .collect();
    let mut acc = ComplexNeumaier::default();
    for r in rows {
        acc.add(r);
    }
    acc.value()
}

/// Refines the panel count by 3/2 on a box until two successive values agree to `tol`.
pub fn adaptive_box3<F>(f: &F, lo: [f64; 3], hi: [f64; 3], panels: [usize; 3], tol: f64, max_nodes: usize) -> Result<Estimate>
where
    F: Fn(&[f64; 3]) -> Complex64 + Sync,
{
    let rules = |p: [usize; 3]| -> [Composite; 3] { std::array::from_fn(|i| Composite::new(lo[i], hi[i], p[i].max(1), ORDER)) };
    let count = |p: [usize; 3]| p.iter().map(|&x| x.max(1) * ORDER).product::<usize>();
    let mut p = panels;
    let mut prev = tensor3(f, &rules(p));
    loop {
        let next_p = p.map(|x| (3 * x.max(1)).div_ceil(2));
        let n = count(next_p);
        if n > max_nodes {
            return Err(Error::NoConvergence(format!(
                "3d quadrature: node budget {max_nodes} reached with estimated error above {tol:.1e}"
            )));
        }
        let cur = tensor3(f, &rules(next_p));
        let err = (cur - prev).norm();
        if err <= tol {
            return Ok(Estimate { value: cur, error: err, nodes: n });
        }
        prev = cur;
        p = next_p;
    }
}

pub fn adaptive_box2<F>(f: &F, lo: [f64; 2], hi: [f64; 2], panels: [usize; 2], tol: f64, max_nodes: usize) -> Result<Estimate>
where
    F: Fn(&[f64; 2]) -> Complex64 + Sync,
{
    let rules = |p: [usize; 2]| -> [Composite; 2] { std::array::from_fn(|i| Composite::new(lo[i], hi[i], p[i].max(1), ORDER)) };
    let mut p = panels;
    let mut prev = tensor2(f, &rules(p));
    loop {
        let next_p = p.map(|x| (3 * x.max(1)).div_ceil(2));
        let n = next_p.iter().map(|&x| x * ORDER).product::<usize>();
        if n > max_nodes {
            return Err(Error::NoConvergence(format!(
                "2d quadrature: node budget {max_nodes} reached with estimated error above {tol:.1e}"
            )));
        }
        let cur = tensor2(f, &rules(next_p));
        let err = (cur - prev).norm();
        if err <= tol {
            return Ok(Estimate { value: cur, error: err, nodes: n });
        }
        prev = cur;
        p = next_p;
    }
}
