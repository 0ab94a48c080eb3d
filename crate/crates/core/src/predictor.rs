//! Main term I(w)·Ĝ·B log B, the secondary constant a = 𝒦 + b, and the
//! least-squares comparison with exact counts.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::counter::{count, CountOptions, Weight};
use crate::delta::{j_batch, k0, singular_integral, BumpWeight, DeltaKernel, JOptions, KZero};
use crate::densities::singular_series;
use crate::error::{invalid, Error, Result};
use crate::expsums::salie_avg::eta;
use crate::forms::{CountingProblem, Vec3};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Largest B accepted by the fit.
pub const MAX_B: u64 = 100_000;
/// Q of the kernel used for 𝒥 and K; h(r, y) itself does not depend on Q.
const KERNEL_Q: f64 = 16.0;

fn require_square(problem: &CountingProblem) -> Result<()> {
    if problem.square_case {
        Ok(())
    } else {
        Err(Error::Precondition("the B log B main term needs −mΔ_F to be a perfect square".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leading {
    pub singular_integral: f64,
    pub singular_series: f64,
}

impl Leading {
    /// I(w)·Ĝ, the predicted coefficient of B log B.
    pub fn alpha(&self) -> f64 {
        self.singular_integral * self.singular_series
    }

    pub fn main_term(&self, b: f64) -> f64 {
        self.alpha() * b * b.ln()
    }
}

pub fn leading_constants(problem: &CountingProblem, weight: &BumpWeight) -> Result<Leading> {
    require_square(problem)?;
    let g = singular_series(problem)?.value;
    let i = if weight.is_zero() { 0.0 } else { singular_integral(weight, &problem.form)?.surface };
    Ok(Leading { singular_integral: i, singular_series: g })
}

/// I(w)·Ĝ·B·log B.
pub fn main_term(problem: &CountingProblem, weight: &BumpWeight, b: f64) -> Result<f64> {
    if !(b >= 1.0) {
        return invalid("B must be at least 1");
    }
    Ok(leading_constants(problem, weight)?.main_term(b))
}

/// c with 0 < |c|∞ ≤ c_max and −F*(c) a square (zero included).
pub fn square_cs(problem: &CountingProblem, c_max: i64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for c0 in -c_max..=c_max {
        for c1 in -c_max..=c_max {
            for c2 in -c_max..=c_max {
                let c = [c0, c1, c2];
                if c == [0, 0, 0] {
                    continue;
                }
                let v = -problem.form.adjoint_value(&c);
                if v >= 0 && crate::arith::is_perfect_square(v).is_some() {
                    out.push(c);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondaryOptions {
    pub c_max: i64,
    pub u_max: u64,
    /// Truncation of the Γ constants inside η(c).
    pub k_max: u64,
    /// Dyadic depth of the K(v) extrapolation.
    pub k_depth: u32,
    pub j: JOptions,
}

impl Default for SecondaryOptions {
    fn default() -> Self {
        SecondaryOptions { c_max: 10, u_max: 64, k_max: 20_000, k_depth: 14, j: JOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondaryConstants {
    /// 𝒦 = L⁻⁴Σ η(c)𝒥(c).
    pub kappa: Complex64,
    pub b: f64,
    /// a = Re 𝒦 + b.
    pub a: f64,
    pub c_count: usize,
    /// L⁻⁴Σ|η(c)|·tail(c) from the unresolved small-r part of each 𝒥(c).
    pub j_tail: f64,
    /// L⁻⁴Σ|𝒥(c)|·last_shell(c) from the u-truncation of each η(c).
    pub eta_tail: f64,
    /// L⁻⁴Σ|η𝒥| over the outer shell |c|∞ = c_max.
    pub outer_shell: f64,
    /// Largest r_min over the c list.
    pub r_min: f64,
    pub k_zero: KZero,
}

/// (𝒦, b, a) with the truncation diagnostics of each part.
pub fn secondary_constants(problem: &CountingProblem, weight: &BumpWeight, opts: &SecondaryOptions) -> Result<SecondaryConstants> {
    require_square(problem)?;
    if opts.c_max < 1 {
        return invalid("c_max must be at least 1");
    }
    let kernel = DeltaKernel::new(KERNEL_Q)?;
    let l4 = (problem.l as f64).powi(4);
    let g = singular_series(problem)?.value;
    let i_w = if weight.is_zero() { 0.0 } else { singular_integral(weight, &problem.form)?.surface };
    let k_zero = k0(weight, &problem.form, &kernel, opts.k_depth)?;
    let b = g * (i_w * (EULER_GAMMA / l4 - (problem.l as f64).ln()) + k_zero.value);
    let cs = square_cs(problem, opts.c_max);
    let (mut kappa, mut j_tail, mut eta_tail, mut outer, mut r_min) = (Complex64::new(0.0, 0.0), 0.0, 0.0, 0.0, 0.0f64);
    if !weight.is_zero() {
        let js = j_batch(weight, &problem.form, &kernel, &cs, problem.l, &opts.j)?;
        let etas: Vec<_> = cs.par_iter().map(|c| eta(problem, c, opts.u_max, opts.k_max)).collect::<Result<_>>()?;
        for (j, e) in js.iter().zip(&etas) {
            let term = e.value * j.value / l4;
            kappa += term;
            j_tail += e.value.norm() * j.tail / l4;
            eta_tail += j.value.norm() * e.last_shell / l4;
            if j.c.iter().map(|x| x.abs()).max() == Some(opts.c_max) {
                outer += term.norm();
            }
            r_min = r_min.max(j.r_min);
        }
    }
    Ok(SecondaryConstants {
        kappa,
        b,
        a: kappa.re + b,
        c_count: cs.len(),
        j_tail,
        eta_tail,
        outer_shell: outer,
        r_min,
        k_zero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionRow {
    pub b: u64,
    pub exact: f64,
    pub main_term: f64,
    /// a·B when a is supplied, else NaN.
    pub secondary: f64,
    /// exact / main_term.
    pub ratio: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub rows: Vec<PredictionRow>,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_predicted: f64,
    pub alpha_relative_error: f64,
    pub a: Option<f64>,
    /// |ratio − 1| decreases along the top half of the grid.
    pub ratio_monotone: bool,
    pub leading: Leading,
}

/// Least squares y ≈ α·B log B + β·B by modified Gram–Schmidt.
pub fn fit_b_log_b(bs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if bs.len() != ys.len() || bs.len() < 2 {
        return invalid("fit needs at least two (B, count) pairs");
    }
    let mut u: Vec<f64> = bs.iter().map(|b| b * b.ln()).collect();
    let mut v: Vec<f64> = bs.to_vec();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let r11 = dot(&u, &u).sqrt();
    if r11 == 0.0 {
        return Err(Error::InvalidArgument("singular design matrix".into()));
    }
    u.iter_mut().for_each(|x| *x /= r11);
    let r12 = dot(&u, &v);
    v.iter_mut().zip(&u).for_each(|(x, q)| *x -= r12 * q);
    let r22 = dot(&v, &v).sqrt();
    if r22 <= 1e-12 * r11 {
        return Err(Error::InvalidArgument("singular design matrix: B grid is degenerate".into()));
    }
    v.iter_mut().for_each(|x| *x /= r22);
    let (z1, z2) = (dot(&u, ys), dot(&v, ys));
    let beta = z2 / r22;
    let alpha = (z1 - r12 * beta) / r11;
    Ok((alpha, beta))
}

fn check_grid(grid: &[u64]) -> Result<()> {
    if grid.len() < 6 {
        return Err(Error::Config("Bgrid needs at least 6 points".into()));
    }
    if grid.iter().any(|&b| b < 2 || b > MAX_B) {
        return Err(Error::Config(format!("Bgrid values must lie in [2, {MAX_B}]")));
    }
    let ratio = grid[1] as f64 / grid[0] as f64;
    if ratio <= 1.0 || grid.windows(2).any(|w| ((w[1] as f64 / w[0] as f64) / ratio - 1.0).abs() > 1e-9) {
        return Err(Error::Config("Bgrid must be increasing and geometric".into()));
    }
    Ok(())
}

/// Exact counts on the grid, fitted against (B log B, B).
pub fn fit_and_compare(problem: &CountingProblem, weight: &BumpWeight, grid: &[u64], a: Option<f64>, workers: usize) -> Result<PredictionReport> {
    check_grid(grid)?;
    let leading = leading_constants(problem, weight)?;
    let w = Weight::Bump(*weight);
    let mut rows = Vec::with_capacity(grid.len());
    for &b in grid {
        let r = count(problem, b, &w, &CountOptions { workers, sample: 0 })?;
        let bf = b as f64;
        let main = leading.main_term(bf);
        rows.push(PredictionRow {
            b,
            exact: r.weighted_count,
            main_term: main,
            secondary: a.map_or(f64::NAN, |a| a * bf),
            ratio: r.weighted_count / main,
            seconds: r.elapsed,
        });
    }
    let bs: Vec<f64> = rows.iter().map(|r| r.b as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.exact).collect();
    let (alpha_hat, beta_hat) = fit_b_log_b(&bs, &ys)?;
    let alpha_predicted = leading.alpha();
    let top = &rows[rows.len() / 2..];
    let ratio_monotone = top.windows(2).all(|w| (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs());
    Ok(PredictionReport {
        rows,
        alpha_hat,
        beta_hat,
        alpha_predicted,
        alpha_relative_error: (alpha_hat - alpha_predicted).abs() / alpha_predicted.abs(),
        a,
        ratio_monotone,
        leading,
    })
}
