//! Smooth weights, the delta-method kernel h(x, y), and the oscillatory and
//! singular integrals built from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{euler_phi, ramanujan_sum};
use crate::error::{invalid, precondition, Error, Result};
use crate::forms::{CountingProblem, TernaryForm, Vec3};
use crate::quad::{adaptive_box2, adaptive_box3, gauss_legendre, integrate_1d, integrate_1d_real, Composite, Estimate, Neumaier};

/// w(t) = amplitude·exp(−1/(1−u²)) with u = |t − center|/radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct BumpWeight {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

impl BumpWeight {
    /// Amplitude 0 is allowed and gives the zero weight.
    pub fn new(center: [f64; 3], radius: f64, amplitude: f64) -> Result<BumpWeight> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid("weight radius must be positive");
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return invalid("weight amplitude must be nonnegative and the center finite");
        }
        Ok(BumpWeight { center, radius, amplitude })
    }

    /// Center (0.6, 0.8, 1.0), radius 1/4, amplitude 1: a patch of the light cone.
    pub fn reference() -> BumpWeight {
        BumpWeight { center: [0.6, 0.8, 1.0], radius: 0.25, amplitude: 1.0 }
    }

    pub fn eval(&self, t: &[f64; 3]) -> f64 {
        let u2 = self.u2(t);
        if u2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - u2)).exp()
        }
    }

    fn u2(&self, t: &[f64; 3]) -> f64 {
        let r2 = self.radius * self.radius;
        (0..3).map(|i| (t[i] - self.center[i]).powi(2)).sum::<f64>() / r2
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn lo(&self) -> [f64; 3] {
        self.center.map(|c| c - self.radius)
    }

    pub fn hi(&self) -> [f64; 3] {
        self.center.map(|c| c + self.radius)
    }

    pub fn scaled(&self, k: f64) -> BumpWeight {
        BumpWeight { amplitude: self.amplitude * k, ..*self }
    }

    pub fn excludes_origin(&self) -> bool {
        self.center.iter().map(|c| c * c).sum::<f64>().sqrt() > self.radius
    }

    /// ∫w = amplitude·4πR³∫₀¹u²e^{−1/(1−u²)}du.
    pub fn mass(&self) -> f64 {
        let radial = integrate_1d_real(|u| if u >= 1.0 { 0.0 } else { u * u * (-1.0 / (1.0 - u * u)).exp() }, 0.0, 1.0, 1e-15)
            .unwrap_or(f64::NAN);
        self.amplitude * 4.0 * PI * self.radius.powi(3) * radial
    }
}

/// Range of F, and bounds on ∇F, sampled over the support of w.
#[derive(Debug, Clone, Copy)]
pub struct SupportStats {
    pub f_min: f64,
    pub f_max: f64,
    pub grad_max: f64,
    pub partial_max: [f64; 3],
    pub partial_min: [f64; 3],
}

pub fn support_stats(weight: &BumpWeight, form: &TernaryForm) -> SupportStats {
    const N: usize = 24;
    let (lo, hi) = (weight.lo(), weight.hi());
    let mut s = SupportStats {
        f_min: f64::INFINITY,
        f_max: f64::NEG_INFINITY,
        grad_max: 0.0,
        partial_max: [0.0; 3],
        partial_min: [f64::INFINITY; 3],
    };
    for i in 0..=N {
        for j in 0..=N {
            for k in 0..=N {
                let t = [i, j, k].map(|x| x as f64 / N as f64);
                let t: [f64; 3] = std::array::from_fn(|a| lo[a] + (hi[a] - lo[a]) * t[a]);
                if weight.u2(&t) > 1.0 {
                    continue;
                }
                let f = form.eval_f64(&t);
                let g = form.gradient_f64(&t);
                s.f_min = s.f_min.min(f);
                s.f_max = s.f_max.max(f);
                s.grad_max = s.grad_max.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
                for a in 0..3 {
                    s.partial_max[a] = s.partial_max[a].max(g[a].abs());
                    s.partial_min[a] = s.partial_min[a].min(g[a].abs());
                }
            }
        }
    }
    // Grid spacing leaves a margin of one step in F.
    let margin = s.grad_max * 2.0 * weight.radius / N as f64;
    s.f_min -= margin;
    s.f_max += margin;
    s
}

fn bump(x: f64) -> f64 {
    if x <= 0.5 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / ((x - 0.5) * (1.0 - x))).exp()
    }
}

/// ω₀ = N·bump on (1/2, 1) and the kernel h(x, y) built from it, for a given Q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaKernel {
    q: f64,
    norm: f64,
    c_q: f64,
}

impl DeltaKernel {
    pub fn new(q: f64) -> Result<DeltaKernel> {
        if !(q >= 1.0 && q.is_finite()) {
            return invalid("Q must be at least 1");
        }
        // The bump peaks at e^{−16}; rescale so the quadrature sees O(1) values.
        let peak = 16f64.exp();
        let mass = integrate_1d_real(|x| bump(x) * peak, 0.5, 1.0, 1e-15)?;
        let mut kernel = DeltaKernel { q, norm: peak / mass, c_q: 1.0 };
        let mut s = Neumaier::default();
        for n in 1..=(q.floor() as u64 + 1) {
            s.add(euler_phi(n) as f64 * kernel.h(n as f64 / q, 0.0));
        }
        kernel.c_q = q * q / s.value();
        Ok(kernel)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// C_Q = Q²/Σ_q φ(q)h(q/Q, 0).
    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    pub fn omega0(&self, x: f64) -> f64 {
        self.norm * bump(x)
    }

    /// h(x, y) = Σ_j (xj)⁻¹(ω₀(xj) − ω₀(|y|/(xj))); x > 0 is assumed.
    pub fn h(&self, x: f64, y: f64) -> f64 {
        let ay = y.abs();
        let j_max = (1f64.max(2.0 * ay) / x).floor() as u64 + 1;
        let mut s = 0.0;
        for j in 1..=j_max {
            let xj = x * j as f64;
            s += (self.omega0(xj) - self.omega0(ay / xj)) / xj;
        }
        s
    }

    pub fn h_eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0) || !y.is_finite() {
            return invalid("h(x, y) needs x > 0");
        }
        Ok(self.h(x, y))
    }

    /// Smallest q_max with h(q/Q, n/Q²) = 0 for all q > q_max.
    pub fn required_q_max(&self, n: i64) -> u64 {
        let y = n.unsigned_abs() as f64 / (self.q * self.q);
        (self.q * 1f64.max(2.0 * y)).floor() as u64 + 1
    }

    /// (1/Q²)Σ_{q ≤ q_max} c_q(n)h(q/Q, n/Q²): zero for n ≠ 0, 1/C_Q for n = 0.
    pub fn delta_residual(&self, n: i64, q_max: u64) -> Result<f64> {
        if q_max < self.required_q_max(n) {
            return precondition(format!("q_max = {q_max} truncates the kernel support (need {})", self.required_q_max(n)));
        }
        let y = n as f64 / (self.q * self.q);
        let mut s = Neumaier::default();
        for q in 1..=q_max {
            let hv = self.h(q as f64 / self.q, y);
            if hv != 0.0 {
                s.add(ramanujan_sum(q, n) as f64 * hv);
            }
        }
        Ok(s.value() / (self.q * self.q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Absolute target for the change between successive refinements.
    pub tol: f64,
    pub max_nodes: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { tol: 1e-8, max_nodes: 1 << 24 }
    }
}

fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * x)
}

/// Starting panels: phase frequency b/r resolved at about two cycles per
/// panel, kernel structure of width r/2 in F at about two per panel.
fn start_panels(weight: &BumpWeight, stats: &SupportStats, b: &[f64; 3], r: f64) -> [usize; 3] {
    let width = 2.0 * weight.radius;
    std::array::from_fn(|i| {
        let cycles = b[i].abs() * width / r;
        let kernel = width * stats.partial_max[i] / r;
        ((cycles / 2.0).max(kernel).ceil() as usize).max(1)
    })
}

fn oscillatory(weight: &BumpWeight, form: &TernaryForm, kernel: &DeltaKernel, shift: f64, b: &[f64; 3], r: f64, opts: &QuadOptions) -> Result<Estimate> {
    if !(r > 0.0) {
        return invalid("r must be positive");
    }
    if weight.is_zero() {
        return Ok(Estimate { value: Complex64::new(0.0, 0.0), error: 0.0, nodes: 0 });
    }
    let stats = support_stats(weight, form);
    let f = |t: &[f64; 3]| {
        let w = weight.eval(t);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let hv = kernel.h(r, form.eval_f64(t) - shift);
        if hv == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        e(-(b[0] * t[0] + b[1] * t[1] + b[2] * t[2]) / r) * (w * hv)
    };
    adaptive_box3(&f, weight.lo(), weight.hi(), start_panels(weight, &stats, b, r), opts.tol, opts.max_nodes)
}

/// Î_r(w; b) = ∫w(t)h(r, F(t))e_r(−b·t)dt.
pub fn i_r(weight: &BumpWeight, form: &TernaryForm, kernel: &DeltaKernel, b: &[f64; 3], r: f64, opts: &QuadOptions) -> Result<Estimate> {
    oscillatory(weight, form, kernel, 0.0, b, r, opts)
}

/// Î*_r(w; b), the same with F replaced by F − m/B².
pub fn i_r_star(
    weight: &BumpWeight,
    form: &TernaryForm,
    kernel: &DeltaKernel,
    m: i64,
    big_b: f64,
    b: &[f64; 3],
    r: f64,
    opts: &QuadOptions,
) -> Result<Estimate> {
    oscillatory(weight, form, kernel, m as f64 / (big_b * big_b), b, r, opts)
}

/// Î_q(w; c) integrated directly in the y variable, x = Ly + λ.
pub fn i_q_hat(problem: &CountingProblem, weight: &BumpWeight, kernel: &DeltaKernel, q: u64, c: &Vec3, big_b: f64, opts: &QuadOptions) -> Result<Estimate> {
    if q == 0 || !(big_b > 0.0) {
        return invalid("i_q_hat needs q ≥ 1 and B > 0");
    }
    if weight.is_zero() {
        return Ok(Estimate { value: Complex64::new(0.0, 0.0), error: 0.0, nodes: 0 });
    }
    let l = problem.l as f64;
    let big_q = kernel.q();
    let lam = problem.lambda.map(|x| x as f64);
    let (lo, hi) = (weight.lo(), weight.hi());
    let y_lo: [f64; 3] = std::array::from_fn(|i| (big_b * lo[i] - lam[i]) / l);
    let y_hi: [f64; 3] = std::array::from_fn(|i| (big_b * hi[i] - lam[i]) / l);
    let x = q as f64 / big_q;
    let denom = l * l * big_q * big_q;
    let f = |y: &[f64; 3]| {
        let xv: [f64; 3] = std::array::from_fn(|i| l * y[i] + lam[i]);
        let w = weight.eval(&xv.map(|v| v / big_b));
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let hv = kernel.h(x, (problem.form.eval_f64(&xv) - problem.m as f64) / denom);
        if hv == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let cy = c[0] as f64 * y[0] + c[1] as f64 * y[1] + c[2] as f64 * y[2];
        e(-cy / (q as f64 * l)) * (w * hv)
    };
    let stats = support_stats(weight, &problem.form);
    let b = c.map(|v| v as f64 / l);
    // One panel finer than the t-side rule, so the two sides use different grids.
    adaptive_box3(&f, y_lo, y_hi, start_panels(weight, &stats, &b, x).map(|p| p + 1), opts.tol * (big_b / l).powi(3), opts.max_nodes)
}

/// The right side of the change of variables t = (Ly + λ)/B, valid when Q = B/L:
/// (B/L)³e_{qL²}(c·λ)Î*_{q/Q}(w; c/L).
pub fn i_q_hat_via_star(
    problem: &CountingProblem,
    weight: &BumpWeight,
    kernel: &DeltaKernel,
    q: u64,
    c: &Vec3,
    big_b: f64,
    opts: &QuadOptions,
) -> Result<Estimate> {
    let l = problem.l as f64;
    if (kernel.q() - big_b / l).abs() > 1e-12 * kernel.q() {
        return precondition("the change of variables needs Q = B/L");
    }
    let b = c.map(|v| v as f64 / l);
    let star = i_r_star(weight, &problem.form, kernel, problem.m, big_b, &b, q as f64 / kernel.q(), opts)?;
    let cl: i64 = (0..3).map(|i| c[i] * problem.lambda[i]).sum();
    let scale = (big_b / l).powi(3);
    let phase = e(cl as f64 / (q as f64 * l * l));
    Ok(Estimate { value: star.value * phase * scale, error: star.error * scale, nodes: star.nodes })
}

/// |Î*_r − Î_r|, integrating the difference of the two integrands directly.
pub fn compare_i_star(weight: &BumpWeight, form: &TernaryForm, kernel: &DeltaKernel, m: i64, big_b: f64, b: &[f64; 3], r: f64) -> Result<f64> {
    let shift = m as f64 / (big_b * big_b);
    if shift == 0.0 || weight.is_zero() {
        return Ok(0.0);
    }
    let stats = support_stats(weight, form);
    let f = |t: &[f64; 3]| {
        let w = weight.eval(t);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let ft = form.eval_f64(t);
        let dh = kernel.h(r, ft - shift) - kernel.h(r, ft);
        e(-(b[0] * t[0] + b[1] * t[1] + b[2] * t[2]) / r) * (w * dh)
    };
    let tol = 1e-4 * shift.abs() * weight.mass();
    let est = adaptive_box3(&f, weight.lo(), weight.hi(), start_panels(weight, &stats, b, r), tol, 1 << 24)?;
    Ok(est.value.norm())
}

/// The coordinate x_i solved for on F = y: the one whose partial derivative
/// stays furthest from zero on the support.
pub fn solving_axis(weight: &BumpWeight, form: &TernaryForm) -> Result<usize> {
    let stats = support_stats(weight, form);
    let (axis, best) = (0..3).map(|i| (i, stats.partial_min[i])).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    if best <= 1e-3 * stats.grad_max.max(1e-300) {
        return precondition("no coordinate with ∂F/∂x_i bounded away from 0 on the support");
    }
    Ok(axis)
}

fn other_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Σ over the solutions x_i of F = y of w/|∂F/∂x_i|, at fixed other coordinates.
fn fibre_density(weight: &BumpWeight, form: &TernaryForm, axis: usize, uv: &[f64; 2], y: f64) -> f64 {
    let a = form.half_hessian();
    let [j, k] = other_axes(axis);
    let mut t = [0.0; 3];
    t[j] = uv[0];
    t[k] = uv[1];
    let alpha = a[axis][axis] as f64;
    let beta = 2.0 * (a[axis][j] as f64 * uv[0] + a[axis][k] as f64 * uv[1]);
    let gamma = form.eval_f64(&t) - y;
    let mut s = 0.0;
    if alpha == 0.0 {
        if beta != 0.0 {
            t[axis] = -gamma / beta;
            s += weight.eval(&t) / beta.abs();
        }
        return s;
    }
    let disc = beta * beta - 4.0 * alpha * gamma;
    if disc <= 0.0 {
        return 0.0;
    }
    let root = disc.sqrt();
    for sign in [-1.0, 1.0] {
        t[axis] = (-beta + sign * root) / (2.0 * alpha);
        let w = weight.eval(&t);
        if w != 0.0 {
            s += w / root;
        }
    }
    s
}

/// g(y) = ∫_{F=y} w/|∂F/∂x_i|, the density of F pushed forward along w.
pub fn level_density(weight: &BumpWeight, form: &TernaryForm, axis: usize, y: f64, tol: f64) -> Result<Estimate> {
    let [j, k] = other_axes(axis);
    let (lo, hi) = (weight.lo(), weight.hi());
    let f = |uv: &[f64; 2]| Complex64::new(fibre_density(weight, form, axis, uv, y), 0.0);
    adaptive_box2(&f, [lo[j], lo[k]], [hi[j], hi[k]], [2, 2], tol, 1 << 24)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularIntegral {
    /// ∫_{F=0} w/|∂F/∂x_axis|.
    pub surface: f64,
    /// ∫_{|θ|≤T}∫w(t)e(θF(t))dt dθ = ∫w(t)sin(2πTF(t))/(πF(t))dt.
    pub theta_form: f64,
    /// |surface − theta_form|/surface.
    pub discrepancy: f64,
    pub axis: usize,
    pub theta_cutoff: f64,
}

fn check_cone(weight: &BumpWeight, form: &TernaryForm) -> Result<SupportStats> {
    let stats = support_stats(weight, form);
    if !(stats.f_min < 0.0 && stats.f_max > 0.0) {
        return precondition("weight support misses the cone F = 0");
    }
    Ok(stats)
}

pub fn singular_integral_surface(weight: &BumpWeight, form: &TernaryForm) -> Result<f64> {
    if weight.is_zero() {
        return Ok(0.0);
    }
    check_cone(weight, form)?;
    let axis = solving_axis(weight, form)?;
    Ok(level_density(weight, form, axis, 0.0, 1e-14 * weight.amplitude)?.value.re)
}

/// Default θ cutoff: the Fourier decay of the pushed-forward density scales
/// inversely with the range of F on the support.
pub fn default_theta_cutoff(weight: &BumpWeight, form: &TernaryForm) -> f64 {
    let s = support_stats(weight, form);
    (34.0 / (s.f_max - s.f_min)).clamp(8.0, 400.0)
}

pub fn singular_integral_theta(weight: &BumpWeight, form: &TernaryForm, cutoff: f64, tol: f64) -> Result<f64> {
    if weight.is_zero() {
        return Ok(0.0);
    }
    let stats = check_cone(weight, form)?;
    let f = |t: &[f64; 3]| {
        let w = weight.eval(t);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = 2.0 * PI * cutoff * form.eval_f64(t);
        let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        Complex64::new(w * 2.0 * cutoff * sinc, 0.0)
    };
    let width = 2.0 * weight.radius;
    let panels = stats.partial_max.map(|g| ((cutoff * width * g / 4.0).ceil() as usize).max(1));
    Ok(adaptive_box3(&f, weight.lo(), weight.hi(), panels, tol, 1 << 26)?.value.re)
}

/// I(w) by the surface integral and by the truncated θ-integral.
pub fn singular_integral(weight: &BumpWeight, form: &TernaryForm) -> Result<SingularIntegral> {
    if weight.is_zero() {
        return Ok(SingularIntegral { surface: 0.0, theta_form: 0.0, discrepancy: 0.0, axis: 0, theta_cutoff: 0.0 });
    }
    let surface = singular_integral_surface(weight, form)?;
    let axis = solving_axis(weight, form)?;
    let cutoff = default_theta_cutoff(weight, form);
    let theta_form = singular_integral_theta(weight, form, cutoff, 1e-8 * surface.abs())?;
    Ok(SingularIntegral {
        surface,
        theta_form,
        discrepancy: (surface - theta_form).abs() / surface.abs(),
        axis,
        theta_cutoff: cutoff,
    })
}

/// g(y) sampled on a uniform grid and read back by 8-point Lagrange interpolation.
#[derive(Debug, Clone)]
pub struct DensityTable {
    y0: f64,
    dy: f64,
    values: Vec<f64>,
    /// ∫g = ∫w, by the trapezoid rule on the grid.
    pub mass: f64,
}

const INTERP: usize = 8;

fn interpolate(y0: f64, dy: f64, values: &[f64], y: f64) -> f64 {
    let x = (y - y0) / dy;
    if x < -1.0 || x > values.len() as f64 {
        return 0.0;
    }
    let base = x.floor() as i64 - (INTERP as i64 / 2 - 1);
    let get = |i: i64| if i < 0 || i >= values.len() as i64 { 0.0 } else { values[i as usize] };
    let frac = x - base as f64;
    if (frac - frac.round()).abs() < 1e-14 {
        return get(base + frac.round() as i64);
    }
    // Barycentric weights for equispaced nodes 0..INTERP−1.
    let mut num = 0.0;
    let mut den = 0.0;
    let mut binom = 1.0;
    for k in 0..INTERP {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let wk = sign * binom / (frac - k as f64);
        num += wk * get(base + k as i64);
        den += wk;
        binom = binom * (INTERP - 1 - k) as f64 / (k + 1) as f64;
    }
    num / den
}

impl DensityTable {
    pub fn new(weight: &BumpWeight, form: &TernaryForm, intervals: usize) -> Result<DensityTable> {
        let stats = check_cone(weight, form)?;
        let axis = solving_axis(weight, form)?;
        let dy = (stats.f_max - stats.f_min) / intervals as f64;
        let tol = 1e-10 * weight.amplitude;
        // Fix the 2D rule at the resolution needed for the middle level.
        let probe = level_density(weight, form, axis, 0.5 * (stats.f_min + stats.f_max), tol)?;
        let per_axis = ((probe.nodes as f64).sqrt().round() as usize / 16).max(1);
        let [j, k] = other_axes(axis);
        let (lo, hi) = (weight.lo(), weight.hi());
        let rules = [Composite::new(lo[j], hi[j], per_axis, 16), Composite::new(lo[k], hi[k], per_axis, 16)];
        let values: Vec<f64> = (0..=intervals)
            .map(|i| {
                let y = stats.f_min + i as f64 * dy;
                let f = |uv: &[f64; 2]| Complex64::new(fibre_density(weight, form, axis, uv, y), 0.0);
                crate::quad::tensor2(&f, &rules).re
            })
            .collect();
        let mut mass = Neumaier::default();
        for v in &values {
            mass.add(v * dy);
        }
        Ok(DensityTable { y0: stats.f_min, dy, values, mass: mass.value() })
    }

    pub fn eval(&self, y: f64) -> f64 {
        interpolate(self.y0, self.dy, &self.values, y)
    }

    pub fn y_max_abs(&self) -> f64 {
        self.y0.abs().max((self.y0 + self.dy * (self.values.len() - 1) as f64).abs())
    }
}

/// Î_r(w; 0) by the co-area formula: ∫h(r, y)g(y)dy, expanded over the
/// j-sum of h so that only values g(±rjs), s ∈ (1/2, 1), are needed.
pub fn i_r_zero(table: &DensityTable, kernel: &DeltaKernel, r: f64) -> f64 {
    let (sx, sw) = s_rule();
    let mut head = Neumaier::default();
    let mut j = 1u64;
    while (r * j as f64) < 1.0 {
        let rj = r * j as f64;
        head.add(kernel.omega0(rj) / rj);
        j += 1;
    }
    let mut tail = Neumaier::default();
    let j_max = (2.0 * table.y_max_abs() / r).floor() as u64 + 1;
    for j in 1..=j_max {
        let rj = r * j as f64;
        for (s, w) in sx.iter().zip(&sw) {
            tail.add(w * kernel.omega0(*s) * (table.eval(rj * s) + table.eval(-rj * s)));
        }
    }
    table.mass * head.value() - tail.value()
}

fn s_rule() -> (Vec<f64>, Vec<f64>) {
    let c = Composite::new(0.5, 1.0, 4, 16);
    (c.nodes, c.weights)
}

fn k_segment(table: &DensityTable, kernel: &DeltaKernel, a: f64, b: f64) -> Result<f64> {
    let tol = 1e-12 * table.mass.max(1e-300);
    Ok(integrate_1d(|u| Complex64::new(i_r_zero(table, kernel, u.exp()), 0.0), a.ln(), b.ln(), tol)?.value.re)
}

fn r_max(table: &DensityTable) -> f64 {
    1f64.max(2.0 * table.y_max_abs())
}

/// K(v) = I(w)log v + ∫_v^{r_max} Î_r(w; 0)/r dr, with I(w) = g(0).
pub fn k_of_v(table: &DensityTable, kernel: &DeltaKernel, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return invalid("K(v) needs v > 0");
    }
    Ok(table.eval(0.0) * v.ln() + k_segment(table, kernel, v, r_max(table))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KZero {
    pub value: f64,
    /// |K(v_min) − K(2v_min)|.
    pub error: f64,
    pub samples: Vec<(f64, f64)>,
}

/// K(0) from K(2^{−k}), k = 2..=k_max, extrapolated with the observed
/// contraction rate of successive differences.
pub fn k0(weight: &BumpWeight, form: &TernaryForm, kernel: &DeltaKernel, k_max: u32) -> Result<KZero> {
    if weight.is_zero() {
        return Ok(KZero { value: 0.0, error: 0.0, samples: vec![] });
    }
    if k_max < 4 {
        return invalid("k0 needs k_max ≥ 4");
    }
    let table = DensityTable::new(weight, form, 512)?;
    let i_w = table.eval(0.0);
    let mut samples = Vec::new();
    let mut upper = r_max(&table);
    let mut integral = 0.0;
    for k in 2..=k_max {
        let v = 0.5f64.powi(k as i32);
        integral += k_segment(&table, kernel, v, upper)?;
        upper = v;
        samples.push((v, i_w * v.ln() + integral));
    }
    let n = samples.len();
    let (last, prev, prev2) = (samples[n - 1].1, samples[n - 2].1, samples[n - 3].1);
    let (d1, d2) = (prev - prev2, last - prev);
    let error = d2.abs();
    if error > 1e-4 * last.abs().max(table.mass) {
        return Err(Error::NoConvergence(format!("K(v) still moving by {error:.3e} at v = 2^-{k_max}")));
    }
    let rho = if d1 != 0.0 { d2 / d1 } else { 0.0 };
    let value = if rho.abs() < 0.9 { last + d2 * rho / (1.0 - rho) } else { last };
    Ok(KZero { value, error, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JOptions {
    /// Lower cutoff r₀ of the r-integral.
    pub r_lo: f64,
    /// Cap on tensor nodes per axis at each r.
    pub nodes_cap: usize,
}

impl Default for JOptions {
    fn default() -> Self {
        JOptions { r_lo: 1e-4, nodes_cap: 160 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JValue {
    pub c: Vec3,
    pub value: Complex64,
    /// Lowest r actually integrated; resolution limits can raise it above r₀.
    pub r_min: f64,
    /// Estimate of ∫_0^{r_min}|Î_r|dr/r assuming |Î_r| ≲ r^{1/2} below r_min.
    pub tail: f64,
}

const R_NODES: usize = 8;

/// h(r, ·) tabulated on [y_lo, y_hi] at spacing r/64.
fn h_table(kernel: &DeltaKernel, r: f64, y_lo: f64, y_hi: f64) -> (f64, f64, Vec<f64>) {
    let dy = r / 64.0;
    let n = ((y_hi - y_lo) / dy).ceil() as usize + 1;
    let y0 = y_lo - 4.0 * dy;
    (y0, dy, (0..n + 8).map(|i| kernel.h(r, y0 + i as f64 * dy)).collect())
}

/// 𝒥(c) = ∫Î_r(w; c/L)dr/r for a list of c, all from one tensor grid per
/// r node: the phase e(−c·t/(Lr)) factors over coordinates, so the sums are
/// taken one axis at a time over the distinct coordinate values.
pub fn j_batch(weight: &BumpWeight, form: &TernaryForm, kernel: &DeltaKernel, cs: &[Vec3], l: u64, opts: &JOptions) -> Result<Vec<JValue>> {
    if cs.iter().any(|c| *c == [0, 0, 0]) {
        return invalid("𝒥(c) needs c ≠ 0");
    }
    if weight.is_zero() || cs.is_empty() {
        return Ok(cs.iter().map(|&c| JValue { c, value: Complex64::new(0.0, 0.0), r_min: opts.r_lo, tail: 0.0 }).collect());
    }
    let stats = support_stats(weight, form);
    let width = 2.0 * weight.radius;
    let lf = l as f64;
    let r_max = 1f64.max(2.0 * stats.f_min.abs().max(stats.f_max.abs()));
    let top = r_max.log2().ceil() as i32;
    let bottom = opts.r_lo.log2().floor() as i32;
    let (gx, gw) = gauss_legendre(R_NODES);
    let values: [Vec<i64>; 3] = std::array::from_fn(|a| {
        let mut v: Vec<i64> = cs.iter().map(|c| c[a]).collect();
        v.sort_unstable();
        v.dedup();
        v
    });
    let index = |a: usize, x: i64| values[a].binary_search(&x).unwrap();
    let needed = |c: &Vec3, r: f64| c.iter().map(|&x| 6.0 * x.unsigned_abs() as f64 * width / (lf * r)).fold(0.0, f64::max) + 16.0;
    let mut acc = vec![Complex64::new(0.0, 0.0); cs.len()];
    let mut alive = vec![true; cs.len()];
    let mut r_min = vec![r_max; cs.len()];
    let mut last = vec![0.0f64; cs.len()];
    for octave in (bottom..top).rev() {
        let (a, b) = ((2f64.powi(octave)).ln(), (2f64.powi(octave + 1)).ln());
        let rs: Vec<(f64, f64)> = (0..R_NODES).map(|k| (0.5 * (a + b) + 0.5 * (b - a) * gx[k], 0.5 * (b - a) * gw[k])).collect();
        let r_lo_oct = 2f64.powi(octave);
        let n_h = 4.0 * width * stats.grad_max / (0.5 * r_lo_oct);
        if n_h > opts.nodes_cap as f64 {
            break;
        }
        let in_octave: Vec<usize> = (0..cs.len()).filter(|&i| alive[i] && needed(&cs[i], r_lo_oct) <= opts.nodes_cap as f64).collect();
        for i in 0..cs.len() {
            if alive[i] && !in_octave.contains(&i) {
                alive[i] = false;
            }
        }
        if in_octave.is_empty() {
            break;
        }
        let n = in_octave.iter().map(|&i| needed(&cs[i], r_lo_oct)).fold(n_h, f64::max).min(opts.nodes_cap as f64);
        let panels = ((n / 16.0).ceil() as usize).max(1);
        let rules: [Composite; 3] = std::array::from_fn(|ax| Composite::new(weight.lo()[ax], weight.hi()[ax], panels, 16));
        let mut oct_vals = vec![Complex64::new(0.0, 0.0); cs.len()];
        let mut smallest = vec![0.0f64; cs.len()];
        for &(u, du) in &rs {
            let r = u.exp();
            let sums = separable_sums(weight, form, kernel, &stats, &rules, &values, r, lf);
            for &i in &in_octave {
                let c = &cs[i];
                let v = sums[index(0, c[0])][index(1, c[1])][index(2, c[2])];
                oct_vals[i] += v * du;
                if smallest[i] == 0.0 || r < smallest[i] {
                    smallest[i] = r;
                    last[i] = v.norm();
                }
            }
        }
        for &i in &in_octave {
            acc[i] += oct_vals[i];
            r_min[i] = r_lo_oct;
        }
    }
    Ok((0..cs.len())
        .map(|i| JValue { c: cs[i], value: acc[i], r_min: r_min[i], tail: 2.0 * last[i] })
        .collect())
}

/// Σ_t w(t)h(r, F(t))e(−c·t/(Lr)) on the tensor grid, for all combinations of
/// the listed coordinate values.
fn separable_sums(
    weight: &BumpWeight,
    form: &TernaryForm,
    kernel: &DeltaKernel,
    stats: &SupportStats,
    rules: &[Composite; 3],
    values: &[Vec<i64>; 3],
    r: f64,
    l: f64,
) -> Vec<Vec<Vec<Complex64>>> {
    let (y0, dy, ht) = h_table(kernel, r, stats.f_min, stats.f_max);
    let n = rules[0].len();
    let phases: [Vec<Vec<Complex64>>; 3] = std::array::from_fn(|a| {
        values[a].iter().map(|&v| rules[a].nodes.iter().map(|&t| e(-(v as f64) * t / (l * r))).collect()).collect()
    });
    let (v0, v1, v2) = (values[0].len(), values[1].len(), values[2].len());
    // First pass over the first coordinate: a[v0][k1][k2].
    let mut first = vec![Complex64::new(0.0, 0.0); v0 * n * n];
    for k0 in 0..n {
        let x = rules[0].nodes[k0];
        for k1 in 0..n {
            let y = rules[1].nodes[k1];
            for k2 in 0..n {
                let t = [x, y, rules[2].nodes[k2]];
                let w = weight.eval(&t);
                if w == 0.0 {
                    continue;
                }
                let hv = interpolate(y0, dy, &ht, form.eval_f64(&t));
                let f = w * hv * rules[0].weights[k0] * rules[1].weights[k1] * rules[2].weights[k2];
                if f == 0.0 {
                    continue;
                }
                for a in 0..v0 {
                    first[(a * n + k1) * n + k2] += phases[0][a][k0] * f;
                }
            }
        }
    }
    let mut out = vec![vec![vec![Complex64::new(0.0, 0.0); v2]; v1]; v0];
    for a in 0..v0 {
        for b in 0..v1 {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            for k1 in 0..n {
                let p = phases[1][b][k1];
                for k2 in 0..n {
                    row[k2] += first[(a * n + k1) * n + k2] * p;
                }
            }
            for c in 0..v2 {
                let mut s = Complex64::new(0.0, 0.0);
                for k2 in 0..n {
                    s += row[k2] * phases[2][c][k2];
                }
                out[a][b][c] = s;
            }
        }
    }
    out
}

pub fn j_c(weight: &BumpWeight, form: &TernaryForm, kernel: &DeltaKernel, c: &Vec3, l: u64, opts: &JOptions) -> Result<JValue> {
    Ok(j_batch(weight, form, kernel, &[*c], l, opts)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{new_form, new_problem};

    fn pyth() -> TernaryForm {
        new_form([1, 1, -1, 0, 0, 0]).unwrap()
    }

    #[test]
    fn omega0_is_normalized() {
        let k = DeltaKernel::new(8.0).unwrap();
        let m = integrate_1d_real(|x| k.omega0(x), 0.5, 1.0, 1e-14).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert_eq!(k.omega0(0.5), 0.0);
        assert_eq!(k.omega0(1.2), 0.0);
    }

    #[test]
    fn kernel_support() {
        let k = DeltaKernel::new(4.0).unwrap();
        assert_eq!(k.h(1.5, 0.0), 0.0);
        assert!((k.h(0.6, 0.0) - k.omega0(0.6) / 0.6).abs() < 1e-15);
        assert_eq!(k.h(3.0, 0.5), 0.0);
        assert!(k.h_eval(0.0, 1.0).is_err());
    }

    #[test]
    fn delta_identity() {
        for q in [4.0, 6.0, 8.0, 12.0, 16.0] {
            let k = DeltaKernel::new(q).unwrap();
            for n in (-20i64..=20).filter(|&n| n != 0) {
                let res = k.delta_residual(n, k.required_q_max(n)).unwrap();
                assert!(res.abs() < 1e-9, "Q={q} n={n} {res}");
            }
            let res0 = k.delta_residual(0, k.required_q_max(0)).unwrap();
            assert!((res0 - 1.0 / k.c_q()).abs() < 1e-12);
        }
        let k = DeltaKernel::new(6.0).unwrap();
        assert!(k.delta_residual(7, 3).is_err());
    }

    #[test]
    fn c_q_by_divisor_pairing() {
        // Σ_q φ(q)h(q/Q, 0) = Q·Σ_r ω₀(r/Q).
        for q in [4.0, 8.0, 16.0, 32.0] {
            let k = DeltaKernel::new(q).unwrap();
            let s: f64 = (1..=(q as u64)).map(|r| k.omega0(r as f64 / q)).sum();
            assert!((k.c_q() - q / s).abs() < 1e-12 * k.c_q());
        }
        let diffs: Vec<f64> = [4.0, 8.0, 16.0, 32.0].iter().map(|&q| (DeltaKernel::new(q).unwrap().c_q() - 1.0).abs()).collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
        assert!(diffs[2] < 1e-3);
    }

    #[test]
    fn singular_integral_two_ways() {
        let w = BumpWeight::reference();
        let f = pyth();
        let s = singular_integral(&w, &f).unwrap();
        assert!(s.surface > 0.0);
        assert!(s.discrepancy < 1e-4, "{s:?}");
        assert_eq!(s.axis, 2);
        let zero = singular_integral(&w.scaled(0.0), &f).unwrap();
        assert_eq!(zero.surface, 0.0);
        let off = BumpWeight::new([0.0, 0.0, 1.0], 0.25, 1.0).unwrap();
        assert!(singular_integral(&off, &f).is_err());
    }

    #[test]
    fn surface_integral_is_the_push_forward_density_at_zero() {
        let w = BumpWeight::reference();
        let t = DensityTable::new(&w, &pyth(), 512).unwrap();
        assert!((t.mass - w.mass()).abs() < 1e-10 * w.mass());
        let s = singular_integral_surface(&w, &pyth()).unwrap();
        assert!((t.eval(0.0) - s).abs() < 1e-7 * s);
    }

    #[test]
    fn coarea_matches_direct_quadrature() {
        let w = BumpWeight::reference();
        let f = pyth();
        let k = DeltaKernel::new(10.0).unwrap();
        let t = DensityTable::new(&w, &f, 512).unwrap();
        for r in [0.5, 0.9] {
            let direct = i_r(&w, &f, &k, &[0.0; 3], r, &QuadOptions { tol: 1e-9, max_nodes: 1 << 24 }).unwrap();
            let co = i_r_zero(&t, &k, r);
            assert!((direct.value.re - co).abs() < 1e-7, "r={r}: {} vs {co}", direct.value.re);
        }
    }

    #[test]
    fn k_of_v_settles() {
        let w = BumpWeight::reference();
        let k = DeltaKernel::new(10.0).unwrap();
        let z = k0(&w, &pyth(), &k, 7).unwrap();
        let n = z.samples.len();
        let d1 = (z.samples[n - 2].1 - z.samples[n - 3].1).abs();
        let d2 = (z.samples[n - 1].1 - z.samples[n - 2].1).abs();
        assert!(d2 < 0.5 * d1 || d2 < 1e-10, "{:?}", z.samples);
        assert!(z.value.is_finite());
    }

    #[test]
    fn change_of_variables() {
        let f = pyth();
        let w = BumpWeight::reference();
        let opts = QuadOptions { tol: 1e-10, max_nodes: 1 << 24 };
        for (l, gamma, big_b, q, c) in [(1u64, [0, 0, 0], 12.0, 6u64, [1, 0, 0]), (2, [1, 0, 0], 16.0, 5, [0, 1, -1]), (1, [0, 0, 0], 10.0, 9, [2, -1, 1])] {
            let p = new_problem(f.clone(), 1, l, gamma, 1.0).unwrap();
            let k = DeltaKernel::new(big_b / l as f64).unwrap();
            let lhs = i_q_hat(&p, &w, &k, q, &c, big_b, &opts).unwrap();
            let rhs = i_q_hat_via_star(&p, &w, &k, q, &c, big_b, &opts).unwrap();
            let scale = (big_b / l as f64).powi(3);
            assert!((lhs.value - rhs.value).norm() < 1e-6 * scale, "{lhs:?} {rhs:?}");
        }
    }

    #[test]
    fn trivial_cases() {
        let f = pyth();
        let k = DeltaKernel::new(4.0).unwrap();
        let zero = BumpWeight::reference().scaled(0.0);
        assert_eq!(i_r(&zero, &f, &k, &[1.0, 0.0, 0.0], 0.5, &QuadOptions::default()).unwrap().value, Complex64::new(0.0, 0.0));
        // r beyond max(1, 2 sup|F|) leaves the kernel support.
        let v = i_r(&BumpWeight::reference(), &f, &k, &[0.0; 3], 1.6, &QuadOptions::default()).unwrap();
        assert_eq!(v.value, Complex64::new(0.0, 0.0));
        assert_eq!(compare_i_star(&BumpWeight::reference(), &f, &k, 0, 10.0, &[0.0; 3], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn shifted_integral_converges() {
        let f = pyth();
        let w = BumpWeight::reference();
        let k = DeltaKernel::new(4.0).unwrap();
        let d: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&b| compare_i_star(&w, &f, &k, 1, b, &[1.0, 0.0, 0.0], 0.5).unwrap()).collect();
        assert!(d[1] < d[0] && d[2] < d[1], "{d:?}");
        // Linear in m/B².
        let ratio = d[0] / d[1];
        assert!((ratio - 100.0).abs() < 5.0, "{ratio}");
    }

    #[test]
    fn batch_matches_single_integrals() {
        let f = pyth();
        let w = BumpWeight::reference();
        let k = DeltaKernel::new(10.0).unwrap();
        let opts = JOptions { r_lo: 0.25, nodes_cap: 96 };
        let js = j_batch(&w, &f, &k, &[[1, 0, 0], [0, 2, 1]], 1, &opts).unwrap();
        for j in &js {
            // Same r-rule, with every node integrated adaptively.
            let (gx, gw) = gauss_legendre(R_NODES);
            let mut direct = Complex64::new(0.0, 0.0);
            let mut oct = j.r_min.log2().round() as i32;
            while 2f64.powi(oct) < 1.5 {
                let (a, b) = ((2f64.powi(oct)).ln(), (2f64.powi(oct + 1)).ln());
                for i in 0..R_NODES {
                    let u = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
                    let bv = j.c.map(|x| x as f64);
                    let v = i_r(&w, &f, &k, &bv, u.exp(), &QuadOptions { tol: 1e-9, max_nodes: 1 << 23 }).unwrap();
                    direct += v.value * 0.5 * (b - a) * gw[i];
                }
                oct += 1;
            }
            assert!((direct - j.value).norm() < 1e-6, "{:?} {direct} {}", j.c, j.value);
        }
    }
}
