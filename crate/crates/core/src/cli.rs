//! Configuration, experiment runners and CSV/manifest output for the binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::characters::enumerate_characters;
use crate::counter::{count, CountOptions, Weight};
use crate::delta::{BumpWeight, DeltaKernel};
use crate::densities::{nu_factor, sigma_p, singular_series};
use crate::error::{Error, Result};
use crate::expsums::salie_avg::{eta, f_c_profile, SPLIT_LIMIT};
use crate::expsums::shat::{s_hat_gauss, s_hat_split};
use crate::expsums::usum::{gamma_const, root_sums, twist_root_sums};
use crate::expsums::Method;
use crate::forms::{new_form, new_problem, CountingProblem, Vec3};
use crate::predictor::{fit_and_compare, leading_constants, secondary_constants, SecondaryOptions, MAX_B};

pub const MAX_Q: u64 = 3000;
pub const MAX_USUM_X: u64 = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "qf3delta", version, about = "Integral points on ternary quadratic equations F(x) = m")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Exact weighted point counts over the B grid.
    Count,
    /// Main term, fitted coefficients and optional secondary constants.
    Predict,
    /// Local densities σ_p, Ĝ and the Ŝ_q(0) Euler factors.
    Densities,
    /// Ŝ_q(c) two ways for q ≤ q_max.
    Expsum,
    /// F_c(X)/X against η(c).
    SalieAvg,
    /// U-sums against their Γ constants.
    Usum,
    /// Residuals of the delta-symbol identity.
    DeltaCheck,
    /// Every experiment above into one directory.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Count => "count",
            Command::Predict => "predict",
            Command::Densities => "densities",
            Command::Expsum => "expsum",
            Command::SalieAvg => "salie-avg",
            Command::Usum => "usum",
            Command::DeltaCheck => "delta-check",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// (a11, a22, a33, a12, a13, a23) with even cross coefficients.
    pub form: [i64; 6],
    pub m: i64,
    #[serde(default = "one")]
    pub l: u64,
    #[serde(default)]
    pub gamma: Vec3,
    #[serde(default = "half")]
    pub theta: f64,
}

fn one() -> u64 {
    1
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountConfig {
    /// Count with the indicator of [−B, B]³ instead of the bump.
    pub sharp: bool,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig { sharp: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncations {
    pub c_max: i64,
    pub u_max: u64,
    pub k_max: u64,
    pub k_depth: u32,
    /// Compute 𝒦, b and a in `predict` (slow for large c_max).
    pub secondary: bool,
}

impl Default for Truncations {
    fn default() -> Self {
        let d = SecondaryOptions::default();
        Truncations { c_max: d.c_max, u_max: d.u_max, k_max: d.k_max, k_depth: d.k_depth, secondary: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpsumConfig {
    pub q_max: u64,
    pub c_list: Vec<Vec3>,
}

impl Default for ExpsumConfig {
    fn default() -> Self {
        ExpsumConfig { q_max: 100, c_list: vec![[0, 0, 0], [1, 0, 0], [1, 2, 2]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SalieConfig {
    pub c_list: Vec<Vec3>,
    pub x_grid: Vec<u64>,
}

impl Default for SalieConfig {
    fn default() -> Self {
        SalieConfig { c_list: vec![[1, 0, 0], [1, 1, 0]], x_grid: vec![1000, 10_000, 100_000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsumConfig {
    pub c: Vec3,
    pub l1: u64,
    pub l2: u64,
    /// Every character of this modulus is used.
    pub chi_modulus: u64,
    pub x_grid: Vec<u64>,
}

impl Default for UsumConfig {
    fn default() -> Self {
        UsumConfig { c: [1, 0, 0], l1: 1, l2: 1, chi_modulus: 1, x_grid: vec![1000, 10_000, 100_000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaConfig {
    pub q_list: Vec<u64>,
    pub n_max: i64,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig { q_list: vec![4, 6, 8, 12, 16], n_max: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    /// Primes to tabulate besides those dividing mΩ.
    pub extra_primes: Vec<u64>,
    pub t_max: u32,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { extra_primes: vec![3, 5, 7], t_max: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default = "BumpWeight::reference")]
    pub weight: BumpWeight,
    pub b_grid: Vec<u64>,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub count: CountConfig,
    #[serde(default)]
    pub truncations: Truncations,
    #[serde(default)]
    pub expsum: ExpsumConfig,
    #[serde(default)]
    pub salie_avg: SalieConfig,
    #[serde(default)]
    pub usum: UsumConfig,
    #[serde(default)]
    pub delta_check: DeltaConfig,
    #[serde(default)]
    pub densities: DensityConfig,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn problem(&self) -> Result<CountingProblem> {
        let p = &self.problem;
        new_problem(new_form(p.form)?, p.m, p.l, p.gamma, p.theta)
    }

    pub fn weight(&self) -> Result<BumpWeight> {
        let w = &self.weight;
        BumpWeight::new(w.center, w.radius, w.amplitude)
    }

    /// Every precondition and budget, checked before any computation.
    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        self.weight()?;
        if self.b_grid.is_empty() {
            return config_err("b_grid is empty");
        }
        if let Some(&b) = self.b_grid.iter().find(|&&b| b == 0 || b > MAX_B) {
            return config_err(format!("b_grid value {b} outside [1, {MAX_B}]"));
        }
        if !(0.0..2.0).contains(&self.problem.theta) {
            return config_err("theta must lie in [0, 2)");
        }
        let t = &self.truncations;
        if t.c_max < 1 || t.u_max < 1 || t.k_max < 1000 || t.k_depth < 4 {
            return config_err("truncations need c_max ≥ 1, u_max ≥ 1, k_max ≥ 1000, k_depth ≥ 4");
        }
        if self.expsum.q_max == 0 || self.expsum.q_max > MAX_Q {
            return config_err(format!("expsum.q_max must lie in [1, {MAX_Q}]"));
        }
        if self.salie_avg.x_grid.iter().any(|&x| x == 0 || x > SPLIT_LIMIT) {
            return config_err(format!("salie_avg.x_grid values must lie in [1, {SPLIT_LIMIT}]"));
        }
        if self.salie_avg.c_list.contains(&[0, 0, 0]) {
            return config_err("salie_avg.c_list must not contain 0");
        }
        let u = &self.usum;
        if u.x_grid.iter().any(|&x| x == 0 || x > MAX_USUM_X) || u.l1 == 0 || u.l2 == 0 || u.chi_modulus == 0 {
            return config_err(format!("usum needs l1, l2, chi_modulus ≥ 1 and x_grid in [1, {MAX_USUM_X}]"));
        }
        let d = &self.delta_check;
        if d.q_list.is_empty() || d.q_list.iter().any(|&q| q < 2) || !(1..=10_000).contains(&d.n_max) {
            return config_err("delta_check needs Q ≥ 2 and 1 ≤ n_max ≤ 10000");
        }
        if self.densities.t_max > 6 || self.densities.extra_primes.iter().any(|&p| !crate::arith::is_prime(p)) {
            return config_err("densities needs t_max ≤ 6 and prime extra_primes");
        }
        Ok(())
    }
}

/// Numbers at 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A CSV produced in memory so it can be hashed before being written.
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
    }
}

fn int<T: ToString>(x: T) -> String {
    x.to_string()
}

fn vec3(c: &Vec3) -> [String; 3] {
    c.map(int)
}

/// Output of one experiment: CSV tables plus a JSON summary.
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub timings: BTreeMap<String, f64>,
}

impl Artifacts {
    fn new() -> Artifacts {
        Artifacts { tables: Vec::new(), summary: BTreeMap::new(), timings: BTreeMap::new() }
    }

    fn merge(&mut self, other: Artifacts) {
        self.tables.extend(other.tables);
        self.summary.extend(other.summary);
        self.timings.extend(other.timings);
    }
}

fn json<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
}

pub fn run_count(cfg: &ExperimentConfig, workers: usize) -> Result<Artifacts> {
    let problem = cfg.problem()?;
    let weight = if cfg.count.sharp { Weight::SharpBox } else { Weight::Bump(cfg.weight()?) };
    let mut t = Table::new("count.csv", &["B", "sharp_count", "weighted_count"]);
    let mut out = Artifacts::new();
    let mut warnings = Vec::new();
    for &b in &cfg.b_grid {
        let r = count(&problem, b, &weight, &CountOptions { workers, sample: 0 })?;
        t.push(vec![int(b), int(r.sharp_count), fmt_f64(r.weighted_count)]);
        out.timings.insert(format!("count.B={b}"), r.elapsed);
        warnings.extend(r.warnings);
    }
    out.tables.push(t);
    out.summary.insert("count_warnings".into(), json(&warnings));
    Ok(out)
}

pub fn run_predict(cfg: &ExperimentConfig, workers: usize) -> Result<Artifacts> {
    let problem = cfg.problem()?;
    let weight = cfg.weight()?;
    let mut out = Artifacts::new();
    let tr = &cfg.truncations;
    let secondary = if tr.secondary {
        let t0 = Instant::now();
        let opts = SecondaryOptions { c_max: tr.c_max, u_max: tr.u_max, k_max: tr.k_max, k_depth: tr.k_depth, ..Default::default() };
        let s = secondary_constants(&problem, &weight, &opts)?;
        out.timings.insert("predict.secondary".into(), t0.elapsed().as_secs_f64());
        Some(s)
    } else {
        None
    };
    let report = fit_and_compare(&problem, &weight, &cfg.b_grid, secondary.as_ref().map(|s| s.a), workers)?;
    let mut t = Table::new("predict.csv", &["B", "exact", "main_term", "secondary", "ratio"]);
    for r in &report.rows {
        t.push(vec![int(r.b), fmt_f64(r.exact), fmt_f64(r.main_term), fmt_f64(r.secondary), fmt_f64(r.ratio)]);
        out.timings.insert(format!("predict.B={}", r.b), r.seconds);
    }
    out.tables.push(t);
    out.summary.insert(
        "predict".into(),
        serde_json::json!({
            "alpha_hat": report.alpha_hat,
            "beta_hat": report.beta_hat,
            "alpha_predicted": report.alpha_predicted,
            "alpha_relative_error": report.alpha_relative_error,
            "ratio_monotone": report.ratio_monotone,
            "singular_integral": report.leading.singular_integral,
            "singular_series": report.leading.singular_series,
            "secondary": secondary.as_ref().map(json),
        }),
    );
    Ok(out)
}

pub fn run_densities(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let problem = cfg.problem()?;
    let mut primes: Vec<u64> = crate::arith::factorize(problem.m_omega())?.primes().collect();
    primes.extend(&cfg.densities.extra_primes);
    primes.sort_unstable();
    primes.dedup();
    let mut t = Table::new("densities.csv", &["p", "numerator", "denominator", "k"]);
    let mut nu = Table::new("nu_factors.csv", &["p", "t_max", "nu_factor", "p4e_sigma_p"]);
    for &p in &primes {
        let d = sigma_p(&problem, p)?;
        t.push(vec![int(p), int(d.value.numer()), int(d.value.denom()), int(d.level)]);
        let e = crate::arith::ord(p, problem.l) as i32;
        let target = (p as f64).powi(4 * e) * d.to_f64();
        nu.push(vec![int(p), int(cfg.densities.t_max), fmt_f64(nu_factor(&problem, p, cfg.densities.t_max)?), fmt_f64(target)]);
    }
    let mut out = Artifacts::new();
    out.tables.push(t);
    out.tables.push(nu);
    let g = singular_series(&problem)?;
    out.summary.insert(
        "singular_series".into(),
        serde_json::json!({
            "value": g.value,
            "finite_part": format!("{}/{}", g.finite_part.numer(), g.finite_part.denom()),
        }),
    );
    Ok(out)
}

fn cplx(z: Complex64) -> [String; 2] {
    [fmt_f64(z.re), fmt_f64(z.im)]
}

pub fn run_expsum(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let problem = cfg.problem()?;
    let mut t = Table::new("expsum.csv", &["q", "c1", "c2", "c3", "gauss_re", "gauss_im", "split_re", "split_im", "deviation"]);
    for c in &cfg.expsum.c_list {
        for q in 1..=cfg.expsum.q_max {
            let g = s_hat_gauss(&problem, q, c).value;
            let (s, dev) = match s_hat_split(&problem, q, c) {
                Ok(v) => (v.value, (v.value - g).norm() / g.norm().max(1.0)),
                Err(_) => (Complex64::new(f64::NAN, f64::NAN), f64::NAN),
            };
            let [c1, c2, c3] = vec3(c);
            let [gr, gi] = cplx(g);
            let [sr, si] = cplx(s);
            t.push(vec![int(q), c1, c2, c3, gr, gi, sr, si, fmt_f64(dev)]);
        }
    }
    let mut out = Artifacts::new();
    out.tables.push(t);
    Ok(out)
}

pub fn run_salie_avg(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let problem = cfg.problem()?;
    let mut f = Table::new("salie_avg.csv", &["c1", "c2", "c3", "X", "re", "im", "re_over_x"]);
    let mut e = Table::new("eta.csv", &["c1", "c2", "c3", "case", "eta_re", "eta_im", "last_shell"]);
    let tr = &cfg.truncations;
    for c in &cfg.salie_avg.c_list {
        for (x, v) in f_c_profile(&problem, c, &cfg.salie_avg.x_grid, Method::Multiplicative)? {
            let [c1, c2, c3] = vec3(c);
            let [re, im] = cplx(v);
            f.push(vec![c1, c2, c3, int(x), re, im, fmt_f64(v.re / x as f64)]);
        }
        if problem.square_case {
            let h = eta(&problem, c, tr.u_max, tr.k_max)?;
            let [c1, c2, c3] = vec3(c);
            let [re, im] = cplx(h.value);
            let case = serde_json::to_value(h.case).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            e.push(vec![c1, c2, c3, case, re, im, fmt_f64(h.last_shell)]);
        }
    }
    let mut out = Artifacts::new();
    out.tables.push(f);
    out.tables.push(e);
    Ok(out)
}

pub fn run_usum(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let problem = cfg.problem()?;
    let u = &cfg.usum;
    let x_max = u.x_grid.iter().copied().max().unwrap_or(0);
    let chars = enumerate_characters(u.chi_modulus)?;
    // Validates the levels once before the long table.
    crate::expsums::usum::u_sum(&problem, u.l1, u.l2, &u.c, &chars[0], 0)?;
    let table = root_sums(&problem, u.l1, u.l2, &u.c, x_max);
    let mut t = Table::new("usum.csv", &["chi", "X", "re", "im", "re_over_x", "gamma_re", "gamma_im"]);
    for (i, chi) in chars.iter().enumerate() {
        let gamma = gamma_const(&problem, chi, u.l1, u.l2, &u.c, cfg.truncations.k_max).map(|g| g.value).ok();
        let gamma = gamma.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        for &x in &u.x_grid {
            let v = twist_root_sums(&table, chi, x);
            let [re, im] = cplx(v);
            let [gr, gi] = cplx(gamma);
            t.push(vec![int(i), int(x), re, im, fmt_f64(v.re / x as f64), gr, gi]);
        }
    }
    let mut out = Artifacts::new();
    out.tables.push(t);
    Ok(out)
}

pub fn run_delta_check(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let d = &cfg.delta_check;
    let mut t = Table::new("delta_check.csv", &["Q", "n", "c_q", "residual"]);
    let mut worst: f64 = 0.0;
    for &q in &d.q_list {
        let k = DeltaKernel::new(q as f64)?;
        for n in -d.n_max..=d.n_max {
            let r = k.delta_residual(n, k.required_q_max(n))?;
            if n != 0 {
                worst = worst.max(r.abs());
            }
            t.push(vec![int(q), int(n), fmt_f64(k.c_q()), fmt_f64(r)]);
        }
    }
    let mut out = Artifacts::new();
    out.tables.push(t);
    out.summary.insert("delta_check_max_residual".into(), json(&worst));
    Ok(out)
}

pub fn run_experiment(command: Command, cfg: &ExperimentConfig, workers: usize) -> Result<Artifacts> {
    match command {
        Command::Count => run_count(cfg, workers),
        Command::Predict => run_predict(cfg, workers),
        Command::Densities => run_densities(cfg),
        Command::Expsum => run_expsum(cfg),
        Command::SalieAvg => run_salie_avg(cfg),
        Command::Usum => run_usum(cfg),
        Command::DeltaCheck => run_delta_check(cfg),
        Command::Report => {
            let mut all = Artifacts::new();
            for c in [Command::DeltaCheck, Command::Densities, Command::Expsum, Command::SalieAvg, Command::Usum, Command::Count, Command::Predict] {
                all.merge(run_experiment(c, cfg, workers)?);
            }
            if cfg.problem()?.square_case {
                all.summary.insert("leading".into(), json(&leading_constants(&cfg.problem()?, &cfg.weight()?)?));
            }
            Ok(all)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub workers: usize,
    pub outputs: BTreeMap<String, String>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub timings: BTreeMap<String, f64>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// Load, validate, run, write CSVs and manifest.json; returns the manifest.
pub fn run(command: Command, config_path: &Path, out_dir: &Path, workers_override: Option<usize>) -> Result<Manifest> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let text = fs::read(config_path).map_err(|e| io_err(config_path, e))?;
    let cfg = ExperimentConfig::parse(&String::from_utf8_lossy(&text))?;
    let workers = workers_override.unwrap_or(cfg.workers);
    let artifacts = if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run_experiment(command, &cfg, workers))?
    } else {
        run_experiment(command, &cfg, 0)?
    };
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut outputs = BTreeMap::new();
    for t in &artifacts.tables {
        let bytes = t.to_bytes()?;
        let path = out_dir.join(&t.name);
        fs::write(&path, &bytes).map_err(|e| io_err(&path, e))?;
        outputs.insert(t.name.clone(), sha256_hex(&bytes));
    }
    let manifest = Manifest {
        tool: "qf3delta",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: command.name(),
        config_sha256: sha256_hex(&text),
        config: cfg,
        workers,
        outputs,
        summary: artifacts.summary,
        timings: artifacts.timings,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let path = out_dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Short tag for the first field of an error line.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Budget(_) => "budget",
        Error::Precondition(_) => "precondition",
        Error::NoConvergence(_) => "no_convergence",
        Error::EmptyLocalCondition(_) => "empty_local_condition",
        _ => "invalid",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const REFERENCE: &str = r#"
b_grid = [625, 1250, 2500, 5000, 10000, 20000]

[problem]
form = [1, 1, -1, 0, 0, 0]
m = 1
"#;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::parse(REFERENCE).unwrap();
        assert_eq!(cfg.weight, BumpWeight::reference());
        assert_eq!(cfg.problem.l, 1);
        let empty = REFERENCE.replace("[625, 1250, 2500, 5000, 10000, 20000]", "[]");
        assert!(matches!(ExperimentConfig::parse(&empty), Err(Error::Config(_))));
        let odd = REFERENCE.replace("[1, 1, -1, 0, 0, 0]", "[1, 1, -1, 1, 0, 0]");
        assert_eq!(ExperimentConfig::parse(&odd), Err(Error::OddCrossCoefficient));
        let typo = format!("{REFERENCE}\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::parse(&typo), Err(Error::Config(_))));
        let big = REFERENCE.replace("20000]", "200000]");
        assert!(matches!(ExperimentConfig::parse(&big), Err(Error::Config(_))));
    }

    #[test]
    fn densities_row_for_three() {
        let cfg = ExperimentConfig::parse(REFERENCE).unwrap();
        let a = run_densities(&cfg).unwrap();
        let rows = a.tables[0].rows();
        assert!(rows.contains(&vec!["3".into(), "4".into(), "3".into(), "1".into()]));
    }

    #[test]
    fn delta_check_residuals() {
        let cfg = ExperimentConfig::parse(REFERENCE).unwrap();
        let a = run_delta_check(&cfg).unwrap();
        assert!(a.summary["delta_check_max_residual"].as_f64().unwrap() < 1e-9);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.0 / 3.0).len(), "3.3333333333333331e-1".len());
    }
}
