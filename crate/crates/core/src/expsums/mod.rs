//! The arithmetic exponential sums: each has a direct definition and, where
//! one exists, an independent fast evaluation.

use num_complex::Complex64;
use serde::Serialize;

pub mod gauss;
pub mod roots;
pub mod salie_avg;
pub mod shat;
pub mod usum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    ExplicitFormula,
    Multiplicative,
    GaussReduction,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BruteForce => "brute_force",
            Method::ExplicitFormula => "explicit_formula",
            Method::Multiplicative => "multiplicative",
            Method::GaussReduction => "gauss_reduction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumValue {
    pub value: Complex64,
    pub method: Method,
    pub modulus: u64,
}

impl SumValue {
    pub fn new(value: Complex64, method: Method, modulus: u64) -> Self {
        SumValue { value, method, modulus }
    }
}
