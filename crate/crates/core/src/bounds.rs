//! Calculators for the quantitative bounds around 0/1 polytopes: the PSD
//! extension complexity lower bound, the counting argument behind it, the
//! coefficient bound for 0/1 facets and the polygon parameters.
//!
//! Everything is evaluated in the log₂ domain so that doubly exponential
//! quantities stay finite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_NOTE: &str = "log means log2 throughout";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub formula: String,
    pub inputs: BTreeMap<String, f64>,
    pub log2_value: f64,
    /// Present when the value is below 2⁶⁴.
    pub value: Option<f64>,
    /// Scientific rendering, always present.
    pub decimal: String,
    pub assumptions: Vec<String>,
    pub extras: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(formula: &str, inputs: &[(&str, f64)], log2_value: f64) -> Self {
        Self {
            formula: formula.to_string(),
            inputs: inputs.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            log2_value,
            value: (log2_value < 64.0).then(|| log2_value.exp2()),
            decimal: scientific(log2_value),
            assumptions: vec![LOG_NOTE.to_string()],
            extras: BTreeMap::new(),
        }
    }

    fn assume(mut self, note: &str) -> Self {
        self.assumptions.push(note.to_string());
        self
    }

    fn extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }
}

/// `2^x` as `m.mmmmme±k`.
pub fn scientific(log2_value: f64) -> String {
    if log2_value == f64::NEG_INFINITY {
        return "0".into();
    }
    let log10 = log2_value * std::f64::consts::LOG10_2;
    let mut exp = log10.floor();
    let mut mant = 10f64.powf(log10 - exp);
    if mant >= 9.999995 {
        mant /= 10.0;
        exp += 1.0;
    }
    format!("{mant:.5}e{exp}")
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Invalid(msg.into()))
    }
}

/// `2^{n/4} / (3n log n)^{1/4}`.
pub fn xc01_lower_bound(n: u32) -> Result<BoundReport> {
    require(n >= 2, "n must be at least 2")?;
    let nf = n as f64;
    let log2 = nf / 4.0 - (3.0 * nf * nf.log2()).log2() / 4.0;
    Ok(BoundReport::new("xc01", &[("n", nf)], log2))
}

/// `log₂((n+1)^{(n+1)/2})`, the largest facet coefficient of a 0/1 polytope.
fn log2_worst_delta(n: f64) -> f64 {
    (n + 1.0) / 2.0 * (n + 1.0).log2()
}

/// Both sides of `2^{2^n} − 1 ≤ Δ^{2(n+R²+1)(n+R²)}` with
/// `Δ = (n+1)^{(n+1)/2}`. The reported value is the right side.
pub fn counting_capacity(n: u32, r: f64) -> Result<BoundReport> {
    require(n >= 1, "n must be at least 1")?;
    require(r >= 0.0 && r.is_finite(), "R must be a nonnegative number")?;
    let nf = n as f64;
    let m = nf + r * r;
    let right = 2.0 * (m + 1.0) * m * log2_worst_delta(nf);
    // log₂(2^{2^n} − 1) = 2^n + log₂(1 − 2^{−2^n})
    let pow = 2f64.powi(n as i32);
    let left = pow + (-(-pow).exp2()).ln_1p() / std::f64::consts::LN_2;
    Ok(BoundReport::new("counting", &[("n", nf), ("R", r)], right)
        .assume("the o(1) term in the exponent is dropped")
        .assume("no truth claim: this only compares the two sides")
        .extra("left_log2", left)
        .extra("right_log2", right)
        .extra("right_dominates", f64::from(u8::from(right >= left))))
}

/// `(d / log d)^{1/4}`, without the unspecified constant.
pub fn polygon_bound(d: u32) -> Result<BoundReport> {
    require(d >= 3, "d must be at least 3")?;
    let df = d as f64;
    let log2 = (df.log2() - df.log2().log2()) / 4.0;
    let p = polygon_instance_params(d)?;
    Ok(BoundReport::new("polygon", &[("d", df)], log2)
        .assume("asymptotic bound: the leading constant is unspecified and omitted")
        .extra("N", p.big_n as f64)
        .extra("box_x", p.box_x as f64)
        .extra("box_y", p.box_y as f64)
        .extra("delta_lemma_log2", p.delta_lemma_log2)
        .extra("delta_proof_log2", p.delta_proof_log2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonParams {
    pub n: u32,
    /// `N = 4d²`.
    pub big_n: u64,
    /// Vertices lie in `[box_x] × [box_y] = [2d] × [4d²]`.
    pub box_x: u64,
    pub box_y: u64,
    /// `log₂ ((n+1)N)^{2n} = log₂ (12d²)⁴`.
    pub delta_lemma_log2: f64,
    /// `log₂ (12d²)²`, the value used in the polygon argument itself.
    pub delta_proof_log2: f64,
    pub note: String,
}

pub fn polygon_instance_params(d: u32) -> Result<PolygonParams> {
    require(d >= 3, "d must be at least 3")?;
    let d = d as u64;
    let big_n = 4 * d * d;
    let base = (3 * big_n) as f64;
    Ok(PolygonParams {
        n: 2,
        big_n,
        box_x: 2 * d,
        box_y: big_n,
        delta_lemma_log2: 4.0 * base.log2(),
        delta_proof_log2: 2.0 * base.log2(),
        note: "the general lemma gives (12d^2)^4 at n = 2; the polygon argument uses (12d^2)^2; both are reported".into(),
    })
}

/// `Δ = ((n+1)N)^{2n}` for integer points in `[N]ⁿ`.
pub fn lemma_delta(n: u32, big_n: u64) -> Result<BoundReport> {
    require(n >= 1 && big_n >= 1, "n and N must be positive")?;
    let log2 = 2.0 * n as f64 * ((n as f64 + 1.0) * big_n as f64).log2();
    Ok(BoundReport::new("lemma_delta", &[("n", n as f64), ("N", big_n as f64)], log2))
}

/// `log₂((n+1)^{(n+1)/2})` against `n log₂ n`.
pub fn worst_case_coeff_bound(n: u32) -> Result<BoundReport> {
    require(n >= 1, "n must be at least 1")?;
    let nf = n as f64;
    let log2 = log2_worst_delta(nf);
    let cap = nf * nf.log2();
    Ok(BoundReport::new("worst_case", &[("n", nf)], log2)
        .extra("n_log2_n", cap)
        .extra("holds", f64::from(u8::from(log2 <= cap))))
}
