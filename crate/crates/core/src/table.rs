//! Sampled CDFs and their CSV / JSON encodings.

use std::fmt;

use serde::ser::Serializer;
use serde::Serialize;

/// What a [`DistributionTable`] tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// `P[|z|_n ≤ x]` on an x-grid.
    Gap,
    /// `P[|z|_n^{(l)} ≤ x]` on an x-grid.
    Order(u32),
    /// `F_n(ξ)` on a ξ-grid.
    RescaledGap,
    RescaledOrder(u32),
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableKind::Gap => write!(f, "gap"),
            TableKind::Order(l) => write!(f, "order({l})"),
            TableKind::RescaledGap => write!(f, "rescaled-gap"),
            TableKind::RescaledOrder(l) => write!(f, "rescaled-order({l})"),
        }
    }
}

impl Serialize for TableKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub kind: TableKind,
    pub potential: String,
    pub n: u64,
    pub grid: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DistributionTable {
    /// CSV with header `grid,prob`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,prob\n");
        for (x, p) in self.grid.iter().zip(&self.probs) {
            out.push_str(&fmt_g15(*x));
            out.push(',');
            out.push_str(&fmt_g15(*p));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serializes")
    }

    pub fn is_monotone(&self) -> bool {
        self.probs.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Formats like C's `%.15g`.
pub fn fmt_g15(v: f64) -> String {
    fmt_g(v, 15)
}

/// Formats like C's `%.<digits>g`.
pub fn fmt_g(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, v);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
