//! Radially symmetric potentials `Q(r)`, their droplet geometry and the
//! per-mode effective potentials `V_k`.
//!
//! Two families are supported, both constructed so that `Q` is subharmonic
//! with logarithmic growth:
//!
//! * `power:<d>`: `Q(r) = r^{2d}` with `d ≥ 1`;
//! * `evenpoly:<c0>,<c1>,...`: `Q(r) = Σ c_j r^{2j}` with `c_j ≥ 0` for `j ≥ 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric family of a radial potential. Serializes to
/// `{"family":"power","d":2.0}` or `{"family":"evenpoly","coeffs":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Power { d: f64 },
    Evenpoly { coeffs: Vec<f64> },
}

/// A validated radial potential with analytic `Q`, `Q'` and `ΔQ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct RadialPotential {
    family: Family,
}

impl TryFrom<Family> for RadialPotential {
    type Error = Error;
    fn try_from(f: Family) -> Result<Self> {
        make_potential(f)
    }
}

impl From<RadialPotential> for Family {
    fn from(p: RadialPotential) -> Family {
        p.family
    }
}

/// `r^m` using an integer power when the exponent allows it, so that the two
/// families produce identical bits for identical polynomials.
fn pow(r: f64, m: f64) -> f64 {
    if m == m.trunc() && m.abs() <= 1024.0 {
        r.powi(m as i32)
    } else {
        r.powf(m)
    }
}

const SCAN_POINTS: usize = 10_000;
const SCAN_LO: f64 = 1e-6;
const SCAN_HI: f64 = 1e3;
const GROWTH_WINDOW: f64 = 1e6;

impl RadialPotential {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_power(&self) -> bool {
        matches!(self.family, Family::Power { .. })
    }

    /// Exponent `d` for the power family.
    pub fn power_d(&self) -> Option<f64> {
        match self.family {
            Family::Power { d } => Some(d),
            Family::Evenpoly { .. } => None,
        }
    }

    pub fn q(&self, r: f64) -> f64 {
        match &self.family {
            Family::Power { d } => pow(r, 2.0 * d),
            Family::Evenpoly { coeffs } => {
                coeffs.iter().enumerate().map(|(j, &c)| if j == 0 { c } else { c * r.powi(2 * j as i32) }).sum()
            }
        }
    }

    /// `Q'(r)`.
    pub fn dq(&self, r: f64) -> f64 {
        match &self.family {
            Family::Power { d } => (2.0 * d) * pow(r, 2.0 * d - 1.0),
            Family::Evenpoly { coeffs } => {
                coeffs.iter().enumerate().skip(1).map(|(j, &c)| (2.0 * j as f64 * c) * r.powi(2 * j as i32 - 1)).sum()
            }
        }
    }

    /// `ΔQ(r) = (r Q'(r))' / r`.
    pub fn lap(&self, r: f64) -> f64 {
        match &self.family {
            Family::Power { d } => (4.0 * d * d) * pow(r, 2.0 * d - 2.0),
            Family::Evenpoly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &c)| (4.0 * (j * j) as f64 * c) * r.powi(2 * j as i32 - 2))
                .sum(),
        }
    }

    /// `r Q'(r)`, nondecreasing for admissible potentials.
    pub fn rdq(&self, r: f64) -> f64 {
        r * self.dq(r)
    }

    /// CLI descriptor (`power:<d>` / `evenpoly:<c0>,...`).
    pub fn descriptor(&self) -> String {
        self.to_string()
    }

    fn check_subharmonic(&self) -> Result<()> {
        let step = (SCAN_HI / SCAN_LO).ln() / (SCAN_POINTS - 1) as f64;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..SCAN_POINTS {
            let r = SCAN_LO * (step * i as f64).exp();
            let lap = self.lap(r);
            if lap.is_nan() || lap < 0.0 {
                return Err(Error::NotAdmissible(format!("ΔQ({r:e}) = {lap} < 0")));
            }
            let f = self.rdq(r);
            if f < prev - 1e-12 * prev.abs() {
                return Err(Error::NotAdmissible(format!("r Q'(r) decreases near r = {r:e}")));
            }
            prev = f;
        }
        Ok(())
    }

    /// Computes the droplet geometry.
    pub fn droplet(&self) -> Result<Droplet> {
        let outer = self.outer_radius()?;
        let inner = match self.family {
            Family::Power { .. } => 0.0,
            Family::Evenpoly { .. } => self.inner_radius(outer),
        };
        let delta = self.lap(outer) / 4.0;
        if !(delta > 0.0) {
            return Err(Error::NotAdmissible(format!("ΔQ vanishes at the outer edge R0 = {outer}")));
        }
        Ok(Droplet { r0: inner, big_r0: outer, delta, c0: outer * delta * 4f64.ln() })
    }

    /// Smallest root of `r Q'(r) = 2`, bisected to full double precision.
    fn outer_radius(&self) -> Result<f64> {
        let mut hi = 1.0;
        while self.rdq(hi) < 2.0 {
            hi *= 2.0;
            if hi > GROWTH_WINDOW {
                return Err(Error::NotAdmissible(
                    "no solution of r Q'(r) = 2 in the scan window (growth too slow)".into(),
                ));
            }
        }
        let mut lo = 0.0;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.rdq(mid) >= 2.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `inf {r : Q'(s) > 0 for all s > r}` on `[0, R0]`.
    fn inner_radius(&self, outer: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, outer);
        while hi - lo > 1e-12 * outer {
            let mid = 0.5 * (lo + hi);
            if self.dq(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if lo == 0.0 && hi <= 1e-12 * outer {
            0.0
        } else {
            hi
        }
    }

    /// `V_k(r) = Q(r) - (2 - (2k+1)/n) log r`.
    pub fn vk(&self, n: u64, k: u64, r: f64) -> f64 {
        self.q(r) - log_coefficient(n, k) * r.ln()
    }

    /// `V_k'(r)`.
    pub fn vk_prime(&self, n: u64, k: u64, r: f64) -> f64 {
        self.dq(r) - log_coefficient(n, k) / r
    }

    /// Largest `t ∈ [r0, R0]` with `t Q'(t) = 2 - (2k+1)/n`, or `None` when
    /// the right-hand side is not positive.
    pub fn saddle(&self, droplet: &Droplet, n: u64, k: u64) -> Option<f64> {
        let target = log_coefficient(n, k);
        if !(target > 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (droplet.r0, droplet.big_r0);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.rdq(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

/// `2 - (2k+1)/n`.
pub fn log_coefficient(n: u64, k: u64) -> f64 {
    2.0 - (2 * k + 1) as f64 / n as f64
}

/// Validates a family and returns the potential.
pub fn make_potential(family: Family) -> Result<RadialPotential> {
    match &family {
        Family::Power { d } => {
            if !d.is_finite() || *d < 1.0 {
                return Err(Error::InvalidPotential(format!("power requires d >= 1, got {d}")));
            }
        }
        Family::Evenpoly { coeffs } => {
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPotential("non-finite coefficient".into()));
            }
            if coeffs.iter().skip(1).any(|&c| c < 0.0) {
                return Err(Error::InvalidPotential("non-constant coefficients must be >= 0".into()));
            }
            if !coeffs.iter().skip(1).any(|&c| c > 0.0) {
                return Err(Error::InvalidPotential("needs at least one positive non-constant coefficient".into()));
            }
        }
    }
    let p = RadialPotential { family };
    p.check_subharmonic()?;
    let drop = p.droplet()?;
    let v = |r: f64| p.q(r) - 2.0 * r.ln();
    let (a, b, c) = (v(drop.big_r0), v(10.0 * drop.big_r0), v(100.0 * drop.big_r0));
    if !(b > a && c > b) {
        return Err(Error::NotAdmissible("Q(r) - 2 log r does not grow".into()));
    }
    Ok(p)
}

/// Free-function form of [`RadialPotential::droplet`].
pub fn droplet(p: &RadialPotential) -> Result<Droplet> {
    p.droplet()
}

/// `V_k(r)`; errors for `r <= 0` or `k >= n`.
pub fn effective_potential_vk(p: &RadialPotential, n: u64, k: u64, r: f64) -> Result<f64> {
    if n == 0 || k >= n {
        return Err(Error::Domain(format!("need 0 <= k < n, got k = {k}, n = {n}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("V_k needs r > 0, got {r}")));
    }
    Ok(p.vk(n, k, r))
}

/// Free-function form of [`RadialPotential::saddle`].
pub fn saddle_tk(p: &RadialPotential, n: u64, k: u64) -> Result<Option<f64>> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    Ok(p.saddle(&p.droplet()?, n, k))
}

/// Ring `r0 ≤ |z| ≤ R0` and the edge density `δ = ∂∂̄Q(R0) = ΔQ(R0)/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Droplet {
    pub r0: f64,
    #[serde(rename = "R0")]
    pub big_r0: f64,
    pub delta: f64,
    /// `C0 = R0 δ log 4`.
    #[serde(rename = "C0")]
    pub c0: f64,
}

impl fmt::Display for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Power { d } => write!(f, "power:{d}"),
            Family::Evenpoly { coeffs } => {
                write!(f, "evenpoly:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for RadialPotential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let family: Family = serde_json::from_str(s).map_err(|e| Error::Parse(format!("potential JSON: {e}")))?;
            return make_potential(family);
        }
        let (name, args) =
            s.split_once(':').ok_or_else(|| Error::Parse(format!("expected <family>:<args>, got {s:?}")))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?} in {s:?}")));
        let family = match name.trim() {
            "power" => Family::Power { d: num(args)? },
            "evenpoly" => Family::Evenpoly { coeffs: args.split(',').map(num).collect::<Result<_>>()? },
            other => return Err(Error::Parse(format!("unknown potential family {other:?}"))),
        };
        make_potential(family)
    }
}
