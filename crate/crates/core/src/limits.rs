//! Limit laws at the hard edge, the spectral-radius rescalings and the
//! three-band decomposition of the power-case overlap sum.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gap::{order_cdf_from_overlaps, K_MAX};
use crate::modes::{overlaps, EnsembleSpec, ModeTable};
use crate::specfun::{log_gamma_prefactor, reg_lower_gamma};
use crate::sum::pairwise_sum;

const LN_4: f64 = 2.0 * std::f64::consts::LN_2;

fn check_xi(xi: f64) -> Result<()> {
    if !(xi <= 0.0) {
        return Err(Error::Domain(format!("limit laws are supported on xi <= 0, got {xi}")));
    }
    Ok(())
}

/// `F_hard(ξ) = e^ξ`.
pub fn f_hard(xi: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok(xi.exp())
}

/// `F^{(l)}_hard(ξ) = e^ξ Σ_{k<l} (-ξ)^k / k!`.
pub fn f_hard_order(l: u32, xi: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::Domain("order l must be >= 1".into()));
    }
    check_xi(xi)?;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..l {
        term *= -xi / k as f64;
        sum += term;
    }
    Ok((xi.exp() * sum).min(1.0))
}

/// Limit law of the `l`-th largest rescaled modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LimitLaw {
    pub l: u32,
}

impl LimitLaw {
    pub fn new(l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::Domain("order l must be >= 1".into()));
        }
        Ok(LimitLaw { l })
    }

    pub fn cdf(&self, xi: f64) -> Result<f64> {
        f_hard_order(self.l, xi)
    }
}

/// Which rescaling to use for `ω_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RescalingKind {
    /// `ω = n d (d^{1/(2d)} x - 1) log 4`, power potentials only.
    Power,
    /// `ω = R0 n δ (x - R0) log 4`.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapParams {
    Power {
        d: f64,
    },
    Radial {
        #[serde(rename = "R0")]
        big_r0: f64,
        delta: f64,
    },
}

/// Affine map between radii `x` and rescaled values `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescalingMap {
    pub params: MapParams,
    pub n: u64,
}

impl RescalingMap {
    pub fn power(d: f64, n: u64) -> Self {
        RescalingMap { params: MapParams::Power { d }, n }
    }

    pub fn radial(big_r0: f64, delta: f64, n: u64) -> Self {
        RescalingMap { params: MapParams::Radial { big_r0, delta }, n }
    }

    pub fn forward(&self, x: f64) -> f64 {
        let n = self.n as f64;
        match self.params {
            MapParams::Power { d } => n * d * (d.powf(1.0 / (2.0 * d)) * x - 1.0) * LN_4,
            MapParams::Radial { big_r0, delta } => big_r0 * n * delta * (x - big_r0) * LN_4,
        }
    }

    pub fn inverse(&self, xi: f64) -> f64 {
        let n = self.n as f64;
        match self.params {
            MapParams::Power { d } => (1.0 / d).powf(1.0 / (2.0 * d)) * (1.0 + xi / (d * n * LN_4)),
            MapParams::Radial { big_r0, delta } => big_r0 + xi / (n * big_r0 * delta * LN_4),
        }
    }

    /// Outer radius the map sends to 0.
    pub fn edge(&self) -> f64 {
        self.inverse(0.0)
    }
}

pub fn make_rescaling(spec: &EnsembleSpec, kind: RescalingKind) -> Result<RescalingMap> {
    match kind {
        RescalingKind::Power => {
            let d = spec.potential.power_d().ok_or_else(|| {
                Error::Inconsistent(format!("power rescaling requested for {}", spec.potential.descriptor()))
            })?;
            Ok(RescalingMap::power(d, spec.n))
        }
        RescalingKind::Radial => Ok(RescalingMap::radial(spec.droplet.big_r0, spec.droplet.delta, spec.n)),
    }
}

/// The three partial sums `S_n`, `ε_{n,1}`, `ε_{n,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumDecomposition {
    #[serde(rename = "S_n")]
    pub s_n: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl SumDecomposition {
    pub fn total(&self) -> f64 {
        self.s_n + self.eps1 + self.eps2
    }
}

/// Splits `Σ_k (t + n/d)^{(n-k)/d - 1} e^{-(t+n/d)} / γ((n-k)/d, n/d)` into
/// the bands `k ≤ α√n`, `α√n < k ≤ n/2` and `n/2 < k ≤ n-1`.
pub fn hard_edge_sum_decomposition(n: u64, d: f64, t: f64, alpha: f64) -> Result<SumDecomposition> {
    if n < 2 {
        return Err(Error::Domain("n must be at least 2".into()));
    }
    if !(d >= 1.0) || !d.is_finite() {
        return Err(Error::Domain(format!("d must be >= 1, got {d}")));
    }
    let nf = n as f64;
    let cut = alpha * nf.sqrt();
    if !(cut > 0.0 && cut < nf / 2.0) {
        return Err(Error::Domain(format!("need 0 < alpha sqrt(n) < n/2, got alpha sqrt(n) = {cut}")));
    }
    let y = t + nf / d;
    if !(t <= 0.0) || !(y > 0.0) {
        return Err(Error::Domain(format!("t = {t} must satisfy -n/d < t <= 0")));
    }
    let first_end = cut.floor() as u64;
    let half = n / 2;
    let band = |name: &str, lo: u64, hi: u64| -> Result<f64> {
        if lo > hi {
            return Ok(0.0);
        }
        let terms: Vec<f64> = (lo..hi + 1)
            .into_par_iter()
            .map(|k| {
                let a = (n - k) as f64 / d;
                let p = reg_lower_gamma(a, nf / d)?;
                Ok((log_gamma_prefactor(a, y) - y.ln() - p.ln()).exp())
            })
            .collect::<Result<_>>()?;
        let s = pairwise_sum(&terms);
        if !s.is_finite() {
            return Err(Error::Domain(format!("band {name} produced a non-finite sum")));
        }
        Ok(s)
    };
    Ok(SumDecomposition {
        s_n: band("S_n", 0, first_end)?,
        eps1: band("eps1", first_end + 1, half)?,
        eps2: band("eps2", half + 1, n - 1)?,
    })
}

/// `α = log n`, the default band cut.
pub fn default_alpha(n: u64) -> f64 {
    (n as f64).ln()
}

/// One row of a finite-n vs limit comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub xi: f64,
    pub finite_n: f64,
    pub limit: f64,
    pub abs_err: f64,
}

/// Finite-n rescaled order-`l` CDF against its limit on a ξ-grid.
pub fn compare_with_limit(
    spec: &EnsembleSpec,
    table: &ModeTable,
    law: LimitLaw,
    kind: RescalingKind,
    grid: &[f64],
) -> Result<Vec<ComparisonRow>> {
    let map = make_rescaling(spec, kind)?;
    let l = law.l as usize;
    if l > K_MAX.min(spec.n as usize) {
        return Err(Error::Domain(format!("order l = {l} exceeds the count truncation")));
    }
    grid.iter()
        .map(|&xi| {
            let limit = law.cdf(xi)?;
            let x = map.inverse(xi);
            let finite_n = order_cdf_from_overlaps(&overlaps(spec, table, x)?, l);
            Ok(ComparisonRow { xi, finite_n, limit, abs_err: (finite_n - limit).abs() })
        })
        .collect()
}

/// `max_ξ |finite-n CDF - limit CDF|` over the grid.
pub fn sup_deviation(
    spec: &EnsembleSpec,
    table: &ModeTable,
    law: LimitLaw,
    kind: RescalingKind,
    grid: &[f64],
) -> Result<f64> {
    Ok(compare_with_limit(spec, table, law, kind, grid)?.iter().map(|r| r.abs_err).fold(0.0, f64::max))
}

/// `min:max:step` grid, inclusive of `max` up to rounding.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?} in grid {spec:?}")));
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [lo, hi, step] => make_grid(num(lo)?, num(hi)?, num(step)?),
        _ => Err(Error::Parse(format!("grid must be <value> or <min>:<max>:<step>, got {spec:?}"))),
    }
}

/// Evenly spaced grid `lo, lo + step, ..., hi`; points are computed as
/// `lo + i·step` and the last one snaps to `hi`.
pub fn make_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::Parse(format!("invalid grid {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=count).map(|i| lo + i as f64 * step).collect();
    if let Some(last) = g.last_mut() {
        if (*last - hi).abs() < 1e-9 * step {
            *last = hi;
        }
    }
    Ok(g)
}

/// The default ξ-grid `[-8, 0]` with step 0.05.
pub fn default_xi_grid() -> Vec<f64> {
    make_grid(-8.0, 0.0, 0.05).expect("static grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::build_mode_table;
    use crate::specfun::reg_upper_gamma;

    fn spec(s: &str, n: u64) -> EnsembleSpec {
        EnsembleSpec::new(s.parse().unwrap(), n).unwrap()
    }

    #[test]
    fn hard_laws() {
        assert_eq!(f_hard(0.0).unwrap(), 1.0);
        assert!((f_hard(-1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-16);
        assert!((f_hard(-std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-16);
        assert!(f_hard(0.5).is_err());
        assert_eq!(f_hard_order(1, -1.3).unwrap(), f_hard(-1.3).unwrap());
        assert!((f_hard_order(2, -1.0).unwrap() - 0.735_758_882_342_884_6).abs() < 1e-15);
        assert!((f_hard_order(3, -2.0).unwrap() - 5.0 * (-2f64).exp()).abs() < 1e-15);
        assert!(f_hard_order(0, -1.0).is_err());
    }

    #[test]
    fn order_law_is_upper_incomplete_gamma() {
        // F^{(l)}(ξ) = Q(l, -ξ)
        for l in 1..8u32 {
            for i in 0..40 {
                let xi = -0.5 * i as f64;
                let want = if xi == 0.0 { 1.0 } else { reg_upper_gamma(l as f64, -xi).unwrap() };
                assert!((f_hard_order(l, xi).unwrap() - want).abs() < 1e-14, "l={l} xi={xi}");
            }
        }
    }

    #[test]
    fn order_laws_are_monotone_and_nested() {
        for l in 1..6u32 {
            let mut prev = 0.0;
            for i in 0..=400 {
                let xi = -20.0 + 0.05 * i as f64;
                let v = f_hard_order(l, xi).unwrap();
                assert!(v >= prev);
                if l > 1 {
                    assert!(v >= f_hard_order(l - 1, xi).unwrap());
                }
                prev = v;
            }
        }
    }

    #[test]
    fn rescaling_maps() {
        let s = spec("power:1", 100);
        let m = make_rescaling(&s, RescalingKind::Power).unwrap();
        assert_eq!(m.forward(1.0), 0.0);
        let e = spec("evenpoly:0,1,0.25", 100);
        assert!(make_rescaling(&e, RescalingKind::Power).is_err());
        let r = make_rescaling(&e, RescalingKind::Radial).unwrap();
        assert!(r.forward(e.droplet.big_r0 - 1e-3) < 0.0);
        assert!(r.forward(e.droplet.big_r0).abs() < 1e-12);
    }

    #[test]
    fn power_and_radial_maps_coincide() {
        for d in [1.0, 1.5, 2.0, 3.0, 5.0] {
            let s = spec(&format!("power:{d}"), 257);
            let p = make_rescaling(&s, RescalingKind::Power).unwrap();
            let r = make_rescaling(&s, RescalingKind::Radial).unwrap();
            for i in 0..=100 {
                let x = s.droplet.big_r0 * i as f64 / 100.0;
                let (a, b) = (p.forward(x), r.forward(x));
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "d={d} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sum_decomposition_ginibre() {
        let n = 10_000;
        let s = hard_edge_sum_decomposition(n, 1.0, 0.0, default_alpha(n)).unwrap();
        assert!((s.s_n - std::f64::consts::LN_2).abs() < 0.05, "{s:?}");
        assert!(s.eps1 + s.eps2 <= 1e-3);
        let s3 = hard_edge_sum_decomposition(1000, 1.0, 0.0, default_alpha(1000)).unwrap();
        assert!(s3.eps2 <= 1e-6);
        assert!(hard_edge_sum_decomposition(100, 1.0, 0.0, 10.0).is_err());
        assert!(hard_edge_sum_decomposition(100, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn sum_ratio_tends_to_d() {
        let mut prev = f64::INFINITY;
        for n in [100u64, 1000, 10_000] {
            let a = hard_edge_sum_decomposition(n, 1.0, 0.0, default_alpha(n)).unwrap();
            let b = hard_edge_sum_decomposition(n, 2.0, 0.0, default_alpha(n)).unwrap();
            let err = (b.s_n / a.s_n - 2.0).abs();
            assert!(err < prev, "n={n}: {err}");
            prev = err;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn sup_deviation_shrinks_with_n() {
        let grid = make_grid(-8.0, 0.0, 0.05).unwrap();
        let law = LimitLaw::new(1).unwrap();
        let dev = |n| {
            let s = spec("power:1", n);
            let t = build_mode_table(&s).unwrap();
            sup_deviation(&s, &t, law, RescalingKind::Radial, &grid).unwrap()
        };
        let one = dev(1);
        assert!(one > 0.0 && one <= 1.0);
        assert!(dev(4096) < dev(1024));
        let s = spec("power:1", 64);
        let t = build_mode_table(&s).unwrap();
        let rows = compare_with_limit(&s, &t, law, RescalingKind::Power, &[0.0]).unwrap();
        assert_eq!(rows[0].abs_err, 0.0);
    }

    #[test]
    fn grids() {
        let g = default_xi_grid();
        assert_eq!(g.len(), 161);
        assert_eq!(g[0], -8.0);
        assert_eq!(*g.last().unwrap(), 0.0);
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a").is_err());
    }
}
