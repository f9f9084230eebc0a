//! Exact finite-n distributions built from the mode overlaps.
//!
//! Because the modes are independent, the number of moduli beyond `x` is a
//! Poisson-binomial variable with success probabilities `x_{n,j}(x)`. The
//! gap probability is its mass at zero and the `l`-th order statistic CDF is
//! the mass on `{0, ..., l-1}`. The probability generating function
//! `∏_j (1 - x_j + x_j s)` is the same object as `E ∏(1 + λ 1{|z_j| > x})`
//! at `s = 1 + λ`, so the coefficients below equal the `λ`-derivatives at
//! `λ = -1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::{build_mode_table, overlaps, EnsembleSpec, ModeTable};
use crate::potential::make_potential;
use crate::potential::Family;
use crate::sum::pairwise_sum;
use crate::table::{DistributionTable, TableKind};

/// Default truncation of the count distribution.
pub const K_MAX: usize = 64;

/// `exp(Σ_j log1p(-x_j))`, exactly 0 if some `x_j = 1`.
pub fn gap_from_overlaps(xs: &[f64]) -> f64 {
    if xs.iter().any(|&x| x >= 1.0) {
        return 0.0;
    }
    let logs: Vec<f64> = xs.iter().map(|&x| (-x).ln_1p()).collect();
    pairwise_sum(&logs).exp()
}

/// `P[|z|_n ≤ x]`.
pub fn gap_cdf(spec: &EnsembleSpec, table: &ModeTable, x: f64) -> Result<f64> {
    Ok(gap_from_overlaps(&overlaps(spec, table, x)?))
}

/// Radius `R0 + ξ / (n C0)` for the radial rescaling.
pub fn radius_at(spec: &EnsembleSpec, xi: f64) -> f64 {
    spec.droplet.big_r0 + xi / (spec.n as f64 * spec.droplet.c0)
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi <= 0.0) {
        return Err(Error::Domain(format!("rescaled CDFs are defined for xi <= 0, got {xi}")));
    }
    Ok(())
}

/// `F_n(ξ) = P[|z|_n ≤ R0 + ξ/(n C0)]`.
pub fn rescaled_gap_cdf(spec: &EnsembleSpec, table: &ModeTable, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    let x = radius_at(spec, xi);
    if let Some(d) = spec.potential.power_d() {
        let alt = (1.0 / d).powf(1.0 / (2.0 * d)) * (1.0 + xi / (d * spec.n as f64 * 4f64.ln()));
        debug_assert!(
            (alt - x).abs() <= 1e-12 * x.abs().max(1.0),
            "power and radial parametrizations disagree: {alt} vs {x}"
        );
    }
    gap_cdf(spec, table, x)
}

/// Poisson-binomial pmf of `#{j : |z_j| > x}` from the success
/// probabilities, keeping counts `0..=kmax`.
pub fn poisson_binomial(xs: &[f64], kmax: usize) -> Vec<f64> {
    let kmax = kmax.min(xs.len());
    let mut p = vec![0.0; kmax + 1];
    p[0] = 1.0;
    let mut top = 0usize;
    for &x in xs {
        let q = 1.0 - x;
        if top < kmax {
            top += 1;
        }
        for k in (1..=top).rev() {
            p[k] = p[k] * q + p[k - 1] * x;
        }
        p[0] *= q;
    }
    p
}

/// `p_{n,k}(x)` for `k = 0..=min(n, 64)`, or for all `k ≤ n` when
/// `untruncated` is set.
pub fn order_counts(spec: &EnsembleSpec, table: &ModeTable, x: f64, untruncated: bool) -> Result<Vec<f64>> {
    let kmax = if untruncated { spec.n as usize } else { K_MAX.min(spec.n as usize) };
    let xs = overlaps(spec, table, x)?;
    let mut p = poisson_binomial(&xs, kmax);
    // the gap term in log space so that it agrees with `gap_cdf` bit for bit
    p[0] = gap_from_overlaps(&xs);
    Ok(p)
}

fn check_order(spec: &EnsembleSpec, l: u32) -> Result<usize> {
    let kmax = K_MAX.min(spec.n as usize);
    if l == 0 || l as usize > kmax {
        return Err(Error::Domain(format!("order l = {l} must lie in 1..={kmax}")));
    }
    Ok(l as usize)
}

/// `P[|z|_n^{(l)} ≤ x] = Σ_{k<l} p_{n,k}(x)`.
pub fn order_cdf(spec: &EnsembleSpec, table: &ModeTable, l: u32, x: f64) -> Result<f64> {
    let l = check_order(spec, l)?;
    let xs = overlaps(spec, table, x)?;
    Ok(order_cdf_from_overlaps(&xs, l))
}

pub(crate) fn order_cdf_from_overlaps(xs: &[f64], l: usize) -> f64 {
    if l == 1 {
        return gap_from_overlaps(xs);
    }
    let mut p = poisson_binomial(xs, l - 1);
    p[0] = gap_from_overlaps(xs);
    pairwise_sum(&p[..l]).min(1.0)
}

/// Order-`l` CDF at the rescaled point `ξ`.
pub fn rescaled_order_cdf(spec: &EnsembleSpec, table: &ModeTable, l: u32, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    order_cdf(spec, table, l, radius_at(spec, xi))
}

/// Tabulates `P[|z|^{(l)}_n ≤ x]` over a raw radius grid.
pub fn order_table(spec: &EnsembleSpec, table: &ModeTable, l: u32, grid: &[f64]) -> Result<DistributionTable> {
    check_order(spec, l)?;
    let probs = grid.iter().map(|&x| order_cdf(spec, table, l, x)).collect::<Result<Vec<_>>>()?;
    Ok(DistributionTable {
        kind: if l == 1 { TableKind::Gap } else { TableKind::Order(l) },
        potential: spec.potential.descriptor(),
        n: spec.n,
        grid: grid.to_vec(),
        probs,
    })
}

/// Tabulates the rescaled order-`l` CDF over a ξ-grid.
pub fn rescaled_order_table(spec: &EnsembleSpec, table: &ModeTable, l: u32, grid: &[f64]) -> Result<DistributionTable> {
    check_order(spec, l)?;
    let probs = grid.iter().map(|&xi| rescaled_order_cdf(spec, table, l, xi)).collect::<Result<Vec<_>>>()?;
    Ok(DistributionTable {
        kind: if l == 1 { TableKind::RescaledGap } else { TableKind::RescaledOrder(l) },
        potential: spec.potential.descriptor(),
        n: spec.n,
        grid: grid.to_vec(),
        probs,
    })
}

/// One-point intensity `(1/n) R_n(r)` of the hard-edge Ginibre ensemble
/// from a `power:1` mode table.
pub fn ginibre_intensity_at(spec: &EnsembleSpec, table: &ModeTable, r: f64) -> Result<f64> {
    table.check(spec)?;
    if spec.potential.power_d() != Some(1.0) {
        return Err(Error::Domain("the intensity is implemented for power:1 only".into()));
    }
    if !(r > 0.0) || r > 1.0 {
        return Err(Error::Domain(format!("radius must lie in (0, 1], got {r}")));
    }
    let n = spec.n as f64;
    let lr = r.ln();
    let terms: Vec<f64> = table
        .modes
        .par_iter()
        .with_min_len(64)
        .map(|m| (2.0 * m.j as f64 * lr - n * r * r - m.log_norm).exp())
        .collect();
    Ok(pairwise_sum(&terms) / n)
}

/// `𝓡_n(ζ) = R_n(1 + ζ/√n) / n` for real `ζ ≤ 0`.
pub fn ginibre_rescaled_intensity(n: u64, zeta: f64) -> Result<f64> {
    let spec = EnsembleSpec::new(make_potential(Family::Power { d: 1.0 })?, n)?;
    let table = build_mode_table(&spec)?;
    ginibre_rescaled_intensity_with(&spec, &table, zeta)
}

/// Same as [`ginibre_rescaled_intensity`], reusing a prebuilt table.
pub fn ginibre_rescaled_intensity_with(spec: &EnsembleSpec, table: &ModeTable, zeta: f64) -> Result<f64> {
    if !(zeta <= 0.0) {
        return Err(Error::Domain(format!("zeta must be <= 0, got {zeta}")));
    }
    let r = 1.0 + zeta / (spec.n as f64).sqrt();
    if r <= 0.0 {
        return Err(Error::Domain(format!("z = 1 + zeta/sqrt(n) = {r} is not positive")));
    }
    ginibre_intensity_at(spec, table, r)
}

/// Both sides of `Σ log(1 - x_j) ≈ -Σ x_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Linearization {
    pub sum_log1p_neg: f64,
    pub neg_sum: f64,
    pub discrepancy: f64,
}

pub fn log_product_linearization(xs: &[f64]) -> Result<Linearization> {
    if let Some(&bad) = xs.iter().find(|&&x| !(0.0..1.0).contains(&x)) {
        return Err(Error::Domain(format!("overlap {bad} outside [0, 1)")));
    }
    let logs: Vec<f64> = xs.iter().map(|&x| (-x).ln_1p()).collect();
    let sum_log1p_neg = pairwise_sum(&logs);
    let neg_sum = -pairwise_sum(xs);
    Ok(Linearization { sum_log1p_neg, neg_sum, discrepancy: (sum_log1p_neg - neg_sum).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{build_mode_table_with, overlap_xnk, Route};

    fn setup(s: &str, n: u64) -> (EnsembleSpec, ModeTable) {
        let spec = EnsembleSpec::new(s.parse().unwrap(), n).unwrap();
        let table = build_mode_table(&spec).unwrap();
        (spec, table)
    }

    #[test]
    fn n1_closed_form() {
        let (spec, table) = setup("power:1", 1);
        for i in 0..100 {
            let x = (i as f64 + 0.5) / 100.0;
            let want = (1.0 - (-x * x).exp()) / (1.0 - (-1f64).exp());
            assert!((gap_cdf(&spec, &table, x).unwrap() - want).abs() < 1e-13);
        }
        assert_eq!(gap_cdf(&spec, &table, 1.0).unwrap(), 1.0);
        assert_eq!(gap_cdf(&spec, &table, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rescaled_endpoints_and_domain() {
        let (spec, table) = setup("power:2", 50);
        assert_eq!(rescaled_gap_cdf(&spec, &table, 0.0).unwrap(), 1.0);
        assert!(rescaled_gap_cdf(&spec, &table, 0.1).is_err());
        let v = rescaled_gap_cdf(&spec, &table, -1.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn rescaled_ginibre_near_exponential() {
        let (spec, table) = setup("power:1", 1000);
        let v = rescaled_gap_cdf(&spec, &table, -1.0).unwrap();
        assert!((v - (-1f64).exp()).abs() < 0.05, "{v}");
    }

    #[test]
    fn counts_n2_brute_force() {
        let (spec, table) = setup("power:1", 2);
        let x = 0.8;
        let x0 = overlap_xnk(&spec, &table, 1, x).unwrap(); // j = 0
        let x1 = overlap_xnk(&spec, &table, 0, x).unwrap(); // j = 1
                                                            // closed forms: j=0 → (e^{-2x²} - e^{-2}) / (1 - e^{-2}); j=1 via Γ(2)
        let cf0 = ((-2.0 * x * x).exp() - (-2f64).exp()) / (1.0 - (-2f64).exp());
        let g2 = |y: f64| 1.0 - (-y).exp() * (1.0 + y);
        let cf1 = (g2(2.0) - g2(2.0 * x * x)) / g2(2.0);
        assert!((x0 - cf0).abs() < 1e-14 && (x1 - cf1).abs() < 1e-14);
        let p = order_counts(&spec, &table, x, false).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p[1] - (cf0 * (1.0 - cf1) + cf1 * (1.0 - cf0))).abs() < 1e-14);
        assert!((p[0] - (1.0 - cf0) * (1.0 - cf1)).abs() < 1e-14);
        assert!((p[2] - cf0 * cf1).abs() < 1e-14);
    }

    #[test]
    fn order_cdf_edge_cases() {
        let (spec, table) = setup("power:1", 16);
        let x = 0.93;
        assert_eq!(order_cdf(&spec, &table, 1, x).unwrap(), gap_cdf(&spec, &table, x).unwrap());
        assert_eq!(order_counts(&spec, &table, x, false).unwrap()[0], gap_cdf(&spec, &table, x).unwrap());
        // At x = r0 every modulus lies beyond x, so even the smallest one exceeds it.
        assert_eq!(order_cdf(&spec, &table, 16, 0.0).unwrap(), 0.0);
        let counts = order_counts(&spec, &table, 0.0, true).unwrap();
        assert_eq!(counts[16], 1.0);
        assert!(order_cdf(&spec, &table, 0, x).is_err());
        assert!(order_cdf(&spec, &table, 17, x).is_err());
    }

    #[test]
    fn monotone_in_x_and_l() {
        for s in ["power:1", "power:2", "evenpoly:0,1,0.25"] {
            let (spec, table) = setup(s, 40);
            let grid: Vec<f64> = (0..200).map(|i| spec.droplet.big_r0 * i as f64 / 199.0).collect();
            for l in 1..=4u32 {
                let t = order_table(&spec, &table, l, &grid).unwrap();
                assert!(t.is_monotone(), "{s} l={l}");
                assert!(t.probs.iter().all(|p| (0.0..=1.0).contains(p)));
            }
            for &x in &[0.3, 0.6, 0.8] {
                for l in 1..10u32 {
                    let a = order_cdf(&spec, &table, l, x * spec.droplet.big_r0).unwrap();
                    let b = order_cdf(&spec, &table, l + 1, x * spec.droplet.big_r0).unwrap();
                    assert!(a <= b);
                }
            }
        }
    }

    #[test]
    fn closed_form_and_quadrature_agree_on_gap() {
        for &(d, n) in &[(1.0, 16u64), (2.0, 16), (1.0, 64), (2.0, 64), (1.0, 256), (2.0, 256)] {
            let spec = EnsembleSpec::new(format!("power:{d}").parse().unwrap(), n).unwrap();
            let a = build_mode_table_with(&spec, Route::ClosedForm).unwrap();
            let b = build_mode_table_with(&spec, Route::Quadrature).unwrap();
            for &xi in &[-6.0, -3.0, -1.0, -0.2] {
                let fa = rescaled_gap_cdf(&spec, &a, xi).unwrap();
                let fb = rescaled_gap_cdf(&spec, &b, xi).unwrap();
                assert!((fa - fb).abs() < 1e-8, "d={d} n={n} xi={xi}: {fa} vs {fb}");
            }
        }
    }

    #[test]
    fn linearization() {
        let z = log_product_linearization(&[0.0; 5]).unwrap();
        assert_eq!((z.sum_log1p_neg, z.neg_sum), (0.0, 0.0));
        let h = log_product_linearization(&[0.5]).unwrap();
        assert!((h.discrepancy - (0.5f64.ln() + 0.5).abs()).abs() < 1e-15);
        assert!((h.discrepancy - 0.193_147_180_559_945_3).abs() < 1e-15);
        assert!(log_product_linearization(&[1.0]).is_err());
        assert!(log_product_linearization(&[-0.1]).is_err());

        let (spec, table) = setup("power:1", 1024);
        let xs = overlaps(&spec, &table, radius_at(&spec, -2.0)).unwrap();
        let lin = log_product_linearization(&xs).unwrap();
        let max = xs.iter().copied().fold(0.0, f64::max);
        let bound = xs.iter().map(|x| x * x).sum::<f64>() / (2.0 * (1.0 - max));
        assert!(lin.discrepancy <= bound);
    }

    #[test]
    fn intensity_spot_values() {
        let (spec, table) = setup("power:1", 4096);
        let at0 = ginibre_rescaled_intensity_with(&spec, &table, 0.0).unwrap();
        assert!((at0 - std::f64::consts::LN_2).abs() < 0.05);
        // Deep inside the droplet the intensity returns to the bulk value 1.
        let deep = ginibre_rescaled_intensity_with(&spec, &table, -3.0).unwrap();
        assert!((deep - 1.0).abs() < 1e-3, "{deep}");
        assert!(ginibre_rescaled_intensity_with(&spec, &table, 0.5).is_err());
        assert!(ginibre_rescaled_intensity_with(&spec, &table, -100.0).is_err());
        let (s2, t2) = setup("power:2", 16);
        assert!(ginibre_intensity_at(&s2, &t2, 0.5).is_err());
    }
}
