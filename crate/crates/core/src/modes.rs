//! Ensembles and their per-mode normalizations.
//!
//! For a radial potential the orthonormal polynomials are monomials, so the
//! ensemble decomposes into `n` independent modes. Mode `j` carries the
//! radial density `2 r^{2j+1} e^{-nQ(r)} / norm_j` on the droplet, and
//! everything downstream (gap probabilities, order statistics, sampling) is
//! built from the per-mode tail masses
//!
//! ```text
//! x_{n,k}(x) = ∫_x^{R0} e^{-n V_k(r)} dr / ∫_{r0}^{R0} e^{-n V_k(r)} dr,   k = n - 1 - j.
//! ```
//!
//! Power potentials use the incomplete-gamma closed form; all other
//! potentials go through saddle-centred adaptive Gauss–Legendre quadrature.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{Droplet, RadialPotential};
use crate::quad;
use crate::specfun::{log_gamma, reg_gamma_pair};

/// A potential together with the matrix size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub potential: RadialPotential,
    pub n: u64,
    pub droplet: Droplet,
}

impl EnsembleSpec {
    pub fn new(potential: RadialPotential, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        let droplet = potential.droplet()?;
        Ok(EnsembleSpec { potential, n, droplet })
    }

    /// `log r^{2j+1} e^{-nQ(r)} = -n V_k(r)` for `k = n - 1 - j`.
    pub fn log_weight(&self, j: usize, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (2 * j + 1) as f64 * r.ln() - self.n as f64 * self.potential.q(r)
    }

    /// Centre of mode `j`: the saddle `t_k`, or the maximiser of the weight
    /// on a coarse scan when the saddle does not exist.
    pub fn mode_centre(&self, j: usize) -> f64 {
        let k = self.n - 1 - j as u64;
        if let Some(t) = self.potential.saddle(&self.droplet, self.n, k) {
            if t > 0.0 {
                return t;
            }
        }
        let Droplet { r0, big_r0, .. } = self.droplet;
        (0..=256)
            .map(|i| r0 + (big_r0 - r0) * i as f64 / 256.0)
            .filter(|&r| r > 0.0)
            .max_by(|&a, &b| self.log_weight(j, a).total_cmp(&self.log_weight(j, b)))
            .unwrap_or(big_r0)
    }

    /// Local Gaussian width `1 / √(n ΔQ(t))` at the mode centre, capped at
    /// the droplet width.
    pub fn mode_width(&self, centre: f64) -> f64 {
        let span = self.droplet.big_r0 - self.droplet.r0;
        let w = 1.0 / (self.n as f64 * self.potential.lap(centre)).sqrt();
        if w.is_finite() && w > 0.0 {
            w.min(span)
        } else {
            span
        }
    }
}

/// Which evaluation route a mode table uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    ClosedForm,
    Quadrature,
}

/// Per-mode data. `log_norm = log ∫_{r0}^{R0} r^{2j} e^{-nQ(r)} 2r dr`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    pub j: usize,
    pub log_norm: f64,
    /// Saddle `t_k` (`k = n - 1 - j`).
    pub saddle: Option<f64>,
    /// Closed form: `(P(a, n/d), Q(a, n/d))` with `a = (j+1)/d`.
    pub top: (f64, f64),
    /// Quadrature: centre, width, log-peak and scaled mass
    /// `∫ exp(log_weight - log_peak)`.
    pub centre: f64,
    pub width: f64,
    pub log_peak: f64,
    pub mass: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeTable {
    pub route: Route,
    pub n: u64,
    pub potential: String,
    pub modes: Vec<Mode>,
}

impl ModeTable {
    pub fn total_panels(&self) -> usize {
        self.modes.iter().map(|m| m.panels).sum()
    }

    pub fn check(&self, spec: &EnsembleSpec) -> Result<()> {
        if self.n != spec.n || self.potential != spec.potential.descriptor() || self.modes.len() as u64 != spec.n {
            return Err(Error::Inconsistent(format!(
                "mode table for {} with n = {} used with {} and n = {}",
                self.potential,
                self.n,
                spec.potential.descriptor(),
                spec.n
            )));
        }
        Ok(())
    }
}

const QUAD_REL_TOL: f64 = 1e-13;

fn breakpoints(centre: f64, width: f64) -> Vec<f64> {
    let mut b = vec![centre];
    for m in 1..=6 {
        b.push(centre - m as f64 * width);
        b.push(centre + m as f64 * width);
    }
    b
}

/// Builds the mode table on the natural route (closed form for power
/// potentials).
pub fn build_mode_table(spec: &EnsembleSpec) -> Result<ModeTable> {
    let route = if spec.potential.is_power() { Route::ClosedForm } else { Route::Quadrature };
    build_mode_table_with(spec, route)
}

/// Builds the mode table on an explicit route. The closed form requires a
/// power potential.
pub fn build_mode_table_with(spec: &EnsembleSpec, route: Route) -> Result<ModeTable> {
    let n = spec.n as usize;
    let modes: Result<Vec<Mode>> = (0..n)
        .into_par_iter()
        .with_min_len(16)
        .map(|j| match route {
            Route::ClosedForm => closed_form_mode(spec, j),
            Route::Quadrature => quadrature_mode(spec, j),
        })
        .collect();
    Ok(ModeTable { route, n: spec.n, potential: spec.potential.descriptor(), modes: modes? })
}

fn closed_form_mode(spec: &EnsembleSpec, j: usize) -> Result<Mode> {
    let d = spec
        .potential
        .power_d()
        .ok_or_else(|| Error::Inconsistent("closed-form mode table needs a power potential".into()))?;
    let n = spec.n as f64;
    let a = (j + 1) as f64 / d;
    let (p, q) = reg_gamma_pair(a, n / d)?;
    let k = spec.n - 1 - j as u64;
    let saddle = spec.potential.saddle(&spec.droplet, spec.n, k);
    // ∫_0^{R0} r^{2j} e^{-n r^{2d}} 2r dr = γ(a, n/d) / (d n^a)
    let log_norm = p.ln() + log_gamma(a)? - d.ln() - a * n.ln();
    Ok(Mode {
        j,
        log_norm,
        saddle,
        top: (p, q),
        centre: saddle.unwrap_or(spec.droplet.big_r0),
        width: 0.0,
        log_peak: 0.0,
        mass: 0.0,
        panels: 0,
    })
}

fn quadrature_mode(spec: &EnsembleSpec, j: usize) -> Result<Mode> {
    let Droplet { r0, big_r0, .. } = spec.droplet;
    let k = spec.n - 1 - j as u64;
    let saddle = spec.potential.saddle(&spec.droplet, spec.n, k);
    let centre = spec.mode_centre(j);
    let width = spec.mode_width(centre);
    let log_peak = spec.log_weight(j, centre);
    let f = |r: f64| (spec.log_weight(j, r) - log_peak).exp();
    let scale = (2.5 * width).min(big_r0 - r0);
    let out = quad::adaptive(&f, r0, big_r0, &breakpoints(centre, width), 1e-14 * scale, QUAD_REL_TOL);
    if !out.converged || !(out.value > 0.0) || !out.value.is_finite() {
        return Err(Error::Quadrature {
            mode: j,
            detail: format!("normalization integral {} after {} panels", out.value, out.panels),
        });
    }
    Ok(Mode {
        j,
        log_norm: std::f64::consts::LN_2 + log_peak + out.value.ln(),
        saddle,
        top: (f64::NAN, f64::NAN),
        centre,
        width,
        log_peak,
        mass: out.value,
        panels: out.panels,
    })
}

/// Tail mass of mode `j` beyond radius `x`.
pub fn mode_overlap(spec: &EnsembleSpec, table: &ModeTable, j: usize, x: f64) -> Result<f64> {
    let Droplet { r0, big_r0, .. } = spec.droplet;
    if x >= big_r0 {
        return Ok(0.0);
    }
    if x <= r0 {
        return Ok(1.0);
    }
    let mode = &table.modes[j];
    match table.route {
        Route::ClosedForm => {
            let d = spec.potential.power_d().expect("checked at build");
            let n = spec.n as f64;
            let a = (j + 1) as f64 / d;
            let top = n / d;
            let lo = (n * x.powf(2.0 * d)).min(top);
            let (p_lo, q_lo) = reg_gamma_pair(a, lo)?;
            let (p_top, q_top) = mode.top;
            let num = if lo >= a { q_lo - q_top } else { p_top - p_lo };
            Ok((num / p_top).clamp(0.0, 1.0))
        }
        Route::Quadrature => {
            let f = |r: f64| (spec.log_weight(j, r) - mode.log_peak).exp();
            let out =
                quad::adaptive(&f, x, big_r0, &breakpoints(mode.centre, mode.width), 1e-15 * mode.mass, QUAD_REL_TOL);
            if !out.converged {
                return Err(Error::Quadrature { mode: j, detail: format!("tail integral beyond x = {x}") });
            }
            Ok((out.value / mode.mass).clamp(0.0, 1.0))
        }
    }
}

/// `x_{n,k}(x)`: probability mass of mode `j = n - 1 - k` beyond radius `x`.
pub fn overlap_xnk(spec: &EnsembleSpec, table: &ModeTable, k: u64, x: f64) -> Result<f64> {
    table.check(spec)?;
    if k >= spec.n {
        return Err(Error::Domain(format!("k = {k} must be < n = {}", spec.n)));
    }
    mode_overlap(spec, table, (spec.n - 1 - k) as usize, x)
}

/// All overlaps at `x`, indexed by mode `j`.
pub fn overlaps(spec: &EnsembleSpec, table: &ModeTable, x: f64) -> Result<Vec<f64>> {
    table.check(spec)?;
    (0..spec.n as usize).into_par_iter().with_min_len(64).map(|j| mode_overlap(spec, table, j, x)).collect()
}
