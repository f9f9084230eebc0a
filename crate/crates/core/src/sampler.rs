//! Monte Carlo draws of eigenvalue moduli.
//!
//! The gap probability factorizes over monomial modes, which is the same as
//! saying the `n` moduli are independent with mode-`j` density
//! `2 r^{2j+1} e^{-nQ(r)} / norm_j` on `[r0, R0]`. One trial draws one
//! modulus per mode and reduces them to the statistic of interest. The
//! sampler is validated only through the exact CDFs of the gap engine.
//!
//! Per-trial streams: trial `i` uses `ChaCha8Rng::seed_from_u64(stream_seed(master_seed, i))`
//! with [`stream_seed`] a SplitMix64 mix of the pair, so results do not
//! depend on scheduling or thread count.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limits::{make_rescaling, RescalingKind};
use crate::modes::{EnsembleSpec, ModeTable};
use crate::quad;
use crate::specfun::std_normal_cdf;
use crate::table::fmt_g15;

/// Knobs of the per-mode rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Proposal standard deviation as a multiple of `1/√(n ΔQ(t_k))`.
    pub inflation: f64,
    /// Modes whose acceptance rate falls below this use the inverse-CDF table.
    pub min_acceptance: f64,
    pub table_knots: usize,
    pub max_attempts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { inflation: 1.2, min_acceptance: 0.1, table_knots: 512, max_attempts: 10_000 }
    }
}

/// Mode weights below `peak · e^{-TAIL_CUT}` are treated as zero.
const TAIL_CUT: f64 = 40.0;

#[derive(Debug)]
struct Rejection {
    centre: f64,
    sigma: f64,
    /// `max (log w(r) - log w(t) + (r - t)²/(2σ²))` over the window.
    log_bound: f64,
}

#[derive(Debug)]
struct ModeSampler {
    j: usize,
    lo: f64,
    hi: f64,
    log_peak: f64,
    rejection: Option<Rejection>,
    acceptance: f64,
    inverse: OnceLock<InverseTable>,
}

/// Monotone piecewise-linear inverse CDF on a uniform knot grid.
#[derive(Debug)]
struct InverseTable {
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseTable {
    fn build(spec: &EnsembleSpec, j: usize, lo: f64, hi: f64, log_peak: f64, knots: usize) -> Self {
        let m = knots.max(2);
        let pts: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
        let f = |r: f64| (spec.log_weight(j, r) - log_peak).exp();
        let mut cdf = Vec::with_capacity(m);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += quad::panel(&f, w[0], w[1]);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        InverseTable { knots: pts, cdf }
    }

    fn invert(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (r0, r1) = (self.knots[i - 1], self.knots[i]);
        if c1 > c0 {
            r0 + (r1 - r0) * ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            r0
        }
    }
}

/// Largest `h` on a grid of the window, refined by golden-section search
/// around the best grid point.
fn maximize<F: Fn(f64) -> f64>(h: &F, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 2048;
    let step = (hi - lo) / GRID as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=GRID {
        let v = h(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut a, mut b) = (lo + step * best_i.saturating_sub(1) as f64, (lo + step * (best_i + 1) as f64).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if h(c) > h(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(h(0.5 * (a + b)))
}

impl ModeSampler {
    fn new(spec: &EnsembleSpec, j: usize, config: &SamplerConfig) -> Self {
        let (r0, big_r0) = (spec.droplet.r0, spec.droplet.big_r0);
        let centre = spec.mode_centre(j);
        let log_peak = spec.log_weight(j, centre);
        let rel = |r: f64| spec.log_weight(j, r) - log_peak;

        // the weight is unimodal: increasing up to the centre, decreasing after
        let lo = if rel(r0) >= -TAIL_CUT {
            r0
        } else {
            let (mut a, mut b) = (r0, centre);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if rel(m) < -TAIL_CUT {
                    a = m
                } else {
                    b = m
                }
            }
            a
        };
        let hi = if rel(big_r0) >= -TAIL_CUT {
            big_r0
        } else {
            let (mut a, mut b) = (centre, big_r0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if rel(m) < -TAIL_CUT {
                    b = m
                } else {
                    a = m
                }
            }
            b
        };

        let lap = spec.potential.lap(centre);
        let sigma = config.inflation / (spec.n as f64 * lap).sqrt();
        let mut rejection = None;
        let mut acceptance = 0.0;
        if sigma.is_finite() && sigma > 0.0 && hi > lo {
            let h = |r: f64| rel(r) + 0.5 * ((r - centre) / sigma).powi(2);
            let log_bound = maximize(&h, lo, hi) + 1e-9;
            let mass = quad::adaptive(&|r| rel(r).exp(), lo, hi, &[centre], 1e-14 * (hi - lo), 1e-10).value;
            let proposal = sigma
                * (2.0 * std::f64::consts::PI).sqrt()
                * (std_normal_cdf((hi - centre) / sigma) - std_normal_cdf((lo - centre) / sigma));
            acceptance = mass / (log_bound.exp() * proposal);
            if acceptance >= config.min_acceptance {
                rejection = Some(Rejection { centre, sigma, log_bound });
            }
        }
        let s = ModeSampler { j, lo, hi, log_peak, rejection, acceptance, inverse: OnceLock::new() };
        if s.rejection.is_none() {
            s.table(spec, config);
        }
        s
    }

    fn table(&self, spec: &EnsembleSpec, config: &SamplerConfig) -> &InverseTable {
        self.inverse
            .get_or_init(|| InverseTable::build(spec, self.j, self.lo, self.hi, self.log_peak, config.table_knots))
    }

    fn draw<R: Rng>(&self, spec: &EnsembleSpec, config: &SamplerConfig, rng: &mut R) -> f64 {
        if let Some(rej) = &self.rejection {
            for _ in 0..config.max_attempts {
                let z: f64 = rng.sample(StandardNormal);
                let r = rej.centre + rej.sigma * z;
                if r < self.lo || r > self.hi {
                    continue;
                }
                let log_ratio = spec.log_weight(self.j, r) - self.log_peak + 0.5 * z * z - rej.log_bound;
                let u: f64 = rng.gen();
                if u.ln() < log_ratio {
                    return r;
                }
            }
        }
        let u: f64 = rng.gen();
        self.table(spec, config).invert(u)
    }
}

/// Prepared per-mode samplers for one ensemble.
#[derive(Debug)]
pub struct ModuliSampler<'a> {
    spec: &'a EnsembleSpec,
    config: SamplerConfig,
    modes: Vec<ModeSampler>,
}

impl<'a> ModuliSampler<'a> {
    pub fn new(spec: &'a EnsembleSpec, table: &ModeTable, config: SamplerConfig) -> Result<Self> {
        table.check(spec)?;
        let modes = (0..spec.n as usize).into_par_iter().map(|j| ModeSampler::new(spec, j, &config)).collect();
        Ok(ModuliSampler { spec, config, modes })
    }

    /// Acceptance rate per mode; 0 marks modes served by the inverse table.
    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.modes.iter().map(|m| if m.rejection.is_some() { m.acceptance } else { 0.0 }).collect()
    }

    /// One modulus per mode, indexed by `j`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.modes.iter().map(|m| m.draw(self.spec, &self.config, rng)).collect()
    }

    /// A single draw from mode `j`.
    pub fn sample_mode<R: Rng>(&self, j: usize, rng: &mut R) -> f64 {
        self.modes[j].draw(self.spec, &self.config, rng)
    }
}

/// One draw of all `n` moduli.
pub fn sample_moduli<R: Rng>(spec: &EnsembleSpec, table: &ModeTable, rng: &mut R) -> Result<Vec<f64>> {
    Ok(ModuliSampler::new(spec, table, SamplerConfig::default())?.sample(rng))
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `i`: `splitmix64(master_seed ^ splitmix64(i))`.
pub fn stream_seed(master_seed: u64, trial: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial))
}

pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master_seed, trial))
}

/// Statistic recorded per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// Largest modulus.
    Max,
    /// `l`-th largest modulus.
    Order(u32),
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Max => write!(f, "max"),
            Statistic::Order(l) => write!(f, "order({l})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSample {
    #[serde(skip)]
    pub spec: EnsembleSpec,
    pub trials: u64,
    pub master_seed: u64,
    pub statistic: Statistic,
    /// Rescaled `ω` per trial, radial map.
    pub values: Vec<f64>,
}

impl EmpiricalSample {
    /// CSV with header `trial,omega`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,omega\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&i.to_string());
            out.push(',');
            out.push_str(&fmt_g15(*v));
            out.push('\n');
        }
        out
    }

    /// Sidecar `{potential, n, trials, master_seed, statistic}`.
    pub fn metadata_json(&self) -> String {
        serde_json::json!({
            "potential": self.spec.potential.descriptor(),
            "n": self.spec.n,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "statistic": self.statistic.to_string(),
        })
        .to_string()
    }
}

fn l_of(stat: Statistic) -> usize {
    match stat {
        Statistic::Max => 1,
        Statistic::Order(l) => l as usize,
    }
}

/// Runs `trials` independent trials and records the rescaled statistic.
pub fn sample_statistic(
    spec: &EnsembleSpec,
    table: &ModeTable,
    statistic: Statistic,
    trials: u64,
    master_seed: u64,
) -> Result<EmpiricalSample> {
    sample_statistic_with(spec, table, statistic, trials, master_seed, SamplerConfig::default())
}

pub fn sample_statistic_with(
    spec: &EnsembleSpec,
    table: &ModeTable,
    statistic: Statistic,
    trials: u64,
    master_seed: u64,
    config: SamplerConfig,
) -> Result<EmpiricalSample> {
    if trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    let l = l_of(statistic);
    if l == 0 || l as u64 > spec.n {
        return Err(Error::Domain(format!("order l = {l} must lie in 1..={}", spec.n)));
    }
    let sampler = ModuliSampler::new(spec, table, config)?;
    let map = make_rescaling(spec, RescalingKind::Radial)?;
    let values = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(master_seed, i);
            let mut moduli = sampler.sample(&mut rng);
            let idx = moduli.len() - l;
            let (_, kth, _) = moduli.select_nth_unstable_by(idx, f64::total_cmp);
            map.forward(*kth)
        })
        .collect();
    Ok(EmpiricalSample { spec: spec.clone(), trials, master_seed, statistic, values })
}

/// Two-sided Kolmogorov–Smirnov distance `sup_x |F_emp(x) - F(x)|`.
///
/// Both one-sided gaps are taken at every sample point, the lower one against
/// `F` just left of the point so that step-function CDFs are handled exactly.
pub fn ks_distance<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("KS distance of an empty sample".into()));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        // only the last of a run of ties carries the full empirical jump
        if i + 1 < xs.len() && xs[i + 1] == x {
            continue;
        }
        let first = xs.partition_point(|&v| v < x);
        let above = (i + 1) as f64 / m - cdf(x);
        let below = cdf(x.next_down()) - first as f64 / m;
        d = d.max(above).max(below);
    }
    Ok(d.clamp(0.0, 1.0))
}
