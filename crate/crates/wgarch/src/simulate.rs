//! Monte Carlo path generation for the weak-GARCH diffusion and its
//! GARCH-consistent discretization, plus the orthogonality and kurtosis
//! diagnostics that verify the simulated paths really are weak GARCH.
//!
//! Two schemes share one precomputation pass and one per-path kernel:
//!
//! * `DiffusionEuler` integrates the SDE pair dS/S = μdt + √V dB₁,
//!   dV = (ω - θV)dt + α√(κ_t - 1)·V dB₂ with independent Brownians,
//!   an Itô-corrected log-price step, and full truncation of V at zero.
//! * `GarchConsistent` runs the exact step-dt GARCH recursion with one
//!   normal per step pushed through the kurtotic quantile transform; its
//!   variance stays positive without truncation.
//!
//! Paths draw from per-path substreams of [`crate::rng`], so output is
//! bit-identical for a fixed seed no matter how paths are scheduled.

use crate::dist::KurtoticTransform;
use crate::limit::{continuous_to_discrete, LimitError};
use crate::params::{
    DiscreteGarchParams, KurtosisSpec, ParamError, StepLength, ValidatedContinuousParams,
};
use crate::rng::NormalSource;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;
use libm::sqrt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    DiffusionEuler,
    GarchConsistent,
}

/// Simulation request: grid, seed, scheme, and initial variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: u32,
    pub n_steps: u32,
    pub horizon: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub v0: f64,
    #[serde(default)]
    pub store_full_paths: bool,
    #[serde(default)]
    pub strict_kurtosis: bool,
}

/// The one normal drawn per GarchConsistent step and the derived second
/// innovation η = (ξ² - 1)/√2 that stands in for the variance Brownian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnovationPair {
    pub xi: f64,
    pub eta: f64,
}

impl InnovationPair {
    pub fn new(xi: f64) -> Self {
        Self { xi, eta: (xi * xi - 1.0) * FRAC_1_SQRT_2 }
    }
}

/// Aggregate counters from one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SimDiagnostics {
    pub truncated_steps: u64,
    pub total_steps: u64,
    /// Steps whose raw instantaneous kurtosis fell below 3 and was clamped
    /// (counted once per step of the shared time grid, times paths).
    pub kappa_clamped_steps: u64,
}

/// Simulated paths: terminal state per path, optionally the full
/// log-price trajectories (row-major, n_steps + 1 points per path,
/// starting at ln S₀ = 0), and the realized configuration echo.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub terminal_log_prices: Vec<f64>,
    pub terminal_variances: Vec<f64>,
    pub full_log_prices: Option<Vec<f64>>,
    pub config: SimConfig,
    pub mu: f64,
    pub dt: f64,
    pub diagnostics: SimDiagnostics,
}

impl PathSet {
    pub fn path_log_prices(&self, path: usize) -> Option<&[f64]> {
        let stride = self.config.n_steps as usize + 1;
        self.full_log_prices.as_ref().map(|m| &m[path * stride..(path + 1) * stride])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimError {
    InvalidConfig { reason: &'static str },
    NegativeVarianceExplosion { truncated: u64, total: u64 },
    InvalidKurtosisPath { steps: u64 },
    InsufficientPaths { n_paths: u32 },
    InsufficientData { points: u64 },
    Param(ParamError),
    Limit(LimitError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig { reason } => write!(f, "InvalidConfig: {reason}"),
            Self::NegativeVarianceExplosion { truncated, total } => write!(
                f,
                "NegativeVarianceExplosion: variance truncated on {truncated} of {total} steps (over 5%); shrink the step or use GarchConsistent"
            ),
            Self::InvalidKurtosisPath { steps } => write!(
                f,
                "InvalidKurtosisPath: instantaneous kurtosis below 3 before clamping on {steps} steps with strict mode on"
            ),
            Self::InsufficientPaths { n_paths } => write!(
                f,
                "InsufficientPaths: {n_paths} paths; orthogonality moments need at least 10000"
            ),
            Self::InsufficientData { points } => write!(
                f,
                "InsufficientData: {points} usable return observations; need at least 1e6"
            ),
            Self::Param(e) => write!(f, "{e}"),
            Self::Limit(e) => write!(f, "{e}"),
        }
    }
}

impl From<ParamError> for SimError {
    fn from(e: ParamError) -> Self {
        Self::Param(e)
    }
}

impl From<LimitError> for SimError {
    fn from(e: LimitError) -> Self {
        Self::Limit(e)
    }
}

struct StepData {
    /// Quantile transform onto the step's clamped kurtosis target.
    transform: KurtoticTransform,
    /// q = √((κ - 1)/2); multiplies the squared innovation in the
    /// GarchConsistent variance update. Exactly 1 at κ = 3.
    q: f64,
    /// α√(κ - 1), the Euler variance-diffusion coefficient.
    vol_coef: f64,
}

/// Everything shared across paths, computed once per run.
pub struct SimPrecomp {
    config: SimConfig,
    mu: f64,
    dt: f64,
    sqrt_dt: f64,
    omega: f64,
    theta: f64,
    garch: Option<(f64, f64, f64)>,
    steps: Vec<StepData>,
    kappa_clamped: u64,
}

impl SimPrecomp {
    pub fn new(
        c: &ValidatedContinuousParams,
        k: &KurtosisSpec,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        if cfg.n_paths < 1 {
            return Err(SimError::InvalidConfig { reason: "n_paths must be at least 1" });
        }
        if cfg.n_steps < 1 {
            return Err(SimError::InvalidConfig { reason: "n_steps must be at least 1" });
        }
        if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
            return Err(SimError::InvalidConfig { reason: "horizon must be positive" });
        }
        if !(cfg.v0 > 0.0) || !cfg.v0.is_finite() {
            return Err(SimError::InvalidConfig { reason: "v0 must be positive" });
        }
        let dt = cfg.horizon / cfg.n_steps as f64;
        let mut steps = Vec::with_capacity(cfg.n_steps as usize);
        let mut clamped = 0u64;
        for j in 0..cfg.n_steps {
            let tau = (cfg.n_steps - j) as f64 * dt;
            let raw = k.kappa_a + k.kappa_b * tau;
            if raw < 3.0 {
                clamped += 1;
            }
            let kappa = k.instantaneous(tau);
            steps.push(StepData {
                transform: KurtoticTransform::new(kappa),
                q: sqrt((kappa - 1.0) / 2.0),
                vol_coef: c.alpha * sqrt(kappa - 1.0),
            });
        }
        if cfg.strict_kurtosis && clamped > 0 {
            return Err(SimError::InvalidKurtosisPath { steps: clamped });
        }
        let garch = match cfg.scheme {
            Scheme::GarchConsistent => {
                let d = continuous_to_discrete(c, StepLength::new(dt)?)?;
                Some((d.params.omega, d.params.alpha, d.params.beta))
            }
            Scheme::DiffusionEuler => None,
        };
        Ok(Self {
            config: cfg,
            mu: c.mu,
            dt,
            sqrt_dt: sqrt(dt),
            omega: c.omega,
            theta: c.theta,
            garch,
            steps,
            kappa_clamped: clamped,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }
}

/// Per-path result produced by [`simulate_path`].
pub struct PathOutcome {
    pub terminal_log_price: f64,
    pub terminal_variance: f64,
    pub full_log_prices: Option<Vec<f64>>,
    pub truncated_steps: u64,
}

/// Runs one path. Pure in (precomp, path_index); paths may be evaluated
/// in any order or in parallel and assembled with [`finalize`].
pub fn simulate_path(pre: &SimPrecomp, path_index: u64) -> PathOutcome {
    let mut src = NormalSource::new(pre.config.seed, path_index);
    let mut ln_s = 0.0_f64;
    let mut v = pre.config.v0;
    let mut truncated = 0u64;
    let mut full = pre.config.store_full_paths.then(|| {
        let mut f = Vec::with_capacity(pre.steps.len() + 1);
        f.push(ln_s);
        f
    });
    match pre.garch {
        None => {
            for step in &pre.steps {
                let z1 = src.next_normal();
                let z2 = src.next_normal();
                ln_s += (pre.mu - 0.5 * v) * pre.dt + sqrt(v * pre.dt) * z1;
                v += (pre.omega - pre.theta * v) * pre.dt
                    + step.vol_coef * v * pre.sqrt_dt * z2;
                if v < 0.0 {
                    v = 0.0;
                    truncated += 1;
                }
                if let Some(f) = full.as_mut() {
                    f.push(ln_s);
                }
            }
        }
        Some((omega_d, alpha_d, beta_d)) => {
            for step in &pre.steps {
                let xi = src.next_normal();
                let xt = step.transform.apply(xi);
                ln_s += pre.mu * pre.dt + sqrt(pre.dt * v) * xt;
                // q = 1 (κ = 3) annihilates u; branching keeps the collapse
                // to the plain recursion exact in floating point.
                let mult = if step.q == 1.0 {
                    xt * xt
                } else {
                    step.q * xt * xt + 1.0 - step.q
                };
                v = omega_d + beta_d * v + alpha_d * v * mult;
                if v < 0.0 {
                    v = 0.0;
                    truncated += 1;
                }
                if let Some(f) = full.as_mut() {
                    f.push(ln_s);
                }
            }
        }
    }
    PathOutcome {
        terminal_log_price: ln_s,
        terminal_variance: v,
        full_log_prices: full,
        truncated_steps: truncated,
    }
}

/// Assembles per-path outcomes (ordered by path index) into a [`PathSet`],
/// enforcing the truncation-rate diagnostic.
pub fn finalize(pre: &SimPrecomp, outcomes: Vec<PathOutcome>) -> Result<PathSet, SimError> {
    let cfg = pre.config;
    let n_paths = cfg.n_paths as usize;
    debug_assert_eq!(outcomes.len(), n_paths);
    let mut terminal_log_prices = Vec::with_capacity(n_paths);
    let mut terminal_variances = Vec::with_capacity(n_paths);
    let mut full = cfg
        .store_full_paths
        .then(|| Vec::with_capacity(n_paths * (cfg.n_steps as usize + 1)));
    let mut truncated = 0u64;
    for o in outcomes {
        terminal_log_prices.push(o.terminal_log_price);
        terminal_variances.push(o.terminal_variance);
        truncated += o.truncated_steps;
        if let (Some(m), Some(p)) = (full.as_mut(), o.full_log_prices) {
            m.extend_from_slice(&p);
        }
    }
    let total = cfg.n_paths as u64 * cfg.n_steps as u64;
    if truncated as f64 > 0.05 * total as f64 {
        return Err(SimError::NegativeVarianceExplosion { truncated, total });
    }
    Ok(PathSet {
        terminal_log_prices,
        terminal_variances,
        full_log_prices: full,
        config: cfg,
        mu: pre.mu,
        dt: pre.dt,
        diagnostics: SimDiagnostics {
            truncated_steps: truncated,
            total_steps: total,
            kappa_clamped_steps: pre.kappa_clamped * cfg.n_paths as u64,
        },
    })
}

/// Serial driver: precompute, run every path in index order, assemble.
pub fn simulate(
    c: &ValidatedContinuousParams,
    k: &KurtosisSpec,
    cfg: SimConfig,
) -> Result<PathSet, SimError> {
    let pre = SimPrecomp::new(c, k, cfg)?;
    let outcomes = (0..cfg.n_paths as u64).map(|i| simulate_path(&pre, i)).collect();
    finalize(&pre, outcomes)
}

/// One orthogonality moment E[(Δ⁻¹ε²_{k+1} - h_k)·ε^r_{k-i}] with its
/// cross-path standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStat {
    pub r: u8,
    pub lag: u8,
    pub mean: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub moments: Vec<MomentStat>,
    pub max_abs_z: f64,
}

impl OrthogonalityReport {
    pub fn all_within(&self, z_bound: f64) -> bool {
        self.max_abs_z <= z_bound
    }
}

/// Reconstructs the best-linear-predictor recursion h from the stored
/// log-price increments and reports the weak-GARCH defining moments
/// E[(Δ⁻¹ε²_{k+1} - h_k)·ε^r_{k-i}] for r ∈ {0, 1, 2}, lags 0..=4.
///
/// Each moment is averaged within a path, then across paths; the
/// standard error is the cross-path SE of those per-path means.
///
/// Takes raw (unvalidated) parameters so that deliberately broken
/// recursions, including non-stationary ones, can serve as negative
/// controls.
pub fn blp_orthogonality_check(
    paths: &PathSet,
    p: &DiscreteGarchParams,
) -> Result<OrthogonalityReport, SimError> {
    const MAX_LAG: usize = 4;
    let n_paths = paths.config.n_paths;
    if n_paths < 10_000 {
        return Err(SimError::InsufficientPaths { n_paths });
    }
    let full = paths
        .full_log_prices
        .as_ref()
        .ok_or(SimError::InsufficientData { points: 0 })?;
    let n_steps = paths.config.n_steps as usize;
    if n_steps < MAX_LAG + 2 {
        return Err(SimError::InsufficientData { points: n_steps as u64 });
    }
    if (p.delta.years() - paths.dt).abs() > 1e-9 * paths.dt {
        return Err(SimError::InvalidConfig {
            reason: "params step length must equal the simulation dt",
        });
    }
    let dt = paths.dt;
    let inv_dt = 1.0 / dt;
    let stride = n_steps + 1;
    // Per-path means for the 15 moments, then cross-path statistics.
    let n_moments = 3 * (MAX_LAG + 1);
    let mut sums = [0.0_f64; 15];
    let mut sq_sums = [0.0_f64; 15];
    let mut eps = Vec::with_capacity(n_steps + 1);
    for path in 0..n_paths as usize {
        let lp = &full[path * stride..(path + 1) * stride];
        eps.clear();
        eps.push(0.0);
        for k in 1..=n_steps {
            eps.push(lp[k] - lp[k - 1] - paths.mu * dt);
        }
        // h_k for k = 0..n_steps-1, h_0 = v0.
        let mut h = paths.config.v0;
        let mut acc = [0.0_f64; 15];
        let mut count = 0u64;
        for k in 1..n_steps {
            // d_k = Δ⁻¹ε²_{k+1} - h_k; h here is h_k after updating with ε_k.
            h = p.omega + p.alpha * inv_dt * eps[k] * eps[k] + p.beta * h;
            if k <= MAX_LAG {
                continue;
            }
            let d = inv_dt * eps[k + 1] * eps[k + 1] - h;
            count += 1;
            for (i, a) in acc.chunks_exact_mut(3).enumerate() {
                let e = eps[k - i];
                a[0] += d;
                a[1] += d * e;
                a[2] += d * e * e;
            }
        }
        for m in 0..n_moments {
            let path_mean = acc[m] / count as f64;
            sums[m] += path_mean;
            sq_sums[m] += path_mean * path_mean;
        }
    }
    let np = n_paths as f64;
    let mut moments = Vec::with_capacity(n_moments);
    let mut max_abs_z = 0.0_f64;
    for m in 0..n_moments {
        let mean = sums[m] / np;
        let var = (sq_sums[m] / np - mean * mean).max(0.0);
        let se = sqrt(var / (np - 1.0));
        let z = if se > 0.0 { mean / se } else { 0.0 };
        max_abs_z = max_abs_z.max(z.abs());
        moments.push(MomentStat { r: (m % 3) as u8, lag: (m / 3) as u8, mean, se, z });
    }
    Ok(OrthogonalityReport { moments, max_abs_z })
}

/// Pooled kurtosis estimate with a jackknife-over-paths standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KurtosisEstimate {
    pub kurtosis: f64,
    pub standard_error: f64,
    pub points: u64,
}

/// Unconditional kurtosis of per-step residual returns pooled across
/// paths. `skip_steps` drops a stationarity burn-in from every path;
/// `block_len` sums consecutive residuals first, so the estimate applies
/// to returns at step `block_len`·dt.
pub fn sample_kurtosis(
    paths: &PathSet,
    skip_steps: u32,
    block_len: u32,
) -> Result<KurtosisEstimate, SimError> {
    let full = paths
        .full_log_prices
        .as_ref()
        .ok_or(SimError::InsufficientData { points: 0 })?;
    let n_steps = paths.config.n_steps as usize;
    let n_paths = paths.config.n_paths as usize;
    let skip = skip_steps as usize;
    let block = block_len.max(1) as usize;
    let blocks_per_path = n_steps.saturating_sub(skip) / block;
    let points = (n_paths as u64) * (blocks_per_path as u64);
    if points < 1_000_000 {
        return Err(SimError::InsufficientData { points });
    }
    let stride = n_steps + 1;
    let drift = paths.mu * paths.dt * block as f64;
    let mut s2 = vec![0.0_f64; n_paths];
    let mut s4 = vec![0.0_f64; n_paths];
    for path in 0..n_paths {
        let lp = &full[path * stride..(path + 1) * stride];
        let (mut p2, mut p4) = (0.0_f64, 0.0_f64);
        for b in 0..blocks_per_path {
            let k0 = skip + b * block;
            let r = lp[k0 + block] - lp[k0] - drift;
            let r2 = r * r;
            p2 += r2;
            p4 += r2 * r2;
        }
        s2[path] = p2;
        s4[path] = p4;
    }
    let tot2: f64 = s2.iter().sum();
    let tot4: f64 = s4.iter().sum();
    let nf = points as f64;
    let kurt = (tot4 / nf) / (tot2 / nf) / (tot2 / nf);
    let per_path = blocks_per_path as f64;
    let nf_loo = nf - per_path;
    let mut jack_sum = 0.0_f64;
    let mut jack_sq = 0.0_f64;
    for path in 0..n_paths {
        let m2 = (tot2 - s2[path]) / nf_loo;
        let m4 = (tot4 - s4[path]) / nf_loo;
        let k = m4 / (m2 * m2);
        jack_sum += k;
        jack_sq += k * k;
    }
    let np = n_paths as f64;
    let jack_mean = jack_sum / np;
    let jack_var = (jack_sq / np - jack_mean * jack_mean).max(0.0);
    let se = sqrt((np - 1.0) * jack_var);
    Ok(KurtosisEstimate { kurtosis: kurt, standard_error: se, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::discrete_kurtosis;
    use crate::params::{validate_continuous, ContinuousParams};

    fn fig1(mu: f64) -> ValidatedContinuousParams {
        validate_continuous(ContinuousParams { omega: 0.0045, theta: 0.05, alpha: 0.1, mu })
            .unwrap()
    }

    fn cfg(n_paths: u32, n_steps: u32, horizon: f64, scheme: Scheme) -> SimConfig {
        SimConfig {
            n_paths,
            n_steps,
            horizon,
            seed: 11,
            scheme,
            v0: 0.09,
            store_full_paths: false,
            strict_kurtosis: false,
        }
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, sqrt(var / n))
    }

    #[test]
    fn config_validation_rejects_degenerate_grids() {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.75);
        for bad in [
            SimConfig { n_paths: 0, ..cfg(1, 1, 1.0, Scheme::DiffusionEuler) },
            SimConfig { n_steps: 0, ..cfg(1, 1, 1.0, Scheme::DiffusionEuler) },
            SimConfig { horizon: 0.0, ..cfg(1, 1, 1.0, Scheme::DiffusionEuler) },
            SimConfig { v0: -0.1, ..cfg(1, 1, 1.0, Scheme::DiffusionEuler) },
        ] {
            assert!(matches!(
                simulate(&c, &k, bad),
                Err(SimError::InvalidConfig { .. })
            ));
        }
    }

    #[test]
    fn zero_alpha_freezes_variance_at_the_stationary_level() {
        let c = validate_continuous(ContinuousParams {
            omega: 0.0045,
            theta: 0.05,
            alpha: 0.0,
            mu: 0.0,
        })
        .unwrap();
        let k = KurtosisSpec::constant(3.0);
        for scheme in [Scheme::DiffusionEuler, Scheme::GarchConsistent] {
            let mut config = cfg(64, 200, 1.0, scheme);
            config.v0 = c.long_run_variance();
            let paths = simulate(&c, &k, config).unwrap();
            // Per-step rounding of ω - θ·(ω/θ) leaves dust on the order of
            // one ulp of v0 per step; 200 steps stay far below 1e-12.
            for &v in &paths.terminal_variances {
                assert!((v - config.v0).abs() <= 1e-12, "variance drifted to {v}");
            }
        }
    }

    #[test]
    fn gaussian_garch_consistent_reduces_to_plain_recursion() {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.0);
        let config = cfg(8, 50, 0.5, Scheme::GarchConsistent);
        let paths = simulate(&c, &k, config).unwrap();
        let dt = 0.5 / 50.0;
        let disc = continuous_to_discrete(&c, StepLength::new(dt).unwrap()).unwrap();
        for path in 0..8u64 {
            let mut src = NormalSource::new(config.seed, path);
            let mut ln_s = 0.0;
            let mut v = config.v0;
            for _ in 0..50 {
                let xi = src.next_normal();
                ln_s += sqrt(dt * v) * xi;
                v = disc.params.omega + disc.params.beta * v + disc.params.alpha * v * (xi * xi);
            }
            assert_eq!(ln_s.to_bits(), paths.terminal_log_prices[path as usize].to_bits());
            assert_eq!(v.to_bits(), paths.terminal_variances[path as usize].to_bits());
        }
    }

    #[test]
    fn euler_terminal_price_is_a_martingale_at_zero_drift() {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.75);
        let paths = simulate(&c, &k, cfg(40_000, 500, 1.0, Scheme::DiffusionEuler)).unwrap();
        let gross: Vec<f64> = paths.terminal_log_prices.iter().map(|&x| libm::exp(x)).collect();
        let (mean, se) = mean_se(&gross);
        assert!(
            (mean - 1.0).abs() <= 4.0 * se,
            "E[S_T/S_0] = {mean} +- {se}"
        );
    }

    #[test]
    fn mean_variance_tracks_the_exact_ode() {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.75);
        let targets = [(0.25, 0.149_254_668_029_632_89), (1.0, 0.147_073_765_470_042_83)];
        for scheme in [Scheme::DiffusionEuler, Scheme::GarchConsistent] {
            for (t, want) in targets {
                let mut config = cfg(25_000, (t * 400.0) as u32, t, scheme);
                config.v0 = 0.15;
                config.seed = 17;
                let paths = simulate(&c, &k, config).unwrap();
                let (mean, se) = mean_se(&paths.terminal_variances);
                assert!(
                    (mean - want).abs() <= 3.0 * se,
                    "{scheme:?} t={t}: E[V_t] = {mean} +- {se}, want {want}"
                );
            }
        }
    }

    #[test]
    fn innovation_pair_moments_match_the_construction() {
        let mut src = NormalSource::new(5, 0);
        let n = 500_000u32;
        let (mut se_, mut se2, mut sxe) = (0.0_f64, 0.0, 0.0);
        for _ in 0..n {
            let pair = InnovationPair::new(src.next_normal());
            se_ += pair.eta;
            se2 += pair.eta * pair.eta;
            sxe += pair.xi * pair.eta;
        }
        let nf = n as f64;
        // E[eta] = 0 with var 1; E[eta^2] = 1 with var 14; E[xi eta] = 0
        // with var 5 (Gaussian moments of (xi^2 - 1)/sqrt(2)).
        assert!((se_ / nf).abs() <= 4.0 / sqrt(nf), "mean eta {}", se_ / nf);
        assert!((se2 / nf - 1.0).abs() <= 4.0 * sqrt(14.0 / nf), "var eta {}", se2 / nf);
        assert!((sxe / nf).abs() <= 4.0 * sqrt(5.0 / nf), "corr term {}", sxe / nf);
        assert_eq!(InnovationPair::new(1.0).eta, 0.0);
    }

    #[test]
    fn garch_consistent_never_truncates_variance() {
        let c = fig1(0.0);
        let k =
            KurtosisSpec { kappa: crate::params::UnconditionalKurtosis::Implied, kappa_a: 7.0, kappa_b: -2.0 };
        let paths = simulate(&c, &k, cfg(2_000, 500, 1.0, Scheme::GarchConsistent)).unwrap();
        assert_eq!(paths.diagnostics.truncated_steps, 0);
        assert!(paths.terminal_variances.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn euler_truncation_explosion_is_reported() {
        let c = validate_continuous(ContinuousParams {
            omega: 0.0005,
            theta: 0.05,
            alpha: 0.21,
            mu: 0.0,
        })
        .unwrap();
        let k = KurtosisSpec::constant(25.0);
        let mut config = cfg(500, 20, 10.0, Scheme::DiffusionEuler);
        config.v0 = 0.01;
        assert!(matches!(
            simulate(&c, &k, config),
            Err(SimError::NegativeVarianceExplosion { .. })
        ));
    }

    #[test]
    fn strict_mode_rejects_subgaussian_kurtosis_paths() {
        let c = fig1(0.0);
        let k = KurtosisSpec {
            kappa: crate::params::UnconditionalKurtosis::Implied,
            kappa_a: 7.0,
            kappa_b: -2.0,
        };
        // tau spans (0, 2.5]; kappa(tau) = 7 - 2tau dips below 3 for tau > 2.
        let mut config = cfg(4, 250, 2.5, Scheme::GarchConsistent);
        config.strict_kurtosis = true;
        assert!(matches!(
            simulate(&c, &k, config),
            Err(SimError::InvalidKurtosisPath { .. })
        ));
        config.strict_kurtosis = false;
        let paths = simulate(&c, &k, config).unwrap();
        assert!(paths.diagnostics.kappa_clamped_steps > 0);
    }

    #[test]
    fn simulation_is_deterministic_and_storage_neutral() {
        let c = fig1(0.01);
        let k = KurtosisSpec::constant(5.0);
        let config = cfg(64, 100, 1.0, Scheme::GarchConsistent);
        let a = simulate(&c, &k, config).unwrap();
        let b = simulate(&c, &k, config).unwrap();
        assert_eq!(a, b);
        let mut with_full = config;
        with_full.store_full_paths = true;
        let f = simulate(&c, &k, with_full).unwrap();
        assert_eq!(f.terminal_log_prices, a.terminal_log_prices);
        assert_eq!(f.terminal_variances, a.terminal_variances);
        let m = f.full_log_prices.as_ref().unwrap();
        assert_eq!(m.len(), 64 * 101);
        for path in 0..64 {
            let lp = f.path_log_prices(path).unwrap();
            assert_eq!(lp[0], 0.0);
            assert_eq!(lp[100], a.terminal_log_prices[path]);
        }
    }

    fn blp_paths(n_paths: u32) -> (PathSet, DiscreteGarchParams) {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.0);
        let mut config = cfg(n_paths, 400, 0.4, Scheme::GarchConsistent);
        config.store_full_paths = true;
        config.seed = 23;
        let paths = simulate(&c, &k, config).unwrap();
        let disc = continuous_to_discrete(&c, StepLength::new(paths.dt).unwrap()).unwrap();
        (paths, *disc.params)
    }

    #[test]
    fn blp_orthogonality_holds_on_garch_consistent_paths() {
        let (paths, params) = blp_paths(12_000);
        let report = blp_orthogonality_check(&paths, &params).unwrap();
        assert_eq!(report.moments.len(), 15);
        assert!(
            report.all_within(4.0),
            "max |z| = {} over {:?}",
            report.max_abs_z,
            report.moments
        );
    }

    #[test]
    fn blp_orthogonality_rejects_perturbed_parameters() {
        let (paths, params) = blp_paths(12_000);
        let mut wrong = params;
        wrong.beta += 0.05;
        let report = blp_orthogonality_check(&paths, &wrong).unwrap();
        let worst_r2 = report
            .moments
            .iter()
            .filter(|m| m.r == 2)
            .map(|m| m.z.abs())
            .fold(0.0_f64, f64::max);
        assert!(worst_r2 > 4.0, "negative control too weak: {worst_r2}");
    }

    #[test]
    fn blp_orthogonality_preconditions() {
        let (paths, params) = blp_paths(12_000);
        let mut no_full = paths.clone();
        no_full.full_log_prices = None;
        assert!(matches!(
            blp_orthogonality_check(&no_full, &params),
            Err(SimError::InsufficientData { .. })
        ));
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.0);
        let mut small = cfg(500, 40, 0.04, Scheme::GarchConsistent);
        small.store_full_paths = true;
        let few = simulate(&c, &k, small).unwrap();
        let disc = continuous_to_discrete(&c, StepLength::new(few.dt).unwrap()).unwrap();
        assert!(matches!(
            blp_orthogonality_check(&few, &disc.params),
            Err(SimError::InsufficientPaths { .. })
        ));
    }

    #[test]
    fn sample_kurtosis_is_gaussian_for_iid_returns() {
        let c = validate_continuous(ContinuousParams {
            omega: 0.0045,
            theta: 0.05,
            alpha: 0.0,
            mu: 0.0,
        })
        .unwrap();
        let k = KurtosisSpec::constant(3.0);
        let mut config = cfg(2_000, 600, 0.6, Scheme::GarchConsistent);
        config.v0 = 0.09;
        config.store_full_paths = true;
        let paths = simulate(&c, &k, config).unwrap();
        let est = sample_kurtosis(&paths, 0, 1).unwrap();
        assert_eq!(est.points, 1_200_000);
        assert!(
            (est.kurtosis - 3.0).abs() <= 3.0 * est.standard_error,
            "kurtosis {} +- {}",
            est.kurtosis,
            est.standard_error
        );
    }

    #[test]
    fn sample_kurtosis_matches_the_step_display_and_aggregation() {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.0);
        // Variance mean-reverts on the 1/θ = 20-year scale; the estimator
        // needs several relaxation times per path, so horizon 100 years
        // with a 40-year burn-in.
        let mut config = cfg(170, 100_000, 100.0, Scheme::GarchConsistent);
        config.v0 = 0.09;
        config.store_full_paths = true;
        config.seed = 31;
        let paths = simulate(&c, &k, config).unwrap();
        let dt = StepLength::new(paths.dt).unwrap();
        let display = discrete_kurtosis(&c, dt);
        let est = sample_kurtosis(&paths, 40_000, 1).unwrap();
        assert!(
            (est.kurtosis - display).abs() <= 4.0 * est.standard_error,
            "one-step kurtosis {} +- {} vs display {display}",
            est.kurtosis,
            est.standard_error
        );
        // Aggregation relation: the 10-step kurtosis predicted from the
        // measured one-step kurtosis, with the one-step uncertainty
        // propagated through the (locally linear) forward map.
        let disc = continuous_to_discrete(&c, dt).unwrap();
        let predict =
            |kappa: f64| crate::aggregation::kurtosis_forward(&disc.params, kappa, 10);
        let target = predict(est.kurtosis);
        let h = 1e-4;
        let slope = (predict(est.kurtosis + h) - predict(est.kurtosis - h)) / (2.0 * h);
        let est10 = sample_kurtosis(&paths, 40_000, 10).unwrap();
        let se = sqrt(
            est10.standard_error * est10.standard_error
                + slope * slope * est.standard_error * est.standard_error,
        );
        assert!(
            (est10.kurtosis - target).abs() <= 4.0 * se,
            "10-step kurtosis {} +- {} vs predicted {target}",
            est10.kurtosis,
            est10.standard_error
        );
    }

    #[test]
    fn sample_kurtosis_requires_enough_points() {
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.0);
        let mut config = cfg(100, 100, 0.1, Scheme::GarchConsistent);
        config.store_full_paths = true;
        let paths = simulate(&c, &k, config).unwrap();
        assert!(matches!(
            sample_kurtosis(&paths, 0, 1),
            Err(SimError::InsufficientData { .. })
        ));
    }

    #[test]
    fn schemes_agree_on_terminal_variance_moments_at_gaussian_kurtosis() {
        // At κ ≡ 3 both schemes discretize the same (Nelson) diffusion:
        // the variance-noise rates match, Euler at α√2·V·√dt per step and
        // the recursion at Δα·V·(ξ²-1) with Δα = α√dt + O(dt).
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.0);
        let euler = simulate(&c, &k, cfg(20_000, 1000, 1.0, Scheme::DiffusionEuler)).unwrap();
        let garch =
            simulate(&c, &k, cfg(20_000, 1000, 1.0, Scheme::GarchConsistent)).unwrap();
        let (me, se_e) = mean_se(&euler.terminal_variances);
        let (mg, se_g) = mean_se(&garch.terminal_variances);
        let se_mean = sqrt(se_e * se_e + se_g * se_g);
        assert!((me - mg).abs() <= 4.0 * se_mean, "means {me} vs {mg} +- {se_mean}");
        let center = 0.5 * (me + mg);
        let var_stats = |vs: &[f64]| {
            let devs: Vec<f64> = vs.iter().map(|&v| (v - center) * (v - center)).collect();
            mean_se(&devs)
        };
        let (ve, sve) = var_stats(&euler.terminal_variances);
        let (vg, svg) = var_stats(&garch.terminal_variances);
        let se_var = sqrt(sve * sve + svg * svg);
        assert!((ve - vg).abs() <= 4.0 * se_var, "variances {ve} vs {vg} +- {se_var}");
    }

    #[test]
    fn schemes_agree_in_mean_and_differ_in_spread_at_excess_kurtosis() {
        // For κ > 3 the u-term recursion carries per-step variance noise
        // Δα²·V²·(κ-1)²/2 against the diffusion's α²·V²·(κ-1)·dt, a ratio
        // of (κ-1)/2; the terminal-variance mean still agrees (both drifts
        // discretize the same linear ODE) but the spread does not.
        let c = fig1(0.0);
        let k = KurtosisSpec::constant(3.75);
        let euler = simulate(&c, &k, cfg(10_000, 1000, 1.0, Scheme::DiffusionEuler)).unwrap();
        let garch =
            simulate(&c, &k, cfg(10_000, 1000, 1.0, Scheme::GarchConsistent)).unwrap();
        let (me, se_e) = mean_se(&euler.terminal_variances);
        let (mg, se_g) = mean_se(&garch.terminal_variances);
        let se_mean = sqrt(se_e * se_e + se_g * se_g);
        assert!((me - mg).abs() <= 4.0 * se_mean, "means {me} vs {mg} +- {se_mean}");
        let center = 0.5 * (me + mg);
        let spread = |vs: &[f64]| {
            vs.iter().map(|&v| (v - center) * (v - center)).sum::<f64>() / vs.len() as f64
        };
        let ratio = spread(&garch.terminal_variances) / spread(&euler.terminal_variances);
        assert!(
            ratio > 1.2 && ratio < (3.75 - 1.0) / 2.0,
            "variance-of-variance ratio {ratio}"
        );
    }
}
