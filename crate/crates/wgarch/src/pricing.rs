//! European option valuation: Black-Scholes closed form, implied-vol
//! inversion, Monte Carlo pricing over a [`PathSet`], and the smile
//! experiment that prices a strike grid on common random numbers.

use crate::dist::norm_cdf;
use crate::params::{KurtosisSpec, ValidatedContinuousParams};
use crate::roots::{brent, RootError};
use crate::simulate::{simulate, PathSet, SimConfig, SimError};
use alloc::vec::Vec;
use core::fmt;
use libm::{exp, log, sqrt};
use serde::{Deserialize, Serialize};

pub const VOL_BRACKET_LO: f64 = 1e-4;
pub const VOL_BRACKET_HI: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSpec {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub is_call: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PricingError {
    InvalidOption { name: &'static str, value: f64 },
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },
    NoConvergence { iterations: u32 },
    HorizonMismatch { paths_horizon: f64, maturity: f64 },
    DriftMismatch { paths_mu: f64, rate: f64 },
    Sim(SimError),
}

impl fmt::Display for PricingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidOption { name, value } => {
                write!(f, "InvalidOption: {name} = {value} must be positive and finite")
            }
            Self::PriceOutOfBounds { price, lower, upper } => write!(
                f,
                "PriceOutOfBounds: price {price} outside the static no-arbitrage band ({lower}, {upper})"
            ),
            Self::NoConvergence { iterations } => {
                write!(f, "NoConvergence: implied volatility search stalled after {iterations} iterations")
            }
            Self::HorizonMismatch { paths_horizon, maturity } => write!(
                f,
                "HorizonMismatch: paths simulated to horizon {paths_horizon} cannot price maturity {maturity}"
            ),
            Self::DriftMismatch { paths_mu, rate } => write!(
                f,
                "DriftMismatch: paths simulated with drift {paths_mu} cannot price at rate {rate}; risk-neutral pricing needs mu = rate"
            ),
            Self::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl From<SimError> for PricingError {
    fn from(e: SimError) -> Self {
        Self::Sim(e)
    }
}

fn check_option(o: &OptionSpec) -> Result<(), PricingError> {
    for (name, value) in [("spot", o.spot), ("strike", o.strike), ("maturity", o.maturity)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(PricingError::InvalidOption { name, value });
        }
    }
    if !o.rate.is_finite() {
        return Err(PricingError::InvalidOption { name: "rate", value: o.rate });
    }
    Ok(())
}

/// Black-Scholes price. The put value comes from the call via parity, so
/// parity holds to the last bit.
pub fn bs_price(o: &OptionSpec, sigma: f64) -> f64 {
    let df = exp(-o.rate * o.maturity);
    let sd = sigma * sqrt(o.maturity);
    let d1 = (log(o.spot / o.strike) + (o.rate + 0.5 * sigma * sigma) * o.maturity) / sd;
    let d2 = d1 - sd;
    let call = o.spot * norm_cdf(d1) - o.strike * df * norm_cdf(d2);
    if o.is_call {
        call
    } else {
        call - o.spot + o.strike * df
    }
}

/// Static no-arbitrage band (lower, upper), exclusive on both ends for a
/// price to be invertible.
pub fn no_arbitrage_bounds(o: &OptionSpec) -> (f64, f64) {
    let df = exp(-o.rate * o.maturity);
    if o.is_call {
        ((o.spot - o.strike * df).max(0.0), o.spot)
    } else {
        ((o.strike * df - o.spot).max(0.0), o.strike * df)
    }
}

/// Inverts [`bs_price`] on the bracket [1e-4, 5]. Prices inside the
/// no-arbitrage band but beyond what the bracket can represent clamp to
/// the nearer bracket edge rather than erroring.
pub fn implied_vol(o: &OptionSpec, price: f64) -> Result<f64, PricingError> {
    check_option(o)?;
    let (lower, upper) = no_arbitrage_bounds(o);
    if !price.is_finite() || price <= lower || price >= upper {
        return Err(PricingError::PriceOutOfBounds { price, lower, upper });
    }
    if bs_price(o, VOL_BRACKET_LO) >= price {
        return Ok(VOL_BRACKET_LO);
    }
    if bs_price(o, VOL_BRACKET_HI) <= price {
        return Ok(VOL_BRACKET_HI);
    }
    match brent(
        |sigma| bs_price(o, sigma) - price,
        VOL_BRACKET_LO,
        VOL_BRACKET_HI,
        1e-12,
        1e-11,
        200,
    ) {
        Ok(r) => Ok(r.root),
        Err(RootError::MaxIterations { .. } | RootError::NoSignChange { .. }) => {
            Err(PricingError::NoConvergence { iterations: 200 })
        }
    }
}

/// Discounted mean payoff over the terminal prices of a [`PathSet`], with
/// the sample standard error of that mean. The paths must have been
/// generated under the pricing measure: drift equal to the rate and
/// horizon equal to the maturity.
pub fn mc_price(paths: &PathSet, o: &OptionSpec) -> Result<(f64, f64), PricingError> {
    check_option(o)?;
    if (paths.config.horizon - o.maturity).abs() > 1e-12 * o.maturity.max(1.0) {
        return Err(PricingError::HorizonMismatch {
            paths_horizon: paths.config.horizon,
            maturity: o.maturity,
        });
    }
    if (paths.mu - o.rate).abs() > 1e-12 {
        return Err(PricingError::DriftMismatch { paths_mu: paths.mu, rate: o.rate });
    }
    let df = exp(-o.rate * o.maturity);
    let mut sum = 0.0_f64;
    let mut sum_sq = 0.0_f64;
    for &x in &paths.terminal_log_prices {
        let s_t = o.spot * exp(x);
        let payoff = if o.is_call { (s_t - o.strike).max(0.0) } else { (o.strike - s_t).max(0.0) };
        let discounted = df * payoff;
        sum += discounted;
        sum_sq += discounted * discounted;
    }
    let n = paths.terminal_log_prices.len() as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok((mean, sqrt(var / n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmileRow {
    pub strike: f64,
    pub moneyness: f64,
    pub price: f64,
    pub price_se: f64,
    pub implied_vol: Option<f64>,
    pub iv_lo: Option<f64>,
    pub iv_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileResult {
    pub rows: Vec<SmileRow>,
}

fn invert_or_skip(o: &OptionSpec, price: f64) -> Result<Option<f64>, PricingError> {
    match implied_vol(o, price) {
        Ok(v) => Ok(Some(v)),
        Err(PricingError::PriceOutOfBounds { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Prices a strike grid against one shared [`PathSet`] (common random
/// numbers) and inverts each price and its ±1-SE band. Band edges that
/// leave the no-arbitrage band are pulled just inside it before
/// inversion; a central price outside the band yields empty vol fields.
pub fn smile_from_paths(
    paths: &PathSet,
    strikes: &[f64],
    o_template: &OptionSpec,
) -> Result<SmileResult, PricingError> {
    let mut rows = Vec::with_capacity(strikes.len());
    for &strike in strikes {
        let o = OptionSpec { strike, ..*o_template };
        let (price, price_se) = mc_price(paths, &o)?;
        let implied = invert_or_skip(&o, price)?;
        let (mut iv_lo, mut iv_hi) = (None, None);
        if implied.is_some() {
            let (lower, upper) = no_arbitrage_bounds(&o);
            let pad = 1e-12 * o.spot;
            let clamp = |p: f64| p.max(lower + pad).min(upper - pad);
            iv_lo = invert_or_skip(&o, clamp(price - price_se))?;
            iv_hi = invert_or_skip(&o, clamp(price + price_se))?;
        }
        rows.push(SmileRow {
            strike,
            moneyness: strike / o.spot,
            price,
            price_se,
            implied_vol: implied,
            iv_lo,
            iv_hi,
        });
    }
    Ok(SmileResult { rows })
}

/// Simulates one path set under (c, k, cfg) and prices every strike on
/// it. The template's maturity must equal the simulation horizon and its
/// rate the drift, so the run is priced under its own measure.
pub fn smile(
    c: &ValidatedContinuousParams,
    k: &KurtosisSpec,
    cfg: SimConfig,
    strikes: &[f64],
    o_template: &OptionSpec,
) -> Result<SmileResult, PricingError> {
    check_option(o_template)?;
    for &strike in strikes {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(PricingError::InvalidOption { name: "strike", value: strike });
        }
    }
    if (cfg.horizon - o_template.maturity).abs() > 1e-12 * o_template.maturity.max(1.0) {
        return Err(PricingError::HorizonMismatch {
            paths_horizon: cfg.horizon,
            maturity: o_template.maturity,
        });
    }
    if (c.mu - o_template.rate).abs() > 1e-12 {
        return Err(PricingError::DriftMismatch { paths_mu: c.mu, rate: o_template.rate });
    }
    let paths = simulate(c, k, cfg)?;
    smile_from_paths(&paths, strikes, o_template)
}
