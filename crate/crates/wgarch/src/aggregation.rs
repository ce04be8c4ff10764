//! Exact temporal aggregation of weak GARCH parameters from a fine step
//! δ to a coarse step Δ = nδ, and its numerical inverse.
//!
//! The forward map is closed-form: the persistence aggregates as λⁿ, the
//! intercept through the geometric sum, the kurtosis through an affine
//! relation, and β through a quadratic whose coefficient ratio c is
//! computed here in a cancellation-free form (the classical display
//! subtracts nearly equal geometric sums; this one accumulates them as
//! nested partial sums, see [`c_factor`]). The inverse solves the coupled
//! (α, κ) system by a bracketed one-dimensional search on the fine α.

use crate::params::{
    validate_discrete, DiscreteGarchParams, ParamError, StepLength, ValidatedDiscreteGarchParams,
};
use crate::roots::{brent, RootError};
use core::fmt;
use libm::{pow, sqrt};

/// Output of [`aggregate`] and [`disaggregate`]: parameters at the target
/// step, the unconditional kurtosis there, and the diagnostic c factor
/// from the β relation (`None` on the degenerate α = 0 branch where c is
/// undefined).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationResult {
    pub params: ValidatedDiscreteGarchParams,
    pub kurtosis: f64,
    pub c_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregationError {
    NotIntegerMultiple { coarse_delta: f64, fine_delta: f64 },
    NoValidBetaRoot { denominator: f64 },
    DegenerateAlpha,
    NoSolutionInBracket { residual_lo: f64, residual_hi: f64 },
    ConvergenceFailure { iterations: u32 },
    InvalidKurtosis { kappa: f64 },
    Param(ParamError),
}

impl fmt::Display for AggregationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotIntegerMultiple { coarse_delta, fine_delta } => write!(
                f,
                "NotIntegerMultiple: step ratio {coarse_delta} / {fine_delta} is not a positive integer"
            ),
            Self::NoValidBetaRoot { denominator } => write!(
                f,
                "NoValidBetaRoot: beta quadratic has no root in [0, 1) (denominator {denominator} <= 0); inputs lie outside the weak-GARCH aggregation region"
            ),
            Self::DegenerateAlpha => {
                write!(f, "DegenerateAlpha: c factor is undefined at alpha = 0")
            }
            Self::NoSolutionInBracket { residual_lo, residual_hi } => write!(
                f,
                "NoSolutionInBracket: no fine-step alpha in (0, lambda) matches the coarse parameters (residuals {residual_lo} and {residual_hi}); they are not the aggregate of any finer weak GARCH"
            ),
            Self::ConvergenceFailure { iterations } => {
                write!(f, "ConvergenceFailure: root finder exhausted {iterations} iterations")
            }
            Self::InvalidKurtosis { kappa } => write!(
                f,
                "InvalidKurtosis: kurtosis {kappa} must be finite and exceed 3 when alpha > 0"
            ),
            Self::Param(e) => write!(f, "{e}"),
        }
    }
}

impl From<ParamError> for AggregationError {
    fn from(e: ParamError) -> Self {
        Self::Param(e)
    }
}

/// S = Σ_{j=1}^{n-1} Σ_{i=0}^{j-1} L^i, accumulated as running partial
/// geometric sums so that n(1-L) - (1-L^n) = (1-L)²·S holds without
/// subtractive cancellation.
fn geom_s(l: f64, n: u64) -> f64 {
    let mut total = 0.0;
    let mut partial = 0.0;
    let mut lpow = 1.0;
    for _ in 1..n {
        partial += lpow;
        lpow *= l;
        total += partial;
    }
    total
}

/// Σ_{i=0}^{n-1} L^{2i}.
fn geom2(l: f64, n: u64) -> f64 {
    let l2 = l * l;
    let mut total = 0.0;
    let mut p = 1.0;
    for _ in 0..n {
        total += p;
        p *= l2;
    }
    total
}

/// Numerator and denominator of the c factor, both positive inside the
/// validity region; c = N/D and the β quadratic's stable form uses them
/// separately to avoid forming c - 1 by subtraction.
fn nc_dc(alpha: f64, beta: f64, kappa: f64, n: u64) -> (f64, f64) {
    let l = alpha + beta;
    let nf = n as f64;
    let s = geom_s(l, n);
    let a1 = nf * (1.0 - beta) * (1.0 - beta);
    let a2 = 2.0 * nf * (nf - 1.0) * (1.0 - l) * (1.0 - l * l + alpha * alpha)
        / ((kappa - 1.0) * (1.0 + l));
    let a3 = 4.0 * alpha * (1.0 - beta * l) * (1.0 - l) * s / (1.0 + l);
    let d = alpha * (1.0 - beta * l) * geom2(l, n);
    (a1 + a2 + a3, d)
}

/// Shared weight in the kurtosis relation; zero when α = 0.
fn kurtosis_weight(alpha: f64, beta: f64, n: u64) -> f64 {
    let l = alpha + beta;
    let nf = n as f64;
    geom_s(l, n) * alpha * (1.0 - l * l + alpha * l) / (nf * nf * (1.0 - l * l + alpha * alpha))
}

/// Coarse-step unconditional kurtosis after aggregating `n` fine steps:
/// Δκ = 3 + (δκ - 3)/n + 6(δκ - 1)·W(α, β, n). Exposed on its own
/// because it is well defined even where the β quadratic is not.
pub fn kurtosis_forward(fine: &ValidatedDiscreteGarchParams, fine_kappa: f64, n: u64) -> f64 {
    let nf = n as f64;
    let w = kurtosis_weight(fine.alpha, fine.beta, n);
    3.0 + (fine_kappa - 3.0) / nf + 6.0 * (fine_kappa - 1.0) * w
}

/// Exact inverse of the kurtosis relation in the fine κ (which enters
/// affinely): δκ = (Δκ - 3 + 3/n + 6W) / (1/n + 6W).
fn kurtosis_inverse(alpha: f64, beta: f64, coarse_kappa: f64, n: u64) -> f64 {
    let nf = n as f64;
    let w = kurtosis_weight(alpha, beta, n);
    (coarse_kappa - 3.0 + 3.0 / nf + 6.0 * w) / (1.0 / nf + 6.0 * w)
}

fn frequency_ratio(coarse_delta: f64, fine_delta: f64) -> Result<u64, AggregationError> {
    let err = AggregationError::NotIntegerMultiple { coarse_delta, fine_delta };
    let ratio = coarse_delta / fine_delta;
    if !ratio.is_finite() || ratio < 0.5 {
        return Err(err);
    }
    let n = libm::round(ratio);
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(err);
    }
    Ok(n as u64)
}

fn check_kappa(alpha: f64, kappa: f64) -> Result<(), AggregationError> {
    if !kappa.is_finite() || (alpha > 0.0 && kappa <= 3.0) {
        return Err(AggregationError::InvalidKurtosis { kappa });
    }
    Ok(())
}

/// The scalar c relating coarse persistence to the β quadratic
/// β/(1+β²) = (cλⁿ - 1)/(c(1 + λ²ⁿ) - 2). Requires α > 0.
pub fn c_factor(
    fine: &ValidatedDiscreteGarchParams,
    fine_kappa: f64,
    n: u64,
) -> Result<f64, AggregationError> {
    check_kappa(fine.alpha, fine_kappa)?;
    if fine.alpha == 0.0 {
        return Err(AggregationError::DegenerateAlpha);
    }
    let (nc, dc) = nc_dc(fine.alpha, fine.beta, fine_kappa, n);
    Ok(nc / dc)
}

/// Aggregates fine-step weak GARCH parameters with unconditional kurtosis
/// `fine_kappa` up to `coarse_delta`, an integer multiple of the fine step.
pub fn aggregate(
    fine: &ValidatedDiscreteGarchParams,
    fine_kappa: f64,
    coarse_delta: StepLength,
) -> Result<AggregationResult, AggregationError> {
    let n = frequency_ratio(coarse_delta.years(), fine.delta.years())?;
    check_kappa(fine.alpha, fine_kappa)?;
    if n == 1 {
        let c = if fine.alpha > 0.0 { Some(c_factor(fine, fine_kappa, 1)?) } else { None };
        return Ok(AggregationResult { params: *fine, kurtosis: fine_kappa, c_factor: c }
            .revalidate(coarse_delta)?);
    }
    let nf = n as f64;
    if fine.alpha == 0.0 {
        let lam = pow(fine.beta, nf);
        let params = DiscreteGarchParams {
            delta: coarse_delta,
            omega: fine.omega * (1.0 - lam) / (1.0 - fine.beta),
            alpha: 0.0,
            beta: lam,
        };
        return Ok(AggregationResult {
            params: validate_discrete(params)?,
            kurtosis: 3.0 + (fine_kappa - 3.0) / nf,
            c_factor: None,
        });
    }
    let l = fine.lambda();
    let lam = pow(l, nf);
    let (nc, dc) = nc_dc(fine.alpha, fine.beta, fine_kappa, n);
    let den = nc * lam - dc;
    if den <= 0.0 {
        return Err(AggregationError::NoValidBetaRoot { denominator: den });
    }
    // m - 2 for the quadratic x² - mx + 1 = 0, kept in offset form so the
    // smaller root 2/(m + sqrt(m² - 4)) never cancels.
    let mm2 = nc * (1.0 - lam) * (1.0 - lam) / den;
    let m = 2.0 + mm2;
    let s = sqrt(mm2 * (mm2 + 4.0));
    let beta_c = 2.0 / (m + s);
    let mut alpha_c = lam - beta_c;
    if alpha_c < 0.0 {
        if alpha_c < -1e-12 {
            return Err(AggregationError::NoValidBetaRoot { denominator: den });
        }
        alpha_c = 0.0;
    }
    let params = DiscreteGarchParams {
        delta: coarse_delta,
        omega: fine.omega * (1.0 - lam) / (1.0 - l),
        alpha: alpha_c,
        beta: beta_c,
    };
    Ok(AggregationResult {
        params: validate_discrete(params)?,
        kurtosis: kurtosis_forward(fine, fine_kappa, n),
        c_factor: Some(nc / dc),
    })
}

/// Inverts [`aggregate`]: finds fine-step parameters at `fine_delta` whose
/// aggregate reproduces `coarse` with kurtosis `coarse_kappa`.
pub fn disaggregate(
    coarse: &ValidatedDiscreteGarchParams,
    coarse_kappa: f64,
    fine_delta: StepLength,
) -> Result<AggregationResult, AggregationError> {
    let n = frequency_ratio(coarse.delta.years(), fine_delta.years())?;
    if !coarse_kappa.is_finite() {
        return Err(AggregationError::InvalidKurtosis { kappa: coarse_kappa });
    }
    if n == 1 {
        let c =
            if coarse.alpha > 0.0 { Some(c_factor(coarse, coarse_kappa, 1)?) } else { None };
        return Ok(AggregationResult { params: *coarse, kurtosis: coarse_kappa, c_factor: c }
            .revalidate(fine_delta)?);
    }
    let nf = n as f64;
    if coarse.alpha == 0.0 {
        let l = pow(coarse.beta, 1.0 / nf);
        let params = DiscreteGarchParams {
            delta: fine_delta,
            omega: coarse.omega * (1.0 - l) / (1.0 - coarse.beta),
            alpha: 0.0,
            beta: l,
        };
        return Ok(AggregationResult {
            params: validate_discrete(params)?,
            kurtosis: 3.0 + nf * (coarse_kappa - 3.0),
            c_factor: None,
        });
    }
    let lam = coarse.lambda();
    let l = pow(lam, 1.0 / nf);
    let b = coarse.beta / (1.0 + coarse.beta * coarse.beta);
    let lhs_coef = 2.0 * b - 1.0;
    let rhs_coef = b * (1.0 + lam * lam) - lam;
    // Residual of the β relation in cross-multiplied form
    // lhs_coef·D(α) - rhs_coef·N(α), with the fine κ eliminated through
    // the exact affine kurtosis inverse at each trial α.
    let mut resid = |alpha: f64| {
        let beta = l - alpha;
        let kappa = kurtosis_inverse(alpha, beta, coarse_kappa, n);
        let (nc, dc) = nc_dc(alpha, beta, kappa, n);
        lhs_coef * dc - rhs_coef * nc
    };
    let eps = 1e-14;
    let sol = match brent(&mut resid, eps, l - eps, 1e-15, 0.0, 200) {
        Ok(s) => s,
        Err(RootError::NoSignChange { f_lo, f_hi }) => {
            return Err(AggregationError::NoSolutionInBracket {
                residual_lo: f_lo,
                residual_hi: f_hi,
            })
        }
        Err(RootError::MaxIterations { .. }) => {
            return Err(AggregationError::ConvergenceFailure { iterations: 200 })
        }
    };
    let alpha_f = sol.root;
    let beta_f = l - alpha_f;
    let kappa_f = kurtosis_inverse(alpha_f, beta_f, coarse_kappa, n);
    if !(kappa_f > 3.0) || !kappa_f.is_finite() {
        return Err(AggregationError::NoSolutionInBracket {
            residual_lo: kappa_f,
            residual_hi: sol.f_root,
        });
    }
    let (nc, dc) = nc_dc(alpha_f, beta_f, kappa_f, n);
    let params = DiscreteGarchParams {
        delta: fine_delta,
        omega: coarse.omega * (1.0 - l) / (1.0 - lam),
        alpha: alpha_f,
        beta: beta_f,
    };
    Ok(AggregationResult {
        params: validate_discrete(params)?,
        kurtosis: kappa_f,
        c_factor: Some(nc / dc),
    })
}

impl AggregationResult {
    /// Rebinds the step length on the identity (n = 1) path, revalidating
    /// so the stored params carry the caller's StepLength value.
    fn revalidate(self, delta: StepLength) -> Result<Self, ParamError> {
        let p = DiscreteGarchParams { delta, ..*self.params };
        Ok(Self { params: validate_discrete(p)?, ..self })
    }
}
