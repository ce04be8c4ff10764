//! Domain types, units, and validation shared by every other module.
//!
//! All parameters are annualized: `omega` carries annualized-variance
//! units, `theta` and `mu` are per-year rates, and step lengths are in
//! years. Nothing converts units implicitly.

use core::fmt;
use core::ops::Deref;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A positive, finite time step in years.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepLength(f64);

impl StepLength {
    pub fn new(delta: f64) -> Result<Self, ParamError> {
        if !delta.is_finite() {
            return Err(ParamError::NonFiniteParameter { name: "delta" });
        }
        if delta <= 0.0 {
            return Err(ParamError::NonPositiveParameter { name: "delta", value: delta });
        }
        Ok(Self(delta))
    }

    pub fn years(self) -> f64 {
        self.0
    }
}

/// Weak GARCH parameters at a fixed step length, annualized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteGarchParams {
    pub delta: StepLength,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DiscreteGarchParams {
    /// Persistence λ = α + β.
    pub fn lambda(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Unconditional variance ω / (1 − λ).
    pub fn long_run_variance(&self) -> f64 {
        self.omega / (1.0 - self.lambda())
    }
}

/// Drift and diffusion coefficients of the variance SDE
/// dV = (ω − θV) dt + α·vol(V, κ_t) dB and the price drift μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousParams {
    pub omega: f64,
    pub theta: f64,
    pub alpha: f64,
    pub mu: f64,
}

impl ContinuousParams {
    /// Long-run variance ω / θ.
    pub fn long_run_variance(&self) -> f64 {
        self.omega / self.theta
    }
}

/// Discrete parameters that passed [`validate_discrete`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedDiscreteGarchParams(DiscreteGarchParams);

impl Deref for ValidatedDiscreteGarchParams {
    type Target = DiscreteGarchParams;

    fn deref(&self) -> &DiscreteGarchParams {
        &self.0
    }
}

/// Continuous parameters that passed [`validate_continuous`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedContinuousParams(ContinuousParams);

impl Deref for ValidatedContinuousParams {
    type Target = ContinuousParams;

    fn deref(&self) -> &ContinuousParams {
        &self.0
    }
}

impl ValidatedContinuousParams {
    /// Unconditional kurtosis of the variance-stationary limit process,
    /// 3θ / (θ − α²); exactly 3 when α = 0 (the ratio is formed first).
    pub fn implied_kurtosis(&self) -> f64 {
        3.0 * (self.theta / (self.theta - self.alpha * self.alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamError {
    StationarityViolation { lambda: f64 },
    NonPositiveOmega { omega: f64 },
    NegativeCoefficient { name: &'static str, value: f64 },
    InfiniteKurtosis { alpha: f64, theta: f64 },
    NonPositiveParameter { name: &'static str, value: f64 },
    NonFiniteParameter { name: &'static str },
    InvalidKurtosis { kappa: f64 },
    ImpliedKurtosisUnavailable,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StationarityViolation { lambda } => {
                write!(f, "StationarityViolation: lambda = {lambda} outside (0, 1)")
            }
            Self::NonPositiveOmega { omega } => {
                write!(f, "NonPositiveOmega: omega = {omega} must be > 0")
            }
            Self::NegativeCoefficient { name, value } => {
                write!(f, "NegativeCoefficient: {name} = {value} must be >= 0")
            }
            Self::InfiniteKurtosis { alpha, theta } => write!(
                f,
                "InfiniteKurtosis: alpha^2 = {} must stay below theta = {theta}",
                alpha * alpha
            ),
            Self::NonPositiveParameter { name, value } => {
                write!(f, "NonPositiveParameter: {name} = {value} must be > 0")
            }
            Self::NonFiniteParameter { name } => {
                write!(f, "NonFiniteParameter: {name} must be finite")
            }
            Self::InvalidKurtosis { kappa } => {
                write!(f, "InvalidKurtosis: kappa = {kappa} outside the representable range")
            }
            Self::ImpliedKurtosisUnavailable => write!(
                f,
                "ImpliedKurtosisUnavailable: kappa = \"implied\" needs continuous parameters"
            ),
        }
    }
}

fn require_finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NonFiniteParameter { name })
    }
}

/// Checks ω > 0, α ≥ 0, 0 ≤ β < 1, and 0 < λ < 1, returning the
/// parameters unchanged behind a validated wrapper.
pub fn validate_discrete(
    p: DiscreteGarchParams,
) -> Result<ValidatedDiscreteGarchParams, ParamError> {
    StepLength::new(p.delta.years())?;
    require_finite("omega", p.omega)?;
    require_finite("alpha", p.alpha)?;
    require_finite("beta", p.beta)?;
    if !(p.omega > 0.0) {
        return Err(ParamError::NonPositiveOmega { omega: p.omega });
    }
    if !(p.alpha >= 0.0) {
        return Err(ParamError::NegativeCoefficient { name: "alpha", value: p.alpha });
    }
    if !(p.beta >= 0.0) {
        return Err(ParamError::NegativeCoefficient { name: "beta", value: p.beta });
    }
    let lambda = p.lambda();
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(ParamError::StationarityViolation { lambda });
    }
    Ok(ValidatedDiscreteGarchParams(p))
}

/// Checks ω > 0, θ > 0, 0 ≤ α, and α² < θ (finite kurtosis), returning
/// the parameters unchanged behind a validated wrapper.
pub fn validate_continuous(
    p: ContinuousParams,
) -> Result<ValidatedContinuousParams, ParamError> {
    require_finite("omega", p.omega)?;
    require_finite("theta", p.theta)?;
    require_finite("alpha", p.alpha)?;
    require_finite("mu", p.mu)?;
    if !(p.omega > 0.0) {
        return Err(ParamError::NonPositiveParameter { name: "omega", value: p.omega });
    }
    if !(p.theta > 0.0) {
        return Err(ParamError::NonPositiveParameter { name: "theta", value: p.theta });
    }
    if !(p.alpha >= 0.0) {
        return Err(ParamError::NegativeCoefficient { name: "alpha", value: p.alpha });
    }
    if p.alpha * p.alpha >= p.theta {
        return Err(ParamError::InfiniteKurtosis { alpha: p.alpha, theta: p.theta });
    }
    Ok(ValidatedContinuousParams(p))
}

/// Unconditional kurtosis: an explicit value or the marker `"implied"`,
/// meaning compute 3θ/(θ − α²) from the continuous parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnconditionalKurtosis {
    Explicit(f64),
    Implied,
}

impl Serialize for UnconditionalKurtosis {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Explicit(k) => serializer.serialize_f64(*k),
            Self::Implied => serializer.serialize_str("implied"),
        }
    }
}

impl<'de> Deserialize<'de> for UnconditionalKurtosis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KappaVisitor;

        impl serde::de::Visitor<'_> for KappaVisitor {
            type Value = UnconditionalKurtosis;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"implied\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(UnconditionalKurtosis::Explicit(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(UnconditionalKurtosis::Explicit(v as f64))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(UnconditionalKurtosis::Explicit(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "implied" {
                    Ok(UnconditionalKurtosis::Implied)
                } else {
                    Err(E::invalid_value(serde::de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(KappaVisitor)
    }
}

fn default_kappa() -> UnconditionalKurtosis {
    UnconditionalKurtosis::Implied
}

fn default_kappa_a() -> f64 {
    3.0
}

/// Kurtosis inputs: the unconditional level plus the affine instantaneous
/// path κ(τ) = kappa_a + kappa_b·τ on time-to-maturity, clamped below at 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KurtosisSpec {
    #[serde(default = "default_kappa")]
    pub kappa: UnconditionalKurtosis,
    #[serde(default = "default_kappa_a")]
    pub kappa_a: f64,
    #[serde(default)]
    pub kappa_b: f64,
}

impl Default for KurtosisSpec {
    fn default() -> Self {
        Self { kappa: default_kappa(), kappa_a: default_kappa_a(), kappa_b: 0.0 }
    }
}

impl KurtosisSpec {
    pub fn constant(kappa: f64) -> Self {
        Self {
            kappa: UnconditionalKurtosis::Explicit(kappa),
            kappa_a: kappa,
            kappa_b: 0.0,
        }
    }

    /// Instantaneous kurtosis at time-to-maturity `tau_remaining`.
    pub fn instantaneous(&self, tau_remaining: f64) -> f64 {
        let k = self.kappa_a + self.kappa_b * tau_remaining;
        if k < 3.0 {
            3.0
        } else {
            k
        }
    }

    /// Resolves the unconditional kurtosis, computing the implied value
    /// from the continuous parameters when requested.
    pub fn resolve_unconditional(
        &self,
        continuous: Option<&ValidatedContinuousParams>,
    ) -> Result<f64, ParamError> {
        match self.kappa {
            UnconditionalKurtosis::Implied => continuous
                .map(|c| c.implied_kurtosis())
                .ok_or(ParamError::ImpliedKurtosisUnavailable),
            UnconditionalKurtosis::Explicit(k) => {
                if !k.is_finite() || k < 3.0 {
                    return Err(ParamError::InvalidKurtosis { kappa: k });
                }
                if let Some(c) = continuous {
                    if c.alpha > 0.0 && k <= 3.0 {
                        return Err(ParamError::InvalidKurtosis { kappa: k });
                    }
                }
                Ok(k)
            }
        }
    }
}
