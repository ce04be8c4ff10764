//! Bidirectional map between discrete weak-GARCH parameters at one step
//! length and the coefficients of their continuous diffusion limit, plus
//! convergence-rate diagnostics.
//!
//! The discretization at step Δ is exact for every Δ, not asymptotic:
//! persistence maps as λ = e^{-θΔ}, the intercept through ω θ^{-1}(1 - λ),
//! β through the same quadratic the aggregation module solves, and the
//! kurtosis through a closed form in θΔ. Everything is arranged around
//! f(x) = e^{-x} - 1 + x so small θΔ loses no precision.

use crate::params::{
    validate_continuous, validate_discrete, ContinuousParams, DiscreteGarchParams, ParamError,
    StepLength, ValidatedContinuousParams, ValidatedDiscreteGarchParams,
};
use crate::roots::{brent, RootError};
use alloc::vec::Vec;
use core::fmt;
use libm::{exp, expm1, log, sqrt};

/// Discrete parameters produced by [`continuous_to_discrete`], with the
/// step kurtosis and the diagnostic c factor (`None` when α = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub params: ValidatedDiscreteGarchParams,
    pub kurtosis: f64,
    pub c_factor: Option<f64>,
}

/// Continuous parameters recovered by [`discrete_to_continuous`], with a
/// re-application residual measuring distance from the weak-GARCH
/// manifold; `inconsistent` is the warning flag for residual > 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousRecovery {
    pub params: ValidatedContinuousParams,
    pub consistency_residual: f64,
    pub inconsistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitError {
    BetaQuadraticInfeasible { theta_delta: f64 },
    KurtosisOutOfRange { kappa: f64, supremum: f64 },
    ConvergenceFailure { iterations: u32 },
    InvalidSweep,
    Param(ParamError),
}

impl fmt::Display for LimitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BetaQuadraticInfeasible { theta_delta } => write!(
                f,
                "BetaQuadraticInfeasible: no beta root in (0, 1) at theta*delta = {theta_delta}; the step is too coarse for these coefficients"
            ),
            Self::KurtosisOutOfRange { kappa, supremum } => write!(
                f,
                "KurtosisOutOfRange: kurtosis {kappa} outside [3, {supremum}) attainable at this step"
            ),
            Self::ConvergenceFailure { iterations } => {
                write!(f, "ConvergenceFailure: root finder exhausted {iterations} iterations")
            }
            Self::InvalidSweep => {
                write!(f, "InvalidSweep: step lengths must be strictly decreasing")
            }
            Self::Param(e) => write!(f, "{e}"),
        }
    }
}

impl From<ParamError> for LimitError {
    fn from(e: ParamError) -> Self {
        Self::Param(e)
    }
}

/// One row of [`convergence_table`]: the rescaled parameters whose limits
/// as Δ ↓ 0 are (ω, α, θ, κ_limit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub delta: StepLength,
    pub omega_rate: f64,
    pub alpha_rate: f64,
    pub theta_rate: f64,
    pub kappa_value: f64,
}

/// f(x) = e^{-x} - 1 + x, evaluated by series below 1e-3 where expm1
/// would cancel against x.
fn f_series(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        x * x / 2.0 * (1.0 - x / 3.0 * (1.0 - x / 4.0 * (1.0 - x / 5.0)))
    } else {
        expm1(-x) + x
    }
}

/// Unconditional kurtosis of the limit process, 3θ/(θ - α²).
pub fn kappa_limit(c: &ValidatedContinuousParams) -> f64 {
    c.implied_kurtosis()
}

/// Step-Δ unconditional kurtosis of the exact discretization:
/// 3 + 6(κ - 1)α² f(θΔ) / (θ²Δ²(α² + 2θ)), with κ = [`kappa_limit`].
/// Well defined for every Δ > 0, even where the β quadratic is not.
pub fn discrete_kurtosis(c: &ValidatedContinuousParams, delta: StepLength) -> f64 {
    if c.alpha == 0.0 {
        return 3.0;
    }
    let d = delta.years();
    let th = c.theta;
    let a2 = c.alpha * c.alpha;
    let kinf = kappa_limit(c);
    3.0 + 6.0 * (kinf - 1.0) * a2 * f_series(th * d) / (th * th * d * d * (a2 + 2.0 * th))
}

/// Exact discretization of the continuous limit at step `delta`.
pub fn continuous_to_discrete(
    c: &ValidatedContinuousParams,
    delta: StepLength,
) -> Result<Discretization, LimitError> {
    let d = delta.years();
    let th = c.theta;
    let lam = exp(-th * d);
    let e1 = -expm1(-th * d);
    let omega_d = c.omega / th * e1;
    if c.alpha == 0.0 {
        let params = DiscreteGarchParams { delta, omega: omega_d, alpha: 0.0, beta: lam };
        return Ok(Discretization {
            params: validate_discrete(params)?,
            kurtosis: 3.0,
            c_factor: None,
        });
    }
    let a2 = c.alpha * c.alpha;
    let e2 = -expm1(-2.0 * th * d);
    // g = c - 1 assembled from strictly positive pieces; forming c first
    // and subtracting 1 would cancel catastrophically as Δ ↓ 0.
    let n_minus_d = a2 / (2.0 * th) * f_series(2.0 * th * d)
        + 2.0 * a2 / th * f_series(th * d)
        + d * d * th * (th - a2);
    let d_den = a2 * e2 / (2.0 * th);
    let g = n_minus_d / d_den;
    let den = g * lam - e1;
    if den <= 0.0 {
        return Err(LimitError::BetaQuadraticInfeasible { theta_delta: th * d });
    }
    let mm2 = (1.0 + g) * e1 * e1 / den;
    let m = 2.0 + mm2;
    let s = sqrt(mm2 * (mm2 + 4.0));
    let beta_d = 2.0 / (m + s);
    let one_minus_beta = (mm2 + s) / (m + s);
    let mut alpha_d = one_minus_beta - e1;
    if alpha_d < 0.0 {
        if alpha_d < -1e-12 {
            return Err(LimitError::BetaQuadraticInfeasible { theta_delta: th * d });
        }
        alpha_d = 0.0;
    }
    let params = DiscreteGarchParams { delta, omega: omega_d, alpha: alpha_d, beta: beta_d };
    Ok(Discretization {
        params: validate_discrete(params)?,
        kurtosis: discrete_kurtosis(c, delta),
        c_factor: Some(1.0 + g),
    })
}

/// Recovers continuous coefficients from discrete parameters and their
/// step kurtosis: θ and ω in closed form, α by a bracketed solve of the
/// kurtosis map, μ fixed at 0 (the variance recursion carries no drift
/// information). The result is re-discretized to measure consistency.
pub fn discrete_to_continuous(
    p: &ValidatedDiscreteGarchParams,
    kappa: f64,
) -> Result<ContinuousRecovery, LimitError> {
    let d = p.delta.years();
    let lam = p.lambda();
    let theta = -log(lam) / d;
    let omega = p.omega * theta / (1.0 - lam);
    let base = validate_continuous(ContinuousParams { omega, theta, alpha: 0.0, mu: 0.0 })?;
    let alpha_max = sqrt(theta) * (1.0 - 1e-12);
    let at = |alpha: f64| -> Result<ValidatedContinuousParams, LimitError> {
        Ok(validate_continuous(ContinuousParams { omega, theta, alpha, mu: 0.0 })?)
    };
    let supremum = discrete_kurtosis(&at(alpha_max)?, p.delta);
    if !kappa.is_finite() || kappa < 3.0 || kappa >= supremum {
        return Err(LimitError::KurtosisOutOfRange { kappa, supremum });
    }
    let params = if kappa == 3.0 {
        base
    } else {
        let mut residual = |alpha: f64| match at(alpha) {
            Ok(c) => discrete_kurtosis(&c, p.delta) - kappa,
            Err(_) => f64::INFINITY,
        };
        match brent(&mut residual, 0.0, alpha_max, 1e-15, 1e-12, 200) {
            Ok(sol) => at(sol.root)?,
            Err(RootError::NoSignChange { .. }) => {
                return Err(LimitError::KurtosisOutOfRange { kappa, supremum })
            }
            Err(RootError::MaxIterations { .. }) => {
                return Err(LimitError::ConvergenceFailure { iterations: 200 })
            }
        }
    };
    let back = continuous_to_discrete(&params, p.delta)?;
    let err = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
    let residual = err(back.params.omega, p.omega)
        .max(err(back.params.alpha, p.alpha))
        .max(err(back.params.beta, p.beta))
        .max(err(back.kurtosis, kappa));
    Ok(ContinuousRecovery {
        params,
        consistency_residual: residual,
        inconsistent: residual > 1e-6,
    })
}

/// Evaluates the discretization over a strictly decreasing sweep of step
/// lengths and reports the Proposition-style rescaled rates per row.
pub fn convergence_table(
    c: &ValidatedContinuousParams,
    deltas: &[StepLength],
) -> Result<Vec<ConvergenceRow>, LimitError> {
    if deltas.windows(2).any(|w| w[1].years() >= w[0].years()) {
        return Err(LimitError::InvalidSweep);
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let d = delta.years();
        let disc = continuous_to_discrete(c, delta)?;
        rows.push(ConvergenceRow {
            delta,
            omega_rate: disc.params.omega / d,
            alpha_rate: disc.params.alpha / sqrt(d),
            theta_rate: (1.0 - disc.params.lambda()) / d,
            kappa_value: disc.kurtosis,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1() -> ValidatedContinuousParams {
        validate_continuous(ContinuousParams { omega: 0.0045, theta: 0.05, alpha: 0.1, mu: 0.0 })
            .unwrap()
    }

    fn step(d: f64) -> StepLength {
        StepLength::new(d).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn discretization_frozen_values_at_unit_step() {
        let d = continuous_to_discrete(&fig1(), step(1.0)).unwrap();
        assert!(rel(d.params.lambda(), 0.951_229_424_500_714_01) < 1e-13);
        assert!(rel(d.params.omega, 0.004_389_351_794_935_739_2) < 1e-13);
        assert!(rel(d.params.beta, 0.894_046_160_820_118_13) < 1e-13);
        assert!(rel(d.params.alpha, 0.057_183_263_680_595_876) < 1e-13);
        assert!(rel(d.kurtosis, 3.737_654_700_428_405_5) < 1e-13);
        assert!(rel(d.c_factor.unwrap(), 1.312_676_636_391_174_5) < 1e-13);
    }

    #[test]
    fn discretization_frozen_values_at_daily_step() {
        let d = continuous_to_discrete(&fig1(), step(1.0 / 252.0)).unwrap();
        assert!(rel(d.params.omega, 1.785_537_143_235_240_2e-5) < 1e-13);
        assert!(rel(d.params.alpha, 6.084_371_239_198_700_7e-3) < 1e-13);
        assert!(rel(d.params.beta, 0.993_717_235_744_886_24) < 1e-13);
        assert!(rel(d.kurtosis, 3.749_950_399_285_774_3) < 1e-13);
        assert!(rel(d.c_factor.unwrap(), 1.001_190_673_039_536_1) < 1e-13);
    }

    #[test]
    fn degenerate_alpha_discretization() {
        let c = validate_continuous(ContinuousParams {
            omega: 0.0045,
            theta: 0.05,
            alpha: 0.0,
            mu: 0.0,
        })
        .unwrap();
        let d = continuous_to_discrete(&c, step(2.0)).unwrap();
        assert_eq!(d.params.alpha, 0.0);
        assert!(rel(d.params.beta, exp(-0.1)) < 1e-15);
        assert_eq!(d.kurtosis, 3.0);
        assert_eq!(d.c_factor, None);
    }

    #[test]
    fn round_trip_recovers_continuous_coefficients() {
        let d = continuous_to_discrete(&fig1(), step(1.0 / 252.0)).unwrap();
        let rec = discrete_to_continuous(&d.params, d.kurtosis).unwrap();
        assert!(rel(rec.params.omega, 0.0045) < 1e-9);
        assert!(rel(rec.params.theta, 0.05) < 1e-9);
        assert!(rel(rec.params.alpha, 0.1) < 1e-9);
        assert_eq!(rec.params.mu, 0.0);
        assert!(rec.consistency_residual < 1e-9, "residual {}", rec.consistency_residual);
        assert!(!rec.inconsistent);
    }

    #[test]
    fn theta_recovery_from_unit_step_persistence() {
        let d = continuous_to_discrete(&fig1(), step(1.0)).unwrap();
        let rec = discrete_to_continuous(&d.params, d.kurtosis).unwrap();
        assert!(rel(rec.params.theta, 0.05) < 1e-12);
    }

    #[test]
    fn gaussian_kurtosis_forces_degenerate_recovery_with_warning() {
        let d = continuous_to_discrete(&fig1(), step(1.0 / 252.0)).unwrap();
        let rec = discrete_to_continuous(&d.params, 3.0).unwrap();
        assert_eq!(rec.params.alpha, 0.0);
        assert!(rec.inconsistent, "residual {}", rec.consistency_residual);
    }

    #[test]
    fn kurtosis_out_of_range_is_rejected() {
        let d = continuous_to_discrete(&fig1(), step(1.0 / 252.0)).unwrap();
        for kappa in [2.5, f64::NAN, f64::INFINITY, 1e15] {
            assert!(matches!(
                discrete_to_continuous(&d.params, kappa),
                Err(LimitError::KurtosisOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn kappa_limit_examples() {
        assert!(rel(kappa_limit(&fig1()), 3.75) < 1e-15);
        let gauss = validate_continuous(ContinuousParams {
            omega: 0.0045,
            theta: 0.05,
            alpha: 0.0,
            mu: 0.0,
        })
        .unwrap();
        assert_eq!(kappa_limit(&gauss), 3.0);
        let mut prev = 3.75;
        for frac in [0.9, 0.99, 0.999] {
            let c = validate_continuous(ContinuousParams {
                omega: 0.0045,
                theta: 0.05,
                alpha: frac * sqrt(0.05),
                mu: 0.0,
            })
            .unwrap();
            let k = kappa_limit(&c);
            assert!(k > prev, "kappa_limit not increasing toward the pole");
            prev = k;
        }
    }

    #[test]
    fn discrete_kurtosis_limits_at_both_ends() {
        let c = fig1();
        assert!(rel(discrete_kurtosis(&c, step(1e-8)), 3.75) < 1e-6);
        assert!((discrete_kurtosis(&c, step(1e6)) - 3.0).abs() < 1e-3);
        assert!((discrete_kurtosis(&c, step(1e9)) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn feasibility_boundary_for_coarse_steps() {
        assert!(continuous_to_discrete(&fig1(), step(110.0)).is_ok());
        assert!(matches!(
            continuous_to_discrete(&fig1(), step(120.0)),
            Err(LimitError::BetaQuadraticInfeasible { .. })
        ));
        assert!(matches!(
            continuous_to_discrete(&fig1(), step(200.0)),
            Err(LimitError::BetaQuadraticInfeasible { .. })
        ));
    }

    #[test]
    fn discretization_commutes_with_aggregation() {
        use crate::aggregation::aggregate;
        let fine = continuous_to_discrete(&fig1(), step(1.0 / 504.0)).unwrap();
        for n in [2u64, 3, 5, 10] {
            let agg =
                aggregate(&fine.params, fine.kurtosis, step(n as f64 / 504.0)).unwrap();
            let direct = continuous_to_discrete(&fig1(), step(n as f64 / 504.0)).unwrap();
            assert!((agg.params.omega - direct.params.omega).abs() < 1e-9, "omega at n={n}");
            assert!((agg.params.alpha - direct.params.alpha).abs() < 1e-9, "alpha at n={n}");
            assert!((agg.params.beta - direct.params.beta).abs() < 1e-9, "beta at n={n}");
            assert!((agg.kurtosis - direct.kurtosis).abs() < 1e-9, "kurtosis at n={n}");
        }
    }

    #[test]
    fn aggregated_c_factor_matches_the_closed_form() {
        use crate::aggregation::c_factor;
        let fine = continuous_to_discrete(&fig1(), step(1.0 / 252.0)).unwrap();
        let c_agg = c_factor(&fine.params, fine.kurtosis, 252).unwrap();
        let c_lim = continuous_to_discrete(&fig1(), step(1.0)).unwrap().c_factor.unwrap();
        assert!(rel(c_agg, c_lim) < 0.01, "c_agg {c_agg} vs c_lim {c_lim}");
        assert!(rel(c_agg, c_lim) < 1e-12);
    }

    #[test]
    fn convergence_sweep_rates_settle_monotonically() {
        let deltas: Vec<StepLength> = (4..=16).map(|k| step(libm::pow(2.0, -k as f64))).collect();
        let rows = convergence_table(&fig1(), &deltas).unwrap();
        let dev: Vec<[f64; 4]> = rows
            .iter()
            .map(|r| {
                [
                    rel(r.omega_rate, 0.0045),
                    rel(r.alpha_rate, 0.1),
                    rel(r.theta_rate, 0.05),
                    (r.kappa_value - 3.75).abs(),
                ]
            })
            .collect();
        for w in dev.windows(2) {
            for i in 0..4 {
                assert!(w[1][i] <= w[0][i], "column {i} deviation not decreasing: {w:?}");
            }
        }
        let last = dev.last().unwrap();
        assert!(last[0] < 0.005 && last[1] < 0.005 && last[2] < 0.005);
        assert!(rel(rows.last().unwrap().kappa_value, 3.75) < 1e-6);
    }

    #[test]
    fn convergence_table_rejects_unsorted_sweeps_and_zeroes_alpha_rate() {
        let err = convergence_table(&fig1(), &[step(0.1), step(0.2)]);
        assert_eq!(err, Err(LimitError::InvalidSweep));
        let gauss = validate_continuous(ContinuousParams {
            omega: 0.0045,
            theta: 0.05,
            alpha: 0.0,
            mu: 0.0,
        })
        .unwrap();
        let rows = convergence_table(&gauss, &[step(0.5), step(0.25), step(0.125)]).unwrap();
        assert!(rows.iter().all(|r| r.alpha_rate == 0.0));
    }

    fn continuous_point() -> impl Strategy<Value = (ValidatedContinuousParams, f64)> {
        (0.01f64..1.0, 0.05f64..0.95, 1e-4f64..0.5, 1e-4f64..2.0).prop_map(
            |(theta, frac, omega, theta_delta)| {
                let alpha = frac * sqrt(theta);
                let c = validate_continuous(ContinuousParams { omega, theta, alpha, mu: 0.0 })
                    .unwrap();
                (c, theta_delta / theta)
            },
        )
    }

    proptest! {
        #[test]
        fn beta_quadratic_is_feasible_below_two_mean_reversion_times(
            (c, delta) in continuous_point(),
        ) {
            let d = continuous_to_discrete(&c, step(delta)).unwrap();
            prop_assert!(d.params.beta > 0.0 && d.params.beta < 1.0);
            prop_assert!(d.params.alpha > 0.0, "alpha_d = {}", d.params.alpha);
            prop_assert!(d.kurtosis > 3.0);
        }

        #[test]
        fn recovery_round_trips_continuous_parameters((c, delta) in continuous_point()) {
            let d = continuous_to_discrete(&c, step(delta)).unwrap();
            let rec = discrete_to_continuous(&d.params, d.kurtosis).unwrap();
            prop_assert!(rel(rec.params.omega, c.omega) < 1e-9);
            prop_assert!(rel(rec.params.theta, c.theta) < 1e-9);
            prop_assert!(rel(rec.params.alpha, c.alpha) < 1e-9);
            prop_assert!(!rec.inconsistent);
        }
    }
}
