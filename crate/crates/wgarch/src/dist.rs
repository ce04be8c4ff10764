//! Normal and Student-t kernels: CDFs, quantiles, and the kurtotic
//! innovation transform that maps a standard normal draw onto a
//! standardized leptokurtic target with prescribed kurtosis.

use core::f64::consts::{FRAC_1_SQRT_2, PI};
use libm::{erfc, exp, fabs, lgamma, log, log1p, sqrt};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * exp(-0.5 * x * x)
}

/// Standard normal quantile (Acklam's rational approximation, relative
/// error below 1.2e-9). Used only to seed Newton refinements.
fn norm_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Regularized incomplete beta function I_x(a, b) via the Numerical
/// Recipes continued fraction (modified Lentz).
pub fn betainc_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x);
    let bt = exp(ln_bt);
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_cont_frac(a, b, x) / a
    } else {
        1.0 - bt * beta_cont_frac(b, a, 1.0 - x) / b
    }
}

fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300u32 {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < 1e-15 {
            break;
        }
    }
    h
}

/// Student-t cumulative distribution function with `nu` degrees of freedom.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let w = nu / (nu + x * x);
    let half_tail = 0.5 * betainc_reg(0.5 * nu, 0.5, w);
    if x > 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Student-t density with `nu` degrees of freedom.
pub fn t_pdf(x: f64, nu: f64) -> f64 {
    let ln_norm = lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * log(nu * PI);
    exp(ln_norm - 0.5 * (nu + 1.0) * log1p(x * x / nu))
}

/// Student-t quantile for lower-tail probability `p` in (0, 1).
///
/// Cornish-Fisher seed refined by bracket-safeguarded Newton on [`t_cdf`];
/// converges to a relative spacing of ~1e-14.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        t_quantile_lower(p, nu)
    } else {
        -t_quantile_lower(1.0 - p, nu)
    }
}

fn t_quantile_lower(p: f64, nu: f64) -> f64 {
    // Cornish-Fisher expansion of t in powers of 1/nu around the normal
    // quantile; adequate as a Newton seed for nu >= 4.
    let z = norm_quantile(p);
    let z2 = z * z;
    let g1 = z * (z2 + 1.0) / 4.0;
    let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
    let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
    let g4 = z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0;
    let inv = 1.0 / nu;
    let seed = z + inv * (g1 + inv * (g2 + inv * (g3 + inv * g4)));
    let mut lo = if seed < -1.0 { 2.0 * seed } else { -2.0 };
    let mut expand = 0;
    while t_cdf(lo, nu) > p && expand < 200 {
        lo = 2.0 * lo - 1.0;
        expand += 1;
    }
    let mut hi = 0.0;
    let mut x = if seed < lo || seed >= hi { 0.5 * (lo + hi) } else { seed };
    for _ in 0..100 {
        let fx = t_cdf(x, nu) - p;
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dfx = t_pdf(x, nu);
        let mut xn = if dfx > 0.0 { x - fx / dfx } else { 0.5 * (lo + hi) };
        if !(xn > lo && xn < hi) {
            xn = 0.5 * (lo + hi);
        }
        if fabs(xn - x) <= 1e-14 * (1.0 + fabs(xn)) {
            return xn;
        }
        x = xn;
    }
    x
}

/// Precomputed state for [`kurtotic_transform`] at a fixed target kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KurtoticTransform {
    identity: bool,
    nu: f64,
    inv_scale: f64,
}

impl KurtoticTransform {
    /// Builds the transform onto a standardized Student-t with kurtosis
    /// `kappa` (degrees of freedom 4 + 6/(kappa - 3)). `kappa` at or below
    /// 3 (plus a 1e-8 guard band where the target is normal beyond double
    /// precision) yields the identity.
    pub fn new(kappa: f64) -> Self {
        if kappa <= 3.0 + 1e-8 {
            return Self { identity: true, nu: f64::INFINITY, inv_scale: 1.0 };
        }
        let nu = 4.0 + 6.0 / (kappa - 3.0);
        Self { identity: false, nu, inv_scale: sqrt((nu - 2.0) / nu) }
    }

    /// Maps a standard normal draw through the quantile transform
    /// G^{-1}(F(xi)); monotone in `xi`, zero mean, unit variance,
    /// kurtosis equal to the target.
    pub fn apply(&self, xi: f64) -> f64 {
        if self.identity || xi == 0.0 {
            return xi;
        }
        // Work in the nearer tail so the normal CDF keeps full precision.
        let p_tail = 0.5 * erfc(fabs(xi) * FRAC_1_SQRT_2);
        let t = t_quantile_lower(p_tail, self.nu);
        let signed = if xi < 0.0 { t } else { -t };
        signed * self.inv_scale
    }
}

/// One-shot convenience wrapper over [`KurtoticTransform`].
pub fn kurtotic_transform(xi: f64, kappa: f64) -> f64 {
    KurtoticTransform::new(kappa).apply(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values: high-precision normal CDF and float64 Student-t
    // evaluations, frozen from an independent implementation.

    #[test]
    fn norm_cdf_reference_values() {
        let cases = [
            (0.0, 0.5),
            (0.15, 0.559_617_692_370_242_52),
            (1.0, 0.841_344_746_068_542_95),
            (1.96, 0.975_002_104_851_779_56),
            (-2.5, 0.006_209_665_325_776_135_2),
            (5.0, 0.999_999_713_348_428_12),
            (-8.0, 6.220_960_574_271_784_1e-16),
        ];
        for (x, want) in cases {
            let got = norm_cdf(x);
            assert!(
                (got - want).abs() <= 5e-14 * want.max(1e-300),
                "Phi({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn betainc_reference_values() {
        let got = betainc_reg(2.75, 0.5, 0.4);
        assert!((got - 0.031_275_996_997_316_154).abs() < 1e-15);
        let got = betainc_reg(5.0, 0.5, 0.9);
        assert!((got - 0.316_642_915_020_012_18).abs() < 1e-14);
    }

    #[test]
    fn t_cdf_reference_values() {
        let cases = [
            (-3.0, 5.5, 0.013_361_740_330_922_944),
            (-1.0, 5.5, 0.179_626_687_406_560_1),
            (0.5, 5.5, 0.681_779_825_642_293_34),
            (2.75, 5.5, 0.981_779_834_840_741_05),
            (-3.0, 10.0, 0.006_671_827_511_284_782_7),
            (-1.0, 10.0, 0.170_446_566_151_030_04),
            (0.5, 10.0, 0.686_053_197_128_513_54),
            (2.75, 10.0, 0.989_760_876_889_229_31),
        ];
        for (x, nu, want) in cases {
            let got = t_cdf(x, nu);
            assert!((got - want).abs() < 1e-13, "t_cdf({x}, {nu}) = {got}, want {want}");
        }
    }

    #[test]
    fn t_quantile_reference_values() {
        let cases = [
            (1e-10, 5.5, -110.876_964_656_562_81),
            (0.001, 5.5, -5.504_714_867_160_982),
            (0.3, 5.5, -0.556_120_484_717_596_34),
            (0.975, 5.5, 2.501_858_617_589_239_2),
            (1e-10, 10.0, -25.466_008_021_936_62),
            (0.001, 10.0, -4.143_700_494_046_624),
            (0.3, 10.0, -0.541_528_038_755_014_65),
            (0.975, 10.0, 2.228_138_851_964_938_5),
        ];
        for (p, nu, want) in cases {
            let got = t_quantile(p, nu);
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                "t_quantile({p}, {nu}) = {got}, want {want}"
            );
        }
        assert_eq!(t_quantile(0.5, 5.5), 0.0);
    }

    #[test]
    fn t_quantile_round_trips_through_cdf() {
        for nu in [4.5, 5.5, 10.0, 30.0, 200.0] {
            for p in [1e-12, 1e-8, 1e-4, 0.05, 0.3, 0.49, 0.7, 0.999, 1.0 - 1e-9] {
                let x = t_quantile(p, nu);
                let back = t_cdf(x, nu);
                assert!(
                    (back - p).abs() <= 1e-12 * p.max(1.0 - p),
                    "round trip p={p} nu={nu}: got {back}"
                );
            }
        }
    }

    #[test]
    fn transform_reference_values() {
        let cases = [
            (-2.5, 7.0, -2.914_832_134_644_881_6),
            (-1.0, 7.0, -0.877_139_655_843_237_05),
            (0.5, 7.0, 0.422_467_094_230_694_06),
            (3.0, 7.0, 4.120_980_314_460_444_7),
            (-2.5, 4.0, -2.720_880_455_200_764_4),
            (-1.0, 4.0, -0.941_440_444_430_697_3),
            (0.5, 4.0, 0.461_518_166_236_781_6),
            (3.0, 4.0, 3.539_191_741_770_854_3),
        ];
        for (xi, kappa, want) in cases {
            let got = kurtotic_transform(xi, kappa);
            assert!(
                (got - want).abs() <= 1e-9 * want.abs(),
                "transform({xi}, {kappa}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn transform_is_identity_at_kappa_three() {
        for xi in [-3.5, -1.0, -1e-8, 0.0, 0.7, 4.2] {
            assert_eq!(kurtotic_transform(xi, 3.0), xi);
        }
    }

    #[test]
    fn transform_maps_median_to_median() {
        for kappa in [3.0, 3.5, 5.0, 7.0, 40.0] {
            assert_eq!(kurtotic_transform(0.0, kappa), 0.0);
        }
    }

    #[test]
    fn transform_is_monotone_and_odd() {
        let tr = KurtoticTransform::new(7.0);
        let mut prev = f64::NEG_INFINITY;
        let mut x = -6.0;
        while x <= 6.0 {
            let y = tr.apply(x);
            assert!(y > prev, "not strictly increasing at xi={x}");
            let y_neg = tr.apply(-x);
            assert!(
                (y + y_neg).abs() <= 1e-12 * y.abs().max(1.0),
                "not odd at xi={x}: {y} vs {y_neg}"
            );
            prev = y;
            x += 0.0625;
        }
    }

    #[test]
    fn transform_kurtosis_matches_target_at_ten_million_draws() {
        // Target kurtosis 7 (t with nu = 5.5, standardized): the estimator's
        // own sampling noise at 1e7 draws is wide because the eighth moment
        // of t(5.5) diverges; the seed below is frozen with the draw stream.
        use crate::rng::NormalSource;
        let tr = KurtoticTransform::new(7.0);
        let mut src = NormalSource::new(3, 0);
        let (mut s2, mut s4) = (0.0_f64, 0.0_f64);
        let n = 10_000_000u32;
        for _ in 0..n {
            let x = tr.apply(src.next_normal());
            let x2 = x * x;
            s2 += x2;
            s4 += x2 * x2;
        }
        let m2 = s2 / n as f64;
        let kurt = (s4 / n as f64) / (m2 * m2);
        let excess = kurt - 3.0;
        assert!(
            (excess - 4.0).abs() <= 0.2,
            "excess kurtosis over 1e7 draws = {excess}, want 4 +- 0.2"
        );
        // Unit variance comes along for free with the same draws.
        assert!((m2 - 1.0).abs() < 2e-3, "second moment {m2}");
    }
}
