// SPDX-License-Identifier: Apache-2.0

//! Normal and chi-squared distribution functions.
//!
//! `normal_cdf` goes through the complementary error function so both tails
//! keep full relative accuracy. `normal_quantile` is Wichura's AS 241
//! (PPND16) rational approximation, accurate to about 1e-16 in the
//! central region and to 1e-15 relative in the tails.

use libm::erfc;
use statrs::function::gamma::gamma_lr;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `P(N(0,1) > x)`.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// Inverse of `normal_cdf` (AS 241).
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_1e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Upper quantile `z_a` with `P(N(0,1) >= z_a) = a`.
pub fn upper_quantile(a: f64) -> f64 {
    -normal_quantile(a)
}

/// Chi-squared CDF via the regularized lower incomplete gamma function.
pub fn chi_squared_cdf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(dof / 2.0, x / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 50-digit references from mpmath (mp.dps = 50), truncated to f64.
    const CDF_TABLE: &[(f64, f64)] = &[
        (-8.0, 6.2209605742717841235e-16),
        (-5.0, 2.8665157187919391167e-7),
        (-3.0, 1.3498980316300945267e-3),
        (-1.959963984540054, 0.025000000000000013765),
        (-1.0, 0.15865525393145705142),
        (-0.25, 0.40129367431707627576),
        (0.0, 0.5),
        (0.5, 0.69146246127401310364),
        (1.0, 0.84134474606854294858),
        (1.6448536269514722, 0.9499999999999999469),
        (2.5, 0.99379033467422386483),
        (4.0, 0.99996832875816688008),
    ];

    const QUANTILE_TABLE: &[(f64, f64)] = &[
        (1e-12, -7.0344838253011319298),
        (1e-6, -4.7534243088228989482),
        (0.001, -3.0902323061678135415),
        (0.025, -1.9599639845400542355),
        (0.05, -1.6448536269514727149),
        (0.2, -0.84162123357291420518),
        (0.5, 0.0),
        (0.7, 0.52440051270804078404),
        (0.95, 1.6448536269514727149),
        (0.975, 1.9599639845400542355),
        (0.005, -2.5758293035489007538),
        // quantile of the double nearest 0.999999, not of 1 - 1e-6
        (0.999999, 4.7534243088170877657),
    ];

    #[test]
    fn cdf_matches_reference_table() {
        for &(x, want) in CDF_TABLE {
            let got = normal_cdf(x);
            assert!((got - want).abs() < 1e-10, "Phi({x}) = {got}, want {want}");
            if want < 1e-3 {
                assert!(((got - want) / want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quantile_matches_reference_table() {
        for &(p, want) in QUANTILE_TABLE {
            let got = normal_quantile(p);
            assert!((got - want).abs() < 1e-14 * (1.0 + want.abs()), "z({p}) = {got}, want {want}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let err = (normal_cdf(normal_quantile(p)) - p).abs();
            assert!(err < 1e-13, "p={p} err={err:e}");
        }
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(normal_quantile(1.0), f64::INFINITY);
    }

    #[test]
    fn chi_squared_reference_values() {
        // mpmath gammainc(k/2, 0, x/2, regularized=True)
        assert!((chi_squared_cdf(2.0, 2.0) - 0.63212055882855767840).abs() < 1e-12);
        assert!((chi_squared_cdf(50.0, 50.0) - 0.52660153144365064).abs() < 1e-10);
        assert!((chi_squared_cdf(3.0, 7.0) - 0.11499776835684936).abs() < 1e-10);
        assert_eq!(chi_squared_cdf(-1.0, 3.0), 0.0);
    }
}
