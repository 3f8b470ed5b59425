//! Scalar statistics shared by the estimators.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::StatsError;

/// Lag-1 autocorrelation estimates are clamped to this magnitude so the
/// autoregression adjustment `(1 + phi) / (1 - phi)` stays finite.
pub const AUTOCORR_CLAMP: f64 = 0.999_999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample variance, divisor `count - 1`.
    pub variance: f64,
    /// Biased moment ratio `m3 / m2^(3/2)`; `None` when the variance is zero
    /// or fewer than three values were supplied.
    pub skewness: Option<f64>,
}

/// One-pass moment accumulator (Welford recurrence extended to the third
/// central moment).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn finish(&self) -> Result<MomentSummary, StatsError> {
        if self.count < 2 {
            return Err(StatsError::TooShort {
                needed: 2,
                got: self.count as usize,
            });
        }
        let n = self.count as f64;
        let variance = (self.m2 / (n - 1.0)).max(0.0);
        let skewness = if self.count >= 3 && self.m2 > 0.0 {
            let m2 = self.m2 / n;
            let m3 = self.m3 / n;
            let s = m3 / m2.powf(1.5);
            s.is_finite().then_some(s)
        } else {
            None
        };
        Ok(MomentSummary {
            count: self.count as usize,
            mean: self.mean,
            variance,
            skewness,
        })
    }
}

impl Extend<f64> for Moments {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

pub fn summarize(xs: &[f64]) -> Result<MomentSummary, StatsError> {
    let mut acc = Moments::new();
    acc.extend(xs.iter().copied());
    acc.finish()
}

fn mean_and_ss(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss)
}

/// Lag-1 autocorrelation `sum (x_j - m)(x_{j+1} - m) / sum (x_j - m)^2`,
/// clamped to `(-AUTOCORR_CLAMP, AUTOCORR_CLAMP)`.
pub fn lag1_autocorr(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.len() < 3 {
        return Err(StatsError::TooShort {
            needed: 3,
            got: xs.len(),
        });
    }
    let (mean, ss) = mean_and_ss(xs);
    if !(ss > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let cross: f64 = xs
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    Ok((cross / ss).clamp(-AUTOCORR_CLAMP, AUTOCORR_CLAMP))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonNeumann {
    /// Ratio of the mean square successive difference to twice the variance.
    pub statistic: f64,
    /// `(1 - C) * sqrt((n^2 - 1) / (n - 2))`, approximately N(0, 1) for
    /// independent normal data.
    pub standardized: f64,
}

pub fn von_neumann_statistic(xs: &[f64]) -> Result<VonNeumann, StatsError> {
    if xs.len() < 8 {
        return Err(StatsError::TooShort {
            needed: 8,
            got: xs.len(),
        });
    }
    let (_, ss) = mean_and_ss(xs);
    if !(ss > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let diff_ss: f64 = xs.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    let statistic = diff_ss / (2.0 * ss);
    let n = xs.len() as f64;
    let standardized = (1.0 - statistic) * ((n * n - 1.0) / (n - 2.0)).sqrt();
    Ok(VonNeumann {
        statistic,
        standardized,
    })
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn check_prob(q: f64) -> Result<(), StatsError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(StatsError::Domain(q))
    }
}

/// Inverse standard normal CDF (Wichura's AS 241, about 16 digits).
pub fn inv_norm_cdf(q: f64) -> Result<f64, StatsError> {
    check_prob(q)?;
    Ok(as241(q))
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.045_102_243_641_9e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Student-t CDF via the regularized incomplete beta function.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    let x2 = x * x;
    if x2 < df {
        // P(0 < T < |x|), accurate near the median
        let half = 0.5 * beta_reg(0.5, 0.5 * df, x2 / (df + x2));
        if x > 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x2));
        if x > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

fn t_pdf(x: f64, df: f64) -> f64 {
    let ln_norm = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_norm - 0.5 * (df + 1.0) * (1.0 + x * x / df).ln()).exp()
}

/// Student-t quantile with `df` degrees of freedom.
///
/// Closed forms for one and two degrees of freedom. Otherwise a
/// Cornish-Fisher expansion around the normal quantile, polished by
/// safeguarded Newton steps on the exact CDF when `df` is moderate.
pub fn t_quantile(q: f64, df: u64) -> Result<f64, StatsError> {
    check_prob(q)?;
    if df == 0 {
        return Err(StatsError::DegreesOfFreedom);
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    if q > 0.5 {
        return t_quantile(1.0 - q, df).map(|x| -x);
    }
    let nu = df as f64;
    match df {
        1 => return Ok((std::f64::consts::PI * (q - 0.5)).tan()),
        2 => return Ok((2.0 * q - 1.0) / (2.0 * q * (1.0 - q)).sqrt()),
        _ => {}
    }
    let start = cornish_fisher(inv_norm_cdf(q)?, nu);
    if df >= 1000 {
        return Ok(start);
    }

    // Bracket the root, then Newton with bisection fallback.
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    while t_cdf(lo, nu) > q {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while t_cdf(hi, nu) < q {
        hi += step;
        step *= 2.0;
    }
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let f = t_cdf(x, nu) - q;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / t_pdf(x, nu);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn cornish_fisher(z: f64, nu: f64) -> f64 {
    let z2 = z * z;
    let g1 = (z2 + 1.0) * z / 4.0;
    let g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
    let g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0;
    let g4 = ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) * z / 92160.0;
    z + g1 / nu + g2 / (nu * nu) + g3 / nu.powi(3) + g4 / nu.powi(4)
}
