//! Modified Bessel function of the third kind, `K_ν(x)`, for real order.
//!
//! Everything is evaluated in log scale. For the fractional part of the order
//! (`|μ| ≤ 1/2`) the exponentially scaled pair `e^x K_μ(x)`, `e^x K_{μ+1}(x)`
//! comes from Temme's series when `x < 2` and from Steed's continued fraction
//! otherwise; the integer part is then reached by forward recurrence carried
//! as a running sum of log-ratios, so neither large orders nor large
//! arguments overflow.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Step used for the central difference in the order.
pub const ORDER_STEP: f64 = 1e-5;

/// A single evaluation of `log K_order(argument)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: f64,
    pub argument: f64,
    pub log_value: f64,
}

impl BesselEval {
    pub fn new(order: f64, argument: f64) -> Result<Self> {
        let log_value = log_bessel_k(order, argument)?;
        Ok(Self {
            order,
            argument,
            log_value,
        })
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Natural log of `K_order(x)`.
pub fn log_bessel_k(order: f64, x: f64) -> Result<f64> {
    Ok(log_bessel_k_scaled(order, x)? - x)
}

/// Natural log of `e^x K_order(x)`.
pub fn log_bessel_k_scaled(order: f64, x: f64) -> Result<f64> {
    check_args(order, x)?;
    Ok(log_k_scaled_unchecked(order.abs(), x))
}

/// Derivative of `log K_order(x)` with respect to the order, by central
/// difference with step [`ORDER_STEP`].
pub fn dlogk_dorder(order: f64, x: f64) -> Result<f64> {
    check_args(order, x)?;
    // The e^x scaling cancels in the difference and keeps both terms small.
    let hi = log_k_scaled_unchecked((order + ORDER_STEP).abs(), x);
    let lo = log_k_scaled_unchecked((order - ORDER_STEP).abs(), x);
    Ok((hi - lo) / (2.0 * ORDER_STEP))
}

/// `K_{order+1}(x) / K_order(x)`.
pub fn bessel_k_ratio(order: f64, x: f64) -> Result<f64> {
    check_args(order, x)?;
    let num = log_k_scaled_unchecked((order + 1.0).abs(), x);
    let den = log_k_scaled_unchecked(order.abs(), x);
    Ok((num - den).exp())
}

/// `log(e^x K)` at orders `order - 1`, `order`, `order + 1`, sharing one
/// recurrence run when all three absolute orders are consecutive.
pub(crate) fn log_bessel_k_scaled_triple(order: f64, x: f64) -> Result<[f64; 3]> {
    check_args(order, x)?;
    if order >= 1.0 {
        return Ok(log_k_scaled_run(order - 1.0, x));
    }
    if order <= -1.0 {
        let [a, b, c] = log_k_scaled_run(-order - 1.0, x);
        return Ok([c, b, a]);
    }
    Ok([
        log_k_scaled_unchecked((order - 1.0).abs(), x),
        log_k_scaled_unchecked(order.abs(), x),
        log_k_scaled_unchecked(order + 1.0, x),
    ])
}

fn check_args(order: f64, x: f64) -> Result<()> {
    if !order.is_finite() {
        return Err(Error::domain(format!("Bessel order must be finite, got {order}")));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "Bessel argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// `nu >= 0`, `x > 0`, both finite.
fn log_k_scaled_unchecked(nu: f64, x: f64) -> f64 {
    let n = (nu + 0.5).floor();
    let mu = nu - n;
    let (k_mu, k_mu1) = if x < 2.0 {
        k_scaled_temme(mu, x)
    } else {
        k_scaled_steed(mu, x)
    };
    let n = n as usize;
    if n == 0 {
        return k_mu.ln();
    }
    // K_{μ+j+1}/K_{μ+j} = K_{μ+j-1}/K_{μ+j} + 2(μ+j)/x
    let mut ratio = k_mu1 / k_mu;
    let mut acc = k_mu1.ln();
    for j in 1..n {
        ratio = 1.0 / ratio + 2.0 * (mu + j as f64) / x;
        acc += ratio.ln();
    }
    acc
}

/// `log(e^x K)` at `nu`, `nu + 1`, `nu + 2` for `nu >= 0`.
fn log_k_scaled_run(nu: f64, x: f64) -> [f64; 3] {
    let n = (nu + 0.5).floor();
    let mu = nu - n;
    let (k_mu, k_mu1) = if x < 2.0 {
        k_scaled_temme(mu, x)
    } else {
        k_scaled_steed(mu, x)
    };
    let n = n as usize;
    let mut ratio = k_mu1 / k_mu;
    let mut acc = k_mu.ln();
    let mut out = [0.0; 3];
    for j in 0..n + 3 {
        if j >= n {
            out[j - n] = acc;
        }
        if j > 0 {
            ratio = 1.0 / ratio + 2.0 * (mu + j as f64) / x;
        }
        acc += ratio.ln();
    }
    out
}

// Chebyshev coefficients for Γ1(μ) and Γ2(μ) on |μ| ≤ 1/2 (Temme's method).
const G1_COEF: [f64; 14] = [
    -1.145_164_083_662_683_1,
    0.006_360_853_113_470_843,
    0.001_862_451_930_072_068_5,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_04,
    -6.459_750_292_334_725e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818e-10,
    3.243_322_737_102_087_3e-11,
    6.830_943_402_494_752e-13,
    2.835_350_275_517_210_3e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];

const G2_COEF: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_52,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_4e-18,
    -7.522_524_321_825_39e-20,
];

fn chebyshev(coef: &[f64], y: f64) -> f64 {
    let y2 = 2.0 * y;
    let (mut d, mut dd) = (0.0, 0.0);
    for &c in coef[1..].iter().rev() {
        let tmp = d;
        d = y2 * d - dd + c;
        dd = tmp;
    }
    y * d - dd + 0.5 * coef[0]
}

/// Returns `(Γ(1+μ), Γ(1−μ), Γ1(μ), Γ2(μ))` for `|μ| ≤ 1/2`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let y = 4.0 * mu.abs() - 1.0;
    let g1 = chebyshev(&G1_COEF, y);
    let g2 = chebyshev(&G2_COEF, y);
    (1.0 / (g2 - mu * g1), 1.0 / (g2 + mu * g1), g1, g2)
}

/// Temme's series for `x < 2`: returns `(e^x K_μ(x), e^x K_{μ+1}(x))`.
fn k_scaled_temme(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let sinhrat = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    let (gamma_1p, gamma_1m, g1, g2) = temme_gamma(mu);

    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu * gamma_1p;
    let mut qk = 0.5 * half_x_mu * gamma_1m;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..15_000 {
        let k = k as f64;
        fk = (k * fk + pk + qk) / (k * k - mu * mu);
        ck *= half_x * half_x / k;
        pk /= k - mu;
        qk /= k + mu;
        let hk = -k * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * sum0.abs() * f64::EPSILON {
            break;
        }
    }
    let ex = x.exp();
    (sum0 * ex, sum1 * 2.0 / x * ex)
}

/// Steed's continued fraction (CF2) for `x ≥ 2`: returns
/// `(e^x K_μ(x), e^x K_{μ+1}(x))`.
fn k_scaled_steed(mu: f64, x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;
    let mut qi = 0.0;
    let mut qip1 = 1.0;
    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut big_q = -ai;
    let mut s = 1.0 + big_q * delhi;
    for i in 2..10_000 {
        let i = i as f64;
        ai -= 2.0 * (i - 1.0);
        ci = -ai * ci / i;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        big_q += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi = (bi * di - 1.0) * delhi;
        hi += delhi;
        let dels = big_q * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - hi) / x;
    (k_mu, k_mu1)
}
