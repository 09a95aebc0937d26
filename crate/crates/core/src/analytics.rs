//! Large-`L` gain statistics, the Meijer-G logarithmic moment and closed-form
//! ergodic rates with a quadrature cross-check.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::precoding::PowerAllocation;
use crate::quadrature::tanh_sinh_semi_infinite;
use crate::receiver::sic_interference;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const QUADRATURE_TOL: f64 = 1e-9;

/// Exponential integral `E₁(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("E1 needs a finite positive argument, got {x}")));
    }
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * continued_fraction(0.0, x))
    }
}

fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// `Γ(s, x) eˣ x^{-s}` by the Legendre continued fraction (modified Lentz),
/// valid for `x > 0` and accurate for `x ≳ 1`.
fn continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let i = i as f64;
        let an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `∫₀^∞ ln(1 + z x) x^{m-1} e^{-x} dx`, the Meijer
/// `G^{1,3}_{3,2}(z | 1-m, 1, 1; 1, 0)` family for integer `m ≥ 1`.
///
/// With `a = 1/z` and `T_j = ∫ x^j e^{-x} / (x + a) dx`, the integral equals
/// `Σ_{j<m} (m-1)!/j! · T_j`, every term positive.
pub fn meijer_log_gamma(m: u32, z: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("meijer_log_gamma needs m ≥ 1".into()));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::InvalidArgument(format!("meijer_log_gamma needs finite z ≥ 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let a = 1.0 / z;
    let t = shifted_moments(m as usize, a);
    // Σ_j (m-1)!/j! T_j, accumulated from j = m-1 down.
    let mut weight = 1.0;
    let mut total = 0.0;
    for j in (0..m as usize).rev() {
        total += weight * t[j];
        weight *= j as f64;
    }
    Ok(total)
}

/// `T_j(a) = ∫₀^∞ x^j e^{-x} / (x + a) dx` for `j < m`.
fn shifted_moments(m: usize, a: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(m);
    if a <= 1.0 {
        // Forward recurrence T_j = (j-1)! - a T_{j-1}, stable for a ≤ 1.
        t.push(a.exp() * e1_series(a));
        let mut fact = 1.0;
        for j in 1..m {
            if j > 1 {
                fact *= (j - 1) as f64;
            }
            let prev = t[j - 1];
            t.push(fact - a * prev);
        }
    } else {
        // T_j = j! Γ(-j, a) e^a a^j.
        let mut fact = 1.0;
        for j in 0..m {
            if j > 0 {
                fact *= j as f64;
            }
            t.push(fact * continued_fraction(-(j as f64), a));
        }
    }
    t
}

/// Distribution of the best-polarization gain `ḧ = max(h_v, h_h)` in the
/// large-`L` regime: `h_v ~ Gamma(κ, rate λ)` and `h_h ~ Gamma(κ, rate λ/χ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDistribution {
    /// Shape `(N - M̄)/2 + 1`.
    pub kappa: u32,
    /// Rate `1 / (ζ [P̃^H R P̃]_{gg})`.
    pub lambda: f64,
    /// Inverse cross-polar discrimination of the BS-user link.
    pub chi: f64,
}

impl GainDistribution {
    pub fn new(kappa: u32, lambda: f64, chi: f64) -> Result<Self> {
        let d = GainDistribution { kappa, lambda, chi };
        d.validate()?;
        Ok(d)
    }

    /// Shape from the receive-antenna and stream counts.
    pub fn from_dimensions(rx: usize, streams: usize, lambda: f64, chi: f64) -> Result<Self> {
        if rx < streams || (rx - streams) % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "shape (N - M̄)/2 + 1 needs even N ≥ M̄, got N = {rx}, M̄ = {streams}"
            )));
        }
        Self::new(((rx - streams) / 2 + 1) as u32, lambda, chi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::InvalidArgument("shape κ must be ≥ 1".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("rate λ = {} must be finite and > 0", self.lambda)));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return Err(Error::InvalidArgument(format!("χ = {} not in (0, 1]", self.chi)));
        }
        Ok(())
    }

    /// `P(κ, λx/χ) P(κ, λx)` with `P` the regularized lower incomplete gamma.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_support(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        if x.is_infinite() {
            return Ok(1.0);
        }
        let k = self.kappa as f64;
        Ok(gamma_lr(k, self.lambda * x / self.chi) * gamma_lr(k, self.lambda * x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_support(x)?;
        if x.is_infinite() {
            return Ok(0.0);
        }
        let k = self.kappa as f64;
        let v = gamma_density(x, k, self.lambda) * gamma_lr(k, self.lambda * x / self.chi)
            + gamma_density(x, k, self.lambda / self.chi) * gamma_lr(k, self.lambda * x);
        Ok(v)
    }
}

fn check_support(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("gain must be ≥ 0, got {x}")));
    }
    Ok(())
}

fn gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    if x == 0.0 {
        return if shape == 1.0 { rate } else { 0.0 };
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
}

/// `ᾱ = ρ(α_u² + 𝔍_u)` and `α̃ = ρ𝔍_u` with the gain distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub alpha_bar: f64,
    pub alpha_tilde: f64,
    pub dist: GainDistribution,
}

impl RateInputs {
    pub fn new(alpha_bar: f64, alpha_tilde: f64, dist: GainDistribution) -> Result<Self> {
        if !(alpha_tilde >= 0.0 && alpha_bar >= alpha_tilde) || !alpha_bar.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need ᾱ ≥ α̃ ≥ 0, got ᾱ = {alpha_bar}, α̃ = {alpha_tilde}"
            )));
        }
        dist.validate()?;
        Ok(RateInputs { alpha_bar, alpha_tilde, dist })
    }

    /// Inputs of user `user` within `subset` at linear SNR `snr`.
    pub fn for_user(alloc: &PowerAllocation, subset: &[usize], user: usize, xi: f64, snr: f64, dist: GainDistribution) -> Result<Self> {
        let j = sic_interference(alloc, subset, user, xi)?;
        Self::new(snr * (alloc.get(user) + j), snr * j, dist)
    }
}

/// Closed-form ergodic rate in bits per channel use.
pub fn ergodic_rate_closed_form(inputs: &RateInputs) -> Result<f64> {
    let RateInputs { alpha_bar, alpha_tilde, dist } = *inputs;
    if alpha_bar == alpha_tilde {
        return Ok(0.0);
    }
    let GainDistribution { kappa, lambda, chi } = dist;
    let g = |m: u32, z: f64| meijer_log_gamma(m, z);
    let mut acc = g(kappa, alpha_bar / lambda)? + g(kappa, chi * alpha_bar / lambda)?
        - g(kappa, alpha_tilde / lambda)?
        - g(kappa, chi * alpha_tilde / lambda)?;
    let shrink = chi / ((chi + 1.0) * lambda);
    let mut n_fact = 1.0;
    for n in 0..kappa {
        if n > 0 {
            n_fact *= n as f64;
        }
        let weight = (chi.powi(kappa as i32) + chi.powi(n as i32)) / (n_fact * (chi + 1.0).powi((kappa + n) as i32));
        acc -= weight * (g(kappa + n, shrink * alpha_bar)? - g(kappa + n, shrink * alpha_tilde)?);
    }
    let rate = acc / (std::f64::consts::LN_2 * ln_gamma(kappa as f64).exp());
    Ok(rate.max(0.0))
}

/// `∫₀^∞ [log₂(1 + ᾱx) − log₂(1 + α̃x)] f_ḧ(x) dx` by tanh-sinh quadrature.
pub fn ergodic_rate_quadrature(inputs: &RateInputs) -> Result<f64> {
    let RateInputs { alpha_bar, alpha_tilde, dist } = *inputs;
    if alpha_bar == alpha_tilde {
        return Ok(0.0);
    }
    // Integrate in y = λx so the bulk of the density sits near 1.
    let lambda = dist.lambda;
    let integrand = |y: f64| {
        let x = y / lambda;
        let gap = ((alpha_bar * x).ln_1p() - (alpha_tilde * x).ln_1p()) / std::f64::consts::LN_2;
        gap * dist.pdf(x).unwrap_or(0.0) / lambda
    };
    tanh_sinh_semi_infinite(integrand, QUADRATURE_TOL)
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a one-sample KS statistic `d` over `n` samples.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        sum += if k as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
