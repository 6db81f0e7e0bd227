//! Evaluation of the conditional distribution `p(y | x)` of a
//! [`ConditionalRbm`] and the samplers needed by its training chains.
//!
//! With the hidden layer marginalized analytically,
//!
//! `p(y | x) = e^{d y} prod_j (1 + e^{tau_j(x, y)}) / Int`,
//! `tau_j(x, y) = c_j + W_j.x + V_j y`,
//!
//! where the normalizer `Int` integrates the numerator over the output
//! support. Two routes to the normalizer are provided: the closed-form
//! power-set expansion of the product (exact, `2^s` terms) and adaptive
//! quadrature. Everything is accumulated in log space so evaluation stays
//! finite far outside the range of `exp`.

use crate::dist::{self, NaturalParameter, SupportInterval};
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus, LogSumExp};
use crate::quad;
use crate::rbm::{hidden_given_xy_probs, sample_hidden, ConditionalRbm};
use crate::rng::RngStream;
use ndarray::Array1;

/// One hidden unit's affine exponent `tau_j(y) = offset_j + slope_j * y`,
/// with `offset_j = c_j + W_j.x` and `slope_j = V_j`.
#[derive(Debug, Clone, Copy)]
pub struct TauTerm {
    pub offset: f64,
    pub slope: f64,
}

impl TauTerm {
    pub fn at(&self, y: f64) -> f64 {
        self.offset + self.slope * y
    }
}

/// The tau terms of a model at input `x`.
pub fn tau_terms(x: &Array1<f64>, m: &ConditionalRbm) -> Result<Vec<TauTerm>> {
    if x.len() != m.visible_count() {
        return Err(Error::dims(format!(
            "|x| = {} but model has {} visible units",
            x.len(),
            m.visible_count()
        )));
    }
    let act = m.base.hidden_input(x);
    Ok(act
        .iter()
        .zip(m.output_weights.iter())
        .map(|(&offset, &slope)| TauTerm { offset, slope })
        .collect())
}

/// Log numerator `g(y) = d y + sum_j softplus(tau_j(y))`, i.e.
/// `log sum_h e^{-E(x, y, h)}` without the `b.x` factor shared by the
/// numerator and denominator of `p(y | x)`.
fn log_numerator(taus: &[TauTerm], d: f64, y: f64) -> f64 {
    d * y + taus.iter().map(|t| softplus(t.at(y))).sum::<f64>()
}

/// How the normalizing integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenominatorMethod {
    /// Closed-form expansion over all `2^s` hidden subsets.
    PowerSet,
    /// Adaptive Gauss-Legendre on the log numerator.
    Quadrature,
}

/// Power-set route is exact and cheap up to this many hidden units;
/// beyond it the quadrature route is used by default.
pub const POWER_SET_DEFAULT_LIMIT: usize = 12;

/// Hard cap on power-set enumeration (`2^s` terms).
pub const POWER_SET_HARD_LIMIT: usize = 20;

fn default_method(hidden: usize) -> DenominatorMethod {
    if hidden <= POWER_SET_DEFAULT_LIMIT {
        DenominatorMethod::PowerSet
    } else {
        DenominatorMethod::Quadrature
    }
}

/// `log int e^{beta t} dt` over the support interval.
///
/// Half line requires `beta < 0`; the other supports are entire in `beta`.
fn log_primitive(beta: f64, iv: SupportInterval) -> f64 {
    match iv {
        SupportInterval::HalfLine => -(-beta).ln(),
        SupportInterval::Unit => {
            // (e^beta - 1) / beta
            if beta.abs() < 1e-6 {
                beta / 2.0 + beta * beta / 24.0
            } else if beta > 0.0 {
                beta + (-(-beta).exp_m1()).ln() - beta.ln()
            } else {
                ((-beta.exp_m1()) / -beta).ln()
            }
        }
        SupportInterval::Symmetric { delta } => {
            // 2 sinh(beta delta) / beta = 2 delta * sinh(u)/u, u = beta delta
            let u = (beta * delta).abs();
            let log_sinhc = if u < 1e-6 {
                u * u / 6.0
            } else if u > 30.0 {
                u - std::f64::consts::LN_2 + (-(-2.0 * u).exp()).ln_1p() - u.ln()
            } else {
                (u.sinh() / u).ln()
            };
            (2.0 * delta).ln() + log_sinhc
        }
    }
}

/// Check integrability of the half-line normalizer: every hidden subset's
/// total slope `d + sum_{j in S} V_j` must be negative, which reduces to
/// the positive-slope subset.
fn check_halfline_integrable(taus: &[TauTerm], d: f64, iv: SupportInterval) -> Result<()> {
    if iv != SupportInterval::HalfLine {
        return Ok(());
    }
    let subset: Vec<usize> = taus
        .iter()
        .enumerate()
        .filter(|(_, t)| t.slope > 0.0)
        .map(|(j, _)| j)
        .collect();
    let slope = d + taus.iter().map(|t| t.slope.max(0.0)).sum::<f64>();
    if slope >= 0.0 {
        Err(Error::DivergentIntegral { subset, slope })
    } else {
        Ok(())
    }
}

/// Finite quadrature domain for the output integral. On the half line the
/// upper cutoff is chosen so the truncated tail is negligible relative to
/// the peak: `g(y) <= g(Y) + lambda (y - Y)` with `lambda < 0` the maximum
/// subset slope.
fn integration_domain(taus: &[TauTerm], d: f64, iv: SupportInterval) -> Result<(f64, f64)> {
    match iv {
        SupportInterval::Unit => Ok((0.0, 1.0)),
        SupportInterval::Symmetric { delta } => Ok((-delta, delta)),
        SupportInterval::HalfLine => {
            check_halfline_integrable(taus, d, iv)?;
            let lambda = d + taus.iter().map(|t| t.slope.max(0.0)).sum::<f64>();
            let mut upper = 1.0;
            let mut peak = log_numerator(taus, d, 0.0);
            loop {
                let probes = 64;
                for i in 0..=probes {
                    let y = upper * i as f64 / probes as f64;
                    peak = peak.max(log_numerator(taus, d, y));
                }
                let tail =
                    log_numerator(taus, d, upper) + (upper + 1.0 - 1.0 / lambda).ln() - (-lambda).ln();
                if tail < peak + (1e-14f64).ln() || upper > 1e12 {
                    return Ok((0.0, upper));
                }
                upper *= 2.0;
            }
        }
    }
}

/// `log int e^{d y} prod_j (1 + e^{tau_j(x, y)}) dy` over the support.
pub fn log_denominator(
    x: &Array1<f64>,
    m: &ConditionalRbm,
    iv: SupportInterval,
    method: DenominatorMethod,
) -> Result<f64> {
    let taus = tau_terms(x, m)?;
    log_denominator_from_taus(&taus, m.output_bias, iv, method)
}

/// Same as [`log_denominator`] but starting from precomputed tau terms.
pub fn log_denominator_from_taus(
    taus: &[TauTerm],
    d: f64,
    iv: SupportInterval,
    method: DenominatorMethod,
) -> Result<f64> {
    check_halfline_integrable(taus, d, iv)?;
    match method {
        DenominatorMethod::PowerSet => {
            let s = taus.len();
            if s > POWER_SET_HARD_LIMIT {
                return Err(Error::EnumerationLimit(format!(
                    "power-set expansion over {s} hidden units exceeds {POWER_SET_HARD_LIMIT}"
                )));
            }
            let mut acc = LogSumExp::default();
            for mask in 0u64..(1u64 << s) {
                let mut offset_sum = 0.0;
                let mut slope_sum = d;
                for (j, t) in taus.iter().enumerate() {
                    if (mask >> j) & 1 == 1 {
                        offset_sum += t.offset;
                        slope_sum += t.slope;
                    }
                }
                acc.add(offset_sum + log_primitive(slope_sum, iv));
            }
            Ok(acc.value())
        }
        DenominatorMethod::Quadrature => {
            let (lo, hi) = integration_domain(taus, d, iv)?;
            Ok(quad::log_integral_exp(
                &|y| log_numerator(taus, d, y),
                lo,
                hi,
                1e-10,
            ))
        }
    }
}

/// Conditional density `p(y | x)`; zero outside the support.
pub fn conditional_density_y(
    x: &Array1<f64>,
    y: f64,
    m: &ConditionalRbm,
    iv: SupportInterval,
) -> Result<f64> {
    if !iv.contains(y) {
        return Ok(0.0);
    }
    let taus = tau_terms(x, m)?;
    let method = default_method(m.hidden_count());
    let log_den = log_denominator_from_taus(&taus, m.output_bias, iv, method)?;
    Ok((log_numerator(&taus, m.output_bias, y) - log_den).exp())
}

/// Log conditional likelihood `log p(y | x)`.
pub fn cond_loglik(
    x: &Array1<f64>,
    y: f64,
    m: &ConditionalRbm,
    iv: SupportInterval,
) -> Result<f64> {
    if !iv.contains(y) {
        return Err(Error::InvalidArgument(format!(
            "y = {y} outside the support {iv:?}"
        )));
    }
    let taus = tau_terms(x, m)?;
    let method = default_method(m.hidden_count());
    let log_den = log_denominator_from_taus(&taus, m.output_bias, iv, method)?;
    Ok(log_numerator(&taus, m.output_bias, y) - log_den)
}

/// Sum of `log p(y | x)` over a dataset.
pub fn dataset_cond_loglik(
    pairs: &[(Array1<f64>, f64)],
    m: &ConditionalRbm,
    iv: SupportInterval,
) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in pairs {
        total += cond_loglik(x, *y, m, iv)?;
    }
    Ok(total)
}

/// Conditional mean `E[y | x]`: the point prediction of the model,
/// computed by adaptive quadrature on the normalized density.
pub fn conditional_mean_y(x: &Array1<f64>, m: &ConditionalRbm, iv: SupportInterval) -> Result<f64> {
    let taus = tau_terms(x, m)?;
    conditional_mean_from_taus(&taus, m.output_bias, iv)
}

pub fn conditional_mean_from_taus(
    taus: &[TauTerm],
    d: f64,
    iv: SupportInterval,
) -> Result<f64> {
    let (lo, hi) = integration_domain(taus, d, iv)?;
    let g = |y: f64| log_numerator(taus, d, y);
    let mut shift = f64::NEG_INFINITY;
    let probes = 257;
    for i in 0..probes {
        let y = lo + (hi - lo) * i as f64 / (probes - 1) as f64;
        shift = shift.max(g(y));
    }
    let width = hi - lo;
    let mass = quad::integrate(&|y| (g(y) - shift).exp(), lo, hi, 1e-12 * width);
    let first = quad::integrate(
        &|y| y * (g(y) - shift).exp(),
        lo,
        hi,
        1e-12 * width * hi.abs().max(lo.abs()).max(1.0),
    );
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::Numerical("conditional mass vanished".into()));
    }
    Ok(first / mass)
}

/// First and second conditional moments used by the exact gradient:
/// `E[y | x]`, `E[sigma(tau_j) | x]` and `E[y sigma(tau_j) | x]`.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    pub log_den: f64,
    pub mean_y: f64,
    pub hidden_mean: Array1<f64>,
    pub hidden_y_mean: Array1<f64>,
}

/// Exact conditional moments by quadrature (continuous supports).
pub fn conditional_moments(
    x: &Array1<f64>,
    m: &ConditionalRbm,
    iv: SupportInterval,
) -> Result<ConditionalMoments> {
    let taus = tau_terms(x, m)?;
    let d = m.output_bias;
    let (lo, hi) = integration_domain(&taus, d, iv)?;
    let g = |y: f64| log_numerator(&taus, d, y);
    let mut shift = f64::NEG_INFINITY;
    for i in 0..257 {
        let y = lo + (hi - lo) * i as f64 / 256.0;
        shift = shift.max(g(y));
    }
    let width = hi - lo;
    let tol = 1e-13 * width * hi.abs().max(lo.abs()).max(1.0);
    let mass = quad::integrate(&|y| (g(y) - shift).exp(), lo, hi, tol);
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::Numerical("conditional mass vanished".into()));
    }
    let mean_y = quad::integrate(&|y| y * (g(y) - shift).exp(), lo, hi, tol) / mass;
    let s = taus.len();
    let mut hidden_mean = Array1::zeros(s);
    let mut hidden_y_mean = Array1::zeros(s);
    for j in 0..s {
        let t = taus[j];
        hidden_mean[j] =
            quad::integrate(&|y| sigmoid(t.at(y)) * (g(y) - shift).exp(), lo, hi, tol) / mass;
        hidden_y_mean[j] =
            quad::integrate(&|y| y * sigmoid(t.at(y)) * (g(y) - shift).exp(), lo, hi, tol) / mass;
    }
    Ok(ConditionalMoments {
        log_den: shift + mass.ln(),
        mean_y,
        hidden_mean,
        hidden_y_mean,
    })
}

/// Inverse-CDF sampler of `p(y | x)` on a cached grid, paired with the
/// conditional hidden sampler. One instance amortizes the grid over many
/// draws at the same `x`.
pub struct YSampler {
    lo: f64,
    step: f64,
    /// Normalized CDF at the grid points, `cdf[0] = 0 .. cdf[N] = 1`.
    cdf: Vec<f64>,
}

/// Grid resolution of the cached CDF (interpolation error in the CDF is
/// well below 1e-5 on these densities).
pub const Y_GRID_CELLS: usize = 4096;

impl YSampler {
    pub fn new(x: &Array1<f64>, m: &ConditionalRbm, iv: SupportInterval) -> Result<Self> {
        let taus = tau_terms(x, m)?;
        Self::from_taus(&taus, m.output_bias, iv)
    }

    pub fn from_taus(taus: &[TauTerm], d: f64, iv: SupportInterval) -> Result<Self> {
        let (lo, hi) = integration_domain(taus, d, iv)?;
        let n = Y_GRID_CELLS;
        let step = (hi - lo) / n as f64;
        let mut logs = Vec::with_capacity(n + 1);
        let mut shift = f64::NEG_INFINITY;
        for i in 0..=n {
            let v = log_numerator(taus, d, lo + step * i as f64);
            shift = shift.max(v);
            logs.push(v);
        }
        // trapezoid CDF of e^{g - shift}
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut prev = (logs[0] - shift).exp();
        for &lg in logs.iter().skip(1) {
            let cur = (lg - shift).exp();
            acc += 0.5 * (prev + cur) * step;
            cdf.push(acc);
            prev = cur;
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical("degenerate conditional CDF".into()));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(Self { lo, step, cdf })
    }

    /// Draw `y ~ p(y | x)`; consumes one uniform.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform_open();
        let idx = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("cdf is finite"))
        {
            Ok(i) => i,
            Err(i) => i,
        };
        let i = idx.clamp(1, self.cdf.len() - 1);
        let c0 = self.cdf[i - 1];
        let c1 = self.cdf[i];
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.lo + self.step * ((i - 1) as f64 + frac)
    }
}

/// Ancestral sample of `(y, h) ~ p(y, h | x)`: draw `y` from the marginal
/// conditional, then `h` from `p(h | x, y)`.
pub fn sample_y_h_given_x(
    x: &Array1<f64>,
    m: &ConditionalRbm,
    iv: SupportInterval,
    rng: &mut RngStream,
) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let sampler = YSampler::new(x, m, iv)?;
    let y = sampler.sample(rng);
    let probs = hidden_given_xy_probs(x, y, m)?;
    let bits = sample_hidden(&probs, rng);
    Ok((y, bits, probs))
}

/// Componentwise draw of `x ~ p(x | y, h)`; the distribution does not
/// depend on `y`, so only `h` enters through the natural parameters
/// `alpha_i = b_i + (W^T h)_i`.
pub fn sample_x_given_yh(
    h: &Array1<f64>,
    m: &ConditionalRbm,
    iv: SupportInterval,
    rng: &mut RngStream,
) -> Result<Array1<f64>> {
    if h.len() != m.hidden_count() {
        return Err(Error::dims(format!(
            "|h| = {} but model has {} hidden units",
            h.len(),
            m.hidden_count()
        )));
    }
    let alphas = m.base.visible_input(h);
    let mut out = Array1::zeros(alphas.len());
    for (i, &a) in alphas.iter().enumerate() {
        out[i] = dist::sample(NaturalParameter(a), iv, rng.uniform_open())?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Binary-encoded output: y ranges over the 2^m quantizer levels in [0, 1].
// ---------------------------------------------------------------------------

/// Hard cap on output-level enumeration.
pub const LEVEL_ENUMERATION_LIMIT: u32 = 16;

fn check_level_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > LEVEL_ENUMERATION_LIMIT {
        Err(Error::EnumerationLimit(format!(
            "level enumeration needs 1 <= bits <= {LEVEL_ENUMERATION_LIMIT}, got {bits}"
        )))
    } else {
        Ok(())
    }
}

/// Log probabilities of every output level given `x` (exact enumeration).
pub fn level_log_masses(x: &Array1<f64>, m: &ConditionalRbm, bits: u32) -> Result<Vec<f64>> {
    check_level_bits(bits)?;
    let taus = tau_terms(x, m)?;
    let levels = 1usize << bits;
    let max_level = (levels - 1) as f64;
    let mut logs: Vec<f64> = (0..levels)
        .map(|l| log_numerator(&taus, m.output_bias, l as f64 / max_level))
        .collect();
    let norm = crate::math::log_sum_exp(&logs);
    for v in logs.iter_mut() {
        *v -= norm;
    }
    Ok(logs)
}

/// `E[y | x]` over the level grid.
pub fn conditional_mean_levels(x: &Array1<f64>, m: &ConditionalRbm, bits: u32) -> Result<f64> {
    let logs = level_log_masses(x, m, bits)?;
    let max_level = (logs.len() - 1) as f64;
    Ok(logs
        .iter()
        .enumerate()
        .map(|(l, &lp)| l as f64 / max_level * lp.exp())
        .sum())
}

/// `log p(y | x)` with `y` snapped to its nearest level.
pub fn cond_loglik_levels(x: &Array1<f64>, y: f64, m: &ConditionalRbm, bits: u32) -> Result<f64> {
    let logs = level_log_masses(x, m, bits)?;
    let level = crate::codec::level_of(y, bits) as usize;
    Ok(logs[level])
}

/// Exact categorical draw of `(y, h) ~ p(y, h | x)` on the level grid.
pub fn sample_y_h_given_x_levels(
    x: &Array1<f64>,
    m: &ConditionalRbm,
    bits: u32,
    rng: &mut RngStream,
) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let logs = level_log_masses(x, m, bits)?;
    let max_level = (logs.len() - 1) as f64;
    let u = rng.uniform_open();
    let mut acc = 0.0;
    let mut chosen = logs.len() - 1;
    for (l, &lp) in logs.iter().enumerate() {
        acc += lp.exp();
        if u <= acc {
            chosen = l;
            break;
        }
    }
    let y = chosen as f64 / max_level;
    let probs = hidden_given_xy_probs(x, y, m)?;
    let bits_h = sample_hidden(&probs, rng);
    Ok((y, bits_h, probs))
}

/// Draw an output level from `p(y | h)`, the discretized exponential with
/// natural parameter `gamma = d + h^T V` on the level grid.
pub fn sample_output_level_given_h(
    h: &Array1<f64>,
    m: &ConditionalRbm,
    bits: u32,
    rng: &mut RngStream,
) -> Result<f64> {
    check_level_bits(bits)?;
    let gamma = m.output_bias + h.dot(&m.output_weights);
    let levels = 1usize << bits;
    let max_level = (levels - 1) as f64;
    let logs: Vec<f64> = (0..levels)
        .map(|l| gamma * l as f64 / max_level)
        .collect();
    let norm = crate::math::log_sum_exp(&logs);
    let u = rng.uniform_open();
    let mut acc = 0.0;
    for (l, &lg) in logs.iter().enumerate() {
        acc += (lg - norm).exp();
        if u <= acc {
            return Ok(l as f64 / max_level);
        }
    }
    Ok(1.0)
}

/// Exact conditional moments over the level grid (binary-output twin of
/// [`conditional_moments`]).
pub fn conditional_moments_levels(
    x: &Array1<f64>,
    m: &ConditionalRbm,
    bits: u32,
) -> Result<ConditionalMoments> {
    let taus = tau_terms(x, m)?;
    let logs = level_log_masses(x, m, bits)?;
    let max_level = (logs.len() - 1) as f64;
    let s = taus.len();
    let mut mean_y = 0.0;
    let mut hidden_mean = Array1::zeros(s);
    let mut hidden_y_mean = Array1::zeros(s);
    for (l, &lp) in logs.iter().enumerate() {
        let y = l as f64 / max_level;
        let p = lp.exp();
        mean_y += y * p;
        for j in 0..s {
            let sj = sigmoid(taus[j].at(y));
            hidden_mean[j] += sj * p;
            hidden_y_mean[j] += y * sj * p;
        }
    }
    // normalizer of the discrete masses, in the same units as cond_loglik_levels
    let log_den = crate::math::log_sum_exp(
        &(0..logs.len())
            .map(|l| log_numerator(&taus, m.output_bias, l as f64 / max_level))
            .collect::<Vec<_>>(),
    );
    Ok(ConditionalMoments {
        log_den,
        mean_y,
        hidden_mean,
        hidden_y_mean,
    })
}
