//! Restricted Boltzmann machine parameters, energies and sampling
//! primitives, plus exact small-model oracles.
//!
//! Conventions, used consistently everywhere in this crate:
//! `W` is hidden x visible (`s x n`), `b` is the visible bias (length `n`),
//! `c` is the hidden bias (length `s`), `V` (length `s`) and the scalar `d`
//! couple the hidden layer to the scalar output `y`.
//!
//! Energies:
//! `E(x, h)      = -b.x - c.h - h^T W x`
//! `E(x, y, h)   = -(h^T W x + b.x + c.h + d y + h^T V y)`
//! `F(x)         = -b.x - sum_j softplus(c_j + W_j.x)`, with
//! `p(x) = e^{-F(x)} / Z`.

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sigmoid, softplus, LogSumExp};
use crate::par;
use crate::rng::RngStream;
use ndarray::{Array1, Array2};

/// Parameters of one RBM layer modelling `p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeRbm {
    /// Hidden x visible weight matrix (`s x n`).
    pub weights: Array2<f64>,
    /// Visible bias, length `n`.
    pub visible_bias: Array1<f64>,
    /// Hidden bias, length `s`.
    pub hidden_bias: Array1<f64>,
}

impl GenerativeRbm {
    pub fn new(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
    ) -> Result<Self> {
        if weights.nrows() != hidden_bias.len() || weights.ncols() != visible_bias.len() {
            return Err(Error::dims(format!(
                "W is {}x{}, |b| = {}, |c| = {}",
                weights.nrows(),
                weights.ncols(),
                visible_bias.len(),
                hidden_bias.len()
            )));
        }
        let m = Self {
            weights,
            visible_bias,
            hidden_bias,
        };
        m.check_finite()?;
        Ok(m)
    }

    /// All-zero model of the given shape.
    pub fn zeros(hidden: usize, visible: usize) -> Self {
        Self {
            weights: Array2::zeros((hidden, visible)),
            visible_bias: Array1::zeros(visible),
            hidden_bias: Array1::zeros(hidden),
        }
    }

    /// Small random initialization: `W ~ U(-0.01, 0.01) / sqrt(n)`, zero biases.
    pub fn init(hidden: usize, visible: usize, rng: &mut RngStream) -> Self {
        let scale = 0.01 / (visible.max(1) as f64).sqrt();
        let weights =
            Array2::from_shape_fn((hidden, visible), |_| (2.0 * rng.uniform() - 1.0) * scale);
        Self {
            weights,
            visible_bias: Array1::zeros(visible),
            hidden_bias: Array1::zeros(hidden),
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn visible_count(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn check_finite(&self) -> Result<()> {
        let ok = self.weights.iter().all(|v| v.is_finite())
            && self.visible_bias.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Numerical("non-finite model parameter".into()))
        }
    }

    /// Total hidden input `c + W x`.
    pub fn hidden_input(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(x) + &self.hidden_bias
    }

    /// Total visible input `b + W^T h`; the natural parameters of the
    /// visible conditionals.
    pub fn visible_input(&self, h: &Array1<f64>) -> Array1<f64> {
        self.weights.t().dot(h) + &self.visible_bias
    }
}

/// [`GenerativeRbm`] extended with output weights `V` and output bias `d`
/// for joint or conditional modelling of `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalRbm {
    pub base: GenerativeRbm,
    /// Hidden-to-output weights, length `s`.
    pub output_weights: Array1<f64>,
    /// Output bias.
    pub output_bias: f64,
}

impl ConditionalRbm {
    pub fn new(base: GenerativeRbm, output_weights: Array1<f64>, output_bias: f64) -> Result<Self> {
        if output_weights.len() != base.hidden_count() {
            return Err(Error::dims(format!(
                "|V| = {} but model has {} hidden units",
                output_weights.len(),
                base.hidden_count()
            )));
        }
        if !output_weights.iter().all(|v| v.is_finite()) || !output_bias.is_finite() {
            return Err(Error::Numerical("non-finite output parameter".into()));
        }
        Ok(Self {
            base,
            output_weights,
            output_bias,
        })
    }

    /// Extend a pre-trained base with zero output couplings.
    pub fn from_base(base: GenerativeRbm) -> Self {
        let s = base.hidden_count();
        Self {
            base,
            output_weights: Array1::zeros(s),
            output_bias: 0.0,
        }
    }

    pub fn zeros(hidden: usize, visible: usize) -> Self {
        Self::from_base(GenerativeRbm::zeros(hidden, visible))
    }

    pub fn hidden_count(&self) -> usize {
        self.base.hidden_count()
    }

    pub fn visible_count(&self) -> usize {
        self.base.visible_count()
    }

    pub fn check_finite(&self) -> Result<()> {
        self.base.check_finite()?;
        if self.output_weights.iter().all(|v| v.is_finite()) && self.output_bias.is_finite() {
            Ok(())
        } else {
            Err(Error::Numerical("non-finite output parameter".into()))
        }
    }
}

/// A sampled hidden configuration together with the activation
/// probabilities it was drawn from.
#[derive(Debug, Clone)]
pub struct HiddenState {
    /// Binary states, each entry 0.0 or 1.0.
    pub bits: Array1<f64>,
    /// Activation probabilities, each in `[0, 1]`.
    pub probs: Array1<f64>,
}

fn check_dims(m: &GenerativeRbm, x: &Array1<f64>, h: Option<&Array1<f64>>) -> Result<()> {
    if x.len() != m.visible_count() {
        return Err(Error::dims(format!(
            "|x| = {} but model has {} visible units",
            x.len(),
            m.visible_count()
        )));
    }
    if let Some(h) = h {
        if h.len() != m.hidden_count() {
            return Err(Error::dims(format!(
                "|h| = {} but model has {} hidden units",
                h.len(),
                m.hidden_count()
            )));
        }
    }
    Ok(())
}

/// Energy `E(x, h) = -b.x - c.h - h^T W x`.
pub fn energy(x: &Array1<f64>, h: &Array1<f64>, m: &GenerativeRbm) -> Result<f64> {
    check_dims(m, x, Some(h))?;
    Ok(-m.visible_bias.dot(x) - m.hidden_bias.dot(h) - h.dot(&m.weights.dot(x)))
}

/// Joint energy `E(x, y, h) = -(h^T W x + b.x + c.h + d y + h^T V y)`.
pub fn joint_energy(x: &Array1<f64>, y: f64, h: &Array1<f64>, m: &ConditionalRbm) -> Result<f64> {
    let base = energy(x, h, &m.base)?;
    Ok(base - m.output_bias * y - h.dot(&m.output_weights) * y)
}

/// Free energy `F(x)` with `log sum_h e^{-E(x,h)} = -F(x)`.
pub fn free_energy(x: &Array1<f64>, m: &GenerativeRbm) -> Result<f64> {
    check_dims(m, x, None)?;
    let act = m.hidden_input(x);
    Ok(-m.visible_bias.dot(x) - act.iter().map(|&z| softplus(z)).sum::<f64>())
}

/// `p(h_j = 1 | x) = sigma(c_j + W_j.x)` for every hidden unit.
pub fn hidden_activation_probs(x: &Array1<f64>, m: &GenerativeRbm) -> Result<Array1<f64>> {
    check_dims(m, x, None)?;
    Ok(m.hidden_input(x).mapv(sigmoid))
}

/// `p(h_j = 1 | x, y) = sigma(c_j + W_j.x + V_j y)`.
pub fn hidden_given_xy_probs(x: &Array1<f64>, y: f64, m: &ConditionalRbm) -> Result<Array1<f64>> {
    check_dims(&m.base, x, None)?;
    let act = m.base.hidden_input(x) + &(&m.output_weights * y);
    Ok(act.mapv(sigmoid))
}

/// Threshold sampling: bit `j` is 1 iff the next uniform draw is below
/// `probs[j]`. Consumes exactly `probs.len()` draws.
pub fn sample_hidden(probs: &Array1<f64>, rng: &mut RngStream) -> Array1<f64> {
    probs.mapv(|p| f64::from(rng.uniform() < p))
}

/// Draw a full [`HiddenState`] from the activations given `x`.
pub fn sample_hidden_state(
    x: &Array1<f64>,
    m: &GenerativeRbm,
    rng: &mut RngStream,
) -> Result<HiddenState> {
    let probs = hidden_activation_probs(x, m)?;
    let bits = sample_hidden(&probs, rng);
    Ok(HiddenState { bits, probs })
}

/// Largest model size (`max(n, s)`) enumerated exactly.
pub const ENUMERATION_LIMIT: usize = 20;

/// Exact `log Z` for a binary-visible model: the hidden layer is
/// marginalized analytically through the free energy and all `2^n`
/// visible patterns are enumerated.
pub fn exact_log_partition(m: &GenerativeRbm) -> Result<f64> {
    let n = m.visible_count();
    let s = m.hidden_count();
    if n > ENUMERATION_LIMIT || s > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit(format!(
            "n = {n}, s = {s} exceeds {ENUMERATION_LIMIT}"
        )));
    }
    let values = par::ordered_map_range(1usize << n, |pattern| {
        let x = bit_pattern(pattern, n);
        -free_energy(&x, m).expect("dims checked above")
    });
    Ok(log_sum_exp(&values))
}

/// The `i`-th binary visible pattern, most significant bit first.
pub fn bit_pattern(index: usize, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|i| ((index >> (n - 1 - i)) & 1) as f64))
}

/// Exact `log p(x)` for a binary-visible model within enumeration limits.
pub fn exact_log_prob(x: &Array1<f64>, m: &GenerativeRbm) -> Result<f64> {
    Ok(-free_energy(x, m)? - exact_log_partition(m)?)
}

/// Kullback-Leibler divergence `sum q log(q/p)` of two discrete
/// distributions on the same support. Returns `+inf` when `p` is zero
/// somewhere `q` is positive.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::dims(format!(
            "support sizes differ: {} vs {}",
            q.len(),
            p.len()
        )));
    }
    let mut acc = 0.0;
    for (&qi, &pi) in q.iter().zip(p.iter()) {
        if qi < 0.0 || pi < 0.0 {
            return Err(Error::InvalidArgument(
                "negative probability mass".into(),
            ));
        }
        if qi > 0.0 {
            if pi == 0.0 {
                return Ok(f64::INFINITY);
            }
            acc += qi * (qi / pi).ln();
        }
    }
    Ok(acc)
}

/// Exact joint `log sum_h e^{-E(x, y, h)}` via analytic marginalization:
/// `b.x + d y + sum_j softplus(c_j + W_j.x + V_j y)`.
pub fn joint_log_unnormalized(x: &Array1<f64>, y: f64, m: &ConditionalRbm) -> Result<f64> {
    check_dims(&m.base, x, None)?;
    let act = m.base.hidden_input(x) + &(&m.output_weights * y);
    Ok(m.base.visible_bias.dot(x)
        + m.output_bias * y
        + act.iter().map(|&z| softplus(z)).sum::<f64>())
}

/// Exact `log Z` of a conditional model whose visibles are binary and
/// whose output ranges over the given grid of values.
pub fn exact_log_partition_joint(m: &ConditionalRbm, y_grid: &[f64]) -> Result<f64> {
    let n = m.visible_count();
    if n > ENUMERATION_LIMIT || m.hidden_count() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit(format!(
            "n = {n}, s = {} exceeds {ENUMERATION_LIMIT}",
            m.hidden_count()
        )));
    }
    let mut acc = LogSumExp::default();
    for pattern in 0..(1usize << n) {
        let x = bit_pattern(pattern, n);
        for &y in y_grid {
            acc.add(joint_log_unnormalized(&x, y, m)?);
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    const LN2: f64 = std::f64::consts::LN_2;

    fn random_model(hidden: usize, visible: usize, seed: u64) -> GenerativeRbm {
        let mut rng = RngStream::new(seed);
        GenerativeRbm::new(
            Array2::from_shape_fn((hidden, visible), |_| rng.normal()),
            Array1::from_shape_fn(visible, |_| rng.normal()),
            Array1::from_shape_fn(hidden, |_| rng.normal()),
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_zero_energy() {
        let m = GenerativeRbm::zeros(2, 3);
        let e = energy(&array![1.0, 0.0, 1.0], &array![1.0, 1.0], &m).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn single_weight_energy() {
        let m = GenerativeRbm::new(array![[1.0]], array![0.0], array![0.0]).unwrap();
        let e = energy(&array![1.0], &array![1.0], &m).unwrap();
        assert_eq!(e, -1.0);
    }

    #[test]
    fn energy_matches_triple_loop() {
        let m = random_model(3, 4, 11);
        let mut rng = RngStream::new(12);
        let x = Array1::from_shape_fn(4, |_| rng.normal());
        let h = Array1::from_shape_fn(3, |_| f64::from(rng.uniform() < 0.5));
        let mut expected = 0.0;
        for i in 0..4 {
            expected -= m.visible_bias[i] * x[i];
        }
        for j in 0..3 {
            expected -= m.hidden_bias[j] * h[j];
            for i in 0..4 {
                expected -= h[j] * m.weights[[j, i]] * x[i];
            }
        }
        assert_relative_eq!(
            energy(&x, &h, &m).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn energy_rejects_bad_dims() {
        let m = GenerativeRbm::zeros(2, 3);
        assert!(energy(&array![1.0], &array![0.0, 1.0], &m).is_err());
    }

    #[test]
    fn joint_energy_cases() {
        let m = ConditionalRbm::zeros(1, 1);
        assert_eq!(
            joint_energy(&array![0.3], 0.7, &array![1.0], &m).unwrap(),
            0.0
        );
        let m = ConditionalRbm::new(GenerativeRbm::zeros(1, 1), array![1.0], 0.0).unwrap();
        let e = joint_energy(&array![0.0], 0.5, &array![1.0], &m).unwrap();
        assert_relative_eq!(e, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn joint_energy_matches_term_sum() {
        let mut rng = RngStream::new(5);
        let base = random_model(3, 2, 50);
        let v = Array1::from_shape_fn(3, |_| rng.normal());
        let d = rng.normal();
        let m = ConditionalRbm::new(base, v, d).unwrap();
        let x = array![0.2, -0.4];
        let y = 0.9;
        let h = array![1.0, 0.0, 1.0];
        let mut expected = 0.0;
        for j in 0..3 {
            for i in 0..2 {
                expected += h[j] * m.base.weights[[j, i]] * x[i];
            }
            expected += m.base.hidden_bias[j] * h[j];
            expected += h[j] * m.output_weights[j] * y;
        }
        for i in 0..2 {
            expected += m.base.visible_bias[i] * x[i];
        }
        expected += m.output_bias * y;
        assert_relative_eq!(
            joint_energy(&x, y, &h, &m).unwrap(),
            -expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn free_energy_zero_model() {
        let m = GenerativeRbm::zeros(4, 2);
        let f = free_energy(&array![0.0, 0.0], &m).unwrap();
        assert_relative_eq!(f, -4.0 * LN2, epsilon = 1e-14);
    }

    #[test]
    fn free_energy_matches_hidden_enumeration() {
        let m = random_model(3, 2, 77);
        let x = array![0.7, -0.3];
        let mut acc = Vec::new();
        for pattern in 0..8usize {
            let h = bit_pattern(pattern, 3);
            acc.push(-energy(&x, &h, &m).unwrap());
        }
        assert_relative_eq!(
            -free_energy(&x, &m).unwrap(),
            log_sum_exp(&acc),
            epsilon = 1e-10
        );
    }

    #[test]
    fn hidden_probs_zero_model() {
        let m = GenerativeRbm::zeros(3, 2);
        let p = hidden_activation_probs(&array![0.4, 0.6], &m).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn hidden_probs_saturate() {
        let m = GenerativeRbm::new(array![[100.0]], array![0.0], array![0.0]).unwrap();
        let p = hidden_activation_probs(&array![10.0], &m).unwrap();
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn hidden_probs_match_enumeration() {
        let m = random_model(3, 3, 4242);
        let x = array![1.0, 0.0, 1.0];
        // p(h_j = 1 | x) from brute-force enumeration of e^{-E(x, h)}
        let mut mass = vec![0.0; 3];
        let mut total = 0.0;
        for pattern in 0..8usize {
            let h = bit_pattern(pattern, 3);
            let w = (-energy(&x, &h, &m).unwrap()).exp();
            total += w;
            for j in 0..3 {
                if h[j] > 0.5 {
                    mass[j] += w;
                }
            }
        }
        let probs = hidden_activation_probs(&x, &m).unwrap();
        for j in 0..3 {
            assert_relative_eq!(probs[j], mass[j] / total, epsilon = 1e-10);
        }
    }

    #[test]
    fn sample_hidden_extremes_and_mean() {
        let mut rng = RngStream::new(9);
        let ones = sample_hidden(&Array1::ones(8), &mut rng);
        assert!(ones.iter().all(|&b| b == 1.0));
        let zeros = sample_hidden(&Array1::zeros(8), &mut rng);
        assert!(zeros.iter().all(|&b| b == 0.0));

        let probs = Array1::from_elem(1, 0.3);
        let mut count = 0.0;
        for _ in 0..100_000 {
            count += sample_hidden(&probs, &mut rng)[0];
        }
        assert!((count / 100_000.0 - 0.3).abs() < 0.01);
    }

    #[test]
    fn conditional_probs_reduce_at_zero_output() {
        let base = random_model(4, 3, 31);
        let mut rng = RngStream::new(32);
        let v = Array1::from_shape_fn(4, |_| rng.normal());
        let m = ConditionalRbm::new(base.clone(), v, 0.3).unwrap();
        let x = array![0.1, 0.5, -0.2];
        let with_zero = hidden_given_xy_probs(&x, 0.0, &m).unwrap();
        let plain = hidden_activation_probs(&x, &base).unwrap();
        assert_eq!(with_zero, plain);
    }

    #[test]
    fn conditional_probs_match_enumeration() {
        let mut rng = RngStream::new(88);
        let base = random_model(3, 2, 89);
        let v = Array1::from_shape_fn(3, |_| rng.normal());
        let m = ConditionalRbm::new(base, v, rng.normal()).unwrap();
        let x = array![0.3, 0.8];
        let y = 0.6;
        let mut mass = vec![0.0; 3];
        let mut total = 0.0;
        for pattern in 0..8usize {
            let h = bit_pattern(pattern, 3);
            let w = (-joint_energy(&x, y, &h, &m).unwrap()).exp();
            total += w;
            for j in 0..3 {
                if h[j] > 0.5 {
                    mass[j] += w;
                }
            }
        }
        let probs = hidden_given_xy_probs(&x, y, &m).unwrap();
        for j in 0..3 {
            assert_relative_eq!(probs[j], mass[j] / total, epsilon = 1e-10);
        }
    }

    #[test]
    fn log_partition_zero_model() {
        let m = GenerativeRbm::zeros(2, 2);
        assert_relative_eq!(
            exact_log_partition(&m).unwrap(),
            16.0f64.ln(),
            epsilon = 1e-12
        );
        let degenerate = GenerativeRbm::zeros(0, 1);
        assert_relative_eq!(
            exact_log_partition(&degenerate).unwrap(),
            2.0f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn log_partition_matches_double_enumeration() {
        let m = random_model(3, 3, 555);
        let mut terms = Vec::new();
        for xp in 0..8usize {
            let x = bit_pattern(xp, 3);
            for hp in 0..8usize {
                let h = bit_pattern(hp, 3);
                terms.push(-energy(&x, &h, &m).unwrap());
            }
        }
        assert_relative_eq!(
            exact_log_partition(&m).unwrap(),
            log_sum_exp(&terms),
            epsilon = 1e-10
        );
    }

    #[test]
    fn log_partition_size_limit() {
        let m = GenerativeRbm::zeros(2, 21);
        assert!(exact_log_partition(&m).is_err());
    }

    #[test]
    fn kl_cases() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_relative_eq!(
            kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            LN2,
            epsilon = 1e-14
        );
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap().is_infinite());
        let q = [0.2, 0.5, 0.3];
        let p = [0.4, 0.4, 0.2];
        let direct: f64 = q
            .iter()
            .zip(p.iter())
            .map(|(&a, &b)| a * (a / b).ln())
            .sum();
        assert_relative_eq!(kl_divergence(&q, &p).unwrap(), direct, epsilon = 1e-12);
        assert!(kl_divergence(&q, &p).unwrap() >= 0.0);
    }
}
