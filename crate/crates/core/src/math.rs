//! Overflow-safe scalar helpers shared across modules.

/// Logistic function with saturation-safe branches.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`; returns `z` for `z > 30` and `e^z` for `z < -30`.
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically stable `log(sum(exp(v)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// Streaming log-sum-exp accumulator for sums too large to materialize.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max.is_finite() {
            self.max + self.sum.ln()
        } else {
            self.max
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(1e4) == 1.0 && sigmoid(-1e4) == 0.0);
    }

    #[test]
    fn softplus_branches_match() {
        for z in [-31.0, -29.9, 0.0, 29.9, 31.0] {
            let exact = (z as f64).exp().ln_1p();
            assert_relative_eq!(softplus(z), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn streaming_lse_matches_batch() {
        let vals = [-3.0, 700.0, 1.5, 699.5, -1000.0];
        let mut acc = LogSumExp::default();
        for v in vals {
            acc.add(v);
        }
        assert_relative_eq!(acc.value(), log_sum_exp(&vals), max_relative = 1e-13);
    }
}
