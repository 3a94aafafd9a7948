//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Loss: mean cross-entropy of the softmax over `W·x + b`, plus
//! `(l2 / 2)·‖W‖²` (the bias is not penalized). Weights start at zero.

use alloc::vec;
use alloc::vec::Vec;

use super::{argmax_score, LearnError, Samples};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LinearParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Linear {
    n_classes: usize,
    dim: usize,
    /// Row-major `n_classes × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Loss and its gradient at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            n_classes,
            dim,
            weights: vec![0.0; n_classes * dim],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn from_parts(n_classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weights.len(), n_classes * dim);
        assert_eq!(bias.len(), n_classes);
        Self {
            n_classes,
            dim,
            weights,
            bias,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn fit(params: &LinearParams, data: &Samples<'_>) -> Result<Self, LearnError> {
        Ok(Self::fit_traced(params, data)?.0)
    }

    /// Also returns the loss before each step and after the last one.
    pub fn fit_traced(params: &LinearParams, data: &Samples<'_>) -> Result<(Self, Vec<f64>), LearnError> {
        if !(params.learning_rate.is_finite() && params.learning_rate > 0.0) {
            return Err(LearnError::BadParameter("learning_rate"));
        }
        if !(params.l2.is_finite() && params.l2 >= 0.0) {
            return Err(LearnError::BadParameter("l2"));
        }
        let mut model = Self::zeros(data.n_classes, data.dim);
        let mut losses = Vec::with_capacity(params.epochs + 1);
        for _ in 0..params.epochs {
            let g = model.loss_gradient(data, params.l2);
            losses.push(g.loss);
            for (w, d) in model.weights.iter_mut().zip(&g.d_weights) {
                *w -= params.learning_rate * d;
            }
            for (b, d) in model.bias.iter_mut().zip(&g.d_bias) {
                *b -= params.learning_rate * d;
            }
        }
        losses.push(model.loss_gradient(data, params.l2).loss);
        Ok((model, losses))
    }

    fn scores(&self, row: &[f64], out: &mut [f64]) {
        for (c, s) in out.iter_mut().enumerate() {
            let w = &self.weights[c * self.dim..(c + 1) * self.dim];
            *s = self.bias[c] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Analytic loss and gradient.
    pub fn loss_gradient(&self, data: &Samples<'_>, l2: f64) -> LossGradient {
        let (k, d) = (self.n_classes, self.dim);
        let n = data.len() as f64;
        let mut d_weights = vec![0.0; k * d];
        let mut d_bias = vec![0.0; k];
        let mut z = vec![0.0; k];
        let mut loss = 0.0;
        for i in 0..data.len() {
            let row = data.row(i);
            self.scores(row, &mut z);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for s in z.iter_mut() {
                *s = libm::exp(*s - max);
                total += *s;
            }
            let y = data.y[i];
            loss -= libm::log(z[y] / total);
            for c in 0..k {
                let residual = (z[c] / total - if c == y { 1.0 } else { 0.0 }) / n;
                d_bias[c] += residual;
                for (g, x) in d_weights[c * d..(c + 1) * d].iter_mut().zip(row) {
                    *g += residual * x;
                }
            }
        }
        loss /= n;
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in d_weights.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        LossGradient {
            loss,
            d_weights,
            d_bias,
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut z = vec![0.0; self.n_classes];
        self.scores(row, &mut z);
        argmax_score(&z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // fixed 5x3 example
    const X: [f64; 15] = [
        0.5, -1.2, 0.3, //
        1.5, 0.2, -0.7, //
        -0.3, 0.8, 1.1, //
        0.9, -0.4, -1.5, //
        -1.1, 1.3, 0.6,
    ];
    const Y: [usize; 5] = [0, 1, 2, 1, 0];

    fn data() -> Samples<'static> {
        Samples {
            x: &X,
            dim: 3,
            y: &Y,
            n_classes: 3,
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let weights: Vec<f64> = (0..9).map(|i| 0.1 * (i as f64) - 0.35).collect();
        let bias = vec![0.05, -0.1, 0.2];
        let l2 = 0.01;
        let m = Linear::from_parts(3, 3, weights.clone(), bias.clone());
        let g = m.loss_gradient(&data(), l2);
        let h = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-5, "analytic {analytic} numeric {numeric} rel {rel}");
        };
        for j in 0..9 {
            let mut wp = weights.clone();
            wp[j] += h;
            let mut wm = weights.clone();
            wm[j] -= h;
            let lp = Linear::from_parts(3, 3, wp, bias.clone())
                .loss_gradient(&data(), l2)
                .loss;
            let lm = Linear::from_parts(3, 3, wm, bias.clone())
                .loss_gradient(&data(), l2)
                .loss;
            check(g.d_weights[j], lp, lm);
        }
        for j in 0..3 {
            let mut bp = bias.clone();
            bp[j] += h;
            let mut bm = bias.clone();
            bm[j] -= h;
            let lp = Linear::from_parts(3, 3, weights.clone(), bp)
                .loss_gradient(&data(), l2)
                .loss;
            let lm = Linear::from_parts(3, 3, weights.clone(), bm)
                .loss_gradient(&data(), l2)
                .loss;
            check(g.d_bias[j], lp, lm);
        }
    }

    #[test]
    fn zero_weights_give_log_k_loss() {
        let g = Linear::zeros(3, 3).loss_gradient(&data(), 0.0);
        assert!((g.loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_decreases_over_first_epoch_on_separable_data() {
        let x = [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0];
        let y = [0, 0, 0, 1, 1, 1];
        let data = Samples {
            x: &x,
            dim: 1,
            y: &y,
            n_classes: 2,
        };
        let params = LinearParams {
            learning_rate: 0.01,
            epochs: 50,
            l2: 0.0,
        };
        let (m, losses) = Linear::fit_traced(&params, &data).unwrap();
        assert!(losses[1] < losses[0]);
        assert!(losses.windows(2).all(|w| w[1] < w[0]));
        for (i, &c) in y.iter().enumerate() {
            assert_eq!(m.predict(&x[i..i + 1]), c);
        }
    }
}
