//! RBF-kernel support vector machine trained with SMO.
//!
//! The binary solver follows Platt's scheme: a full pass over all points
//! alternates with passes over non-bound multipliers until nothing changes.
//! For each KKT-violating point the partner is first chosen by maximal
//! `|E1 − E2|`, then by scanning non-bound and finally all points from a
//! seeded random start. The decision function is `f(x) = Σ αᵢ yᵢ K(xᵢ, x) + b`.
//! Multiclass problems are split one-vs-rest.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{argmax_score, rbf_kernel, LearnError, Samples};
use crate::exec::Executor;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SvmParams {
    pub c: f64,
    /// `None` means `1 / D`.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Cap on full passes over the training set.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_passes: 5,
        }
    }
}

impl SvmParams {
    pub fn gamma_for(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / dim.max(1) as f64)
    }

    fn check(&self) -> Result<(), LearnError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(LearnError::BadParameter("c"));
        }
        if !self.gamma.is_none_or(|g| g.is_finite() && g > 0.0) {
            return Err(LearnError::BadParameter("gamma"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(LearnError::BadParameter("tol"));
        }
        if self.max_passes == 0 {
            return Err(LearnError::BadParameter("max_passes"));
        }
        Ok(())
    }
}

/// Dense symmetric kernel matrix.
#[derive(Debug, Clone)]
pub struct Gram {
    n: usize,
    k: Vec<f64>,
}

impl Gram {
    pub fn rbf(x: &[f64], dim: usize, gamma: f64) -> Self {
        let n = x.len() / dim;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf_kernel(&x[i * dim..(i + 1) * dim], &x[j * dim..(j + 1) * dim], gamma);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Self { n, k }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.k[i * self.n..(i + 1) * self.n]
    }
}

/// Binary SMO result.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoOutcome {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// A full pass found nothing to change.
    pub converged: bool,
    pub passes: usize,
    /// Dual objective after each accepted pair update, preceded by its
    /// initial value (0).
    pub objective: Vec<f64>,
}

impl SmoOutcome {
    pub fn updates(&self) -> usize {
        self.objective.len() - 1
    }
}

/// Relative step below which a pair update is rejected as no progress.
const STEP_EPS: f64 = 1e-12;
const ETA_MIN: f64 = 1e-12;

struct Solver<'a, R> {
    gram: &'a Gram,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    /// `Σ_j α_j y_j K(j, i)`, without the bias.
    g: Vec<f64>,
    b: f64,
    alpha_sum: f64,
    objective: Vec<f64>,
    rng: R,
}

impl<R: Rng> Solver<'_, R> {
    fn error(&self, i: usize) -> f64 {
        self.g[i] + self.b - self.y[i]
    }

    fn is_bound(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0 || self.alpha[i] >= self.c
    }

    fn dual(&self) -> f64 {
        let quad: f64 = (0..self.alpha.len())
            .map(|i| self.alpha[i] * self.y[i] * self.g[i])
            .sum();
        self.alpha_sum - 0.5 * quad
    }

    fn snap(&self, a: f64) -> f64 {
        let eps = 1e-12 * self.c;
        if a < eps {
            0.0
        } else if a > self.c - eps {
            self.c
        } else {
            a
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.gram.at(i1, i1), self.gram.at(i1, i2), self.gram.at(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        if eta <= ETA_MIN {
            return false;
        }
        let a2_new = self.snap((a2 + y2 * (e1 - e2) / eta).clamp(lo, hi));
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }
        let a1_new = self.snap((a1 + y1 * y2 * (a2 - a2_new)).clamp(0.0, self.c));
        let (d1, d2) = (y1 * (a1_new - a1), y2 * (a2_new - a2));

        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        self.b = if a1_new > 0.0 && a1_new < self.c {
            b1
        } else if a2_new > 0.0 && a2_new < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        let (r1, r2) = (self.gram.row(i1), self.gram.row(i2));
        for (k, g) in self.g.iter_mut().enumerate() {
            *g += d1 * r1[k] + d2 * r2[k];
        }
        self.alpha_sum += (a1_new - a1) + (a2_new - a2);
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        let w = self.dual();
        self.objective.push(w);
        true
    }

    fn violates(&self, i: usize) -> bool {
        let r = self.error(i) * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates(i2) {
            return false;
        }
        let n = self.alpha.len();
        let e2 = self.error(i2);
        let mut best: Option<(f64, usize)> = None;
        for i in (0..n).filter(|&i| !self.is_bound(i)) {
            let gap = (self.error(i) - e2).abs();
            if best.is_none_or(|(g, _)| gap > g) {
                best = Some((gap, i));
            }
        }
        if let Some((_, i1)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if !self.is_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

/// Binary SMO on a precomputed kernel matrix; `y` holds ±1.
pub fn smo_fit_gram(
    gram: &Gram,
    y: &[f64],
    c: f64,
    tol: f64,
    max_passes: usize,
    seed: u64,
) -> Result<SmoOutcome, LearnError> {
    let n = y.len();
    if n == 0 {
        return Err(LearnError::EmptyData);
    }
    if gram.len() != n {
        return Err(LearnError::DimensionMismatch {
            expected: n,
            found: gram.len(),
        });
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(LearnError::SingleClassData);
    }
    let mut s = Solver {
        gram,
        y,
        c,
        tol,
        alpha: vec![0.0; n],
        g: vec![0.0; n],
        b: 0.0,
        alpha_sum: 0.0,
        objective: vec![0.0],
        rng: rng_for(seed, "smo", 0),
    };
    // Bounds the inner non-bound sweeps of one full pass.
    let sweep_cap = 100 * n.max(10);
    let mut passes = 0;
    let mut converged = false;
    while passes < max_passes {
        passes += 1;
        let mut changed = (0..n).filter(|&i| s.examine(i)).count();
        if changed == 0 {
            converged = true;
            break;
        }
        let mut sweeps = 0;
        while changed > 0 && sweeps < sweep_cap {
            sweeps += 1;
            changed = 0;
            for i in 0..n {
                if !s.is_bound(i) && s.examine(i) {
                    changed += 1;
                }
            }
        }
    }
    Ok(SmoOutcome {
        alphas: s.alpha,
        bias: s.b,
        converged,
        passes,
        objective: s.objective,
    })
}

/// Binary SMO with an RBF kernel over row-major `features` (`N × dim`).
#[allow(clippy::too_many_arguments)]
pub fn smo_fit(
    features: &[f64],
    dim: usize,
    labels: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
    max_passes: usize,
    seed: u64,
) -> Result<SmoOutcome, LearnError> {
    if dim == 0 || features.len() != labels.len() * dim {
        return Err(LearnError::DimensionMismatch {
            expected: labels.len() * dim,
            found: features.len(),
        });
    }
    smo_fit_gram(&Gram::rbf(features, dim, gamma), labels, c, tol, max_passes, seed)
}

/// Per-point KKT residual: how far `yᵢ f(xᵢ)` sits on the wrong side of 1
/// given where `αᵢ` lies in `[0, C]`.
pub fn kkt_violations(gram: &Gram, y: &[f64], alphas: &[f64], bias: f64, c: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let f: f64 = (0..y.len()).map(|j| alphas[j] * y[j] * gram.at(j, i)).sum::<f64>() + bias;
            let r = y[i] * f - 1.0;
            let mut v: f64 = 0.0;
            if alphas[i] < c {
                v = v.max(-r);
            }
            if alphas[i] > 0.0 {
                v = v.max(r);
            }
            v
        })
        .collect()
}

/// Support vectors of one binary machine.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinarySvm {
    /// Row-major support vectors.
    pub support: Vec<f64>,
    /// `αᵢ yᵢ` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, row: &[f64], gamma: f64) -> f64 {
        let dim = row.len();
        self.coef
            .iter()
            .enumerate()
            .map(|(j, a)| a * rbf_kernel(&self.support[j * dim..(j + 1) * dim], row, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OneVsRest {
    gamma: f64,
    machines: Vec<BinarySvm>,
}

impl OneVsRest {
    /// Class `c`'s machine uses seed `derive_seed(seed, "svm", c)`.
    pub fn fit<E: Executor>(params: &SvmParams, data: &Samples<'_>, seed: u64, exec: &E) -> Result<Self, LearnError> {
        params.check()?;
        let gamma = params.gamma_for(data.dim);
        let gram = Gram::rbf(data.x, data.dim, gamma);
        let machines = exec.map(data.n_classes, |class| {
            let y: Vec<f64> = data.y.iter().map(|&c| if c == class { 1.0 } else { -1.0 }).collect();
            let out = smo_fit_gram(
                &gram,
                &y,
                params.c,
                params.tol,
                params.max_passes,
                crate::seed::derive_seed(seed, "svm", class as u64),
            )?;
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for (i, &a) in out.alphas.iter().enumerate() {
                if a > 0.0 {
                    support.extend_from_slice(data.row(i));
                    coef.push(a * y[i]);
                }
            }
            Ok(BinarySvm {
                support,
                coef,
                bias: out.bias,
                converged: out.converged,
            })
        });
        Ok(Self {
            gamma,
            machines: machines.into_iter().collect::<Result<_, LearnError>>()?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn machines(&self) -> &[BinarySvm] {
        &self.machines
    }

    pub fn decisions(&self, row: &[f64]) -> Vec<f64> {
        self.machines.iter().map(|m| m.decision(row, self.gamma)).collect()
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax_score(&self.decisions(row))
    }
}
