//! Ridge readout, capacities and the total linear memory capacity.
//!
//! The readout weights solve (S^T S + lambda I) w = S^T y. The capacity of a
//! target y is the regularized projection y^T S (S^T S + lambda I)^(-1) S^T y
//! normalized by |y|^2, and the linear memory capacity sums the capacities of
//! the shifted-input recall targets. Capacities indistinguishable from
//! finite-statistics noise can be removed with a chi-squared cutoff.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::chi2::chi2_quantile;
use crate::error::{Error, Result};
use crate::input::InputSequence;
use crate::state::StateMatrix;

/// Probability of a spurious capacity surviving the cutoff.
pub const CUTOFF_P_VALUE: f64 = 1e-6;

/// Regularization rule: `lambda_factor` times the largest absolute state
/// response, unless an absolute override is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgeConfig {
    pub lambda_factor: f64,
    pub lambda_abs: Option<f64>,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { lambda_factor: 1e-6, lambda_abs: None }
    }
}

impl RidgeConfig {
    pub fn lambda_for(&self, s: &StateMatrix) -> Result<f64> {
        let lambda = match self.lambda_abs {
            Some(l) => l,
            None => self.lambda_factor * s.max_abs(),
        };
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be positive, got {lambda} (zero state response?)"
            )));
        }
        Ok(lambda)
    }
}

/// Per-recall capacities C_l for l = 0..=l_max, the cutoff threshold applied
/// (0 when disabled) and their sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySpectrum {
    pub capacities: Vec<f64>,
    pub cutoff: f64,
    pub lambda: f64,
    pub mc_total: f64,
}

impl CapacitySpectrum {
    pub fn l_max(&self) -> usize {
        self.capacities.len() - 1
    }
}

fn gram(s: &StateMatrix, lambda: f64) -> DMatrix<f64> {
    let e = s.entries();
    let mut g = e.tr_mul(e);
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    g
}

fn factorize(g: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(g).ok_or_else(|| {
        Error::SolverFailure("regularized Gram matrix is not positive definite".into())
    })
}

/// Ridge regression weights for a single target.
pub fn train_ridge(s: &StateMatrix, target: &[f64], lambda: f64) -> Result<DVector<f64>> {
    if target.len() != s.k() {
        return Err(Error::InvalidParameter(format!(
            "target length {} does not match {} cycles",
            target.len(),
            s.k()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    if s.k() < s.n_v() {
        log::warn!("fewer cycles ({}) than virtual nodes ({}); readout is underdetermined", s.k(), s.n_v());
    }
    let chol = factorize(gram(s, lambda))?;
    let y = DVector::from_column_slice(target);
    let sty = s.entries().tr_mul(&y);
    Ok(chol.solve(&sty))
}

/// Readout prediction S w.
pub fn predict(s: &StateMatrix, weights: &DVector<f64>) -> DVector<f64> {
    s.entries() * weights
}

/// Normalized root mean square error between a prediction and a target.
pub fn nrmse(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() {
        return Err(Error::InvalidParameter("length mismatch".into()));
    }
    let k = target.len() as f64;
    let mean = target.iter().sum::<f64>() / k;
    let var = target.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / k;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sq_err = prediction
        .iter()
        .zip(target)
        .map(|(p, y)| (y - p) * (y - p))
        .sum::<f64>();
    Ok((sq_err / (k * var)).sqrt())
}

/// Capacity of one target on the training data.
pub fn capacity(s: &StateMatrix, target: &[f64], lambda: f64) -> Result<f64> {
    let norm_sq = target.iter().map(|y| y * y).sum::<f64>();
    if norm_sq <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let chol = factorize(gram(s, lambda))?;
    let y = DVector::from_column_slice(target);
    let sty = s.entries().tr_mul(&y);
    let solved = chol.solve(&sty);
    Ok(sty.dot(&solved) / norm_sq)
}

/// The target recalling the input `l` steps in the past. Entries with k < l
/// address the retained prehistory, never padding.
pub fn recall_target(inputs: &InputSequence, l: usize) -> Result<Vec<f64>> {
    if l > inputs.prehistory() {
        return Err(Error::RecallTooDeep {
            requested: l,
            available: inputs.prehistory(),
        });
    }
    (0..inputs.k_train() as i64)
        .map(|k| inputs.get(k - l as i64))
        .collect()
}

/// Threshold r* with P(chi2_{n_v} > r*) = p_value. A capacity estimated from K
/// cycles is considered spurious below r*/K.
pub fn chi2_threshold(n_v: usize, p_value: f64) -> f64 {
    assert!(n_v >= 1);
    assert!(p_value > 0.0 && p_value < 1.0);
    chi2_quantile(n_v as f64, 1.0 - p_value)
}

/// Capacities of all recalls l = 0..=l_max with a shared factorization.
pub fn memory_capacity(
    s: &StateMatrix,
    inputs: &InputSequence,
    cfg: &RidgeConfig,
    l_max: usize,
    apply_cutoff: bool,
) -> Result<CapacitySpectrum> {
    assert!(l_max >= 1, "need at least recall depths 0 and 1");
    let lambda = cfg.lambda_for(s)?;
    let chol = factorize(gram(s, lambda))?;
    let k = s.k();

    let mut targets = DMatrix::zeros(k, l_max + 1);
    let mut norms = vec![0.0; l_max + 1];
    for l in 0..=l_max {
        let t = recall_target(inputs, l)?;
        norms[l] = t.iter().map(|y| y * y).sum();
        if norms[l] <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        targets.column_mut(l).copy_from_slice(&t);
    }

    let sty = s.entries().tr_mul(&targets);
    let solved = chol.solve(&sty);
    let mut capacities: Vec<f64> = (0..=l_max)
        .map(|l| sty.column(l).dot(&solved.column(l)) / norms[l])
        .collect();

    let cutoff = if apply_cutoff {
        let threshold = chi2_threshold(s.n_v(), CUTOFF_P_VALUE) / k as f64;
        for c in &mut capacities {
            if *c < threshold {
                *c = 0.0;
            }
        }
        threshold
    } else {
        0.0
    };

    let mc_total = capacities.iter().sum();
    Ok(CapacitySpectrum { capacities, cutoff, lambda, mc_total })
}

/// Like `memory_capacity`, starting at `l_start` recalls and extending while
/// the trailing ten capacities still sum above `tail_budget` (and prehistory
/// allows deeper targets).
pub fn memory_capacity_auto(
    s: &StateMatrix,
    inputs: &InputSequence,
    cfg: &RidgeConfig,
    apply_cutoff: bool,
) -> Result<CapacitySpectrum> {
    const L_START: usize = 50;
    const TAIL: usize = 10;
    const TAIL_BUDGET: f64 = 1e-3;
    let mut l_max = L_START.min(inputs.prehistory().max(1));
    loop {
        let spectrum = memory_capacity(s, inputs, cfg, l_max, apply_cutoff)?;
        let tail_sum: f64 = spectrum.capacities.iter().rev().take(TAIL).sum();
        let can_extend = l_max + 25 <= inputs.prehistory();
        if tail_sum <= TAIL_BUDGET || !can_extend {
            if tail_sum > TAIL_BUDGET {
                log::warn!(
                    "capacity tail still sums to {tail_sum:.2e} at l_max = {l_max}; \
                     prehistory exhausted"
                );
            }
            return Ok(spectrum);
        }
        l_max += 25;
    }
}
