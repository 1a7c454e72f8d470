//! Analytic prediction of the linear memory capacity from the reservoir
//! linearization.
//!
//! Around a stable equilibrium the delay rule reduces to a coupled map on the
//! node grid: each node value is `p` times its left neighbor plus `m` times
//! the node one delay back plus `gamma_c` times the masked input of its
//! interval, with `p = exp(a theta)`, `m = -(b/a)(1 - p)` and
//! `gamma_c = -(c/a)(1 - p)`. Unrolling the map expands every node reading
//! into a binomially weighted sum over paths through the two couplings; the
//! weight of a path taking `i` left steps and `k` delay steps is
//! `C(i + k, i) p^i m^k`. Grouping those contributions by the recall depth of
//! the input they touch yields the modified state matrix: an (l_max + 1) x N_V
//! matrix whose row l spans the statistical direction of the l-step recall
//! and which reproduces the covariance of the simulated state matrix without
//! ever integrating the system or drawing an input sequence.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::input::Mask;
use crate::readout::CapacitySpectrum;

/// Small-signal coefficients of a single-variable delay rule:
/// d(ds)/dt = a ds + b ds_tau + c I.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Linearization {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Linearization {
    /// Requires a != 0; warns when a + b >= 0, where the equilibrium cannot be
    /// stable and the analytic expansion diverges.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if a == 0.0 {
            return Err(Error::InvalidParameter(
                "self-coefficient a must be nonzero".into(),
            ));
        }
        if a + b >= 0.0 {
            log::warn!("a + b = {} is not negative; operating point is unstable", a + b);
        }
        Ok(Linearization { a, b, c })
    }
}

/// Discrete-map constants derived from a linearization and the node timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapCoefficients {
    pub p: f64,
    pub m: f64,
    pub gamma_c: f64,
    pub nu: usize,
    pub n_v: usize,
}

impl MapCoefficients {
    pub fn new(lin: &Linearization, theta: f64, nu: usize, n_v: usize) -> Result<Self> {
        if lin.a == 0.0 {
            return Err(Error::InvalidParameter("a must be nonzero".into()));
        }
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        if nu == 0 || n_v == 0 {
            return Err(Error::InvalidParameter("nu and n_v must be positive".into()));
        }
        let p = (lin.a * theta).exp();
        let m = -(lin.b / lin.a) * (1.0 - p);
        let gamma_c = -(lin.c / lin.a) * (1.0 - p);
        if p + m >= 1.0 {
            log::warn!(
                "map gain p + m = {} is not below one (a + b >= 0); expansion will diverge",
                p + m
            );
        }
        Ok(MapCoefficients { p, m, gamma_c, nu, n_v })
    }
}

/// One path-weight of the expansion: C(k + i, i) p^i m^k. Computed with
/// interleaved multiplicative updates, never through factorials.
pub fn binomial_term(i: usize, k: usize, coeffs: &MapCoefficients) -> f64 {
    let mut acc = 1.0;
    for j in 1..=i {
        acc *= coeffs.p * (k + j) as f64 / j as f64;
    }
    if k > 0 {
        acc *= coeffs.m.powi(k as i32);
    }
    acc
}

/// The analytically constructed recall-direction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedStateMatrix {
    entries: DMatrix<f64>,
    epsilon: f64,
    rows_converged: bool,
    triangle_rows: usize,
}

impl ModifiedStateMatrix {
    /// Rows are recall depths 0..=l_max, columns are virtual nodes.
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn l_max(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn n_v(&self) -> usize {
        self.entries.ncols()
    }

    /// Truncation threshold that stopped the expansion.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// False only when the expansion was cut by the row cap instead of the
    /// threshold; successful builds always report true.
    pub fn rows_converged(&self) -> bool {
        self.rows_converged
    }

    /// Number of triangle rows accumulated.
    pub fn triangle_rows(&self) -> usize {
        self.triangle_rows
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV rows `l,n,value`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "l,n,value").map_err(|e| Error::Config(format!("write failed: {e}")))?;
        for l in 0..self.entries.nrows() {
            for n in 0..self.entries.ncols() {
                writeln!(w, "{},{},{:.17e}", l, n, self.entries[(l, n)])
                    .map_err(|e| Error::Config(format!("write failed: {e}")))?;
            }
        }
        Ok(())
    }
}

enum EpsilonRule {
    Fixed(f64),
    /// Factor times the running largest absolute accumulated entry.
    RelativeToRunningMax(f64),
}

/// Hard cap on triangle rows before declaring divergence.
pub const MAX_TRIANGLE_ROWS: usize = 100_000;
const TERM_OVERFLOW: f64 = 1e12;

/// Build the modified state matrix with a fixed absolute truncation threshold
/// on the path weights: the expansion stops at the first triangle row whose
/// weights all fall below `epsilon`.
pub fn modified_state_matrix(
    coeffs: &MapCoefficients,
    mask: &Mask,
    l_max: usize,
    epsilon: f64,
) -> Result<ModifiedStateMatrix> {
    build(coeffs, mask, l_max, EpsilonRule::Fixed(epsilon))
}

/// Build with the default adaptive threshold, 1e-6 times the running largest
/// accumulated entry, recomputed as the expansion grows.
pub fn modified_state_matrix_auto(
    coeffs: &MapCoefficients,
    mask: &Mask,
    l_max: usize,
) -> Result<ModifiedStateMatrix> {
    build(coeffs, mask, l_max, EpsilonRule::RelativeToRunningMax(1e-6))
}

fn build(
    coeffs: &MapCoefficients,
    mask: &Mask,
    l_max: usize,
    rule: EpsilonRule,
) -> Result<ModifiedStateMatrix> {
    if mask.len() != coeffs.n_v {
        return Err(Error::InvalidParameter(format!(
            "mask has {} weights, expected {}",
            mask.len(),
            coeffs.n_v
        )));
    }
    if l_max == 0 {
        return Err(Error::InvalidParameter("l_max must be at least 1".into()));
    }
    if !match rule {
        EpsilonRule::Fixed(e) => e > 0.0,
        EpsilonRule::RelativeToRunningMax(f) => f > 0.0,
    } {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }

    let n_v = coeffs.n_v;
    let nu = coeffs.nu as i64;
    let n_v_i = n_v as i64;
    let l_max_i = l_max as i64;
    let weights = mask.weights();
    let (p, m) = (coeffs.p, coeffs.m);

    // Every weight of triangle row q reaches at least lag q, so rows at or
    // beyond this bound touch only recalls deeper than l_max and the kept rows
    // are exact once it is passed.
    let exact_rows = (l_max + 1) * n_v;

    let mut acc = DMatrix::zeros(l_max + 1, n_v);
    let mut running_max = 0.0_f64;
    let mut terms: Vec<f64> = vec![1.0];
    let mut next_terms: Vec<f64> = Vec::new();
    let mut q = 0usize;
    let mut effective_epsilon;

    loop {
        let row_peak = terms.iter().fold(0.0_f64, |mx, t| mx.max(t.abs()));
        effective_epsilon = match rule {
            EpsilonRule::Fixed(e) => e,
            EpsilonRule::RelativeToRunningMax(f) => f * running_max,
        };
        if row_peak < effective_epsilon {
            break; // converged before scattering this row
        }
        if q >= exact_rows {
            break; // all remaining contributions land beyond l_max
        }
        if q >= MAX_TRIANGLE_ROWS || row_peak > TERM_OVERFLOW {
            return Err(Error::TriangleDiverged { rows: q });
        }

        for (i, &t) in terms.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let k = q - i;
            let lag_base = i as i64 + k as i64 * nu; // i + k nu
            // Smallest recall this weight can land in over all nodes.
            if lag_base - (n_v_i - 1) > l_max_i * n_v_i {
                continue;
            }
            for (n, col) in (0..n_v).map(|n| (n as i64, n)) {
                let d = lag_base - n;
                let l = if d <= 0 { 0 } else { (d + n_v_i - 1) / n_v_i };
                if l > l_max_i {
                    continue;
                }
                let w = weights[(-d).rem_euclid(n_v_i) as usize];
                let entry: &mut f64 = &mut acc[(l as usize, col)];
                *entry += t * w;
                let a = entry.abs();
                if a > running_max {
                    running_max = a;
                }
            }
        }

        // Next triangle row via t(i, k) = p t(i-1, k) + m t(i, k-1).
        next_terms.clear();
        next_terms.resize(q + 2, 0.0);
        for (i, &t) in terms.iter().enumerate() {
            next_terms[i] += m * t;
            next_terms[i + 1] += p * t;
        }
        std::mem::swap(&mut terms, &mut next_terms);
        q += 1;
    }

    let scale = coeffs.gamma_c / 3f64.sqrt();
    acc.scale_mut(scale);
    Ok(ModifiedStateMatrix {
        entries: acc,
        epsilon: effective_epsilon,
        rows_converged: true,
        triangle_rows: q,
    })
}

/// Regularization mirroring the simulation-side rule, `factor` times the
/// largest state response, as it acts on the per-cycle-normalized Gram.
///
/// The simulated Gram grows linearly with the cycle count while its
/// regularization is pinned to the largest single response, so the effective
/// floor the capacities see is `factor * max|S| / K`. The analytic matrix
/// carries the per-node standard deviations as its column norms; the expected
/// largest response over `K * N_V` near-Gaussian readings is the largest
/// column norm times sqrt(2 ln(K N_V)). Without the 1/K the analytic
/// capacities lag the simulated ones by several percent of the total at
/// typical scales.
pub fn mmf_lambda(s_tilde: &ModifiedStateMatrix, factor: f64, k_cycles: usize) -> Result<f64> {
    if k_cycles == 0 {
        return Err(Error::InvalidParameter("cycle count must be positive".into()));
    }
    let sigma_max = (0..s_tilde.n_v())
        .map(|n| s_tilde.entries().column(n).norm())
        .fold(0.0_f64, f64::max);
    let samples = (k_cycles * s_tilde.n_v()) as f64;
    let expected_peak = sigma_max * (2.0 * samples.ln()).sqrt();
    let lambda = factor * expected_peak / k_cycles as f64;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(
            "regularization must be positive (zero modified state matrix?)".into(),
        ));
    }
    Ok(lambda)
}

/// The shared factorization behind both capacity routes. Working on the
/// matrix itself rather than on its Gram keeps directions near the
/// regularization floor at full precision.
fn thin_svd(s_tilde: &ModifiedStateMatrix) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let svd = nalgebra::SVD::try_new(s_tilde.entries().clone(), true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::SolverFailure("singular value decomposition did not converge".into()))?;
    Ok(svd)
}

/// Total linear memory capacity from the modified state matrix alone: the
/// trace of the regularized projection onto its row space, a function of the
/// singular values only.
pub fn mmf_memory_capacity(s_tilde: &ModifiedStateMatrix, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let svd = thin_svd(s_tilde)?;
    Ok(svd
        .singular_values
        .iter()
        .map(|&s| s * s / (s * s + lambda))
        .sum())
}

/// Per-recall capacities from the modified state matrix: row l's loadings on
/// the singular directions, attenuated by the regularization.
pub fn mmf_capacity_spectrum(
    s_tilde: &ModifiedStateMatrix,
    lambda: f64,
) -> Result<CapacitySpectrum> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let svd = thin_svd(s_tilde)?;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let rows = s_tilde.entries().nrows();
    let mut capacities = vec![0.0; rows];
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let weight = s * s / (s * s + lambda);
        for (l, c) in capacities.iter_mut().enumerate() {
            let load = u[(l, j)];
            *c += weight * load * load;
        }
    }
    let mc_total = capacities.iter().sum();
    Ok(CapacitySpectrum { capacities, cutoff: 0.0, lambda, mc_total })
}
