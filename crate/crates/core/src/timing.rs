//! Clock-cycle and virtual-node timing.

use serde::Serialize;

use crate::error::{Error, Result};

/// Timing of the time-multiplexed reservoir: clock cycle `T`, `n_v` virtual
/// nodes of spacing `theta = T / n_v`, and a delay `tau = nu * theta` with
/// integer `nu`.
///
/// A requested delay that is not an integer multiple of `theta` is rounded to
/// the nearest node boundary (with a warning); the stored `tau` is always the
/// rounded value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingConfig {
    t: f64,
    n_v: usize,
    theta: f64,
    tau: f64,
    nu: usize,
    tau_rounded: bool,
}

impl TimingConfig {
    pub fn new(t: f64, n_v: usize, tau: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("clock cycle T must be positive, got {t}")));
        }
        if n_v == 0 {
            return Err(Error::InvalidParameter("need at least one virtual node".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("delay tau must be positive, got {tau}")));
        }
        let theta = t / n_v as f64;
        let ratio = tau / theta;
        let nu = ratio.round().max(1.0);
        let tau_rounded = (ratio - nu).abs() > 1e-9 * ratio.max(1.0);
        if tau_rounded {
            log::warn!(
                "delay tau = {tau} is not an integer multiple of theta = {theta}; \
                 rounding nu from {ratio:.4} to {nu} (tau -> {})",
                nu * theta
            );
        }
        Ok(TimingConfig {
            t,
            n_v,
            theta,
            tau: nu * theta,
            nu: nu as usize,
            tau_rounded,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The effective delay, always an exact multiple of `theta`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Delay in units of the node spacing.
    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn tau_was_rounded(&self) -> bool {
        self.tau_rounded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_delay_not_rounded() {
        let tc = TimingConfig::new(80.0, 160, 80.0).unwrap();
        assert_eq!(tc.theta(), 0.5);
        assert_eq!(tc.nu(), 160);
        assert!(!tc.tau_was_rounded());
    }

    #[test]
    fn fractional_delay_rounds_to_node_boundary() {
        // tau = 3.06 T with theta = 0.5 gives nu = 489.6 -> 490.
        let tc = TimingConfig::new(80.0, 160, 3.06 * 80.0).unwrap();
        assert_eq!(tc.nu(), 490);
        assert!(tc.tau_was_rounded());
        assert_eq!(tc.tau(), 245.0);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(TimingConfig::new(0.0, 10, 1.0).is_err());
        assert!(TimingConfig::new(1.0, 0, 1.0).is_err());
        assert!(TimingConfig::new(1.0, 10, -1.0).is_err());
    }
}
