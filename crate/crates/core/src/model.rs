//! Single-variable delay reservoirs: ds/dt = F(s, s_tau, I).
//!
//! Each model carries its own input strength `eta` and delay `tau`. The masked
//! drive signal passed to `F` is the full `eta * u * w` product; the
//! linearization input coupling `c` is therefore reported per unit of the
//! unscaled masked product `u * w`, i.e. it absorbs `eta`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mmf::Linearization;

/// Delayed-feedback oscillator with a cubic amplitude nonlinearity:
/// ds/dt = (p_sl + I + gamma_nl s^2) s + kappa s_tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StuartLandauParams {
    pub p_sl: f64,
    pub kappa: f64,
    pub gamma_nl: f64,
    pub eta: f64,
    pub tau: f64,
}

impl StuartLandauParams {
    /// Pick (p_sl, kappa) so the equilibrium linearization equals (a, b).
    pub fn from_linearization(a: f64, b: f64, gamma_nl: f64, eta: f64, tau: f64) -> Self {
        StuartLandauParams {
            p_sl: -(a + 3.0 * b) / 2.0,
            kappa: b,
            gamma_nl,
            eta,
            tau,
        }
    }
}

/// Delayed production with saturating feedback:
/// ds/dt = (p_mg + I) s + alpha s_tau / (1 + s_tau^exponent_p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MackeyGlassParams {
    pub p_mg: f64,
    pub alpha: f64,
    pub exponent_p: f64,
    pub eta: f64,
    pub tau: f64,
}

impl MackeyGlassParams {
    /// Pick (p_mg, alpha) so the equilibrium linearization equals (a, b).
    /// Requires b != 0; uses the unit-exponent equilibrium.
    pub fn from_linearization(a: f64, b: f64, eta: f64, tau: f64) -> Result<Self> {
        if b == 0.0 {
            return Err(Error::InvalidParameter(
                "cannot tune the delayed gain to b = 0".into(),
            ));
        }
        Ok(MackeyGlassParams {
            p_mg: a,
            alpha: a * a / b,
            exponent_p: 1.0,
            eta,
            tau,
        })
    }
}

/// The linear delay rule itself, ds/dt = a s + b s_tau + gain I, operated
/// around the trivial equilibrium. Useful as a reference system and as the
/// "custom" model in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearDdeParams {
    pub a: f64,
    pub b: f64,
    pub gain: f64,
    pub eta: f64,
    pub tau: f64,
}

/// A reservoir dynamical system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReservoirModel {
    StuartLandau(StuartLandauParams),
    MackeyGlass(MackeyGlassParams),
    Linear(LinearDdeParams),
}

impl ReservoirModel {
    /// Right-hand side F(s, s_tau, signal), with `signal` the full masked
    /// drive (eta included).
    #[inline]
    pub fn derivative(&self, s: f64, s_tau: f64, signal: f64) -> f64 {
        match self {
            ReservoirModel::StuartLandau(p) => {
                (p.p_sl + signal + p.gamma_nl * s * s) * s + p.kappa * s_tau
            }
            ReservoirModel::MackeyGlass(p) => {
                (p.p_mg + signal) * s + p.alpha * s_tau / (1.0 + s_tau.powf(p.exponent_p))
            }
            ReservoirModel::Linear(p) => p.a * s + p.b * s_tau + p.gain * signal,
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            ReservoirModel::StuartLandau(p) => p.eta,
            ReservoirModel::MackeyGlass(p) => p.eta,
            ReservoirModel::Linear(p) => p.eta,
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            ReservoirModel::StuartLandau(p) => p.tau,
            ReservoirModel::MackeyGlass(p) => p.tau,
            ReservoirModel::Linear(p) => p.tau,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        match &mut self {
            ReservoirModel::StuartLandau(p) => p.eta = eta,
            ReservoirModel::MackeyGlass(p) => p.eta = eta,
            ReservoirModel::Linear(p) => p.eta = eta,
        }
        self
    }

    /// The nontrivial equilibrium used as operating point.
    ///
    /// Stuart-Landau: the positive root of s^2 = -(p_sl + kappa) / gamma_nl.
    /// Mackey-Glass (exponent 1): s = -(p_mg + alpha) / p_mg.
    /// Linear: zero.
    pub fn equilibrium(&self) -> Result<f64> {
        match self {
            ReservoirModel::StuartLandau(p) => {
                if p.gamma_nl == 0.0 {
                    return Err(Error::NoEquilibrium("gamma_nl must be nonzero".into()));
                }
                let s_sq = -(p.p_sl + p.kappa) / p.gamma_nl;
                if s_sq <= 0.0 {
                    return Err(Error::NoEquilibrium(format!(
                        "-(p_sl + kappa)/gamma_nl = {s_sq} is not positive; \
                         no nontrivial equilibrium exists"
                    )));
                }
                Ok(s_sq.sqrt())
            }
            ReservoirModel::MackeyGlass(p) => {
                if (p.exponent_p - 1.0).abs() > 1e-12 {
                    return Err(Error::NoEquilibrium(
                        "closed-form equilibrium requires exponent_p = 1".into(),
                    ));
                }
                if p.p_mg == 0.0 {
                    return Err(Error::NoEquilibrium("p_mg must be nonzero".into()));
                }
                let s_star = -(p.p_mg + p.alpha) / p.p_mg;
                if (1.0 + s_star).abs() < 1e-12 {
                    return Err(Error::NoEquilibrium(
                        "equilibrium sits on the feedback singularity s = -1".into(),
                    ));
                }
                Ok(s_star)
            }
            ReservoirModel::Linear(_) => Ok(0.0),
        }
    }

    /// Coupling of the raw signal port, dF/dI at the operating point. Equals
    /// `linearize().c / eta`; finite for eta = 0.
    pub fn input_coupling(&self) -> Result<f64> {
        match self {
            ReservoirModel::StuartLandau(_) | ReservoirModel::MackeyGlass(_) => self.equilibrium(),
            ReservoirModel::Linear(p) => Ok(p.gain),
        }
    }

    /// Small-signal coefficients (a, b, c) at the operating point, with c the
    /// coupling per unit of the unscaled masked input u * w.
    pub fn linearize(&self) -> Result<Linearization> {
        match self {
            ReservoirModel::StuartLandau(p) => {
                let s_star = self.equilibrium()?;
                Linearization::new(-2.0 * p.p_sl - 3.0 * p.kappa, p.kappa, p.eta * s_star)
            }
            ReservoirModel::MackeyGlass(p) => {
                let s_star = self.equilibrium()?;
                let denom = (1.0 + s_star) * (1.0 + s_star);
                Linearization::new(p.p_mg, p.alpha / denom, p.eta * s_star)
            }
            ReservoirModel::Linear(p) => Linearization::new(p.a, p.b, p.gain * p.eta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sl(p_sl: f64, kappa: f64, gamma_nl: f64) -> ReservoirModel {
        ReservoirModel::StuartLandau(StuartLandauParams {
            p_sl,
            kappa,
            gamma_nl,
            eta: 1e-3,
            tau: 80.0,
        })
    }

    #[test]
    fn stuart_landau_equilibrium() {
        let m = sl(-0.05, 0.06, -0.1);
        assert_relative_eq!(m.equilibrium().unwrap(), 0.1f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn stuart_landau_equilibrium_requires_opposite_signs() {
        // p_sl + kappa and gamma_nl with the same sign: no real root.
        assert!(sl(-0.05, 0.06, 0.1).equilibrium().is_err());
        assert!(sl(0.05, -0.06, -0.1).equilibrium().is_err());
    }

    #[test]
    fn mackey_glass_equilibrium() {
        let m = ReservoirModel::MackeyGlass(MackeyGlassParams {
            p_mg: -0.08,
            alpha: 0.10667,
            exponent_p: 1.0,
            eta: 1e-3,
            tau: 80.0,
        });
        assert_relative_eq!(m.equilibrium().unwrap(), 0.02667 / 0.08, epsilon = 1e-12);
    }

    #[test]
    fn stuart_landau_linearization_values() {
        let m = sl(-0.05, 0.06, -0.1);
        let lin = m.linearize().unwrap();
        assert_relative_eq!(lin.a, -0.08, epsilon = 1e-15);
        assert_relative_eq!(lin.b, 0.06, epsilon = 1e-15);
        assert_relative_eq!(lin.c, 1e-3 * 0.1f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zero_eta_means_zero_coupling() {
        let m = sl(-0.05, 0.06, -0.1).with_eta(0.0);
        assert_eq!(m.linearize().unwrap().c, 0.0);
    }

    #[test]
    fn mackey_glass_linearization_matches_tuned_target() {
        let p = MackeyGlassParams::from_linearization(-0.08, 0.06, 1e-3, 80.0).unwrap();
        let lin = ReservoirModel::MackeyGlass(p).linearize().unwrap();
        assert_relative_eq!(lin.a, -0.08, epsilon = 1e-12);
        assert_relative_eq!(lin.b, 0.06, epsilon = 1e-12);
    }

    #[test]
    fn mackey_glass_zero_alpha_is_degenerate() {
        let m = ReservoirModel::MackeyGlass(MackeyGlassParams {
            p_mg: -0.08,
            alpha: 0.0,
            exponent_p: 1.0,
            eta: 1e-3,
            tau: 80.0,
        });
        assert!(m.equilibrium().is_err());
    }

    #[test]
    fn stuart_landau_tuned_roundtrip() {
        let p = StuartLandauParams::from_linearization(-0.503, 0.201, -0.1, 1e-3, 141.0);
        let lin = ReservoirModel::StuartLandau(p).linearize().unwrap();
        assert_relative_eq!(lin.a, -0.503, epsilon = 1e-12);
        assert_relative_eq!(lin.b, 0.201, epsilon = 1e-12);
    }

    proptest! {
        // The two expressions for the self-coefficient agree whenever the
        // equilibrium exists: -2 p_sl - 3 kappa == p_sl + 3 gamma (s*)^2.
        #[test]
        fn self_coefficient_identity(p_sl in -0.5f64..0.5, kappa in -0.5f64..0.5, gamma in 0.01f64..1.0) {
            let gamma_nl = if p_sl + kappa > 0.0 { -gamma } else { gamma };
            let m = sl(p_sl, kappa, gamma_nl);
            if let Ok(s_star) = m.equilibrium() {
                let direct = -2.0 * p_sl - 3.0 * kappa;
                let via_equilibrium = p_sl + 3.0 * gamma_nl * s_star * s_star;
                prop_assert!((direct - via_equilibrium).abs() <= 1e-14f64.max(1e-12 * direct.abs()));
            }
        }
    }
}
