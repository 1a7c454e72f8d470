//! Black-box recovery of the linearization (a, b) from the small-signal
//! harmonic response.
//!
//! A stable single-variable delay system driven by I(t) = I0 sin(w t)
//! settles onto a harmonic response whose amplitude, normalized by the input
//! coupling and I0, is the reciprocal of |i w - a - b exp(-i w tau)|. The
//! squared reciprocal gain F(w) measured at the delay-resonant frequency
//! 2 pi / tau and the anti-phase frequency pi / tau fixes (a + b)^2 and
//! (a - b)^2, from which a and b follow in closed form when a < -|b|.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::DdeStepper;
use crate::mmf::Linearization;
use crate::model::ReservoirModel;

/// Harmonic probe settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeConfig {
    /// Probe amplitude at the raw input port.
    pub i0: f64,
    /// Delay-resonant frequency 2 pi / tau.
    pub omega_r: f64,
    /// Anti-phase frequency pi / tau.
    pub omega_a: f64,
    /// Periods discarded before measuring.
    pub settle_periods: usize,
    /// Periods fitted for the steady-state amplitude.
    pub measure_periods: usize,
    /// Integration step (aligned so the delay is an exact number of steps).
    pub dt: f64,
}

impl ProbeConfig {
    /// Default probe for a delay `tau`: resonant and anti-phase frequencies,
    /// and a settle window of max(10, ceil(5 tau / period)) periods.
    pub fn for_delay(tau: f64, i0: f64) -> Self {
        let omega_r = 2.0 * std::f64::consts::PI / tau;
        ProbeConfig {
            i0,
            omega_r,
            omega_a: 0.5 * omega_r,
            settle_periods: Self::settle_rule(tau, omega_r),
            measure_periods: 16,
            dt: 0.01,
        }
    }

    pub fn settle_rule(tau: f64, omega: f64) -> usize {
        let period = 2.0 * std::f64::consts::PI / omega;
        10usize.max((5.0 * tau / period).ceil() as usize)
    }
}

/// One measured point of the reciprocal-gain curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainMeasurement {
    pub omega: f64,
    /// |response| / (|c| I0); the transfer-function magnitude.
    pub amplitude_ratio: f64,
    /// F(omega) = amplitude_ratio^(-2).
    pub f_value: f64,
}

/// Recovered coefficients, with a flag for the undetectable sign alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbEstimate {
    pub a: f64,
    pub b: f64,
    /// True when b is materially nonzero: two-frequency data cannot rule out
    /// the swapped pair (b, a), which arises when the true system has
    /// a - b > 0. The returned values assume a < -|b|.
    pub sign_ambiguous: bool,
}

/// Identified linearization plus any caveats gathered along the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiedLinearization {
    pub linearization: Linearization,
    pub f_resonant: f64,
    pub f_antiphase: f64,
    pub warnings: Vec<String>,
}

/// Drive the system at `omega` and measure the normalized steady-state
/// amplitude. `c_known` is the raw input-port coupling dF/dI (for a model with
/// input strength eta and linearization coupling c this is c / eta).
pub fn measure_gain(
    model: &ReservoirModel,
    probe: &ProbeConfig,
    omega: f64,
    c_known: f64,
) -> Result<GainMeasurement> {
    if c_known == 0.0 {
        return Err(Error::InvalidParameter("input coupling must be nonzero".into()));
    }
    if !(omega > 0.0 && probe.i0 > 0.0) {
        return Err(Error::InvalidParameter("omega and i0 must be positive".into()));
    }
    let s_star = model.equilibrium()?;
    let tau = model.tau();
    let delay_steps = ((tau / probe.dt).round() as usize).max(1);
    let dt = tau / delay_steps as f64;
    let period = 2.0 * std::f64::consts::PI / omega;
    let steps_per_period = (period / dt).ceil() as usize;
    let settle_steps = probe.settle_periods.max(1) * steps_per_period;
    let measure_steps = probe.measure_periods.max(1) * steps_per_period;
    let guard = 1e6 * (1.0 + s_star.abs());

    let f = |s: f64, sd: f64, sig: f64| model.derivative(s, sd, sig);
    let mut stepper = DdeStepper::new(f, s_star, dt, delay_steps, guard);

    // Settle, tracking the peak deviation per period to catch growth.
    let mut first_peak = 0.0_f64;
    let mut last_peak = 0.0_f64;
    for n in 0..settle_steps {
        let t = n as f64 * dt;
        stepper.step(
            probe.i0 * (omega * t).sin(),
            probe.i0 * (omega * (t + 0.5 * dt)).sin(),
            probe.i0 * (omega * (t + dt)).sin(),
        )?;
        let dev = (stepper.state() - s_star).abs();
        if n < steps_per_period {
            first_peak = first_peak.max(dev);
        }
        if n >= settle_steps - steps_per_period {
            last_peak = last_peak.max(dev);
        }
    }
    if last_peak > 2.0 * first_peak && last_peak > 1e-12 * (1.0 + s_star.abs()) {
        return Err(Error::UnstableProbe);
    }

    // Least-squares fit A sin + B cos over the measurement window.
    let (mut ss, mut cc, mut sc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let t0 = settle_steps as f64 * dt;
    for n in 0..measure_steps {
        let t = t0 + n as f64 * dt;
        stepper.step(
            probe.i0 * (omega * t).sin(),
            probe.i0 * (omega * (t + 0.5 * dt)).sin(),
            probe.i0 * (omega * (t + dt)).sin(),
        )?;
        let t1 = t + dt;
        let (sin_t, cos_t) = (omega * t1).sin_cos();
        let y = stepper.state() - s_star;
        ss += sin_t * sin_t;
        cc += cos_t * cos_t;
        sc += sin_t * cos_t;
        ys += y * sin_t;
        yc += y * cos_t;
    }
    let det = ss * cc - sc * sc;
    if det.abs() < 1e-12 {
        return Err(Error::SolverFailure("degenerate harmonic fit".into()));
    }
    let a_fit = (ys * cc - yc * sc) / det;
    let b_fit = (yc * ss - ys * sc) / det;
    let amplitude = (a_fit * a_fit + b_fit * b_fit).sqrt();

    let floor = f64::EPSILON * (1.0 + s_star.abs()) * 100.0;
    if amplitude < floor {
        return Err(Error::AmplitudeBelowFloor(amplitude));
    }
    let amplitude_ratio = amplitude / (c_known.abs() * probe.i0);
    Ok(GainMeasurement {
        omega,
        amplitude_ratio,
        f_value: 1.0 / (amplitude_ratio * amplitude_ratio),
    })
}

/// Closed-form (a, b) from the reciprocal gains at the resonant and
/// anti-phase frequencies.
pub fn recover_ab(f_r: f64, f_a: f64, omega_r: f64, omega_a: f64) -> Result<AbEstimate> {
    let rad_r = checked_radicand(f_r, omega_r, "resonant")?;
    let rad_a = checked_radicand(f_a, omega_a, "anti-phase")?;
    let x = rad_r.sqrt(); // |a + b|
    let y = rad_a.sqrt(); // |a - b|
    let a = -0.5 * (x + y);
    let b = 0.5 * (y - x);
    Ok(AbEstimate {
        a,
        b,
        sign_ambiguous: (y - x).abs() > 1e-12 * (x + y).max(1.0),
    })
}

fn checked_radicand(f: f64, omega: f64, which: &str) -> Result<f64> {
    let rad = f - omega * omega;
    let tol = 1e-9 * f.max(1.0);
    if rad < -tol {
        return Err(Error::InconsistentMeasurement(format!(
            "{which} gain F = {f} lies below omega^2 = {}",
            omega * omega
        )));
    }
    Ok(rad.max(0.0))
}

/// Probe at both frequencies and assemble the linearization; `c_known` is the
/// raw input-port coupling as in `measure_gain`.
pub fn identify(
    model: &ReservoirModel,
    probe: &ProbeConfig,
    c_known: f64,
) -> Result<IdentifiedLinearization> {
    let gain_r = measure_gain(model, probe, probe.omega_r, c_known)?;
    let gain_a = measure_gain(model, probe, probe.omega_a, c_known)?;
    let est = recover_ab(gain_r.f_value, gain_a.f_value, probe.omega_r, probe.omega_a)?;

    let mut warnings = Vec::new();
    if est.sign_ambiguous {
        warnings.push(
            "two-frequency data cannot distinguish (a, b) from (b, a); \
             reported values assume a < -|b|"
                .to_string(),
        );
    }

    // Linearity check: halving the probe amplitude should not move the
    // normalized response.
    let half = ProbeConfig { i0: 0.5 * probe.i0, ..*probe };
    let gain_half = measure_gain(model, &half, probe.omega_r, c_known)?;
    let rel = (gain_half.amplitude_ratio - gain_r.amplitude_ratio).abs()
        / gain_r.amplitude_ratio;
    if rel > 0.01 {
        warnings.push(format!(
            "normalized response moved by {:.2}% when halving the probe amplitude; \
             i0 = {} may be outside the linear regime",
            100.0 * rel,
            probe.i0
        ));
    }

    let eta_scale = model.eta();
    Ok(IdentifiedLinearization {
        linearization: Linearization::new(est.a, est.b, c_known * eta_scale)?,
        f_resonant: gain_r.f_value,
        f_antiphase: gain_a.f_value,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearDdeParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linear_model(a: f64, b: f64, tau: f64) -> ReservoirModel {
        ReservoirModel::Linear(LinearDdeParams { a, b, gain: 1.0, eta: 1.0, tau })
    }

    #[test]
    fn reciprocal_gain_matches_analytic_value() {
        let (a, b, tau) = (-0.503, 0.201, 141.0);
        let model = linear_model(a, b, tau);
        let probe = ProbeConfig::for_delay(tau, 1e-3);
        let gain = measure_gain(&model, &probe, probe.omega_r, 1.0).unwrap();
        let expected = probe.omega_r.powi(2) + (a + b) * (a + b);
        assert_relative_eq!(gain.f_value, expected, max_relative = 1e-3);
    }

    #[test]
    fn delay_free_gain_is_first_order_low_pass() {
        let (a, tau) = (-0.4, 25.0);
        let model = linear_model(a, 0.0, tau);
        let probe = ProbeConfig::for_delay(tau, 1e-3);
        for omega in [probe.omega_r, probe.omega_a, 3.0 * probe.omega_r] {
            let gain = measure_gain(&model, &probe, omega, 1.0).unwrap();
            assert_relative_eq!(gain.f_value, omega * omega + a * a, max_relative = 2e-3);
        }
    }

    #[test]
    fn response_scales_linearly_in_amplitude() {
        let model = linear_model(-0.5, 0.2, 50.0);
        let probe = ProbeConfig::for_delay(50.0, 1e-3);
        let half = ProbeConfig { i0: 0.5e-3, ..probe };
        let g1 = measure_gain(&model, &probe, probe.omega_r, 1.0).unwrap();
        let g2 = measure_gain(&model, &half, probe.omega_r, 1.0).unwrap();
        assert!((g1.amplitude_ratio - g2.amplitude_ratio).abs() / g1.amplitude_ratio < 0.01);
    }

    #[test]
    fn recovery_round_trip_exact() {
        let (a, b) = (-0.503, 0.201);
        let (wr, wa) = (2.0 * std::f64::consts::PI / 141.0, std::f64::consts::PI / 141.0);
        let f_r = wr * wr + (a + b) * (a + b);
        let f_a = wa * wa + (a - b) * (a - b);
        let est = recover_ab(f_r, f_a, wr, wa).unwrap();
        assert_relative_eq!(est.a, a, epsilon = 1e-12);
        assert_relative_eq!(est.b, b, epsilon = 1e-12);
    }

    #[test]
    fn recovery_symmetric_case_gives_zero_b() {
        let a = -0.8;
        let (wr, wa) = (0.3, 0.15);
        let est = recover_ab(wr * wr + a * a, wa * wa + a * a, wr, wa).unwrap();
        assert_relative_eq!(est.a, a, epsilon = 1e-12);
        assert_eq!(est.b, 0.0);
        assert!(!est.sign_ambiguous);
    }

    #[test]
    fn negative_radicand_beyond_tolerance_errors() {
        assert!(recover_ab(0.01, 0.5, 0.2, 0.1).is_err());
    }

    proptest! {
        // Exact inversion of the forward gain map on the region a < -|b|.
        #[test]
        fn forward_then_recover_is_identity(
            a in -2.0f64..-0.011,
            b_frac in -0.99f64..0.99,
            tau in 10.0f64..200.0,
        ) {
            let b = b_frac * (a.abs() - 0.01);
            let wr = 2.0 * std::f64::consts::PI / tau;
            let wa = 0.5 * wr;
            let f_r = wr * wr + (a + b) * (a + b);
            let f_a = wa * wa + (a - b) * (a - b);
            let est = recover_ab(f_r, f_a, wr, wa).unwrap();
            prop_assert!((est.a - a).abs() < 1e-10);
            prop_assert!((est.b - b).abs() < 1e-10);
        }
    }

    #[test]
    fn identify_on_synthetic_linear_system() {
        let (a, b, tau) = (-0.503, 0.201, 141.0);
        let model = linear_model(a, b, tau);
        let probe = ProbeConfig::for_delay(tau, 1e-3);
        let id = identify(&model, &probe, 1.0).unwrap();
        assert!((id.linearization.a - a).abs() < 1e-3, "a = {}", id.linearization.a);
        assert!((id.linearization.b - b).abs() < 1e-3, "b = {}", id.linearization.b);
    }

    #[test]
    fn alternative_frequency_pairs_agree() {
        // Any pair with exp(-i w1 tau) = 1 and exp(-i w2 tau) = -1 works;
        // compare the default pair against doubled multiples.
        let (a, b, tau) = (-0.6, 0.25, 60.0);
        let model = linear_model(a, b, tau);
        let probe = ProbeConfig::for_delay(tau, 1e-4);
        let w1 = 2.0 * probe.omega_r; // still resonant
        let w2 = 3.0 * probe.omega_a; // still anti-phase
        let g1 = measure_gain(&model, &probe, w1, 1.0).unwrap();
        let g2 = measure_gain(&model, &probe, w2, 1.0).unwrap();
        let est_alt = recover_ab(g1.f_value, g2.f_value, w1, w2).unwrap();
        let id = identify(&model, &probe, 1.0).unwrap();
        assert!((est_alt.a - id.linearization.a).abs() < 2e-3);
        assert!((est_alt.b - id.linearization.b).abs() < 2e-3);
    }

    #[test]
    fn unstable_system_is_rejected() {
        let model = linear_model(0.05, 0.0, 20.0);
        let probe = ProbeConfig::for_delay(20.0, 1e-3);
        let res = measure_gain(&model, &probe, probe.omega_r, 1.0);
        assert!(res.is_err());
    }
}
