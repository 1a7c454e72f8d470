//! TOML run configuration: a `[model]` section, a `[timing]` section and a
//! `[sim]` section.
//!
//! ```toml
//! [model]
//! type = "stuart_landau"   # or "mackey_glass" / "custom"
//! p_sl = -0.05
//! kappa = 0.06
//! gamma_nl = -0.1
//! eta = 1e-3
//!
//! [timing]
//! T = 80.0
//! N_V = 160
//! tau = 80.0
//!
//! [sim]
//! dt = 0.01
//! buffer_inputs = 10000
//! K = 20000
//! input_seed = 1
//! mask_seed = 2
//! ```
//!
//! The delay lives in `[timing]`; a `tau` in `[model]` is accepted but must
//! agree. The quiet transient before the buffer defaults to 50 tau.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearDdeParams, MackeyGlassParams, ReservoirModel, StuartLandauParams};
use crate::timing::TimingConfig;

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct FileConfig {
    pub model: ModelSection,
    pub timing: TimingSection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSection {
    StuartLandau {
        p_sl: f64,
        kappa: f64,
        gamma_nl: f64,
        eta: f64,
        tau: Option<f64>,
    },
    MackeyGlass {
        p_mg: f64,
        alpha: f64,
        #[serde(default = "default_exponent")]
        exponent_p: f64,
        eta: f64,
        tau: Option<f64>,
    },
    Custom {
        a: f64,
        b: f64,
        gain: f64,
        eta: f64,
        tau: Option<f64>,
    },
}

fn default_exponent() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct TimingSection {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N_V")]
    pub n_v: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_buffer")]
    pub buffer_inputs: usize,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub input_seed: u64,
    #[serde(default = "default_mask_seed")]
    pub mask_seed: u64,
    /// Quiet relaxation before the buffer phase; defaults to 50 tau.
    pub transient_time: Option<f64>,
}

fn default_dt() -> f64 {
    0.01
}
fn default_buffer() -> usize {
    10_000
}
fn default_k() -> usize {
    20_000
}
fn default_mask_seed() -> u64 {
    1
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: default_dt(),
            buffer_inputs: default_buffer(),
            k: default_k(),
            input_seed: 0,
            mask_seed: default_mask_seed(),
            transient_time: None,
        }
    }
}

/// A parsed and validated run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub model: ReservoirModel,
    pub timing: TimingConfig,
    pub sim: SimSection,
}

impl ResolvedConfig {
    pub fn transient_time(&self) -> f64 {
        self.sim.transient_time.unwrap_or(50.0 * self.timing.tau())
    }
}

pub fn parse_config(text: &str) -> Result<ResolvedConfig> {
    let file: FileConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
    resolve(file)
}

pub fn load_config(path: &std::path::Path) -> Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn resolve(file: FileConfig) -> Result<ResolvedConfig> {
    let timing = TimingConfig::new(file.timing.t, file.timing.n_v, file.timing.tau)?;
    let tau = timing.tau();

    let check_tau = |model_tau: Option<f64>| -> Result<()> {
        if let Some(mt) = model_tau {
            if (mt - file.timing.tau).abs() > 1e-9 * file.timing.tau.max(1.0) {
                return Err(Error::Config(format!(
                    "model tau = {mt} disagrees with timing tau = {}",
                    file.timing.tau
                )));
            }
        }
        Ok(())
    };

    let model = match file.model {
        ModelSection::StuartLandau { p_sl, kappa, gamma_nl, eta, tau: mt } => {
            check_tau(mt)?;
            ReservoirModel::StuartLandau(StuartLandauParams { p_sl, kappa, gamma_nl, eta, tau })
        }
        ModelSection::MackeyGlass { p_mg, alpha, exponent_p, eta, tau: mt } => {
            check_tau(mt)?;
            ReservoirModel::MackeyGlass(MackeyGlassParams { p_mg, alpha, exponent_p, eta, tau })
        }
        ModelSection::Custom { a, b, gain, eta, tau: mt } => {
            check_tau(mt)?;
            ReservoirModel::Linear(LinearDdeParams { a, b, gain, eta, tau })
        }
    };
    if !(model.eta() >= 0.0) {
        return Err(Error::Config("eta must be nonnegative".into()));
    }

    // Surface impossible operating points at load time.
    model.equilibrium().map_err(|e| Error::Config(e.to_string()))?;

    Ok(ResolvedConfig { model, timing, sim: file.sim })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SL: &str = r#"
        [model]
        type = "stuart_landau"
        p_sl = -0.05
        kappa = 0.06
        gamma_nl = -0.1
        eta = 1e-3

        [timing]
        T = 80.0
        N_V = 160
        tau = 80.0

        [sim]
        K = 500
        buffer_inputs = 100
        input_seed = 7
        mask_seed = 8
    "#;

    #[test]
    fn parses_stuart_landau() {
        let cfg = parse_config(SL).unwrap();
        assert_eq!(cfg.timing.n_v(), 160);
        assert_eq!(cfg.sim.k, 500);
        assert!(matches!(cfg.model, ReservoirModel::StuartLandau(_)));
        assert_eq!(cfg.transient_time(), 50.0 * 80.0);
    }

    #[test]
    fn rejects_contradictory_tau() {
        let text = SL.replace("gamma_nl = -0.1", "gamma_nl = -0.1\ntau = 79.0");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_impossible_equilibrium() {
        let text = SL.replace("gamma_nl = -0.1", "gamma_nl = 0.1");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn custom_model_parses() {
        let text = r#"
            [model]
            type = "custom"
            a = -0.503
            b = 0.201
            gain = 1.0
            eta = 1e-3

            [timing]
            T = 100.0
            N_V = 100
            tau = 141.0
        "#;
        let cfg = parse_config(text).unwrap();
        assert!(matches!(cfg.model, ReservoirModel::Linear(_)));
        assert_eq!(cfg.sim.buffer_inputs, 10_000);
    }
}
