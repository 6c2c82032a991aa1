//! Experiment configuration, read from TOML.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected.
//!
//! ```toml
//! [scene]
//! phantom = "layered"      # shepp-logan | layered | pipes | cylinder
//! n = 32                   # inversion grid, cells per side
//! synthesis_n = 48         # data grid; defaults to n
//! fmax = 1.0
//!
//! [frequencies]
//! count = 12               # evenly spaced picks from the 47-band schedule
//! # mhz = [10, 100, 1000]  # or an explicit list
//!
//! [noise]
//! rel = 0.1
//! seed = 1
//!
//! [inversion]
//! method = "sf-tau"        # sf-tau | sf-sigma | cisor | rl
//! # tau = 30.0             # defaults to the TV of the true scene
//!
//! [solver]
//! gmres_tol = 1e-8
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use refltomo::demos::{LandscapeConfig, SpectrumConfig};
use refltomo::inversion::{InversionConfig, Method};
use refltomo::krylov::GmresConfig;
use refltomo::proxqn::ProxQnConfig;
use refltomo::scene::resample_nearest;
use refltomo::{default_acquisition, frequency_bands, AcquisitionGeometry, ContrastImage, FrequencySchedule, Phantom};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scene: SceneSection,
    pub acquisition: Option<AcquisitionSection>,
    pub frequencies: FrequencySection,
    pub noise: NoiseSection,
    pub inversion: InversionSection,
    pub solver: SolverSection,
    pub landscape: LandscapeConfig,
    pub spectrum: SpectrumConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub phantom: Phantom,
    pub n: usize,
    pub synthesis_n: Option<usize>,
    pub fmax: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            phantom: Phantom::Layered,
            n: 32,
            synthesis_n: None,
            fmax: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub tx: Vec<[f64; 2]>,
    pub rx: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencySection {
    pub count: Option<usize>,
    pub mhz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub rel: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionSection {
    pub method: Method,
    pub tau: Option<f64>,
    /// Noise level assumed by sf-sigma; defaults to `noise.rel`.
    pub noise_rel: Option<f64>,
    pub i_max: usize,
    pub inner_t_max: usize,
    pub memory: usize,
    pub cisor_i_max: usize,
    pub rl_i_max: usize,
    pub conjugate_polar: bool,
}

impl Default for InversionSection {
    fn default() -> Self {
        let d = InversionConfig::default();
        InversionSection {
            method: Method::SfTau,
            tau: None,
            noise_rel: None,
            i_max: d.qn.i_max,
            inner_t_max: d.qn.inner_t_max,
            memory: d.qn.memory,
            cisor_i_max: d.cisor_i_max,
            rl_i_max: d.rl_i_max,
            conjugate_polar: d.conjugate_polar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let g = GmresConfig::default();
        SolverSection {
            gmres_tol: g.tol,
            gmres_restart: g.restart,
            gmres_max_iter: g.max_iter,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::parse(&text)?;
        Ok((cfg, text))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.scene.n < 8 || self.scene.synthesis_n.is_some_and(|n| n < 8) {
            return bad("grids need at least 8 cells per side".into());
        }
        if !(self.scene.fmax >= 0.0 && self.scene.fmax.is_finite()) {
            return bad(format!("fmax must be finite and nonnegative, got {}", self.scene.fmax));
        }
        if self.frequencies.count.is_some() && self.frequencies.mhz.is_some() {
            return bad("give either frequencies.count or frequencies.mhz, not both".into());
        }
        if !(self.noise.rel >= 0.0 && self.noise.rel.is_finite()) {
            return bad(format!("noise.rel must be nonnegative, got {}", self.noise.rel));
        }
        if let Some(t) = self.inversion.tau {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("inversion.tau must be nonnegative, got {t}"));
            }
        }
        self.schedule()?;
        self.acquisition()?;
        self.inversion_config().validate()?;
        self.landscape.validate()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<FrequencySchedule, CliError> {
        Ok(match (&self.frequencies.mhz, self.frequencies.count) {
            (Some(mhz), _) => FrequencySchedule::from_mhz(mhz)?,
            (None, Some(c)) => frequency_bands().subsample(c)?,
            (None, None) => frequency_bands(),
        })
    }

    pub fn acquisition(&self) -> Result<AcquisitionGeometry, CliError> {
        Ok(match &self.acquisition {
            Some(a) => AcquisitionGeometry::new(a.tx.clone(), a.rx.clone())?,
            None => default_acquisition(),
        })
    }

    pub fn gmres(&self) -> GmresConfig {
        GmresConfig {
            tol: self.solver.gmres_tol,
            restart: self.solver.gmres_restart,
            max_iter: self.solver.gmres_max_iter,
        }
    }

    pub fn inversion_config(&self) -> InversionConfig {
        let s = &self.inversion;
        InversionConfig {
            qn: ProxQnConfig {
                i_max: s.i_max,
                inner_t_max: s.inner_t_max,
                memory: s.memory,
                ..ProxQnConfig::default()
            },
            gmres: self.gmres(),
            cisor_i_max: s.cisor_i_max,
            rl_i_max: s.rl_i_max,
            conjugate_polar: s.conjugate_polar,
        }
    }

    pub fn synthesis_n(&self) -> usize {
        self.scene.synthesis_n.unwrap_or(self.scene.n)
    }

    /// The scene on the inversion grid.
    pub fn truth(&self) -> Result<ContrastImage, CliError> {
        Ok(self.scene.phantom.build(self.scene.n, self.scene.fmax)?)
    }

    /// The scene on the synthesis grid, upsampled by nearest neighbour when
    /// the two grids differ.
    pub fn synthesis_truth(&self) -> Result<ContrastImage, CliError> {
        let truth = self.truth()?;
        let m = self.synthesis_n();
        Ok(if m == self.scene.n {
            truth
        } else {
            resample_nearest(&truth, m)?
        })
    }
}
