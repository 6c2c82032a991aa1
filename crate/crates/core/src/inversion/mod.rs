//! Inversion workflows over a frequency schedule.
//!
//! * SF-tau: stage `k` minimizes the misfit over frequencies `0..=k` with a
//!   fixed TV budget, warm-started from stage `k - 1`.
//! * SF-sigma: as SF-tau, with the budget updated before every stage by a
//!   Newton step toward the noise level.
//! * CISOR: one solve over all frequencies.
//! * RL: one solve per frequency, each on that frequency alone.

mod metrics;
mod tau;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use metrics::{metric_dr, metric_snr, SNR_CAP_DB};
pub use tau::{polar_argument, tau_update, LinearizedMisfit, TauUpdate, TvConstraintState};

use crate::error::{Error, Result};
use crate::forward::ScatteredData;
use crate::greens::ForwardModel;
use crate::krylov::GmresConfig;
use crate::objective::BatchMisfit;
use crate::proxqn::{prox_qn_solve, ProxQnConfig, StopReason, Trace};
use crate::proxtv::TvOperator;
use crate::scene::ContrastImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SfTau,
    SfSigma,
    Cisor,
    Rl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SfTau => "sf-tau",
            Method::SfSigma => "sf-sigma",
            Method::Cisor => "cisor",
            Method::Rl => "rl",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sf-tau" => Ok(Method::SfTau),
            "sf-sigma" => Ok(Method::SfSigma),
            "cisor" => Ok(Method::Cisor),
            "rl" => Ok(Method::Rl),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    /// Settings of every stage; `qn.i_max` caps the SF stages.
    pub qn: ProxQnConfig,
    pub gmres: GmresConfig,
    pub cisor_i_max: usize,
    /// Cap per frequency in RL.
    pub rl_i_max: usize,
    /// Conjugate the total field in the budget update's back-projection.
    pub conjugate_polar: bool,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            qn: ProxQnConfig::default(),
            gmres: GmresConfig::default(),
            cisor_i_max: 5000,
            rl_i_max: 500,
            conjugate_polar: true,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        self.qn.validate()?;
        self.gmres.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub freq_indices: Vec<usize>,
    pub tau: f64,
    /// Noise bound and incoming residual norm (SF-sigma only).
    pub sigma: Option<f64>,
    pub residual_norm: Option<f64>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    /// Normalized misfit over the stage batch at the stage output.
    pub misfit: f64,
    /// Solver failure that ended the stage; the previous iterate was kept.
    pub error: Option<String>,
    pub seconds: f64,
    pub trace: Trace,
    #[serde(skip)]
    pub image: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub method: Method,
    pub image: ContrastImage,
    pub stages: Vec<StageReport>,
    pub tau_final: f64,
    pub dr: f64,
    pub snr_db: Option<f64>,
    pub wall_seconds: f64,
}

impl InversionReport {
    /// Fills in the SNR against a reference image.
    pub fn attach_truth(&mut self, f_true: &[f64]) -> Result<f64> {
        let snr = metric_snr(&self.image.values, f_true)?;
        self.snr_db = Some(snr);
        Ok(snr)
    }

    pub fn tau_schedule(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.tau).collect()
    }
}

struct Runner<'a> {
    model: &'a ForwardModel,
    data: &'a ScatteredData,
    cfg: &'a InversionConfig,
    op: TvOperator,
    f: Vec<f64>,
    stages: Vec<StageReport>,
}

impl<'a> Runner<'a> {
    fn new(model: &'a ForwardModel, data: &'a ScatteredData, cfg: &'a InversionConfig) -> Result<Self> {
        cfg.validate()?;
        data.check_compatible(model)?;
        Ok(Runner {
            model,
            data,
            cfg,
            op: TvOperator::new(model.grid),
            f: vec![0.0; model.grid.len()],
            stages: Vec::new(),
        })
    }

    fn stage(&mut self, batch: Vec<usize>, tau: f64, i_max: usize, sigma: Option<(f64, f64)>) -> Result<()> {
        let start = Instant::now();
        let qn = ProxQnConfig { i_max, ..self.cfg.qn };
        let mut obj = BatchMisfit::new(self.model, self.data, batch.clone(), self.cfg.gmres)?;
        let mut report = StageReport {
            stage: self.stages.len(),
            freq_indices: batch,
            tau,
            sigma: sigma.map(|s| s.0),
            residual_norm: sigma.map(|s| s.1),
            iterations: 0,
            stop: None,
            misfit: f64::NAN,
            error: None,
            seconds: 0.0,
            trace: Trace::default(),
            image: Vec::new(),
        };
        match prox_qn_solve(&mut obj, &self.op, &self.f, tau, &qn) {
            Ok(out) => {
                report.iterations = out.iterations;
                report.stop = Some(out.stop);
                report.misfit = out.misfit;
                report.trace = out.trace;
                self.f = out.f;
            }
            Err(e) if e.is_solver_failure() => {
                report.error = Some(e.to_string());
                // keep the previous iterate, projected onto this stage's budget
                self.f = crate::proxtv::prox_nn_tv(&self.op, &self.f, tau, 1.0, &self.cfg.qn.prox)?.f;
                report.misfit = crate::objective::SmoothObjective::value(&mut obj, &self.f).unwrap_or(f64::NAN);
            }
            Err(e) => return Err(e),
        }
        report.image = self.f.clone();
        report.seconds = start.elapsed().as_secs_f64();
        self.stages.push(report);
        Ok(())
    }

    fn finish(self, method: Method, tau_final: f64, start: Instant) -> Result<InversionReport> {
        let dr = metric_dr(&self.f, self.data, self.model, &self.cfg.gmres)?;
        Ok(InversionReport {
            method,
            image: ContrastImage::new(self.model.grid, self.f)?,
            stages: self.stages,
            tau_final,
            dr,
            snr_db: None,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

fn check_tau(tau: f64) -> Result<()> {
    TvConstraintState::new(tau).map(|_| ())
}

/// Sequential inversion with a fixed TV budget, from `f = 0`.
pub fn sf_tau(model: &ForwardModel, data: &ScatteredData, tau: f64, cfg: &InversionConfig) -> Result<InversionReport> {
    check_tau(tau)?;
    let start = Instant::now();
    let mut run = Runner::new(model, data, cfg)?;
    for k in 0..model.n_freq() {
        run.stage((0..=k).collect(), tau, cfg.qn.i_max, None)?;
    }
    run.finish(Method::SfTau, tau, start)
}

/// Sequential inversion with the budget estimated from the relative noise
/// level. Stage 0 uses `tau = 0`; before stage `k` the budget takes one
/// Newton step toward `||r|| = noise_rel ||Y_{0..=k}||`.
pub fn sf_sigma(model: &ForwardModel, data: &ScatteredData, noise_rel: f64, cfg: &InversionConfig) -> Result<InversionReport> {
    if !(noise_rel >= 0.0 && noise_rel.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level must be nonnegative, got {noise_rel}")));
    }
    let start = Instant::now();
    let mut run = Runner::new(model, data, cfg)?;
    let mut state = TvConstraintState::new(0.0)?;
    run.stage(vec![0], 0.0, cfg.qn.i_max, None)?;
    for k in 1..model.n_freq() {
        let batch: Vec<usize> = (0..=k).collect();
        let sigma = noise_rel * data.batch_norm_sqr(&batch).sqrt();
        let mut obj = BatchMisfit::new(model, data, batch.clone(), cfg.gmres)?;
        let (res, fields) = obj.residuals(&run.f)?;
        let up = match tau_update(&state, &res, &fields, model, sigma, cfg.conjugate_polar) {
            Ok(up) => up,
            // a zero polar means the residual is invisible to the budget; keep it
            Err(Error::Degenerate(_)) => TauUpdate {
                tau: state.tau,
                residual_norm: res.norm(),
                sigma,
                polar: 0.0,
            },
            Err(e) => return Err(e),
        };
        state = TvConstraintState {
            tau: up.tau,
            sigma,
            stage: k,
        };
        run.stage(batch, state.tau, cfg.qn.i_max, Some((sigma, up.residual_norm)))?;
    }
    run.finish(Method::SfSigma, state.tau, start)
}

/// All frequencies at once, from `f = 0`.
pub fn cisor(model: &ForwardModel, data: &ScatteredData, tau: f64, cfg: &InversionConfig) -> Result<InversionReport> {
    check_tau(tau)?;
    let start = Instant::now();
    let mut run = Runner::new(model, data, cfg)?;
    run.stage((0..model.n_freq()).collect(), tau, cfg.cisor_i_max, None)?;
    run.finish(Method::Cisor, tau, start)
}

/// One frequency at a time, low to high, each warm-started from the last.
pub fn rl(model: &ForwardModel, data: &ScatteredData, tau: f64, cfg: &InversionConfig) -> Result<InversionReport> {
    check_tau(tau)?;
    let start = Instant::now();
    let mut run = Runner::new(model, data, cfg)?;
    for j in 0..model.n_freq() {
        run.stage(vec![j], tau, cfg.rl_i_max, None)?;
    }
    run.finish(Method::Rl, tau, start)
}

/// Dispatches on `method`; `budget` is the TV budget, or the relative noise
/// level for [`Method::SfSigma`].
pub fn invert(method: Method, model: &ForwardModel, data: &ScatteredData, budget: f64, cfg: &InversionConfig) -> Result<InversionReport> {
    match method {
        Method::SfTau => sf_tau(model, data, budget, cfg),
        Method::SfSigma => sf_sigma(model, data, budget, cfg),
        Method::Cisor => cisor(model, data, budget, cfg),
        Method::Rl => rl(model, data, budget, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::simulate;
    use crate::scene::{cylinder_scene_on, default_acquisition, layered_phantom, FrequencySchedule};

    fn problem(n: usize, mhz: &[f64], fmax: f64) -> (ForwardModel, ScatteredData, ContrastImage) {
        let truth = layered_phantom(n, fmax).unwrap();
        let sched = FrequencySchedule::from_mhz(mhz).unwrap();
        let model = ForwardModel::with_unit_sources(truth.grid, default_acquisition(), sched).unwrap();
        let (data, _) = simulate(&model, &truth, &GmresConfig::with_tol(1e-10)).unwrap();
        (model, data, truth)
    }

    fn quick() -> InversionConfig {
        InversionConfig {
            qn: ProxQnConfig { i_max: 30, ..Default::default() },
            cisor_i_max: 30,
            rl_i_max: 30,
            ..Default::default()
        }
    }

    fn feasible(op: &TvOperator, f: &[f64], tau: f64) -> bool {
        op.tv(f) <= tau * (1.0 + 1e-6) + 1e-12 && f.iter().all(|&v| v >= -1e-10)
    }

    #[test]
    fn zero_budget_gives_constant() {
        let (model, data, _) = problem(8, &[200.0, 400.0], 0.5);
        let rep = sf_tau(&model, &data, 0.0, &quick()).unwrap();
        let v = &rep.image.values;
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-9));
        assert!(v[0] >= 0.0);
    }

    #[test]
    fn single_frequency_workflows_agree() {
        let (model, data, truth) = problem(8, &[300.0], 0.5);
        let tau = TvOperator::new(model.grid).tv(&truth.values);
        let cfg = quick();
        let a = sf_tau(&model, &data, tau, &cfg).unwrap();
        let b = cisor(&model, &data, tau, &cfg).unwrap();
        let c = rl(&model, &data, tau, &cfg).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(b.image, c.image);
    }

    #[test]
    fn workflows_feasible_and_metrics_consistent() {
        let (model, data, truth) = problem(8, &[100.0, 300.0, 600.0], 0.5);
        let op = TvOperator::new(model.grid);
        let tau = op.tv(&truth.values);
        let cfg = quick();
        for method in [Method::SfTau, Method::Cisor, Method::Rl, Method::SfSigma] {
            let budget = if method == Method::SfSigma { 0.0 } else { tau };
            let mut rep = invert(method, &model, &data, budget, &cfg).unwrap();
            assert!(feasible(&op, &rep.image.values, rep.tau_final), "{method:?}");
            for s in &rep.stages {
                assert!(feasible(&op, &s.image, s.tau));
                for w in s.trace.rows.windows(2) {
                    assert!(w[1].misfit <= w[0].misfit);
                }
            }
            let dr = metric_dr(&rep.image.values, &data, &model, &cfg.gmres).unwrap();
            assert_eq!(dr, rep.dr);
            let snr = rep.attach_truth(&truth.values).unwrap();
            assert_eq!(snr, metric_snr(&rep.image.values, &truth.values).unwrap());
        }
    }

    #[test]
    fn sf_sigma_budget_nonnegative_and_homogeneous_start() {
        let (model, data, _) = problem(8, &[100.0, 300.0, 600.0], 0.5);
        let rep = sf_sigma(&model, &data, 0.05, &quick()).unwrap();
        assert_eq!(rep.stages[0].tau, 0.0);
        let first = &rep.stages[0].image;
        assert!(first.iter().all(|x| (x - first[0]).abs() < 1e-9));
        assert!(rep.tau_schedule().iter().all(|t| t.is_finite() && *t >= 0.0));
        for w in rep.stages[1..].windows(2) {
            assert!(w[1].sigma.unwrap() >= w[0].sigma.unwrap());
        }
    }

    #[test]
    fn low_frequency_cylinder_recovers_contrast() {
        use crate::objective::SmoothObjective;
        use crate::proxqn::prox_qn_solve;

        // f = mean(p) * disk on a 2x2 parameter grid; tau = 0 ties the four
        // parameters together, so this is a scalar search along the disk
        struct AlongShape<'a> {
            inner: BatchMisfit<'a>,
            shape: Vec<f64>,
        }
        impl SmoothObjective for AlongShape<'_> {
            fn dim(&self) -> usize {
                4
            }
            fn value(&mut self, p: &[f64]) -> Result<f64> {
                let c = p.iter().sum::<f64>() / 4.0;
                let f: Vec<f64> = self.shape.iter().map(|s| c * s).collect();
                self.inner.value(&f)
            }
            fn value_and_gradient(&mut self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
                let c = p.iter().sum::<f64>() / 4.0;
                let f: Vec<f64> = self.shape.iter().map(|s| c * s).collect();
                let (v, g) = self.inner.value_and_gradient(&f)?;
                let dc: f64 = g.iter().zip(&self.shape).map(|(a, b)| a * b).sum();
                Ok((v, vec![dc / 4.0; 4]))
            }
        }

        let truth = cylinder_scene_on(16, 10.0).unwrap();
        let sched = FrequencySchedule::from_mhz(&[10.0]).unwrap();
        let model = ForwardModel::with_unit_sources(truth.grid, default_acquisition(), sched).unwrap();
        let (data, _) = simulate(&model, &truth, &GmresConfig::with_tol(1e-10)).unwrap();
        let shape = cylinder_scene_on(16, 1.0).unwrap().values;
        let mut obj = AlongShape {
            inner: BatchMisfit::new(&model, &data, vec![0], GmresConfig::with_tol(1e-10)).unwrap(),
            shape,
        };
        let op = TvOperator::new(crate::scene::Grid::unit_square(2).unwrap());
        let out = prox_qn_solve(&mut obj, &op, &[0.0; 4], 0.0, &ProxQnConfig::default()).unwrap();
        let c = out.f[0];
        assert!((c - 10.0).abs() <= 0.1, "{c} after {:?}", out.stop);
    }

    #[test]
    fn report_round_trips_json() {
        let (model, data, truth) = problem(8, &[300.0], 0.5);
        let tau = TvOperator::new(model.grid).tv(&truth.values);
        let rep = sf_tau(&model, &data, tau, &quick()).unwrap();
        let s = serde_json::to_string(&rep).unwrap();
        let back: InversionReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.image, rep.image);
        assert_eq!(back.dr, rep.dr);
        assert_eq!(back.stages.len(), rep.stages.len());
    }
}
