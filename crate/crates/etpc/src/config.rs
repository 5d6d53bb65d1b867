//! Experiment configuration: a single TOML file describing the plant,
//! basis, horizons, trigger, certificate, cost and run block, plus the
//! validated runtime objects built from it.

use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::controllers::{ClfController, ControllerKind, EmulationController, EventPolicy};
use crate::error::{EtpcError, Result};
use crate::feasibility::{alpha_floor, construct_c, max_feasible_m, Certificate};
use crate::horizon::compute_horizon;
use crate::linalg::{is_spd, solve_discrete_lyapunov, Mat, Vector};
use crate::plant::{DisturbanceSource, SystemModel};
use crate::trigger::TriggerConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub d_bound: f64,
    pub disturbance: DisturbanceConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DisturbanceConfig {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "sinusoid")]
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
    },
    #[serde(rename = "uniform-ball")]
    UniformBall { seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub kind: String,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub table: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSection {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub k: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
    pub events: usize,
    /// Optional sweep grids; when present, the batch runs one cell per
    /// (N, p) pair in addition to the base horizon.
    #[serde(default)]
    pub n_values: Option<Vec<usize>>,
    #[serde(default)]
    pub p_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub controllers: Vec<String>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub sampling: Option<SamplingConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub basis: BasisConfig,
    pub horizon: HorizonConfig,
    pub trigger: TriggerSection,
    pub certificate: CertificateConfig,
    pub cost: CostConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| EtpcError::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

fn to_matrix(rows: &[Vec<f64>], name: &str) -> Result<Mat> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(EtpcError::Config(format!("{name}: empty matrix")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(EtpcError::Config(format!("{name}: ragged rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Mat::from_row_slice(rows.len(), cols, &flat))
}

/// One named precondition check with its outcome.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// All runtime objects built and validated from a config.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: SystemModel,
    pub basis: BasisSet,
    pub p: Mat,
    pub k: Mat,
    pub q: Mat,
    pub r: Mat,
    pub trigger: TriggerConfig,
    pub certificate: Certificate,
    pub alpha_floor: f64,
}

impl Experiment {
    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        let a = to_matrix(&config.plant.a, "plant.a")?;
        let b = to_matrix(&config.plant.b, "plant.b")?;
        let n_dim = a.nrows();
        let disturbance = match &config.plant.disturbance {
            DisturbanceConfig::Zero => DisturbanceSource::Zero { dim: n_dim },
            DisturbanceConfig::Sinusoid {
                amplitude,
                frequency,
            } => {
                if amplitude.len() != n_dim || frequency.len() != n_dim {
                    return Err(EtpcError::Config(
                        "plant.disturbance: amplitude/frequency must match the state dimension"
                            .into(),
                    ));
                }
                DisturbanceSource::Sinusoid {
                    amplitude: Vector::from_column_slice(amplitude),
                    frequency: Vector::from_column_slice(frequency),
                }
            }
            DisturbanceConfig::UniformBall { seed } => DisturbanceSource::UniformBall {
                dim: n_dim,
                bound: config.plant.d_bound,
                seed: *seed,
            },
        };
        let model = SystemModel::new(a, b, config.plant.d_bound, disturbance)?;

        let basis = match config.basis.kind.as_str() {
            "monomial" => BasisSet::monomial(config.basis.p),
            "tabulated" => BasisSet::tabulated(
                config
                    .basis
                    .table
                    .clone()
                    .ok_or_else(|| EtpcError::Config("basis.table: missing".into()))?,
            )?,
            other => {
                return Err(EtpcError::Config(format!(
                    "basis.kind: unknown kind {other:?}"
                )))
            }
        };

        let k = to_matrix(&config.certificate.k, "certificate.k")?;
        let q = to_matrix(&config.certificate.q, "certificate.q")?;
        let r = to_matrix(&config.cost.r, "cost.r")?;
        if !is_spd(&q) {
            return Err(EtpcError::Config(
                "certificate.q: must be symmetric positive definite".into(),
            ));
        }
        let acl = &model.a + &model.b * &k;
        let p = solve_discrete_lyapunov(&acl, &q)?;
        let floor = alpha_floor(&p, &q)?;

        let trig = &config.trigger;
        let trigger = TriggerConfig::new(
            trig.alpha,
            trig.beta,
            trig.sigma,
            config.horizon.m,
            p.clone(),
            config.plant.d_bound,
            &model,
        )?;

        let c = construct_c(&k, &basis)?;
        let h = compute_horizon(&model, &basis, config.horizon.n)?;
        let m_max = max_feasible_m(&c, &h, &p, trig.alpha, config.horizon.n);
        let certificate = Certificate {
            c,
            k: k.clone(),
            p: p.clone(),
            q: q.clone(),
            alpha: trig.alpha,
            m_max,
        };

        Ok(Experiment {
            config,
            model,
            basis,
            p,
            k,
            q,
            r,
            trigger,
            certificate,
            alpha_floor: floor,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_config(ExperimentConfig::from_path(path)?)
    }

    /// Pass/fail report of every certified precondition.
    pub fn precondition_report(&self) -> Vec<Check> {
        let cfg = &self.config;
        let mut checks = Vec::new();
        checks.push(Check {
            name: "rate ordering 0 < alpha < beta < 1".into(),
            pass: 0.0 < cfg.trigger.alpha
                && cfg.trigger.alpha < cfg.trigger.beta
                && cfg.trigger.beta < 1.0,
            detail: format!("alpha = {}, beta = {}", cfg.trigger.alpha, cfg.trigger.beta),
        });
        checks.push(Check {
            name: "alpha at or above certificate floor".into(),
            pass: cfg.trigger.alpha >= self.alpha_floor,
            detail: format!("alpha = {}, floor = {}", cfg.trigger.alpha, self.alpha_floor),
        });
        checks.push(Check {
            name: "sigma within certified bound".into(),
            pass: self.trigger.certified(),
            detail: format!(
                "sigma = {}, sigma_bar = {}",
                self.trigger.sigma, self.trigger.sigma_bar
            ),
        });
        checks.push(Check {
            name: "constraint horizon within feasibility window".into(),
            pass: cfg.horizon.m >= 1 && cfg.horizon.m <= self.certificate.m_max,
            detail: format!("M = {}, max feasible M = {}", cfg.horizon.m, self.certificate.m_max),
        });
        checks.push(Check {
            name: "basis independent on horizon".into(),
            pass: self.basis.check_independence(cfg.horizon.n),
            detail: format!("p = {}, N = {}", self.basis.degree(), cfg.horizon.n),
        });
        checks
    }

    /// Zero-disturbance edge: the ultimate bound degenerates to zero and
    /// the trigger runs on the decay branch alone.
    pub fn degenerate_bound(&self) -> bool {
        self.model.d_bound == 0.0
    }

    /// Build the event policy for a controller, at the given horizon cell.
    pub fn build_policy(
        &self,
        kind: ControllerKind,
        n: usize,
        p_degree: usize,
    ) -> Result<Box<dyn EventPolicy>> {
        let cfg = &self.config;
        match kind {
            ControllerKind::Clf => Ok(Box::new(ClfController::new(
                &self.model,
                BasisSet::monomial(p_degree),
                n,
                cfg.horizon.m,
                &self.k,
                self.p.clone(),
                self.r.clone(),
                cfg.trigger.alpha,
            )?)),
            ControllerKind::Zoh => Ok(Box::new(ClfController::zoh(
                &self.model,
                n,
                cfg.horizon.m,
                &self.k,
                self.p.clone(),
                self.r.clone(),
                cfg.trigger.alpha,
            )?)),
            ControllerKind::Emulation => Ok(Box::new(EmulationController::new(
                &self.model,
                BasisSet::monomial(p_degree),
                n,
                &self.k,
                self.p.clone(),
            )?)),
        }
    }

    pub fn controllers(&self) -> Result<Vec<ControllerKind>> {
        self.config
            .run
            .controllers
            .iter()
            .map(|s| s.parse())
            .collect()
    }

    pub fn x0(&self) -> Result<Vector> {
        let x0 = self
            .config
            .run
            .x0
            .as_ref()
            .ok_or_else(|| EtpcError::Config("run.x0: missing".into()))?;
        if x0.len() != self.model.state_dim() {
            return Err(EtpcError::Config(format!(
                "run.x0: has {} entries, state dimension is {}",
                x0.len(),
                self.model.state_dim()
            )));
        }
        Ok(Vector::from_column_slice(x0))
    }
}

/// The bundled Example-1 configuration.
pub fn example1_toml() -> &'static str {
    include_str!("../configs/example1.toml")
}
