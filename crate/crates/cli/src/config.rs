//! Experiment configuration: a single TOML file with geometry, scenario,
//! estimator, harness and output blocks. Unknown keys are rejected so typos
//! surface as config errors instead of silently falling back to defaults.

use serde::Deserialize;

use doa_lowrank::baselines::BaselineConfig;
use doa_lowrank::eval::MethodSpec;
use doa_lowrank::signal::{SourceScenario, UlaGeometry};
use doa_lowrank::spectrum::GridSpec;
use doa_lowrank::AlrdConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryBlock,
    pub scenario: ScenarioBlock,
    #[serde(rename = "estimator")]
    pub estimators: Vec<EstimatorBlock>,
    pub harness: HarnessBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub m: usize,
    #[serde(default = "default_spacing")]
    pub spacing_ratio: f64,
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub doas: Vec<f64>,
    pub snr: Option<f64>,
    pub snr_list: Option<Vec<f64>>,
    pub n: usize,
    pub correlated_pair: Option<[usize; 2]>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    pub method: String,
    #[serde(default = "default_basis_len")]
    pub i: usize,
    #[serde(default = "default_rank")]
    pub d: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub fba: bool,
    pub k: Option<usize>,
}

fn default_basis_len() -> usize {
    12
}
fn default_rank() -> usize {
    5
}
fn default_alpha() -> f64 {
    0.998
}
fn default_delta() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessBlock {
    pub trials: usize,
    #[serde(default = "default_grid_start")]
    pub grid_start: f64,
    #[serde(default = "default_grid_stop")]
    pub grid_stop: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

fn default_grid_start() -> f64 {
    0.3
}
fn default_grid_stop() -> f64 {
    179.7
}
fn default_grid_step() -> f64 {
    0.3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: String,
    #[serde(default)]
    pub emit_plot_script: bool,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {}", path.display(), e))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| format!("config parse error: {}", e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.geometry()?.validate().map_err(|e| e.to_string())?;
        self.grid().validate().map_err(|e| e.to_string())?;
        if self.scenario.snr.is_none() && self.scenario.snr_list.is_none() {
            return Err("scenario needs either `snr` or `snr_list`".into());
        }
        if let Some(list) = &self.scenario.snr_list {
            if list.is_empty() {
                return Err("`snr_list` must not be empty".into());
            }
        }
        if self.estimators.is_empty() {
            return Err("at least one [[estimator]] block is required".into());
        }
        if self.harness.trials == 0 {
            return Err("`harness.trials` must be at least 1".into());
        }
        // Building every pieces end-to-end exercises the library invariants.
        let scenario = self.scenario_at(self.snr_grid()[0])?;
        scenario.validate().map_err(|e| e.to_string())?;
        for block in &self.estimators {
            self.method_spec(block)?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<UlaGeometry, String> {
        UlaGeometry::new(self.geometry.m, self.geometry.spacing_ratio).map_err(|e| e.to_string())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            start_deg: self.harness.grid_start,
            stop_deg: self.harness.grid_stop,
            step_deg: self.harness.grid_step,
        }
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        match (&self.scenario.snr_list, self.scenario.snr) {
            (Some(list), _) => list.clone(),
            (None, Some(snr)) => vec![snr],
            (None, None) => unreachable!("rejected by validate"),
        }
    }

    pub fn scenario_at(&self, snr_db: f64) -> Result<SourceScenario, String> {
        let scenario = SourceScenario {
            doas_deg: self.scenario.doas.clone(),
            source_power: 1.0,
            noise_power: SourceScenario::noise_power_for_snr(1.0, snr_db),
            correlated_pair: self.scenario.correlated_pair.map(|[a, b]| (a, b)),
            correlation_coeff: self.scenario.rho,
            num_snapshots: self.scenario.n,
            rng_seed: self.scenario.seed,
        };
        scenario.validate().map_err(|e| e.to_string())?;
        Ok(scenario)
    }

    pub fn alrd_config(&self, block: &EstimatorBlock) -> AlrdConfig {
        AlrdConfig {
            basis_len: block.i,
            rank: block.d,
            forget: block.alpha,
            init_scale: block.delta,
            grid: self.grid(),
        }
    }

    fn baseline_config(&self, block: &EstimatorBlock) -> BaselineConfig {
        BaselineConfig {
            num_sources: block.k.unwrap_or(self.scenario.doas.len()),
            use_fba: block.fba,
            grid: self.grid(),
        }
    }

    pub fn method_spec(&self, block: &EstimatorBlock) -> Result<MethodSpec, String> {
        let spec = match block.method.as_str() {
            "alrd-rls" => MethodSpec::Alrd(self.alrd_config(block)),
            "malrd-rls" => MethodSpec::Malrd(self.alrd_config(block)),
            "capon" => MethodSpec::Capon(self.baseline_config(block)),
            "music" => MethodSpec::Music(self.baseline_config(block)),
            "esprit" => MethodSpec::Esprit {
                num_sources: block.k.unwrap_or(self.scenario.doas.len()),
                use_fba: block.fba,
            },
            other => {
                return Err(format!(
                    "unknown estimator method `{}` (expected alrd-rls, malrd-rls, capon, music or esprit)",
                    other
                ))
            }
        };
        match &spec {
            MethodSpec::Alrd(cfg) | MethodSpec::Malrd(cfg) => {
                cfg.validate().map_err(|e| e.to_string())?
            }
            MethodSpec::Capon(cfg) | MethodSpec::Music(cfg) => cfg
                .validate(self.geometry.m)
                .map_err(|e| e.to_string())?,
            MethodSpec::Esprit { num_sources, .. } => {
                if *num_sources == 0 || *num_sources >= self.geometry.m {
                    return Err(format!(
                        "esprit model order {} must be in [1, {})",
                        num_sources, self.geometry.m
                    ));
                }
            }
        }
        Ok(spec)
    }

    /// The estimator block matching a method tag.
    pub fn find_estimator(&self, tag: &str) -> Result<&EstimatorBlock, String> {
        self.estimators
            .iter()
            .find(|b| b.method == tag)
            .ok_or_else(|| format!("no [[estimator]] block with method = \"{}\"", tag))
    }
}
