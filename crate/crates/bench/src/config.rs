//! Experiment configuration files (TOML). The schema is described in
//! `docs/config.md`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geoclust::cluster::{GctParams, GctSupport, Method, ScrParams, SmcParams, SmcWeight, TgctParams};
use geoclust::synth::{DatasetId, DatasetSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "all_datasets")]
    pub datasets: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_points")]
    pub points_per_cluster: usize,
    /// Output prefix: `<output>.csv` and `<output>.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
}

fn all_datasets() -> Vec<String> {
    DatasetId::ALL.iter().map(|d| d.to_string()).collect()
}

fn default_trials() -> usize {
    30
}

fn default_noise() -> f64 {
    DatasetSpec::DEFAULT_NOISE
}

fn default_points() -> usize {
    DatasetSpec::DEFAULT_POINTS_PER_CLUSTER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodConfig {
    Gct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default = "default_neighbors")]
        neighbors: usize,
        #[serde(default = "one")]
        sigma_d: f64,
        #[serde(default = "one")]
        sigma_a: f64,
        #[serde(default = "default_support")]
        support: String,
    },
    Tgct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        r: f64,
        eta: f64,
        sigma_d: f64,
        sigma_a: f64,
    },
    Smc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default = "default_neighbors")]
        neighbors: usize,
        #[serde(default = "one")]
        sigma_d: f64,
        #[serde(default = "default_weight")]
        weight: String,
        /// Per-dataset weight mode, keyed by dataset id.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        weight_by_dataset: BTreeMap<String, String>,
    },
    Scr {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default = "one")]
        sigma: f64,
    },
    Ekm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

fn default_neighbors() -> usize {
    20
}

fn one() -> f64 {
    1.0
}

fn default_support() -> String {
    GctSupport::default().to_string()
}

fn default_weight() -> String {
    SmcWeight::default().to_string()
}

impl MethodConfig {
    /// Fixed per-kind ordinal used in seed derivation, so that two entries of
    /// the same kind see the same data.
    pub fn ordinal(&self) -> u64 {
        match self {
            Self::Gct { .. } => 0,
            Self::Tgct { .. } => 1,
            Self::Smc { .. } => 2,
            Self::Scr { .. } => 3,
            Self::Ekm { .. } => 4,
        }
    }

    pub fn label(&self) -> String {
        let (label, kind) = match self {
            Self::Gct { label, .. } => (label, "GCT"),
            Self::Tgct { label, .. } => (label, "TGCT"),
            Self::Smc { label, .. } => (label, "SMC"),
            Self::Scr { label, .. } => (label, "SCR"),
            Self::Ekm { label } => (label, "EKM"),
        };
        label.clone().unwrap_or_else(|| kind.to_string())
    }

    /// The method to run on `dataset`.
    pub fn method_for(&self, dataset: DatasetId) -> Result<Method, ConfigError> {
        let bad = |e: geoclust::Error| ConfigError::Invalid(format!("method {}: {e}", self.label()));
        let method = match self {
            Self::Gct {
                neighbors,
                sigma_d,
                sigma_a,
                support,
                ..
            } => Method::Gct(GctParams {
                neighbors: *neighbors,
                sigma_d: *sigma_d,
                sigma_a: *sigma_a,
                support: support.parse().map_err(bad)?,
                ..GctParams::default()
            }),
            Self::Tgct {
                r,
                eta,
                sigma_d,
                sigma_a,
                ..
            } => Method::Tgct(TgctParams {
                r: *r,
                eta: *eta,
                sigma_d: *sigma_d,
                sigma_a: *sigma_a,
            }),
            Self::Smc {
                neighbors,
                sigma_d,
                weight,
                weight_by_dataset,
                ..
            } => {
                let mut mode = weight.as_str();
                for (key, value) in weight_by_dataset {
                    if key.parse::<DatasetId>().map_err(bad)? == dataset {
                        mode = value;
                    }
                }
                Method::Smc(SmcParams {
                    neighbors: *neighbors,
                    sigma_d: *sigma_d,
                    weight: mode.parse().map_err(bad)?,
                    ..SmcParams::default()
                })
            }
            Self::Scr { sigma, .. } => Method::Scr(ScrParams { sigma: *sigma }),
            Self::Ekm { .. } => Method::Ekm,
        };
        method.validate().map_err(bad)?;
        Ok(method)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dataset_ids(&self) -> Result<Vec<DatasetId>, ConfigError> {
        self.experiment
            .datasets
            .iter()
            .map(|d| {
                d.parse()
                    .map_err(|e: geoclust::Error| ConfigError::Invalid(e.to_string()))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.experiment;
        if e.trials == 0 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("no [[method]] entries".into()));
        }
        let ids = self.dataset_ids()?;
        if ids.is_empty() {
            return Err(ConfigError::Invalid("no datasets".into()));
        }
        for &id in &ids {
            DatasetSpec::new(id, e.seed)
                .with_noise(e.noise)
                .with_points_per_cluster(e.points_per_cluster)
                .validate()
                .map_err(|err| ConfigError::Invalid(err.to_string()))?;
            for m in &self.methods {
                m.method_for(id)?;
            }
        }
        let mut labels: Vec<String> = self.methods.iter().map(MethodConfig::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid(format!(
                "duplicate method label '{}'; set `label` to tell entries apart",
                w[0]
            )));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.sigmas.is_empty() {
                return Err(ConfigError::Invalid("sweep.sigmas is empty".into()));
            }
            if let Some(s) = sweep.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                return Err(ConfigError::Invalid(format!(
                    "sweep sigma {s} must be a nonnegative number"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
trials = 2

[[method]]
name = "gct"

[[method]]
name = "smc"
weight = "linear"
weight_by_dataset = { I = "exponential" }
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.experiment.datasets.len(), 6);
        assert_eq!(c.experiment.noise, 0.025);
        assert_eq!(c.experiment.points_per_cluster, 130);
        assert_eq!(c.methods[0].label(), "GCT");
        match c.methods[0].method_for(DatasetId::II).unwrap() {
            Method::Gct(p) => assert_eq!(p, GctParams::default()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn smc_weight_per_dataset() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let weight = |id| match c.methods[1].method_for(id).unwrap() {
            Method::Smc(p) => p.weight,
            other => panic!("{other:?}"),
        };
        assert_eq!(weight(DatasetId::I), SmcWeight::Exponential);
        assert_eq!(weight(DatasetId::IV), SmcWeight::Linear);
    }

    #[test]
    fn echo_roundtrips() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            "[experiment]\ntrials = 0\n[[method]]\nname = \"ekm\"\n",
            "[experiment]\n",
            "[experiment]\ndatasets = [\"VII\"]\n[[method]]\nname = \"ekm\"\n",
            "[experiment]\nnoise = -1.0\n[[method]]\nname = \"ekm\"\n",
            "[experiment]\n[[method]]\nname = \"tgct\"\nr = 0.3\n",
            "[experiment]\n[[method]]\nname = \"gct\"\nsigma_a = 0.0\n",
            "[experiment]\n[[method]]\nname = \"ekm\"\n[[method]]\nname = \"ekm\"\n",
            "[experiment]\n[[method]]\nname = \"ekm\"\n[sweep]\nsigmas = []\n",
            "[experiment]\ncolor = 1\n[[method]]\nname = \"ekm\"\n",
        ];
        for text in cases {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }
}
