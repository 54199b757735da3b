use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hjcone::gibbs::{ModelSpec, Prior};
use hjcone::nonlinearity::Interaction;

use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Converge,
    IdentitySuite,
    FenchelSuite,
    HopfSuite,
    Concentration,
    NonsymDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Converge,
        Experiment::IdentitySuite,
        Experiment::FenchelSuite,
        Experiment::HopfSuite,
        Experiment::Concentration,
        Experiment::NonsymDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Converge => "converge",
            Experiment::IdentitySuite => "identity-suite",
            Experiment::FenchelSuite => "fenchel-suite",
            Experiment::HopfSuite => "hopf-suite",
            Experiment::Concentration => "concentration",
            Experiment::NonsymDemo => "nonsym-demo",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InteractionConfig {
    /// `A_j = 1` iff all indices of `j` coincide.
    Special,
    /// Rows of `A`, `K^p` of them, each of length `L`.
    General { a: Vec<Vec<f64>> },
    /// `K = p = 2`, `A = (0, 1, 0, 0)`.
    Nonsym,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl PriorConfig {
    pub fn rademacher(k: usize) -> Self {
        let p = Prior::rademacher(k);
        PriorConfig {
            atoms: p.atoms().to_vec(),
            weights: p.weights().to_vec(),
        }
    }

    pub fn build(&self, k: usize) -> Result<Prior> {
        Ok(Prior::new(k, self.atoms.clone(), self.weights.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub k: usize,
    pub p: u32,
    pub interaction: InteractionConfig,
    pub prior: PriorConfig,
    /// Prior of the second factor in the nonsymmetric demo; defaults to `prior`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior2: Option<PriorConfig>,
    pub n_values: Vec<usize>,
}

impl ModelConfig {
    pub fn interaction(&self) -> Result<Interaction> {
        Ok(match &self.interaction {
            InteractionConfig::Special => Interaction::special_diagonal(self.k, self.p),
            InteractionConfig::Nonsym => {
                if self.k != 2 || self.p != 2 {
                    return Err(LabError::Config(
                        "the nonsymmetric interaction needs K = p = 2".into(),
                    ));
                }
                Interaction::nonsym_demo()
            }
            InteractionConfig::General { a } => {
                let cols = a.first().map_or(0, |r| r.len());
                if a.iter().any(|r| r.len() != cols) {
                    return Err(LabError::Config(
                        "interaction rows have different lengths".into(),
                    ));
                }
                let m = DMatrix::from_fn(a.len(), cols, |i, j| a[i][j]);
                Interaction::new(self.k, self.p, m)?
            }
        })
    }

    pub fn spec(&self, n: usize, seed: u64) -> Result<ModelSpec> {
        Ok(ModelSpec::new(
            n,
            self.interaction()?,
            self.prior.build(self.k)?,
            seed,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t: Vec<f64>,
    pub h_radius: f64,
    pub h_step: f64,
    pub psi_radius: f64,
    pub psi_step: f64,
    pub z_radius: f64,
    pub z_step: f64,
    pub quad_order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t: (0..9).map(|i| i as f64 * 0.25).collect(),
            h_radius: 2.0,
            h_step: 0.25,
            psi_radius: 12.0,
            psi_step: 1.0 / 64.0,
            z_radius: 2.0,
            z_step: 1.0 / 128.0,
            quad_order: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub nsamples: usize,
    /// Independent batch used to fit control-variate coefficients.
    pub pilot_samples: usize,
    pub model: ModelConfig,
    pub grids: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        let wigner = ModelConfig {
            k: 1,
            p: 2,
            interaction: InteractionConfig::Special,
            prior: PriorConfig::rademacher(1),
            prior2: None,
            n_values: vec![2, 4],
        };
        let mut cfg = ExperimentConfig {
            experiment,
            seed: 2024,
            nsamples: 2000,
            pilot_samples: 300,
            model: wigner,
            grids: GridConfig::default(),
            output: None,
        };
        match experiment {
            Experiment::Converge => {
                cfg.nsamples = 1000;
                cfg.model.n_values = vec![2, 4, 8, 16];
            }
            Experiment::Concentration => {
                cfg.nsamples = 200;
                cfg.model.n_values = vec![4, 8, 16];
            }
            Experiment::NonsymDemo => {
                cfg.model.k = 2;
                cfg.model.interaction = InteractionConfig::Nonsym;
                cfg.model.prior = PriorConfig::rademacher(1);
                cfg.model.n_values = vec![3];
            }
            Experiment::IdentitySuite | Experiment::FenchelSuite | Experiment::HopfSuite => {}
        }
        cfg
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("line {}: {e}", e.line())))
    }

    /// Canonical compact serialization; the content hash is taken over it.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for e in Experiment::ALL {
            let cfg = ExperimentConfig::default_for(e);
            let back = ExperimentConfig::from_json_str(&cfg.to_pretty_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.content_hash(), cfg.content_hash());
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }

    #[test]
    fn odd_floats_round_trip() {
        let mut cfg = ExperimentConfig::default_for(Experiment::Converge);
        cfg.grids.t = vec![0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 0.30000000000000004];
        let back = ExperimentConfig::from_json_str(&cfg.to_canonical_json()).unwrap();
        for (a, b) in cfg.grids.t.iter().zip(&back.grids.t) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_unknown_fields_and_experiments() {
        let mut v: serde_json::Value = serde_json::from_str(
            &ExperimentConfig::default_for(Experiment::HopfSuite).to_canonical_json(),
        )
        .unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(ExperimentConfig::from_json_str(&v.to_string()).is_err());
        v.as_object_mut().unwrap().remove("extra");
        v["experiment"] = serde_json::json!("nope");
        assert!(ExperimentConfig::from_json_str(&v.to_string()).is_err());
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default_for(Experiment::Converge);
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn general_interaction_shape_is_checked() {
        let mut m = ExperimentConfig::default_for(Experiment::IdentitySuite).model;
        m.interaction = InteractionConfig::General {
            a: vec![vec![1.0], vec![0.5, 2.0]],
        };
        assert!(m.interaction().is_err());
        m.interaction = InteractionConfig::General {
            a: vec![vec![1.0, 0.0]],
        };
        let ia = m.interaction().unwrap();
        assert_eq!(ia.l(), 2);
    }
}
