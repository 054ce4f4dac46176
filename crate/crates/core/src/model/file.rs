//! Model specification files (TOML).
//!
//! ```toml
//! kind = "fk-quasiperiodic"
//! dim = 1
//! omega = 0.6180339887498949
//!
//! [potential]
//! epsilon = 0.01
//! alpha = [1.0, 1.4142135623730951]
//! fourier = [[[1, 0], 0.5, 0.0], [[-1, 0], 0.5, 0.0], [[0, 1], 0.5, 0.0], [[0, -1], 0.5, 0.0]]
//!
//! [tolerances]
//! sign = 1e-12
//! ```
//!
//! `kind` is one of `fk-periodic`, `fk-quasiperiodic`, `long-range-pair`,
//! `three-body`, `antiferromagnetic`, `decoupled`, `blocks`. Unknown keys are
//! rejected.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{builtin, FourierPotential, InteractionSpec, Mode};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: String,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<CouplingSection>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub epsilon: f64,
    pub alpha: Vec<f64>,
    /// `[k, re, im]` triples.
    #[serde(default)]
    pub fourier: Vec<(Vec<i64>, f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    /// Mixed partials `c_1, c_2, …` for long-range pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    /// Cutoff radius; with no explicit coefficients, `c_r = −2^{−r}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Slack for ferromagnetic sign checks.
    pub sign: f64,
    /// Agreement tolerance for gradient consistency checks.
    pub gradient: f64,
    /// Mixed partials at or below `-edge_threshold` link two sites.
    pub edge_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sign: 1e-12,
            gradient: 1e-6,
            edge_threshold: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sign", self.sign),
            ("gradient", self.gradient),
            ("edge_threshold", self.edge_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("tolerance `{name}` must be positive")));
            }
        }
        Ok(())
    }
}

/// A loaded model: the interaction spec plus its declared parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: InteractionSpec,
    pub omega: Option<f64>,
    pub potential: Option<Arc<FourierPotential>>,
    pub tolerances: Tolerances,
    pub file: ModelFile,
}

impl PotentialSection {
    pub fn build(&self) -> Result<FourierPotential> {
        let modes = self
            .fourier
            .iter()
            .map(|(k, re, im)| Mode {
                k: k.clone(),
                coeff: Complex64::new(*re, *im),
            })
            .collect();
        FourierPotential::new(self.epsilon, self.alpha.clone(), modes)
    }

    pub fn from_potential(v: &FourierPotential) -> Self {
        PotentialSection {
            epsilon: v.epsilon(),
            alpha: v.alpha().to_vec(),
            fourier: v
                .modes()
                .iter()
                .map(|m| (m.k.clone(), m.coeff.re, m.coeff.im))
                .collect(),
        }
    }
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn build(&self) -> Result<Model> {
        self.tolerances.validate()?;
        if let Some(w) = self.omega {
            if !w.is_finite() {
                return Err(Error::InvalidModel("omega must be finite".into()));
            }
        }
        let potential = match &self.potential {
            Some(p) => Some(Arc::new(p.build()?)),
            None => None,
        };
        let c = self.couplings.clone().unwrap_or_default();
        let need_1d = |what: &str| {
            if self.dim != 1 {
                Err(Error::InvalidModel(format!("{what} models are one-dimensional")))
            } else {
                Ok(())
            }
        };
        let spec = match self.kind.as_str() {
            "fk-periodic" => builtin::fk_periodic(self.dim, potential.clone())?,
            "fk-quasiperiodic" => {
                need_1d("fk-quasiperiodic")?;
                let v = potential
                    .clone()
                    .ok_or_else(|| Error::InvalidModel("fk-quasiperiodic needs [potential]".into()))?;
                if v.torus_dim() < 2 {
                    return Err(Error::InvalidModel(
                        "a quasi-periodic medium needs a torus of dimension at least 2".into(),
                    ));
                }
                builtin::fk_quasiperiodic(v)?
            }
            "long-range-pair" => {
                need_1d("long-range-pair")?;
                let coeffs = match (&c.coefficients, c.cutoff) {
                    (Some(v), None) => v.clone(),
                    (Some(v), Some(r)) => v.iter().copied().take(r).collect(),
                    (None, Some(r)) => builtin::geometric_coefficients(r),
                    (None, None) => {
                        return Err(Error::InvalidModel(
                            "long-range-pair needs coefficients or a cutoff".into(),
                        ))
                    }
                };
                builtin::long_range_pair(&coeffs, potential.clone())?
            }
            "three-body" => {
                need_1d("three-body")?;
                builtin::three_body(c.gamma.unwrap_or(0.5), potential.clone())?
            }
            "antiferromagnetic" => {
                need_1d("antiferromagnetic")?;
                builtin::antiferromagnetic()?
            }
            "decoupled" => {
                need_1d("decoupled")?;
                builtin::decoupled()?
            }
            "blocks" => {
                need_1d("blocks")?;
                builtin::blocks(c.block.unwrap_or(4))?
            }
            other => return Err(Error::InvalidModel(format!("unknown model kind `{other}`"))),
        };
        Ok(Model {
            spec,
            omega: self.omega,
            potential,
            tolerances: self.tolerances,
            file: self.clone(),
        })
    }
}

impl Model {
    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.display().to_string())
            } else {
                Error::Io(e)
            }
        })?;
        ModelFile::from_toml(&text)?.build()
    }

    pub fn from_toml(text: &str) -> Result<Model> {
        ModelFile::from_toml(text)?.build()
    }
}
