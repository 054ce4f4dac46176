//! `fk-hull-v1` text format.
//!
//! ```toml
//! format = "fk-hull-v1"
//! d = 2
//! alpha = [1.0, 1.4142135623730951]
//! omega = 0.6180339887498949
//! n_trunc = 32
//! offset = 0.0
//! coefficients = [[[1, 0], -0.0012, 0.0], [[-1, 0], -0.0012, -0.0]]
//! ```
//!
//! Exact zeros are omitted. Floats are written in shortest round-trip form,
//! so a save/load cycle reproduces every bit.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::HullFunction;
use crate::error::{Error, Result};

pub const FORMAT: &str = "fk-hull-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HullFile {
    format: String,
    d: usize,
    alpha: Vec<f64>,
    omega: f64,
    n_trunc: usize,
    #[serde(default)]
    offset: f64,
    #[serde(default)]
    coefficients: Vec<(Vec<i64>, f64, f64)>,
}

impl HullFunction {
    pub fn to_toml(&self) -> Result<String> {
        let f = HullFile {
            format: FORMAT.into(),
            d: self.dim(),
            alpha: self.alpha.clone(),
            omega: self.omega,
            n_trunc: self.n_trunc,
            offset: self.offset,
            coefficients: self
                .modes()
                .into_iter()
                .map(|(k, c)| (k, c.re, c.im))
                .collect(),
        };
        toml::to_string(&f).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: HullFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if f.format != FORMAT {
            return Err(Error::Format(format!("expected format `{FORMAT}`, found `{}`", f.format)));
        }
        if f.alpha.len() != f.d {
            return Err(Error::Format(format!("alpha has length {} but d = {}", f.alpha.len(), f.d)));
        }
        let mut h = HullFunction::zero(f.alpha, f.omega, f.n_trunc)?;
        h.offset = f.offset;
        for (k, re, im) in &f.coefficients {
            if k.iter().all(|&v| v == 0) {
                return Err(Error::Format("zero mode must be omitted".into()));
            }
            let i = h
                .flat(k)
                .ok_or_else(|| Error::Format(format!("mode {k:?} outside the truncation cube")))?;
            h.coeffs[i] = Complex64::new(*re, *im);
        }
        for (k, c) in h.modes() {
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            if h.coeff(&neg) != c.conj() {
                return Err(Error::Format(format!("coefficients are not hermitian at {k:?}")));
            }
        }
        Ok(h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.display().to_string())
            } else {
                Error::Io(e)
            }
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut h = HullFunction::zero(vec![1.0, 2f64.sqrt()], (5f64.sqrt() - 1.0) / 2.0, 4).unwrap();
        h.set_coeff(&[1, -2], Complex64::new(1.0 / 3.0, -2e-17)).unwrap();
        h.set_coeff(&[0, 4], Complex64::new(-7.123456789e-9, 0.0)).unwrap();
        let h = h.translate(0.123);
        let back = HullFunction::from_toml(&h.to_toml().unwrap()).unwrap();
        assert_eq!(back.offset().to_bits(), h.offset().to_bits());
        for (a, b) in h.coeffs.iter().zip(&back.coeffs) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn zero_hull_has_empty_coefficient_list() {
        let h = HullFunction::zero(vec![1.0, 2.0], 0.5, 2).unwrap();
        let text = h.to_toml().unwrap();
        let back = HullFunction::from_toml(&text).unwrap();
        assert!(back.modes().is_empty());
    }

    #[test]
    fn rejects_wrong_format_and_unknown_keys() {
        let h = HullFunction::zero(vec![1.0, 2.0], 0.5, 2).unwrap();
        let text = h.to_toml().unwrap();
        assert!(HullFunction::from_toml(&text.replace(FORMAT, "other")).is_err());
        assert!(HullFunction::from_toml(&format!("{text}\nbogus = 1\n")).is_err());
    }
}
