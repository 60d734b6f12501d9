//! Plain-text key-value serialization of manipulation hyperparameters.
//!
//! The cost matrix itself is estimated from data at run time; the block
//! records the geometry tag and scalars only.

use crate::error::ResponseError;
use crate::numeric::Matrix;
use crate::scalar::{lit, Scalar};

use super::{
    CostExponent, CostGeometry, CostModel, ManipulationModel, Misspecification, Regime,
};

/// Serializable manipulation hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationConfig {
    pub regime: String,
    pub geometry: String,
    pub lambda: f64,
    pub sigma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub mis_variant: String,
    pub mis_sigma: f64,
    pub mask_density: f64,
    /// 0 draws a fresh incomplete-variant mask per agent; any other value
    /// fixes one mask for the whole population.
    pub mask_seed: u64,
}

impl Default for ManipulationConfig {
    fn default() -> Self {
        ManipulationConfig {
            regime: "standard".into(),
            geometry: "mahalanobis".into(),
            lambda: 0.5,
            sigma: 0.1,
            lambda_min: 0.5,
            lambda_max: 2.0,
            mis_variant: "none".into(),
            mis_sigma: 1.5,
            mask_density: 0.5,
            mask_seed: 0,
        }
    }
}

impl ManipulationConfig {
    /// Render as `key = value` lines.
    pub fn to_block(&self) -> String {
        format!(
            "regime = {}\ngeometry = {}\nlambda = {}\nsigma = {}\nlambda_min = {}\nlambda_max = {}\nmis_variant = {}\nmis_sigma = {}\nmask_density = {}\nmask_seed = {}\n",
            self.regime,
            self.geometry,
            self.lambda,
            self.sigma,
            self.lambda_min,
            self.lambda_max,
            self.mis_variant,
            self.mis_sigma,
            self.mask_density,
            self.mask_seed,
        )
    }

    /// Parse a `key = value` block; unknown keys are rejected.
    pub fn from_block(block: &str) -> Result<Self, ResponseError> {
        let mut cfg = ManipulationConfig::default();
        for (lineno, line) in block.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ResponseError::ConfigParse(format!("line {}: missing '='", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_f = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| ResponseError::ConfigParse(format!("bad number for {key}: {v}")))
            };
            match key {
                "regime" => cfg.regime = value.to_string(),
                "geometry" => cfg.geometry = value.to_string(),
                "lambda" => cfg.lambda = parse_f(value)?,
                "sigma" => cfg.sigma = parse_f(value)?,
                "lambda_min" => cfg.lambda_min = parse_f(value)?,
                "lambda_max" => cfg.lambda_max = parse_f(value)?,
                "mis_variant" => cfg.mis_variant = value.to_string(),
                "mis_sigma" => cfg.mis_sigma = parse_f(value)?,
                "mask_density" => cfg.mask_density = parse_f(value)?,
                "mask_seed" => {
                    cfg.mask_seed = value.parse::<u64>().map_err(|_| {
                        ResponseError::ConfigParse(format!("bad integer for mask_seed: {value}"))
                    })?
                }
                other => {
                    return Err(ResponseError::ConfigParse(format!("unknown key: {other}")));
                }
            }
        }
        Ok(cfg)
    }

    /// Build the runtime model; `cost_matrix` supplies the Mahalanobis matrix
    /// (typically estimated from the context split).
    pub fn instantiate<T: Scalar>(
        &self,
        cost_matrix: Option<Matrix<T>>,
    ) -> Result<ManipulationModel<T>, ResponseError> {
        let geometry = match self.geometry.as_str() {
            "euclidean" => CostGeometry::Euclidean,
            "mahalanobis" => match cost_matrix {
                Some(m) => CostGeometry::Mahalanobis { m },
                None => {
                    return Err(ResponseError::ConfigParse(
                        "mahalanobis geometry needs a cost matrix".into(),
                    ))
                }
            },
            other => {
                return Err(ResponseError::ConfigParse(format!(
                    "unknown geometry: {other}"
                )))
            }
        };
        let cost = CostModel {
            geometry,
            exponent: CostExponent::Quadratic,
            lambda: lit(self.lambda),
        };
        let regime = match self.regime.as_str() {
            "standard" => Regime::Standard,
            "noisy" => Regime::Noisy {
                sigma: lit(self.sigma),
            },
            "heterogeneous" => Regime::Heterogeneous {
                lambda_min: lit(self.lambda_min),
                lambda_max: lit(self.lambda_max),
            },
            other => {
                return Err(ResponseError::ConfigParse(format!(
                    "unknown regime: {other}"
                )))
            }
        };
        let misspec = match self.mis_variant.as_str() {
            "none" => Misspecification::None,
            "inaccurate" => Misspecification::Inaccurate {
                sigma: lit(self.mis_sigma),
            },
            "incomplete" => Misspecification::Incomplete {
                density: self.mask_density,
                mask_seed: if self.mask_seed == 0 {
                    None
                } else {
                    Some(self.mask_seed)
                },
            },
            "approximate" => Misspecification::Approximate,
            other => return Err(ResponseError::UnknownVariant(other.to_string())),
        };
        let model = ManipulationModel {
            regime,
            cost,
            misspec,
        };
        model.validate()?;
        Ok(model)
    }
}
