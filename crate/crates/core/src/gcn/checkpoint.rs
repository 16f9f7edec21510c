use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{GcnModel, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::graph::FeatureScaling;

/// Final-epoch numbers carried alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub final_val_auc: Option<f64>,
    pub test_auc: Option<f64>,
}

impl From<&TrainReport> for TrainSummary {
    fn from(r: &TrainReport) -> Self {
        Self {
            epochs: r.train_loss.len(),
            final_train_loss: r.train_loss.last().copied().unwrap_or(f64::NAN),
            final_val_loss: r.val_loss.last().copied().unwrap_or(f64::NAN),
            final_val_auc: r.val_auc.last().copied().flatten(),
            test_auc: r.test_auc,
        }
    }
}

/// Model checkpoint. Matrices are stored row-major as nested arrays;
/// `W2` is `hidden × 1`. Floats are written in shortest round-trip decimal
/// form, so a save/load cycle is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<[f64; 1]>,
    pub b2: f64,
    pub train_report_summary: TrainSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_scaling: Option<FeatureScaling>,
}

impl Checkpoint {
    pub fn new(
        model: &GcnModel,
        config: &TrainConfig,
        feature_names: &[String],
        report: &TrainReport,
        feature_scaling: Option<FeatureScaling>,
    ) -> Self {
        Self {
            config: config.clone(),
            feature_names: feature_names.to_vec(),
            w1: model.w1.rows().into_iter().map(|r| r.to_vec()).collect(),
            b1: model.b1.to_vec(),
            w2: model.w2.iter().map(|&w| [w]).collect(),
            b2: model.b2,
            train_report_summary: report.into(),
            feature_scaling,
        }
    }

    pub fn model(&self) -> Result<GcnModel> {
        let d = self.feature_names.len();
        let h = self.b1.len();
        if self.w1.len() != d || self.w1.iter().any(|r| r.len() != h) || self.w2.len() != h {
            return Err(Error::Shape(format!(
                "checkpoint weights do not match {d} features × {h} hidden units"
            )));
        }
        let flat: Vec<f64> = self.w1.iter().flatten().copied().collect();
        let w1 = Array2::from_shape_vec((d, h), flat).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(GcnModel {
            w1,
            b1: Array1::from(self.b1.clone()),
            w2: self.w2.iter().map(|[w]| *w).collect(),
            b2: self.b2,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("checkpoint", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
