//! JSON model files: schema version, model type, the training configuration
//! and row-major parameter arrays.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dense::DenseNet3;
use super::model::AffModel;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

pub trait ModelType {
    const TYPE_NAME: &'static str;
}

impl ModelType for DenseNet3 {
    const TYPE_NAME: &'static str = "dense_net3";
}

impl ModelType for AffModel {
    const TYPE_NAME: &'static str = "aff_model";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<T> {
    pub schema_version: u32,
    pub model_type: String,
    pub config: serde_json::Value,
    pub model: T,
}

pub fn model_to_json<T: Serialize + ModelType>(model: &T, config: serde_json::Value) -> Result<String> {
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        model_type: T::TYPE_NAME.to_string(),
        config,
        model,
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn model_from_json<T: DeserializeOwned + ModelType>(json: &str) -> Result<ModelFile<T>> {
    let file: ModelFile<T> = serde_json::from_str(json)?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "model schema version {} (expected {MODEL_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    if file.model_type != T::TYPE_NAME {
        return Err(Error::Schema(format!(
            "model type {:?} (expected {:?})",
            file.model_type,
            T::TYPE_NAME
        )));
    }
    Ok(file)
}

pub fn save_model<T: Serialize + ModelType>(path: impl AsRef<Path>, model: &T, config: serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model, config)?).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: DeserializeOwned + ModelType>(path: impl AsRef<Path>) -> Result<ModelFile<T>> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&json)
}
