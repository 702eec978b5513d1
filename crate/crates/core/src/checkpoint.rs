//! Model files: JSON holding the format version, the model configuration,
//! the vocabularies and every parameter value keyed by its hierarchical name.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{LhrModel, ModelConfig};
use crate::nn::Tensor;
use crate::vocab::Vocabularies;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    value: Tensor,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    config: ModelConfig,
    vocab: Vocabularies,
    parameters: Vec<NamedTensor>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn to_json(model: &LhrModel) -> Result<String> {
    let checkpoint = Checkpoint {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        parameters: model
            .store
            .iter()
            .map(|(_, p)| NamedTensor {
                name: p.name().to_owned(),
                value: p.value.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&checkpoint)?)
}

pub fn from_json(text: &str) -> Result<LhrModel> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: probe.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let checkpoint: Checkpoint = serde_json::from_str(text)?;
    let mut model = LhrModel::new(checkpoint.config, checkpoint.vocab)?;
    if checkpoint.parameters.len() != model.store.len() {
        return Err(Error::InvalidInput(format!(
            "checkpoint has {} parameters, model expects {}",
            checkpoint.parameters.len(),
            model.store.len()
        )));
    }
    for named in checkpoint.parameters {
        let id = model
            .store
            .id(&named.name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{}`", named.name)))?;
        let param = model.store.get_mut(id);
        if param.value.shape() != named.value.shape() {
            return Err(Error::Dimension(format!(
                "parameter `{}` has shape {:?}, checkpoint holds {:?}",
                named.name,
                param.value.shape(),
                named.value.shape()
            )));
        }
        param.value = named.value;
    }
    Ok(model)
}

pub fn save(model: &LhrModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<LhrModel> {
    from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{dog_sentence, small_model};

    #[test]
    fn round_trip_is_exact() {
        let model = small_model(8);
        let back = from_json(&to_json(&model).unwrap()).unwrap();
        for ((_, a), (_, b)) in model.store.iter().zip(back.store.iter()) {
            assert_eq!(a.name(), b.name());
            assert_eq!(a.value, b.value);
        }
        assert_eq!(
            model.encode_sentence(&dog_sentence()).unwrap(),
            back.encode_sentence(&dog_sentence()).unwrap()
        );
    }

    #[test]
    fn names_are_hierarchical() {
        let model = small_model(8);
        for name in [
            "context_encoder.forward.w",
            "context_encoder.reverse.b",
            "heads_encoder.forward.w",
            "head_reducer.w",
            "root_vector",
            "labeler.hidden.w",
            "labeler.labels.b",
            "labeler.pos.w",
            "token_encoder.words",
            "token_encoder.pos",
        ] {
            assert!(model.store.id(name).is_some(), "{name}");
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let model = small_model(8);
        let text = to_json(&model).unwrap().replacen(
            &format!("\"format_version\":{FORMAT_VERSION}"),
            "\"format_version\":99",
            1,
        );
        assert!(matches!(
            from_json(&text),
            Err(Error::FormatVersion { found: 99, .. })
        ));
    }
}
