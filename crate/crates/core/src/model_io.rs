//! Model persistence: one JSON document holding the config, flat row-major
//! weight arrays, the readout, and the stochastic layer set. Floats are
//! written as decimals with 17 significant digits so files round-trip f64
//! exactly and byte-identically across runs.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::backbone::{BackboneError, ModelBundle};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("model file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model file is inconsistent: {0}")]
    Invalid(#[from] BackboneError),
}

/// serde_json formatter that renders every f64 with 17 significant digits.
struct SigDigits17;

impl serde_json::ser::Formatter for SigDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize a model to the canonical JSON string.
pub fn model_to_json(model: &ModelBundle) -> Result<String, ModelIoError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits17);
    serde::Serialize::serialize(model, &mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serializer emits UTF-8"))
}

pub fn save_model(model: &ModelBundle, path: &Path) -> Result<(), ModelIoError> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelBundle, ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    let model: ModelBundle = serde_json::from_str(&text)?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::{fit_readout, init_encoder, EncoderConfig, InputCase};

    fn fitted_model() -> ModelBundle {
        let cfg = EncoderConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            n_tokens: 3,
            seed: 41,
        };
        let m = init_encoder(&cfg).unwrap();
        let train: Vec<InputCase> = (0..12)
            .map(|i| InputCase::new(vec![i as f64 * 0.3 - 2.0], Some((i as f64).sin())))
            .collect();
        fit_readout(&m, &train, 1e-3)
            .unwrap()
            .with_all_layers_stochastic()
    }

    #[test]
    fn roundtrip_is_exact() {
        let model = fitted_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn serialization_is_byte_stable() {
        let model = fitted_model();
        assert_eq!(model_to_json(&model).unwrap(), model_to_json(&model).unwrap());
    }

    #[test]
    fn floats_carry_17_significant_digits() {
        let model = fitted_model();
        let text = model_to_json(&model).unwrap();
        // Every float is rendered in scientific notation with 16 fraction
        // digits, e.g. -4.4147073293559619e-2.
        let sample = text
            .split(|c| c == '[' || c == ',' || c == ']')
            .find(|tok| tok.contains('e') && tok.contains('.'))
            .unwrap();
        let frac = sample.split('.').nth(1).unwrap();
        let digits = frac.split('e').next().unwrap();
        assert_eq!(digits.len(), 16, "token {sample}");
    }

    #[test]
    fn invalid_shapes_rejected_on_load() {
        let mut model = fitted_model();
        model.readout.weights.pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        assert!(matches!(load_model(&path), Err(ModelIoError::Invalid(_))));
    }
}
