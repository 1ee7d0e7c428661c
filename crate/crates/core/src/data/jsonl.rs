//! JSONL corpus loading.
//!
//! One JSON object per line. Records carry either a raw text field (hashed
//! into features at load time) or a precomputed numeric feature array; the
//! label field is optional per line. Loading is a pure function of the file
//! bytes and the schema, so repeated loads are identical.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

use super::{featurize_text, Dataset, Example};

/// Field names and featurizer settings for [`load_jsonl`].
#[derive(Debug, Clone, PartialEq)]
pub struct JsonlSchema {
    /// Field holding raw text (string). Consulted when `features_field` is
    /// absent from a record.
    pub text_field: String,
    /// Field holding the class label (string). Missing or null → unlabeled.
    pub label_field: String,
    /// Field holding a precomputed feature array (numbers). Takes precedence
    /// over `text_field` when present in a record.
    pub features_field: String,
    /// Fixed label vocabulary, index order = class order. When `None` the
    /// vocabulary is built from the file in first-appearance order.
    pub vocabulary: Option<Vec<String>>,
    /// Feature dimension for hashed text. Precomputed feature arrays set the
    /// corpus dimension themselves (from the first record); this value only
    /// matters for records that carry text.
    pub dim: usize,
    pub featurizer_seed: u64,
}

impl Default for JsonlSchema {
    fn default() -> Self {
        JsonlSchema {
            text_field: "text".into(),
            label_field: "label".into(),
            features_field: "features".into(),
            vocabulary: None,
            dim: 256,
            featurizer_seed: 0,
        }
    }
}

fn parse_features(value: &Value, line: usize) -> Result<Vec<f64>> {
    let arr = value.as_array().ok_or_else(|| Error::MalformedLine {
        line,
        message: "feature field is not an array".into(),
    })?;
    let mut out = Vec::with_capacity(arr.len());
    for v in arr {
        out.push(v.as_f64().ok_or_else(|| Error::MalformedLine {
            line,
            message: "feature array holds a non-numeric entry".into(),
        })?);
    }
    if out.is_empty() {
        return Err(Error::MalformedLine {
            line,
            message: "feature array is empty".into(),
        });
    }
    Ok(out)
}

/// Loads a JSONL file into a [`Dataset`].
///
/// Example ids are the zero-based line numbers of the records, so a dataset
/// round-trips stably through re-loads. Errors cite the 1-based line number;
/// unknown labels (under a supplied vocabulary) cite the label string.
pub fn load_jsonl(path: &Path, schema: &JsonlSchema) -> Result<Dataset> {
    if schema.dim < 2 {
        return Err(Error::InvalidInput(
            "featurizer dimension must be at least 2".into(),
        ));
    }
    let reader = BufReader::new(std::fs::File::open(path)?);

    let mut vocab: Vec<String> = schema.vocabulary.clone().unwrap_or_default();
    let vocab_is_fixed = schema.vocabulary.is_some();
    let lookup = |vocab: &[String], name: &str| vocab.iter().position(|v| v == name);

    // Corpus dimension, fixed by the first record: a feature array's length,
    // or the hash width for text. Every later record must agree.
    let mut dim: Option<usize> = None;
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Value = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = record.as_object().ok_or_else(|| Error::MalformedLine {
            line: line_no,
            message: "record is not a JSON object".into(),
        })?;

        let features = match obj.get(&schema.features_field) {
            Some(v) if !v.is_null() => {
                let out = parse_features(v, line_no)?;
                match dim {
                    Some(d) if out.len() != d => {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: out.len(),
                        })
                    }
                    _ => dim = Some(out.len()),
                }
                out
            }
            _ => {
                let text = obj
                    .get(&schema.text_field)
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| Error::MalformedLine {
                        line: line_no,
                        message: format!(
                            "missing text field \"{}\" (and no feature array)",
                            schema.text_field
                        ),
                    })?;
                if let Some(d) = dim {
                    if d != schema.dim {
                        return Err(Error::MalformedLine {
                            line: line_no,
                            message: format!(
                                "text record hashes into {} buckets but this corpus carries \
                                 {d}-dimensional feature arrays",
                                schema.dim
                            ),
                        });
                    }
                }
                dim = Some(schema.dim);
                featurize_text(text, schema.dim, schema.featurizer_seed)
            }
        };

        let true_label = match obj.get(&schema.label_field) {
            None | Some(Value::Null) => None,
            Some(Value::String(name)) => match lookup(&vocab, name) {
                Some(idx) => Some(idx),
                None if vocab_is_fixed => return Err(Error::UnknownLabel(name.clone())),
                None => {
                    vocab.push(name.clone());
                    Some(vocab.len() - 1)
                }
            },
            Some(_) => {
                return Err(Error::MalformedLine {
                    line: line_no,
                    message: format!("label field \"{}\" is not a string", schema.label_field),
                })
            }
        };

        examples.push(Example {
            id: idx as u64,
            features,
            true_label,
        });
    }

    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if vocab.is_empty() {
        return Err(Error::InvalidInput(
            "no labels found and no vocabulary supplied; class count is undefined".into(),
        ));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "jsonl".into());
    let dim = dim.expect("nonempty corpus fixes a dimension");
    Dataset::new(name, vocab.len(), dim, vocab, examples)
}
