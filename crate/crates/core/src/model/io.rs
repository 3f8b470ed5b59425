//! JSON model files (`"format": "pbn-1"`).
//!
//! Truth tables are hex strings of `ceil(2^k / 4)` digits, most significant
//! digit first, so the least significant bit of the last digit is the entry
//! for all parents equal to zero.

use serde::{Deserialize, Serialize};

use super::{PbnModel, PredictorFunction, TruthTable, MAX_PARENTS};
use crate::error::ModelError;

pub const MODEL_FORMAT: &str = "pbn-1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    n: usize,
    perturbation: f64,
    nodes: Vec<Vec<FunctionEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionEntry {
    parents: Vec<usize>,
    table: String,
    prob: f64,
}

fn encode_table(table: &TruthTable) -> String {
    let digits = table.len().div_ceil(4);
    let mut out = String::with_capacity(digits);
    for d in (0..digits).rev() {
        let mut v = 0u32;
        for b in 0..4 {
            let k = 4 * d + b;
            if k < table.len() && table.get(k) {
                v |= 1 << b;
            }
        }
        out.push(char::from_digit(v, 16).expect("nibble"));
    }
    out
}

fn decode_table(hex: &str, arity: usize, field: &str) -> Result<TruthTable, ModelError> {
    let len = 1usize << arity;
    let digits = len.div_ceil(4);
    if hex.len() != digits {
        return Err(ModelError::Field {
            field: field.to_string(),
            message: format!(
                "truth table for {arity} parents needs {digits} hex digits, found {}",
                hex.len()
            ),
        });
    }
    let mut table = TruthTable::zeros(len);
    for (pos, ch) in hex.chars().rev().enumerate() {
        let v = ch.to_digit(16).ok_or_else(|| ModelError::Field {
            field: field.to_string(),
            message: format!("invalid hex digit {ch:?}"),
        })?;
        for b in 0..4 {
            if v >> b & 1 == 1 {
                let k = 4 * pos + b;
                if k >= len {
                    return Err(ModelError::Field {
                        field: field.to_string(),
                        message: format!("bit {k} set beyond the {len}-entry table"),
                    });
                }
                table.set(k, true);
            }
        }
    }
    Ok(table)
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<PbnModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.format != MODEL_FORMAT {
        return Err(ModelError::Field {
            field: "format".into(),
            message: format!("expected {MODEL_FORMAT:?}, found {:?}", file.format),
        });
    }
    if file.nodes.len() != file.n {
        return Err(ModelError::Field {
            field: "nodes".into(),
            message: format!("{} entries for n = {}", file.nodes.len(), file.n),
        });
    }
    let mut functions = Vec::with_capacity(file.n);
    for (i, entries) in file.nodes.into_iter().enumerate() {
        let mut set = Vec::with_capacity(entries.len());
        for (j, e) in entries.into_iter().enumerate() {
            let field = format!("nodes[{i}][{j}].table");
            if e.parents.len() > MAX_PARENTS {
                return Err(ModelError::Field {
                    field: format!("nodes[{i}][{j}].parents"),
                    message: format!(
                        "{} parents exceed the supported maximum {MAX_PARENTS}",
                        e.parents.len()
                    ),
                });
            }
            let table = decode_table(&e.table, e.parents.len(), &field)?;
            set.push(PredictorFunction::new(e.parents, table, e.prob));
        }
        functions.push(set);
    }
    let model = PbnModel {
        n: file.n,
        functions,
        perturbation: file.perturbation,
        names: file.names,
    };
    let violations = model.validate();
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Invalid(violations))
    }
}

pub fn serialize_model(model: &PbnModel) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        n: model.n,
        perturbation: model.perturbation,
        nodes: model
            .functions
            .iter()
            .map(|set| {
                set.iter()
                    .map(|f| FunctionEntry {
                        parents: f.parents.clone(),
                        table: encode_table(&f.table),
                        prob: f.probability,
                    })
                    .collect()
            })
            .collect(),
        names: model.names.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serialises")
}
