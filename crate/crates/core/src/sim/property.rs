use serde::{Deserialize, Serialize};

use crate::error::PropertyError;
use crate::model::NetworkState;

/// A set of states given by fixing some node values. States in the set form
/// meta state 1, everything else meta state 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaProperty {
    pub name: String,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub node: usize,
    #[serde(with = "bit_value")]
    pub value: bool,
}

mod bit_value {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(de::Error::custom(format!("node value must be 0 or 1, got {v}"))),
        }
    }
}

impl MetaProperty {
    pub fn new(name: impl Into<String>, constraints: &[(usize, bool)]) -> Self {
        Self {
            name: name.into(),
            constraints: constraints
                .iter()
                .map(|&(node, value)| Constraint { node, value })
                .collect(),
        }
    }

    /// The property satisfied by every state.
    pub fn all(name: impl Into<String>) -> Self {
        Self::new(name, &[])
    }

    pub fn is_trivial(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn check(&self, n: usize) -> Result<(), PropertyError> {
        let mut seen = vec![false; n];
        for c in &self.constraints {
            if c.node >= n {
                return Err(PropertyError::NodeOutOfRange {
                    name: self.name.clone(),
                    node: c.node,
                    n,
                });
            }
            if std::mem::replace(&mut seen[c.node], true) {
                return Err(PropertyError::DuplicateNode {
                    name: self.name.clone(),
                    node: c.node,
                });
            }
        }
        Ok(())
    }

    pub fn holds(&self, state: &NetworkState) -> bool {
        self.constraints.iter().all(|c| state.get(c.node) == c.value)
    }

    pub(crate) fn compile(&self, n: usize) -> CompiledProperty {
        let words = n.div_ceil(64);
        let mut mask = vec![0u64; words];
        let mut value = vec![0u64; words];
        for c in &self.constraints {
            mask[c.node >> 6] |= 1 << (c.node & 63);
            if c.value {
                value[c.node >> 6] |= 1 << (c.node & 63);
            }
        }
        // Only words that carry constraints need checking.
        let (mut m, mut v, mut idx) = (Vec::new(), Vec::new(), Vec::new());
        for w in 0..words {
            if mask[w] != 0 {
                idx.push(w);
                m.push(mask[w]);
                v.push(value[w]);
            }
        }
        CompiledProperty {
            index: idx,
            mask: m,
            value: v,
        }
    }
}

/// Meta-state abstraction of one state: 1 iff every constraint holds.
pub fn abstract_state(state: &NetworkState, property: &MetaProperty) -> bool {
    property.holds(state)
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledProperty {
    index: Vec<usize>,
    mask: Vec<u64>,
    value: Vec<u64>,
}

impl CompiledProperty {
    #[inline]
    pub(crate) fn holds(&self, state: &NetworkState) -> bool {
        let words = state.words();
        self.index
            .iter()
            .zip(self.mask.iter().zip(&self.value))
            .all(|(&w, (&m, &v))| words[w] & m == v)
    }
}

/// Reads a JSON array of `{name, constraints: [{node, value}]}` objects and
/// checks each property against an `n`-node model.
pub fn parse_properties(text: &str, n: usize) -> Result<Vec<MetaProperty>, PropertyError> {
    let props: Vec<MetaProperty> =
        serde_json::from_str(text).map_err(|e| PropertyError::Syntax(e.to_string()))?;
    for p in &props {
        p.check(n)?;
    }
    Ok(props)
}

pub fn serialize_properties(props: &[MetaProperty]) -> String {
    serde_json::to_string_pretty(props).expect("properties serialise")
}
