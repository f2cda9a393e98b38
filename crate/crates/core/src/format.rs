//! JSON file formats. Files use 1-based vertex and label indices; everything
//! in memory is 0-based.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decompose::{DecomposedInstance, Destination, Thresholds};
use crate::error::{Error, Result};
use crate::instance::{BipartiteHyperedge, BipartiteXorInstance, HypergraphMatching, XorInstance};
use crate::sets::VertexSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub delta: f64,
    pub hypergraphs: Vec<Vec<Vec<u32>>>,
    pub signs: Option<Vec<i8>>,
    /// Echo of the command configuration that produced the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteEdgeFile {
    pub left: Vec<u32>,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteFile {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub s: usize,
    pub delta: f64,
    pub labels: Vec<Vec<u32>>,
    pub hypergraphs: Vec<Vec<BipartiteEdgeFile>>,
    pub signs: Option<Vec<i8>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposedFile {
    pub tool_version: String,
    pub thresholds: Thresholds,
    pub leftover: InstanceFile,
    pub pieces: BTreeMap<usize, BipartiteFile>,
    pub registries: BTreeMap<usize, Vec<Vec<u32>>>,
    pub provenance: Vec<Vec<Destination>>,
}

fn to_zero_based(set: &[u32], bound: usize, what: &str) -> Result<VertexSet> {
    let mut out = Vec::with_capacity(set.len());
    for &v in set {
        if v == 0 || v as usize > bound {
            return Err(Error::InvalidInstance(format!(
                "{what} index {v} outside 1..={bound}"
            )));
        }
        out.push(v - 1);
    }
    VertexSet::new(out).ok_or_else(|| Error::InvalidInstance(format!("repeated index in {what} {set:?}")))
}

impl InstanceFile {
    pub fn from_instance(inst: &XorInstance) -> Self {
        InstanceFile {
            tool_version: Some(crate::TOOL_VERSION.to_string()),
            n: inst.n,
            k: inst.k(),
            q: inst.q,
            delta: inst.delta,
            hypergraphs: inst
                .hypergraphs
                .iter()
                .map(|h| h.iter().map(VertexSet::to_one_based).collect())
                .collect(),
            signs: inst.signs.clone(),
            config: None,
        }
    }

    pub fn to_instance(&self) -> Result<XorInstance> {
        if self.hypergraphs.len() != self.k {
            return Err(Error::Dimension {
                what: "hypergraphs",
                got: self.hypergraphs.len(),
                expected: self.k,
            });
        }
        let hypergraphs = self
            .hypergraphs
            .iter()
            .map(|h| {
                h.iter()
                    .map(|c| to_zero_based(c, self.n, "vertex"))
                    .collect::<Result<Vec<_>>>()
                    .map(HypergraphMatching::new)
            })
            .collect::<Result<Vec<_>>>()?;
        XorInstance::new(self.n, self.q, self.delta, hypergraphs, self.signs.clone())
    }
}

impl BipartiteFile {
    pub fn from_instance(inst: &BipartiteXorInstance) -> Self {
        BipartiteFile {
            n: inst.n,
            k: inst.k(),
            q: inst.q,
            s: inst.s,
            delta: inst.delta,
            labels: inst.registry.iter().map(VertexSet::to_one_based).collect(),
            hypergraphs: inst
                .hypergraphs
                .iter()
                .map(|h| {
                    h.iter()
                        .map(|e| BipartiteEdgeFile {
                            left: e.left.to_one_based(),
                            p: e.label + 1,
                        })
                        .collect()
                })
                .collect(),
            signs: inst.signs.clone(),
        }
    }

    pub fn to_instance(&self) -> Result<BipartiteXorInstance> {
        let registry = self
            .labels
            .iter()
            .map(|p| to_zero_based(p, self.n, "label vertex"))
            .collect::<Result<Vec<_>>>()?;
        let mut hypergraphs = Vec::with_capacity(self.hypergraphs.len());
        for h in &self.hypergraphs {
            let mut edges = Vec::with_capacity(h.len());
            for e in h {
                if e.p == 0 || e.p > registry.len() {
                    return Err(Error::UnknownLabel {
                        label: e.p,
                        len: registry.len(),
                    });
                }
                edges.push(BipartiteHyperedge {
                    left: to_zero_based(&e.left, self.n, "vertex")?,
                    label: e.p - 1,
                });
            }
            hypergraphs.push(edges);
        }
        let inst = BipartiteXorInstance {
            n: self.n,
            q: self.q,
            s: self.s,
            delta: self.delta,
            registry,
            hypergraphs,
            signs: self.signs.clone(),
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl DecomposedFile {
    pub fn from_decomposed(dec: &DecomposedInstance) -> Self {
        DecomposedFile {
            tool_version: crate::TOOL_VERSION.to_string(),
            thresholds: dec.thresholds.clone(),
            leftover: InstanceFile::from_instance(&dec.leftover),
            pieces: dec
                .pieces
                .iter()
                .map(|(&s, p)| (s, BipartiteFile::from_instance(p)))
                .collect(),
            registries: dec
                .pieces
                .iter()
                .map(|(&s, p)| (s, p.registry.iter().map(VertexSet::to_one_based).collect()))
                .collect(),
            provenance: dec.provenance.clone(),
        }
    }

    pub fn to_decomposed(&self) -> Result<DecomposedInstance> {
        let pieces = self
            .pieces
            .iter()
            .map(|(&s, p)| p.to_instance().map(|inst| (s, inst)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(DecomposedInstance {
            thresholds: self.thresholds.clone(),
            leftover: self.leftover.to_instance()?,
            pieces,
            provenance: self.provenance.clone(),
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<XorInstance> {
    read_json::<InstanceFile>(path)?.to_instance()
}

pub fn write_instance(path: &Path, inst: &XorInstance) -> Result<()> {
    write_json(path, &InstanceFile::from_instance(inst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_random_bipartite_instance, generate_random_matching_instance};

    #[test]
    fn instance_round_trip() {
        let inst = generate_random_matching_instance(12, 3, 4, 0.25, 1).unwrap();
        let file = InstanceFile::from_instance(&inst);
        assert!(file.hypergraphs.iter().flatten().flatten().all(|&v| v >= 1));
        let text = serde_json::to_string(&file).unwrap();
        let back: InstanceFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_instance().unwrap(), inst);
    }

    #[test]
    fn bipartite_round_trip() {
        let inst = generate_random_bipartite_instance(8, 3, 2, 3, 0.25, 4, 2).unwrap();
        let file = BipartiteFile::from_instance(&inst);
        assert_eq!(file.to_instance().unwrap(), inst);
    }

    #[test]
    fn rejects_zero_index() {
        let text = r#"{"n":3,"k":1,"q":3,"delta":0.3,"hypergraphs":[[[0,1,2]]],"signs":null}"#;
        let file: InstanceFile = serde_json::from_str(text).unwrap();
        assert!(file.to_instance().is_err());
        let text = r#"{"n":3,"k":1,"q":3,"delta":0.3,"hypergraphs":[[[1,2,3]]],"signs":null}"#;
        let file: InstanceFile = serde_json::from_str(text).unwrap();
        assert_eq!(file.to_instance().unwrap().total_edges(), 1);
    }
}
