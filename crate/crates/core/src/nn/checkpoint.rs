use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ModelState, Network};
use super::spec::ModelSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ADSVCKPT";

/// Architecture plus parameters, Adam moments and step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: ModelSpec,
    pub state: ModelState,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    spec: ModelSpec,
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    step: u64,
}

impl Checkpoint {
    pub fn new(spec: ModelSpec, state: ModelState) -> Self {
        Self { version: CHECKPOINT_VERSION, spec, state }
    }

    /// Rebuilds the network and checks the state against it.
    pub fn network(&self) -> Result<Network> {
        let net = Network::new(self.spec.clone())?;
        net.check_state(&self.state)?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let header = BinaryHeader {
            spec: self.spec.clone(),
            names: self.state.names.clone(),
            shapes: self.state.params.iter().map(|p| p.shape.clone()).collect(),
            step: self.state.step,
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for group in [&self.state.params, &self.state.first_moment, &self.state.second_moment] {
            for t in group {
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a binary checkpoint"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: BinaryHeader = serde_json::from_slice(body)?;
        let mut pos = 20 + hlen;
        let mut read_group = || -> Result<Vec<Tensor>> {
            let mut group = Vec::with_capacity(header.shapes.len());
            for shape in &header.shapes {
                let n: usize = shape.iter().product();
                let raw = bytes.get(pos..pos + 8 * n).ok_or_else(|| bad("truncated tensor data"))?;
                pos += 8 * n;
                let data = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                group.push(Tensor::from_vec(shape, data));
            }
            Ok(group)
        };
        let params = read_group()?;
        let first_moment = read_group()?;
        let second_moment = read_group()?;
        if pos != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        let state = ModelState { names: header.names, params, first_moment, second_moment, step: header.step };
        Ok(Self { version, spec: header.spec, state })
    }

    /// Writes JSON for `.json` paths and the binary format otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) { self.to_json()?.into_bytes() } else { self.to_binary()? };
        crate::features::io::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if is_json(path) {
            Self::from_json(std::str::from_utf8(&bytes).map_err(|e| Error::Checkpoint(e.to_string()))?)
        } else {
            Self::from_binary(&bytes)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}
