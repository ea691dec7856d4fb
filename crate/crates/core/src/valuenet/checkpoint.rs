//! Parameter checkpoints.
//!
//! ```text
//! explore-valuenet 1
//! k_neighbors=8
//! edgeconv_dims=64,64,128,256
//! global_dim=512
//! head_dims=256,64,1
//! dynamic_graph=true
//! tensor edgeconv0.weight 64,8
//! <64·8 little-endian f64>
//! tensor edgeconv0.bias 64
//! ...
//! ```
//!
//! Every tensor header line is followed by its raw row-major values and a
//! newline.

use std::path::Path;

use super::{Linear, NetConfig, NetworkParams};
use crate::error::{Error, Result};

const MAGIC: &str = "explore-valuenet";
const VERSION: u32 = 1;

fn join(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

/// Serializes parameters to the checkpoint byte format.
pub fn write_checkpoint(params: &NetworkParams) -> Vec<u8> {
    let cfg = params.config();
    let mut out = format!(
        "{MAGIC} {VERSION}\nk_neighbors={}\nedgeconv_dims={}\nglobal_dim={}\nhead_dims={}\ndynamic_graph={}\n",
        cfg.k_neighbors,
        join(&cfg.edgeconv_dims),
        cfg.global_dim,
        join(&cfg.head_dims),
        cfg.dynamic_graph
    )
    .into_bytes();
    for layer in params.layers() {
        let tensors = [
            (format!("{}.weight", layer.name), join(&[layer.outputs, layer.inputs]), &layer.weight),
            (format!("{}.bias", layer.name), join(&[layer.outputs]), &layer.bias),
        ];
        for (name, shape, values) in tensors {
            out.extend_from_slice(format!("tensor {name} {shape}\n").as_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(b'\n');
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn line(&mut self) -> Result<&str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::Checkpoint(format!("expected `{key}=`, found `{line}`")))
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let need = count * 8 + 1;
        if self.bytes.len() - self.pos < need {
            return Err(Error::Checkpoint("truncated tensor data".into()));
        }
        let data = &self.bytes[self.pos..self.pos + count * 8];
        if self.bytes[self.pos + count * 8] != b'\n' {
            return Err(Error::Checkpoint("tensor data is not newline-terminated".into()));
        }
        self.pos += need;
        Ok(data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad integer `{s}`")))
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(parse_usize).collect()
}

/// Parses the checkpoint byte format.
pub fn read_checkpoint(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader { bytes, pos: 0 };
    let header = r.line()?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::Checkpoint("not a value-network checkpoint".into()))?;
    if version != VERSION.to_string() {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let config = NetConfig {
        k_neighbors: parse_usize(&r.field("k_neighbors")?)?,
        edgeconv_dims: parse_dims(&r.field("edgeconv_dims")?)?,
        global_dim: parse_usize(&r.field("global_dim")?)?,
        head_dims: parse_dims(&r.field("head_dims")?)?,
        dynamic_graph: match r.field("dynamic_graph")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Checkpoint(format!("bad boolean `{other}`"))),
        },
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut layers = Vec::new();
    for (name, inputs, outputs) in config.layout() {
        let mut layer = Linear::zeros(&name, inputs, outputs);
        for (suffix, shape) in [("weight", vec![outputs, inputs]), ("bias", vec![outputs])] {
            let line = r.line()?.to_string();
            let mut parts = line.split(' ');
            let (tag, tname, tshape) = (parts.next(), parts.next(), parts.next());
            let expected = format!("{name}.{suffix}");
            if tag != Some("tensor") || tname != Some(expected.as_str()) {
                return Err(Error::Checkpoint(format!("expected tensor {expected}, found `{line}`")));
            }
            let got = parse_dims(tshape.unwrap_or(""))?;
            if got != shape {
                return Err(Error::Checkpoint(format!("tensor {expected} has shape {got:?}, expected {shape:?}")));
            }
            let values = r.floats(shape.iter().product())?;
            if suffix == "weight" {
                layer.weight = values;
            } else {
                layer.bias = values;
            }
        }
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing data after last tensor".into()));
    }
    NetworkParams::from_layers(config, layers)
}

pub fn save_checkpoint(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(params)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint, rejecting it if its config differs from `expected`.
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&NetConfig>) -> Result<NetworkParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = read_checkpoint(&bytes)?;
    if let Some(cfg) = expected {
        if cfg != params.config() {
            return Err(Error::Checkpoint(format!(
                "{}: config {:?} does not match expected {:?}",
                path.display(),
                params.config(),
                cfg
            )));
        }
    }
    Ok(params)
}
