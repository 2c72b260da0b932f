//! Checkpoint files: a UTF-8 key-value header followed by raw tensor data.
//!
//! ```text
//! HRIR-TCN-CHECKPOINT 1
//! config.channels=32
//! ...
//! meta.direction_deg=60
//! tensor.blocks.0.conv1.weight=f32 32x2x2 offset=0 bytes=512
//! ...
//! data_bytes=123456
//! end
//! <little-endian f32 tensor data>
//! ```
//!
//! Tensor offsets count bytes from the first byte after the `end` line. The
//! tensor directory must match the layout implied by the config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Activation, DropoutKind, TcnConfig};
use super::model::TcnModel;
use crate::error::{Error, Result};

const MAGIC: &str = "HRIR-TCN-CHECKPOINT 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TcnModel,
    pub metadata: BTreeMap<String, String>,
}

/// Serializes `model`. Parameters are written as `f32`; models produced by
/// [`TcnModel::new`] or training already hold `f32` values, so they reload
/// bit-exactly.
pub fn to_bytes(model: &TcnModel, metadata: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let c = model.config();
    let mut header = String::new();
    let mut line = |k: &str, v: String| {
        header.push_str(k);
        header.push('=');
        header.push_str(&v);
        header.push('\n');
    };
    line("config.kernel_size", c.kernel_size.to_string());
    line("config.channels", c.channels.to_string());
    line("config.layers", c.layers.to_string());
    line("config.dropout", c.dropout.to_string());
    line("config.dropout_kind", c.dropout_kind.as_str().to_string());
    line("config.weight_decay", c.weight_decay.to_string());
    line("config.learning_rate", c.learning_rate.to_string());
    line("config.epochs", c.epochs.to_string());
    line("config.in_channels", c.in_channels.to_string());
    line("config.out_channels", c.out_channels.to_string());
    line("config.hidden_activation", c.hidden_activation.as_str().to_string());
    line("config.seed", c.seed.to_string());
    for (k, v) in metadata {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::invalid(format!("metadata entry `{k}` is not header-safe")));
        }
        line(&format!("meta.{k}"), v.clone());
    }
    for t in model.tensors() {
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        line(
            &format!("tensor.{}", t.name),
            format!("f32 {} offset={} bytes={}", dims.join("x"), t.offset * 4, t.numel() * 4),
        );
    }
    line("data_bytes", (model.num_params() * 4).to_string());

    let mut out = format!("{MAGIC}\n{header}end\n").into_bytes();
    out.reserve(model.num_params() * 4);
    for &p in model.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    parse(bytes).map_err(|message| Error::Checkpoint {
        path: PathBuf::from("<memory>"),
        message,
    })
}

pub fn save(path: impl AsRef<Path>, model: &TcnModel, metadata: &BTreeMap<String, String>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(model, metadata)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes).map_err(|message| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}

fn parse(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let end_marker = b"\nend\n";
    let split = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .ok_or("missing `end` header terminator")?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| "header is not UTF-8")?;
    let data = &bytes[split + end_marker.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err("not a checkpoint (bad magic line)".into());
    }
    let mut config_fields = BTreeMap::new();
    let mut metadata = BTreeMap::new();
    let mut tensors = Vec::new();
    let mut data_bytes = None;
    for l in lines {
        let (k, v) = l.split_once('=').ok_or_else(|| format!("malformed header line `{l}`"))?;
        if let Some(name) = k.strip_prefix("config.") {
            config_fields.insert(name.to_string(), v.to_string());
        } else if let Some(name) = k.strip_prefix("meta.") {
            metadata.insert(name.to_string(), v.to_string());
        } else if let Some(name) = k.strip_prefix("tensor.") {
            tensors.push((name.to_string(), v.to_string()));
        } else if k == "data_bytes" {
            data_bytes = Some(v.parse::<usize>().map_err(|e| format!("data_bytes: {e}"))?);
        } else {
            return Err(format!("unknown header key `{k}`"));
        }
    }

    let field = |name: &str| -> std::result::Result<&String, String> {
        config_fields.get(name).ok_or_else(|| format!("missing config.{name}"))
    };
    fn num<T: std::str::FromStr>(name: &str, v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("config.{name}: cannot parse `{v}`"))
    }
    let config = TcnConfig {
        kernel_size: num("kernel_size", field("kernel_size")?)?,
        channels: num("channels", field("channels")?)?,
        layers: num("layers", field("layers")?)?,
        dropout: num("dropout", field("dropout")?)?,
        dropout_kind: DropoutKind::parse(field("dropout_kind")?).ok_or("config.dropout_kind: unknown kind")?,
        weight_decay: num("weight_decay", field("weight_decay")?)?,
        learning_rate: num("learning_rate", field("learning_rate")?)?,
        epochs: num("epochs", field("epochs")?)?,
        in_channels: num("in_channels", field("in_channels")?)?,
        out_channels: num("out_channels", field("out_channels")?)?,
        hidden_activation: Activation::parse(field("hidden_activation")?)
            .ok_or("config.hidden_activation: unknown activation")?,
        seed: num("seed", field("seed")?)?,
    };

    let mut model = TcnModel::zeros(config).map_err(|e| e.to_string())?;
    let expected_bytes = model.num_params() * 4;
    if data_bytes != Some(expected_bytes) || data.len() != expected_bytes {
        return Err(format!(
            "tensor data is {} bytes (declared {:?}), layout needs {expected_bytes}",
            data.len(),
            data_bytes
        ));
    }
    if tensors.len() != model.tensors().len() {
        return Err(format!(
            "directory lists {} tensors, layout has {}",
            tensors.len(),
            model.tensors().len()
        ));
    }
    for ((name, desc), info) in tensors.iter().zip(model.tensors()) {
        let dims: Vec<String> = info.shape.iter().map(|d| d.to_string()).collect();
        let expected = format!(
            "f32 {} offset={} bytes={}",
            dims.join("x"),
            info.offset * 4,
            info.numel() * 4
        );
        if *name != info.name || *desc != expected {
            return Err(format!(
                "tensor entry `{name}={desc}` does not match layout `{}={expected}`",
                info.name
            ));
        }
    }
    for (p, chunk) in model.params_mut().iter_mut().zip(data.chunks_exact(4)) {
        *p = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
    }
    Ok(Checkpoint { model, metadata })
}
