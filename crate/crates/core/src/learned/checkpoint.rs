//! λ checkpoint files: one JSON header line, then the flat weight vector as
//! little-endian float64 bytes.

use super::{dense_param_count, FeatureConfig, LearnedOptimizerParams};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    layer_sizes: Vec<usize>,
    feature_config: FeatureConfig,
    weight_count: usize,
}

pub fn save_checkpoint(path: &Path, params: &LearnedOptimizerParams) -> Result<()> {
    params.validate()?;
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        layer_sizes: params.layer_sizes.clone(),
        feature_config: params.feature_config.clone(),
        weight_count: params.mlp_weights.len(),
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    for w in &params.mlp_weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    // Write-then-rename keeps readers from ever seeing a partial file.
    let tmp = path.with_extension("tmp");
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LearnedOptimizerParams> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Parse {
            row: 0,
            col: 0,
            message: "checkpoint missing header line".to_string(),
        })?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint format version {}",
            header.format_version
        )));
    }
    let expected = dense_param_count(&header.layer_sizes);
    if header.weight_count != expected {
        return Err(Error::Structure {
            expected: format!("{expected} weights for layers {:?}", header.layer_sizes),
            actual: format!("header declares {}", header.weight_count),
        });
    }
    let body = &bytes[newline + 1..];
    if body.len() != header.weight_count * 8 {
        return Err(Error::Structure {
            expected: format!("{} weight bytes", header.weight_count * 8),
            actual: format!("{} bytes after header", body.len()),
        });
    }
    let mlp_weights: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let params = LearnedOptimizerParams {
        mlp_weights,
        layer_sizes: header.layer_sizes,
        feature_config: header.feature_config,
    };
    params.validate()?;
    Ok(params)
}
