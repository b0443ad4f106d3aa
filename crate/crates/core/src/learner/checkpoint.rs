//! Plain-text network checkpoints.
//!
//! ```text
//! CEDA-CKPT v1
//! 280 256 256 128 5
//! <layer 0 weights, row-major> <layer 0 biases> <layer 1 weights> ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a reload
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::network::{Dense, QNetwork};
use crate::error::{Error, Result};

pub const HEADER: &str = "CEDA-CKPT v1";

pub fn encode(net: &QNetwork) -> String {
    let mut s = String::with_capacity(net.param_count() * 24);
    s.push_str(HEADER);
    s.push('\n');
    let dims: Vec<String> = net.dims().iter().map(usize::to_string).collect();
    s.push_str(&dims.join(" "));
    s.push('\n');
    for layer in net.layers() {
        for row in layer.weights.chunks(layer.inputs) {
            push_values(&mut s, row);
        }
        push_values(&mut s, &layer.bias);
    }
    s
}

fn push_values(s: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").expect("writing to a String cannot fail");
    }
    s.push('\n');
}

pub fn decode(text: &str) -> std::result::Result<QNetwork, String> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some(HEADER) => {}
        Some(h) if h.starts_with("CEDA-CKPT") => return Err(format!("unsupported version `{h}`")),
        _ => return Err("missing `CEDA-CKPT v1` header".into()),
    }
    let dims: Vec<usize> = lines
        .next()
        .ok_or("missing layer dims")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad layer dim `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(format!("invalid layer dims {dims:?}"));
    }
    let mut values =
        lines.flat_map(str::split_whitespace).map(|t| t.parse::<f64>().map_err(|_| format!("bad value `{t}`")));
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let mut take = |n: usize| -> std::result::Result<Vec<f64>, String> {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(values.next().ok_or("file ends before all parameters were read")??);
            }
            Ok(v)
        };
        let weights = take(inputs * outputs)?;
        let bias = take(outputs)?;
        layers.push(Dense { inputs, outputs, weights, bias });
    }
    if values.next().is_some() {
        return Err("trailing values after the last layer".into());
    }
    QNetwork::from_layers(layers).map_err(|e| e.to_string())
}

/// Writes via a temporary sibling and rename so readers never see a partial file.
pub fn save_checkpoint(net: &QNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("ckpt.tmp");
    std::fs::write(&tmp, encode(net)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<QNetwork> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text).map_err(|msg| Error::Checkpoint { path: path.to_path_buf(), msg })
}
