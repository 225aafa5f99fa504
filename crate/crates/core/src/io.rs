//! Model and dataset files, and the IDX image/label container.
//!
//! Models are stored as `nnwb-v1` JSON with weights printed at 17 significant
//! digits, so a load/save cycle is bit-exact. Datasets use `nnds-v1` JSON or a
//! CSV with a `label` column followed by the input coordinates.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelMap};
use crate::error::{Error, Result};
use crate::linalg::WeightMatrix;
use crate::nn::Network;
use crate::report::to_json_pretty;

pub const MODEL_FORMAT: &str = "nnwb-v1";
pub const DATASET_FORMAT: &str = "nnds-v1";
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    /// SHA-256 of the training configuration.
    pub config_digest: String,
    pub created_unix: u64,
}

#[derive(Serialize, Deserialize)]
struct LayerBlock {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    layers: Vec<LayerBlock>,
    head: LayerBlock,
    metadata: ModelMetadata,
}

fn block(w: &WeightMatrix) -> LayerBlock {
    LayerBlock {
        rows: w.rows(),
        cols: w.cols(),
        data: w.data().to_vec(),
    }
}

fn unblock(b: LayerBlock, what: &str) -> Result<WeightMatrix> {
    WeightMatrix::new(b.rows, b.cols, b.data).map_err(|e| Error::Format(format!("{what}: {e}")))
}

pub fn model_to_string(net: &Network, meta: &ModelMetadata) -> Result<String> {
    to_json_pretty(&ModelFile {
        format: MODEL_FORMAT.to_string(),
        layers: net.hidden().iter().map(block).collect(),
        head: block(net.head()),
        metadata: meta.clone(),
    })
}

pub fn model_from_str(text: &str) -> Result<(Network, ModelMetadata)> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "unknown model format '{}', expected '{MODEL_FORMAT}'",
            file.format
        )));
    }
    let hidden = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, b)| unblock(b, &format!("layer {i}")))
        .collect::<Result<Vec<_>>>()?;
    let head = unblock(file.head, "head")?;
    let net = Network::new(hidden, head).map_err(|e| Error::Format(e.to_string()))?;
    Ok((net, file.metadata))
}

pub fn save_model(path: &Path, net: &Network, meta: &ModelMetadata) -> Result<()> {
    std::fs::write(path, model_to_string(net, meta)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Network, ModelMetadata)> {
    model_from_str(&std::fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    num_classes: usize,
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

pub fn dataset_to_string(d: &Dataset) -> Result<String> {
    to_json_pretty(&DatasetFile {
        format: DATASET_FORMAT.to_string(),
        num_classes: d.num_classes,
        inputs: d.inputs.clone(),
        labels: d.labels.clone(),
    })
}

pub fn dataset_to_csv(d: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((0..d.dim()).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for (x, l) in d.inputs.iter().zip(&d.labels) {
        let mut rec = vec![l.to_string()];
        rec.extend(x.iter().map(|v| crate::report::format_f64(*v)));
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn dataset_from_csv(text: &str, num_classes: Option<usize>) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let bad = |what: &str| Error::Format(format!("row {i}: bad {what}"));
        let mut it = rec.iter();
        let label: usize = it.next().ok_or_else(|| bad("label"))?.trim().parse().map_err(|_| bad("label"))?;
        let x = it
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("value")))
            .collect::<Result<Vec<_>>>()?;
        labels.push(label);
        inputs.push(x);
    }
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1).max(2));
    Dataset::new(inputs, labels, classes).map_err(|e| Error::Format(e.to_string()))
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if file.format != DATASET_FORMAT {
        return Err(Error::Format(format!(
            "unknown dataset format '{}', expected '{DATASET_FORMAT}'",
            file.format
        )));
    }
    Dataset::new(file.inputs, file.labels, file.num_classes).map_err(|e| Error::Format(e.to_string()))
}

/// Loads `nnds-v1` JSON, or CSV when the extension is `.csv`.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        dataset_from_csv(&text, None)
    } else {
        dataset_from_str(&text)
    }
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    r.read_u32::<BigEndian>()
        .map_err(|_| Error::Format(format!("truncated IDX header ({what})")))
}

fn read_payload(r: &mut impl Read, len: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("truncated IDX {what} payload: expected {len} bytes")))?;
    Ok(buf)
}

fn check_magic(r: &mut impl Read, expected: u32, what: &str) -> Result<()> {
    let magic = read_u32(r, "magic")?;
    if magic != expected {
        return Err(Error::Format(format!(
            "{what} file has magic 0x{magic:08X}, expected 0x{expected:08X}"
        )));
    }
    Ok(())
}

/// Reads an IDX image file and label file. Pixels are scaled to `[0, 1]`.
pub fn parse_idx(images: &Path, labels: &Path, label_map: Option<LabelMap>) -> Result<Dataset> {
    let mut ri = BufReader::new(File::open(images)?);
    check_magic(&mut ri, IDX_IMAGES_MAGIC, "image")?;
    let n = read_u32(&mut ri, "count")? as usize;
    let rows = read_u32(&mut ri, "rows")? as usize;
    let cols = read_u32(&mut ri, "cols")? as usize;
    let pixels = read_payload(&mut ri, n * rows * cols, "image")?;

    let mut rl = BufReader::new(File::open(labels)?);
    check_magic(&mut rl, IDX_LABELS_MAGIC, "label")?;
    let nl = read_u32(&mut rl, "count")? as usize;
    if nl != n {
        return Err(Error::Format(format!("{n} images but {nl} labels")));
    }
    let raw_labels = read_payload(&mut rl, n, "label")?;

    let dim = rows * cols;
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|i| pixels[i * dim..(i + 1) * dim].iter().map(|&p| p as f64 / 255.0).collect())
        .collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(10);
    let d = Dataset::new(inputs, labels, classes).map_err(|e| Error::Format(e.to_string()))?;
    match label_map {
        Some(m) => d.map_labels(m),
        None => Ok(d),
    }
}
