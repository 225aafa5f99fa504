//! JSON and CSV emission with a fixed float format.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` exactly. Object keys come out sorted because reports are
//! routed through `serde_json::Value`, whose map is ordered.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// 17-significant-digit scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON formatter that writes floats with [`format_f64`].
pub struct ExactFloatFormatter {
    inner: PrettyFormatter<'static>,
    pretty: bool,
}

impl ExactFloatFormatter {
    pub fn pretty() -> Self {
        Self {
            inner: PrettyFormatter::new(),
            pretty: true,
        }
    }

    pub fn compact() -> Self {
        Self {
            inner: PrettyFormatter::new(),
            pretty: false,
        }
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident : $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                if self.pretty {
                    self.inner.$name(writer $(, $arg)*)
                } else {
                    serde_json::ser::CompactFormatter.$name(writer $(, $arg)*)
                }
            }
        )*
    };
}

impl Formatter for ExactFloatFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn write_with<T: Serialize + ?Sized>(value: &T, f: ExactFloatFormatter) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, f);
    value.serialize(&mut ser)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = write_with(value, ExactFloatFormatter::pretty())?;
    s.push('\n');
    Ok(s)
}

pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    write_with(value, ExactFloatFormatter::compact())
}

/// SHA-256 hex digest of the compact JSON encoding of `value`.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let canonical = to_json_compact(&serde_json::to_value(value)?)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::BadConfig(format!("unknown format '{other}'"))),
        }
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (None, Some(i), _) => i.to_string(),
            (None, None, Some(f)) => format_f64(f),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        Value::Array(_) | Value::Object(_) => None,
    }
}

/// Scalar leaves of an object, nested objects flattened with dotted keys.
/// Arrays are skipped.
pub fn flatten_scalars(obj: &Map<String, Value>, prefix: &str, out: &mut Vec<(String, String)>) {
    for (k, v) in obj {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Object(inner) => flatten_scalars(inner, &key, out),
            other => {
                if let Some(t) = scalar_text(other) {
                    out.push((key, t));
                }
            }
        }
    }
}

/// One CSV table: the report's scalar fields repeated on every row, followed
/// by the scalar fields of each entry of the array at `table_key`.
pub fn to_csv(report: &Value, table_key: Option<&str>) -> Result<String> {
    let obj = report
        .as_object()
        .ok_or_else(|| Error::Format("report must be a JSON object".into()))?;
    let mut top = Vec::new();
    let filtered: Map<String, Value> = obj
        .iter()
        .filter(|(k, _)| Some(k.as_str()) != table_key)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    flatten_scalars(&filtered, "", &mut top);

    let rows: Vec<Vec<(String, String)>> = match table_key.and_then(|k| obj.get(k)) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| {
                let mut cells = Vec::new();
                match item {
                    Value::Object(o) => flatten_scalars(o, table_key.unwrap_or("row"), &mut cells),
                    other => {
                        if let Some(t) = scalar_text(other) {
                            cells.push((table_key.unwrap_or("row").to_string(), t));
                        }
                    }
                }
                cells
            })
            .collect(),
        _ => Vec::new(),
    };

    let mut header: Vec<String> = top.iter().map(|(k, _)| k.clone()).collect();
    for row in &rows {
        for (k, _) in row {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(csv_err)?;
    let emit = |w: &mut csv::Writer<Vec<u8>>, row: &[(String, String)]| -> Result<()> {
        let record: Vec<String> = header
            .iter()
            .map(|h| {
                top.iter()
                    .chain(row.iter())
                    .find(|(k, _)| k == h)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default()
            })
            .collect();
        w.write_record(&record).map_err(csv_err)
    };
    if rows.is_empty() {
        emit(&mut w, &[])?;
    } else {
        for row in &rows {
            emit(&mut w, row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Renders a report in the requested format.
pub fn render<T: Serialize>(report: &T, format: OutputFormat, table_key: Option<&str>) -> Result<String> {
    let value = serde_json::to_value(report)?;
    match format {
        OutputFormat::Json => to_json_pretty(&value),
        OutputFormat::Csv => to_csv(&value, table_key),
    }
}
