//! Artifact writers. Tables are CSV with a fixed header, documents are
//! pretty-printed JSON.

use std::fs;
use std::path::Path;

use anyhow::Context;
use hpmlmc::dg::Field;
use serde::Serialize;

pub const FIELD_HEADER: [&str; 6] = ["element", "i", "j", "x", "y", "value"];

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes `header` and then one record per row. Rows must serialize to
/// exactly the header's columns.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct NodeValue {
    element: usize,
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    value: f64,
}

/// One row per nodal value in storage order.
pub fn write_field(path: &Path, field: &Field) -> anyhow::Result<()> {
    let p = field.q + 1;
    let rows: Vec<NodeValue> = field
        .node_coordinates()
        .into_iter()
        .zip(&field.values)
        .enumerate()
        .map(|(k, ((x, y), &value))| NodeValue {
            element: k / (p * p),
            i: k % p,
            j: (k / p) % p,
            x,
            y,
            value,
        })
        .collect();
    write_csv(path, &FIELD_HEADER, &rows)
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}
