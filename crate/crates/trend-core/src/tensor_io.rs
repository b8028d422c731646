//! Tensor serialization and CSV import.
//!
//! The on-disk format is a self-describing text document:
//!
//! ```text
//! tns3 <I> <J> <K> <mask: 0|1>
//! <I*J*K values in canonical layout, whitespace separated>
//! <I*J*K mask bits (0|1), only when the header says mask=1>
//! ```
//!
//! Long-format CSV import builds a tensor from `(entity, metric, minute,
//! value)` records; combinations absent from the file become masked entries.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

const MAGIC: &str = "tns3";

/// Writes `t` in the text format described in the module docs.
pub fn write_tensor<W: Write>(t: &Tensor3, mut w: W) -> Result<()> {
    let (i, j, k) = t.dims();
    writeln!(w, "{MAGIC} {i} {j} {k} {}", u8::from(t.has_mask()))?;
    for chunk in t.values().chunks(16) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    if let Some(mask) = t.mask() {
        for chunk in mask.chunks(64) {
            let line: Vec<&str> = chunk.iter().map(|&b| if b { "1" } else { "0" }).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

/// Reads a tensor previously written by [`write_tensor`].
pub fn read_tensor<R: Read>(r: R) -> Result<Tensor3> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(Error::Data(format!(
            "bad tensor header, expected '{MAGIC} I J K mask': {header:?}"
        )));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Data(format!("bad {what} in tensor header: {s:?}")))
    };
    let dims = (
        parse(fields[1], "I")?,
        parse(fields[2], "J")?,
        parse(fields[3], "K")?,
    );
    let has_mask = match fields[4] {
        "0" => false,
        "1" => true,
        other => return Err(Error::Data(format!("bad mask flag: {other:?}"))),
    };
    let n = dims.0 * dims.1 * dims.2;

    let mut tokens = Vec::with_capacity(if has_mask { 2 * n } else { n });
    let mut body = String::new();
    reader.read_to_string(&mut body)?;
    tokens.extend(body.split_whitespace());
    let expect = if has_mask { 2 * n } else { n };
    if tokens.len() != expect {
        return Err(Error::Data(format!(
            "tensor body has {} tokens, expected {expect}",
            tokens.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for tok in &tokens[..n] {
        values.push(
            tok.parse::<f64>()
                .map_err(|_| Error::Data(format!("bad tensor value: {tok:?}")))?,
        );
    }
    if has_mask {
        let mut mask = Vec::with_capacity(n);
        for tok in &tokens[n..] {
            mask.push(match *tok {
                "0" => false,
                "1" => true,
                other => return Err(Error::Data(format!("bad mask bit: {other:?}"))),
            });
        }
        Tensor3::with_mask(dims, values, mask)
    } else {
        Tensor3::new(dims, values)
    }
}

/// One record of the long-format CSV.
#[derive(Debug, Deserialize)]
struct LongRecord {
    entity: String,
    metric: String,
    minute: usize,
    value: f64,
}

/// Index mapping from tensor coordinates back to the imported labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorIndex {
    /// Mode-1 labels, sorted lexicographically.
    pub entities: Vec<String>,
    /// Mode-2 labels, sorted lexicographically.
    pub metrics: Vec<String>,
    /// Mode-3 size; minutes run `0..minutes`.
    pub minutes: usize,
}

/// Imports long-format records `(entity, metric, minute, value)` into a
/// tensor with modes (entity, metric, minute).
///
/// Entities and metrics are sorted so that the result is independent of row
/// order; duplicate coordinates are a data error; combinations that never
/// appear are masked.
pub fn import_long_csv<R: Read>(r: R) -> Result<(Tensor3, TensorIndex)> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut records: Vec<LongRecord> = Vec::new();
    for rec in rdr.deserialize() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::Data("long CSV contains no records".into()));
    }
    let mut entities: Vec<String> = records.iter().map(|r| r.entity.clone()).collect();
    entities.sort();
    entities.dedup();
    let mut metrics: Vec<String> = records.iter().map(|r| r.metric.clone()).collect();
    metrics.sort();
    metrics.dedup();
    let minutes = records.iter().map(|r| r.minute).max().unwrap() + 1;

    let e_idx: BTreeMap<&str, usize> =
        entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
    let m_idx: BTreeMap<&str, usize> =
        metrics.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();

    let dims = (entities.len(), metrics.len(), minutes);
    let n = dims.0 * dims.1 * dims.2;
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    for rec in &records {
        let i = e_idx[rec.entity.as_str()];
        let j = m_idx[rec.metric.as_str()];
        let idx = i + dims.0 * (j + dims.1 * rec.minute);
        if mask[idx] {
            return Err(Error::Data(format!(
                "duplicate record for ({}, {}, {})",
                rec.entity, rec.metric, rec.minute
            )));
        }
        mask[idx] = true;
        values[idx] = rec.value;
    }
    let tensor = Tensor3::with_mask(dims, values, mask)?;
    Ok((tensor, TensorIndex { entities, metrics, minutes }))
}
