//! Feature CSV: identity columns, the 65 features, and an optional trailing `Label`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Feature, FeatureVector, FEATURE_COUNT};
use crate::dataset::{format_real, normalize_feature_name, NameAliasMap};
use crate::error::{Error, Result};

pub const IDENTITY_COLUMNS: [&str; 7] = [
    "Flow ID",
    "Source IP",
    "Source Port",
    "Destination IP",
    "Destination Port",
    "Protocol",
    "Timestamp",
];

pub const LABEL_COLUMN: &str = "Label";

pub fn header(with_label: bool) -> Vec<&'static str> {
    let mut h: Vec<&str> = IDENTITY_COLUMNS.to_vec();
    h.extend(Feature::ALL.iter().map(|f| f.name()));
    if with_label {
        h.push(LABEL_COLUMN);
    }
    h
}

pub fn write_flows<W: Write>(out: W, flows: &[FeatureVector], labels: Option<&[String]>) -> Result<()> {
    if let Some(labels) = labels {
        if labels.len() != flows.len() {
            return Err(Error::validation("label count does not match flow count"));
        }
    }
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(header(labels.is_some()))?;
    for (i, fv) in flows.iter().enumerate() {
        let mut row: Vec<String> = vec![
            fv.flow_id.clone(),
            fv.src_ip.to_string(),
            fv.src_port.to_string(),
            fv.dst_ip.to_string(),
            fv.dst_port.to_string(),
            fv.protocol.to_string(),
            fv.timestamp_us.to_string(),
        ];
        row.extend(fv.values.iter().map(|x| format_real(*x)));
        if let Some(labels) = labels {
            row.push(labels[i].clone());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_flows_file(path: impl AsRef<Path>, flows: &[FeatureVector], labels: Option<&[String]>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_flows(BufWriter::new(file), flows, labels)
}

/// A flow read back from a feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRow {
    pub features: FeatureVector,
    pub label: Option<String>,
}

pub fn read_flows<R: Read>(input: R) -> Result<Vec<FlowRow>> {
    let aliases = NameAliasMap::standard();
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers: Vec<String> = r
        .headers()?
        .iter()
        .map(|h| normalize_feature_name(h, &aliases).name)
        .collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let identity: Vec<usize> = IDENTITY_COLUMNS
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;
    let feature_cols: Vec<usize> = Feature::ALL
        .iter()
        .map(|f| find(f.name()))
        .collect::<Result<_>>()?;
    let label_col = headers.iter().position(|h| h == LABEL_COLUMN);

    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        if rec.len() != headers.len() {
            return Err(Error::Row {
                line,
                message: format!("expected {} cells, found {}", headers.len(), rec.len()),
            });
        }
        let cell = |c: usize| rec.get(c).unwrap_or("").trim();
        let parse_err = |col: &str, v: &str| Error::Row {
            line,
            message: format!("column `{col}`: cannot parse `{v}`"),
        };
        let ip = |c: usize, name: &str| cell(c).parse().map_err(|_| parse_err(name, cell(c)));
        let int = |c: usize, name: &str| -> Result<i64> {
            let v = cell(c);
            v.parse::<i64>()
                .or_else(|_| v.parse::<f64>().map(|x| x as i64))
                .map_err(|_| parse_err(name, v))
        };
        let mut values = [0.0; FEATURE_COUNT];
        for (slot, (&c, f)) in feature_cols.iter().zip(Feature::ALL).enumerate() {
            values[slot] = cell(c).parse().map_err(|_| parse_err(f.name(), cell(c)))?;
        }
        rows.push(FlowRow {
            features: FeatureVector {
                flow_id: cell(identity[0]).to_string(),
                src_ip: ip(identity[1], IDENTITY_COLUMNS[1])?,
                src_port: int(identity[2], IDENTITY_COLUMNS[2])? as u16,
                dst_ip: ip(identity[3], IDENTITY_COLUMNS[3])?,
                dst_port: int(identity[4], IDENTITY_COLUMNS[4])? as u16,
                protocol: int(identity[5], IDENTITY_COLUMNS[5])? as u8,
                timestamp_us: int(identity[6], IDENTITY_COLUMNS[6])?,
                values,
            },
            label: label_col.map(|c| cell(c).to_string()),
        });
    }
    Ok(rows)
}

pub fn read_flows_file(path: impl AsRef<Path>) -> Result<Vec<FlowRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_flows(std::io::BufReader::new(file))
}
