use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, IdMaps, Interaction, SEQ_STRIDE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Csv,
    Tsv,
}

impl Delimiter {
    fn byte(self) -> u8 {
        match self {
            Delimiter::Csv => b',',
            Delimiter::Tsv => b'\t',
        }
    }
}

/// Where the user, item and timestamp fields live in each row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnSpec {
    /// Header names; implies the input has a header row.
    Names {
        user: String,
        item: String,
        timestamp: String,
    },
    /// Zero-based column indices.
    Indices {
        user: usize,
        item: usize,
        timestamp: usize,
    },
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec::Indices {
            user: 0,
            item: 1,
            timestamp: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadOptions {
    pub delimiter: Delimiter,
    pub columns: ColumnSpec,
    /// Skip the first row. Forced on when columns are given by name.
    pub has_header: bool,
}

/// Parses a delimited interaction log.
///
/// Original user and item ids are remapped to dense ids in ascending
/// original order (numeric when every id is an integer, lexicographic
/// otherwise). Rows keep their input order as `seq_index`, which breaks
/// timestamp ties.
pub fn load_interactions<R: Read>(source: R, opts: &LoadOptions) -> Result<Dataset> {
    let has_header = opts.has_header || matches!(opts.columns, ColumnSpec::Names { .. });
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter.byte())
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let (cu, ci, ct) = match &opts.columns {
        ColumnSpec::Indices {
            user,
            item,
            timestamp,
        } => (*user, *item, *timestamp),
        ColumnSpec::Names {
            user,
            item,
            timestamp,
        } => {
            let headers = reader.headers().map_err(|e| parse_err(&e, 1))?.clone();
            let find = |name: &str| {
                headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("header has no column named {name:?}"),
                })
            };
            (find(user)?, find(item)?, find(timestamp)?)
        }
    };

    let mut raw: Vec<(String, String, f64)> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader
            .read_record(&mut record)
            .map_err(|e| parse_err(&e, raw.len() as u64 + 1))?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, what: &str| {
            record.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {what} column (index {idx})"),
            })
        };
        let user = field(cu, "user")?.to_string();
        let item = field(ci, "item")?.to_string();
        let ts_text = field(ct, "timestamp")?;
        let ts: f64 = ts_text.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid timestamp {ts_text:?}"),
        })?;
        if ts.is_nan() || ts.is_infinite() {
            return Err(Error::Parse {
                line,
                message: format!("invalid timestamp {ts_text:?}"),
            });
        }
        if ts < 0.0 {
            return Err(Error::Validation(format!(
                "negative timestamp {ts} at line {line}"
            )));
        }
        raw.push((user, item, ts));
    }
    if raw.is_empty() {
        return Err(Error::Empty("no interactions in input".into()));
    }

    let users = dense_ids(raw.iter().map(|r| r.0.as_str()));
    let items = dense_ids(raw.iter().map(|r| r.1.as_str()));
    let user_index: HashMap<&str, u32> = index_of(&users);
    let item_index: HashMap<&str, u32> = index_of(&items);
    let rows = raw
        .iter()
        .enumerate()
        .map(|(k, (u, i, t))| Interaction {
            user: user_index[u.as_str()],
            item: item_index[i.as_str()],
            timestamp: *t,
            seq_index: k as u64 * SEQ_STRIDE,
        })
        .collect();
    let (n_users, n_items) = (users.len(), items.len());
    Ok(Dataset::new(rows, n_users, n_items)?.with_ids(Some(Arc::new(IdMaps { users, items }))))
}

fn parse_err(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn dense_ids<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut uniq: Vec<&str> = names.collect();
    uniq.sort_unstable();
    uniq.dedup();
    let numeric: Option<Vec<i128>> = uniq.iter().map(|s| s.parse::<i128>().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(i128, &str)> = nums.into_iter().zip(uniq.iter().copied()).collect();
        pairs.sort();
        pairs.into_iter().map(|(_, s)| s.to_string()).collect()
    } else {
        uniq.into_iter().map(str::to_string).collect()
    }
}

fn index_of(names: &[String]) -> HashMap<&str, u32> {
    names
        .iter()
        .enumerate()
        .map(|(k, n)| (n.as_str(), k as u32))
        .collect()
}

/// Writes an `original_id,dense_id` sidecar table.
pub fn write_id_map<W: Write>(out: W, names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["original_id", "dense_id"])?;
    for (dense, name) in names.iter().enumerate() {
        w.write_record([name.as_str(), &dense.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
