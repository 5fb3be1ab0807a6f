use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary item-by-attribute loading design.
///
/// Row `j` lists the attributes item `j` may depend on. Every row loads on at
/// least one attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct QMatrix {
    rows: Vec<Vec<u8>>,
    n_attributes: usize,
}

impl QMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n_attributes = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_attributes == 0 {
            return Err(Error::Domain(
                "Q-matrix must have at least one row and one column".into(),
            ));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n_attributes {
                return Err(Error::Domain(format!(
                    "Q-matrix row {} has {} entries, expected {}",
                    j + 1,
                    row.len(),
                    n_attributes
                )));
            }
            if let Some(&bad) = row.iter().find(|&&v| v > 1) {
                return Err(Error::Domain(format!(
                    "Q-matrix row {} has non-binary entry {bad}",
                    j + 1
                )));
            }
            if row.iter().all(|&v| v == 0) {
                return Err(Error::Domain(format!(
                    "Q-matrix row {} loads on no attribute",
                    j + 1
                )));
            }
        }
        Ok(Self { rows, n_attributes })
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn row(&self, item: usize) -> &[u8] {
        &self.rows[item]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn loads(&self, item: usize, attribute: usize) -> bool {
        self.rows[item][attribute] == 1
    }

    /// Attributes item `item` loads on, in increasing order.
    pub fn required(&self, item: usize) -> Vec<usize> {
        self.rows[item]
            .iter()
            .enumerate()
            .filter_map(|(k, &v)| (v == 1).then_some(k))
            .collect()
    }

    /// True when row `item` is the unit vector of `attribute`.
    pub fn is_unit_row(&self, item: usize, attribute: usize) -> bool {
        self.rows[item]
            .iter()
            .enumerate()
            .all(|(k, &v)| v == u8::from(k == attribute))
    }

    /// Copy with the given items removed (indices into the current matrix).
    pub fn without_items(&self, drop: &[usize]) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter(|(j, _)| !drop.contains(j))
            .map(|(_, r)| r.clone())
            .collect();
        Self::new(rows)
    }

    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| match tok.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::parse(
                        source_name,
                        lineno + 1,
                        format!("expected 0 or 1, found {other:?}"),
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if row.len() != first {
                    return Err(Error::parse(
                        source_name,
                        lineno + 1,
                        format!("row has {} entries, expected {first}", row.len()),
                    ));
                }
            }
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

impl TryFrom<Vec<Vec<u8>>> for QMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<QMatrix> for Vec<Vec<u8>> {
    fn from(q: QMatrix) -> Self {
        q.rows
    }
}

impl fmt::Display for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(f, "{:>4}  {}", j + 1, cells.join(" "))?;
        }
        Ok(())
    }
}
