//! Tables, CSV/JSON emission, run manifests and plot data.
//!
//! Output files other than `manifest.json` and `timing.json` contain no
//! wall-clock data, so repeated runs with the same inputs are byte-identical.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

/// A table of string cells; numbers are stored in their shortest
/// round-trip decimal form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// CSV text, optionally preceded by a `# ...` comment line.
    pub fn to_csv_string(&self, comment: Option<&str>) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8");
        Ok(match comment {
            Some(c) => format!("# {c}\n{body}"),
            None => body,
        })
    }

    /// Parses CSV text, skipping leading `#` comment lines.
    pub fn from_csv_str(text: &str) -> Result<Table> {
        let body: String = text
            .lines()
            .skip_while(|l| l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Table { columns, rows })
    }

    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        fs::write(path, self.to_csv_string(comment)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        Table::from_csv_str(&fs::read_to_string(path)?)
    }
}

/// SHA-256 of canonical JSON (object keys sorted), hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    // serde_json maps are ordered by key, so this is canonical.
    let v = serde_json::to_value(value)?;
    let bytes = serde_json::to_vec(&v)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub start_unix: f64,
    pub end_unix: Option<f64>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config_hash: String, parameters: serde_json::Value) -> Self {
        RunManifest {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            subcommand: subcommand.to_string(),
            parameters,
            start_unix: unix_now(),
            end_unix: None,
        }
    }

    /// The reference line embedded at the top of every CSV.
    pub fn reference(&self) -> String {
        format!(
            "manifest=manifest.json config_hash={} tool_version={} subcommand={} seed={}",
            self.config_hash, self.tool_version, self.subcommand, self.seed
        )
    }

    /// The reference embedded in every JSON document.
    pub fn reference_json(&self) -> serde_json::Value {
        serde_json::json!({
            "file": "manifest.json",
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "seed": self.seed,
        })
    }
}

/// Writes the files of one run into a directory.
pub struct OutputDir {
    root: PathBuf,
    manifest: RunManifest,
    written: BTreeSet<String>,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            manifest,
            written: BTreeSet::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        table.write_csv(&self.path(name), Some(&self.manifest.reference()))?;
        self.written.insert(name.to_string());
        Ok(())
    }

    /// Writes `value` with a `manifest` reference field added.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("manifest".into(), self.manifest.reference_json());
            }
            None => return invalid("JSON outputs must be objects"),
        }
        fs::write(self.path(name), serde_json::to_string_pretty(&v)? + "\n")?;
        self.written.insert(name.to_string());
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        self.written.insert(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` (with end time) and `timing.json`.
    pub fn finish(mut self, timings: &serde_json::Value) -> Result<Vec<String>> {
        self.manifest.end_unix = Some(unix_now());
        let files: Vec<String> = self.written.iter().cloned().collect();
        let doc = serde_json::json!({ "manifest": self.manifest, "files": files });
        fs::write(self.path("manifest.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
        fs::write(self.path("timing.json"), serde_json::to_string_pretty(timings)? + "\n")?;
        Ok(files)
    }
}

/// Projects `(x, y)` columns of `table` into `x, y, series` plot rows. The
/// series name is taken from `series_column` when given.
pub fn plot_projection(table: &Table, x: &str, y: &str, series_column: Option<&str>, series: &str) -> Result<Table> {
    let xi = table.column_index(x);
    let yi = table.column_index(y);
    let (Some(xi), Some(yi)) = (xi, yi) else {
        return invalid(format!("plot columns `{x}`, `{y}` not in table"));
    };
    let si = match series_column {
        Some(s) => Some(
            table
                .column_index(s)
                .ok_or_else(|| crate::Error::InvalidInput(format!("series column `{s}` not in table")))?,
        ),
        None => None,
    };
    let mut out = Table::new(&["x", "y", "series"]);
    for r in &table.rows {
        let name = match si {
            Some(i) => format!("{series}:{}", r[i]),
            None => series.to_string(),
        };
        out.push(vec![r[xi].clone(), r[yi].clone(), name]);
    }
    Ok(out)
}

/// A gnuplot script plotting every series of a plot-data CSV.
pub fn gnuplot_script(csv_name: &str, title: &str, series: &[String], logscale: bool) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{title}'\n"));
    if logscale {
        s.push_str("set logscale xy\n");
    }
    s.push_str("set key outside\n");
    let parts: Vec<String> = series
        .iter()
        .map(|name| {
            format!("'{csv_name}' using 1:(strcol(3) eq '{name}' ? $2 : 1/0) skip 2 with linespoints title '{name}'")
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

/// Distinct values of a column in first-seen order.
pub fn distinct(table: &Table, column: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    if let Some(col) = table.column(column) {
        for v in col {
            if seen.insert(v.to_string()) {
                out.push(v.to_string());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["n", "value", "note"]);
        t.push(vec!["1".into(), fmt_f64(0.1 + 0.2), "a,b".into()]);
        t.push(vec!["2".into(), fmt_f64(f64::INFINITY), "\"q\"".into()]);
        let s = t.to_csv_string(Some("manifest=x")).unwrap();
        assert!(s.starts_with("# manifest=x\n"));
        assert_eq!(Table::from_csv_str(&s).unwrap(), t);
        assert_eq!(fmt_f64(0.1 + 0.2).parse::<f64>().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":{"x":2,"y":3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":{"y":3,"x":2},"a":1}"#).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        let c: serde_json::Value = serde_json::from_str(r#"{"a":2,"b":{"x":2,"y":3}}"#).unwrap();
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn projection_only_copies_values() {
        let mut t = Table::new(&["k", "n", "v"]);
        t.push(vec!["2".into(), "10".into(), "0.5".into()]);
        t.push(vec!["3".into(), "10".into(), "0.7".into()]);
        let p = plot_projection(&t, "n", "v", Some("k"), "R").unwrap();
        assert_eq!(p.columns, vec!["x", "y", "series"]);
        assert_eq!(p.rows[1], vec!["10", "0.7", "R:3"]);
        assert!(plot_projection(&t, "n", "missing", None, "R").is_err());
    }
}
