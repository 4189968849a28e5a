//! CSV emission and run manifests.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Ordered `key=value` pairs for the leading `# ...` comment line.
#[derive(Clone, Debug, Default)]
pub struct Meta(pub Vec<(String, String)>);

impl Meta {
    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    /// Appends a `k=v;k=v` description such as `SymbolSpec::describe`.
    pub fn extend_described(&mut self, described: &str) -> &mut Self {
        for part in described.split(';').filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((k, v)) => self.push(k, v),
                None => self.push(part, ""),
            };
        }
        self
    }

    pub fn line(&self) -> String {
        let body: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# {}", body.join(";"))
    }
}

/// A table with a fixed header, written as CSV.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_bytes(&self, meta: &Meta) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        writeln!(buf, "{}", meta.line())?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Output file produced by a run.
#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files written by one command.
#[derive(Debug, Default)]
pub struct Sink {
    pub artifacts: Vec<Artifact>,
}

impl Sink {
    pub fn write_file(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(bytes)?;
        f.flush()?;
        self.artifacts.push(Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    /// Writes to `out` when given, stdout otherwise.
    pub fn emit(&mut self, out: Option<&Path>, table: &Table, meta: &Meta) -> Result<()> {
        let bytes = table.to_bytes(meta)?;
        match out {
            Some(p) => self.write_file(p, &bytes),
            None => {
                io::stdout().write_all(&bytes)?;
                Ok(())
            }
        }
    }
}

/// `fig.csv` + `_v` → `fig_v.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(e) => format!("{stem}{suffix}.{e}"),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

/// `<out>.manifest.json`, next to the primary output.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEntry {
    pub value: String,
    /// `flag`, `env`, `config` or `default`.
    pub source: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    pub config_file: Option<String>,
    pub config: std::collections::BTreeMap<String, ConfigEntry>,
    pub seed: u64,
    pub seed_source: String,
    pub threads: usize,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub outputs: Vec<Artifact>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(io::Error::other)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, json)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_line_and_table() {
        let mut m = Meta::default();
        m.push("command", "simulate").extend_described("family=stable;alpha=0.5");
        assert_eq!(m.line(), "# command=simulate;family=stable;alpha=0.5");
        let mut t = Table::new(&["s", "H"]);
        t.row(vec![num(0.0), num(0.25)]);
        let s = String::from_utf8(t.to_bytes(&m).unwrap()).unwrap();
        assert_eq!(s, "# command=simulate;family=stable;alpha=0.5\ns,H\n0.0,0.25\n");
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/fig.csv"), "_v"), PathBuf::from("out/fig_v.csv"));
        assert_eq!(manifest_path_for(Path::new("a.csv")), PathBuf::from("a.csv.manifest.json"));
    }
}
