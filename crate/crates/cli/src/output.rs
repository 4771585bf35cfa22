//! Output directory with a JSON-lines manifest and CSV tables.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

/// Version of the manifest and CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.jsonl";

pub struct Output {
    dir: PathBuf,
    records: Vec<Value>,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Append a manifest record tagged with `kind`.
    pub fn record<T: Serialize>(&mut self, kind: &str, body: &T) -> anyhow::Result<()> {
        let mut v = json!({ "schema_version": SCHEMA_VERSION, "record": kind });
        v["data"] = serde_json::to_value(body)?;
        self.records.push(v);
        Ok(())
    }

    /// Write `rows` to `name` with a header taken from the row type.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write through a caller-supplied writer (for formats produced elsewhere).
    pub fn raw<F: FnOnce(BufWriter<File>) -> anyhow::Result<()>>(
        &mut self,
        name: &str,
        f: F,
    ) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        f(BufWriter::new(file))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write the manifest, listing every file produced.
    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        let files = self.files.clone();
        self.record("artifacts", &files)?;
        let path = self.dir.join(MANIFEST);
        let mut w = BufWriter::new(File::create(&path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Coordinates joined by spaces, for CSV cells.
pub fn point_cell(p: &heattrace_core::Point) -> String {
    p.coords()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
