use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Failure, Outcome};

/// A fresh `<base>/<command>-<timestamp>` directory; the only writer of
/// its files.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(base: &Path, command: &str) -> Outcome<Self> {
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f");
        let mut path = base.join(format!("{command}-{stamp}"));
        let mut n = 1;
        while path.exists() {
            path = base.join(format!("{command}-{stamp}-{n}"));
            n += 1;
        }
        fs::create_dir_all(&path)
            .map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", path.display())))?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Outcome {
        Ok(fs::write(self.file(name), contents)?)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Outcome {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Outcome {
        let err = |e: csv::Error| Failure::Runtime(format!("{name}: {e}"));
        let mut w = csv::Writer::from_path(self.file(name)).map_err(err)?;
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}
