//! Output directory bookkeeping: CSV files, content hashes and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use sha2::{Digest, Sha256};

use crate::settings::Settings;

pub const MANIFEST: &str = "manifest.txt";

/// Shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub struct OutDir {
    pub path: PathBuf,
    files: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn record(&mut self, name: &str) -> anyhow::Result<()> {
        let bytes = fs::read(self.path.join(name))?;
        let hash = format!("{:x}", Sha256::digest(&bytes));
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), hash));
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let target = self.path.join(name);
        if let Some(dir) = target.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&target)
            .with_context(|| format!("writing {}", target.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        drop(w);
        self.record(name)
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }
}

pub struct Manifest<'a> {
    pub sub: &'a str,
    pub settings: Option<&'a Settings>,
    pub started: f64,
    pub finished: f64,
    pub error: Option<(i32, String)>,
    pub constants: &'a [(String, String)],
    pub files: &'a [(String, String)],
}

impl Manifest<'_> {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &str| s.push_str(&format!("{k} = {v}\n"));
        kv("subcommand", self.sub);
        kv("version", env!("CARGO_PKG_VERSION"));
        kv("started_unix", &format!("{:.3}", self.started));
        kv("finished_unix", &format!("{:.3}", self.finished));
        match &self.error {
            None => kv("status", "ok"),
            Some((code, msg)) => {
                kv("status", "error");
                kv("exit_code", &code.to_string());
                kv("error", &msg.replace('\n', " "));
            }
        }
        if let Some(st) = self.settings {
            s.push_str("\n[config]\n");
            for (k, v) in st.entries() {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        if !self.constants.is_empty() {
            s.push_str("\n[constants]\n");
            for (k, v) in self.constants {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s.push_str("\n[outputs]\n");
        for (n, h) in self.files {
            s.push_str(&format!("{n} = sha256:{h}\n"));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST), self.render())?;
        Ok(())
    }
}
