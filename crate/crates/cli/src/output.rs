use crate::config::RunConfig;
use anyhow::Result;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes `<subcommand>.csv` and `<subcommand>.json` under the output
/// directory, each starting with the config hash and precision mode.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    precision: String,
    subcommand: String,
}

#[derive(Serialize)]
struct Header<'a> {
    subcommand: &'a str,
    config_hash: &'a str,
    precision: &'a str,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: Header<'a>,
    config: &'a RunConfig,
    report: T,
}

impl Artifacts {
    pub fn new(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            hash: cfg.hash(),
            precision: serde_json::to_value(cfg.precision)?.as_str().unwrap_or_default().to_string(),
            subcommand: cfg.subcommand.clone(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.csv"));
        let mut file = fs::File::create(&path)?;
        writeln!(file, "# subcommand: {}", self.subcommand)?;
        writeln!(file, "# config_hash: {}", self.hash)?;
        writeln!(file, "# precision: {}", self.precision)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, cfg: &RunConfig, report: T) -> Result<PathBuf> {
        let path = self.dir.join(format!("{}.json", self.subcommand));
        let doc = Document {
            header: Header {
                subcommand: &self.subcommand,
                config_hash: &self.hash,
                precision: &self.precision,
            },
            config: cfg,
            report,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}
