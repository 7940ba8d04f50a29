use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("RECTILING_GIT_DESCRIBE"), ")");

/// Everything that determines a run; embedded in every output file.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub rule: Option<String>,
    pub depth: Option<u32>,
    pub delta: Option<String>,
    pub rho: Option<f64>,
    pub window: Option<String>,
    pub seed: u64,
    pub out_dir: String,
    pub options: Value,
}

pub struct Out {
    dir: PathBuf,
    cfg: RunConfig,
    pub written: Vec<PathBuf>,
}

impl Out {
    pub fn new(dir: &Path, cfg: RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Out { dir: dir.to_path_buf(), cfg, written: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn cfg_line(&self) -> String {
        serde_json::to_string(&self.cfg).expect("config serializes")
    }

    pub fn json(&mut self, name: &str, report: impl Serialize) -> Result<()> {
        let v = json!({ "version": VERSION, "config": self.cfg, "report": report });
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// CSV with `#` header lines (version, config, extras) before the body.
    pub fn csv(&mut self, name: &str, extra: &[String], body: &str) -> Result<()> {
        let mut text = format!("# rectiling {VERSION}\n# config {}\n", self.cfg_line());
        for e in extra {
            text.push_str(&format!("# {e}\n"));
        }
        text.push_str(body);
        self.write(name, &text)
    }

    pub fn svg(&mut self, name: &str, render: impl FnOnce(&str) -> String) -> Result<()> {
        let meta = format!("rectiling {VERSION} {}", self.cfg_line());
        let doc = render(&meta);
        self.write(name, &doc)
    }

    pub fn summary(&self) {
        for p in &self.written {
            println!("wrote {}", p.display());
        }
    }
}
