use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const OUT_ENV: &str = "SOLITON_LAB_OUT";

/// Output directory that writes files atomically and remembers what it wrote.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    config: &'a BTreeMap<String, String>,
    artifacts: &'a [String],
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `name` via a temporary file renamed into place.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `run.conf` (replayable with `--config`) and `manifest.json` listing every artifact.
    pub fn finish(mut self, subcommand: &str, config: &BTreeMap<String, String>) -> Result<(), CliError> {
        let mut conf = String::new();
        for (k, v) in config {
            conf.push_str(&format!("{k} = {v}\n"));
        }
        self.write("run.conf", conf.as_bytes())?;
        let mut artifacts = self.artifacts.clone();
        artifacts.sort();
        let manifest = Manifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config,
            artifacts: &artifacts,
        };
        self.write_json("manifest.json", &manifest)
    }
}

/// `--out`, then the config file's `out`, then `$SOLITON_LAB_OUT`, then the working directory.
pub fn resolve_out_dir(flag: Option<PathBuf>, file: &BTreeMap<String, String>) -> PathBuf {
    flag.or_else(|| file.get("out").map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
