//! Run bookkeeping: manifests, artifact writing and exit-code classification.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use fastgate::GateError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// A malformed input file.
#[derive(Debug)]
pub struct ParseError {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path.display(), self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A malformed command-line value.
#[derive(Debug)]
pub struct ArgError(pub String);

impl fmt::Display for ArgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ArgError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ParseError>() || cause.is::<ArgError>() {
            return EXIT_PARSE;
        }
        if let Some(g) = cause.downcast_ref::<GateError>() {
            return match g {
                GateError::Infeasible(_) => EXIT_INFEASIBLE,
                GateError::Domain(_) | GateError::Ordering(_) | GateError::Invariant(_) => EXIT_INVARIANT,
            };
        }
    }
    EXIT_INTERNAL
}

/// Reads a JSON file; syntax and schema errors carry the line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        ParseError {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
        .into()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub seed: u64,
    pub overrides: BTreeMap<String, String>,
    pub out_dir: String,
    pub version: String,
    pub duration_s: f64,
    /// SHA-256 of the fields that determine the outputs.
    pub hash: String,
}

impl RunManifest {
    fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            command: &'a str,
            inputs: Vec<&'a str>,
            seed: u64,
            overrides: &'a BTreeMap<String, String>,
            version: &'a str,
        }
        let key = Key {
            command: &self.command,
            inputs: self.inputs.iter().map(|i| i.sha256.as_str()).collect(),
            seed: self.seed,
            overrides: &self.overrides,
            version: &self.version,
        };
        let bytes = serde_json::to_vec(&key).expect("manifest key serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// An in-progress run writing artifacts into one directory.
pub struct Run {
    manifest: RunManifest,
    out: PathBuf,
    started: Instant,
}

impl Run {
    pub fn start(command: &str, seed: u64, out: &Path) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                inputs: Vec::new(),
                seed,
                overrides: BTreeMap::new(),
                out_dir: out.display().to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                duration_s: 0.0,
                hash: String::new(),
            },
            out: out.to_path_buf(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.manifest.overrides.insert(key.to_string(), value.to_string());
    }

    pub fn hash(&self) -> String {
        self.manifest.digest()
    }

    fn prepare(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    /// Writes `value` as pretty JSON with the manifest hash added to top-level objects.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("manifest_hash".into(), self.hash().into());
        }
        let path = self.prepare(name)?;
        fs::write(&path, serde_json::to_string_pretty(&v)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(v)
    }

    /// Writes a CSV table preceded by a `# manifest_hash=` comment line.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
        let text = csv_text(header, rows, Some(&self.hash()))?;
        let path = self.prepare(name)?;
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        Ok(text)
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.duration_s = self.started.elapsed().as_secs_f64();
        self.manifest.hash = self.hash();
        let path = self.prepare("manifest.json")?;
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(self.manifest)
    }
}

pub fn csv_text(header: &[&str], rows: &[Vec<String>], hash: Option<&str>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    Ok(match hash {
        Some(h) => format!("# manifest_hash={h}\n{body}"),
        None => body,
    })
}
