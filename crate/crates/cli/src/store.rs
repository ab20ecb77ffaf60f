//! Output directory handling: lock, atomic writes, hashing, provenance.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gwsurr::io::{encode, ArrayContainer, Persist};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const LOCK_FILE: &str = ".gwsurr.lock";

/// A file on disk identified by name and content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Provenance<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a gwsurr::config::RunConfig,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
}

struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// An output directory held exclusively for one command.
pub struct Store {
    dir: PathBuf,
    inputs: Vec<FileRef>,
    outputs: Vec<FileRef>,
    _lock: Lock,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "{} is locked by another gwsurr process (remove {} if that process is gone)",
                dir.display(),
                lock.display()
            ),
            Err(e) => return Err(e).with_context(|| format!("creating {}", lock.display())),
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            _lock: Lock(lock),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    /// Read an input file, failing with the name of the command that makes it.
    pub fn read_bytes(&mut self, name: &str, producer: &str) -> Result<(Vec<u8>, FileRef)> {
        let path = self.path(name);
        if !path.is_file() {
            bail!(
                "missing artifact {}; run `gwsurr {producer}` first",
                path.display()
            );
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let r = FileRef {
            file: name.to_string(),
            sha256: sha256_hex(&bytes),
        };
        if !self.inputs.contains(&r) {
            self.inputs.push(r.clone());
        }
        Ok((bytes, r))
    }

    pub fn read<T: Persist>(&mut self, name: &str, producer: &str) -> Result<(T, FileRef)> {
        let (bytes, r) = self.read_bytes(name, producer)?;
        let path = self.path(name);
        let container = ArrayContainer::from_bytes(&bytes)
            .with_context(|| format!("corrupt artifact {}", path.display()))?;
        if let Some(v) = container.writer_version() {
            if v != gwsurr::VERSION {
                eprintln!(
                    "warning: {} was written by gwsurr {v}, this is {}",
                    path.display(),
                    gwsurr::VERSION
                );
            }
        }
        let value = T::from_container(&container)
            .with_context(|| format!("invalid artifact {}", path.display()))?;
        Ok((value, r))
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(
        &mut self,
        name: &str,
        producer: &str,
    ) -> Result<T> {
        let (bytes, _) = self.read_bytes(name, producer)?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {name}"))
    }

    /// Write through a temporary file in the same directory, then rename.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<FileRef> {
        let path = self.path(name);
        let mut tmp = tempfile::Builder::new()
            .prefix(".tmp-")
            .tempfile_in(&self.dir)
            .with_context(|| format!("creating temporary file in {}", self.dir.display()))?;
        tmp.write_all(bytes)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(fs::Permissions::from_mode(0o644))?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&path)
            .with_context(|| format!("renaming into {}", path.display()))?;
        let r = FileRef {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        };
        self.outputs.retain(|o| o.file != r.file);
        self.outputs.push(r.clone());
        Ok(r)
    }

    pub fn write<T: Persist>(&mut self, name: &str, value: &T) -> Result<FileRef> {
        let bytes = encode(value)?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<FileRef> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write_bytes(name, &text)
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<FileRef> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    /// Record inputs and outputs of the command in `<command>.provenance.json`.
    pub fn finish(mut self, command: &str, config: &gwsurr::config::RunConfig) -> Result<()> {
        let record = Provenance {
            command,
            version: gwsurr::VERSION,
            seed: config.seed,
            config,
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
        };
        let mut text = serde_json::to_vec_pretty(&record)?;
        text.push(b'\n');
        self.write_bytes(&format!("{command}.provenance.json"), &text)?;
        Ok(())
    }
}

pub fn read_config(path: &Path) -> Result<gwsurr::config::RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn write_new_file(path: &Path, value: &Value) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}
