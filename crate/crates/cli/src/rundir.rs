//! Run directories, input fingerprints and manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn files_under(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn relative(path: &Path, root: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Digest of a file, or of a directory as the digest of its sorted
/// `relative-path NUL file-digest` listing.
pub fn digest_path(path: &Path) -> std::io::Result<String> {
    if path.is_dir() {
        let mut listing = Vec::new();
        for f in files_under(path)? {
            listing.extend_from_slice(relative(&f, path).as_bytes());
            listing.push(0);
            listing.extend_from_slice(sha256_hex(&fs::read(&f)?).as_bytes());
            listing.push(b'\n');
        }
        Ok(sha256_hex(&listing))
    } else {
        Ok(sha256_hex(&fs::read(path)?))
    }
}

/// Hash of everything that determines a run: command, its own arguments
/// and the resolved configuration minus the output root.
pub fn config_hash(command: &str, args: &Value, config: &RunConfig) -> String {
    let mut cfg = config.clone();
    cfg.paths.output_dir = PathBuf::new();
    let payload = json!({ "command": command, "args": args, "config": cfg });
    sha256_hex(payload.to_string().as_bytes())
}

/// One subcommand invocation's output directory.
#[derive(Debug)]
pub struct RunDir {
    pub command: String,
    pub dir: PathBuf,
    pub config_hash: String,
    pub args: Value,
    pub config: RunConfig,
    inputs: Vec<FileDigest>,
}

impl RunDir {
    /// Creates (or empties) `<output_dir>/<command>-<hash prefix>`. An existing
    /// directory is only cleared when it holds a previous manifest.
    pub fn create(command: &str, args: Value, config: RunConfig) -> Result<Self, CliError> {
        let config_hash = config_hash(command, &args, &config);
        let dir = config.paths.output_dir.join(format!("{command}-{}", &config_hash[..12]));
        if dir.exists() {
            if !dir.join("manifest.json").is_file() {
                return Err(CliError::Usage(format!(
                    "{} exists and is not a run directory",
                    dir.display()
                )));
            }
            fs::remove_dir_all(&dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            command: command.to_owned(),
            dir,
            config_hash,
            args,
            config,
            inputs: Vec::new(),
        })
    }

    /// Checks that an input exists and records its digest.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        if !path.exists() {
            return Err(CliError::Usage(format!("input not found: {}", path.display())));
        }
        let sha256 = digest_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Writes `config.toml`, `result.json` and finally `manifest.json`, which
    /// lists every other file of the directory with its digest.
    pub fn finish(&self, result: &Value) -> Result<(), CliError> {
        self.write("config.toml", self.config.to_toml())?;
        self.write("result.json", format!("{}\n", serde_json::to_string_pretty(result).expect("json")))?;
        let outputs = files_under(&self.dir)
            .and_then(|files| {
                files
                    .iter()
                    .map(|f| {
                        Ok(FileDigest {
                            path: relative(f, &self.dir),
                            sha256: sha256_hex(&fs::read(f)?),
                        })
                    })
                    .collect::<std::io::Result<Vec<_>>>()
            })
            .map_err(|e| CliError::Internal(format!("{}: {e}", self.dir.display())))?;
        let manifest = json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "args": self.args,
            "seeds": self.config.seeds,
            "inputs": self.inputs,
            "outputs": outputs,
            "versions": {
                "schedrag": env!("CARGO_PKG_VERSION"),
                "manifest_format": MANIFEST_FORMAT,
            },
        });
        self.write("manifest.json", format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json")))?;
        Ok(())
    }
}
