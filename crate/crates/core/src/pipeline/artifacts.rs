//! Output directory bookkeeping and the hashed manifest.
//!
//! Every file a stage writes goes through [`Artifacts::write`], which
//! records its SHA-256. The manifest is sorted by path so two runs with the
//! same inputs produce byte-identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
const MANIFEST_MAGIC: &str = "# postlabel manifest v1";
const HASH_LINE: &str = "# hash: sha256";
const FAILED_PREFIX: &str = "# failed stage: ";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    /// Relative path → hex digest.
    pub entries: BTreeMap<String, String>,
    pub failed_stage: Option<String>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = format!("{MANIFEST_MAGIC}\n{HASH_LINE}\n");
        for (path, hash) in &self.entries {
            s.push_str(&format!("{hash}  {path}\n"));
        }
        if let Some(stage) = &self.failed_stage {
            s.push_str(&format!("{FAILED_PREFIX}[{stage}]\n"));
        }
        s
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let file = MANIFEST_FILE;
        let mut manifest = Manifest::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            match lineno {
                1 if line != MANIFEST_MAGIC => {
                    return Err(Error::parse(file, 1, format!("expected `{MANIFEST_MAGIC}`")))
                }
                2 if line != HASH_LINE => {
                    return Err(Error::parse(file, 2, format!("expected `{HASH_LINE}`")))
                }
                1 | 2 => {}
                _ => {
                    if let Some(stage) = line.strip_prefix(FAILED_PREFIX) {
                        manifest.failed_stage =
                            Some(stage.trim_matches(|c| c == '[' || c == ']').to_string());
                        continue;
                    }
                    let (hash, path) = line
                        .split_once("  ")
                        .ok_or_else(|| Error::parse(file, lineno, "expected `<hash>  <path>`"))?;
                    if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
                        return Err(Error::parse(file, lineno, "malformed digest"));
                    }
                    manifest.entries.insert(path.to_string(), hash.to_string());
                }
            }
        }
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// The output directory of a run.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    manifest: Manifest,
}

impl Artifacts {
    /// A fresh run: previous manifest entries are discarded.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Artifacts {
            root,
            manifest: Manifest::default(),
        })
    }

    /// Continues an existing output directory, keeping the entries of its
    /// manifest (single-stage commands build on earlier stages' files).
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let mut a = Self::create(root)?;
        let path = a.root.join(MANIFEST_FILE);
        if path.exists() {
            let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            a.manifest = Manifest::parse(BufReader::new(f))?;
            a.manifest.failed_stage = None;
        }
        Ok(a)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.entries.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Runs a serializer into memory and writes the result.
    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn reader(&self, rel: &str) -> Result<BufReader<fs::File>> {
        let path = self.path(rel);
        let f = fs::File::open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Data(format!(
                    "{} is missing; run the stage that produces it first",
                    path.display()
                ))
            } else {
                Error::io(&path, e)
            }
        })?;
        Ok(BufReader::new(f))
    }

    pub fn read_string(&self, rel: &str) -> Result<String> {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut self.reader(rel)?, &mut s)
            .map_err(|e| Error::io(self.path(rel), e))?;
        Ok(s)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn write_manifest(&mut self, failed_stage: Option<&str>) -> Result<()> {
        self.manifest.failed_stage = failed_stage.map(str::to_string);
        let path = self.path(MANIFEST_FILE);
        fs::write(&path, self.manifest.render()).map_err(|e| Error::io(&path, e))
    }
}
