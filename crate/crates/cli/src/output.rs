//! Output directories that appear all at once or not at all.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Files are written into a hidden sibling directory which is renamed onto
/// the final path by [`StagedDir::commit`]. Dropping without committing
/// removes the staging directory.
pub struct StagedDir {
    staging: PathBuf,
    target: PathBuf,
    force: bool,
    committed: bool,
}

impl StagedDir {
    pub fn create(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            bail!(
                "output directory {} already exists (use --force to replace it)",
                target.display()
            );
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
        let name = target
            .file_name()
            .with_context(|| format!("output path {} has no final component", target.display()))?
            .to_string_lossy()
            .into_owned();
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)
            .with_context(|| format!("cannot create {}", staging.display()))?;
        Ok(StagedDir {
            staging,
            target: target.to_path_buf(),
            force,
            committed: false,
        })
    }

    #[cfg(test)]
    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn write(&self, relative: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.staging.join(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            if !self.force {
                bail!("output directory {} appeared during the run", self.target.display());
            }
            fs::remove_dir_all(&self.target)
                .with_context(|| format!("cannot replace {}", self.target.display()))?;
        }
        fs::rename(&self.staging, &self.target)
            .with_context(|| format!("cannot move output into {}", self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// File-name-safe, reversible encoding of a lemma: letters, digits, `-` and
/// `_` are kept, every other byte becomes `%XX`.
pub fn file_stem(lemma: &str) -> String {
    let mut out = String::new();
    for ch in lemma.chars() {
        if ch.is_alphanumeric() || ch == '-' || ch == '_' {
            out.push(ch);
        } else {
            let mut buf = [0u8; 4];
            for b in ch.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        }
    }
    out
}

pub fn lemma_from_stem(stem: &str) -> Result<String> {
    let bytes = stem.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = stem
                .get(i + 1..i + 3)
                .with_context(|| format!("bad escape in file name `{stem}`"))?;
            out.push(u8::from_str_radix(hex, 16).with_context(|| format!("bad escape in `{stem}`"))?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).with_context(|| format!("file name `{stem}` is not UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_round_trip() {
        for lemma in ["mus", "λόγος", "a/b", "..", "x%y", "ἀρχή"] {
            let stem = file_stem(lemma);
            assert!(!stem.contains('/') && !stem.contains('.'));
            assert_eq!(lemma_from_stem(&stem).unwrap(), lemma);
        }
    }

    #[test]
    fn uncommitted_staging_is_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("out");
        let staged = StagedDir::create(&target, false).unwrap();
        staged.write("a/b.txt", "x").unwrap();
        let staging = staged.path().to_path_buf();
        drop(staged);
        assert!(!staging.exists());
        assert!(!target.exists());
    }

    #[test]
    fn commit_and_force() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("out");
        let staged = StagedDir::create(&target, false).unwrap();
        staged.write("f.txt", "1").unwrap();
        staged.commit().unwrap();
        assert!(StagedDir::create(&target, false).is_err());
        let staged = StagedDir::create(&target, true).unwrap();
        staged.write("g.txt", "2").unwrap();
        staged.commit().unwrap();
        assert!(!target.join("f.txt").exists());
        assert_eq!(fs::read_to_string(target.join("g.txt")).unwrap(), "2");
    }
}
