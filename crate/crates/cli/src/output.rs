//! Output directories that appear all at once.
//!
//! Files are written into a hidden sibling directory which is renamed onto
//! the requested path when the run finishes, so a reader never sees a
//! half-written result set.

use std::path::{Path, PathBuf};

use tcvdp::{Error, Result};

pub struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

impl StagedDir {
    /// Refuses an existing `target` unless `force` is set. Nothing at
    /// `target` is touched before [`commit`](Self::commit).
    pub fn create(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            return Err(Error::Config(format!(
                "{} already exists; pass --force to replace it",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("invalid output path {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        std::fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    /// Directory to write into.
    pub fn path(&self) -> &Path {
        &self.staging
    }

    /// Creates (if needed) and returns a subdirectory of the staging area.
    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.staging.join(name);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Moves the staged files onto the target path.
    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            std::fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        std::fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.staging);
        }
    }
}

/// Name of the per-size subdirectory, e.g. `N8`.
pub fn cell_dir(n_osc: usize) -> String {
    format!("N{n_osc}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_moves_files_and_refuses_overwrite() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        let staged = StagedDir::create(&target, false).unwrap();
        std::fs::write(staged.path().join("a.txt"), "x").unwrap();
        assert!(!target.exists());
        staged.commit().unwrap();
        assert_eq!(std::fs::read_to_string(target.join("a.txt")).unwrap(), "x");

        assert!(StagedDir::create(&target, false).is_err());
        let again = StagedDir::create(&target, true).unwrap();
        again.commit().unwrap();
        assert!(!target.join("a.txt").exists());
    }

    #[test]
    fn dropped_stage_leaves_nothing_behind() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        {
            let staged = StagedDir::create(&target, false).unwrap();
            std::fs::write(staged.path().join("a.txt"), "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    }
}
