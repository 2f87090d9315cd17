use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
}

/// Labeled list of audio files, stored as a `path,label` CSV. Relative paths
/// are resolved against the manifest's own directory and held as absolute
/// paths once loaded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        // Absolute entries survive being re-saved somewhere else.
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = parent.canonicalize().map_err(|e| Error::io(parent, e))?;
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label"] {
            return Err(Error::Data(format!(
                "{}: expected header `path,label`, found `{}`",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let rel = PathBuf::from(&rec[0]);
            let label: Label = rec[1].parse()?;
            let full = if rel.is_absolute() { rel } else { base.join(rel) };
            if !full.exists() {
                return Err(Error::Data(format!(
                    "manifest entry {} does not exist",
                    full.display()
                )));
            }
            entries.push(ManifestEntry { path: full, label });
        }
        Ok(Manifest { entries })
    }

    /// Write the manifest; paths are stored relative to `path`'s directory
    /// when possible.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["path", "label"]).map_err(|e| csv_err(path, e))?;
        for e in &self.entries {
            let p = e.path.strip_prefix(base).unwrap_or(&e.path);
            w.write_record([p.to_string_lossy().as_ref(), e.label.as_str()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.wav"), b"x").unwrap();
        std::fs::write(dir.path().join("b.wav"), b"x").unwrap();
        let m = Manifest {
            entries: vec![
                ManifestEntry {
                    path: dir.path().join("a.wav"),
                    label: Label::Upcall,
                },
                ManifestEntry {
                    path: dir.path().join("b.wav"),
                    label: Label::Noise,
                },
            ],
        };
        let mp = dir.path().join("manifest.csv");
        m.save(&mp).unwrap();
        let text = std::fs::read_to_string(&mp).unwrap();
        assert_eq!(text, "path,label\na.wav,upcall\nb.wav,noise\n");
        assert_eq!(Manifest::load(&mp).unwrap(), m);
    }

    #[test]
    fn rejects_missing_files_and_bad_labels() {
        let dir = tempfile::tempdir().unwrap();
        let mp = dir.path().join("m.csv");
        std::fs::write(&mp, "path,label\nghost.wav,upcall\n").unwrap();
        assert!(Manifest::load(&mp).is_err());

        std::fs::write(dir.path().join("a.wav"), b"x").unwrap();
        std::fs::write(&mp, "path,label\na.wav,dolphin\n").unwrap();
        assert!(Manifest::load(&mp).is_err());

        std::fs::write(&mp, "file,class\na.wav,noise\n").unwrap();
        assert!(Manifest::load(&mp).is_err());
    }
}
