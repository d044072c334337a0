//! Read-only image roots with a path-traversal guard.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use leakcheck_core::Registry;

#[derive(Debug, Clone, Default)]
pub struct ImageRoots {
    roots: BTreeMap<String, PathBuf>,
}

impl ImageRoots {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dataset_id: impl Into<String>, root: impl Into<PathBuf>) {
        self.roots.insert(dataset_id.into(), root.into());
    }

    /// One root per registry entry: its `image_root` (relative values join
    /// `data_root`) or else `data_root/<dataset_id>`.
    pub fn from_registry(registry: &Registry, data_root: &Path) -> Self {
        let mut roots = Self::new();
        for e in &registry.datasets {
            let root = match &e.image_root {
                Some(r) => data_root.join(r),
                None => data_root.join(&e.dataset_id),
            };
            roots.insert(e.dataset_id.clone(), root);
        }
        roots
    }

    pub fn root(&self, dataset_id: &str) -> Option<&Path> {
        self.roots.get(dataset_id).map(PathBuf::as_path)
    }

    /// Maps a request path to a file inside the dataset root. Returns `None`
    /// for unknown datasets, non-relative or `..` paths, symlinks escaping the
    /// root, and anything that is not a regular file.
    pub fn resolve(&self, dataset_id: &str, rel: &str) -> Option<PathBuf> {
        let root = self.roots.get(dataset_id)?;
        let rel = Path::new(rel);
        if rel.as_os_str().is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return None;
        }
        let root = root.canonicalize().ok()?;
        let full = root.join(rel).canonicalize().ok()?;
        (full.starts_with(&root) && full.is_file()).then_some(full)
    }
}

pub fn content_type(path: &Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}
