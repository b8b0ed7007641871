#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Relative paths of every file under `root`, sorted.
pub fn files_under(root: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// First differing file between two trees, or `None` when they hold the same bytes.
pub fn tree_difference(expected: &Path, actual: &Path) -> Option<String> {
    let (e, a) = (files_under(expected), files_under(actual));
    if e != a {
        return Some(format!("file sets differ: expected {e:?}, got {a:?}"));
    }
    e.into_iter()
        .find(|f| std::fs::read(expected.join(f)).unwrap() != std::fs::read(actual.join(f)).unwrap())
        .map(|f| format!("{} differs from the golden copy", f.display()))
}
