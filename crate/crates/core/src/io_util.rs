use std::fs;
use std::io;
use std::path::Path;

/// Writes `contents` to `path` through a temporary sibling and a rename,
/// so readers never observe a partially written file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
