use std::io;
use std::path::Path;

/// Writes through a temp file in the same directory and renames into
/// place, so readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, dir.join(name))
}

/// 17-significant-digit scientific notation: round-trip exact for f64.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}
