//! Deterministic ZIP archives: entries sorted by name, stored uncompressed
//! (PNGs are compressed already), with a fixed timestamp and mode.

use std::io::{Cursor, Write};
use std::path::Path;

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

/// Zips `names` from `dir`. The output depends only on the names and the
/// file contents.
pub fn build_archive(dir: &Path, names: &[String]) -> std::io::Result<Vec<u8>> {
    let mut sorted: Vec<&String> = names.iter().collect();
    sorted.sort();
    sorted.dedup();
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    for name in sorted {
        let bytes = std::fs::read(dir.join(name))?;
        zip.start_file(name.as_str(), options).map_err(std::io::Error::other)?;
        zip.write_all(&bytes)?;
    }
    Ok(zip.finish().map_err(std::io::Error::other)?.into_inner())
}
