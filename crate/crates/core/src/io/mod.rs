//! File formats: mono WAV and the little-endian matrix container shared by
//! integral matrices, gates, significances and masks.

mod matrix;
mod wav;

pub use matrix::{read_matrix, read_matrix_from, write_matrix, write_matrix_to, MATRIX_MAGIC};
pub use wav::{read_wav, write_wav, SampleFormat};

use std::fs;
use std::io::Write;
use std::path::Path;

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = match dir {
        Some(d) => d.join(format!(".{file_name}.tmp")),
        None => Path::new(&format!(".{file_name}.tmp")).to_path_buf(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}
