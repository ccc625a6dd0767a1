//! Download and unpack the MovieLens 100k archive.

use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use md5::{Digest, Md5};

pub const DEFAULT_URL: &str = "https://files.grouplens.org/datasets/movielens/ml-100k.zip";

fn get(url: &str) -> Result<Vec<u8>> {
    let resp = ureq::get(url).call().with_context(|| format!("GET {url}"))?;
    let mut body = Vec::new();
    resp.into_reader()
        .take(64 << 20)
        .read_to_end(&mut body)
        .with_context(|| format!("reading {url}"))?;
    Ok(body)
}

pub fn md5_hex(bytes: &[u8]) -> String {
    Md5::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Downloads the archive, checks it against `expected_md5` (or the checksum
/// file published next to it), and extracts it under `dest`. Returns the
/// dataset directory.
pub fn fetch(url: &str, expected_md5: Option<&str>, dest: &Path) -> Result<PathBuf> {
    let archive = get(url)?;
    let expected = match expected_md5 {
        Some(m) => m.to_ascii_lowercase(),
        None => {
            let sum = get(&format!("{url}.md5"))?;
            String::from_utf8_lossy(&sum)
                .split_whitespace()
                .find(|w| w.len() == 32 && w.chars().all(|c| c.is_ascii_hexdigit()))
                .context("checksum file has no md5 digest")?
                .to_ascii_lowercase()
        }
    };
    let actual = md5_hex(&archive);
    if actual != expected {
        bail!(crate::DataError(format!("checksum mismatch: expected {expected}, got {actual}")));
    }
    let mut zip = zip::ZipArchive::new(Cursor::new(archive)).context("opening archive")?;
    std::fs::create_dir_all(dest).with_context(|| format!("creating {}", dest.display()))?;
    zip.extract(dest).context("extracting archive")?;
    let dir = dest.join("ml-100k");
    if !dir.join("u.data").is_file() {
        bail!(crate::DataError(format!("archive did not contain {}", dir.join("u.data").display())));
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn md5_known_vector() {
        assert_eq!(md5_hex(b""), "d41d8cd98f00b204e9800998ecf8427e");
        assert_eq!(md5_hex(b"abc"), "900150983cd24fb0d6963f7d28e17f72");
    }
}
