//! Reader for the big-endian IDX image/label format.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fl::Dataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| Error::TruncatedFile {
            path: self.path.to_path_buf(),
            offset: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedFile {
                path: self.path.to_path_buf(),
                offset: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

fn header<'a>(bytes: &'a [u8], path: &'a Path, magic: u32) -> Result<Cursor<'a>> {
    let mut c = Cursor { bytes, pos: 0, path };
    let found = c.u32()?;
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    Ok(c)
}

/// Parses an image file and a label file already held in memory.
///
/// Pixels are scaled to `[0, 1]`; labels must be below 10.
pub fn parse_idx(images: &[u8], images_path: &Path, labels: &[u8], labels_path: &Path) -> Result<Dataset> {
    let mut ic = header(images, images_path, IMAGES_MAGIC)?;
    let n_images = ic.u32()? as usize;
    let rows = ic.u32()? as usize;
    let cols = ic.u32()? as usize;
    let mut lc = header(labels, labels_path, LABELS_MAGIC)?;
    let n_labels = lc.u32()? as usize;
    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let width = rows * cols;
    let pixels = ic.take(n_images * width)?;
    let raw_labels = lc.take(n_labels)?;
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = raw_labels.iter().map(|&l| l as usize).collect();
    Dataset::new(features, labels, width, 10)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = std::fs::read(ip)?;
    let labels = std::fs::read(lp)?;
    parse_idx(&images, ip, &labels, lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn images(n: u32, rows: u32, cols: u32, px: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IMAGES_MAGIC, n, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(px);
        v
    }

    pub(crate) fn labels(n: u32, l: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [LABELS_MAGIC, n] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(l);
        v
    }

    fn p(s: &str) -> &Path {
        Path::new(s)
    }

    #[test]
    fn parses_small_file() {
        let d = parse_idx(&images(2, 1, 2, &[0, 255, 51, 102]), p("i"), &labels(2, &[3, 9]), p("l")).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.features(), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.labels(), &[3, 9]);
    }

    #[test]
    fn label_magic_on_images_path() {
        let l = labels(2, &[3, 9]);
        match parse_idx(&l, p("img"), &l, p("lbl")) {
            Err(Error::BadMagic { expected, found, .. }) => {
                assert_eq!(expected, IMAGES_MAGIC);
                assert_eq!(found, LABELS_MAGIC);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let img = images(2, 1, 2, &[0, 255, 51]);
        match parse_idx(&img, p("img"), &labels(2, &[3, 9]), p("lbl")) {
            Err(Error::TruncatedFile { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_idx(&img[..6], p("img"), &labels(2, &[3, 9]), p("lbl")), Err(Error::TruncatedFile { offset: 6, .. })));
    }

    #[test]
    fn count_mismatch() {
        let r = parse_idx(&images(2, 1, 1, &[0, 1]), p("i"), &labels(3, &[0, 1, 2]), p("l"));
        assert!(matches!(r, Err(Error::CountMismatch { images: 2, labels: 3 })));
    }
}
