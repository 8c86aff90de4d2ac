//! PGM frame stacks: P2/P5 readers, a P5 writer, and flattening of frame
//! sequences into data matrices with pixels scaled to `[0, 1]`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// An ordered stack of equally-sized grayscale frames, flattened row-major
/// into an `n x (h*w)` matrix with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub height: usize,
    pub width: usize,
    pub data: DataMatrix,
}

impl FrameSequence {
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    /// Pixels of frame `i` as a row-major slice-backed vector.
    pub fn frame_pixels(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }
}

struct ParsedPgm {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

/// Reads header tokens (magic, width, height, maxval), skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    while *pos < bytes.len() {
        let b = bytes[*pos];
        if b == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_header_number(path: &Path, tok: Option<String>, what: &str) -> Result<usize> {
    tok.and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| Error::data(path, None, format!("bad or missing {what}")))
}

fn parse_pgm(path: &Path) -> Result<ParsedPgm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let magic =
        next_token(&bytes, &mut pos).ok_or_else(|| Error::data(path, None, "empty file"))?;
    if magic != "P2" && magic != "P5" {
        return Err(Error::data(
            path,
            None,
            format!("unsupported magic number '{magic}' (expected P2 or P5)"),
        ));
    }
    let width = parse_header_number(path, next_token(&bytes, &mut pos), "width")?;
    let height = parse_header_number(path, next_token(&bytes, &mut pos), "height")?;
    let maxval = parse_header_number(path, next_token(&bytes, &mut pos), "maxval")?;
    if maxval != 255 {
        return Err(Error::data(
            path,
            None,
            format!("unsupported maxval {maxval} (only 8-bit, 255, is supported)"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::data(path, None, "zero-sized image"));
    }
    let count = width * height;

    let raw: Vec<u8> = if magic == "P5" {
        // Exactly one whitespace byte separates the header from the data.
        pos += 1;
        if bytes.len() < pos + count {
            return Err(Error::data(
                path,
                None,
                format!(
                    "expected {count} pixel bytes, found {}",
                    bytes.len().saturating_sub(pos)
                ),
            ));
        }
        bytes[pos..pos + count].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            let value = parse_header_number(path, next_token(&bytes, &mut pos), "pixel")?;
            if value > 255 {
                return Err(Error::data(path, None, format!("pixel {value} > 255")));
            }
            pixels.push(value as u8);
        }
        pixels
    };

    Ok(ParsedPgm {
        width,
        height,
        pixels: raw.into_iter().map(|b| b as f64 / 255.0).collect(),
    })
}

/// Loads the given files, in order, into a frame sequence.
pub fn load_frame_files(paths: &[PathBuf]) -> Result<FrameSequence> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no frame files given".into()));
    }
    let mut frames: Vec<ParsedPgm> = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let parsed = parse_pgm(path)?;
        if index > 0 {
            let first = &frames[0];
            if parsed.width != first.width || parsed.height != first.height {
                return Err(Error::Data {
                    path: None,
                    line: None,
                    msg: format!(
                        "frame size mismatch: {} is {}x{} but {} is {}x{}",
                        paths[0].display(),
                        first.width,
                        first.height,
                        path.display(),
                        parsed.width,
                        parsed.height
                    ),
                });
            }
        }
        frames.push(parsed);
    }
    let width = frames[0].width;
    let height = frames[0].height;
    let data = DataMatrix::from_fn(frames.len(), width * height, |i, j| frames[i].pixels[j]);
    Ok(FrameSequence {
        height,
        width,
        data,
    })
}

/// Loads every `.pgm` file in a directory, ordered by file name.
pub fn load_frames(dir: &Path) -> Result<FrameSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_pgm = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("pgm"))
            .unwrap_or(false);
        if path.is_file() && is_pgm {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(Error::data(dir, None, "no .pgm files found"));
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    load_frame_files(&paths)
}

/// Writes one frame as binary P5, clamping values to `[0, 1]` and scaling
/// to 8 bits.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Dimension(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(
        pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_ascii(path: &Path, w: usize, h: usize, value: u8) {
        let mut text = format!("P2\n{w} {h}\n255\n");
        for _ in 0..w * h {
            text.push_str(&format!("{value} "));
        }
        fs::write(path, text).unwrap();
    }

    #[test]
    fn constant_ascii_frames_become_ones() {
        let dir = tempdir().unwrap();
        write_ascii(&dir.path().join("a.pgm"), 4, 4, 255);
        write_ascii(&dir.path().join("b.pgm"), 4, 4, 255);
        let seq = load_frames(dir.path()).unwrap();
        assert_eq!(seq.frames(), 2);
        assert_eq!(seq.data.ncols(), 16);
        assert!(seq.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn binary_and_ascii_encodings_agree() {
        let dir = tempdir().unwrap();
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();

        let ascii = dir.path().join("a.pgm");
        let mut text = String::from("P2\n4 3\n255\n");
        for px in &pixels {
            text.push_str(&format!("{px}\n"));
        }
        fs::write(&ascii, text).unwrap();

        let binary = dir.path().join("b.pgm");
        let mut bytes = b"P5\n4 3\n255\n".to_vec();
        bytes.extend(&pixels);
        fs::write(&binary, bytes).unwrap();

        let seq = load_frame_files(&[ascii, binary]).unwrap();
        assert_eq!(seq.data.row(0), seq.data.row(1));
    }

    #[test]
    fn mismatched_sizes_name_both_files() {
        let dir = tempdir().unwrap();
        write_ascii(&dir.path().join("a.pgm"), 4, 4, 10);
        write_ascii(&dir.path().join("b.pgm"), 8, 8, 10);
        let err = load_frames(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a.pgm") && msg.contains("b.pgm"), "{msg}");
    }

    #[test]
    fn unsupported_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        fs::write(&path, "P3\n1 1\n255\n0 0 0\n").unwrap();
        let msg = load_frame_files(&[path]).unwrap_err().to_string();
        assert!(msg.contains("P3"), "{msg}");
    }

    #[test]
    fn comments_in_headers_are_skipped() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        fs::write(&path, "P2\n# a comment\n2 1\n255\n7 8\n").unwrap();
        let seq = load_frame_files(&[path]).unwrap();
        assert_eq!(seq.width, 2);
        assert_eq!(seq.height, 1);
    }

    #[test]
    fn write_then_read_quantizes_to_8_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.pgm");
        let pixels = vec![0.0, 0.25, 0.5, 1.0, 1.5, -0.5];
        write_pgm(&path, 3, 2, &pixels).unwrap();
        let seq = load_frame_files(&[path]).unwrap();
        let expected = [
            0.0,
            (0.25f64 * 255.0).round() / 255.0,
            128.0 / 255.0,
            1.0,
            1.0,
            0.0,
        ];
        for (a, b) in seq.data.iter().zip(expected.iter()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}
