//! Grayscale image handling: normalisation with histogram equalisation,
//! motif rendering for the synthetic corpus, and P5 portable graymap I/O.

use std::io::Write;
use std::path::Path;

use super::catalogue::{Motif, Shape};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

/// Min-max scale to [0,1], quantise to 0-255 (truncating), then histogram
/// equalisation with the first non-zero cumulative count excluded:
/// v -> round((cdf(v) - cdf_min) / (N - cdf_min) * 255).
pub fn normalise_image(grid: &[Vec<f64>]) -> Result<GrayImage> {
    if grid.is_empty() || grid[0].is_empty() {
        return Err(CoreError::Image("expected a non-empty 2D grid".into()));
    }
    let height = grid.len();
    let width = grid[0].len();
    if grid.iter().any(|r| r.len() != width) {
        return Err(CoreError::Image("expected a rectangular 2D grid".into()));
    }
    let mut min_val = f64::INFINITY;
    let mut max_val = f64::NEG_INFINITY;
    for row in grid {
        for &v in row {
            if !v.is_finite() {
                return Err(CoreError::Image("non-finite pixel".into()));
            }
            min_val = min_val.min(v);
            max_val = max_val.max(v);
        }
    }
    let denom = max_val - min_val;
    if denom == 0.0 {
        return Err(CoreError::Image(format!(
            "Cannot normalise image with zero dynamic range (min=max={min_val})."
        )));
    }

    let mut quantised = Vec::with_capacity(width * height);
    for row in grid {
        for &v in row {
            let scaled = (v - min_val) / denom;
            quantised.push((scaled * 255.0) as u8);
        }
    }
    Ok(equalise(&quantised, width, height))
}

fn equalise(pixels: &[u8], width: usize, height: usize) -> GrayImage {
    let n = pixels.len() as f64;
    let mut hist = [0u64; 256];
    for &p in pixels {
        hist[p as usize] += 1;
    }
    let mut cdf = [0u64; 256];
    let mut acc = 0u64;
    for (i, &h) in hist.iter().enumerate() {
        acc += h;
        cdf[i] = acc;
    }
    let cdf_min = cdf
        .iter()
        .copied()
        .find(|&c| c > 0)
        .expect("non-empty image") as f64;
    let mut lut = [0u8; 256];
    for i in 0..256 {
        let v = if n - cdf_min > 0.0 {
            ((cdf[i] as f64 - cdf_min) / (n - cdf_min) * 255.0).round()
        } else {
            // single populated bin cannot occur here (zero range errors out),
            // but guard the division anyway
            0.0
        };
        lut[i] = v.clamp(0.0, 255.0) as u8;
    }
    GrayImage {
        width,
        height,
        pixels: pixels.iter().map(|&p| lut[p as usize]).collect(),
    }
}

/// Renders a synthetic image: a smooth anatomical backdrop plus one motif
/// per planted finding, plus seeded pixel noise supplied by the caller.
pub fn render_image(size: usize, motifs: &[Motif], noise: &[f64], lateral: bool) -> Vec<Vec<f64>> {
    assert_eq!(noise.len(), size * size);
    let mut grid = vec![vec![0.0f64; size]; size];
    let c = size as f64 / 2.0;
    for (y, row) in grid.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            // vignette backdrop standing in for the thorax
            let dx = (x as f64 - c) / c;
            let dy = (y as f64 - c) / c;
            let r2 = dx * dx + dy * dy;
            let base = if lateral { 70.0 } else { 90.0 };
            *v = base * (1.0 - 0.6 * r2).max(0.0) + 8.0 * noise[y * size + x];
        }
    }
    for m in motifs {
        stamp(&mut grid, size, m, lateral);
    }
    grid
}

fn stamp(grid: &mut [Vec<f64>], size: usize, m: &Motif, lateral: bool) {
    let half = size / 2;
    let (qx, qy) = match m.quadrant {
        0 => (0, 0),
        1 => (half, 0),
        2 => (0, half),
        _ => (half, half),
    };
    // lateral views show the same motif shifted, mimicking projection change
    let shift = if lateral { size / 8 } else { 0 };
    let cx = qx + half / 2 + shift;
    let cy = qy + half / 2;
    let rad = size / 6;
    let amp = m.intensity as f64;
    for y in qy..(qy + half).min(size) {
        for x in qx..(qx + half).min(size) {
            let inside = match m.shape {
                Shape::Disk => {
                    let (dx, dy) = (x as f64 - cx as f64, y as f64 - cy as f64);
                    dx * dx + dy * dy <= (rad * rad) as f64
                }
                Shape::Square => {
                    x.abs_diff(cx) <= rad && y.abs_diff(cy) <= rad
                }
                Shape::Bar => y.abs_diff(cy) <= rad / 3,
                Shape::Stripes => (x / 3) % 2 == 0,
                Shape::Checker => ((x / 4) + (y / 4)) % 2 == 0,
                Shape::Wedge => x.saturating_sub(qx) + y.saturating_sub(qy) <= half,
                Shape::Ring => {
                    let (dx, dy) = (x as f64 - cx as f64, y as f64 - cy as f64);
                    let d2 = dx * dx + dy * dy;
                    let r = rad as f64;
                    d2 >= (r - 2.0) * (r - 2.0) && d2 <= (r + 2.0) * (r + 2.0)
                }
            };
            if inside {
                grid[y][x] += amp;
            }
        }
    }
}

pub fn write_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", image.width, image.height)?;
    f.write_all(&image.pixels)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    let header_err = || CoreError::Image(format!("bad PGM header in {}", path.display()));
    // P5 header: magic, width, height, maxval, single whitespace, raster
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| header_err())?);
    }
    if fields.len() != 4 || fields[0] != "P5" || fields[3] != "255" {
        return Err(header_err());
    }
    let width: usize = fields[1].parse().map_err(|_| header_err())?;
    let height: usize = fields[2].parse().map_err(|_| header_err())?;
    pos += 1; // single whitespace after maxval
    if bytes.len() < pos + width * height {
        return Err(CoreError::Image(format!(
            "truncated PGM raster in {}",
            path.display()
        )));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[pos..pos + width * height].to_vec(),
    })
}
