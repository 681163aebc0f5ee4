//! Minimal PNG charts: bars and heatmaps, no text. The matching CSV next to
//! each image carries the labels and values.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};

const BAR_W: u32 = 24;
const GAP: u32 = 6;
const HEIGHT: u32 = 240;
const MARGIN: u32 = 12;
const CELL: u32 = 36;

fn encode(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::Serialize(format!("png: {e}")))?;
    Ok(buf.into_inner())
}

/// Vertical bars scaled to the largest value.
pub fn bar_chart(values: &[f64]) -> Result<Vec<u8>> {
    let n = values.len().max(1) as u32;
    let width = 2 * MARGIN + n * BAR_W + (n - 1) * GAP;
    let mut img = RgbImage::from_pixel(width, HEIGHT, Rgb([255, 255, 255]));
    let max = values.iter().copied().fold(0.0, f64::max);
    let usable = HEIGHT - 2 * MARGIN;
    for (i, &v) in values.iter().enumerate() {
        let h = if max > 0.0 { ((v.max(0.0) / max) * usable as f64).round() as u32 } else { 0 };
        let x0 = MARGIN + i as u32 * (BAR_W + GAP);
        for x in x0..x0 + BAR_W {
            for y in (HEIGHT - MARGIN - h)..(HEIGHT - MARGIN) {
                img.put_pixel(x, y, Rgb([52, 101, 164]));
            }
        }
    }
    for x in MARGIN / 2..width - MARGIN / 2 {
        img.put_pixel(x, HEIGHT - MARGIN, Rgb([0, 0, 0]));
    }
    encode(&img)
}

/// Row-major heatmap; cell intensity is value / max.
pub fn heatmap(rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let r = rows.len().max(1) as u32;
    let c = rows.iter().map(Vec::len).max().unwrap_or(0).max(1) as u32;
    let mut img = RgbImage::from_pixel(2 * MARGIN + c * CELL, 2 * MARGIN + r * CELL, Rgb([255, 255, 255]));
    let max = rows.iter().flatten().copied().fold(0.0, f64::max);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
            let shade = |full: f64| (255.0 - t * (255.0 - full)).round() as u8;
            let color = Rgb([shade(8.0), shade(48.0), shade(107.0)]);
            let (x0, y0) = (MARGIN + j as u32 * CELL, MARGIN + i as u32 * CELL);
            for x in x0..x0 + CELL - 1 {
                for y in y0..y0 + CELL - 1 {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    encode(&img)
}
