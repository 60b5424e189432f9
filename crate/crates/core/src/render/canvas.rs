//! Minimal RGB raster with bitmap-font text.

use font8x8::legacy::BASIC_LEGACY;

use crate::error::{Error, Result};

pub const GLYPH: usize = 8;
pub const WHITE: [u8; 3] = [255, 255, 255];
pub const INK: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Canvas {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Canvas { width, height, data }
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn fill_rect(&mut self, x: usize, y: usize, w: usize, h: usize, rgb: [u8; 3]) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.put(xx, yy, rgb);
            }
        }
    }

    pub fn hline(&mut self, x0: usize, x1: usize, y: usize, rgb: [u8; 3]) {
        for x in x0..=x1 {
            self.put(x, y, rgb);
        }
    }

    pub fn vline(&mut self, x: usize, y0: usize, y1: usize, rgb: [u8; 3]) {
        for y in y0..=y1 {
            self.put(x, y, rgb);
        }
    }

    fn glyph(c: char) -> [u8; 8] {
        let code = c as usize;
        if code < 128 {
            BASIC_LEGACY[code]
        } else {
            BASIC_LEGACY[b'?' as usize]
        }
    }

    /// Draws `text` with its top-left corner at (x, y).
    pub fn text(&mut self, x: usize, y: usize, text: &str, rgb: [u8; 3]) {
        for (i, c) in text.chars().enumerate() {
            let g = Self::glyph(c);
            for (row, bits) in g.iter().enumerate() {
                for col in 0..GLYPH {
                    if bits & (1 << col) != 0 {
                        self.put(x + i * GLYPH + col, y + row, rgb);
                    }
                }
            }
        }
    }

    /// Draws `text` rotated a quarter turn counter-clockwise, reading bottom to
    /// top, with the bounding box's top-left at (x, y).
    pub fn text_vertical(&mut self, x: usize, y: usize, text: &str, rgb: [u8; 3]) {
        let n = text.chars().count();
        for (i, c) in text.chars().enumerate() {
            let g = Self::glyph(c);
            let base_y = y + (n - 1 - i) * GLYPH;
            for (row, bits) in g.iter().enumerate() {
                for col in 0..GLYPH {
                    if bits & (1 << col) != 0 {
                        self.put(x + row, base_y + (GLYPH - 1 - col), rgb);
                    }
                }
            }
        }
    }

    pub fn text_width(text: &str) -> usize {
        text.chars().count() * GLYPH
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Default);
            enc.set_filter(png::FilterType::Sub);
            enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
            let mut w = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
            w.write_image_data(&self.data).map_err(|e| Error::Image(e.to_string()))?;
        }
        Ok(out)
    }
}

/// Decodes an 8-bit RGB or RGBA PNG into an RGB canvas.
pub fn decode_png(bytes: &[u8]) -> Result<Canvas> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| Error::Image(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Image(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Image(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data = match info.color_type {
        png::ColorType::Rgb => buf[..w * h * 3].to_vec(),
        png::ColorType::Rgba => buf[..w * h * 4]
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        png::ColorType::Grayscale => buf[..w * h].iter().flat_map(|&g| [g, g, g]).collect(),
        other => return Err(Error::Image(format!("unsupported colour type {other:?}"))),
    };
    Ok(Canvas { width: w, height: h, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let mut c = Canvas::new(13, 7, WHITE);
        c.put(3, 4, [1, 2, 3]);
        c.text(0, 0, "A", INK);
        let back = decode_png(&c.encode_png().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn text_draws_ink_inside_its_box() {
        let mut c = Canvas::new(40, 20, WHITE);
        c.text(4, 4, "Hz", INK);
        let inked: Vec<(usize, usize)> = (0..20)
            .flat_map(|y| (0..40).map(move |x| (x, y)))
            .filter(|&(x, y)| c.pixel(x, y) == INK)
            .collect();
        assert!(!inked.is_empty());
        assert!(inked.iter().all(|&(x, y)| (4..20).contains(&x) && (4..12).contains(&y)));
    }

    #[test]
    fn vertical_text_box() {
        let mut c = Canvas::new(20, 40, WHITE);
        c.text_vertical(2, 3, "Hz", INK);
        for y in 0..40 {
            for x in 0..20 {
                if c.pixel(x, y) == INK {
                    assert!((2..10).contains(&x) && (3..19).contains(&y));
                }
            }
        }
    }
}
