//! Minimal 8-bit RGB raster used for rollout frames.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, 3 bytes per pixel, row 0 at the top.
    pub data: Vec<u8>,
}

pub type Rgb = [u8; 3];

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        RgbImage { width, height, data }
    }

    /// Converts an h×w×3 buffer of values in [0, 1].
    pub fn from_unit_floats(width: usize, height: usize, pixels: &[f32]) -> Self {
        let data = pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        RgbImage { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        for y in y0.min(y1)..=y0.max(y1) {
            for x in x0.min(x1)..=x0.max(x1) {
                self.put(x, y, c);
            }
        }
    }

    pub fn fill_circle(&mut self, cx: f32, cy: f32, r: f32, c: Rgb) {
        let (x0, x1) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
        let (y0, y1) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.put(x, y, c);
                }
            }
        }
    }

    /// Thick line by stamping discs along the segment.
    pub fn draw_line(&mut self, x0: f32, y0: f32, x1: f32, y1: f32, width: f32, c: Rgb) {
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let n = (len.ceil() as usize).max(1);
        for i in 0..=n {
            let t = i as f32 / n as f32;
            self.fill_circle(x0 + t * (x1 - x0), y0 + t * (y1 - y0), width / 2.0, c);
        }
    }
    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    /// Parses a binary PPM with maxval 255; `#` comments are allowed in the header.
    pub fn from_ppm(bytes: &[u8], file: &str) -> Result<RgbImage> {
        let err = |field: &'static str, detail: String| Error::Format { file: file.to_string(), field, detail };
        let mut pos = 0;
        let mut token = |what: &'static str| -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err(what, "header ends early".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token("magic")?;
        if magic != "P6" {
            return Err(err("magic", format!("expected P6, found {magic}")));
        }
        let mut number = |what: &'static str| -> Result<usize> {
            let t = token(what)?;
            t.parse().map_err(|_| err(what, format!("not a number: {t}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if maxval != 255 {
            return Err(err("maxval", format!("only 255 is supported, found {maxval}")));
        }
        let body = &bytes[(pos + 1).min(bytes.len())..];
        if body.len() != width * height * 3 {
            return Err(err("data", format!("expected {} pixel bytes, found {}", width * height * 3, body.len())));
        }
        Ok(RgbImage { width, height, data: body.to_vec() })
    }
}
