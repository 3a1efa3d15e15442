use std::io::Cursor;

use super::{parse_world_file, FormatError, GeoTransform};

/// An 8-bit RGB pixel grid with its georeference.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pub transform: GeoTransform,
}

impl GeoRaster {
    /// `pixels` must be row-major RGB triples, exactly `width·height·3` bytes.
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<u8>,
        transform: GeoTransform,
    ) -> Result<Self, FormatError> {
        if width == 0 || height == 0 {
            return Err(FormatError::CorruptImage("raster has zero extent".into()));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(FormatError::CorruptImage(format!(
                "expected {expected} bytes of RGB data, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            transform,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3], transform: GeoTransform) -> Self {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, pixels, transform).expect("nonzero extent")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn rgb(&self, col: u32, row: u32) -> [u8; 3] {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_rgb(&mut self, col: u32, row: u32, rgb: [u8; 3]) {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies the window `[col, col+w) × [row, row+h)`; the caller guarantees
    /// it lies inside the raster.
    pub(crate) fn window(&self, col: u32, row: u32, w: u32, h: u32) -> GeoRaster {
        let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
        let stride = self.width as usize * 3;
        for r in row..row + h {
            let start = r as usize * stride + col as usize * 3;
            pixels.extend_from_slice(&self.pixels[start..start + w as usize * 3]);
        }
        GeoRaster {
            width: w,
            height: h,
            pixels,
            transform: self.transform.shifted(col, row),
        }
    }
}

/// Decodes an 8-bit RGB PNG into `(width, height, pixels)`.
pub fn decode_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), FormatError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| FormatError::CorruptImage(e.to_string()))?;
    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    if color != png::ColorType::Rgb || depth != png::BitDepth::Eight {
        return Err(FormatError::UnsupportedPixelFormat(format!(
            "{color:?}, {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| FormatError::CorruptImage("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| FormatError::CorruptImage(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    Ok((frame.width, frame.height, buf))
}

pub fn encode_png(width: u32, height: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("writing to memory");
        writer
            .write_image_data(pixels)
            .expect("pixel buffer sized by caller");
        writer.finish().expect("writing to memory");
    }
    out
}

/// PNG bytes plus sidecar world-file text.
pub fn read_raster(png_bytes: &[u8], world_file: &str) -> Result<GeoRaster, FormatError> {
    let transform = parse_world_file(world_file)?;
    let (w, h, pixels) = decode_png(png_bytes)?;
    GeoRaster::new(w, h, pixels, transform)
}
