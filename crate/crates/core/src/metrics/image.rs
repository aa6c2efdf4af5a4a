use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a binary PGM: {0}")]
    Format(String),
}

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Black image.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self { width, height, pixels: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        let mut img = Self::new(width, height);
        img.pixels.fill(value.clamp(0.0, 1.0));
        img
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.pixels[y * width + x] = f(x, y).clamp(0.0, 1.0);
            }
        }
        img
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Option<Self> {
        (width > 0
            && height > 0
            && pixels.len() == width * height
            && pixels.iter().all(|p| (0.0..=1.0).contains(p)))
        .then_some(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// 2×2 mean pool; an odd trailing row or column is dropped.
    pub fn downsample2(&self) -> Self {
        let (w, h) = ((self.width / 2).max(1), (self.height / 2).max(1));
        Self::from_fn(w, h, |x, y| {
            let (x0, y0) = (2 * x, 2 * y);
            let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
            (self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1)) / 4.0
        })
    }

    /// Binary P5 with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| (p * 255.0).round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ImageError> {
        let bad = |m: &str| ImageError::Format(m.to_string());
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
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
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        pos += 1; // single whitespace byte before the raster
        if fields[0] != "P5" {
            return Err(bad("magic is not P5"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("header number"));
        let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if w == 0 || h == 0 || maxval == 0 || maxval > 255 {
            return Err(bad("unsupported dimensions or maxval"));
        }
        let data = bytes.get(pos..pos + w * h).ok_or_else(|| bad("truncated raster"))?;
        let pixels = data.iter().map(|&b| b as f64 / maxval as f64).collect();
        Ok(Self { width: w, height: h, pixels })
    }

    pub fn read_pgm(path: &Path) -> Result<Self, ImageError> {
        Self::from_pgm(&std::fs::read(path)?)
    }
}
