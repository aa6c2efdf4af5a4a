//! Evaluation metrics: METEOR for chains, pass@1 for chart rendering, and
//! PSNR / SSIM / MS-SSIM on grayscale rasters.

mod eval;
mod image;
mod meteor;

pub use eval::{evaluate_dirs, EvalError, EvalReport, PairScore, UNAVAILABLE_METRICS};
pub use image::{GrayImage, ImageError};
pub use meteor::{meteor_score, stem};

use serde::{Deserialize, Serialize};

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const MS_SSIM_LEVELS: usize = 3;
pub const MS_SSIM_MIN_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("empty input")]
    EmptyInput,
    #[error("no samples")]
    NoSamples,
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("image {0}x{1} is too small (minimum side {2})")]
    TooSmall(usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
}

/// Fraction of generations that rendered without error.
pub fn pass_at_1(outcomes: &[Outcome]) -> Result<f64, MetricError> {
    if outcomes.is_empty() {
        return Err(MetricError::NoSamples);
    }
    let ok = outcomes.iter().filter(|o| o.success).count();
    Ok(ok as f64 / outcomes.len() as f64)
}

fn same_size(a: &GrayImage, b: &GrayImage) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::SizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricError> {
    same_size(a, b)?;
    let n = a.pixels().len() as f64;
    Ok(a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// `10·log10(1/MSE)` for intensities in [0, 1], capped at [`PSNR_CAP`].
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricError> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SsimMode {
    Single,
    MultiScale,
}

/// SSIM of one window pair from its moments.
pub fn ssim_from_moments(mu_x: f64, mu_y: f64, var_x: f64, var_y: f64, cov: f64) -> f64 {
    ((2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2))
}

fn window_moments(a: &GrayImage, b: &GrayImage, x0: usize, y0: usize) -> (f64, f64, f64, f64, f64) {
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in y0..y0 + SSIM_WINDOW {
        for x in x0..x0 + SSIM_WINDOW {
            sx += a.get(x, y);
            sy += b.get(x, y);
        }
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for y in y0..y0 + SSIM_WINDOW {
        for x in x0..x0 + SSIM_WINDOW {
            let dx = a.get(x, y) - mx;
            let dy = b.get(x, y) - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    }
    (mx, my, vx / n, vy / n, cxy / n)
}

/// Mean SSIM over non-overlapping 8×8 windows; partial edge windows are skipped.
fn ssim_single(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricError> {
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(MetricError::TooSmall(a.width(), a.height(), SSIM_WINDOW));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in (0..=a.height() - SSIM_WINDOW).step_by(SSIM_WINDOW) {
        for x0 in (0..=a.width() - SSIM_WINDOW).step_by(SSIM_WINDOW) {
            let (mx, my, vx, vy, cxy) = window_moments(a, b, x0, y0);
            total += ssim_from_moments(mx, my, vx, vy, cxy);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn ssim(a: &GrayImage, b: &GrayImage, mode: SsimMode) -> Result<f64, MetricError> {
    same_size(a, b)?;
    match mode {
        SsimMode::Single => ssim_single(a, b),
        SsimMode::MultiScale => {
            if a.width().min(a.height()) < MS_SSIM_MIN_SIDE {
                return Err(MetricError::TooSmall(a.width(), a.height(), MS_SSIM_MIN_SIDE));
            }
            let (mut x, mut y) = (a.clone(), b.clone());
            let mut product = 1.0;
            for level in 0..MS_SSIM_LEVELS {
                if level > 0 {
                    x = x.downsample2();
                    y = y.downsample2();
                }
                // Negative structure scores would make the geometric mean undefined.
                product *= ssim_single(&x, &y)?.max(0.0);
            }
            if product == 1.0 {
                return Ok(1.0);
            }
            Ok(product.powf(1.0 / MS_SSIM_LEVELS as f64))
        }
    }
}
