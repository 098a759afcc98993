//! Imperceptibility, accuracy and capacity measures.

use std::fmt;

use crate::codec::{RasterImage, HEADER_BITS};
use crate::error::{Error, Result};
use crate::key::StegoKey;

/// Peak signal-to-noise ratio in dB. Identical images have infinite PSNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Self {
        if mse == 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (255.0f64 * 255.0 / mse).log10())
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Psnr::Infinite)
    }

    /// Value in dB, with `f64::INFINITY` for identical images.
    pub fn db(&self) -> f64 {
        match self {
            Psnr::Finite(v) => *v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.4}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr_db: Psnr,
    pub max_abs_diff: u8,
}

/// Single-line `key=value` record.
impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mse={:.6} psnr_db={} max_abs_diff={}",
            self.mse, self.psnr_db, self.max_abs_diff
        )
    }
}

fn report<'a>(pairs: impl Iterator<Item = (&'a u8, &'a u8)>) -> QualityReport {
    let mut sum = 0u64;
    let mut n = 0u64;
    let mut max = 0u8;
    for (&a, &b) in pairs {
        let d = a.abs_diff(b);
        sum += d as u64 * d as u64;
        max = max.max(d);
        n += 1;
    }
    let mse = if n == 0 { 0.0 } else { sum as f64 / n as f64 };
    QualityReport {
        mse,
        psnr_db: Psnr::from_mse(mse),
        max_abs_diff: max,
    }
}

fn check_shape(a: &RasterImage, b: &RasterImage) -> Result<()> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

/// MSE, PSNR and peak difference over every sample of every channel.
pub fn compare(a: &RasterImage, b: &RasterImage) -> Result<QualityReport> {
    check_shape(a, b)?;
    Ok(report(a.samples().iter().zip(b.samples())))
}

/// Same as [`compare`], restricted to one channel.
pub fn compare_channel(a: &RasterImage, b: &RasterImage, channel: usize) -> Result<QualityReport> {
    check_shape(a, b)?;
    if channel >= a.channels() {
        return Err(Error::InvalidChannel {
            channel,
            channels: a.channels(),
        });
    }
    let c = a.channels();
    Ok(report(
        a.samples().iter().zip(b.samples()).skip(channel).step_by(c),
    ))
}

pub fn bit_error_rate(sent: &[bool], received: &[bool]) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::LengthMismatch {
            left: sent.len(),
            right: received.len(),
        });
    }
    if sent.is_empty() {
        return Err(Error::EmptyInput);
    }
    let errors = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / sent.len() as f64)
}

/// Bit error rate between two byte strings, bit by bit.
pub fn byte_bit_error_rate(sent: &[u8], received: &[u8]) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::LengthMismatch {
            left: sent.len(),
            right: received.len(),
        });
    }
    if sent.is_empty() {
        return Err(Error::EmptyInput);
    }
    let errors: u32 = sent
        .iter()
        .zip(received)
        .map(|(a, b)| (a ^ b).count_ones())
        .sum();
    Ok(errors as f64 / (sent.len() * 8) as f64)
}

/// Payload bytes one frame can carry: `floor((rows*cols - 40) / 8)`, never negative.
pub fn frame_capacity(key: &StegoKey) -> usize {
    key.block_count().saturating_sub(HEADER_BITS) / 8
}
