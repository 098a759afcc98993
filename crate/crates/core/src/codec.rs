//! Keyed block-LSB embedding.
//!
//! Every block of the key's grid carries one message bit. Within a block the
//! pixel at position `p` stores that bit in the bit-plane chosen by pattern bit
//! `p mod 16` (0 selects the first LSB, 1 the second), and the decoder takes a
//! majority vote over the block. Only one channel of an RGB image is used.
//!
//! The bitstream of one image is a 40-bit header (magic `0xA5`, frame index,
//! total frames, big-endian `u16` payload length) followed by the payload,
//! every byte MSB first. Messages that do not fit one image are split into
//! frames across several covers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::key::{Pattern, StegoKey};
use crate::metrics::frame_capacity;

pub const FRAME_MAGIC: u8 = 0xA5;
pub const HEADER_BITS: usize = 40;
/// Channel used for RGB covers unless configured otherwise (blue).
pub const DEFAULT_RGB_CHANNEL: usize = 2;

/// 8-bit samples, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        if samples.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height}x{channels} needs {expected} samples, got {}",
                samples.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn gray(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, samples)
    }

    pub fn rgb(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, channel: usize) -> usize {
        (y * self.width + x) * self.channels + channel
    }

    pub fn sample(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.samples[self.index(x, y, channel)]
    }
}

/// One image's worth of embedded data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFrame {
    frame_index: u8,
    total_frames: u8,
    payload: Vec<u8>,
}

impl MessageFrame {
    pub fn new(frame_index: u8, total_frames: u8, payload: Vec<u8>) -> Result<Self> {
        if frame_index >= total_frames {
            return Err(Error::InvalidHeader {
                index: frame_index,
                total: total_frames,
            });
        }
        if payload.len() > u16::MAX as usize {
            return Err(Error::CapacityExceeded {
                needed: HEADER_BITS + payload.len() * 8,
                available: HEADER_BITS + u16::MAX as usize * 8,
            });
        }
        Ok(MessageFrame {
            frame_index,
            total_frames,
            payload,
        })
    }

    pub fn frame_index(&self) -> u8 {
        self.frame_index
    }

    pub fn total_frames(&self) -> u8 {
        self.total_frames
    }

    pub fn payload_length(&self) -> u16 {
        self.payload.len() as u16
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn bit_len(&self) -> usize {
        HEADER_BITS + self.payload.len() * 8
    }

    /// Header followed by payload, as embedded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.push(FRAME_MAGIC);
        out.push(self.frame_index);
        out.push(self.total_frames);
        out.extend_from_slice(&self.payload_length().to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

/// Low bit-plane selected by a pattern bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Bit-plane 0 (value 1).
    First,
    /// Bit-plane 1 (value 2).
    Second,
}

impl Plane {
    pub fn index(self) -> u8 {
        match self {
            Plane::First => 0,
            Plane::Second => 1,
        }
    }

    #[inline]
    pub fn mask(self) -> u8 {
        1 << self.index()
    }
}

/// Plane carrying the data bit at in-block position `position`.
#[inline]
pub fn select_plane(pattern: Pattern, position: usize) -> Plane {
    if pattern.bit(position % Pattern::LEN) {
        Plane::Second
    } else {
        Plane::First
    }
}

#[inline]
fn write_plane(sample: u8, plane: Plane, bit: bool) -> u8 {
    let mask = plane.mask();
    if bit {
        sample | mask
    } else {
        sample & !mask
    }
}

pub fn embed_bit_in_block(pixels: &[u8], pattern: Pattern, data_bit: bool) -> Vec<u8> {
    pixels
        .iter()
        .enumerate()
        .map(|(p, &s)| write_plane(s, select_plane(pattern, p), data_bit))
        .collect()
}

/// Majority vote over the designated planes; a tie decodes to 1.
pub fn extract_bit_from_block(pixels: &[u8], pattern: Pattern) -> bool {
    let ones = pixels
        .iter()
        .enumerate()
        .filter(|(p, &s)| s & select_plane(pattern, *p).mask() != 0)
        .count();
    2 * ones >= pixels.len()
}

fn bytes_to_bits(bytes: &[u8]) -> impl Iterator<Item = bool> + '_ {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
}

/// Embeds and extracts frames under one key.
#[derive(Debug, Clone, Copy)]
pub struct Codec {
    key: StegoKey,
    rgb_channel: usize,
}

impl Codec {
    pub fn new(key: StegoKey) -> Self {
        Codec {
            key,
            rgb_channel: DEFAULT_RGB_CHANNEL,
        }
    }

    /// Selects the channel carrying data in RGB images. Grayscale images
    /// always use their only channel.
    pub fn with_rgb_channel(mut self, channel: usize) -> Self {
        self.rgb_channel = channel;
        self
    }

    pub fn key(&self) -> &StegoKey {
        &self.key
    }

    /// Channel of `image` that carries data.
    pub fn designated_channel(&self, image: &RasterImage) -> Result<usize> {
        let channel = if image.channels() == 1 {
            0
        } else {
            self.rgb_channel
        };
        if channel >= image.channels() {
            return Err(Error::InvalidChannel {
                channel,
                channels: image.channels(),
            });
        }
        Ok(channel)
    }

    pub fn embed_frame(&self, cover: &RasterImage, frame: &MessageFrame) -> Result<RasterImage> {
        let grid = BlockGrid::new(cover.width(), cover.height(), &self.key)?;
        let channel = self.designated_channel(cover)?;
        let needed = frame.bit_len();
        if needed > grid.block_count() {
            return Err(Error::CapacityExceeded {
                needed,
                available: grid.block_count(),
            });
        }
        let pattern = self.key.pattern();
        let mut stego = cover.clone();
        let bytes = frame.to_bytes();
        for (block, bit) in bytes_to_bits(&bytes).enumerate() {
            for (p, (x, y)) in grid.block_coords(block)?.enumerate() {
                let i = stego.index(x, y, channel);
                stego.samples[i] = write_plane(stego.samples[i], select_plane(pattern, p), bit);
            }
        }
        Ok(stego)
    }

    pub fn extract_frame(&self, stego: &RasterImage) -> Result<MessageFrame> {
        let grid = BlockGrid::new(stego.width(), stego.height(), &self.key)?;
        let channel = self.designated_channel(stego)?;
        let reader = BlockReader {
            image: stego,
            grid: &grid,
            channel,
            pattern: self.key.pattern(),
        };
        let blocks = grid.block_count();
        if blocks < HEADER_BITS {
            // Still report a wrong magic when it is readable.
            if blocks >= 8 {
                let magic = reader.byte(0)?;
                if magic != FRAME_MAGIC {
                    return Err(Error::BadMagic { found: magic });
                }
            }
            return Err(Error::TruncatedFrame {
                declared: 0,
                available: 0,
            });
        }
        let magic = reader.byte(0)?;
        if magic != FRAME_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let index = reader.byte(1)?;
        let total = reader.byte(2)?;
        let declared = u16::from_be_bytes([reader.byte(3)?, reader.byte(4)?]) as usize;
        if index >= total {
            return Err(Error::InvalidHeader { index, total });
        }
        let available = (blocks - HEADER_BITS) / 8;
        if declared > available {
            return Err(Error::TruncatedFrame {
                declared,
                available,
            });
        }
        let payload = (0..declared)
            .map(|i| reader.byte(5 + i))
            .collect::<Result<Vec<u8>>>()?;
        MessageFrame::new(index, total, payload)
    }

    /// Splits `message` into frames and embeds frame `i` into `covers[i]`.
    ///
    /// The returned list has one image per cover; covers past the frame count
    /// come back unchanged.
    pub fn embed_message(
        &self,
        covers: &[RasterImage],
        message: &[u8],
    ) -> Result<Vec<RasterImage>> {
        let needed = frames_needed(&self.key, message.len())?;
        if needed > covers.len() {
            return Err(Error::NotEnoughCovers {
                needed,
                available: covers.len(),
            });
        }
        let chunk = frame_capacity(&self.key);
        let total = needed as u8;
        let mut out = Vec::with_capacity(covers.len());
        for (i, cover) in covers.iter().enumerate() {
            if i < needed {
                let start = (i * chunk).min(message.len());
                let end = ((i + 1) * chunk).min(message.len());
                let frame = MessageFrame::new(i as u8, total, message[start..end].to_vec())?;
                out.push(self.embed_frame(cover, &frame)?);
            } else {
                out.push(cover.clone());
            }
        }
        Ok(out)
    }

    /// Reassembles a message from its frames, supplied in any order.
    pub fn extract_message(&self, stegos: &[RasterImage]) -> Result<Vec<u8>> {
        if stegos.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut total = None;
        let mut frames = BTreeMap::new();
        for stego in stegos {
            let frame = self.extract_frame(stego)?;
            match total {
                None => total = Some(frame.total_frames()),
                Some(t) if t != frame.total_frames() => {
                    return Err(Error::ConflictingFrames(format!(
                        "total_frames {} disagrees with {}",
                        frame.total_frames(),
                        t
                    )));
                }
                Some(_) => {}
            }
            let index = frame.frame_index();
            if frames.insert(index, frame.into_payload()).is_some() {
                return Err(Error::ConflictingFrames(format!(
                    "frame index {index} appears twice"
                )));
            }
        }
        let total = total.expect("at least one frame");
        if frames.len() < total as usize {
            return Err(Error::MissingFrames {
                have: frames.len(),
                total,
            });
        }
        Ok(frames.into_values().flatten().collect())
    }
}

/// Majority-vote reader over one image's blocks.
struct BlockReader<'a> {
    image: &'a RasterImage,
    grid: &'a BlockGrid,
    channel: usize,
    pattern: Pattern,
}

impl BlockReader<'_> {
    fn bit(&self, block: usize) -> Result<bool> {
        let mut ones = 0;
        let mut len = 0;
        for (p, (x, y)) in self.grid.block_coords(block)?.enumerate() {
            let s = self.image.sample(x, y, self.channel);
            if s & select_plane(self.pattern, p).mask() != 0 {
                ones += 1;
            }
            len += 1;
        }
        Ok(2 * ones >= len)
    }

    fn byte(&self, index: usize) -> Result<u8> {
        (0..8).try_fold(
            0u8,
            |acc, i| Ok((acc << 1) | self.bit(index * 8 + i)? as u8),
        )
    }
}

/// Frames needed to carry `message_len` bytes under `key`. An empty message
/// still takes one frame.
pub fn frames_needed(key: &StegoKey, message_len: usize) -> Result<usize> {
    let chunk = frame_capacity(key);
    if chunk == 0 {
        return Err(Error::CapacityExceeded {
            needed: HEADER_BITS + 8,
            available: key.block_count(),
        });
    }
    let needed = message_len.div_ceil(chunk).max(1);
    if needed > u8::MAX as usize {
        return Err(Error::MessageTooLarge { needed });
    }
    Ok(needed)
}

pub fn embed_frame(
    cover: &RasterImage,
    key: &StegoKey,
    frame: &MessageFrame,
) -> Result<RasterImage> {
    Codec::new(*key).embed_frame(cover, frame)
}

pub fn extract_frame(stego: &RasterImage, key: &StegoKey) -> Result<MessageFrame> {
    Codec::new(*key).extract_frame(stego)
}

pub fn embed_message(
    covers: &[RasterImage],
    key: &StegoKey,
    message: &[u8],
) -> Result<Vec<RasterImage>> {
    Codec::new(*key).embed_message(covers, message)
}

pub fn extract_message(stegos: &[RasterImage], key: &StegoKey) -> Result<Vec<u8>> {
    Codec::new(*key).extract_message(stegos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ZEROS: Pattern = Pattern::from_bits(0);
    const ONES: Pattern = Pattern::from_bits(0xFFFF);

    fn key(rows: u8, cols: u8, bits: u16) -> StegoKey {
        StegoKey::new(rows, cols, Pattern::from_bits(bits)).unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> RasterImage {
        let mut s = vec![0u8; w * h * c];
        rng.fill(&mut s[..]);
        RasterImage::new(w, h, c, s).unwrap()
    }

    #[test]
    fn plane_selection() {
        let p = Pattern::from_bits(0b1010_0000_0000_0000);
        assert_eq!(select_plane(p, 0), Plane::Second);
        assert_eq!(select_plane(p, 1), Plane::First);
        assert_eq!(select_plane(p, 2), Plane::Second);
        assert_eq!(select_plane(p, 16), Plane::Second);
        assert_eq!(select_plane(ZEROS, 7), Plane::First);
        assert_eq!(Plane::First.mask(), 1);
        assert_eq!(Plane::Second.mask(), 2);
    }

    #[test]
    fn embed_bit_examples() {
        assert_eq!(
            embed_bit_in_block(&[10, 11, 12, 13], ZEROS, true),
            [11, 11, 13, 13]
        );
        assert_eq!(
            embed_bit_in_block(&[10, 11, 12, 13], ONES, true),
            [10, 11, 14, 15]
        );
        assert_eq!(
            embed_bit_in_block(&[10, 11, 12, 13], ZEROS, false),
            [10, 10, 12, 12]
        );
    }

    #[test]
    fn extract_bit_examples() {
        assert!(extract_bit_from_block(&[11, 11, 13, 13], ZEROS));
        assert!(extract_bit_from_block(&[11, 11, 13, 12], ZEROS));
        // 2-vs-2 tie
        assert!(extract_bit_from_block(&[11, 10, 13, 12], ZEROS));
        assert!(!extract_bit_from_block(&[10, 10, 13, 12], ZEROS));
    }

    #[test]
    fn frame_validation() {
        assert!(matches!(
            MessageFrame::new(2, 2, vec![]),
            Err(Error::InvalidHeader { .. })
        ));
        let f = MessageFrame::new(0, 1, vec![0x12, 0x34]).unwrap();
        assert_eq!(f.to_bytes(), [0xA5, 0, 1, 0, 2, 0x12, 0x34]);
        assert_eq!(f.bit_len(), 56);
    }

    #[test]
    fn embed_touches_only_leading_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cover = noise(&mut rng, 256, 256, 1);
        let k = key(16, 16, rng.gen());
        let frame = MessageFrame::new(0, 1, vec![0xBE, 0xEF]).unwrap();
        let stego = embed_frame(&cover, &k, &frame).unwrap();
        let grid = BlockGrid::new(256, 256, &k).unwrap();
        let mut modified = 0;
        for y in 0..256 {
            for x in 0..256 {
                if cover.sample(x, y, 0) != stego.sample(x, y, 0) {
                    let b = grid.block_of(x, y).unwrap();
                    assert!(b < 56, "pixel ({x},{y}) in block {b} changed");
                    modified = modified.max(b + 1);
                }
            }
        }
        assert!(modified <= 56);
        assert_eq!(extract_frame(&stego, &k).unwrap(), frame);
    }

    #[test]
    fn capacity_exceeded() {
        let cover = RasterImage::gray(16, 16, vec![0; 256]).unwrap();
        let k = key(6, 8, 0);
        let ok = MessageFrame::new(0, 1, vec![1]).unwrap();
        assert!(embed_frame(&cover, &k, &ok).is_ok());
        let too_big = MessageFrame::new(0, 1, vec![1, 2]).unwrap();
        assert!(matches!(
            embed_frame(&cover, &k, &too_big),
            Err(Error::CapacityExceeded {
                needed: 56,
                available: 48
            })
        ));
    }

    #[test]
    fn small_grid_frames() {
        let cover = RasterImage::gray(8, 8, vec![0; 64]).unwrap();
        let k = key(4, 4, 0);
        assert!(matches!(
            extract_frame(&cover, &k),
            Err(Error::BadMagic { found: 0 })
        ));
        let k = key(2, 2, 0);
        assert!(matches!(
            extract_frame(&cover, &k),
            Err(Error::TruncatedFrame { .. })
        ));
    }

    #[test]
    fn truncated_frame_detected() {
        // A header claiming more payload than the grid holds.
        let k = key(8, 8, 0);
        let cover = RasterImage::gray(8, 8, vec![0; 64]).unwrap();
        let big = key(16, 16, 0);
        let frame = MessageFrame::new(0, 1, vec![7; 4]).unwrap();
        // Embed with a 16x16 grid then read the header bits back through an
        // 8x8 grid of 1-pixel blocks on a freshly built image.
        let wide = RasterImage::gray(16, 16, vec![0; 256]).unwrap();
        let stego = embed_frame(&wide, &big, &frame).unwrap();
        let mut small = cover.clone();
        for i in 0..64 {
            small.samples_mut()[i] = stego.samples()[i];
        }
        assert!(matches!(
            extract_frame(&small, &k),
            Err(Error::TruncatedFrame {
                declared: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn rgb_uses_designated_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cover = noise(&mut rng, 64, 64, 3);
        let k = key(16, 16, rng.gen());
        let frame = MessageFrame::new(0, 1, b"hi".to_vec()).unwrap();
        for channel in 0..3 {
            let codec = Codec::new(k).with_rgb_channel(channel);
            let stego = codec.embed_frame(&cover, &frame).unwrap();
            for (i, (a, b)) in cover.samples().iter().zip(stego.samples()).enumerate() {
                if i % 3 != channel {
                    assert_eq!(a, b);
                }
            }
            assert_eq!(codec.extract_frame(&stego).unwrap(), frame);
        }
        let bad = Codec::new(k).with_rgb_channel(3);
        assert!(matches!(
            bad.embed_frame(&cover, &frame),
            Err(Error::InvalidChannel {
                channel: 3,
                channels: 3
            })
        ));
    }

    #[test]
    fn message_splitting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = key(16, 16, rng.gen());
        let covers: Vec<_> = (0..4).map(|_| noise(&mut rng, 64, 64, 1)).collect();
        let msg: Vec<u8> = (0..60).map(|_| rng.gen()).collect();
        let stegos = embed_message(&covers, &k, &msg).unwrap();
        assert_eq!(stegos.len(), 4);
        assert_eq!(stegos[3], covers[3]);
        let lens: Vec<_> = stegos[..3]
            .iter()
            .map(|s| extract_frame(s, &k).unwrap().payload().len())
            .collect();
        assert_eq!(lens, [27, 27, 6]);
        assert_eq!(extract_message(&stegos[..3], &k).unwrap(), msg);

        let shuffled = vec![stegos[2].clone(), stegos[0].clone(), stegos[1].clone()];
        assert_eq!(extract_message(&shuffled, &k).unwrap(), msg);

        assert!(matches!(
            extract_message(&stegos[..2], &k),
            Err(Error::MissingFrames { have: 2, total: 3 })
        ));
        let dup = vec![stegos[0].clone(), stegos[0].clone(), stegos[1].clone()];
        assert!(matches!(
            extract_message(&dup, &k),
            Err(Error::ConflictingFrames(_))
        ));
        assert!(matches!(extract_message(&[], &k), Err(Error::EmptyInput)));
    }

    #[test]
    fn disagreeing_totals_conflict() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = key(16, 16, rng.gen());
        let cover = noise(&mut rng, 32, 32, 1);
        let a = embed_frame(&cover, &k, &MessageFrame::new(0, 2, vec![1]).unwrap()).unwrap();
        let b = embed_frame(&cover, &k, &MessageFrame::new(1, 3, vec![2]).unwrap()).unwrap();
        assert!(matches!(
            extract_message(&[a, b], &k),
            Err(Error::ConflictingFrames(_))
        ));
    }

    #[test]
    fn message_errors() {
        let cover = RasterImage::gray(64, 64, vec![0; 4096]).unwrap();
        assert!(matches!(
            embed_message(std::slice::from_ref(&cover), &key(7, 6, 0), b"x"),
            Err(Error::CapacityExceeded { .. })
        ));
        let k = key(16, 16, 0);
        assert!(matches!(
            embed_message(std::slice::from_ref(&cover), &k, &[0; 28]),
            Err(Error::NotEnoughCovers {
                needed: 2,
                available: 1
            })
        ));
        assert!(matches!(
            embed_message(&[cover], &k, &[0; 27 * 255 + 1]),
            Err(Error::MessageTooLarge { needed: 256 })
        ));
    }

    #[test]
    fn empty_message_is_one_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = key(16, 16, rng.gen());
        let cover = noise(&mut rng, 64, 64, 1);
        let stegos = embed_message(&[cover], &k, b"").unwrap();
        let frame = extract_frame(&stegos[0], &k).unwrap();
        assert_eq!((frame.total_frames(), frame.payload_length()), (1, 0));
        assert_eq!(extract_message(&stegos, &k).unwrap(), b"");
    }

    #[test]
    fn unmodified_covers_mostly_bad_magic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut bad_magic = 0;
        for _ in 0..200 {
            let cover = crate::testing::natural_cover(&mut rng, 128, 96, 1);
            let k = key(rng.gen_range(8..=32), rng.gen_range(8..=32), rng.gen());
            if matches!(extract_frame(&cover, &k), Err(Error::BadMagic { .. })) {
                bad_magic += 1;
            }
        }
        assert!(bad_magic >= 180, "only {bad_magic}/200 BadMagic");
    }

    /// A wrong pattern with the right geometry misreads only the pixels whose
    /// pattern bit differs; the majority vote absorbs up to 7 of 16 such
    /// positions, so rejection here is well short of universal.
    #[test]
    fn wrong_pattern_same_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut rejected = 0;
        let mut low_distance_recovered = 0;
        let mut low_distance = 0;
        let trials = 200;
        for _ in 0..trials {
            let cover = crate::testing::natural_cover(&mut rng, 64, 64, 1);
            let true_pattern: u16 = rng.gen();
            let mut wrong: u16 = rng.gen();
            while wrong == true_pattern {
                wrong = rng.gen();
            }
            let k = key(16, 16, true_pattern);
            let msg: Vec<u8> = (0..20).map(|_| rng.gen()).collect();
            let stego = embed_message(&[cover], &k, &msg).unwrap();
            let got = extract_message(&stego, &key(16, 16, wrong));
            let distance = (true_pattern ^ wrong).count_ones();
            if distance <= 7 {
                low_distance += 1;
                if got.as_deref() == Ok(&msg[..]) {
                    low_distance_recovered += 1;
                }
            }
            if got.as_deref() != Ok(&msg[..]) {
                rejected += 1;
            }
        }
        eprintln!("wrong-pattern rejection: {rejected}/{trials}");
        // 4x4 blocks: each pattern bit maps to exactly one pixel per block.
        assert_eq!(low_distance_recovered, low_distance);
        let rate = rejected as f64 / trials as f64;
        assert!(rate > 0.3 && rate < 0.7, "rejection rate {rate}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn frame_round_trip(
            seed in any::<u64>(),
            rows in 7u8..=40,
            cols in 7u8..=40,
            bits in any::<u16>(),
            rgb in any::<bool>(),
            len_frac in 0.0f64..=1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = key(rows, cols, bits);
            prop_assume!(frame_capacity(&k) <= 255 && k.block_count() >= HEADER_BITS);
            let w = cols as usize * rng.gen_range(1..=4);
            let h = rows as usize * rng.gen_range(1..=4);
            let cover = noise(&mut rng, w, h, if rgb { 3 } else { 1 });
            let len = (frame_capacity(&k) as f64 * len_frac) as usize;
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let frame = MessageFrame::new(0, 1, payload).unwrap();
            let stego = embed_frame(&cover, &k, &frame).unwrap();
            for (a, b) in cover.samples().iter().zip(stego.samples()) {
                prop_assert_eq!(a & 0xFC, b & 0xFC);
                prop_assert!((*a as i16 - *b as i16).abs() <= 2);
            }
            prop_assert_eq!(extract_frame(&stego, &k).unwrap(), frame);
        }

        #[test]
        fn majority_survives_minority_flips(seed in any::<u64>(), bw in 3usize..=6, bh in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = key(8, 8, rng.gen());
            let cover = noise(&mut rng, 8 * bw, 8 * bh, 1);
            let frame = MessageFrame::new(0, 1, vec![rng.gen(), rng.gen(), rng.gen()]).unwrap();
            let mut stego = embed_frame(&cover, &k, &frame).unwrap();
            let grid = BlockGrid::new(stego.width(), stego.height(), &k).unwrap();
            let n = grid.block_len();
            for b in 0..grid.block_count() {
                let coords: Vec<_> = grid.block_coords(b).unwrap().collect();
                // Adversarial: flip the first (n-1)/2 designated bits.
                for (p, &(x, y)) in coords.iter().enumerate().take((n - 1) / 2) {
                    let i = stego.index(x, y, 0);
                    stego.samples_mut()[i] ^= select_plane(k.pattern(), p).mask();
                }
            }
            prop_assert_eq!(extract_frame(&stego, &k).unwrap(), frame);
        }
    }
}
