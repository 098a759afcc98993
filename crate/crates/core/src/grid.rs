//! Partition of an image into the key's R×C pixel blocks.
//!
//! Blocks are all exactly `floor(width / cols)` by `floor(height / rows)`
//! pixels. Remainder columns on the right and rows at the bottom belong to no
//! block and are never touched by the codec.

use crate::error::{Error, Result};
use crate::key::StegoKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    image_width: usize,
    image_height: usize,
    rows: usize,
    cols: usize,
    block_width: usize,
    block_height: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, key: &StegoKey) -> Result<Self> {
        let rows = key.rows() as usize;
        let cols = key.cols() as usize;
        let block_width = width / cols;
        let block_height = height / rows;
        if block_width == 0 || block_height == 0 {
            return Err(Error::ImageTooSmall {
                width,
                height,
                rows: key.rows(),
                cols: key.cols(),
            });
        }
        Ok(BlockGrid {
            image_width: width,
            image_height: height,
            rows,
            cols,
            block_width,
            block_height,
        })
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn block_height(&self) -> usize {
        self.block_height
    }

    pub fn block_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Pixels per block.
    pub fn block_len(&self) -> usize {
        self.block_width * self.block_height
    }

    /// Size of the covered rectangle anchored at the origin.
    pub fn covered(&self) -> (usize, usize) {
        (self.cols * self.block_width, self.rows * self.block_height)
    }

    /// Block that owns pixel `(x, y)`, if any.
    pub fn block_of(&self, x: usize, y: usize) -> Option<usize> {
        let (cw, ch) = self.covered();
        (x < cw && y < ch).then(|| (y / self.block_height) * self.cols + x / self.block_width)
    }

    /// Raster-order pixel coordinates of block `index` (row-major block order).
    pub fn block_coords(&self, index: usize) -> Result<BlockCoords> {
        if index >= self.block_count() {
            return Err(Error::IndexOutOfRange {
                index,
                blocks: self.block_count(),
            });
        }
        let x0 = (index % self.cols) * self.block_width;
        let y0 = (index / self.cols) * self.block_height;
        Ok(BlockCoords {
            x0,
            width: self.block_width,
            y_end: y0 + self.block_height,
            x: x0,
            y: y0,
        })
    }
}

/// Iterator over one block's pixels, y outer and x inner.
#[derive(Debug, Clone)]
pub struct BlockCoords {
    x0: usize,
    width: usize,
    y_end: usize,
    x: usize,
    y: usize,
}

impl Iterator for BlockCoords {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.y >= self.y_end {
            return None;
        }
        let item = (self.x, self.y);
        self.x += 1;
        if self.x == self.x0 + self.width {
            self.x = self.x0;
            self.y += 1;
        }
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = if self.y >= self.y_end {
            0
        } else {
            (self.y_end - self.y) * self.width - (self.x - self.x0)
        };
        (n, Some(n))
    }
}

impl ExactSizeIterator for BlockCoords {}

pub fn make_grid(width: usize, height: usize, key: &StegoKey) -> Result<BlockGrid> {
    BlockGrid::new(width, height, key)
}

pub fn block_pixels(grid: &BlockGrid, block_index: usize) -> Result<Vec<(usize, usize)>> {
    Ok(grid.block_coords(block_index)?.collect())
}
