//! GIF89a writer with a fixed 256-level gray palette and its own LZW coder.

use std::collections::HashMap;

use super::FrameSequence;

pub const DEFAULT_FRAME_DELAY_CS: u16 = 10;

const MIN_CODE_SIZE: u8 = 8;
const MAX_CODE_WIDTH: u32 = 12;
const MAX_CODES: u16 = 1 << MAX_CODE_WIDTH;

/// Encodes the frames as an animated GIF. Palette index `i` is the gray
/// level `(i, i, i)`, so pixel bytes are written through unchanged.
pub fn encode_gif(seq: &FrameSequence, delay_cs: u16, loop_forever: bool) -> Vec<u8> {
    let (w, h) = (seq.width() as u16, seq.height() as u16);
    let mut out = Vec::with_capacity(800 + seq.len() * (seq.width() * seq.height() + 32));

    out.extend_from_slice(b"GIF89a");
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    // Global table present, 8-bit color resolution, unsorted, 2^(7+1) entries.
    out.extend_from_slice(&[0xF7, 0x00, 0x00]);
    for level in 0..=255u8 {
        out.extend_from_slice(&[level, level, level]);
    }

    if loop_forever {
        out.extend_from_slice(&[0x21, 0xFF, 0x0B]);
        out.extend_from_slice(b"NETSCAPE2.0");
        out.extend_from_slice(&[0x03, 0x01, 0x00, 0x00, 0x00]);
    }

    for frame in seq.frames() {
        // Graphic Control Extension: no disposal, no transparency.
        out.extend_from_slice(&[0x21, 0xF9, 0x04, 0x00]);
        out.extend_from_slice(&delay_cs.to_le_bytes());
        out.extend_from_slice(&[0x00, 0x00]);

        out.push(0x2C);
        out.extend_from_slice(&[0, 0, 0, 0]);
        out.extend_from_slice(&w.to_le_bytes());
        out.extend_from_slice(&h.to_le_bytes());
        out.push(0x00);

        out.push(MIN_CODE_SIZE);
        for block in lzw_compress(frame.pixels()).chunks(255) {
            out.push(block.len() as u8);
            out.extend_from_slice(block);
        }
        out.push(0x00);
    }

    out.push(0x3B);
    out
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    bits: u32,
}

impl BitWriter {
    fn write(&mut self, code: u16, width: u32) {
        self.acc |= (code as u32) << self.bits;
        self.bits += width;
        while self.bits >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.bits -= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.bits > 0 {
            self.out.push(self.acc as u8);
        }
        self.out
    }
}

/// Variable-width LZW over 8-bit symbols with GIF conventions: codes are
/// packed LSB-first, start at 9 bits, grow to 12, and a clear code resets
/// the table when it fills.
pub fn lzw_compress(symbols: &[u8]) -> Vec<u8> {
    let clear: u16 = 1 << MIN_CODE_SIZE;
    let end: u16 = clear + 1;
    let first_free = clear + 2;

    let mut w = BitWriter {
        out: Vec::with_capacity(symbols.len()),
        acc: 0,
        bits: 0,
    };
    let mut width = MIN_CODE_SIZE as u32 + 1;
    let mut next = first_free;
    let mut table: HashMap<(u16, u8), u16> = HashMap::new();

    w.write(clear, width);
    let Some((&head, rest)) = symbols.split_first() else {
        w.write(end, width);
        return w.finish();
    };

    let mut prefix = head as u16;
    for &sym in rest {
        if let Some(&code) = table.get(&(prefix, sym)) {
            prefix = code;
            continue;
        }
        w.write(prefix, width);
        if next < MAX_CODES {
            table.insert((prefix, sym), next);
            next += 1;
            // The decoder learns each entry one code later, so it widens
            // once the entry *after* 2^width - 1 exists here.
            if next as u32 > (1 << width) && width < MAX_CODE_WIDTH {
                width += 1;
            }
        } else {
            w.write(clear, width);
            table.clear();
            next = first_free;
            width = MIN_CODE_SIZE as u32 + 1;
        }
        prefix = sym as u16;
    }
    w.write(prefix, width);
    // After the final data code the decoder has caught up by one entry.
    if next as u32 == (1 << width) && width < MAX_CODE_WIDTH {
        width += 1;
    }
    w.write(end, width);
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::GrayImage;

    #[test]
    fn framing_bytes() {
        let seq = FrameSequence::new(vec![GrayImage::new(28, 28, vec![0; 784]).unwrap()]).unwrap();
        let bytes = encode_gif(&seq, 10, true);
        assert_eq!(&bytes[..6], b"GIF89a");
        assert_eq!(&bytes[6..10], &[28, 0, 28, 0]);
        assert_eq!(*bytes.last().unwrap(), 0x3B);
        assert_eq!(&bytes[13 + 768 + 3..13 + 768 + 14], b"NETSCAPE2.0");
        let no_loop = encode_gif(&seq, 10, false);
        assert_eq!(no_loop.len(), bytes.len() - 19);
    }

    #[test]
    fn tiny_stream_codes() {
        // clear(256), 0, end(257) at 9 bits each, LSB-first.
        let bits = lzw_compress(&[0]);
        let mut acc: u32 = 0;
        for (i, b) in bits.iter().enumerate() {
            acc |= (*b as u32) << (8 * i);
        }
        assert_eq!(acc & 0x1FF, 256);
        assert_eq!((acc >> 9) & 0x1FF, 0);
        assert_eq!((acc >> 18) & 0x1FF, 257);
    }
}
