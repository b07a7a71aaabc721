//! Rasterizes freehand strokes into MNIST-style 28×28 images: ink is drawn
//! with a round pen at canvas resolution, cropped to its bounding box plus a
//! margin, box-filtered to fit 20×20, then shifted so its center of mass
//! sits at the center of the 28×28 frame.

use serde::{Deserialize, Serialize};

use super::{byte_to_unit, DatasetError};
use crate::numerics::Tensor;
use crate::{IMAGE_PIXELS, IMAGE_SIDE};

pub const DEFAULT_CANVAS_SIZE: u32 = 280;
pub const DEFAULT_PEN_WIDTH: f64 = 18.0;

const CROP_MARGIN: usize = 2;
const CONTENT_SIDE: usize = 20;

fn default_canvas() -> u32 {
    DEFAULT_CANVAS_SIZE
}

fn default_pen() -> f64 {
    DEFAULT_PEN_WIDTH
}

/// One drawing: polylines in canvas pixel coordinates, origin top-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeSet {
    #[serde(default = "default_canvas")]
    pub canvas_size: u32,
    pub strokes: Vec<Vec<[f64; 2]>>,
    #[serde(default = "default_pen")]
    pub pen_width: f64,
}

impl StrokeSet {
    /// Strokes on the default canvas with the default pen.
    pub fn new(strokes: Vec<Vec<(f64, f64)>>) -> Self {
        Self {
            canvas_size: DEFAULT_CANVAS_SIZE,
            strokes: strokes
                .into_iter()
                .map(|line| line.into_iter().map(|(x, y)| [x, y]).collect())
                .collect(),
            pen_width: DEFAULT_PEN_WIDTH,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.canvas_size == 0 {
            return Err(DatasetError::InvalidStrokes("canvas_size must be positive".into()));
        }
        if !(self.pen_width.is_finite() && self.pen_width > 0.0) {
            return Err(DatasetError::InvalidStrokes("pen_width must be positive".into()));
        }
        let limit = self.canvas_size as f64;
        for (i, line) in self.strokes.iter().enumerate() {
            if line.is_empty() {
                return Err(DatasetError::InvalidStrokes(format!("stroke {i} has no points")));
            }
            for &[x, y] in line {
                if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 || x > limit || y > limit {
                    return Err(DatasetError::InvalidStrokes(format!(
                        "point ({x}, {y}) in stroke {i} lies outside the {limit}x{limit} canvas"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Renders `strokes` to a `[784]` tensor whose values are multiples of 1/255.
pub fn rasterize(strokes: &StrokeSet) -> Result<Tensor, DatasetError> {
    strokes.validate()?;
    if strokes.strokes.is_empty() {
        return Err(DatasetError::EmptyDrawing);
    }
    let canvas = paint(strokes);
    let (x0, x1, y0, y1) = ink_bounds(&canvas, strokes.canvas_size as usize).ok_or(DatasetError::EmptyDrawing)?;

    let crop_w = x1 - x0 + 1 + 2 * CROP_MARGIN;
    let crop_h = y1 - y0 + 1 + 2 * CROP_MARGIN;
    let n = strokes.canvas_size as usize;
    // Crop pixel (cx, cy) maps to canvas (x0 + cx - margin, y0 + cy - margin);
    // anything off-canvas is blank.
    let ink_at = |cx: usize, cy: usize| -> f64 {
        let (x, y) = ((x0 + cx) as isize - CROP_MARGIN as isize, (y0 + cy) as isize - CROP_MARGIN as isize);
        if x < 0 || y < 0 || x as usize >= n || y as usize >= n {
            0.0
        } else if canvas[y as usize * n + x as usize] {
            1.0
        } else {
            0.0
        }
    };

    let scale = CONTENT_SIDE as f64 / crop_w.max(crop_h) as f64;
    let out_w = ((crop_w as f64 * scale).round() as usize).clamp(1, CONTENT_SIDE);
    let out_h = ((crop_h as f64 * scale).round() as usize).clamp(1, CONTENT_SIDE);

    let wx = box_weights(crop_w, out_w);
    let wy = box_weights(crop_h, out_h);
    let fx = crop_w as f64 / out_w as f64;
    let fy = crop_h as f64 / out_h as f64;

    // Horizontal pass: crop_h rows of out_w samples.
    let mut horiz = vec![0.0; crop_h * out_w];
    for cy in 0..crop_h {
        for (ox, taps) in wx.iter().enumerate() {
            let acc: f64 = taps.iter().map(|&(sx, w)| w * ink_at(sx, cy)).sum();
            horiz[cy * out_w + ox] = acc / fx;
        }
    }
    let mut content = vec![0.0; out_h * out_w];
    for (oy, taps) in wy.iter().enumerate() {
        for ox in 0..out_w {
            let acc: f64 = taps.iter().map(|&(sy, w)| w * horiz[sy * out_w + ox]).sum();
            content[oy * out_w + ox] = (acc / fy).min(1.0);
        }
    }

    let mass: f64 = content.iter().sum();
    let (mut mx, mut my) = (0.0, 0.0);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let v = content[oy * out_w + ox];
            mx += v * (ox as f64 + 0.5);
            my += v * (oy as f64 + 0.5);
        }
    }
    let center = IMAGE_SIDE as f64 / 2.0;
    let shift_x = (center - mx / mass).round() as isize;
    let shift_y = (center - my / mass).round() as isize;

    let mut out = vec![0.0; IMAGE_PIXELS];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (tx, ty) = (ox as isize + shift_x, oy as isize + shift_y);
            if (0..IMAGE_SIDE as isize).contains(&tx) && (0..IMAGE_SIDE as isize).contains(&ty) {
                out[ty as usize * IMAGE_SIDE + tx as usize] = quantize(content[oy * out_w + ox]);
            }
        }
    }
    Ok(Tensor::new(vec![IMAGE_PIXELS], out).expect("784 values"))
}

/// Nearest byte level, except that any ink at all keeps at least level 1.
fn quantize(v: f64) -> f64 {
    let mut b = (v * 255.0).round().clamp(0.0, 255.0) as u8;
    if v > 0.0 && b == 0 {
        b = 1;
    }
    byte_to_unit(b)
}

/// For each of `dst` output cells, the source cells it overlaps and the
/// overlap length, for an area-averaging resample of `src` cells.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let f = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * f, (o + 1) as f64 * f);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = hi.min(s as f64 + 1.0) - lo.max(s as f64);
                    (w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

fn paint(strokes: &StrokeSet) -> Vec<bool> {
    let n = strokes.canvas_size as usize;
    let r = strokes.pen_width / 2.0;
    let mut canvas = vec![false; n * n];
    for line in &strokes.strokes {
        let segments: Vec<([f64; 2], [f64; 2])> = if line.len() == 1 {
            vec![(line[0], line[0])]
        } else {
            line.windows(2).map(|w| (w[0], w[1])).collect()
        };
        for (a, b) in segments {
            let lo_x = (a[0].min(b[0]) - r).floor().max(0.0) as usize;
            let hi_x = ((a[0].max(b[0]) + r).ceil() as usize).min(n - 1);
            let lo_y = (a[1].min(b[1]) - r).floor().max(0.0) as usize;
            let hi_y = ((a[1].max(b[1]) + r).ceil() as usize).min(n - 1);
            for y in lo_y..=hi_y {
                for x in lo_x..=hi_x {
                    let c = [x as f64 + 0.5, y as f64 + 0.5];
                    if segment_distance_sq(c, a, b) <= r * r {
                        canvas[y * n + x] = true;
                    }
                }
            }
        }
        // A pen thinner than a pixel still marks the pixel under each point.
        for &[x, y] in line {
            let px = (x.floor() as usize).min(n - 1);
            let py = (y.floor() as usize).min(n - 1);
            canvas[py * n + px] = true;
        }
    }
    canvas
}

fn segment_distance_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    qx * qx + qy * qy
}

fn ink_bounds(canvas: &[bool], n: usize) -> Option<(usize, usize, usize, usize)> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for y in 0..n {
        for x in 0..n {
            if canvas[y * n + x] {
                bounds = Some(match bounds {
                    None => (x, x, y, y),
                    Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
                });
            }
        }
    }
    bounds
}
