//! Slow reference rasterizer: paint by testing every canvas pixel against
//! every segment, then average-pool by exact area overlap.

/// Returns 28×28 values in [0, 1] (not quantized).
pub fn reference_rasterize(canvas: usize, pen_width: f64, strokes: &[Vec<(f64, f64)>]) -> Vec<f64> {
    let r = pen_width / 2.0;
    let mut ink = vec![vec![false; canvas]; canvas];
    for line in strokes {
        for (y, row) in ink.iter_mut().enumerate() {
            for (x, px) in row.iter_mut().enumerate() {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let hit = if line.len() == 1 {
                    dist2(p, line[0], line[0]) <= r * r
                } else {
                    line.windows(2).any(|s| dist2(p, s[0], s[1]) <= r * r)
                };
                let under_point = line.iter().any(|&(px_, py_)| {
                    (px_.floor() as usize).min(canvas - 1) == x && (py_.floor() as usize).min(canvas - 1) == y
                });
                *px |= hit || under_point;
            }
        }
    }

    let filled: Vec<(usize, usize)> = (0..canvas)
        .flat_map(|y| (0..canvas).map(move |x| (x, y)))
        .filter(|&(x, y)| ink[y][x])
        .collect();
    assert!(!filled.is_empty());
    let x0 = filled.iter().map(|p| p.0).min().unwrap() as f64 - 2.0;
    let x1 = filled.iter().map(|p| p.0).max().unwrap() as f64 + 3.0;
    let y0 = filled.iter().map(|p| p.1).min().unwrap() as f64 - 2.0;
    let y1 = filled.iter().map(|p| p.1).max().unwrap() as f64 + 3.0;
    let (cw, ch) = (x1 - x0, y1 - y0);
    let side = cw.max(ch);
    let ow = ((cw * 20.0 / side).round() as usize).clamp(1, 20);
    let oh = ((ch * 20.0 / side).round() as usize).clamp(1, 20);

    // Output cell (ox, oy) covers [x0 + ox·cw/ow, x0 + (ox+1)·cw/ow) × ...
    let mut small = vec![vec![0.0; ow]; oh];
    for (oy, row) in small.iter_mut().enumerate() {
        let (ya, yb) = (y0 + oy as f64 * ch / oh as f64, y0 + (oy + 1) as f64 * ch / oh as f64);
        for (ox, v) in row.iter_mut().enumerate() {
            let (xa, xb) = (x0 + ox as f64 * cw / ow as f64, x0 + (ox + 1) as f64 * cw / ow as f64);
            let mut area = 0.0;
            for &(x, y) in &filled {
                let ox_ = (xb.min(x as f64 + 1.0) - xa.max(x as f64)).max(0.0);
                let oy_ = (yb.min(y as f64 + 1.0) - ya.max(y as f64)).max(0.0);
                area += ox_ * oy_;
            }
            *v = (area / ((xb - xa) * (yb - ya))).min(1.0);
        }
    }

    let mass: f64 = small.iter().flatten().sum();
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (oy, row) in small.iter().enumerate() {
        for (ox, v) in row.iter().enumerate() {
            cx += v * (ox as f64 + 0.5);
            cy += v * (oy as f64 + 0.5);
        }
    }
    let dx = (14.0 - cx / mass).round() as i64;
    let dy = (14.0 - cy / mass).round() as i64;
    let mut out = vec![0.0; 784];
    for (oy, row) in small.iter().enumerate() {
        for (ox, v) in row.iter().enumerate() {
            let (tx, ty) = (ox as i64 + dx, oy as i64 + dy);
            if (0..28).contains(&tx) && (0..28).contains(&ty) {
                out[ty as usize * 28 + tx as usize] = *v;
            }
        }
    }
    out
}

fn dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    ex * ex + ey * ey
}
