use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Cell, Orientation};

/// Boolean wall image cropped to its bounding box. Row 0 is the top of the
/// wall (largest y); column 0 is the smallest x.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ShadowMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ShadowMask {
    /// Mask covering the given wall positions, cropped. `None` if empty.
    pub fn from_points(points: impl IntoIterator<Item = (i32, i32)>) -> Option<Self> {
        let pts: BTreeSet<(i32, i32)> = points.into_iter().collect();
        let min_x = pts.iter().map(|p| p.0).min()?;
        let max_x = pts.iter().map(|p| p.0).max()?;
        let min_y = pts.iter().map(|p| p.1).min()?;
        let max_y = pts.iter().map(|p| p.1).max()?;
        let width = (max_x - min_x + 1) as usize;
        let height = (max_y - min_y + 1) as usize;
        let mut bits = vec![false; width * height];
        for (x, y) in pts {
            let row = (max_y - y) as usize;
            let col = (x - min_x) as usize;
            bits[row * width + col] = true;
        }
        Some(Self { width, height, bits })
    }

    /// Parses rows of `'0'`/`'1'` and crops away blank border rows/columns.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, String> {
        let mut points = Vec::new();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let height = rows.len() as i32;
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(format!("mask row {r} has length {}, expected {width}", row.len()));
            }
            for (c, ch) in row.chars().enumerate() {
                match ch {
                    '1' => points.push((c as i32, height - 1 - r as i32)),
                    '0' => {}
                    other => return Err(format!("unexpected character {other:?} in mask")),
                }
            }
        }
        Self::from_points(points).ok_or_else(|| "mask has no filled cells".to_string())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn rows(&self) -> Vec<String> {
        self.bits
            .chunks(self.width)
            .map(|r| r.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect()
    }
}

impl TryFrom<Vec<String>> for ShadowMask {
    type Error = String;

    fn try_from(rows: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<ShadowMask> for Vec<String> {
    fn from(m: ShadowMask) -> Self {
        m.rows()
    }
}

impl fmt::Display for ShadowMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            writeln!(f, "{}", row.replace('1', "#").replace('0', "."))?;
        }
        Ok(())
    }
}

/// Orthographic shadow along −z: rotate each cell, drop z, crop.
pub fn project<'a>(cells: impl IntoIterator<Item = &'a Cell>, orientation: &Orientation) -> Option<ShadowMask> {
    ShadowMask::from_points(cells.into_iter().map(|&c| {
        let r = orientation.apply(c);
        (r.x, r.y)
    }))
}
