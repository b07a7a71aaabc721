//! Shadow-matching game engine.
//!
//! The player edits a voxel object (the "latent space") in encoder mode and
//! casts its orthographic shadow onto a wall in decoder mode. A level is won
//! when the object can reproduce every target shadow. In the VAE variant the
//! player edits three objects and each cast picks one of them at random.

mod level;
mod rotation;
mod session;
mod shadow;
mod solve;

pub use level::{shipped_levels, Level, LevelError, Variant};
pub use rotation::{Axis, Orientation};
pub use session::{replay, Action, ActionLog, GameError, GameSession, Mode, Outcome, RejectReason};
pub use shadow::{project, ShadowMask};
pub use solve::{matches_all_targets, solve, SOLVE_BOUND};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Cells may occupy `[-BOUND, BOUND]` on every axis.
pub const BOUND: i32 = 4;

/// Integer lattice position, serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn in_bounds(&self, bound: i32) -> bool {
        [self.x, self.y, self.z].iter().all(|v| (-bound..=bound).contains(v))
    }

    pub fn offset(&self, d: Cell) -> Cell {
        Cell::new(self.x + d.x, self.y + d.y, self.z + d.z)
    }
}

impl From<[i32; 3]> for Cell {
    fn from([x, y, z]: [i32; 3]) -> Self {
        Cell::new(x, y, z)
    }
}

impl From<Cell> for [i32; 3] {
    fn from(c: Cell) -> Self {
        [c.x, c.y, c.z]
    }
}

/// A set of unit cubes plus the object's current snapped orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelObject {
    pub cells: BTreeSet<Cell>,
    pub orientation: Orientation,
}

impl VoxelObject {
    pub fn new(cells: impl IntoIterator<Item = Cell>) -> Self {
        Self {
            cells: cells.into_iter().collect(),
            orientation: Orientation::IDENTITY,
        }
    }

    /// Shadow under the current orientation; `None` for an empty object.
    pub fn shadow(&self) -> Option<ShadowMask> {
        project(&self.cells, &self.orientation)
    }
}
