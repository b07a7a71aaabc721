//! The 24 proper rotations of the cube as signed permutation matrices.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Orthogonal integer matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[[i8; 3]; 3]", into = "[[i8; 3]; 3]")]
pub struct Orientation([[i8; 3]; 3]);

impl Orientation {
    pub const IDENTITY: Orientation = Orientation([[1, 0, 0], [0, 1, 0], [0, 0, 1]]);

    /// Counter-clockwise quarter turn about `axis` (right-hand rule).
    pub fn quarter_turn(axis: Axis) -> Self {
        match axis {
            Axis::X => Orientation([[1, 0, 0], [0, 0, -1], [0, 1, 0]]),
            Axis::Y => Orientation([[0, 0, 1], [0, 1, 0], [-1, 0, 0]]),
            Axis::Z => Orientation([[0, -1, 0], [1, 0, 0], [0, 0, 1]]),
        }
    }

    pub fn matrix(&self) -> [[i8; 3]; 3] {
        self.0
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Orientation) -> Orientation {
        let mut m = [[0i8; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        Orientation(m)
    }

    /// `R_axis^turns · self`; negative turns rotate clockwise.
    pub fn rotated(&self, axis: Axis, turns: i32) -> Orientation {
        let step = Orientation::quarter_turn(axis);
        (0..turns.rem_euclid(4)).fold(*self, |acc, _| step.compose(&acc))
    }

    pub fn inverse(&self) -> Orientation {
        let m = self.0;
        Orientation([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(&self, c: Cell) -> Cell {
        let v = [c.x, c.y, c.z];
        let row = |r: [i8; 3]| r[0] as i32 * v[0] + r[1] as i32 * v[1] + r[2] as i32 * v[2];
        Cell::new(row(self.0[0]), row(self.0[1]), row(self.0[2]))
    }

    pub fn determinant(&self) -> i32 {
        let m = self.0.map(|r| r.map(i32::from));
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    fn is_proper(m: &[[i8; 3]; 3]) -> bool {
        let o = Orientation(*m);
        m.iter().flatten().all(|v| (-1..=1).contains(v))
            && o.compose(&o.inverse()) == Orientation::IDENTITY
            && o.determinant() == 1
    }

    /// All 24 orientations, identity first, in breadth-first order over
    /// single quarter turns.
    pub fn all() -> Vec<Orientation> {
        let mut seen = BTreeSet::from([Orientation::IDENTITY]);
        let mut order = vec![Orientation::IDENTITY];
        let mut queue = VecDeque::from([Orientation::IDENTITY]);
        while let Some(o) = queue.pop_front() {
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let next = o.rotated(axis, 1);
                if seen.insert(next) {
                    order.push(next);
                    queue.push_back(next);
                }
            }
        }
        order
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation::IDENTITY
    }
}

impl TryFrom<[[i8; 3]; 3]> for Orientation {
    type Error = String;

    fn try_from(m: [[i8; 3]; 3]) -> Result<Self, Self::Error> {
        if Orientation::is_proper(&m) {
            Ok(Orientation(m))
        } else {
            Err(format!("{m:?} is not a proper rotation"))
        }
    }
}

impl From<Orientation> for [[i8; 3]; 3] {
    fn from(o: Orientation) -> Self {
        o.0
    }
}
