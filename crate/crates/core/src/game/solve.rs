//! Level solver used to gate level authoring.
//!
//! An object solves a level when, for every target, some snapped orientation
//! casts exactly that shadow. The search works on the 5×5×5 box `[-2, 2]³`:
//!
//! * The box is symmetric under all 24 rotations and shadows ignore
//!   translation, so the first target can be assumed to be seen under the
//!   identity with its bounding box in the low corner.
//! * For every other target, each (orientation, wall offset) placement
//!   restricts the object to cells whose shadow lands on a lit pixel. The
//!   running intersection of these restrictions must still light every
//!   pixel of every placed target.
//! * Once all targets are placed, any subset of the restriction that lights
//!   every pixel works, and extra cells from the restriction can be added
//!   freely, so it remains to find a small enough hitting set.

use std::collections::BTreeSet;

use super::{project, Cell, Level, Orientation, ShadowMask, VoxelObject};

pub const SOLVE_BOUND: i32 = 2;

const SIDE: usize = (2 * SOLVE_BOUND + 1) as usize;
const CELLS: usize = SIDE * SIDE * SIDE;

type CellSet = u128;

fn cell_at(i: usize) -> Cell {
    let b = SOLVE_BOUND;
    Cell::new((i % SIDE) as i32 - b, ((i / SIDE) % SIDE) as i32 - b, (i / (SIDE * SIDE)) as i32 - b)
}

/// True when every target is the shadow of `cells` under some orientation.
pub fn matches_all_targets(cells: &BTreeSet<Cell>, targets: &[ShadowMask]) -> bool {
    let orientations = Orientation::all();
    targets
        .iter()
        .all(|t| orientations.iter().any(|o| project(cells, o).as_ref() == Some(t)))
}

/// One target placed on the wall: the cells lighting each of its pixels.
struct Placement {
    pixels: Vec<CellSet>,
    union: CellSet,
}

struct Solver {
    budget: usize,
    // projected[orientation][cell] = wall (x, y)
    projected: Vec<[(i32, i32); CELLS]>,
    targets: Vec<ShadowMask>,
}

impl Solver {
    fn place(&self, mask: &ShadowMask, orientation: usize, ox: i32, oy: i32) -> Placement {
        let (w, h) = (mask.width() as i32, mask.height() as i32);
        let mut pixels = Vec::with_capacity(mask.count());
        let mut union = 0;
        for row in 0..h {
            for col in 0..w {
                if !mask.get(row as usize, col as usize) {
                    continue;
                }
                let (x, y) = (ox + col, oy + (h - 1 - row));
                let mut set: CellSet = 0;
                for (i, &p) in self.projected[orientation].iter().enumerate() {
                    if p == (x, y) {
                        set |= 1 << i;
                    }
                }
                union |= set;
                pixels.push(set);
            }
        }
        Placement { pixels, union }
    }

    fn offsets(mask: &ShadowMask) -> impl Iterator<Item = (i32, i32)> {
        let (w, h) = (mask.width() as i32, mask.height() as i32);
        let lo = -SOLVE_BOUND;
        (lo..=SOLVE_BOUND - w + 1).flat_map(move |ox| (lo..=SOLVE_BOUND - h + 1).map(move |oy| (ox, oy)))
    }

    fn feasible(hull: CellSet, placed: &[Placement], budget: usize) -> bool {
        hull.count_ones() as usize >= budget && placed.iter().all(|p| p.pixels.iter().all(|&s| s & hull != 0))
    }

    fn search(&self, hull: CellSet, placed: &mut Vec<Placement>) -> Option<CellSet> {
        let k = placed.len();
        if k == self.targets.len() {
            let views: Vec<Vec<CellSet>> = placed
                .iter()
                .map(|p| p.pixels.iter().map(|&s| s & hull).collect())
                .collect();
            let chosen = cover(&views, 0, self.budget)?;
            return Some(pad(chosen, hull, self.budget));
        }
        let mask = &self.targets[k];
        for o in 0..self.projected.len() {
            for (ox, oy) in Self::offsets(mask) {
                let p = self.place(mask, o, ox, oy);
                let next = hull & p.union;
                placed.push(p);
                if Self::feasible(next, placed, self.budget) {
                    if let Some(found) = self.search(next, placed) {
                        return Some(found);
                    }
                }
                placed.pop();
            }
        }
        None
    }
}

/// Smallest-branching DFS for a cell set hitting every pixel of every view,
/// using at most `left` more cells. Each cell lights one pixel per view, so
/// the largest per-view count of unlit pixels bounds the cells still needed.
fn cover(views: &[Vec<CellSet>], chosen: CellSet, left: usize) -> Option<CellSet> {
    let mut need = 0;
    let mut branch: Option<CellSet> = None;
    for view in views {
        let mut unlit = 0;
        for &s in view {
            if s & chosen == 0 {
                unlit += 1;
                if branch.is_none_or(|b| s.count_ones() < b.count_ones()) {
                    branch = Some(s);
                }
            }
        }
        need = need.max(unlit);
    }
    let Some(candidates) = branch else {
        return Some(chosen);
    };
    if need > left {
        return None;
    }
    let mut order: Vec<(usize, usize)> = bits(candidates)
        .map(|i| {
            let gain = views.iter().flatten().filter(|&&s| s & chosen == 0 && s & (1 << i) != 0).count();
            (gain, i)
        })
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    order
        .into_iter()
        .find_map(|(_, i)| cover(views, chosen | (1 << i), left - 1))
}

fn pad(mut chosen: CellSet, hull: CellSet, budget: usize) -> CellSet {
    for i in bits(hull) {
        if chosen.count_ones() as usize >= budget {
            break;
        }
        chosen |= 1 << i;
    }
    chosen
}

fn bits(set: CellSet) -> impl Iterator<Item = usize> {
    (0..CELLS).filter(move |i| set & (1 << i) != 0)
}

/// Finds an object of exactly `cube_budget` cubes inside `[-2, 2]³` that can
/// cast every target shadow, or `None` if there is none.
pub fn solve(level: &Level) -> Option<VoxelObject> {
    let budget = level.cube_budget;
    let side = SIDE;
    if budget == 0 || budget > CELLS || level.targets.is_empty() {
        return None;
    }
    if level
        .targets
        .iter()
        .any(|t| t.width() > side || t.height() > side || t.count() > budget)
    {
        return None;
    }

    let orientations = Orientation::all();
    let projected = orientations
        .iter()
        .map(|o| {
            let mut row = [(0, 0); CELLS];
            for (i, slot) in row.iter_mut().enumerate() {
                let c = o.apply(cell_at(i));
                *slot = (c.x, c.y);
            }
            row
        })
        .collect();
    let solver = Solver {
        budget,
        projected,
        targets: level.targets.clone(),
    };

    let first = &level.targets[0];
    let anchor = solver.place(first, 0, -SOLVE_BOUND, -SOLVE_BOUND);
    let hull = anchor.union;
    let mut placed = vec![anchor];
    if !Solver::feasible(hull, &placed, budget) {
        return None;
    }
    let found = solver.search(hull, &mut placed)?;
    let object = VoxelObject::new(bits(found).map(cell_at));
    debug_assert!(matches_all_targets(&object.cells, &level.targets));
    Some(object)
}
