//! Game state machine. Every state change goes through [`GameSession::apply`],
//! so a session is fully determined by its level, seed and action sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Axis, Cell, Level, ShadowMask, VoxelObject, BOUND};

/// Casts in decoder mode after which the timer stops.
const SHADOWS_TO_STOP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Encoder,
    Decoder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Move { object: usize, from: Cell, to: Cell },
    Rotate { object: usize, axis: Axis, quarter_turns: i32 },
    SetMode { mode: Mode },
    Cast,
    Check { target: usize },
    /// Advances the game clock by `cs` centiseconds.
    Tick { cs: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Occupied,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Moved,
    Rejected { reason: RejectReason },
    Rotated,
    ModeSet,
    Cast { object: usize, shadow: ShadowMask },
    Checked { target: usize, matched: bool },
    Ticked,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("action requires {required:?} mode but the session is in {current:?} mode")]
    WrongMode { required: Mode, current: Mode },
    #[error("no cube at {0:?}")]
    NoCube(Cell),
    #[error("object index {index} out of range ({count} objects)")]
    ObjectIndex { index: usize, count: usize },
    #[error("target index {index} out of range ({count} targets)")]
    TargetIndex { index: usize, count: usize },
}

impl GameError {
    pub fn reason(&self) -> &'static str {
        match self {
            GameError::WrongMode { .. } => "wrong_mode",
            GameError::NoCube(_) => "no_cube",
            GameError::ObjectIndex { .. } => "object_index",
            GameError::TargetIndex { .. } => "target_index",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSession {
    pub level: Level,
    pub mode: Mode,
    pub objects: Vec<VoxelObject>,
    pub matched: Vec<bool>,
    pub emitted_shadows: Vec<ShadowMask>,
    pub timer_cs: u64,
    pub timer_running: bool,
    pub rng_seed: u64,
    /// Number of casts so far; indexes the random stream for the next pick.
    pub casts: u64,
    /// Timer value when every target was first matched.
    pub completed_at_cs: Option<u64>,
}

impl GameSession {
    pub fn new(level: Level, rng_seed: u64) -> Self {
        let object = VoxelObject::new(level.initial_cells.iter().copied());
        let objects = vec![object; level.variant.object_count()];
        let matched = vec![false; level.targets.len()];
        Self {
            level,
            mode: Mode::Encoder,
            objects,
            matched,
            emitted_shadows: Vec::new(),
            timer_cs: 0,
            timer_running: true,
            rng_seed,
            casts: 0,
            completed_at_cs: None,
        }
    }

    pub fn apply(&mut self, action: &Action) -> Result<Outcome, GameError> {
        match *action {
            Action::Move { object, from, to } => self.move_cube(object, from, to),
            Action::Rotate {
                object,
                axis,
                quarter_turns,
            } => self.rotate(object, axis, quarter_turns),
            Action::SetMode { mode } => {
                self.set_mode(mode);
                Ok(Outcome::ModeSet)
            }
            Action::Cast => self.cast_shadow().map(|(object, shadow)| Outcome::Cast { object, shadow }),
            Action::Check { target } => self.check_match(target).map(|matched| Outcome::Checked { target, matched }),
            Action::Tick { cs } => {
                self.tick(cs);
                Ok(Outcome::Ticked)
            }
        }
    }

    fn object_mut(&mut self, index: usize) -> Result<&mut VoxelObject, GameError> {
        let count = self.objects.len();
        self.objects.get_mut(index).ok_or(GameError::ObjectIndex { index, count })
    }

    /// Relocates one cube in the object's own frame. Only allowed in encoder
    /// mode; an occupied or out-of-bounds destination is a rejection, not an
    /// error, and leaves the session unchanged.
    pub fn move_cube(&mut self, object: usize, from: Cell, to: Cell) -> Result<Outcome, GameError> {
        if self.mode != Mode::Encoder {
            return Err(GameError::WrongMode {
                required: Mode::Encoder,
                current: self.mode,
            });
        }
        let obj = self.object_mut(object)?;
        if !obj.cells.contains(&from) {
            return Err(GameError::NoCube(from));
        }
        if !to.in_bounds(BOUND) {
            return Ok(Outcome::Rejected {
                reason: RejectReason::OutOfBounds,
            });
        }
        if obj.cells.contains(&to) {
            return Ok(Outcome::Rejected {
                reason: RejectReason::Occupied,
            });
        }
        obj.cells.remove(&from);
        obj.cells.insert(to);
        Ok(Outcome::Moved)
    }

    /// Allowed in both modes.
    pub fn rotate(&mut self, object: usize, axis: Axis, quarter_turns: i32) -> Result<Outcome, GameError> {
        let obj = self.object_mut(object)?;
        obj.orientation = obj.orientation.rotated(axis, quarter_turns);
        Ok(Outcome::Rotated)
    }

    /// Entering encoder mode erases emitted shadows and restarts the timer.
    pub fn set_mode(&mut self, mode: Mode) {
        if mode == self.mode {
            return;
        }
        self.mode = mode;
        if mode == Mode::Encoder {
            self.emitted_shadows.clear();
            self.timer_running = true;
        }
    }

    /// Picks the casting object (uniformly among three for the VAE variant)
    /// and appends its shadow. Returns the object index and the shadow.
    pub fn cast_shadow(&mut self) -> Result<(usize, ShadowMask), GameError> {
        if self.mode != Mode::Decoder {
            return Err(GameError::WrongMode {
                required: Mode::Decoder,
                current: self.mode,
            });
        }
        let pick = if self.objects.len() == 1 {
            0
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
            rng.set_stream(self.casts);
            rng.random_range(0..self.objects.len())
        };
        self.casts += 1;
        let shadow = self.objects[pick]
            .shadow()
            .expect("objects keep their full cube budget");
        self.emitted_shadows.push(shadow.clone());
        if self.emitted_shadows.len() >= SHADOWS_TO_STOP {
            self.timer_running = false;
        }
        Ok((pick, shadow))
    }

    /// Compares the current shadow of the object (all three objects for the
    /// VAE variant) with the target, records the result and returns it.
    pub fn check_match(&mut self, target: usize) -> Result<bool, GameError> {
        let count = self.level.targets.len();
        let mask = self
            .level
            .targets
            .get(target)
            .ok_or(GameError::TargetIndex { index: target, count })?;
        let matched = self.objects.iter().all(|o| o.shadow().as_ref() == Some(mask));
        self.matched[target] = matched;
        if self.completed_at_cs.is_none() && self.matched.iter().all(|m| *m) {
            self.completed_at_cs = Some(self.timer_cs);
        }
        Ok(matched)
    }

    pub fn tick(&mut self, cs: u64) {
        if self.timer_running {
            self.timer_cs += cs;
        }
    }

    pub fn is_complete(&self) -> bool {
        self.completed_at_cs.is_some()
    }
}

/// Level, seed and actions: enough to rebuild a session exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLog {
    pub level: Level,
    pub seed: u64,
    pub actions: Vec<Action>,
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    level: Level,
    seed: u64,
}

impl ActionLog {
    pub fn new(level: Level, seed: u64) -> Self {
        Self {
            level,
            seed,
            actions: Vec::new(),
        }
    }

    /// One JSON object per line: a `{level, seed}` header, then the actions.
    pub fn to_jsonl(&self) -> String {
        let header = LogHeader {
            level: self.level.clone(),
            seed: self.seed,
        };
        let mut out = serde_json::to_string(&header).expect("serializable");
        out.push('\n');
        for a in &self.actions {
            out.push_str(&serde_json::to_string(a).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: LogHeader = serde_json::from_str(lines.next().unwrap_or(""))?;
        let actions = lines.map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Self {
            level: header.level,
            seed: header.seed,
            actions,
        })
    }
}

/// Replays a log on a fresh session. Actions that failed when recorded fail
/// again without changing state.
pub fn replay(log: &ActionLog) -> GameSession {
    let mut session = GameSession::new(log.level.clone(), log.seed);
    for action in &log.actions {
        let _ = session.apply(action);
    }
    session
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Orientation, Variant};

    fn level(variant: Variant) -> Level {
        let cells = vec![Cell::new(0, 0, 0), Cell::new(1, 0, 0), Cell::new(0, 1, 0)];
        let target = crate::game::project(&cells, &Orientation::IDENTITY).unwrap();
        Level {
            name: "unit".into(),
            variant,
            cube_budget: 3,
            targets: vec![target, ShadowMask::from_rows(&["111"]).unwrap()],
            initial_cells: cells,
        }
    }

    #[test]
    fn move_rules() {
        let mut s = GameSession::new(level(Variant::Ae), 0);
        let origin = Cell::new(0, 0, 0);
        let occupied = s.move_cube(0, origin, Cell::new(1, 0, 0)).unwrap();
        assert_eq!(occupied, Outcome::Rejected { reason: RejectReason::Occupied });
        let own = s.move_cube(0, origin, origin).unwrap();
        assert_eq!(own, Outcome::Rejected { reason: RejectReason::Occupied });
        let oob = s.move_cube(0, origin, Cell::new(5, 0, 0)).unwrap();
        assert_eq!(oob, Outcome::Rejected { reason: RejectReason::OutOfBounds });
        assert_eq!(s.move_cube(0, Cell::new(3, 3, 3), origin), Err(GameError::NoCube(Cell::new(3, 3, 3))));
        assert!(matches!(s.move_cube(1, origin, origin), Err(GameError::ObjectIndex { .. })));

        let before = s.clone();
        assert_eq!(s.move_cube(0, origin, Cell::new(0, 0, 2)).unwrap(), Outcome::Moved);
        assert_ne!(s, before);
        assert_eq!(s.move_cube(0, Cell::new(0, 0, 2), origin).unwrap(), Outcome::Moved);
        assert_eq!(s, before);
    }

    #[test]
    fn decoder_mode_blocks_moves() {
        let mut s = GameSession::new(level(Variant::Ae), 0);
        s.set_mode(Mode::Decoder);
        let err = s.move_cube(0, Cell::new(0, 0, 0), Cell::new(0, 0, 1)).unwrap_err();
        assert_eq!(err.reason(), "wrong_mode");
        assert!(s.rotate(0, Axis::X, 1).is_ok());
    }

    #[test]
    fn cast_requires_decoder_and_stops_timer_after_three() {
        let mut s = GameSession::new(level(Variant::Ae), 0);
        assert!(matches!(s.cast_shadow(), Err(GameError::WrongMode { .. })));
        s.set_mode(Mode::Decoder);
        for i in 1..=3 {
            s.cast_shadow().unwrap();
            assert_eq!(s.timer_running, i < 3);
        }
        s.tick(50);
        assert_eq!(s.timer_cs, 0);
        s.set_mode(Mode::Encoder);
        assert!(s.emitted_shadows.is_empty());
        assert!(s.timer_running);
        s.tick(50);
        assert_eq!(s.timer_cs, 50);
    }

    #[test]
    fn returning_to_encoder_erases_shadows() {
        let mut s = GameSession::new(level(Variant::Ae), 0);
        s.set_mode(Mode::Decoder);
        s.cast_shadow().unwrap();
        s.cast_shadow().unwrap();
        s.set_mode(Mode::Encoder);
        assert!(s.emitted_shadows.is_empty());
        assert!(s.timer_running);
        let snapshot = s.clone();
        s.set_mode(Mode::Encoder);
        assert_eq!(s, snapshot);
    }

    #[test]
    fn vae_match_needs_all_three() {
        let mut s = GameSession::new(level(Variant::Vae), 3);
        assert_eq!(s.objects.len(), 3);
        assert!(s.check_match(0).unwrap());
        s.rotate(2, Axis::Z, 2).unwrap();
        assert!(!s.check_match(0).unwrap());
        assert!(!s.matched[0]);
        assert!(matches!(s.check_match(5), Err(GameError::TargetIndex { index: 5, count: 2 })));
    }

    #[test]
    fn completion_time_recorded_once() {
        let mut l = level(Variant::Ae);
        l.targets.truncate(1);
        let mut s = GameSession::new(l, 0);
        s.tick(120);
        assert!(s.check_match(0).unwrap());
        assert_eq!(s.completed_at_cs, Some(120));
        s.tick(10);
        s.check_match(0).unwrap();
        assert_eq!(s.completed_at_cs, Some(120));
    }

    #[test]
    fn log_round_trip_and_replay() {
        let mut log = ActionLog::new(level(Variant::Vae), 11);
        log.actions = vec![
            Action::Tick { cs: 5 },
            Action::Move { object: 1, from: Cell::new(0, 0, 0), to: Cell::new(0, 0, 1) },
            Action::SetMode { mode: Mode::Decoder },
            Action::Cast,
            Action::Move { object: 0, from: Cell::new(0, 0, 0), to: Cell::new(0, 0, 1) },
            Action::Check { target: 1 },
        ];
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 7);
        let parsed = ActionLog::from_jsonl(&text).unwrap();
        assert_eq!(parsed, log);
        assert_eq!(replay(&parsed), replay(&log));
        assert!(text.contains(r#"{"action":"set_mode","mode":"decoder"}"#));
    }
}
