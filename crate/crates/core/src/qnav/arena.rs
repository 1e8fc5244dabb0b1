use super::QnavError;
use std::collections::HashSet;

/// Maximum depth reading: readings are 6-bit codes.
pub const MAX_RANGE: u8 = 63;

/// Eight compass headings, counter-clockwise from +x. `y` grows downward as in
/// the text grid, so "counter-clockwise" is as seen on screen.
pub const HEADINGS: [(i32, i32); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn step(self, heading: u8) -> Cell {
        let (dx, dy) = HEADINGS[heading as usize % 8];
        Cell::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RobotState {
    pub position: Cell,
    /// Index into [`HEADINGS`].
    pub heading: u8,
}

/// Discrete robot actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Move one cell along the heading.
    Forward,
    /// Rotate 45° left, then move one cell.
    TurnLeft,
    /// Rotate 45° right, then move one cell.
    TurnRight,
    /// Rotate 180° in place.
    Reverse,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Reverse];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Rectangular occupancy grid with a walled boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arena {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    start: RobotState,
}

impl Arena {
    /// Parses `#` obstacle, `.` free and `S` start (facing +x). Blank lines are
    /// ignored; all rows must have equal length.
    pub fn parse(text: &str) -> Result<Arena, QnavError> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width < 3 || height < 3 {
            return Err(QnavError::Arena("grid must be at least 3x3".into()));
        }
        let mut blocked = Vec::with_capacity(width * height);
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(QnavError::Arena(format!("row {y} has length {} (expected {width})", row.len())));
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '#' => blocked.push(true),
                    '.' => blocked.push(false),
                    'S' => {
                        if start.is_some() {
                            return Err(QnavError::Arena("more than one start cell".into()));
                        }
                        start = Some(Cell::new(x as i32, y as i32));
                        blocked.push(false);
                    }
                    other => return Err(QnavError::Arena(format!("unexpected character {other:?} at ({x}, {y})"))),
                }
            }
        }
        let start = start.ok_or_else(|| QnavError::Arena("no start cell `S`".into()))?;
        let arena = Arena { width, height, blocked, start: RobotState { position: start, heading: 0 } };
        for x in 0..width as i32 {
            for y in [0, height as i32 - 1] {
                if !arena.is_blocked(Cell::new(x, y)) {
                    return Err(QnavError::Arena(format!("boundary cell ({x}, {y}) must be an obstacle")));
                }
            }
        }
        for y in 0..height as i32 {
            for x in [0, width as i32 - 1] {
                if !arena.is_blocked(Cell::new(x, y)) {
                    return Err(QnavError::Arena(format!("boundary cell ({x}, {y}) must be an obstacle")));
                }
            }
        }
        Ok(arena)
    }

    /// Walled `width` × `height` grid with no interior obstacles, start at (1, 1).
    pub fn open(width: usize, height: usize) -> Arena {
        let mut text = String::new();
        for y in 0..height {
            for x in 0..width {
                let edge = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
                text.push(if edge {
                    '#'
                } else if (x, y) == (1, 1) {
                    'S'
                } else {
                    '.'
                });
            }
            text.push('\n');
        }
        Arena::parse(&text).expect("generated grid is valid")
    }

    /// 12 × 12 walled arena with three interior obstacles.
    pub fn default_arena() -> Arena {
        Arena::parse(DEFAULT_ARENA).expect("built-in arena is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> RobotState {
        self.start
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            return true;
        }
        self.blocked[c.y as usize * self.width + c.x as usize]
    }

    pub fn free_cells(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let c = Cell::new(x, y);
                s.push(if c == self.start.position {
                    'S'
                } else if self.is_blocked(c) {
                    '#'
                } else {
                    '.'
                });
            }
            s.push('\n');
        }
        s
    }
}

const DEFAULT_ARENA: &str = "\
############
#S.........#
#..........#
#...##.....#
#...##.....#
#..........#
#.......#..#
#.......#..#
#..##......#
#..........#
#..........#
############
";

/// Three depth codes for rays at −45°, 0° and +45° relative to the heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DepthReading(pub [u8; 3]);

impl DepthReading {
    pub fn codes(&self) -> &[u8; 3] {
        &self.0
    }
}

fn ray(arena: &Arena, from: Cell, heading: u8) -> u8 {
    let mut c = from;
    for d in 1..=MAX_RANGE {
        c = c.step(heading);
        if arena.is_blocked(c) {
            return d;
        }
    }
    MAX_RANGE
}

/// Cell distance to the first obstacle along each ray; 1 means the adjacent
/// cell is blocked.
pub fn sense(arena: &Arena, state: RobotState) -> DepthReading {
    let h = state.heading;
    DepthReading([ray(arena, state.position, (h + 7) % 8), ray(arena, state.position, h), ray(arena, state.position, (h + 1) % 8)])
}

pub const REWARD_NEW_CELL: f64 = 1.0;
pub const REWARD_COLLISION: f64 = -5.0;

/// Result of applying one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: RobotState,
    pub reward: f64,
    pub collided: bool,
    pub new_cell: bool,
}

/// Applies `action`; a blocked move leaves the robot in place with the
/// collision penalty. Rotations are kept even when the move is blocked.
pub fn apply_action(arena: &Arena, state: RobotState, action: Action, visited: &mut HashSet<Cell>) -> StepOutcome {
    let heading = match action {
        Action::Forward => state.heading,
        Action::TurnLeft => (state.heading + 1) % 8,
        Action::TurnRight => (state.heading + 7) % 8,
        Action::Reverse => (state.heading + 4) % 8,
    };
    if action == Action::Reverse {
        return StepOutcome { state: RobotState { heading, ..state }, reward: 0.0, collided: false, new_cell: false };
    }
    let target = state.position.step(heading);
    if arena.is_blocked(target) {
        return StepOutcome {
            state: RobotState { heading, ..state },
            reward: REWARD_COLLISION,
            collided: true,
            new_cell: false,
        };
    }
    let new_cell = visited.insert(target);
    StepOutcome {
        state: RobotState { position: target, heading },
        reward: if new_cell { REWARD_NEW_CELL } else { 0.0 },
        collided: false,
        new_cell,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let a = Arena::default_arena();
        assert_eq!((a.width(), a.height()), (12, 12));
        assert_eq!(a.free_cells(), 92);
        assert_eq!(Arena::parse(&a.to_text()).unwrap(), a);
        assert_eq!(a.start().position, Cell::new(1, 1));
    }

    #[test]
    fn parse_errors() {
        assert!(Arena::parse("###\n#.#\n###\n").is_err(), "missing start");
        assert!(Arena::parse("###\n#S.\n###\n").is_err(), "open boundary");
        assert!(Arena::parse("####\n#SS#\n####\n").is_err(), "two starts");
        assert!(Arena::parse("###\n#Sx\n###\n").is_err(), "bad char");
        assert!(Arena::parse("####\n#S#\n####\n").is_err(), "ragged");
    }

    #[test]
    fn facing_adjacent_wall_reads_one() {
        let a = Arena::open(6, 6);
        let s = RobotState { position: Cell::new(4, 2), heading: 0 };
        assert_eq!(sense(&a, s).0[1], 1);
        // diagonal rays: up-right from (4,2) hits x=5 after one step
        assert_eq!(sense(&a, s).0, [1, 1, 1]);
        let s = RobotState { position: Cell::new(1, 2), heading: 0 };
        assert_eq!(sense(&a, s), DepthReading([3, 4, 2]));
        assert_eq!(sense(&a, s), sense(&a, s));
    }

    #[test]
    fn long_corridor_saturates() {
        let a = Arena::open(100, 3);
        let s = RobotState { position: Cell::new(1, 1), heading: 0 };
        assert_eq!(sense(&a, s).0[1], MAX_RANGE);
    }

    #[test]
    fn collision_keeps_position() {
        let a = Arena::open(4, 4);
        let s = RobotState { position: Cell::new(1, 1), heading: 4 };
        let mut visited = HashSet::from([s.position]);
        let out = apply_action(&a, s, Action::Forward, &mut visited);
        assert!(out.collided);
        assert_eq!(out.state.position, s.position);
        assert_eq!(out.reward, REWARD_COLLISION);
        let out = apply_action(&a, s, Action::Reverse, &mut visited);
        assert_eq!(out.state.heading, 0);
        let out = apply_action(&a, out.state, Action::Forward, &mut visited);
        assert_eq!((out.state.position, out.reward), (Cell::new(2, 1), REWARD_NEW_CELL));
        let back = apply_action(&a, RobotState { heading: 4, ..out.state }, Action::Forward, &mut visited);
        assert_eq!(back.reward, 0.0);
    }
}
