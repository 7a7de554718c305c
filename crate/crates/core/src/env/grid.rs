use std::fmt;

/// Object channel indices of the observation encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ObjectKind {
    Unseen = 0,
    Empty = 1,
    Wall = 2,
    Floor = 3,
    Door = 4,
    Key = 5,
    Ball = 6,
    Box = 7,
    Goal = 8,
    Lava = 9,
    Agent = 10,
}

pub const NUM_OBJECTS: usize = 11;
pub const NUM_COLORS: usize = 6;
pub const NUM_STATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Color {
    Red = 0,
    Green = 1,
    Blue = 2,
    Purple = 3,
    Yellow = 4,
    Grey = 5,
}

impl Color {
    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DoorState {
    Open = 0,
    Closed = 1,
    Locked = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    Wall,
    Door { color: Color, state: DoorState },
    Key { color: Color },
    Goal,
}

impl Cell {
    /// (object, color, state) triple used by the encoder.
    pub fn encode(self) -> (ObjectKind, Color, u8) {
        match self {
            Cell::Empty => (ObjectKind::Empty, Color::Red, 0),
            Cell::Wall => (ObjectKind::Wall, Color::Grey, 0),
            Cell::Door { color, state } => (ObjectKind::Door, color, state as u8),
            Cell::Key { color } => (ObjectKind::Key, color, 0),
            Cell::Goal => (ObjectKind::Goal, Color::Green, 0),
        }
    }

    pub fn can_overlap(self) -> bool {
        matches!(
            self,
            Cell::Empty | Cell::Goal | Cell::Door { state: DoorState::Open, .. }
        )
    }

    pub fn see_behind(self) -> bool {
        match self {
            Cell::Wall => false,
            Cell::Door { state, .. } => state == DoorState::Open,
            _ => true,
        }
    }
}

/// Facing direction. Discriminants follow the usual east-south-west-north order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Facing {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Facing {
    pub fn from_index(i: usize) -> Facing {
        match i % 4 {
            0 => Facing::East,
            1 => Facing::South,
            2 => Facing::West,
            _ => Facing::North,
        }
    }

    pub fn vec(self) -> (i32, i32) {
        match self {
            Facing::East => (1, 0),
            Facing::South => (0, 1),
            Facing::West => (-1, 0),
            Facing::North => (0, -1),
        }
    }

    /// Unit vector pointing to the agent's right.
    pub fn right(self) -> (i32, i32) {
        let (dx, dy) = self.vec();
        (-dy, dx)
    }

    pub fn turn_left(self) -> Facing {
        Facing::from_index(self as usize + 3)
    }

    pub fn turn_right(self) -> Facing {
        Facing::from_index(self as usize + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    cells: Vec<Cell>,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Self {
        Grid { width, height, cells: vec![Cell::Empty; width * height] }
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn get(&self, x: i32, y: i32) -> Option<Cell> {
        self.in_bounds(x, y).then(|| self.cells[y as usize * self.width + x as usize])
    }

    pub fn set(&mut self, x: i32, y: i32, cell: Cell) {
        assert!(self.in_bounds(x, y), "({x}, {y}) outside grid");
        self.cells[y as usize * self.width + x as usize] = cell;
    }

    pub fn positions(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (0..self.height as i32).flat_map(move |y| (0..self.width as i32).map(move |x| (x, y)))
    }

    pub fn find(&self, pred: impl Fn(Cell) -> bool) -> Vec<(i32, i32)> {
        self.positions().filter(|&(x, y)| pred(self.get(x, y).unwrap())).collect()
    }

    pub fn wall_rect(&mut self) {
        for x in 0..self.width as i32 {
            self.set(x, 0, Cell::Wall);
            self.set(x, self.height as i32 - 1, Cell::Wall);
        }
        for y in 0..self.height as i32 {
            self.set(0, y, Cell::Wall);
            self.set(self.width as i32 - 1, y, Cell::Wall);
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let c = match self.get(x, y).unwrap() {
                    Cell::Empty => '.',
                    Cell::Wall => '#',
                    Cell::Goal => 'G',
                    Cell::Key { color: Color::Red } => 'r',
                    Cell::Key { color: Color::Blue } => 'b',
                    Cell::Key { .. } => 'k',
                    Cell::Door { state: DoorState::Open, .. } => '_',
                    Cell::Door { state: DoorState::Closed, .. } => 'D',
                    Cell::Door { state: DoorState::Locked, .. } => 'L',
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
