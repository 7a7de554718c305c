use super::grid::{Cell, Color, Facing, Grid};
use super::view::{self, OUT_OF_VIEW_DISTANCE};

/// Full simulator state of one DoorKeyChange episode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    pub grid: Grid,
    pub agent: (i32, i32),
    pub facing: Facing,
    pub carried: Option<Color>,
    pub step_count: usize,
    pub correct_key_color: Color,
}

impl GridState {
    pub fn key_position(&self, color: Color) -> Option<(i32, i32)> {
        self.grid
            .find(|c| c == Cell::Key { color })
            .into_iter()
            .next()
    }

    pub fn front(&self) -> (i32, i32) {
        let (dx, dy) = self.facing.vec();
        (self.agent.0 + dx, self.agent.1 + dy)
    }

    /// Ground truth for the external model at this state.
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            red_key_distance: view::key_distance(self, Color::Red),
            blue_key_distance: view::key_distance(self, Color::Blue),
            correct_key_color: self.correct_key_color,
        }
    }

    /// Text rendering with the agent drawn as an arrow.
    pub fn ascii(&self) -> String {
        let mut lines: Vec<Vec<char>> = self.grid.to_string().lines().map(|l| l.chars().collect()).collect();
        let arrow = match self.facing {
            Facing::East => '>',
            Facing::South => 'v',
            Facing::West => '<',
            Facing::North => '^',
        };
        lines[self.agent.1 as usize][self.agent.0 as usize] = arrow;
        lines.into_iter().map(|l| l.into_iter().collect::<String>() + "\n").collect()
    }
}

/// Per-step record of both keys' visible distances, enough to label (or relabel) a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub red_key_distance: f64,
    pub blue_key_distance: f64,
    pub correct_key_color: Color,
}

impl GroundTruth {
    pub fn label(&self) -> f64 {
        self.label_for(self.correct_key_color)
    }

    pub fn label_for(&self, color: Color) -> f64 {
        match color {
            Color::Red => self.red_key_distance,
            Color::Blue => self.blue_key_distance,
            _ => OUT_OF_VIEW_DISTANCE,
        }
    }
}

/// Label for the external model: distance to the key that currently opens the door.
pub fn correct_key_distance_label(state: &GridState) -> f64 {
    view::key_distance(state, state.correct_key_color)
}
