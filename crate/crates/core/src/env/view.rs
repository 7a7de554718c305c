//! Egocentric partial view, occlusion and the flat observation encoding.

use super::grid::{Cell, Color, ObjectKind, NUM_COLORS, NUM_OBJECTS, NUM_STATES};
use super::state::GridState;
use crate::Scalar;

pub const VIEW_SIZE: usize = 7;
pub const CHANNELS: usize = NUM_OBJECTS + NUM_COLORS + NUM_STATES;
/// Flat observation length, `7 x 7 x 20`.
pub const OBS_DIM: usize = VIEW_SIZE * VIEW_SIZE * CHANNELS;

/// Label used when the correct key is not in view.
pub const OUT_OF_VIEW_DISTANCE: f64 = 14.0;

/// The agent's 7x7 window. `(vx, vy)` has the agent at `(3, 6)` looking toward `vy = 0`.
#[derive(Debug, Clone)]
pub struct EgoView {
    cells: [[Cell; VIEW_SIZE]; VIEW_SIZE],
    visible: [[bool; VIEW_SIZE]; VIEW_SIZE],
}

impl EgoView {
    pub fn new(state: &GridState) -> Self {
        let mut cells = [[Cell::Wall; VIEW_SIZE]; VIEW_SIZE];
        for (vx, col) in cells.iter_mut().enumerate() {
            for (vy, cell) in col.iter_mut().enumerate() {
                let (x, y) = view_to_world(state, vx, vy);
                *cell = state.grid.get(x, y).unwrap_or(Cell::Wall);
            }
        }
        let visible = visibility(&cells);
        EgoView { cells, visible }
    }

    pub fn is_visible(&self, vx: usize, vy: usize) -> bool {
        self.visible[vx][vy]
    }

    pub fn cell(&self, vx: usize, vy: usize) -> Cell {
        self.cells[vx][vy]
    }
}

/// World coordinates of view cell `(vx, vy)`.
pub fn view_to_world(state: &GridState, vx: usize, vy: usize) -> (i32, i32) {
    let (fx, fy) = state.facing.vec();
    let (rx, ry) = state.facing.right();
    let ahead = (VIEW_SIZE - 1 - vy) as i32;
    let side = vx as i32 - (VIEW_SIZE / 2) as i32;
    (state.agent.0 + fx * ahead + rx * side, state.agent.1 + fy * ahead + ry * side)
}

/// View coordinates of a world cell, if it falls inside the window.
pub fn world_to_view(state: &GridState, x: i32, y: i32) -> Option<(usize, usize)> {
    let (fx, fy) = state.facing.vec();
    let (rx, ry) = state.facing.right();
    let (dx, dy) = (x - state.agent.0, y - state.agent.1);
    let ahead = fx * dx + fy * dy;
    let side = rx * dx + ry * dy;
    let vx = side + (VIEW_SIZE / 2) as i32;
    let vy = (VIEW_SIZE - 1) as i32 - ahead;
    let range = 0..VIEW_SIZE as i32;
    (range.contains(&vx) && range.contains(&vy)).then_some((vx as usize, vy as usize))
}

/// Light propagation from the agent's cell: sight continues through cells that can be
/// seen behind, spreading sideways and one row forward at a time.
fn visibility(cells: &[[Cell; VIEW_SIZE]; VIEW_SIZE]) -> [[bool; VIEW_SIZE]; VIEW_SIZE] {
    let n = VIEW_SIZE;
    let mut mask = [[false; VIEW_SIZE]; VIEW_SIZE];
    mask[n / 2][n - 1] = true;
    for j in (0..n).rev() {
        for i in 0..n - 1 {
            if !mask[i][j] || !cells[i][j].see_behind() {
                continue;
            }
            mask[i + 1][j] = true;
            if j > 0 {
                mask[i + 1][j - 1] = true;
                mask[i][j - 1] = true;
            }
        }
        for i in (1..n).rev() {
            if !mask[i][j] || !cells[i][j].see_behind() {
                continue;
            }
            mask[i - 1][j] = true;
            if j > 0 {
                mask[i - 1][j - 1] = true;
                mask[i][j - 1] = true;
            }
        }
    }
    mask
}

/// Writes the one-hot encoding of the agent's view into `out` (length [`OBS_DIM`]).
pub fn encode_into<S: Scalar>(state: &GridState, out: &mut [S]) {
    assert_eq!(out.len(), OBS_DIM);
    out.iter_mut().for_each(|v| *v = S::zero());
    let view = EgoView::new(state);
    let agent_cell = (VIEW_SIZE / 2, VIEW_SIZE - 1);
    for vx in 0..VIEW_SIZE {
        for vy in 0..VIEW_SIZE {
            let (obj, color, st) = if (vx, vy) == agent_cell {
                match state.carried {
                    Some(color) => Cell::Key { color }.encode(),
                    None => Cell::Empty.encode(),
                }
            } else if view.is_visible(vx, vy) {
                view.cell(vx, vy).encode()
            } else {
                (ObjectKind::Unseen, Color::Red, 0)
            };
            let base = (vx * VIEW_SIZE + vy) * CHANNELS;
            out[base + obj as usize] = S::one();
            out[base + NUM_OBJECTS + color as usize] = S::one();
            out[base + NUM_OBJECTS + NUM_COLORS + st as usize] = S::one();
        }
    }
}

pub fn encode<S: Scalar>(state: &GridState) -> Vec<S> {
    let mut out = vec![S::zero(); OBS_DIM];
    encode_into(state, &mut out);
    out
}

/// Euclidean distance from the agent to the key of `color` when that key lies on the
/// grid, inside the window and unoccluded; [`OUT_OF_VIEW_DISTANCE`] otherwise.
pub fn key_distance(state: &GridState, color: Color) -> f64 {
    let Some((kx, ky)) = state.key_position(color) else {
        return OUT_OF_VIEW_DISTANCE;
    };
    let Some((vx, vy)) = world_to_view(state, kx, ky) else {
        return OUT_OF_VIEW_DISTANCE;
    };
    if !EgoView::new(state).is_visible(vx, vy) {
        return OUT_OF_VIEW_DISTANCE;
    }
    let (dx, dy) = ((kx - state.agent.0) as f64, (ky - state.agent.1) as f64);
    (dx * dx + dy * dy).sqrt()
}
