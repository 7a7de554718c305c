use rand::Rng;

use super::grid::{Cell, Color, DoorState, Facing, Grid};
use super::state::GridState;
use super::view;
use crate::error::{reject, Error, Result};
use crate::nn::seeded_rng;
use crate::Scalar;

pub const NUM_ACTIONS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left = 0,
    Right = 1,
    Forward = 2,
    Pickup = 3,
    Drop = 4,
    Toggle = 5,
    Done = 6,
}

impl TryFrom<usize> for Action {
    type Error = Error;

    fn try_from(v: usize) -> Result<Action> {
        Ok(match v {
            0 => Action::Left,
            1 => Action::Right,
            2 => Action::Forward,
            3 => Action::Pickup,
            4 => Action::Drop,
            5 => Action::Toggle,
            6 => Action::Done,
            _ => return reject(format!("action {v} outside [0, {NUM_ACTIONS})")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    pub grid_size: usize,
    pub max_steps: usize,
}

impl EnvConfig {
    /// `max_steps` defaults to `10 * W * H`.
    pub fn new(grid_size: usize) -> Self {
        EnvConfig { grid_size, max_steps: 10 * grid_size * grid_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 5 {
            return Err(Error::Config(format!(
                "grid_size {} too small for a door, two keys and a goal (minimum 5)",
                self.grid_size
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::new(8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Door-key gridworld whose door semantics can be switched mid-run: before the switch
/// the red key opens the red door, afterwards only the blue key does.
#[derive(Debug, Clone)]
pub struct DoorKeyChange {
    config: EnvConfig,
    state: GridState,
    correct_key_color: Color,
    finished: bool,
}

impl DoorKeyChange {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let state = generate_layout(&config, 0, Color::Red);
        Ok(DoorKeyChange { config, state, correct_key_color: Color::Red, finished: false })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn correct_key_color(&self) -> Color {
        self.correct_key_color
    }

    /// New episode with the layout determined by `seed`.
    pub fn reset(&mut self, seed: u64) -> &GridState {
        self.state = generate_layout(&self.config, seed, self.correct_key_color);
        self.finished = false;
        &self.state
    }

    pub fn observe<S: Scalar>(&self) -> Vec<S> {
        view::encode(&self.state)
    }

    pub fn observe_into<S: Scalar>(&self, out: &mut [S]) {
        view::encode_into(&self.state, out)
    }

    /// Replaces the current state, e.g. to replay a recorded or hand-built situation.
    pub fn set_state(&mut self, state: GridState) {
        self.correct_key_color = state.correct_key_color;
        self.state = state;
        self.finished = false;
    }

    /// Switches door semantics to the blue key, for this episode and all later ones.
    pub(crate) fn switch_to_blue(&mut self) {
        self.correct_key_color = Color::Blue;
        self.state.correct_key_color = Color::Blue;
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let action = Action::try_from(action)?;
        if self.finished {
            return reject("step called on a finished episode; reset first");
        }
        let st = &mut self.state;
        st.step_count += 1;
        let mut reward = 0.0;
        let mut terminated = false;
        let (fx, fy) = st.front();
        let front = st.grid.get(fx, fy).unwrap_or(Cell::Wall);
        match action {
            Action::Left => st.facing = st.facing.turn_left(),
            Action::Right => st.facing = st.facing.turn_right(),
            Action::Forward => {
                if front.can_overlap() {
                    st.agent = (fx, fy);
                    if front == Cell::Goal {
                        terminated = true;
                        reward = 1.0 - 0.9 * (st.step_count as f64 / self.config.max_steps as f64);
                    }
                }
            }
            Action::Pickup => {
                if let (Cell::Key { color }, None) = (front, st.carried) {
                    st.carried = Some(color);
                    st.grid.set(fx, fy, Cell::Empty);
                }
            }
            Action::Drop => {
                if let (Cell::Empty, Some(color)) = (front, st.carried) {
                    st.grid.set(fx, fy, Cell::Key { color });
                    st.carried = None;
                }
            }
            Action::Toggle => {
                if let Cell::Door { color, state } = front {
                    let next = match state {
                        DoorState::Locked if st.carried == Some(st.correct_key_color) => DoorState::Open,
                        DoorState::Locked => DoorState::Locked,
                        DoorState::Closed => DoorState::Open,
                        DoorState::Open => DoorState::Closed,
                    };
                    st.grid.set(fx, fy, Cell::Door { color, state: next });
                }
            }
            Action::Done => {}
        }
        let truncated = !terminated && st.step_count >= self.config.max_steps;
        self.finished = terminated || truncated;
        Ok(StepResult { reward, terminated, truncated })
    }
}

/// Splitting wall with a locked red door, goal in the far corner, agent and both keys
/// on the near side.
fn generate_layout(config: &EnvConfig, seed: u64, correct_key_color: Color) -> GridState {
    let n = config.grid_size;
    let mut rng = seeded_rng(seed);
    let mut grid = Grid::new(n, n);
    grid.wall_rect();
    grid.set(n as i32 - 2, n as i32 - 2, Cell::Goal);
    let split = rng.gen_range(2..=n - 3) as i32;
    for y in 0..n as i32 {
        grid.set(split, y, Cell::Wall);
    }
    let door_y = rng.gen_range(1..=n - 3) as i32;
    grid.set(split, door_y, Cell::Door { color: Color::Red, state: DoorState::Locked });

    let free_left = |rng: &mut crate::nn::SeededRng, grid: &Grid, taken: &[(i32, i32)]| loop {
        let x = rng.gen_range(1..split);
        let y = rng.gen_range(1..n as i32 - 1);
        if grid.get(x, y) == Some(Cell::Empty) && !taken.contains(&(x, y)) {
            break (x, y);
        }
    };
    let agent = free_left(&mut rng, &grid, &[]);
    let facing = Facing::from_index(rng.gen_range(0..4));
    let red = free_left(&mut rng, &grid, &[agent]);
    grid.set(red.0, red.1, Cell::Key { color: Color::Red });
    let blue = free_left(&mut rng, &grid, &[agent]);
    grid.set(blue.0, blue.1, Cell::Key { color: Color::Blue });

    GridState { grid, agent, facing, carried: None, step_count: 0, correct_key_color }
}
