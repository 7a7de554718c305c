//! DoorKeyChange gridworld with an unannounced mid-run transfer.

pub mod doorkey;
pub mod grid;
pub mod state;
pub mod view;

pub use doorkey::{Action, DoorKeyChange, EnvConfig, StepResult, NUM_ACTIONS};
pub use grid::{Cell, Color, DoorState, Facing, Grid};
pub use state::{correct_key_distance_label, GridState, GroundTruth};
pub use view::{encode, EgoView, OBS_DIM, OUT_OF_VIEW_DISTANCE, VIEW_SIZE};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::nn::{seeded_rng, SeededRng};

/// One-shot switch of the door semantics at a configured global step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferSchedule {
    pub transfer_step: u64,
    pub fired: bool,
}

impl TransferSchedule {
    pub fn new(transfer_step: u64) -> Self {
        TransferSchedule { transfer_step, fired: false }
    }

    pub fn due(&self, global_step: u64) -> bool {
        !self.fired && global_step >= self.transfer_step
    }

    /// Fires the transfer if due, flipping the environment's door semantics.
    /// Returns whether it fired on this call.
    pub fn inject(&mut self, global_step: u64, env: &mut DoorKeyChange) -> Result<bool> {
        if !self.due(global_step) {
            return Ok(false);
        }
        self.fire()?;
        env.switch_to_blue();
        Ok(true)
    }

    pub fn fire(&mut self) -> Result<()> {
        if self.fired {
            return Err(Error::Invariant("transfer fired twice".into()));
        }
        self.fired = true;
        Ok(())
    }
}

/// Outcome of one environment inside a [`VecEnv`] step.
#[derive(Debug, Clone)]
pub struct EnvStep {
    pub result: StepResult,
    /// State the finished episode ended in; `None` while the episode continues.
    pub final_state: Option<GridState>,
}

/// `k` independent environments stepped in lockstep, auto-resetting on episode end.
///
/// Owns the transfer schedule; the global step counts every environment step.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<DoorKeyChange>,
    schedule: TransferSchedule,
    global_step: u64,
    episode_seeds: SeededRng,
}

impl VecEnv {
    pub fn new(config: EnvConfig, num_envs: usize, transfer_step: u64, seed: u64) -> Result<Self> {
        if num_envs == 0 {
            return Err(Error::Config("num_envs must be positive".into()));
        }
        let mut episode_seeds = seeded_rng(seed);
        let mut envs = Vec::with_capacity(num_envs);
        for _ in 0..num_envs {
            let mut env = DoorKeyChange::new(config)?;
            env.reset(episode_seeds.next_u64());
            envs.push(env);
        }
        Ok(VecEnv { envs, schedule: TransferSchedule::new(transfer_step), global_step: 0, episode_seeds })
    }

    pub fn num_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn transfer_fired(&self) -> bool {
        self.schedule.fired
    }

    pub fn env(&self, i: usize) -> &DoorKeyChange {
        &self.envs[i]
    }

    pub fn state(&self, i: usize) -> &GridState {
        self.envs[i].state()
    }

    pub fn observe_all<S: crate::Scalar>(&self, out: &mut [S]) {
        for (env, chunk) in self.envs.iter().zip(out.chunks_mut(OBS_DIM)) {
            env.observe_into(chunk);
        }
    }

    /// Steps every environment once; finished episodes are reset with fresh seeds.
    pub fn step(&mut self, actions: &[usize]) -> Result<Vec<EnvStep>> {
        if actions.len() != self.envs.len() {
            return crate::error::reject("one action per environment required");
        }
        let mut out = Vec::with_capacity(self.envs.len());
        for (env, &a) in self.envs.iter_mut().zip(actions) {
            let result = env.step(a)?;
            self.global_step += 1;
            let final_state = if result.done() {
                let fin = env.state().clone();
                env.reset(self.episode_seeds.next_u64());
                Some(fin)
            } else {
                None
            };
            out.push(EnvStep { result, final_state });
        }
        if self.schedule.due(self.global_step) {
            self.schedule.fire()?;
            for env in &mut self.envs {
                env.switch_to_blue();
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
