use super::grid::{NUM_COLORS, NUM_OBJECTS};
use super::view::CHANNELS;
use super::*;
use rand::Rng;

fn open_room(n: usize) -> GridState {
    let mut grid = Grid::new(n, n);
    grid.wall_rect();
    GridState {
        grid,
        agent: (1, 1),
        facing: Facing::East,
        carried: None,
        step_count: 0,
        correct_key_color: Color::Red,
    }
}

fn count(state: &GridState, cell: Cell) -> usize {
    state.grid.find(|c| c == cell).len()
}

#[test]
fn same_seed_same_layout() {
    let mut a = DoorKeyChange::new(EnvConfig::default()).unwrap();
    let mut b = DoorKeyChange::new(EnvConfig::default()).unwrap();
    for seed in 0..20 {
        assert_eq!(a.reset(seed), b.reset(seed));
    }
    assert_ne!(a.reset(1).grid, b.reset(2).grid.clone());
}

#[test]
fn layout_invariants_hold() {
    let mut env = DoorKeyChange::new(EnvConfig::default()).unwrap();
    for seed in 0..200 {
        let s = env.reset(seed).clone();
        assert_eq!(count(&s, Cell::Key { color: Color::Red }), 1);
        assert_eq!(count(&s, Cell::Key { color: Color::Blue }), 1);
        assert_eq!(count(&s, Cell::Door { color: Color::Red, state: DoorState::Locked }), 1);
        assert_eq!(count(&s, Cell::Goal), 1);
        assert_eq!(s.grid.get(s.agent.0, s.agent.1), Some(Cell::Empty));
        assert_eq!(s.correct_key_color, Color::Red);
    }
}

#[test]
fn too_small_grid_is_config_error() {
    assert!(matches!(DoorKeyChange::new(EnvConfig::new(4)), Err(crate::Error::Config(_))));
    assert!(DoorKeyChange::new(EnvConfig::new(5)).is_ok());
}

#[test]
fn reset_phase_follows_transfer() {
    let mut env = DoorKeyChange::new(EnvConfig::default()).unwrap();
    let before = env.reset(7).clone();
    assert_eq!(before.correct_key_color, Color::Red);
    let mut schedule = TransferSchedule::new(100);
    assert!(!schedule.inject(99, &mut env).unwrap());
    assert_eq!(env.state().correct_key_color, Color::Red);
    assert!(schedule.inject(100, &mut env).unwrap());
    // current episode flips immediately
    assert_eq!(env.state().correct_key_color, Color::Blue);
    let after = env.reset(7).clone();
    assert_eq!(after.correct_key_color, Color::Blue);
    // geometry is phase independent
    assert_eq!(before.grid, after.grid);
    assert_eq!(before.agent, after.agent);
    assert!(schedule.fire().is_err());
    assert!(!schedule.inject(1_000, &mut env).unwrap());
}

fn door_case(carried: Color, correct: Color) -> DoorState {
    let mut s = open_room(6);
    s.grid.set(3, 1, Cell::Door { color: Color::Red, state: DoorState::Locked });
    s.agent = (2, 1);
    s.facing = Facing::East;
    s.carried = Some(carried);
    s.correct_key_color = correct;
    let mut env = DoorKeyChange::new(EnvConfig::new(6)).unwrap();
    env.set_state(s);
    env.step(Action::Toggle as usize).unwrap();
    match env.state().grid.get(3, 1) {
        Some(Cell::Door { state, .. }) => state,
        other => panic!("door vanished: {other:?}"),
    }
}

#[test]
fn red_key_opens_door_only_before_transfer() {
    assert_eq!(door_case(Color::Red, Color::Red), DoorState::Open);
    assert_eq!(door_case(Color::Red, Color::Blue), DoorState::Locked);
    assert_eq!(door_case(Color::Blue, Color::Blue), DoorState::Open);
    assert_eq!(door_case(Color::Blue, Color::Red), DoorState::Locked);
}

#[test]
fn forward_into_wall_is_blocked() {
    let mut env = DoorKeyChange::new(EnvConfig::new(6)).unwrap();
    let mut s = open_room(6);
    s.facing = Facing::North;
    env.set_state(s);
    let r = env.step(Action::Forward as usize).unwrap();
    assert_eq!(env.state().agent, (1, 1));
    assert_eq!(r.reward, 0.0);
    assert!(!r.done());
}

#[test]
fn goal_reward_and_truncation() {
    let cfg = EnvConfig { grid_size: 6, max_steps: 10 };
    let mut env = DoorKeyChange::new(cfg).unwrap();
    let mut s = open_room(6);
    s.grid.set(2, 1, Cell::Goal);
    env.set_state(s.clone());
    env.step(Action::Left as usize).unwrap();
    env.step(Action::Right as usize).unwrap();
    let r = env.step(Action::Forward as usize).unwrap();
    assert!(r.terminated && !r.truncated);
    assert!((r.reward - (1.0 - 0.9 * 3.0 / 10.0)).abs() < 1e-12);
    assert!(env.step(Action::Left as usize).is_err());

    env.set_state(s);
    for i in 0..10 {
        let r = env.step(Action::Done as usize).unwrap();
        assert_eq!(r.truncated, i == 9);
        assert_eq!(r.reward, 0.0);
    }
}

#[test]
fn action_out_of_range_rejected() {
    let mut env = DoorKeyChange::new(EnvConfig::default()).unwrap();
    assert!(matches!(env.step(7), Err(crate::Error::RejectedInput(_))));
}

#[test]
fn pickup_and_drop() {
    let mut env = DoorKeyChange::new(EnvConfig::new(6)).unwrap();
    let mut s = open_room(6);
    s.grid.set(2, 1, Cell::Key { color: Color::Blue });
    env.set_state(s);
    env.step(Action::Pickup as usize).unwrap();
    assert_eq!(env.state().carried, Some(Color::Blue));
    assert_eq!(env.state().grid.get(2, 1), Some(Cell::Empty));
    env.step(Action::Drop as usize).unwrap();
    assert_eq!(env.state().carried, None);
    assert_eq!(env.state().grid.get(2, 1), Some(Cell::Key { color: Color::Blue }));
}

#[test]
fn label_examples() {
    // out of view: key behind the agent
    let mut s = open_room(10);
    s.agent = (3, 3);
    s.facing = Facing::North;
    s.grid.set(3, 7, Cell::Key { color: Color::Red });
    assert_eq!(correct_key_distance_label(&s), 14.0);
    // axis-aligned, in view
    s.facing = Facing::South;
    assert_eq!(correct_key_distance_label(&s), 4.0);
    // 3-4-5 triangle
    let mut s = open_room(10);
    s.agent = (2, 1);
    s.facing = Facing::South;
    s.grid.set(5, 5, Cell::Key { color: Color::Red });
    assert_eq!(correct_key_distance_label(&s), 5.0);
    // occluded by a wall between agent and key
    for x in 1..9 {
        s.grid.set(x, 3, Cell::Wall);
    }
    assert_eq!(correct_key_distance_label(&s), 14.0);
}

#[test]
fn transfer_relabels_same_state() {
    let mut s = open_room(10);
    s.agent = (4, 1);
    s.facing = Facing::South;
    s.grid.set(4, 3, Cell::Key { color: Color::Red });
    s.grid.set(1, 5, Cell::Key { color: Color::Blue });
    let mut env = DoorKeyChange::new(EnvConfig::new(10)).unwrap();
    env.set_state(s);
    assert_eq!(correct_key_distance_label(env.state()), 2.0);
    let mut schedule = TransferSchedule::new(5);
    schedule.inject(5, &mut env).unwrap();
    assert_eq!(correct_key_distance_label(env.state()), 5.0);

    // both keys out of view: label is the cap on either side
    let mut s = open_room(10);
    s.agent = (4, 1);
    s.facing = Facing::North;
    s.grid.set(4, 3, Cell::Key { color: Color::Red });
    s.grid.set(1, 5, Cell::Key { color: Color::Blue });
    let gt = s.ground_truth();
    assert_eq!(gt.label_for(Color::Red), 14.0);
    assert_eq!(gt.label_for(Color::Blue), 14.0);
}

#[test]
fn carried_key_is_out_of_view() {
    let mut s = open_room(6);
    s.carried = Some(Color::Red);
    assert_eq!(correct_key_distance_label(&s), 14.0);
}

#[test]
fn random_walk_invariants() {
    let mut env = DoorKeyChange::new(EnvConfig::default()).unwrap();
    let mut rng = crate::nn::seeded_rng(3);
    let mut seed = 0;
    env.reset(seed);
    let mut saw_in_view = false;
    for _ in 0..5_000 {
        let obs: Vec<f64> = env.observe();
        assert_eq!(obs.len(), OBS_DIM);
        for cell in obs.chunks(CHANNELS) {
            let obj: f64 = cell[..NUM_OBJECTS].iter().sum();
            let col: f64 = cell[NUM_OBJECTS..NUM_OBJECTS + NUM_COLORS].iter().sum();
            let st: f64 = cell[NUM_OBJECTS + NUM_COLORS..].iter().sum();
            assert_eq!((obj, col, st), (1.0, 1.0, 1.0));
            assert!(cell.iter().all(|&v| v == 0.0 || v == 1.0));
        }
        let s = env.state();
        assert!(s.grid.get(s.agent.0, s.agent.1).unwrap().can_overlap());
        for color in [Color::Red, Color::Blue] {
            let d = view::key_distance(s, color);
            assert!(d > 0.0 && d <= 14.0);
            if d < 14.0 {
                saw_in_view = true;
                assert!(d <= (3.0f64 * 3.0 + 6.0 * 6.0).sqrt());
            }
        }
        let r = env.step(rng.gen_range(0..NUM_ACTIONS)).unwrap();
        assert!((0.0..=1.0).contains(&r.reward));
        assert!(r.reward == 0.0 || r.terminated);
        if r.done() {
            seed += 1;
            env.reset(seed);
        }
    }
    assert!(saw_in_view);
}

#[test]
fn view_coordinates_round_trip() {
    let mut s = open_room(12);
    s.agent = (5, 6);
    for f in 0..4 {
        s.facing = Facing::from_index(f);
        for vx in 0..VIEW_SIZE {
            for vy in 0..VIEW_SIZE {
                let (x, y) = view::view_to_world(&s, vx, vy);
                assert_eq!(view::world_to_view(&s, x, y), Some((vx, vy)));
            }
        }
        assert_eq!(view::view_to_world(&s, 3, 6), s.agent);
    }
}

#[test]
fn vec_env_fires_transfer_once() {
    let mut venv = VecEnv::new(EnvConfig::default(), 2, 10, 1).unwrap();
    for _ in 0..4 {
        venv.step(&[6, 6]).unwrap();
    }
    assert!(!venv.transfer_fired());
    venv.step(&[6, 6]).unwrap();
    assert_eq!(venv.global_step(), 10);
    assert!(venv.transfer_fired());
    assert_eq!(venv.state(0).correct_key_color, Color::Blue);
    assert_eq!(venv.state(1).correct_key_color, Color::Blue);
}
